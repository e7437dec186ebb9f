//! Kaczmarz projection solvers and the distribution-constrained Proj-D
//! estimator.
//!
//! Proj-D alternates blocks of nonnegative Kaczmarz cycles with a *snap*: the
//! iterate is replaced by a fresh sample from the target normalized cdf,
//! assigned rank-for-rank to the current components and scaled by the `λ` that
//! best matches the link loads. A final block of projection-only cycles then
//! pulls the snapped point back onto the measurement constraints.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::dist::{ks_distance, normalize_by_max, rng_from_seed, NormalizedCdf};
use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix};
use crate::tm::TrafficVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowOrder {
    /// Rows `0..m` in order.
    #[default]
    Cyclic,
    /// `m` rows per cycle, each drawn with probability `∝ ‖a_i‖²`.
    Randomized,
}

impl std::str::FromStr for RowOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cyclic" => Ok(Self::Cyclic),
            "random" | "randomized" => Ok(Self::Randomized),
            other => Err(Error::InvalidConfig(format!("unknown row order `{other}`"))),
        }
    }
}

/// Projects `x` onto the hyperplane `a_i · x = b_i` of row `i`; with `nonneg`
/// the result is clipped componentwise at zero.
pub fn kaczmarz_project_row(x: &mut [f64], a: &CsrMatrix, i: usize, b_i: f64, nonneg: bool) -> Result<()> {
    if x.len() != a.cols() {
        return Err(Error::mismatch("iterate", a.cols(), x.len()));
    }
    let norm_sq = a.row(i).norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::ZeroRow(i));
    }
    project(x, a, i, b_i, norm_sq, nonneg);
    if nonneg {
        for v in x.iter_mut() {
            *v = v.max(0.0);
        }
    }
    Ok(())
}

/// Row update touching only the row's support. With `nonneg` the caller
/// guarantees `x` is already nonnegative elsewhere.
#[inline]
fn project(x: &mut [f64], a: &CsrMatrix, i: usize, b_i: f64, norm_sq: f64, nonneg: bool) {
    let row = a.row(i);
    let step = (b_i - row.dot(x)) / norm_sq;
    if step == 0.0 {
        return;
    }
    for (&j, &aij) in row.cols.iter().zip(row.values) {
        let v = x[j] + step * aij;
        x[j] = if nonneg { v.max(0.0) } else { v };
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], b_norm: f64) -> f64 {
    let ax = a.mul_vec(x).expect("dimensions checked");
    let r: f64 = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    if b_norm > 0.0 {
        r / b_norm
    } else {
        r
    }
}

/// Precomputed per-row data for repeated sweeps.
struct Sweeper<'a> {
    a: &'a CsrMatrix,
    b: &'a [f64],
    norms: Vec<f64>,
    b_norm: f64,
    order: RowOrder,
    picker: Option<WeightedIndex<f64>>,
    nonneg: bool,
}

impl<'a> Sweeper<'a> {
    fn new(a: &'a CsrMatrix, b: &'a [f64], order: RowOrder, nonneg: bool) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::mismatch("link loads", a.rows(), b.len()));
        }
        let norms: Vec<f64> = a.row_iter().map(|r| r.norm_sq()).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroRow(i));
        }
        let picker = match order {
            RowOrder::Cyclic => None,
            RowOrder::Randomized => Some(
                WeightedIndex::new(&norms).map_err(|e| Error::InvalidConfig(format!("row weights: {e}")))?,
            ),
        };
        Ok(Self {
            a,
            b,
            b_norm: norm2(b),
            norms,
            order,
            picker,
            nonneg,
        })
    }

    fn cycle(&self, x: &mut [f64], rng: &mut impl Rng) {
        match self.order {
            RowOrder::Cyclic => {
                for i in 0..self.a.rows() {
                    project(x, self.a, i, self.b[i], self.norms[i], self.nonneg);
                }
            }
            RowOrder::Randomized => {
                let picker = self.picker.as_ref().expect("randomized sweeper has a picker");
                for _ in 0..self.a.rows() {
                    let i = picker.sample(rng);
                    project(x, self.a, i, self.b[i], self.norms[i], self.nonneg);
                }
            }
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        relative_residual(self.a, x, self.b, self.b_norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionConfig {
    pub max_cycles: usize,
    /// Stop once `‖Ax − b‖ / ‖b‖` drops to this value.
    pub tolerance: f64,
    pub row_order: RowOrder,
    pub nonneg: bool,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            max_cycles: 10_000,
            tolerance: 1e-9,
            row_order: RowOrder::Cyclic,
            nonneg: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSolution {
    pub x: Vec<f64>,
    pub cycles: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Plain (or nonnegative) Kaczmarz from `start`, or from zero when `None`.
pub fn cyclic_projection_solve(
    a: &CsrMatrix,
    b: &[f64],
    start: Option<&[f64]>,
    config: &ProjectionConfig,
) -> Result<ProjectionSolution> {
    if !config.tolerance.is_finite() || config.tolerance <= 0.0 {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let sweeper = Sweeper::new(a, b, config.row_order, config.nonneg)?;
    let mut x = match start {
        Some(s) if s.len() != a.cols() => return Err(Error::mismatch("start vector", a.cols(), s.len())),
        Some(s) => s.to_vec(),
        None => vec![0.0; a.cols()],
    };
    if config.nonneg {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut res = sweeper.residual(&x);
    let mut cycles = 0;
    while res > config.tolerance && cycles < config.max_cycles {
        sweeper.cycle(&mut x, &mut rng);
        cycles += 1;
        res = sweeper.residual(&x);
    }
    Ok(ProjectionSolution {
        x,
        cycles,
        relative_residual: res,
        converged: res <= config.tolerance,
    })
}

/// Optimal scale for a candidate direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaFit {
    pub lambda: f64,
    /// `Σ_j (λ a_j y − b_j)²` at the returned `λ`.
    pub deviation: f64,
}

/// Deviation `D(λ) = Σ_j (λ (Ay)_j − b_j)²` for a precomputed `Ay`.
pub fn deviation(ay: &[f64], b: &[f64], lambda: f64) -> f64 {
    ay.iter().zip(b).map(|(u, v)| (lambda * u - v).powi(2)).sum()
}

/// Closed-form minimizer `λ = Σ (a_j y) b_j / Σ (a_j y)²`, clamped at zero.
pub fn optimal_lambda(a: &CsrMatrix, y: &[f64], b: &[f64]) -> Result<LambdaFit> {
    if b.len() != a.rows() {
        return Err(Error::mismatch("link loads", a.rows(), b.len()));
    }
    let ay = a.mul_vec(y)?;
    lambda_for(&ay, b)
}

fn lambda_for(ay: &[f64], b: &[f64]) -> Result<LambdaFit> {
    let den: f64 = ay.iter().map(|v| v * v).sum();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::DegenerateCandidate);
    }
    let num: f64 = ay.iter().zip(b).map(|(u, v)| u * v).sum();
    let lambda = (num / den).max(0.0);
    Ok(LambdaFit {
        lambda,
        deviation: deviation(ay, b, lambda),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapReport {
    pub lambda: f64,
    pub deviation: f64,
    pub candidate_index: usize,
}

/// Indices of `x` sorted ascending by value, ties by index.
fn rank_order(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    idx
}

/// Replaces `x` by the best of `retries` rank-matched, optimally scaled
/// samples from `target`.
pub fn snap_to_distribution(
    x: &[f64],
    a: &CsrMatrix,
    b: &[f64],
    target: &NormalizedCdf,
    retries: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, SnapReport)> {
    if x.len() != a.cols() {
        return Err(Error::mismatch("iterate", a.cols(), x.len()));
    }
    if b.len() != a.rows() {
        return Err(Error::mismatch("link loads", a.rows(), b.len()));
    }
    if retries == 0 {
        return Err(Error::InvalidConfig("retries must be at least 1".into()));
    }
    let order = rank_order(x);
    let mut best: Option<(Vec<f64>, SnapReport)> = None;
    let mut candidate = vec![0.0; x.len()];
    for c in 0..retries {
        let mut y = target.sample_normalized(x.len(), rng);
        y.sort_by(f64::total_cmp);
        for (&slot, &v) in order.iter().zip(&y) {
            candidate[slot] = v;
        }
        let fit = match lambda_for(&a.mul_vec(&candidate)?, b) {
            Ok(fit) => fit,
            Err(Error::DegenerateCandidate) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, r)| fit.deviation < r.deviation) {
            let scaled = candidate.iter().map(|v| fit.lambda * v).collect();
            let report = SnapReport {
                lambda: fit.lambda,
                deviation: fit.deviation,
                candidate_index: c,
            };
            best = Some((scaled, report));
        }
    }
    best.ok_or(Error::DegenerateCandidate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjDConfig {
    /// Outer iterations, each ending in a snap (`K`).
    pub outer_iterations: usize,
    /// Projection cycles before each snap (`t`).
    pub inner_cycles: usize,
    /// Candidate draws per snap; the lowest-deviation one is kept.
    pub retries: usize,
    pub row_order: RowOrder,
    /// Relative residual at which projection blocks stop early.
    pub tolerance: f64,
    /// Projection-only cycles after the last snap; `None` means `inner_cycles`.
    /// `Some(0)` ends on a snap.
    pub polish_cycles: Option<usize>,
    pub seed: u64,
}

impl Default for ProjDConfig {
    fn default() -> Self {
        Self {
            outer_iterations: 20,
            inner_cycles: 50,
            retries: 8,
            row_order: RowOrder::Cyclic,
            tolerance: 1e-9,
            polish_cycles: None,
            seed: 0,
        }
    }
}

impl ProjDConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.inner_cycles == 0 || self.retries == 0 {
            return Err(Error::InvalidConfig(
                "outer iterations, inner cycles and retries must all be at least 1".into(),
            ));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_polish_cycles(&self) -> usize {
        self.polish_cycles.unwrap_or(self.inner_cycles)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProjDDiagnostics {
    /// Relative link residual after every projection cycle.
    pub residual_trace: Vec<f64>,
    /// `‖x_new − x_old‖ / ‖x_old‖` for every projection cycle.
    pub change_trace: Vec<f64>,
    pub snaps: Vec<SnapReport>,
    pub final_relative_residual: f64,
    /// KS distance between the normalized positive estimate and the target;
    /// `None` for an all-zero estimate.
    pub final_ks: Option<f64>,
}

/// Removes links that carry no routed demand. Such a row must have zero load;
/// a positive load on it cannot be explained by any demand vector.
pub fn drop_idle_rows(a: &CsrMatrix, b: &[f64]) -> Result<(CsrMatrix, Vec<f64>)> {
    if b.len() != a.rows() {
        return Err(Error::mismatch("link loads", a.rows(), b.len()));
    }
    let mut keep = Vec::with_capacity(a.rows());
    for (i, &load) in b.iter().enumerate() {
        if a.row(i).nnz() > 0 {
            keep.push(i);
        } else if load != 0.0 {
            return Err(Error::InvalidVector(format!(
                "link {i} carries load {load} but no support pair is routed over it"
            )));
        }
    }
    let kept_b = keep.iter().map(|&i| b[i]).collect();
    Ok((a.select_rows(&keep), kept_b))
}

/// Proj-D estimate of the demands behind loads `b`.
pub fn proj_d_estimate(
    a: &CsrMatrix,
    b: &[f64],
    target: &NormalizedCdf,
    config: &ProjDConfig,
) -> Result<(TrafficVector, ProjDDiagnostics)> {
    config.validate()?;
    if let Some(bad) = b.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidVector(format!("link load {bad} is not a finite nonnegative value")));
    }
    let sweeper = Sweeper::new(a, b, config.row_order, true)?;
    let mut diag = ProjDDiagnostics::default();
    let mut x = vec![0.0; a.cols()];
    if b.iter().all(|&v| v == 0.0) {
        return Ok((TrafficVector::zeros(a.cols()), diag));
    }
    let mut rng = rng_from_seed(config.seed);

    let project_block = |x: &mut Vec<f64>, cycles: usize, rng: &mut _, diag: &mut ProjDDiagnostics| {
        let mut prev = x.clone();
        for _ in 0..cycles {
            sweeper.cycle(x, rng);
            let res = sweeper.residual(x);
            let prev_norm = norm2(&prev);
            let change = norm2(&x.iter().zip(&prev).map(|(u, v)| u - v).collect::<Vec<_>>());
            diag.residual_trace.push(res);
            diag.change_trace.push(if prev_norm > 0.0 { change / prev_norm } else { change });
            prev.copy_from_slice(x);
            if res <= config.tolerance {
                break;
            }
        }
    };

    for _ in 0..config.outer_iterations {
        project_block(&mut x, config.inner_cycles, &mut rng, &mut diag);
        let (snapped, report) = snap_to_distribution(&x, a, b, target, config.retries, &mut rng)?;
        x = snapped;
        diag.snaps.push(report);
    }
    project_block(&mut x, config.effective_polish_cycles(), &mut rng, &mut diag);

    diag.final_relative_residual = sweeper.residual(&x);
    let normalized = normalize_by_max(&x);
    diag.final_ks = if normalized.is_empty() {
        None
    } else {
        Some(ks_distance(&normalized, target)?)
    };
    Ok((TrafficVector::from_clamped(x), diag))
}
