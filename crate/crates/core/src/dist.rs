//! Normalized empirical cdfs: the max-ratio construction, power-law sampling,
//! maximum-likelihood fitting and Kolmogorov–Smirnov distances.
//!
//! A sample's *normalized* empirical cdf is the step cdf of the sample after
//! dividing every point by the sample maximum, so it lives on `[0, 1]` and
//! always reaches 1 at 1. Dividing `n` iid `Beta(α, 1)` draws by their maximum
//! yields a normalized cdf of `y^α` for every `n`, which is how demands with a
//! power-law profile are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seedable counter-based generator used throughout the crate.
pub type TmRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest value a normalized sample may take. Power laws with tiny `α`
/// produce ratios far below the `f64` range; they are floored here so every
/// sample stays strictly positive with a finite logarithm.
pub const MIN_NORMALIZED: f64 = f64::MIN_POSITIVE;

/// Absolute tolerance of the max-ratio quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Distribution of the raw (un-normalized) iid draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceDistribution {
    /// `F(x) = x^α`, `f(x) = α x^(α−1)` on `[0, 1]`.
    BetaAlphaOne { alpha: f64 },
    Uniform,
}

impl SourceDistribution {
    pub fn beta_alpha_one(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::BetaAlphaOne { alpha })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match *self {
            Self::BetaAlphaOne { alpha } => x.powf(alpha),
            Self::Uniform => x,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            Self::BetaAlphaOne { alpha } => alpha * x.powf(alpha - 1.0),
            Self::Uniform => 1.0,
        }
    }

    /// Inverse cdf on `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::BetaAlphaOne { alpha } => u.powf(1.0 / alpha),
            Self::Uniform => u,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must be positive and finite, got {alpha}")))
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
        ok: &mut bool,
    ) -> f64 {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth == 0 {
            *ok = false;
            return left + right + delta / 15.0;
        }
        recurse(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1, ok)
            + recurse(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1, ok)
    }

    let (fa, fb, m) = (f(a), f(b), 0.5 * (a + b));
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut ok = true;
    let estimate = recurse(&f, (a, fa), (m, fm), (b, fb), whole, tol, MAX_DEPTH, &mut ok);
    if ok && estimate.is_finite() {
        Ok(estimate)
    } else {
        Err(Error::QuadratureFailure { tolerance: tol, estimate })
    }
}

/// cdf `G(y) = n ∫ F(yt) F(t)^(n−2) f(t) dt` of the ratio `X_i / max_j X_j`
/// for a non-maximal draw among `n` iid draws from `src`.
///
/// The integral is evaluated after substituting `u = F(t)`, which turns it into
/// `n ∫₀¹ F(y·F⁻¹(u)) u^(n−2) du` and removes the density singularity at zero
/// that `Beta(α, 1)` has for `α < 1`.
pub fn normalized_cdf_of_max_ratio(src: &SourceDistribution, n: usize, y: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need n >= 2 draws, got {n}")));
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidConfig(format!("y must lie in [0, 1], got {y}")));
    }
    let nf = n as f64;
    let power = (n - 2) as i32;
    let integrand = |u: f64| nf * src.cdf(y * src.quantile(u)) * u.powi(power);
    adaptive_simpson(integrand, 0.0, 1.0, QUADRATURE_TOLERANCE)
}

/// Inverse-cdf transform of a uniform `u ∈ (0, 1]` into a `Beta(α, 1)` draw.
pub fn beta_alpha_one_from_uniform(u: f64, alpha: f64) -> f64 {
    u.powf(1.0 / alpha)
}

fn open_unit(rng: &mut impl Rng) -> f64 {
    // random() is in [0, 1); flip it to (0, 1]
    1.0 - rng.random::<f64>()
}

/// One `Beta(α, 1)` draw.
pub fn beta_alpha_one_sample(alpha: f64, rng: &mut impl Rng) -> f64 {
    beta_alpha_one_from_uniform(open_unit(rng), alpha)
}

/// `n` values whose normalized empirical cdf follows `y^α`: iid `Beta(α, 1)`
/// draws divided by their maximum. The maximum maps to exactly 1.
///
/// Computed in log space (`ln X = ln U / α`) so that the ratios stay accurate
/// even when the raw draws underflow.
pub fn sample_normalized_power_law(n: usize, alpha: f64, rng: &mut impl Rng) -> Vec<f64> {
    let logs: Vec<f64> = (0..n).map(|_| open_unit(rng).ln() / alpha).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.into_iter()
        .map(|l| (l - top).exp().max(MIN_NORMALIZED))
        .collect()
}

/// Target normalized cdf on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizedCdf {
    /// `G(y) = y^α`.
    PowerLaw { alpha: f64 },
    /// Step function jumping by `1/k` at each of the `k` sorted points; the last
    /// point is 1.
    Tabulated { points: Vec<f64> },
}

impl NormalizedCdf {
    pub fn power_law(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::PowerLaw { alpha })
    }

    /// Normalized empirical cdf of the strictly positive entries of `values`.
    pub fn tabulated(values: &[f64]) -> Result<Self> {
        let points = normalize_by_max(values);
        if points.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        Ok(Self::Tabulated { points })
    }

    /// `G(y)`.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Self::PowerLaw { alpha } => {
                if y <= 0.0 {
                    0.0
                } else if y >= 1.0 {
                    1.0
                } else {
                    y.powf(*alpha)
                }
            }
            Self::Tabulated { points } => points.partition_point(|&p| p <= y) as f64 / points.len() as f64,
        }
    }

    /// `G(y−)`, the left limit.
    pub fn eval_left(&self, y: f64) -> f64 {
        match self {
            Self::PowerLaw { .. } => self.eval(y),
            Self::Tabulated { points } => points.partition_point(|&p| p < y) as f64 / points.len() as f64,
        }
    }

    /// Generalized inverse `inf{y : G(y) ≥ u}` for `u ∈ (0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::PowerLaw { alpha } => beta_alpha_one_from_uniform(u.clamp(0.0, 1.0), *alpha),
            Self::Tabulated { points } => {
                let k = points.len();
                let idx = ((u * k as f64).ceil() as usize).clamp(1, k) - 1;
                points[idx]
            }
        }
    }

    /// `n` values with this normalized cdf, max exactly 1, in draw order.
    pub fn sample_normalized(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Self::PowerLaw { alpha } => sample_normalized_power_law(n, *alpha, rng),
            Self::Tabulated { .. } => {
                let draws: Vec<f64> = (0..n).map(|_| self.quantile(open_unit(rng))).collect();
                let top = draws.iter().copied().fold(0.0, f64::max);
                draws.into_iter().map(|d| (d / top).max(MIN_NORMALIZED)).collect()
            }
        }
    }
}

/// Strictly positive entries divided by their maximum, sorted ascending.
pub fn normalize_by_max(values: &[f64]) -> Vec<f64> {
    let mut pos: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0 && v.is_finite()).collect();
    let top = pos.iter().copied().fold(0.0, f64::max);
    for v in &mut pos {
        *v /= top;
    }
    pos.sort_by(f64::total_cmp);
    pos
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub n_positive: usize,
}

/// Closed-form MLE of `α` for the density `α y^(α−1)` on `[0, 1]`, applied to
/// the positive demands normalized by their maximum.
pub fn fit_alpha_mle(demands: &[f64]) -> Result<AlphaFit> {
    fit_alpha_mle_pooled(&[demands])
}

/// MLE over several TMs, each normalized by its own maximum before pooling.
pub fn fit_alpha_mle_pooled<T: AsRef<[f64]>>(tms: &[T]) -> Result<AlphaFit> {
    let mut k = 0usize;
    let mut log_sum = 0.0;
    for tm in tms {
        let normalized = normalize_by_max(tm.as_ref());
        k += normalized.len();
        log_sum += normalized.iter().map(|y| y.ln()).sum::<f64>();
    }
    if k < 2 {
        return Err(Error::InsufficientData { needed: 2, got: k });
    }
    if log_sum == 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(AlphaFit {
        alpha: -(k as f64) / log_sum,
        n_positive: k,
    })
}

/// Sup-norm distance between the empirical cdf of `samples` and `target`.
pub fn ks_distance(samples: &[f64], target: &NormalizedCdf) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidVector("KS distance of an empty sample".into()));
    }
    if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidVector(format!("KS sample {bad} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;

    let mut candidates = sorted.clone();
    if let NormalizedCdf::Tabulated { points } = target {
        candidates.extend_from_slice(points);
        candidates.sort_by(f64::total_cmp);
    }
    candidates.dedup();

    let mut sup = 0.0f64;
    for &z in &candidates {
        let at = sorted.partition_point(|&s| s <= z) as f64 / n;
        let before = sorted.partition_point(|&s| s < z) as f64 / n;
        sup = sup
            .max((at - target.eval(z)).abs())
            .max((before - target.eval_left(z)).abs());
    }
    Ok(sup)
}
