//! Error metrics and the batch experiment harness.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{ks_distance, normalize_by_max, NormalizedCdf};
use crate::error::{Error, Result};
use crate::gan::{gan_estimate, GanEstimateConfig, GeneratorNet};
use crate::projd::{drop_idle_rows, proj_d_estimate, ProjDConfig};
use crate::tm::{residual, simulate_loads, LinkLoadVector, TrafficVector};
use crate::topology::{RoutingMatrix, Topology};

/// Which demands enter a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mask {
    /// Only indices where the true demand is positive.
    #[default]
    NonzeroTruth,
    All,
}

fn masked_pairs<'a>(truth: &'a [f64], est: &'a [f64], mask: Mask) -> impl Iterator<Item = (f64, f64)> + 'a {
    truth
        .iter()
        .zip(est)
        .filter(move |(t, _)| mask == Mask::All || **t > 0.0)
        .map(|(&t, &e)| (t, e))
}

fn check_lengths(truth: &TrafficVector, est: &TrafficVector) -> Result<()> {
    if truth.len() != est.len() {
        return Err(Error::mismatch("estimate length", truth.len(), est.len()));
    }
    Ok(())
}

/// `‖x − x̂‖₁ / ‖x‖₁` over the masked indices.
pub fn nmae(truth: &TrafficVector, est: &TrafficVector, mask: Mask) -> Result<f64> {
    check_lengths(truth, est)?;
    let (abs, total) = masked_pairs(truth.values(), est.values(), mask)
        .fold((0.0, 0.0), |(a, t), (x, y)| (a + (x - y).abs(), t + x.abs()));
    if total == 0.0 {
        return Err(Error::ZeroTruth);
    }
    Ok(abs / total)
}

/// Root mean squared error over the masked indices, in Mbps.
pub fn rmse(truth: &TrafficVector, est: &TrafficVector, mask: Mask) -> Result<f64> {
    check_lengths(truth, est)?;
    let (sq, count) = masked_pairs(truth.values(), est.values(), mask)
        .fold((0.0, 0usize), |(s, c), (x, y)| (s + (x - y).powi(2), c + 1));
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((sq / count as f64).sqrt())
}

/// Estimator applied to every TM of a batch.
#[derive(Debug, Clone)]
pub enum Method<'a> {
    /// Returns the ground truth unchanged; a harness sanity check.
    Oracle,
    ProjD(ProjDConfig),
    Gan {
        net: &'a GeneratorNet,
        config: GanEstimateConfig,
    },
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::ProjD(_) => "projd",
            Self::Gan { .. } => "gan",
        }
    }

    /// Estimate for TM number `index`; seeds are offset by the index.
    fn estimate(
        &self,
        routing: &RoutingMatrix,
        truth: &TrafficVector,
        loads: &LinkLoadVector,
        target: &NormalizedCdf,
        index: usize,
    ) -> Result<TrafficVector> {
        let offset = index as u64;
        match self {
            Self::Oracle => Ok(truth.clone()),
            Self::ProjD(config) => {
                let config = ProjDConfig {
                    seed: config.seed.wrapping_add(offset),
                    ..*config
                };
                let (a, b) = drop_idle_rows(routing.matrix(), loads.values())?;
                Ok(proj_d_estimate(&a, &b, target, &config)?.0)
            }
            Self::Gan { net, config } => {
                let config = GanEstimateConfig {
                    seed: config.seed.wrapping_add(offset),
                    ..*config
                };
                Ok(gan_estimate(net, routing.matrix(), loads.values(), &config)?.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TmScore {
    pub index: usize,
    pub rmse_mbps: f64,
    pub nmae: f64,
    pub ks_to_target: Option<f64>,
    pub relative_link_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub tm_count: usize,
    /// RMSE over the pooled nonzero-truth residuals of every TM.
    pub rmse_mbps: f64,
    pub rmse_mbps_mean_per_tm: f64,
    /// Pooled L1 ratio over every TM.
    pub nmae: f64,
    pub nmae_mean_per_tm: f64,
    /// Mean over TMs of the KS distance between the normalized estimate and the
    /// target cdf.
    pub ks_to_target: f64,
    /// Mean over TMs of `‖A x̂ − b‖ / ‖b‖`.
    pub relative_link_residual: f64,
    pub per_tm: Vec<TmScore>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: EvalReport,
    pub loads: Vec<LinkLoadVector>,
    pub estimates: Vec<TrafficVector>,
}

fn score(
    routing: &RoutingMatrix,
    index: usize,
    truth: &TrafficVector,
    est: &TrafficVector,
    loads: &LinkLoadVector,
    target: &NormalizedCdf,
) -> Result<TmScore> {
    let normalized = normalize_by_max(est.values());
    Ok(TmScore {
        index,
        rmse_mbps: rmse(truth, est, Mask::NonzeroTruth)?,
        nmae: nmae(truth, est, Mask::NonzeroTruth)?,
        ks_to_target: if normalized.is_empty() {
            None
        } else {
            Some(ks_distance(&normalized, target)?)
        },
        relative_link_residual: residual(routing, est.values(), loads.values())?.relative,
    })
}

/// Simulates loads for every TM, estimates, and scores. `jobs` bounds the
/// worker threads (default: rayon's global pool).
pub fn run_experiment(
    routing: &RoutingMatrix,
    tms: &[TrafficVector],
    target: &NormalizedCdf,
    method: &Method<'_>,
    jobs: Option<usize>,
) -> Result<Experiment> {
    if tms.is_empty() {
        return Err(Error::InvalidConfig("no traffic matrices to evaluate".into()));
    }
    let job = || -> Result<Vec<(LinkLoadVector, TrafficVector, TmScore)>> {
        tms.par_iter()
            .enumerate()
            .map(|(i, truth)| {
                let loads = simulate_loads(routing, truth)?;
                let est = method.estimate(routing, truth, &loads, target, i)?;
                let s = score(routing, i, truth, &est, &loads, target)?;
                Ok((loads, est, s))
            })
            .collect()
    };
    let results = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(job)?,
        None => job()?,
    };

    let (mut abs, mut l1, mut sq, mut count) = (0.0, 0.0, 0.0, 0usize);
    for (truth, (_, est, _)) in tms.iter().zip(&results) {
        for (x, y) in masked_pairs(truth.values(), est.values(), Mask::NonzeroTruth) {
            abs += (x - y).abs();
            l1 += x;
            sq += (x - y).powi(2);
            count += 1;
        }
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&TmScore) -> f64| results.iter().map(|(_, _, s)| f(s)).sum::<f64>() / n;
    let report = EvalReport {
        method: method.name().into(),
        tm_count: results.len(),
        rmse_mbps: (sq / count as f64).sqrt(),
        rmse_mbps_mean_per_tm: mean(&|s| s.rmse_mbps),
        nmae: abs / l1,
        nmae_mean_per_tm: mean(&|s| s.nmae),
        ks_to_target: mean(&|s| s.ks_to_target.unwrap_or(1.0)),
        relative_link_residual: mean(&|s| s.relative_link_residual),
        per_tm: results.iter().map(|(_, _, s)| s.clone()).collect(),
    };
    let (loads, estimates) = results.into_iter().map(|(l, e, _)| (l, e)).unzip();
    Ok(Experiment {
        report,
        loads,
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfRow {
    pub value: f64,
    pub cdf_truth: f64,
    pub cdf_est: f64,
    pub cdf_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandRow {
    pub tm: usize,
    pub pair: String,
    pub truth: f64,
    pub est: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRow {
    pub tm: usize,
    pub link: String,
    pub given: f64,
    pub fitted: f64,
}

/// Data behind the three comparison panels: normalized cdfs, estimated vs
/// true demands, fitted vs given link loads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub cdf: Vec<CdfRow>,
    pub demands: Vec<DemandRow>,
    pub links: Vec<LinkRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotOptions {
    /// Number of evenly spaced cdf evaluation points on `[0, 1]`.
    pub cdf_points: usize,
    /// Only the first this many TMs feed the demand and link panels.
    pub scatter_tms: usize,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            cdf_points: 1001,
            scatter_tms: 10,
        }
    }
}

fn step_cdf(sorted: &[f64], v: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&s| s <= v) as f64 / sorted.len() as f64
}

/// Builds plot data. Truth and estimates are both divided by the largest true
/// demand in the batch; zero demands are left out of the cdfs.
pub fn build_plot_data(
    topo: &Topology,
    routing: &RoutingMatrix,
    truths: &[TrafficVector],
    estimates: &[TrafficVector],
    target: &NormalizedCdf,
    options: PlotOptions,
) -> Result<PlotData> {
    if truths.len() != estimates.len() {
        return Err(Error::mismatch("estimate count", truths.len(), estimates.len()));
    }
    for (t, e) in truths.iter().zip(estimates) {
        check_lengths(t, e)?;
        if t.len() != routing.cols() {
            return Err(Error::mismatch("traffic vector", routing.cols(), t.len()));
        }
    }
    let scale = truths.iter().map(TrafficVector::max).fold(0.0, f64::max);
    let pooled = |vs: &[TrafficVector]| {
        let mut out: Vec<f64> = vs
            .iter()
            .flat_map(|v| v.values().iter().copied().filter(|&x| x > 0.0))
            .map(|x| if scale > 0.0 { x / scale } else { x })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    };
    let (truth_sorted, est_sorted) = (pooled(truths), pooled(estimates));
    let steps = options.cdf_points.max(2) - 1;
    let cdf = (0..=steps)
        .map(|k| {
            let value = k as f64 / steps as f64;
            CdfRow {
                value,
                cdf_truth: step_cdf(&truth_sorted, value),
                cdf_est: step_cdf(&est_sorted, value),
                cdf_target: target.eval(value),
            }
        })
        .collect();

    let mut demands = Vec::new();
    let mut links = Vec::new();
    for (i, (t, e)) in truths.iter().zip(estimates).enumerate().take(options.scatter_tms) {
        for (j, (&x, &y)) in t.values().iter().zip(e.values()).enumerate() {
            demands.push(DemandRow {
                tm: i,
                pair: routing.support().pair_label(topo, j),
                truth: x,
                est: y,
            });
        }
        let given = simulate_loads(routing, t)?;
        let fitted = simulate_loads(routing, e)?;
        for (r, (&g, &f)) in given.values().iter().zip(fitted.values()).enumerate() {
            links.push(LinkRow {
                tm: i,
                link: topo.link_label(routing.row_links()[r]),
                given: g,
                fitted: f,
            });
        }
    }
    Ok(PlotData { cdf, demands, links })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `cdf.csv`, `demands.csv` and `links.csv` into `dir`.
pub fn write_plot_data(dir: impl AsRef<Path>, data: &PlotData) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_csv(&dir.join("cdf.csv"), &data.cdf)?;
    write_csv(&dir.join("demands.csv"), &data.demands)?;
    write_csv(&dir.join("links.csv"), &data.links)
}

pub fn write_report(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    crate::io::write_json(path.as_ref(), report)
}
