//! Acceptance suite. Prints one verdict line per criterion and exits non-zero
//! if any criterion fails.
//!
//! The dataset reproduction criterion runs only when a dataset directory is
//! supplied through `TMEST_ABILENE_DIR` or `TMEST_GEANT_DIR`. Each directory
//! holds `topology.csv`, an optional `support.csv` (all pairs when absent),
//! the evaluation TMs as `test/*.csv` (the first 1000 by file name are used)
//! and optionally a trained `generator.json`.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use tmest_core::dist::{normalized_cdf_of_max_ratio, rng_from_seed};
use tmest_core::gan::{latent_loss, loss_and_latent_gradient, random_generator, Activation};
use tmest_core::io::{read_support, read_tm, read_topology};
use tmest_core::projd::{cyclic_projection_solve, deviation, drop_idle_rows, optimal_lambda, ProjectionConfig};
use tmest_core::{
    build_routing_matrix, fit_alpha_mle, gan_estimate, ks_distance, load_generator, nmae, proj_d_estimate, rmse,
    run_experiment, sample_normalized_power_law, CsrMatrix, GanEstimateConfig, Mask, Method, NormalizedCdf,
    ProjDConfig, RoutingMode, RowOrder, SourceDistribution, SupportSet, TrafficVector,
};

const MAX_RATIO_CDF_TOL: f64 = 1e-6;
const SAMPLING_KS_MAX: f64 = 0.01;
const MLE_REL_TOL: f64 = 0.05;
const KACZMARZ_RESIDUAL_MAX: f64 = 1e-6;
const MIN_NORM_TOL: f64 = 1e-4;
const LAMBDA_GRID_POINTS: usize = 100_000;
const PROJD_RESIDUAL_MAX: f64 = 1e-3;
const PROJD_KS_MAX: f64 = 0.1;
const GRADIENT_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const CONVEX_SLACK: f64 = 0.01;
const CONVEX_MAX_STEPS: usize = 10_000;
const REFERENCE_NMAE_BAND: f64 = 0.3;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/linear_generator.json");

enum Verdict {
    Pass(String),
    Fail(String),
    NotApplicable(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn max_ratio_cdf() -> Verdict {
    let mut worst: f64 = 0.0;
    for alpha in [0.01154, 0.5, 1.0, 2.0] {
        let src = SourceDistribution::beta_alpha_one(alpha).unwrap();
        for n in [2, 5, 50] {
            for i in 0..=100 {
                let y = i as f64 / 100.0;
                match normalized_cdf_of_max_ratio(&src, n, y) {
                    Ok(g) => worst = worst.max((g - y.powf(alpha)).abs()),
                    Err(e) => return Verdict::Fail(format!("alpha {alpha} n {n} y {y}: {e}")),
                }
            }
        }
    }
    verdict(worst < MAX_RATIO_CDF_TOL, format!("max |G(y) - y^alpha| = {worst:.2e}"))
}

fn sampling() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for (seed, alpha) in [(1u64, 0.01), (2, 1.0), (3, 2.0)] {
        let x = sample_normalized_power_law(100_000, alpha, &mut rng_from_seed(seed));
        let ks = ks_distance(&x, &NormalizedCdf::power_law(alpha).unwrap()).unwrap();
        let fitted = fit_alpha_mle(&x).unwrap().alpha;
        let rel = (fitted / alpha - 1.0).abs();
        ok &= ks < SAMPLING_KS_MAX && rel < MLE_REL_TOL;
        details.push(format!("alpha {alpha}: KS {ks:.4}, fit {fitted:.5}"));
    }
    verdict(ok, details.join("; "))
}

fn kaczmarz() -> Verdict {
    let mut rng = rng_from_seed(31);
    let (mut worst_res, mut worst_gap): (f64, f64) = (0.0, 0.0);
    for trial in 0..50u64 {
        let m = rng.random_range(2..=20);
        let p = rng.random_range(m..=40);
        let dense: Vec<f64> = (0..m * p).map(|_| rng.sample(StandardNormal)).collect();
        let x0: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let a = CsrMatrix::from_dense(m, p, &dense).unwrap();
        let b = a.mul_vec(&x0).unwrap();
        let pinv = DMatrix::from_row_slice(m, p, &dense).pseudo_inverse(1e-12).unwrap();
        let min_norm = pinv * DVector::from_column_slice(&b);
        let scale = min_norm.amax().max(1.0);
        for order in [RowOrder::Cyclic, RowOrder::Randomized] {
            let cfg = ProjectionConfig {
                tolerance: 1e-12,
                max_cycles: 1_000_000,
                row_order: order,
                seed: trial,
                ..Default::default()
            };
            let sol = cyclic_projection_solve(&a, &b, None, &cfg).unwrap();
            worst_res = worst_res.max(sol.relative_residual);
            for (u, v) in sol.x.iter().zip(min_norm.iter()) {
                worst_gap = worst_gap.max((u - v).abs() / scale);
            }
        }
    }
    verdict(
        worst_res < KACZMARZ_RESIDUAL_MAX && worst_gap <= MIN_NORM_TOL,
        format!("worst relative residual {worst_res:.2e}, worst gap to pseudoinverse {worst_gap:.2e}"),
    )
}

fn lambda() -> Verdict {
    let mut rng = rng_from_seed(100);
    let mut beaten = 0;
    for _ in 0..100 {
        let (m, p) = (rng.random_range(1..20), rng.random_range(1..60));
        let dense: Vec<f64> = (0..m * p).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = CsrMatrix::from_dense(m, p, &dense).unwrap();
        let y: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..100.0)).collect();
        let fit = optimal_lambda(&a, &y, &b).unwrap();
        let ay = a.mul_vec(&y).unwrap();
        let upper = 2.0 * fit.lambda;
        let grid_min = (0..=LAMBDA_GRID_POINTS)
            .map(|k| deviation(&ay, &b, upper * k as f64 / LAMBDA_GRID_POINTS as f64))
            .fold(f64::INFINITY, f64::min);
        if grid_min < fit.deviation * (1.0 - 1e-12) {
            beaten += 1;
        }
    }
    verdict(beaten == 0, format!("grid beat the closed form on {beaten} of 100 instances"))
}

fn proj_d_synthetic() -> Verdict {
    let target = NormalizedCdf::power_law(0.5).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for mode in [RoutingMode::ShortestPath, RoutingMode::Ecmp] {
        let s = common::synthetic(mode, 2024);
        let (a, b) = drop_idle_rows(s.routing.matrix(), &s.loads).unwrap();
        let (x, diag) = proj_d_estimate(&a, &b, &target, &ProjDConfig::default()).unwrap();
        let ks = diag.final_ks.unwrap_or(1.0);
        ok &= diag.final_relative_residual < PROJD_RESIDUAL_MAX && ks < PROJD_KS_MAX;
        ok &= x.values().iter().all(|&v| v >= 0.0);
        details.push(format!(
            "{mode}: residual {:.2e}, KS {ks:.3}, NMAE {:.3}",
            diag.final_relative_residual,
            nmae(&s.truth, &x, Mask::NonzeroTruth).unwrap()
        ));
    }
    verdict(ok, details.join("; "))
}

fn latent_gradient() -> Verdict {
    let mut rng = rng_from_seed(20);
    let (mut worst, mut checked, mut skipped): (f64, usize, usize) = (0.0, 0, 0);
    for _ in 0..20 {
        let (k, hidden, p, m) = (
            rng.random_range(2..6),
            rng.random_range(4..12),
            rng.random_range(3..10),
            rng.random_range(2..8),
        );
        let net = random_generator(&[k, hidden, p], Activation::Relu, Activation::Relu, 2.0, &mut rng).unwrap();
        let dense: Vec<f64> = (0..m * p).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = CsrMatrix::from_dense(m, p, &dense).unwrap();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
        let latent: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let (_, grad) = loss_and_latent_gradient(&net, &a, &b, &latent).unwrap();
        let kinks = |l: &[f64]| -> Vec<bool> {
            let mut h = l.to_vec();
            let mut signs = Vec::new();
            for layer in net.layers() {
                let z: Vec<f64> = (0..layer.rows)
                    .map(|r| layer.bias[r] + (0..layer.cols).map(|c| layer.weights[r * layer.cols + c] * h[c]).sum::<f64>())
                    .collect();
                signs.extend(z.iter().map(|&v| v > 0.0));
                h = z.into_iter().map(|v| v.max(0.0)).collect();
            }
            signs
        };
        for i in 0..k {
            let (mut up, mut down) = (latent.clone(), latent.clone());
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            if kinks(&up) != kinks(&down) {
                skipped += 1;
                continue;
            }
            let fd = (latent_loss(&net, &a, &b, &up).unwrap() - latent_loss(&net, &a, &b, &down).unwrap()) / (2.0 * FD_STEP);
            let denom = grad[i].abs().max(fd.abs());
            if denom > 0.0 {
                worst = worst.max((fd - grad[i]).abs() / denom);
                checked += 1;
            }
        }
    }
    verdict(
        worst < GRADIENT_REL_TOL && checked > 0,
        format!("{checked} coordinates, worst relative error {worst:.2e} ({skipped} skipped at kinks)"),
    )
}

fn gan_convex() -> Verdict {
    let net = match load_generator(FIXTURE) {
        Ok(net) => net,
        Err(e) => return Verdict::Fail(format!("fixture: {e}")),
    };
    let (k, p, m) = (net.latent_dim(), net.output_dim(), 20);
    let mut rng = rng_from_seed(17);
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let dense: Vec<f64> = (0..m * p).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = CsrMatrix::from_dense(m, p, &dense).unwrap();
        let star: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = a
            .mul_vec(&net.forward(&star).unwrap())
            .unwrap()
            .into_iter()
            .map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mm = DMatrix::from_row_slice(m, p, &dense) * DMatrix::from_row_slice(p, k, &net.layers()[0].weights);
        let bv = DVector::from_column_slice(&b);
        let sol = (mm.transpose() * &mm).lu().solve(&(mm.transpose() * &bv)).unwrap();
        let optimum = (&bv - &mm * sol).norm_squared();
        let cfg = GanEstimateConfig {
            steps: CONVEX_MAX_STEPS,
            seed: trial,
            ..Default::default()
        };
        let (_, diag) = gan_estimate(&net, &a, &b, &cfg).unwrap();
        worst = worst.max(diag.best_loss / optimum - 1.0);
    }
    verdict(worst <= CONVEX_SLACK, format!("worst excess over least-squares optimum {:.3}%", 100.0 * worst))
}

fn metric_identities() -> Verdict {
    let tv = |v: &[f64]| TrafficVector::new(v.to_vec()).unwrap();
    let truth = tv(&[2.0, 2.0, 0.0, 7.5]);
    let checks = [
        nmae(&truth, &truth, Mask::NonzeroTruth).unwrap() == 0.0,
        nmae(&truth, &TrafficVector::zeros(4), Mask::NonzeroTruth).unwrap() == 1.0,
        nmae(&tv(&[2.0, 2.0]), &tv(&[1.0, 3.0]), Mask::NonzeroTruth).unwrap() == 0.5,
        rmse(&truth, &truth, Mask::NonzeroTruth).unwrap() == 0.0,
        rmse(&tv(&[0.0, 4.0]), &tv(&[9.0, 1.0]), Mask::NonzeroTruth).unwrap() == 3.0,
    ];
    let failed = checks.iter().filter(|ok| !**ok).count();
    verdict(failed == 0, format!("{} of {} identities hold", checks.len() - failed, checks.len()))
}

struct Dataset {
    label: &'static str,
    var: &'static str,
    alpha: f64,
    projd_nmae: f64,
    gan_nmae: f64,
}

const DATASETS: [Dataset; 2] = [
    Dataset {
        label: "Abilene",
        var: "TMEST_ABILENE_DIR",
        alpha: 0.0107,
        projd_nmae: 0.94,
        gan_nmae: 0.66,
    },
    Dataset {
        label: "GEANT",
        var: "TMEST_GEANT_DIR",
        alpha: 0.01411,
        projd_nmae: 1.51,
        gan_nmae: 1.18,
    },
];

fn evaluate_dataset(ds: &Dataset, dir: &Path) -> Result<(bool, String), String> {
    let topo = read_topology(dir.join("topology.csv")).map_err(|e| e.to_string())?;
    let support_path = dir.join("support.csv");
    let support = if support_path.exists() {
        read_support(&support_path, &topo).map_err(|e| e.to_string())?
    } else {
        SupportSet::all_pairs(&topo)
    };
    let routing = build_routing_matrix(&topo, &support, RoutingMode::ShortestPath).map_err(|e| e.to_string())?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir.join("test"))
        .map_err(|e| format!("{}: {e}", dir.join("test").display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files.truncate(1000);
    let tms = files
        .iter()
        .map(|f| read_tm(f, &topo, &support))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let target = NormalizedCdf::power_law(ds.alpha).map_err(|e| e.to_string())?;
    let report = run_experiment(&routing, &tms, &target, &Method::ProjD(ProjDConfig::default()), None)
        .map_err(|e| e.to_string())?
        .report;
    let ok = (report.nmae - ds.projd_nmae).abs() <= REFERENCE_NMAE_BAND;
    let mut detail = format!(
        "{}: {} TMs, Proj-D NMAE {:.3} (reference {:.2}), RMSE {:.2} Mbps",
        ds.label, report.tm_count, report.nmae, ds.projd_nmae, report.rmse_mbps
    );
    let weights = dir.join("generator.json");
    if weights.exists() {
        let net = load_generator(&weights).map_err(|e| e.to_string())?;
        let gan = Method::Gan {
            net: &net,
            config: GanEstimateConfig::default(),
        };
        let r = run_experiment(&routing, &tms, &target, &gan, None).map_err(|e| e.to_string())?.report;
        detail.push_str(&format!(", GAN-D NMAE {:.3} (reference {:.2}, informational)", r.nmae, ds.gan_nmae));
    }
    Ok((ok, detail))
}

fn dataset_reproduction() -> Verdict {
    let present: Vec<(&Dataset, PathBuf)> = DATASETS
        .iter()
        .filter_map(|d| std::env::var_os(d.var).map(|v| (d, PathBuf::from(v))))
        .collect();
    if present.is_empty() {
        return Verdict::NotApplicable("no dataset directory set (TMEST_ABILENE_DIR, TMEST_GEANT_DIR)".into());
    }
    let mut ok = true;
    let mut details = Vec::new();
    for (ds, dir) in present {
        match evaluate_dataset(ds, &dir) {
            Ok((pass, d)) => {
                ok &= pass;
                details.push(d);
            }
            Err(e) => {
                ok = false;
                details.push(format!("{}: {e}", ds.label));
            }
        }
    }
    verdict(ok, details.join("; "))
}

fn main() {
    let criteria: [(&str, Option<u64>, Check); 9] = [
        ("max-ratio cdf closed form", Some(10), max_ratio_cdf),
        ("sampling fidelity and MLE", Some(5), sampling),
        ("Kaczmarz oracle equivalence", Some(30), kaczmarz),
        ("lambda optimality", None, lambda),
        ("Proj-D synthetic end-to-end", Some(60), proj_d_synthetic),
        ("latent gradient", None, latent_gradient),
        ("GAN-D convex sanity", None, gan_convex),
        ("metric identities", None, metric_identities),
        ("dataset reproduction", None, dataset_reproduction),
    ];
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let over = limit.is_some_and(|s| elapsed > Duration::from_secs(s));
        let budget = limit.map(|s| format!(" / {s}s")).unwrap_or_default();
        let timing = format!("{:.2}s{budget}", elapsed.as_secs_f64());
        let (tag, detail) = match outcome {
            Verdict::Pass(d) if over => ("FAIL", format!("{d}; over time budget")),
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::NotApplicable(d) => ("N/A ", d),
        };
        if tag == "FAIL" {
            failures += 1;
        }
        println!("{tag} {name} [{timing}]: {detail}");
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
