use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use tmest_core::dist::{fit_alpha_mle_pooled, normalize_by_max, rng_from_seed};
use tmest_core::eval::{build_plot_data, write_plot_data, write_report, PlotOptions};
use tmest_core::gan::GanDiagnostics;
use tmest_core::io::{read_demands, read_loads, read_support, read_tm, read_topology, write_loads, write_routing, write_support, write_tm, write_tm_file, write_topology};
use tmest_core::projd::{drop_idle_rows, ProjDDiagnostics};
use tmest_core::synth::{random_support, random_topology, synth_demands};
use tmest_core::{
    build_routing_matrix, gan_estimate, ks_distance, load_generator, proj_d_estimate, run_experiment, simulate_loads,
    GanEstimateConfig, GeneratorNet, Method, NormalizedCdf, ProjDConfig, RoutingMatrix, SupportSet, Topology,
    TrafficVector,
};

use crate::args::{
    Cli, Command, EstimateArgs, EvalArgs, ExportPlotArgs, GlobalArgs, MethodArgs, MethodKind, SynthArgs, TargetArgs,
};

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Routes { out } => routes(g, out.as_deref()),
        Command::Loads { tm, out } => loads(g, tm, out.as_deref()),
        Command::Synth(args) => synth(g, args),
        Command::FitDist { tms, out } => fit_dist(tms, out.as_deref()),
        Command::Estimate(args) => estimate(g, args),
        Command::Eval(args) => eval(g, args),
        Command::ExportPlot(args) => export_plot(g, args),
    }
}

struct Network {
    topo: Topology,
    support: SupportSet,
    routing: RoutingMatrix,
}

fn network(g: &GlobalArgs) -> Result<Network> {
    let path = g.topology.as_ref().ok_or_else(|| usage("--topology is required"))?;
    let topo = read_topology(path)?;
    let support = match &g.support {
        Some(p) => read_support(p, &topo)?,
        None => SupportSet::all_pairs(&topo),
    };
    let routing = build_routing_matrix(&topo, &support, g.routing)?;
    Ok(Network { topo, support, routing })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Runs `write` against `out`, or standard output when `out` is `None`.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write(&mut w)?;
            w.flush().with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().context("writing standard output")
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn make_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

/// Expands directories into their `*.csv` files; results are sorted within
/// each directory and keep argument order otherwise.
fn expand_csv(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no TM files found");
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tm".into())
}

fn routes(g: &GlobalArgs, out: Option<&Path>) -> Result<()> {
    let net = network(g)?;
    emit(out, |w| Ok(write_routing(w, &net.topo, &net.routing)?))
}

fn loads(g: &GlobalArgs, tm: &Path, out: Option<&Path>) -> Result<()> {
    let net = network(g)?;
    let x = read_tm(tm, &net.topo, &net.support)?;
    let b = simulate_loads(&net.routing, &x)?;
    emit(out, |w| Ok(write_loads(w, &net.topo, &b)?))
}

fn synth(g: &GlobalArgs, args: &SynthArgs) -> Result<()> {
    let mut rng = rng_from_seed(g.seed);
    make_dir(&args.out_dir)?;
    let (topo, support) = match args.nodes {
        Some(nodes) => {
            let topo = random_topology(nodes, args.chords, args.max_weight, &mut rng)?;
            let support = match args.pairs {
                Some(p) => random_support(&topo, p, &mut rng)?,
                None => SupportSet::all_pairs(&topo),
            };
            let dir = args.out_dir.join("network");
            make_dir(&dir)?;
            write_topology(create(&dir.join("topology.csv"))?, &topo)?;
            write_support(create(&dir.join("support.csv"))?, &topo, &support)?;
            (topo, support)
        }
        None => {
            let net = network(g)?;
            (net.topo, net.support)
        }
    };
    for i in 0..args.count {
        let x = synth_demands(support.len(), args.alpha, args.peak_mbps, &mut rng)?;
        write_tm_file(args.out_dir.join(format!("tm_{i:04}.csv")), &topo, &support, &x)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    alpha: f64,
    n_positive: usize,
    ks_to_fit: f64,
}

fn fit_dist(tms: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let demands = expand_csv(tms)?
        .iter()
        .map(read_demands)
        .collect::<Result<Vec<_>, _>>()?;
    let fit = fit_alpha_mle_pooled(&demands)?;
    let pooled: Vec<f64> = demands.iter().flat_map(|d| normalize_by_max(d)).collect();
    let ks_to_fit = ks_distance(&pooled, &NormalizedCdf::power_law(fit.alpha)?)?;
    emit_json(
        out,
        &FitReport {
            alpha: fit.alpha,
            n_positive: fit.n_positive,
            ks_to_fit,
        },
    )
}

fn target_from(args: &TargetArgs) -> Result<Option<NormalizedCdf>> {
    if let Some(alpha) = args.alpha {
        return Ok(Some(NormalizedCdf::power_law(alpha)?));
    }
    if args.target_tm.is_empty() {
        return Ok(None);
    }
    let pooled: Vec<f64> = expand_csv(&args.target_tm)?
        .iter()
        .map(|f| Ok(normalize_by_max(&read_demands(f)?)))
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(Some(NormalizedCdf::tabulated(&pooled)?))
}

/// Explicit target, or else a power law fitted to `fallback` (the truths of an
/// evaluation batch, used only for the KS diagnostic).
fn target_or_fit(args: &TargetArgs, fallback: &[TrafficVector]) -> Result<NormalizedCdf> {
    if let Some(t) = target_from(args)? {
        return Ok(t);
    }
    let values: Vec<&[f64]> = fallback.iter().map(TrafficVector::values).collect();
    Ok(NormalizedCdf::power_law(fit_alpha_mle_pooled(&values)?.alpha)?)
}

fn projd_config(m: &MethodArgs, seed: u64) -> ProjDConfig {
    ProjDConfig {
        outer_iterations: m.cycles,
        inner_cycles: m.inner,
        retries: m.retries,
        row_order: m.row_order,
        tolerance: m.tolerance,
        polish_cycles: m.polish,
        seed,
    }
}

fn gan_config(m: &MethodArgs, seed: u64) -> GanEstimateConfig {
    let mut cfg = GanEstimateConfig {
        inits: m.inits,
        steps: m.steps,
        seed,
        ..Default::default()
    };
    cfg.adam.learning_rate = m.lr;
    cfg
}

fn generator(m: &MethodArgs) -> Result<GeneratorNet> {
    let path = m.weights.as_ref().ok_or_else(|| usage("--weights is required for --method gan"))?;
    Ok(load_generator(path)?)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| anyhow!("thread pool: {e}"))
}

#[derive(Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
enum Sidecar {
    Projd {
        loads: PathBuf,
        config: ProjDConfig,
        diagnostics: ProjDDiagnostics,
    },
    Gan {
        loads: PathBuf,
        config: GanEstimateConfig,
        diagnostics: GanDiagnostics,
    },
}

enum Estimator {
    ProjD(NormalizedCdf),
    Gan(GeneratorNet),
}

fn estimate(g: &GlobalArgs, args: &EstimateArgs) -> Result<()> {
    let m = &args.method;
    let estimator = match m.method {
        MethodKind::Projd => Estimator::ProjD(
            target_from(&m.target)?.ok_or_else(|| usage("--method projd needs --alpha or --target-tm"))?,
        ),
        MethodKind::Gan => Estimator::Gan(generator(m)?),
        MethodKind::Oracle => return Err(usage("--method oracle is only available for eval")),
    };
    let net = network(g)?;
    let outputs: Vec<PathBuf> = if args.loads.len() == 1 {
        vec![args.out.clone()]
    } else {
        make_dir(&args.out)?;
        args.loads
            .iter()
            .map(|l| args.out.join(format!("{}.csv", stem(l))))
            .collect()
    };

    let run_one = |i: usize| -> Result<()> {
        let path = &args.loads[i];
        let b = read_loads(path, &net.topo).with_context(|| format!("loads file {}", path.display()))?;
        let seed = g.seed.wrapping_add(i as u64);
        let (x, sidecar) = match &estimator {
            Estimator::ProjD(target) => {
                let config = projd_config(m, seed);
                let (a, kept) = drop_idle_rows(net.routing.matrix(), b.values())?;
                let (x, diagnostics) = proj_d_estimate(&a, &kept, target, &config)?;
                let loads = path.clone();
                (x, Sidecar::Projd { loads, config, diagnostics })
            }
            Estimator::Gan(gen) => {
                let config = gan_config(m, seed);
                let (x, diagnostics) = gan_estimate(gen, net.routing.matrix(), b.values(), &config)?;
                let loads = path.clone();
                (x, Sidecar::Gan { loads, config, diagnostics })
            }
        };
        let out = &outputs[i];
        emit(Some(out), |w| Ok(write_tm(w, &net.topo, &net.support, &x)?))?;
        emit_json(Some(&out.with_extension("json")), &sidecar)
    };
    pool(m.jobs)?.install(|| (0..args.loads.len()).into_par_iter().try_for_each(run_one))
}

fn read_tms(paths: &[PathBuf], net: &Network) -> Result<(Vec<PathBuf>, Vec<TrafficVector>)> {
    let files = expand_csv(paths)?;
    let tms = files
        .iter()
        .map(|f| read_tm(f, &net.topo, &net.support))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((files, tms))
}

fn eval(g: &GlobalArgs, args: &EvalArgs) -> Result<()> {
    let m = &args.method;
    let net = network(g)?;
    let (files, truths) = read_tms(&args.tms, &net)?;
    let gen = match m.method {
        MethodKind::Gan => Some(generator(m)?),
        _ => None,
    };
    let target = match m.method {
        MethodKind::Projd => {
            target_from(&m.target)?.ok_or_else(|| usage("--method projd needs --alpha or --target-tm"))?
        }
        _ => target_or_fit(&m.target, &truths)?,
    };
    let method = match (m.method, &gen) {
        (MethodKind::Projd, _) => Method::ProjD(projd_config(m, g.seed)),
        (MethodKind::Gan, Some(net)) => Method::Gan {
            net,
            config: gan_config(m, g.seed),
        },
        _ => Method::Oracle,
    };
    let exp = run_experiment(&net.routing, &truths, &target, &method, m.jobs)?;
    match &args.report {
        Some(p) => write_report(p, &exp.report)?,
        None => emit_json(None, &exp.report)?,
    }
    if let Some(dir) = &args.est_dir {
        make_dir(dir)?;
        for (f, x) in files.iter().zip(&exp.estimates) {
            write_tm_file(dir.join(format!("{}.csv", stem(f))), &net.topo, &net.support, x)?;
        }
    }
    if let Some(dir) = &args.plot_dir {
        let data = build_plot_data(&net.topo, &net.routing, &truths, &exp.estimates, &target, PlotOptions::default())?;
        write_plot_data(dir, &data)?;
    }
    Ok(())
}

fn export_plot(g: &GlobalArgs, args: &ExportPlotArgs) -> Result<()> {
    let net = network(g)?;
    let (_, truths) = read_tms(&args.truth, &net)?;
    let (_, estimates) = read_tms(&args.est, &net)?;
    if truths.len() != estimates.len() {
        bail!("{} truth files but {} estimate files", truths.len(), estimates.len());
    }
    let target = target_or_fit(&args.target, &truths)?;
    let options = PlotOptions {
        cdf_points: args.cdf_points,
        scatter_tms: args.scatter_tms,
    };
    let data = build_plot_data(&net.topo, &net.routing, &truths, &estimates, &target, options)?;
    Ok(write_plot_data(&args.plot_dir, &data)?)
}
