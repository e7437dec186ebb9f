use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tmest_core::{RoutingMode, RowOrder};

/// Traffic-matrix estimation from link loads.
#[derive(Debug, Parser)]
#[command(name = "tmest", version, about, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Base random seed; batch jobs add the item index.
    #[arg(long, global = true, env = "TMEST_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Topology CSV (`src,dst,weight[,capacity]`).
    #[arg(long, global = true, value_name = "FILE")]
    pub topology: Option<PathBuf>,

    /// Support CSV (`src,dst`); all ordered node pairs when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub support: Option<PathBuf>,

    /// Routing used to build the routing matrix: `sp` or `ecmp`.
    #[arg(long, global = true, default_value = "sp")]
    pub routing: RoutingMode,

    /// Generator weight-file format version to accept.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=1))]
    pub format_version: u32,

    /// File of `key = value` lines supplying defaults for any long flag.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the routing matrix as `link,pair,fraction` rows.
    Routes {
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Compute link loads `b = A x` for a traffic matrix.
    Loads {
        /// Traffic-matrix CSV (`src,dst,demand_mbps`).
        #[arg(long)]
        tm: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Draw synthetic traffic matrices with normalized cdf `y^alpha`.
    Synth(SynthArgs),

    /// Fit the power-law exponent to measured traffic matrices.
    FitDist {
        /// TM CSV files or directories of them.
        #[arg(long = "tm", required = true, num_args = 1..)]
        tms: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Estimate traffic matrices from link-load files.
    Estimate(EstimateArgs),

    /// Estimate every TM of a batch from its simulated loads and score it.
    Eval(EvalArgs),

    /// Write comparison plot data for existing estimates.
    ExportPlot(ExportPlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Power-law exponent of the normalized demand cdf.
    #[arg(long)]
    pub alpha: f64,

    /// Largest demand of each TM, in Mbps.
    #[arg(long, default_value_t = 100.0, visible_alias = "total-mbps")]
    pub peak_mbps: f64,

    /// Number of traffic matrices.
    #[arg(long, default_value_t = 1)]
    pub count: usize,

    /// Directory receiving `tm_NNNN.csv`. A generated network goes to its
    /// `network/` subdirectory.
    #[arg(long)]
    pub out_dir: PathBuf,

    /// Generate a random ring-plus-chords topology with this many nodes
    /// instead of reading `--topology`.
    #[arg(long)]
    pub nodes: Option<usize>,

    /// Extra bidirectional chords of the generated topology.
    #[arg(long, default_value_t = 0, requires = "nodes")]
    pub chords: usize,

    /// Link weights of the generated topology are drawn from `1..=max-weight`.
    #[arg(long, default_value_t = 1, requires = "nodes")]
    pub max_weight: u32,

    /// Size of the generated random support; all pairs when omitted.
    #[arg(long, requires = "nodes")]
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Projd,
    Gan,
    /// Returns the ground truth; only meaningful for `eval`.
    Oracle,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target normalized cdf `y^alpha`.
    #[arg(long, conflicts_with = "target_tm")]
    pub alpha: Option<f64>,

    /// Target normalized cdf tabulated from these TM files, each normalized
    /// by its own maximum.
    #[arg(long, num_args = 1..)]
    pub target_tm: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: MethodKind,

    #[command(flatten)]
    pub target: TargetArgs,

    /// Proj-D outer iterations, each ending in a distribution snap.
    #[arg(long, default_value_t = 20)]
    pub cycles: usize,

    /// Proj-D projection cycles before each snap.
    #[arg(long, default_value_t = 50)]
    pub inner: usize,

    /// Proj-D candidate draws per snap.
    #[arg(long, default_value_t = 8)]
    pub retries: usize,

    /// Proj-D row order: `cyclic` or `random`.
    #[arg(long, default_value = "cyclic")]
    pub row_order: RowOrder,

    /// Proj-D projection cycles after the last snap; defaults to `--inner`.
    #[arg(long)]
    pub polish: Option<usize>,

    /// Proj-D relative residual at which projection blocks stop.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,

    /// GAN-D generator weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,

    /// GAN-D Gaussian latent candidates.
    #[arg(long, default_value_t = 100)]
    pub inits: usize,

    /// GAN-D Adam steps.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,

    /// GAN-D Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,

    /// Worker threads for batch runs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Link-load CSV files (`src,dst,load_mbps`).
    #[arg(long, required = true, num_args = 1..)]
    pub loads: Vec<PathBuf>,

    /// Output TM file for a single loads file, otherwise a directory that
    /// receives `<loads stem>.csv`. Diagnostics go next to each output as
    /// `.json`.
    #[arg(long)]
    pub out: PathBuf,

    #[command(flatten)]
    pub method: MethodArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth TM files or directories of them.
    #[arg(long = "tm", required = true, num_args = 1..)]
    pub tms: Vec<PathBuf>,

    /// Report JSON; standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Write `cdf.csv`, `demands.csv` and `links.csv` here.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,

    /// Write each estimate as `<truth stem>.csv` here.
    #[arg(long)]
    pub est_dir: Option<PathBuf>,

    #[command(flatten)]
    pub method: MethodArgs,
}

#[derive(Debug, Args)]
pub struct ExportPlotArgs {
    /// Ground-truth TM files or directories of them.
    #[arg(long, required = true, num_args = 1..)]
    pub truth: Vec<PathBuf>,

    /// Estimated TM files or directories, matched to `--truth` by sorted order.
    #[arg(long, required = true, num_args = 1..)]
    pub est: Vec<PathBuf>,

    #[command(flatten)]
    pub target: TargetArgs,

    #[arg(long)]
    pub plot_dir: PathBuf,

    /// Evenly spaced cdf evaluation points on [0, 1].
    #[arg(long, default_value_t = 1001)]
    pub cdf_points: usize,

    /// Number of leading TMs in the demand and link scatter data.
    #[arg(long, default_value_t = 10)]
    pub scatter_tms: usize,
}
