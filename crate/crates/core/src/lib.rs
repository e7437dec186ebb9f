//! Traffic-matrix estimation from link loads under a demand-size distribution
//! constraint.
//!
//! The pieces, bottom up:
//!
//! * [`topology`]: graph, shortest-path / ECMP routing and the routing matrix.
//! * [`tm`]: demand and link-load vectors and the forward map `b = A x`.
//! * [`dist`]: normalized empirical cdfs, power-law sampling and fitting.
//! * [`projd`]: Kaczmarz solvers and the Proj-D estimator.
//! * [`gan`]: latent-space inversion of a pretrained generator (GAN-D).
//! * [`eval`]: metrics and the batch experiment harness.
//! * [`io`]: CSV file formats.

pub mod dist;
pub mod error;
pub mod eval;
pub mod gan;
pub mod io;
pub mod linalg;
pub mod projd;
pub mod synth;
pub mod tm;
pub mod topology;

pub use dist::{fit_alpha_mle, ks_distance, sample_normalized_power_law, NormalizedCdf, SourceDistribution, TmRng};
pub use error::{Error, Result};
pub use eval::{nmae, rmse, run_experiment, EvalReport, Mask, Method};
pub use gan::{gan_estimate, load_generator, GanEstimateConfig, GeneratorNet};
pub use linalg::CsrMatrix;
pub use projd::{proj_d_estimate, ProjDConfig, RowOrder};
pub use tm::{simulate_loads, LinkLoadVector, TrafficVector};
pub use topology::{build_routing_matrix, RoutingMatrix, RoutingMode, SupportSet, Topology};
