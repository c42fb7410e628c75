//! Global optimization of expensive black-box functions.
//!
//! The optimizer approximates the objective with a mixture of Gaussian
//! kernels, one per observed point. Kernel locations are drawn from the
//! posterior of a small Bayesian neural network trained to reconstruct the
//! observed parameter points, and kernel widths shrink as observations
//! accumulate. A scalar sampling parameter `lambda` blends the resulting
//! surrogate with a uniform reference density, tilting proposals towards
//! exploitation (`lambda > 0`) or exploration (`lambda < 0`). Batches of
//! proposals are generated by minimizing one acquisition function per
//! `lambda` value against a shared surrogate.
//!
//! The crate also ships the analytic benchmark registry, a random-search
//! baseline, and an inverse-design objective built on the dimensionless
//! Oregonator reaction model.

pub mod acquisition;
pub mod benchmarks;
pub mod bnn;
pub mod error;
pub mod hmc;
pub mod kernel;
pub mod lbfgs;
pub mod math;
pub mod ode;
pub mod oregonator;
pub mod proposer;
pub mod run;
pub mod seed;
pub mod space;

pub use acquisition::AcquisitionContext;
pub use bnn::{BnnSpec, PosteriorSample, SamplerStats};
pub use error::{Error, Result};
pub use kernel::KernelModel;
pub use proposer::{BatchPolicy, ProxyConfig};
pub use run::{OptimizerConfig, RunRecord};
pub use space::{ObservationSet, ParameterSpace, Scale};
