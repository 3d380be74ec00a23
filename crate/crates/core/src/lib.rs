//! Bayesian models of translation quality assessment.
//!
//! Two models of the errors-per-thousand-words (EPT) score a reviewer assigns
//! to a translation job:
//!
//! * a Gaussian model with a latent job quality plus an additive reviewer
//!   offset and reviewer-specific noise ([`model_gaussian`]);
//! * a hurdle-lognormal model in which language difficulty, translator
//!   error propensity and reviewer bias multiply, each with its own chance of
//!   producing a perfect (zero-error) review ([`model_hurdle`]).
//!
//! Both expose log-posteriors on unconstrained parameter vectors that the
//! samplers in [`inference`] consume. [`ppc`] validates fits by posterior
//! predictive replication, [`analysis`] turns posterior means into linguist
//! skill summaries and [`synthetic`] generates ground-truth worlds for
//! recovery checks.
//!
//! Kernels and log-posteriors are generic over [`Real`] (`f32`, `f64`); the
//! aliases below fix the scalar to `f64`, which is what the samplers use.

pub mod analysis;
pub mod data_model;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod model_gaussian;
pub mod model_hurdle;
pub mod ppc;
pub mod rng;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Real;

pub use data_model::{Dataset, ErrorAnnotationCounts, ReviewRecord};
pub use inference::{Algorithm, ChainSet, LogDensity, SamplerConfig};
pub use rng::RngStreams;

pub type HurdleLognormalParams = distributions::HurdleLognormal<f64>;
pub type Family = distributions::Family<f64>;
pub type HurdleFactorParams = model_hurdle::HurdleFactor<f64>;
pub type CollapsedJobParams = model_hurdle::CollapsedJob<f64>;
pub type HurdleModelParams = model_hurdle::HurdleParams<f64>;
pub type GaussianParams = model_gaussian::GaussianParams<f64>;
pub type GaussianModel = model_gaussian::GaussianModel<f64>;
pub type HurdleModel = model_hurdle::HurdleModel<f64>;
