//! Estimation of the location of a power-law singularity in the intensity
//! of an inhomogeneous Poisson process.
//!
//! The intensity is `S_θ(t) = s(t − θ)` on `[0, T]` with
//! `s(x) = d(x)|x|^p + ψ(x)`, `d = a` left of the singularity and `b` right
//! of it, `p ∈ (−1, 0) ∪ (0, 1)`. From `n` independent paths the crate
//! computes the maximum likelihood estimator (for `p > 0`) and the
//! posterior-mean estimator of `θ`, simulates the limit process of the
//! normalized likelihood ratio, and runs Monte Carlo experiments on the
//! `n^{1/(p+1)}` rate and the limit laws.
//!
//! ```
//! use singloc::estimators::{bayes_estimate, EstimatorConfig};
//! use singloc::model::IntensityModel;
//! use singloc::sampler::sample_batch;
//!
//! let model = IntensityModel::pure_power(1.0, 1.0, 0.5, 1.0, 2.0, 0.5, 1.5).unwrap();
//! let batch = sample_batch(&model, 64, 7).unwrap();
//! let est = bayes_estimate(&batch, &model.family, &EstimatorConfig::default()).unwrap();
//! assert!((est.estimate - 1.0).abs() < 0.2);
//! ```
//!
//! With the default `parallel` feature, replicate loops and grid
//! evaluations run on rayon; results do not depend on the thread count.

pub mod config;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod likelihood;
pub mod limit;
pub mod model;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod stats;
