//! Zeroth-order diffusive proximal sampling.
//!
//! The sampler alternates a forward Gaussian perturbation of a particle
//! ensemble with a simulated reverse heat flow. The reverse drift is a Monte
//! Carlo score estimate over a Gaussian-mixture posterior built from the
//! ensemble itself, so the target potential is only ever evaluated, never
//! differentiated.
//!
//! Alongside the sampler the crate ships the two reference samplers it is
//! benchmarked against (a rejection-sampling restricted Gaussian oracle
//! proximal sampler and In-and-Out for uniform laws on bodies), the test
//! targets, and k-NN KL / occupancy diagnostics.
//!
//! ```
//! use zodps_core::{
//!     potentials::Quadratic, Ensemble, NoiseSchedule, Zodps, ZodpsConfig,
//! };
//!
//! let schedule = NoiseSchedule::linear(0.0, 1.0, 8).unwrap();
//! let config = ZodpsConfig::new(1.0, 3, 50, 20, schedule, 7).unwrap();
//! let init = Ensemble::from_flat(vec![2.0; 20], 1).unwrap();
//! let sampler = Zodps::new(config, Quadratic::new(1));
//! let out = sampler.run(&init, |_| {}).unwrap();
//! assert_eq!(out.ensemble.len(), 20);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod diagnostics;
mod ensemble;
mod error;
pub mod numeric;
pub mod par;
pub mod potentials;
mod record;
pub mod rng;
mod schedule;
pub mod zodps;

pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use par::Execution;
pub use potentials::PotentialOracle;
pub use record::RunRecord;
pub use rng::{Purpose, SeedSpec, StreamId};
pub use schedule::NoiseSchedule;
pub use zodps::{Zodps, ZodpsConfig};
