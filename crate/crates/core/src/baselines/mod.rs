//! Reference samplers the diffusive sampler is compared against.

mod in_and_out;
pub mod nelder_mead;
mod rgo;

pub use in_and_out::{in_and_out_run, in_and_out_step, InOutConfig, InOutOutcome, InOutStep};
pub use rgo::{proximal_run, rgo_step, ProximalOutcome, RgoConfig, RgoSample, StuckChain};
