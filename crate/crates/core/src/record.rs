use std::sync::Arc;

use crate::diagnostics::{KlEstimate, Occupancy};
use crate::ensemble::Ensemble;

/// Snapshot emitted once per reported iteration of any sampler.
///
/// Samplers fill the trajectory fields; evaluation code attaches `kl`,
/// `kl_variance` and `occupancy` afterwards.
#[derive(Clone, Debug)]
pub struct RunRecord {
    /// 1-based index of the reported iteration.
    pub iteration: usize,
    /// Seconds since the start of the run.
    pub wall_time: f64,
    pub ensemble: Arc<Ensemble>,
    pub kl: Option<KlEstimate>,
    pub kl_variance: Option<f64>,
    pub occupancy: Option<Occupancy>,
    /// Particle-substeps in this iteration whose interim samples all had
    /// infinite potential.
    pub degenerate_weight_events: usize,
    pub rgo_rejections: Option<u64>,
    /// RGO acceptance ratios that exceeded one and were clamped.
    pub rgo_clamp_events: Option<u64>,
    /// Chains lost during this iteration (RGO stuck or In-and-Out discard).
    pub lost_chains: usize,
    /// Set when the evaluation pool had fewer iterations than requested.
    pub short_window: bool,
}

impl RunRecord {
    pub fn new(iteration: usize, wall_time: f64, ensemble: Ensemble) -> Self {
        Self {
            iteration,
            wall_time,
            ensemble: Arc::new(ensemble),
            kl: None,
            kl_variance: None,
            occupancy: None,
            degenerate_weight_events: 0,
            rgo_rejections: None,
            rgo_clamp_events: None,
            lost_chains: 0,
            short_window: false,
        }
    }
}
