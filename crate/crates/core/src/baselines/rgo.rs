//! Proximal sampler with a rejection-sampling restricted Gaussian oracle.
//!
//! The oracle samples `π(x | y) ∝ exp(−f(x) − ‖x − y‖²/(2η))` exactly:
//!
//! 1. minimize `g(x) = f(x) + ‖x − y‖²/(2η)` derivative-free, giving `x*`;
//! 2. propose `x ~ N(x*, ηI)`;
//! 3. accept with probability `exp(−[f(x) − f(x*) + slack − ⟨v, x − x*⟩])`,
//!    where `v = (y − x*)/η` is the slope of `f` at `x*` implied by optimality.
//!
//! The proposal-to-target ratio is exactly `exp(−f(x) + ⟨v, x − x*⟩)` up to a
//! constant, so the scheme is exact whenever `f` lies above its supporting
//! plane at `x*` (convex `f`, or any `f` locally near the proposal mass).
//! Ratios above one are clamped to one and counted.

use std::time::Instant;

use rand::Rng;

use super::nelder_mead;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::add_gaussian;
use crate::par::{self, Execution};
use crate::potentials::PotentialOracle;
use crate::record::RunRecord;
use crate::rng::{Purpose, SeedSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct RgoConfig {
    /// Proximal step size `η`.
    pub eta: f64,
    pub chains: usize,
    /// Single-step updates grouped into one reported iteration.
    pub thinning: usize,
    /// Total single-step updates per chain.
    pub updates: usize,
    /// Rejections allowed in one oracle call before giving up.
    pub max_rejections: u64,
    /// Objective evaluations available to the local minimization.
    pub optimizer_budget: usize,
    /// Safety margin subtracted from the minorant level (0 by default).
    pub slack: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for RgoConfig {
    fn default() -> Self {
        Self {
            eta: 1.0 / 135.0,
            chains: 100,
            thinning: 10,
            updates: 3000,
            max_rejections: 100_000,
            optimizer_budget: 200,
            slack: 0.0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl RgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        if self.max_rejections == 0 {
            return Err(Error::invalid("max_rejections must be at least 1"));
        }
        if self.optimizer_budget == 0 {
            return Err(Error::invalid("optimizer budget must be at least 1"));
        }
        if !(self.slack >= 0.0) {
            return Err(Error::invalid("slack must be non-negative"));
        }
        Ok(())
    }

    /// Reported iterations, `⌊updates / thinning⌋`.
    pub fn reported_iterations(&self) -> usize {
        self.updates / self.thinning
    }
}

/// One exact draw from `π(x | y)` plus bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct RgoSample {
    pub x: Vec<f64>,
    pub rejections: u64,
    pub clamp_events: u64,
    /// Potential evaluations spent (optimizer plus proposals).
    pub evaluations: usize,
}

pub fn rgo_step<P: PotentialOracle + ?Sized>(
    y: &[f64],
    eta: f64,
    oracle: &P,
    config: &RgoConfig,
    stream: &SeedSpec,
) -> Result<RgoSample> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if y.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            actual: y.len(),
        });
    }
    rgo_step_with(y, eta, oracle, config, &mut stream.rng())
}

fn rgo_step_with<P, R>(
    y: &[f64],
    eta: f64,
    oracle: &P,
    config: &RgoConfig,
    rng: &mut R,
) -> Result<RgoSample>
where
    P: PotentialOracle + ?Sized,
    R: Rng + ?Sized,
{
    let inv_2eta = 0.5 / eta;
    let objective = |x: &[f64]| {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        oracle.evaluate(x) + sq * inv_2eta
    };
    let min = nelder_mead::minimize(objective, y, eta.sqrt(), config.optimizer_budget, 1e-12);
    let x_star = min.x;
    let f_star = oracle.evaluate(&x_star);
    let slope: Vec<f64> = y
        .iter()
        .zip(&x_star)
        .map(|(yc, xc)| (yc - xc) / eta)
        .collect();
    let level = f_star - config.slack;
    let std = eta.sqrt();

    let mut evaluations = min.evaluations + 1;
    let mut rejections = 0u64;
    let mut clamp_events = 0u64;
    let mut x = vec![0.0; y.len()];
    loop {
        x.copy_from_slice(&x_star);
        add_gaussian(rng, &mut x, std);
        let fx = oracle.evaluate(&x);
        evaluations += 1;
        let tangent: f64 = slope
            .iter()
            .zip(x.iter().zip(&x_star))
            .map(|(v, (a, b))| v * (a - b))
            .sum();
        let log_accept = -(fx - level - tangent);
        let u: f64 = rng.random();
        if log_accept > 0.0 {
            clamp_events += 1;
        }
        if fx.is_finite() && (log_accept >= 0.0 || u < log_accept.exp()) {
            return Ok(RgoSample {
                x,
                rejections,
                clamp_events,
                evaluations,
            });
        }
        rejections += 1;
        if rejections >= config.max_rejections {
            return Err(Error::RgoStuck { rejections });
        }
    }
}

/// A chain removed from a proximal run.
#[derive(Clone, Debug, PartialEq)]
pub struct StuckChain {
    pub chain: usize,
    pub update: usize,
    pub rejections: u64,
}

#[derive(Clone, Debug)]
pub struct ProximalOutcome {
    pub ensemble: Ensemble,
    /// Original indices of the surviving chains, in ensemble order.
    pub survivors: Vec<usize>,
    pub stuck: Vec<StuckChain>,
    pub rejections: u64,
    pub clamp_events: u64,
    pub proposals: u64,
}

struct ChainStats {
    x: Vec<f64>,
    rejections: u64,
    clamps: u64,
    proposals: u64,
    stuck: Option<StuckChain>,
}

/// Runs independent proximal chains: `y ~ N(x, ηI)` then `x ~ π(x | y)`.
///
/// The observer fires after every `thinning` updates. A chain whose oracle
/// gets stuck is dropped and reported in [`ProximalOutcome::stuck`].
pub fn proximal_run<P, F>(
    config: &RgoConfig,
    oracle: &P,
    init: &Ensemble,
    mut observer: F,
) -> Result<ProximalOutcome>
where
    P: PotentialOracle + ?Sized,
    F: FnMut(&RunRecord),
{
    config.validate()?;
    if init.len() != config.chains {
        return Err(Error::invalid(format!(
            "initial ensemble has {} chains, config expects {}",
            init.len(),
            config.chains
        )));
    }
    init.check_dim(oracle.dim())?;
    let d = init.dim();
    let start = Instant::now();
    let mut states: Vec<(usize, Vec<f64>)> = init.rows().map(|r| r.to_vec()).enumerate().collect();
    let mut outcome = ProximalOutcome {
        ensemble: init.clone(),
        survivors: Vec::new(),
        stuck: Vec::new(),
        rejections: 0,
        clamp_events: 0,
        proposals: 0,
    };
    let std = config.eta.sqrt();

    let mut update = 0;
    let mut iteration = 0;
    while update < config.updates {
        let block = config.thinning.min(config.updates - update);
        let stats = par::map_range(config.execution, states.len(), |s| {
            let (chain, ref x0) = states[s];
            let mut st = ChainStats {
                x: x0.clone(),
                rejections: 0,
                clamps: 0,
                proposals: 0,
                stuck: None,
            };
            for u in update..update + block {
                let mut fwd =
                    SeedSpec::at(config.seed, Purpose::RgoForward, u as u64, chain as u64, 0).rng();
                let mut y = st.x.clone();
                add_gaussian(&mut fwd, &mut y, std);
                let mut rng =
                    SeedSpec::at(config.seed, Purpose::RgoStep, u as u64, chain as u64, 0).rng();
                match rgo_step_with(&y, config.eta, oracle, config, &mut rng) {
                    Ok(sample) => {
                        st.rejections += sample.rejections;
                        st.clamps += sample.clamp_events;
                        st.proposals += sample.rejections + 1;
                        st.x = sample.x;
                    }
                    Err(Error::RgoStuck { rejections }) => {
                        st.rejections += rejections;
                        st.proposals += rejections;
                        st.stuck = Some(StuckChain {
                            chain,
                            update: u + 1,
                            rejections,
                        });
                        break;
                    }
                    Err(e) => unreachable!("rgo_step_with only fails with RgoStuck: {e}"),
                }
            }
            st
        });
        update += block;

        let mut rejections = 0;
        let mut clamps = 0;
        let mut lost = 0;
        let mut next = Vec::with_capacity(states.len());
        for ((chain, _), st) in states.iter().zip(stats) {
            rejections += st.rejections;
            clamps += st.clamps;
            outcome.proposals += st.proposals;
            match st.stuck {
                Some(s) => {
                    lost += 1;
                    outcome.stuck.push(s);
                }
                None => next.push((*chain, st.x)),
            }
        }
        states = next;
        outcome.rejections += rejections;
        outcome.clamp_events += clamps;

        if block == config.thinning {
            iteration += 1;
            let ens = Ensemble::from_flat(
                states.iter().flat_map(|(_, x)| x.iter().copied()).collect(),
                d,
            )?;
            let mut record = RunRecord::new(iteration, start.elapsed().as_secs_f64(), ens);
            record.rgo_rejections = Some(rejections);
            record.rgo_clamp_events = Some(clamps);
            record.lost_chains = lost;
            observer(&record);
        }
    }

    outcome.ensemble = Ensemble::from_flat(
        states.iter().flat_map(|(_, x)| x.iter().copied()).collect(),
        d,
    )?;
    outcome.survivors = states.into_iter().map(|(c, _)| c).collect();
    Ok(outcome)
}
