//! In-and-Out: proximal sampling of the uniform law on a body `K` through a
//! membership oracle.

use std::time::Instant;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::add_gaussian;
use crate::par::{self, Execution};
use crate::potentials::Membership;
use crate::record::RunRecord;
use crate::rng::{Purpose, SeedSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct InOutConfig {
    pub h: f64,
    /// Retry threshold `R` for the inner rejection loop.
    pub retries: usize,
    pub chains: usize,
    pub iterations: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for InOutConfig {
    fn default() -> Self {
        Self {
            h: 1.0,
            retries: 10_000,
            chains: 1000,
            iterations: 200,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl InOutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::invalid(format!(
                "h must be positive, got {}",
                self.h
            )));
        }
        if self.retries == 0 {
            return Err(Error::invalid("retry threshold R must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InOutStep {
    Accepted(Vec<f64>),
    /// No resample landed in `K` within `R` attempts.
    Discarded,
}

/// `y ~ N(x, hI)`, then up to `R` draws `x' ~ N(y, hI)`; the first `x' ∈ K` wins.
pub fn in_and_out_step<K: Membership + ?Sized>(
    x: &[f64],
    config: &InOutConfig,
    domain: &K,
    stream: &SeedSpec,
) -> InOutStep {
    let std = config.h.sqrt();
    let mut rng = stream.rng();
    let mut y = x.to_vec();
    add_gaussian(&mut rng, &mut y, std);
    let mut cand = vec![0.0; x.len()];
    for _ in 0..config.retries {
        cand.copy_from_slice(&y);
        add_gaussian(&mut rng, &mut cand, std);
        if domain.contains(&cand) {
            return InOutStep::Accepted(cand);
        }
    }
    InOutStep::Discarded
}

#[derive(Clone, Debug)]
pub struct InOutOutcome {
    pub ensemble: Ensemble,
    /// Original chain indices of the survivors, in ensemble order.
    pub survivors: Vec<usize>,
    pub discarded: usize,
}

/// Runs the chains for `iterations` steps, dropping discarded ones.
///
/// The observer sees the surviving ensemble after every iteration; once no
/// chain survives it is called one last time with an empty ensemble.
pub fn in_and_out_run<K, F>(
    config: &InOutConfig,
    domain: &K,
    init: &Ensemble,
    mut observer: F,
) -> Result<InOutOutcome>
where
    K: Membership + ?Sized,
    F: FnMut(&RunRecord),
{
    config.validate()?;
    init.check_dim(domain.dim())?;
    if init.len() != config.chains {
        return Err(Error::invalid(format!(
            "initial ensemble has {} chains, config expects {}",
            init.len(),
            config.chains
        )));
    }
    let d = init.dim();
    let start = Instant::now();
    let mut states: Vec<(usize, Vec<f64>)> = init.rows().map(|r| r.to_vec()).enumerate().collect();
    let mut discarded = 0;
    for k in 0..config.iterations {
        if states.is_empty() {
            break;
        }
        let steps = par::map_range(config.execution, states.len(), |s| {
            let (chain, ref x) = states[s];
            let stream = SeedSpec::at(config.seed, Purpose::InOut, k as u64, chain as u64, 0);
            in_and_out_step(x, config, domain, &stream)
        });
        let before = states.len();
        states = states
            .into_iter()
            .zip(steps)
            .filter_map(|((chain, _), step)| match step {
                InOutStep::Accepted(x) => Some((chain, x)),
                InOutStep::Discarded => None,
            })
            .collect();
        let lost = before - states.len();
        discarded += lost;
        let ens = Ensemble::from_flat(
            states.iter().flat_map(|(_, x)| x.iter().copied()).collect(),
            d,
        )?;
        let mut record = RunRecord::new(k + 1, start.elapsed().as_secs_f64(), ens);
        record.lost_chains = lost;
        observer(&record);
    }
    Ok(InOutOutcome {
        ensemble: Ensemble::from_flat(
            states.iter().flat_map(|(_, x)| x.iter().copied()).collect(),
            d,
        )?,
        survivors: states.into_iter().map(|(c, _)| c).collect(),
        discarded,
    })
}
