//! The zeroth-order diffusive proximal sampler.
//!
//! One outer iteration maps an ensemble `X` to a new ensemble:
//!
//! 1. forward heat flow: `y_j = x_j + √h ξ_j` and, with fresh noise,
//!    `z_T^i = x_i + √h ξ'_i`;
//! 2. for `t = T, …, 1` every `z^i` takes an Euler–Maruyama step
//!    `z ← z + Δt ŝ_t(z) + √Δt ξ''` where `ŝ_t` is a Monte Carlo score over the
//!    posterior mixture of [`posterior_params`];
//! 3. `x_{k+1}^i = z_0^i`.
//!
//! Given `X` and `Y` the reverse trajectories of different particles are
//! independent, so each particle runs its whole `T`-step trajectory inside one
//! work item with its own random streams.

mod posterior;

use std::time::Instant;

pub use posterior::{
    estimate_score, mixture_log_density, posterior_params, PosteriorMixture, ScoreEstimate,
};
use posterior::{Scratch, Surrogate};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::add_gaussian;
use crate::par::{self, Execution};
use crate::potentials::PotentialOracle;
use crate::record::RunRecord;
use crate::rng::{derive_seed, Purpose, SeedSpec};
use crate::schedule::NoiseSchedule;

#[derive(Clone, Debug, PartialEq)]
pub struct ZodpsConfig {
    /// Macro step size `h` (variance units).
    pub h: f64,
    /// Outer iterations `K`.
    pub iterations: usize,
    /// Interim samples `M` per particle per substep.
    pub interim_samples: usize,
    /// Particle count `N`.
    pub particles: usize,
    pub schedule: NoiseSchedule,
    pub seed: u64,
    pub execution: Execution,
}

impl ZodpsConfig {
    pub fn new(
        h: f64,
        iterations: usize,
        interim_samples: usize,
        particles: usize,
        schedule: NoiseSchedule,
        seed: u64,
    ) -> Result<Self> {
        let config = Self {
            h,
            iterations,
            interim_samples,
            particles,
            schedule,
            seed,
            execution: Execution::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Diffusion substeps `T`.
    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::invalid(format!(
                "h must be positive, got {}",
                self.h
            )));
        }
        if self.interim_samples == 0 {
            return Err(Error::invalid("M (interim samples) must be at least 1"));
        }
        if self.particles == 0 {
            return Err(Error::invalid("N (particles) must be at least 1"));
        }
        if self.schedule.h() != self.h {
            return Err(Error::Schedule(format!(
                "schedule ends at {} but h = {}",
                self.schedule.h(),
                self.h
            )));
        }
        Ok(())
    }
}

/// Forward heat flow: returns `(Y, Z_T)` from independent noise streams.
pub fn forward_step(
    x: &Ensemble,
    h: f64,
    seed: u64,
    iteration: u64,
    exec: Execution,
) -> Result<(Ensemble, Ensemble)> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("h must be non-negative, got {h}")));
    }
    let std = h.sqrt();
    let perturb = |purpose: Purpose| {
        let rows = par::map_range(exec, x.len(), |i| {
            let mut row = x.row(i).to_vec();
            let mut rng = SeedSpec::at(seed, purpose, iteration, i as u64, 0).rng();
            add_gaussian(&mut rng, &mut row, std);
            row
        });
        Ensemble::from_parts(rows, x.dim())
    };
    Ok((perturb(Purpose::Forward)?, perturb(Purpose::ReverseInit)?))
}

/// Result of simulating the surrogate reverse dynamics for one iteration.
#[derive(Clone, Debug)]
pub struct ReverseOutcome {
    pub ensemble: Ensemble,
    /// Particle-substeps that fell back to zero drift.
    pub degenerate_events: usize,
}

/// Runs `t = T, …, 1` Euler–Maruyama substeps on every particle of `z_start`.
#[allow(clippy::too_many_arguments)]
pub fn reverse_step<P: PotentialOracle + ?Sized>(
    z_start: &Ensemble,
    y: &Ensemble,
    x: &Ensemble,
    schedule: &NoiseSchedule,
    interim: usize,
    oracle: &P,
    seed: u64,
    iteration: u64,
    exec: Execution,
) -> Result<ReverseOutcome> {
    if y.len() != x.len() || y.is_empty() {
        return Err(Error::invalid(
            "perturbed and base ensembles must be non-empty and equally sized",
        ));
    }
    x.check_dim(y.dim())?;
    z_start.check_dim(y.dim())?;
    if oracle.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            actual: y.dim(),
        });
    }
    if schedule.variance(1) <= 0.0 {
        return Err(Error::Schedule("sigma_1^2 must be positive".into()));
    }
    let surrogate = Surrogate::new(y, x, schedule.h(), exec)?;
    let results = par::try_map_range(exec, z_start.len(), |i| {
        let mut z = z_start.row(i).to_vec();
        let mut scratch = Scratch::default();
        let mut degenerate = 0usize;
        for t in (1..=schedule.steps()).rev() {
            let sigma_sq = schedule.variance(t);
            let dt = schedule.delta(t);
            let mut rng = SeedSpec::at(seed, Purpose::Interim, iteration, i as u64, t as u64).rng();
            let score = surrogate.score(&z, sigma_sq, interim, oracle, &mut rng, &mut scratch)?;
            degenerate += usize::from(score.degenerate);
            for (zc, s) in z.iter_mut().zip(&score.drift) {
                *zc += dt * s;
            }
            let mut noise =
                SeedSpec::at(seed, Purpose::Diffusion, iteration, i as u64, t as u64).rng();
            add_gaussian(&mut noise, &mut z, dt.sqrt());
        }
        Ok::<_, Error>((z, degenerate))
    })?;
    let degenerate_events = results.iter().map(|(_, d)| d).sum();
    let ensemble = Ensemble::from_parts(results.into_iter().map(|(z, _)| z).collect(), y.dim())
        .map_err(|_| Error::invalid("reverse dynamics produced a non-finite particle"))?;
    Ok(ReverseOutcome {
        ensemble,
        degenerate_events,
    })
}

/// Final state and counters of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub ensemble: Ensemble,
    pub degenerate_events: usize,
    /// Particle-substeps simulated in total.
    pub substeps: usize,
}

pub struct Zodps<P> {
    config: ZodpsConfig,
    oracle: P,
}

impl<P: PotentialOracle> Zodps<P> {
    pub fn new(config: ZodpsConfig, oracle: P) -> Self {
        Self { config, oracle }
    }

    pub fn config(&self) -> &ZodpsConfig {
        &self.config
    }

    pub fn oracle(&self) -> &P {
        &self.oracle
    }

    /// One outer iteration (0-based index `k`) from `x`.
    pub fn step(&self, k: usize, x: &Ensemble) -> Result<ReverseOutcome> {
        let c = &self.config;
        let (y, z) = forward_step(x, c.h, c.seed, k as u64, c.execution)?;
        reverse_step(
            &z,
            &y,
            x,
            &c.schedule,
            c.interim_samples,
            &self.oracle,
            c.seed,
            k as u64,
            c.execution,
        )
    }

    /// Runs `K` outer iterations, calling `observer` after each.
    pub fn run<F>(&self, init: &Ensemble, mut observer: F) -> Result<RunOutcome>
    where
        F: FnMut(&RunRecord),
    {
        self.config.validate()?;
        self.check_init(init, self.config.particles)?;
        let start = Instant::now();
        let mut x = init.clone();
        let mut degenerate_events = 0;
        for k in 0..self.config.iterations {
            let out = self.step(k, &x).map_err(|e| e.at_iteration(k + 1))?;
            x = out.ensemble;
            degenerate_events += out.degenerate_events;
            let mut record = RunRecord::new(k + 1, start.elapsed().as_secs_f64(), x.clone());
            record.degenerate_weight_events = out.degenerate_events;
            observer(&record);
        }
        Ok(RunOutcome {
            ensemble: x,
            degenerate_events,
            substeps: self.config.iterations * self.config.steps() * self.config.particles,
        })
    }

    /// Runs `init.len() / N` independent systems of `N` particles in lockstep.
    ///
    /// System `c` owns rows `c·N .. (c+1)·N` and the master seed
    /// `derive_seed(seed, c)`, so each system evolves exactly as a standalone
    /// [`Zodps::run`] with that seed. With `N = 1` this is the sampler
    /// without particle interaction.
    pub fn run_independent<F>(&self, init: &Ensemble, mut observer: F) -> Result<RunOutcome>
    where
        F: FnMut(&RunRecord),
    {
        self.config.validate()?;
        let n = self.config.particles;
        if init.is_empty() || !init.len().is_multiple_of(n) {
            return Err(Error::invalid(format!(
                "{} initial particles do not split into systems of {n}",
                init.len()
            )));
        }
        self.check_init(init, init.len())?;
        let systems = init.len() / n;
        let d = init.dim();
        let chain_samplers: Vec<ZodpsConfig> = (0..systems)
            .map(|c| ZodpsConfig {
                seed: derive_seed(self.config.seed, c as u64),
                execution: Execution::Sequential,
                ..self.config.clone()
            })
            .collect();

        let start = Instant::now();
        let mut x = init.clone();
        let mut degenerate_events = 0;
        for k in 0..self.config.iterations {
            let parts = par::try_map_range(self.config.execution, systems, |c| {
                let sub = Ensemble::from_flat(x.as_flat()[c * n * d..(c + 1) * n * d].to_vec(), d)?;
                let sampler = Zodps {
                    config: chain_samplers[c].clone(),
                    oracle: &self.oracle,
                };
                sampler.step(k, &sub)
            })
            .map_err(|e| e.at_iteration(k + 1))?;
            let events: usize = parts.iter().map(|p| p.degenerate_events).sum();
            degenerate_events += events;
            x = Ensemble::concat(parts.iter().map(|p| &p.ensemble), d)?;
            let mut record = RunRecord::new(k + 1, start.elapsed().as_secs_f64(), x.clone());
            record.degenerate_weight_events = events;
            observer(&record);
        }
        Ok(RunOutcome {
            ensemble: x,
            degenerate_events,
            substeps: self.config.iterations * self.config.steps() * init.len(),
        })
    }

    fn check_init(&self, init: &Ensemble, expected_n: usize) -> Result<()> {
        if init.len() != expected_n {
            return Err(Error::invalid(format!(
                "initial ensemble has {} particles, expected {expected_n}",
                init.len()
            )));
        }
        init.check_dim(self.oracle.dim())
    }
}
