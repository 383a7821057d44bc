//! Experiment configuration, presets and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use zodps_core::baselines::{InOutConfig, RgoConfig};
use zodps_core::potentials::{Axis, GaussianLasso};
use zodps_core::{Execution, NoiseSchedule, ZodpsConfig};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Lasso,
    Tori,
    SweepH,
    SweepMn,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Zodps,
    Rgo,
    Inout,
    ZodpsNoInteraction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Lasso,
    Tori,
    /// Standard normal, `f(x) = ‖x‖²/2`.
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    Sequential,
    #[default]
    Parallel,
}

impl From<ExecutionMode> for Execution {
    fn from(m: ExecutionMode) -> Self {
        match m {
            ExecutionMode::Sequential => Execution::Sequential,
            ExecutionMode::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TorusAxis {
    X1,
    X2,
    #[default]
    X3,
}

impl From<TorusAxis> for Axis {
    fn from(a: TorusAxis) -> Self {
        match a {
            TorusAxis::X1 => Axis::X1,
            TorusAxis::X2 => Axis::X2,
            TorusAxis::X3 => Axis::X3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMethod {
    /// One long proximal (RGO) trajectory, uniformly thinned.
    #[default]
    Rgo,
    /// Independent draws from the target's exact sampler.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    /// Required for `custom` experiments; implied by the experiment otherwise.
    pub kind: Option<TargetKind>,
    /// Dimension of the Gaussian target.
    pub dim: usize,
    /// Seed of the random orthogonal matrix of the Lasso target.
    pub orthogonal_seed: u64,
    pub eigenvalues: Vec<f64>,
    pub lasso_scale: f64,
    pub axis: TorusAxis,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            kind: None,
            dim: 1,
            orthogonal_seed: 0,
            eigenvalues: GaussianLasso::DEFAULT_EIGENVALUES.to_vec(),
            lasso_scale: GaussianLasso::DEFAULT_LASSO_SCALE,
            axis: TorusAxis::X3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub mean: f64,
    pub std: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            mean: 0.0,
            std: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZodpsSection {
    pub h: f64,
    pub iterations: usize,
    pub interim_samples: usize,
    /// Particles per interacting system (`N`).
    pub particles: usize,
    /// Independent systems; only used by `zodps-no-interaction`.
    pub chains: usize,
    pub sigma_min_sq: f64,
    pub steps: usize,
}

impl Default for ZodpsSection {
    fn default() -> Self {
        Self {
            h: 0.1,
            iterations: 300,
            interim_samples: 1000,
            particles: 100,
            chains: 100,
            sigma_min_sq: 0.0,
            steps: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgoSection {
    pub eta: f64,
    pub chains: usize,
    pub thinning: usize,
    pub updates: usize,
    pub max_rejections: u64,
    pub optimizer_budget: usize,
    pub slack: f64,
}

impl Default for RgoSection {
    fn default() -> Self {
        let d = RgoConfig::default();
        Self {
            eta: d.eta,
            chains: d.chains,
            thinning: d.thinning,
            updates: d.updates,
            max_rejections: d.max_rejections,
            optimizer_budget: d.optimizer_budget,
            slack: d.slack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InOutSection {
    pub h: f64,
    pub retries: usize,
    pub chains: usize,
    pub iterations: usize,
}

impl Default for InOutSection {
    fn default() -> Self {
        let d = InOutConfig::default();
        Self {
            h: d.h,
            retries: d.retries,
            chains: d.chains,
            iterations: d.iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub coordinate: usize,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Reference ensemble file; generated from `[reference]` when absent.
    pub reference: Option<PathBuf>,
    /// Evaluate every `cadence` reported iterations.
    pub cadence: usize,
    /// Reported iterations pooled per KL evaluation.
    pub window: usize,
    pub k: usize,
    /// Marginal histogram of the final pooled particles.
    pub histogram: Option<HistogramSpec>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            reference: None,
            cadence: 10,
            window: 10,
            k: 4,
            histogram: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSection {
    pub method: ReferenceMethod,
    pub burn_in: usize,
    pub collection: usize,
    pub size: usize,
    pub seed: u64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            method: ReferenceMethod::Rgo,
            burn_in: 20_000,
            collection: 80_000,
            size: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub h_values: Vec<f64>,
    /// `(N, M)` pairs with a common product.
    pub pairs: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sampler: SamplerKind,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default)]
    pub execution: ExecutionMode,
    /// Run seeds concurrently instead of one after another.
    #[serde(default)]
    pub parallel_seeds: bool,
    /// Write measured wall time; zero otherwise so outputs stay reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub zodps: ZodpsSection,
    #[serde(default)]
    pub rgo: RgoSection,
    #[serde(default)]
    pub inout: InOutSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub reference: ReferenceSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = [
    "lasso-zodps",
    "lasso-rgo",
    "lasso-no-interaction",
    "tori-zodps",
    "tori-inout",
    "sweep-h",
    "sweep-mn",
];

/// Built-in experiment settings. `paper_scale` restores the full interim
/// sample counts and the full reference trajectory length.
pub fn preset(name: &str, paper_scale: bool) -> Result<ExperimentConfig> {
    let m = if paper_scale { 4000 } else { 1000 };
    let lasso = |sampler: SamplerKind, output: &str| {
        let mut cfg = ExperimentConfig::new(Experiment::Lasso, sampler, (0..10).collect(), output);
        cfg.zodps.interim_samples = m;
        if paper_scale {
            cfg.reference.burn_in = 100_000;
            cfg.reference.collection = 400_000;
        }
        cfg
    };
    let tori = |sampler: SamplerKind, output: &str| {
        let mut cfg = ExperimentConfig::new(Experiment::Tori, sampler, (0..5).collect(), output);
        cfg.zodps = ZodpsSection {
            h: 1.0,
            iterations: 200,
            interim_samples: 300,
            particles: 1000,
            chains: 1,
            sigma_min_sq: 0.01,
            steps: 10,
        };
        cfg
    };
    Ok(match name {
        "lasso-zodps" => lasso(SamplerKind::Zodps, "out/lasso-zodps"),
        "lasso-rgo" => lasso(SamplerKind::Rgo, "out/lasso-rgo"),
        "lasso-no-interaction" => {
            let mut cfg = lasso(SamplerKind::ZodpsNoInteraction, "out/lasso-no-interaction");
            cfg.zodps.particles = 1;
            cfg.zodps.chains = 100;
            cfg
        }
        "tori-zodps" => tori(SamplerKind::Zodps, "out/tori-zodps"),
        "tori-inout" => tori(SamplerKind::Inout, "out/tori-inout"),
        "sweep-h" => {
            let mut cfg = lasso(SamplerKind::Zodps, "out/sweep-h");
            cfg.experiment = Experiment::SweepH;
            cfg.zodps.iterations = 100;
            cfg.sweep.h_values = vec![1.0 / 20.0, 1.0 / 10.0, 1.0 / 5.0];
            cfg
        }
        "sweep-mn" => {
            let mut cfg = lasso(SamplerKind::Zodps, "out/sweep-mn");
            cfg.experiment = Experiment::SweepMn;
            cfg.zodps.iterations = 100;
            cfg.sweep.pairs = vec![[100, m], [200, m / 2], [50, 2 * m]];
            cfg
        }
        other => {
            return Err(HarnessError::Validation(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    })
}

impl ExperimentConfig {
    pub fn new(
        experiment: Experiment,
        sampler: SamplerKind,
        seeds: Vec<u64>,
        output: impl Into<PathBuf>,
    ) -> Self {
        Self {
            experiment,
            sampler,
            seeds,
            output: output.into(),
            execution: ExecutionMode::default(),
            parallel_seeds: false,
            record_wall_time: false,
            target: TargetSection::default(),
            init: InitSection::default(),
            zodps: ZodpsSection::default(),
            rgo: RgoSection::default(),
            inout: InOutSection::default(),
            eval: EvalSection::default(),
            reference: ReferenceSection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the settings that determine results: output location and
    /// scheduling (execution mode, concurrent seeds) are left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        canonical.execution = ExecutionMode::default();
        canonical.parallel_seeds = false;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn target_kind(&self) -> Result<TargetKind> {
        match (self.experiment, self.target.kind) {
            (Experiment::Custom, None) => Err(HarnessError::Validation(
                "custom experiments must set target.kind".into(),
            )),
            (Experiment::Custom, Some(k)) => Ok(k),
            (Experiment::Tori, Some(k)) if k != TargetKind::Tori => {
                Err(mismatch(self.experiment, k))
            }
            (Experiment::Tori, _) => Ok(TargetKind::Tori),
            (_, Some(k)) if k != TargetKind::Lasso => Err(mismatch(self.experiment, k)),
            _ => Ok(TargetKind::Lasso),
        }
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self.target_kind()? {
            TargetKind::Lasso => self.target.eigenvalues.len(),
            TargetKind::Tori => 3,
            TargetKind::Gaussian => self.target.dim,
        })
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        Ok(NoiseSchedule::linear(
            self.zodps.sigma_min_sq,
            self.zodps.h,
            self.zodps.steps,
        )?)
    }

    pub fn zodps_config(&self, seed: u64) -> Result<ZodpsConfig> {
        let z = &self.zodps;
        Ok(ZodpsConfig::new(
            z.h,
            z.iterations,
            z.interim_samples,
            z.particles,
            self.schedule()?,
            seed,
        )?
        .with_execution(self.execution.into()))
    }

    pub fn rgo_config(&self, seed: u64) -> RgoConfig {
        let r = &self.rgo;
        RgoConfig {
            eta: r.eta,
            chains: r.chains,
            thinning: r.thinning,
            updates: r.updates,
            max_rejections: r.max_rejections,
            optimizer_budget: r.optimizer_budget,
            slack: r.slack,
            seed,
            execution: self.execution.into(),
        }
    }

    pub fn inout_config(&self, seed: u64) -> InOutConfig {
        let i = &self.inout;
        InOutConfig {
            h: i.h,
            retries: i.retries,
            chains: i.chains,
            iterations: i.iterations,
            seed,
            execution: self.execution.into(),
        }
    }

    /// Checks every section the experiment will use.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(HarnessError::Validation(m));
        if self.seeds.is_empty() {
            return invalid("at least one seed is required".into());
        }
        if self.output.as_os_str().is_empty() {
            return invalid("output directory must be set".into());
        }
        let target = self.target_kind()?;
        if self.dim()? == 0 {
            return invalid("target dimension must be at least 1".into());
        }
        if !(self.init.std >= 0.0) || !self.init.std.is_finite() || !self.init.mean.is_finite() {
            return invalid("init mean must be finite and init std non-negative".into());
        }
        if target == TargetKind::Lasso {
            if !(self.target.lasso_scale > 0.0) {
                return invalid("lasso_scale must be positive".into());
            }
            if self
                .target
                .eigenvalues
                .iter()
                .any(|s| !(*s > 0.0) || !s.is_finite())
            {
                return invalid("eigenvalues must be positive and finite".into());
            }
        }
        let e = &self.eval;
        if e.cadence == 0 || e.window == 0 || e.k == 0 {
            return invalid("eval cadence, window and k must be at least 1".into());
        }
        if let Some(h) = &e.histogram {
            if h.bins == 0 || !(h.hi > h.lo) || h.coordinate >= self.dim()? {
                return invalid("histogram needs bins >= 1, lo < hi and a valid coordinate".into());
            }
        }
        match self.sampler {
            SamplerKind::Zodps => {
                self.zodps_config(0)?.validate()?;
            }
            SamplerKind::ZodpsNoInteraction => {
                self.zodps_config(0)?.validate()?;
                if self.zodps.chains == 0 {
                    return invalid("zodps.chains must be at least 1".into());
                }
            }
            SamplerKind::Rgo => {
                self.rgo_config(0).validate()?;
                if self.rgo.chains == 0 || self.rgo.updates < self.rgo.thinning {
                    return invalid(
                        "rgo needs at least one chain and one reported iteration".into(),
                    );
                }
            }
            SamplerKind::Inout => {
                if target != TargetKind::Tori {
                    return invalid("the inout sampler needs the tori target".into());
                }
                self.inout_config(0).validate()?;
                if self.inout.chains == 0 {
                    return invalid("inout.chains must be at least 1".into());
                }
            }
        }
        if target != TargetKind::Tori {
            let r = &self.reference;
            if e.reference.is_none() {
                if r.size == 0 {
                    return invalid("reference size must be at least 1".into());
                }
                if r.method == ReferenceMethod::Rgo && r.size > r.collection {
                    return invalid(format!(
                        "reference size {} exceeds the {} collected samples",
                        r.size, r.collection
                    ));
                }
                if r.method == ReferenceMethod::Rgo {
                    self.rgo_config(r.seed).validate()?;
                }
            }
        }
        match self.experiment {
            Experiment::SweepH => {
                if self.sweep.h_values.is_empty() {
                    return invalid("sweep.h_values must not be empty".into());
                }
                if self
                    .sweep
                    .h_values
                    .iter()
                    .any(|h| !(*h > 0.0) || !h.is_finite())
                {
                    return invalid("sweep.h_values must be positive".into());
                }
            }
            Experiment::SweepMn => check_pairs(&self.sweep.pairs)?,
            _ => {}
        }
        if matches!(self.experiment, Experiment::SweepH | Experiment::SweepMn)
            && self.sampler != SamplerKind::Zodps
        {
            return invalid("sweeps run the zodps sampler".into());
        }
        Ok(())
    }
}

/// All pairs non-empty, positive and with one common `N·M`.
pub fn check_pairs(pairs: &[[usize; 2]]) -> Result<()> {
    let Some(first) = pairs.first() else {
        return Err(HarnessError::Validation(
            "sweep.pairs must not be empty".into(),
        ));
    };
    let product = first[0] * first[1];
    for p in pairs {
        if p[0] == 0 || p[1] == 0 {
            return Err(HarnessError::Validation(format!(
                "pair {p:?} must be positive"
            )));
        }
        if p[0] * p[1] != product {
            return Err(HarnessError::Validation(format!(
                "pair ({}, {}) has N·M = {}, expected {product}",
                p[0],
                p[1],
                p[0] * p[1]
            )));
        }
    }
    Ok(())
}

fn mismatch(experiment: Experiment, kind: TargetKind) -> HarnessError {
    HarnessError::Validation(format!(
        "target {kind:?} does not fit experiment {experiment:?}"
    ))
}
