//! Experiment orchestration: per-seed runs, evaluation, reference sets,
//! sweeps, and file emission.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use zodps_core::baselines::{in_and_out_run, proximal_run, RgoConfig};
use zodps_core::diagnostics::{knn_kl, marginal_histogram, pool_particles, torus_occupancy};
use zodps_core::numeric::add_gaussian;
use zodps_core::potentials::{make_orthogonal, GaussianLasso, Quadratic, ToriDomain};
use zodps_core::{par, Ensemble, Execution, PotentialOracle, Purpose, RunRecord, SeedSpec, Zodps};

use crate::config::{
    Experiment, ExperimentConfig, ReferenceMethod, ReferenceSection, SamplerKind, TargetKind,
};
use crate::error::{HarnessError, Result};
use crate::io::{self, Metadata, RecordRow};
use crate::plot::{self, Point, Series};

/// A constructed target potential.
pub enum Target {
    Lasso(GaussianLasso),
    Tori(ToriDomain),
    Gaussian(Quadratic),
}

impl Target {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let t = &cfg.target;
        Ok(match cfg.target_kind()? {
            TargetKind::Lasso => {
                let d = t.eigenvalues.len();
                let u = make_orthogonal(&SeedSpec::new(t.orthogonal_seed, Purpose::Orthogonal), d);
                Target::Lasso(GaussianLasso::new(u, t.eigenvalues.clone(), t.lasso_scale)?)
            }
            TargetKind::Tori => Target::Tori(ToriDomain::with_axis(t.axis.into())),
            TargetKind::Gaussian => Target::Gaussian(Quadratic::new(t.dim)),
        })
    }

    pub fn oracle(&self) -> &dyn PotentialOracle {
        match self {
            Target::Lasso(l) => l,
            Target::Tori(t) => t,
            Target::Gaussian(q) => q,
        }
    }
}

/// Results of one seed.
#[derive(Clone, Debug)]
pub struct SeedReport {
    pub seed: u64,
    pub rows: Vec<RecordRow>,
    pub final_ensemble: Ensemble,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub output: PathBuf,
    pub seeds: Vec<SeedReport>,
    pub aggregate: Vec<RecordRow>,
}

impl ExperimentReport {
    /// Aggregate row at `iteration`, if it was evaluated.
    pub fn at(&self, iteration: usize) -> Option<&RecordRow> {
        self.aggregate.iter().find(|r| r.iteration == iteration)
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub output: PathBuf,
    /// `(label, report)` per swept setting, in input order.
    pub runs: Vec<(String, ExperimentReport)>,
}

pub enum Report {
    Single(ExperimentReport),
    Sweep(SweepReport),
}

/// Runs whatever `cfg.experiment` asks for.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Report> {
    match cfg.experiment {
        Experiment::SweepH => sweep_step_size(cfg, &cfg.sweep.h_values).map(Report::Sweep),
        Experiment::SweepMn => sweep_mn(cfg, &cfg.sweep.pairs).map(Report::Sweep),
        _ => run_experiment(cfg).map(Report::Single),
    }
}

/// Runs every seed of a single-setting experiment and writes
/// `seed-<s>/records.csv`, `seed-<s>/final.csv`, `aggregate.csv`, a chart and
/// (for KL targets) the reference set into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_writable(&cfg.output)?;
    let reference = prepare_reference(cfg)?;
    run_with_reference(cfg, reference.as_ref())
}

fn run_with_reference(
    cfg: &ExperimentConfig,
    reference: Option<&(Ensemble, Metadata)>,
) -> Result<ExperimentReport> {
    ensure_writable(&cfg.output)?;
    let target = Target::build(cfg)?;
    if let Some((ens, meta)) = reference {
        ens.check_dim(target.oracle().dim())?;
        io::write_ensemble(&cfg.output.join("reference.csv"), ens, meta)?;
    }
    io::write_file(&cfg.output.join("config.toml"), &cfg.to_toml())?;
    let reference = reference.map(|(e, _)| e);

    let outcomes: Vec<SeedOutcome> = if cfg.parallel_seeds {
        par::map_range(Execution::Parallel, cfg.seeds.len(), |i| {
            run_seed(cfg, &target, reference, cfg.seeds[i])
        })
    } else {
        let mut out = Vec::new();
        for &seed in &cfg.seeds {
            let o = run_seed(cfg, &target, reference, seed);
            let failed = o.error.is_some();
            out.push(o);
            if failed {
                break;
            }
        }
        out
    };

    let hash = cfg.hash();
    let mut seeds = Vec::new();
    let mut failure = None;
    for o in outcomes {
        let dir = cfg.output.join(format!("seed-{}", o.seed));
        io::write_records(&dir.join("records.csv"), &o.rows)?;
        if let Some(e) = o.error {
            failure.get_or_insert(HarnessError::Sampler {
                seed: o.seed,
                source: e,
            });
            continue;
        }
        let mut meta = Metadata::new();
        meta.insert("seed".into(), o.seed.to_string());
        meta.insert("config_hash".into(), hash.clone());
        meta.insert(
            "iteration".into(),
            o.rows.last().map_or(0, |r| r.iteration).to_string(),
        );
        meta.insert("sampler".into(), format!("{:?}", cfg.sampler));
        io::write_ensemble(&dir.join("final.csv"), &o.final_ensemble, &meta)?;
        if let (Some(spec), Some(pooled)) = (&cfg.eval.histogram, &o.final_pool) {
            let counts =
                marginal_histogram(pooled, spec.coordinate, spec.bins, (spec.lo, spec.hi))?;
            let width = (spec.hi - spec.lo) / spec.bins as f64;
            let mut csv = String::from("bin_lo,bin_hi,count\n");
            for (b, c) in counts.iter().enumerate() {
                let lo = spec.lo + b as f64 * width;
                csv.push_str(&format!("{lo},{},{c}\n", lo + width));
            }
            io::write_file(&dir.join("histogram.csv"), &csv)?;
            let label = format!("x{}", spec.coordinate + 1);
            io::write_file(
                &dir.join("histogram.svg"),
                &plot::histogram_chart(
                    &format!("seed {} marginal", o.seed),
                    &label,
                    &counts,
                    (spec.lo, spec.hi),
                ),
            )?;
        }
        seeds.push(SeedReport {
            seed: o.seed,
            rows: o.rows,
            final_ensemble: o.final_ensemble,
        });
    }

    let aggregate = io::aggregate(&seeds.iter().map(|s| s.rows.clone()).collect::<Vec<_>>());
    io::write_records(&cfg.output.join("aggregate.csv"), &aggregate)?;
    write_chart(cfg, &aggregate)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ExperimentReport {
        output: cfg.output.clone(),
        seeds,
        aggregate,
    })
}

fn write_chart(cfg: &ExperimentConfig, aggregate: &[RecordRow]) -> Result<()> {
    let label = format!("{:?}", cfg.sampler);
    if aggregate.iter().any(|r| r.kl.is_some()) {
        let series = Series {
            label,
            points: kl_points(aggregate),
        };
        io::write_file(
            &cfg.output.join("kl.svg"),
            &plot::line_chart("KL to reference", "iteration", "KL (nats)", &[series]),
        )?;
    }
    if aggregate.iter().any(|r| r.occ_t1.is_some()) {
        let occ = |name: &str, f: fn(&RecordRow) -> Option<f64>| Series {
            label: name.into(),
            points: aggregate
                .iter()
                .filter_map(|r| {
                    f(r).map(|y| Point {
                        x: r.iteration as f64,
                        y,
                        variance: None,
                    })
                })
                .collect(),
        };
        let series = [
            occ("T1", |r| r.occ_t1),
            occ("T2", |r| r.occ_t2),
            occ("outside", |r| r.occ_out),
        ];
        io::write_file(
            &cfg.output.join("occupancy.svg"),
            &plot::line_chart("Occupancy", "iteration", "particles", &series),
        )?;
    }
    Ok(())
}

fn kl_points(rows: &[RecordRow]) -> Vec<Point> {
    rows.iter()
        .filter_map(|r| {
            r.kl.map(|y| Point {
                x: r.iteration as f64,
                y,
                variance: r.kl_variance,
            })
        })
        .collect()
}

fn ensure_writable(dir: &Path) -> Result<()> {
    let bad = |e: std::io::Error| {
        HarnessError::Validation(format!(
            "output directory {} is not writable: {e}",
            dir.display()
        ))
    };
    fs::create_dir_all(dir).map_err(bad)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(bad)?;
    fs::remove_file(&probe).map_err(bad)
}

struct SeedOutcome {
    seed: u64,
    rows: Vec<RecordRow>,
    final_ensemble: Ensemble,
    final_pool: Option<Ensemble>,
    error: Option<zodps_core::Error>,
}

/// Turns sampler records into CSV rows, attaching KL or occupancy at the
/// evaluation cadence.
struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    reference: Option<&'a Ensemble>,
    domain: Option<&'a ToriDomain>,
    window: VecDeque<RunRecord>,
    rows: Vec<RecordRow>,
    error: Option<zodps_core::Error>,
}

impl<'a> Evaluator<'a> {
    fn observe(&mut self, r: &RunRecord) {
        self.window.push_back(r.clone());
        while self.window.len() > self.cfg.eval.window {
            self.window.pop_front();
        }
        let mut row = RecordRow {
            iteration: r.iteration,
            wall_time: if self.cfg.record_wall_time {
                r.wall_time
            } else {
                0.0
            },
            degenerate_events: r.degenerate_weight_events as f64,
            rgo_rejections: r.rgo_rejections.map(|v| v as f64),
            rgo_clamps: r.rgo_clamp_events.map(|v| v as f64),
            lost_chains: r.lost_chains as f64,
            ..RecordRow::default()
        };
        if r.iteration.is_multiple_of(self.cfg.eval.cadence) {
            if let Err(e) = self.evaluate(r, &mut row) {
                self.error.get_or_insert(e);
            }
        }
        self.rows.push(row);
    }

    fn evaluate(&mut self, r: &RunRecord, row: &mut RecordRow) -> zodps_core::Result<()> {
        if let Some(reference) = self.reference {
            let pooled = pool_particles(self.window.make_contiguous(), self.cfg.eval.window)?;
            row.kl = Some(knn_kl(&pooled.ensemble, reference, self.cfg.eval.k)?.value);
            row.short_window = pooled.short_window;
        }
        if let Some(domain) = self.domain {
            let occ = torus_occupancy(&r.ensemble, domain)?;
            row.occ_t1 = Some(occ.t1 as f64);
            row.occ_t2 = Some(occ.t2 as f64);
            row.occ_out = Some(occ.outside as f64);
        }
        Ok(())
    }

    fn final_pool(&mut self) -> Option<Ensemble> {
        if self.window.is_empty() {
            return None;
        }
        pool_particles(self.window.make_contiguous(), self.cfg.eval.window)
            .ok()
            .map(|p| p.ensemble)
    }
}

/// `n` draws from `N(mean·1, std²·I)` on the seed's init stream.
pub fn initial_ensemble(cfg: &ExperimentConfig, seed: u64, n: usize) -> Result<Ensemble> {
    let d = cfg.dim()?;
    let mut rng = SeedSpec::new(seed, Purpose::Init).rng();
    let mut data = vec![cfg.init.mean; n * d];
    add_gaussian(&mut rng, &mut data, cfg.init.std);
    Ok(Ensemble::from_flat(data, d)?)
}

fn run_seed(
    cfg: &ExperimentConfig,
    target: &Target,
    reference: Option<&Ensemble>,
    seed: u64,
) -> SeedOutcome {
    let domain = match target {
        Target::Tori(t) => Some(t),
        _ => None,
    };
    let mut ev = Evaluator {
        cfg,
        reference,
        domain,
        window: VecDeque::new(),
        rows: Vec::new(),
        error: None,
    };
    let oracle = target.oracle();
    let result: zodps_core::Result<Ensemble> = (|| {
        Ok(match cfg.sampler {
            SamplerKind::Zodps => {
                let init = init_or_err(cfg, seed, cfg.zodps.particles)?;
                Zodps::new(cfg.zodps_config(seed).map_err(core_err)?, oracle)
                    .run(&init, |r| ev.observe(r))?
                    .ensemble
            }
            SamplerKind::ZodpsNoInteraction => {
                let init = init_or_err(cfg, seed, cfg.zodps.particles * cfg.zodps.chains)?;
                Zodps::new(cfg.zodps_config(seed).map_err(core_err)?, oracle)
                    .run_independent(&init, |r| ev.observe(r))?
                    .ensemble
            }
            SamplerKind::Rgo => {
                let init = init_or_err(cfg, seed, cfg.rgo.chains)?;
                proximal_run(&cfg.rgo_config(seed), oracle, &init, |r| ev.observe(r))?.ensemble
            }
            SamplerKind::Inout => {
                let domain = domain.ok_or_else(|| {
                    zodps_core::Error::InvalidArgument("inout needs the tori target".into())
                })?;
                let init = init_or_err(cfg, seed, cfg.inout.chains)?;
                in_and_out_run(&cfg.inout_config(seed), domain, &init, |r| ev.observe(r))?.ensemble
            }
        })
    })();
    let final_pool = ev.final_pool();
    let (final_ensemble, error) = match result {
        Ok(e) => (e, ev.error.take()),
        Err(e) => (
            Ensemble::empty(oracle.dim()).expect("positive dimension"),
            Some(e),
        ),
    };
    SeedOutcome {
        seed,
        rows: ev.rows,
        final_ensemble,
        final_pool,
        error,
    }
}

fn init_or_err(cfg: &ExperimentConfig, seed: u64, n: usize) -> zodps_core::Result<Ensemble> {
    initial_ensemble(cfg, seed, n).map_err(|e| zodps_core::Error::InvalidArgument(e.to_string()))
}

fn core_err(e: HarnessError) -> zodps_core::Error {
    zodps_core::Error::InvalidArgument(e.to_string())
}

/// Loads `eval.reference`, or builds the reference set described by
/// `[reference]` for targets evaluated by KL.
pub fn prepare_reference(cfg: &ExperimentConfig) -> Result<Option<(Ensemble, Metadata)>> {
    if cfg.target_kind()? == TargetKind::Tori {
        return Ok(None);
    }
    match &cfg.eval.reference {
        Some(path) => io::read_ensemble(path).map(Some),
        None => generate_reference(cfg).map(Some),
    }
}

/// Builds the KL reference set for the configured target.
///
/// `rgo`: one proximal chain with the `[rgo]` step size, started from the
/// init law, run for `burn_in + collection` updates; `size` states are kept
/// at a uniform stride over the collection phase. `exact`: independent draws
/// from the target.
pub fn generate_reference(cfg: &ExperimentConfig) -> Result<(Ensemble, Metadata)> {
    let spec = &cfg.reference;
    let target = Target::build(cfg)?;
    let d = target.oracle().dim();
    if spec.size == 0 {
        return Err(HarnessError::Validation(
            "reference size must be at least 1".into(),
        ));
    }
    let ensemble = match spec.method {
        ReferenceMethod::Rgo => {
            let mut rng = SeedSpec::new(spec.seed, Purpose::Reference).rng();
            let mut start = vec![cfg.init.mean; d];
            add_gaussian(&mut rng, &mut start, cfg.init.std);
            rgo_reference(target.oracle(), &cfg.rgo_config(spec.seed), spec, &start)?
        }
        ReferenceMethod::Exact => {
            let mut rng = SeedSpec::new(spec.seed, Purpose::Reference).rng();
            let data: Vec<f64> = match &target {
                Target::Lasso(l) => (0..spec.size)
                    .flat_map(|_| l.sample_exact(&mut rng))
                    .collect(),
                Target::Gaussian(_) => {
                    let mut v = vec![0.0; spec.size * d];
                    add_gaussian(&mut rng, &mut v, 1.0);
                    v
                }
                Target::Tori(_) => {
                    return Err(HarnessError::Validation(
                        "the tori target has no exact reference sampler".into(),
                    ))
                }
            };
            Ensemble::from_flat(data, d)?
        }
    };
    let mut meta = Metadata::new();
    meta.insert("kind".into(), "reference".into());
    meta.insert("method".into(), format!("{:?}", spec.method).to_lowercase());
    meta.insert("seed".into(), spec.seed.to_string());
    meta.insert("size".into(), spec.size.to_string());
    meta.insert(
        "target".into(),
        format!("{:?}", cfg.target_kind()?).to_lowercase(),
    );
    meta.insert(
        "orthogonal_seed".into(),
        cfg.target.orthogonal_seed.to_string(),
    );
    if spec.method == ReferenceMethod::Rgo {
        meta.insert("burn_in".into(), spec.burn_in.to_string());
        meta.insert("collection".into(), spec.collection.to_string());
        meta.insert("eta".into(), cfg.rgo.eta.to_string());
        meta.insert(
            "iteration".into(),
            (spec.burn_in + spec.collection).to_string(),
        );
    }
    Ok((ensemble, meta))
}

/// Thinned states of one long proximal chain started at `start`.
pub fn rgo_reference<P: PotentialOracle + ?Sized>(
    oracle: &P,
    rgo: &RgoConfig,
    spec: &ReferenceSection,
    start: &[f64],
) -> Result<Ensemble> {
    if spec.size == 0 || spec.size > spec.collection {
        return Err(HarnessError::Validation(format!(
            "reference size {} must be between 1 and the {} collected samples",
            spec.size, spec.collection
        )));
    }
    let config = RgoConfig {
        chains: 1,
        thinning: 1,
        updates: spec.burn_in + spec.collection,
        execution: Execution::Sequential,
        ..rgo.clone()
    };
    let stride = spec.collection / spec.size;
    let mut kept = Vec::with_capacity(spec.size * start.len());
    let init = Ensemble::from_flat(start.to_vec(), start.len())?;
    let out = proximal_run(&config, oracle, &init, |r| {
        let u = r.iteration;
        if u > spec.burn_in
            && (u - spec.burn_in).is_multiple_of(stride)
            && kept.len() < spec.size * start.len()
            && !r.ensemble.is_empty()
        {
            kept.extend_from_slice(r.ensemble.row(0));
        }
    })
    .map_err(|e| HarnessError::Sampler {
        seed: rgo.seed,
        source: e,
    })?;
    if let Some(stuck) = out.stuck.first() {
        return Err(HarnessError::Sampler {
            seed: rgo.seed,
            source: zodps_core::Error::RgoStuck {
                rejections: stuck.rejections,
            },
        });
    }
    Ok(Ensemble::from_flat(kept, start.len())?)
}

fn sweep_output(
    base: &ExperimentConfig,
    runs: Vec<(String, ExperimentReport)>,
) -> Result<SweepReport> {
    let mut csv = String::from("label,iteration,kl,kl_variance\n");
    let mut series = Vec::new();
    for (label, rep) in &runs {
        for r in rep.aggregate.iter().filter(|r| r.kl.is_some()) {
            csv.push_str(&format!(
                "{label},{},{},{}\n",
                r.iteration,
                r.kl.map(|v| v.to_string()).unwrap_or_default(),
                r.kl_variance.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
        series.push(Series {
            label: label.clone(),
            points: kl_points(&rep.aggregate),
        });
    }
    io::write_file(&base.output.join("sweep.csv"), &csv)?;
    io::write_file(
        &base.output.join("sweep.svg"),
        &plot::line_chart("KL to reference", "iteration", "KL (nats)", &series),
    )?;
    Ok(SweepReport {
        output: base.output.clone(),
        runs,
    })
}

/// The single-setting experiment a sweep point expands into.
fn sweep_point(base: &ExperimentConfig, dir: &str) -> ExperimentConfig {
    let mut cfg = base.clone();
    if matches!(cfg.experiment, Experiment::SweepH | Experiment::SweepMn) {
        cfg.experiment = Experiment::Lasso;
    }
    cfg.sweep = Default::default();
    cfg.output = base.output.join(dir);
    cfg
}

fn run_sweep(
    base: &ExperimentConfig,
    points: Vec<(String, ExperimentConfig)>,
) -> Result<SweepReport> {
    for (_, cfg) in &points {
        cfg.validate()?;
    }
    ensure_writable(&base.output)?;
    let reference = prepare_reference(&points[0].1)?;
    let mut runs = Vec::new();
    for (label, cfg) in points {
        runs.push((label, run_with_reference(&cfg, reference.as_ref())?));
    }
    sweep_output(base, runs)
}

/// One lasso run per step size; the schedule is rescaled so `σ_T² = h`.
pub fn sweep_step_size(base: &ExperimentConfig, h_values: &[f64]) -> Result<SweepReport> {
    if h_values.is_empty() {
        return Err(HarnessError::Validation(
            "at least one step size is required".into(),
        ));
    }
    let points = h_values
        .iter()
        .map(|&h| {
            if !(h > 0.0) || !h.is_finite() {
                return Err(HarnessError::Validation(format!(
                    "step size must be positive, got {h}"
                )));
            }
            let label = format!("h-{h}");
            let mut cfg = sweep_point(base, &label);
            cfg.zodps.sigma_min_sq = base.zodps.sigma_min_sq * h / base.zodps.h;
            cfg.zodps.h = h;
            Ok((label, cfg))
        })
        .collect::<Result<Vec<_>>>()?;
    run_sweep(base, points)
}

/// One lasso run per `(N, M)` pair; all pairs must share `N·M`.
pub fn sweep_mn(base: &ExperimentConfig, pairs: &[[usize; 2]]) -> Result<SweepReport> {
    crate::config::check_pairs(pairs)?;
    let points = pairs
        .iter()
        .map(|&[n, m]| {
            let label = format!("n{n}-m{m}");
            let mut cfg = sweep_point(base, &label);
            cfg.zodps.particles = n;
            cfg.zodps.interim_samples = m;
            (label, cfg)
        })
        .collect();
    run_sweep(base, points)
}
