//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use zodps_core::baselines::{rgo_step, RgoConfig};
use zodps_core::diagnostics::{knn_kl, kth_neighbor_distances};
use zodps_core::numeric::add_gaussian;
use zodps_core::potentials::{Constant, Quadratic};
use zodps_core::rng::StreamRng;
use zodps_core::zodps::{estimate_score, posterior_params};
use zodps_core::{Ensemble, Execution, PotentialOracle, Purpose, SeedSpec};
use zodps_harness::config::{Experiment, ReferenceMethod, SamplerKind, TargetKind};
use zodps_harness::experiment::{generate_reference, run_experiment, sweep_mn, sweep_step_size};
use zodps_harness::{io, preset, ExperimentConfig, ExperimentReport};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn log_normal(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq / var - 0.5 * x.len() as f64 * (2.0 * std::f64::consts::PI * var).ln()
}

fn normals(rng: &mut StreamRng, n: usize, std: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    add_gaussian(rng, &mut v, std);
    v
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (
        m,
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn posterior_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = SeedSpec::new(1, Purpose::Custom(900)).rng();
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let d = 1 + i % 3;
        let g = normals(&mut rng, 2, 1.0);
        let h = (0.7 * g[0]).exp();
        let sigma_sq = h / (1.0 + (-g[1]).exp());
        let x = normals(&mut rng, d, 2.0);
        let y = normals(&mut rng, d, 2.0);
        let z = normals(&mut rng, d, 2.0);
        let ys = Ensemble::from_flat(y.clone(), d).unwrap();
        let post = posterior_params(&z, &ys, &ys, h, sigma_sq).unwrap();
        let lhs = log_normal(&z, &x, sigma_sq) + log_normal(&x, &y, h);
        let rhs = log_normal(&z, &y, h + sigma_sq)
            + log_normal(&x, post.means.row(0), post.shared_variance);
        worst = worst.max((lhs - rhs).abs());
    }
    let mut worst_w = 0.0f64;
    for _ in 0..1000 {
        let d = 2;
        let x = Ensemble::from_flat(normals(&mut rng, 3 * d, 1.5), d).unwrap();
        let y = Ensemble::from_flat(normals(&mut rng, 3 * d, 1.5), d).unwrap();
        let z = normals(&mut rng, d, 1.5);
        let (h, sigma_sq) = (0.3, 0.1);
        let q = |p: &[f64]| x.rows().map(|xi| log_normal(p, xi, h).exp()).sum::<f64>() / 3.0;
        let raw: Vec<f64> = y
            .rows()
            .map(|yj| log_normal(&z, yj, h + sigma_sq).exp() / q(yj))
            .collect();
        let total: f64 = raw.iter().sum();
        let post = posterior_params(&z, &y, &x, h, sigma_sq).unwrap();
        for (w, r) in post.log_weights.iter().zip(&raw) {
            worst_w = worst_w.max((w.exp() - r / total).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-10 && worst_w < 1e-10 && secs < 1.0,
        format!("max identity gap {worst:.2e}, max weight gap {worst_w:.2e}, {secs:.2} s"),
    )
}

fn analytic_score() -> Outcome {
    // Exact score at z = 1, σ² = 0.5 is −z/(1/2 + σ²) = −1.
    let start = Instant::now();
    let y = Ensemble::from_flat(vec![0.0], 1).unwrap();
    let oracle = Quadratic::new(1);
    let stats: Vec<(f64, f64)> = [100usize, 1000]
        .into_iter()
        .map(|m| {
            let draws: Vec<f64> = (0..10_000u64)
                .map(|c| {
                    let s = SeedSpec::at(23, Purpose::Interim, m as u64, c, 0);
                    estimate_score(&[1.0], &y, &y, 1.0, 0.5, m, &oracle, &s)
                        .unwrap()
                        .drift[0]
                })
                .collect();
            let (mean, var) = moments(&draws);
            (mean, var.sqrt())
        })
        .collect();
    let ratio = stats[0].1 / stats[1].1;
    let mean = stats[1].0;
    let secs = start.elapsed().as_secs_f64();
    check(
        (mean + 1.0).abs() < 0.03 && (ratio / 10f64.sqrt() - 1.0).abs() < 0.2 && secs < 30.0,
        format!("mean {mean:.4} at M=1000, error ratio {ratio:.3} (sqrt 10 = 3.162), {secs:.1} s"),
    )
}

fn gaussian_fixed_point(dir: &Path) -> Outcome {
    let mut cfg = ExperimentConfig::new(
        Experiment::Custom,
        SamplerKind::Zodps,
        (0..5).collect(),
        dir,
    );
    cfg.target.kind = Some(TargetKind::Gaussian);
    cfg.target.dim = 1;
    cfg.init.mean = 5.0;
    cfg.init.std = 0.0;
    cfg.zodps.h = 1.0;
    cfg.zodps.steps = 16;
    cfg.zodps.iterations = 20;
    cfg.zodps.particles = 100;
    cfg.zodps.interim_samples = 1000;
    cfg.eval.cadence = 20;
    cfg.reference.method = ReferenceMethod::Exact;
    cfg.reference.size = 1000;
    let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let finals: Vec<f64> = rep
        .seeds
        .iter()
        .flat_map(|s| s.final_ensemble.as_flat().to_vec())
        .collect();
    let (m, v) = moments(&finals);
    check(
        m.abs() < 0.15 && (v - 1.0).abs() < 0.2,
        format!("pooled final mean {m:.4}, variance {v:.4} over 5 seeds"),
    )
}

fn rgo_moments<P: PotentialOracle>(
    oracle: &P,
    y: &[f64],
    eta: f64,
    mean: &[f64],
    var: f64,
    tag: u32,
) -> (bool, String) {
    let cfg = RgoConfig {
        eta,
        ..RgoConfig::default()
    };
    let n = 10_000;
    let d = y.len();
    let mut clamps = 0;
    let mut samples = Vec::with_capacity(n * d);
    for i in 0..n {
        let s = rgo_step(
            y,
            eta,
            oracle,
            &cfg,
            &SeedSpec::at(31, Purpose::Custom(tag), i as u64, 0, 0),
        )
        .unwrap();
        clamps += s.clamp_events;
        samples.extend(s.x);
    }
    let ens = Ensemble::from_flat(samples, d).unwrap();
    let sd = var.sqrt();
    let mean_ok = ens
        .mean()
        .iter()
        .zip(mean)
        .all(|(a, b)| (a - b).abs() < 0.05 * sd);
    let var_ok = ens.variance().iter().all(|v| (v / var - 1.0).abs() < 0.05);
    (
        mean_ok && var_ok && clamps == 0,
        format!(
            "mean {:?} var {:?} clamps {clamps}",
            round(&ens.mean()),
            round(&ens.variance())
        ),
    )
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn rgo_exactness() -> Outcome {
    let y = [0.7, -1.3];
    let (a, da) = rgo_moments(&Constant::flat(2), &y, 0.2, &y, 0.2, 901);
    let (b, db) = rgo_moments(&Quadratic::new(2), &[0.0, 0.0], 1.0, &[0.0, 0.0], 0.5, 902);
    let (c, dc) = rgo_moments(
        &Quadratic::new(2),
        &[1.0, -2.0],
        1.0,
        &[0.5, -1.0],
        0.5,
        903,
    );
    check(
        a && b && c,
        format!("flat: {da}; quadratic y=0: {db}; quadratic y=(1,-2): {dc}"),
    )
}

fn gaussian_ens(n: usize, d: usize, mean: f64, std: f64, seed: u64) -> Ensemble {
    let mut rng = SeedSpec::new(seed, Purpose::Custom(910)).rng();
    let mut data = vec![mean; n * d];
    add_gaussian(&mut rng, &mut data, std);
    Ensemble::from_flat(data, d).unwrap()
}

fn kl_calibration() -> Outcome {
    let same = (0..10)
        .map(|s| {
            knn_kl(
                &gaussian_ens(2000, 3, 0.0, 1.0, 2 * s),
                &gaussian_ens(2000, 3, 0.0, 1.0, 2 * s + 1),
                4,
            )
            .unwrap()
            .value
        })
        .sum::<f64>()
        / 10.0;
    let shift = knn_kl(
        &gaussian_ens(10_000, 1, 0.0, 1.0, 50),
        &gaussian_ens(10_000, 1, 1.0, 1.0, 51),
        4,
    )
    .unwrap()
    .value;
    let mut exact = true;
    for (n, m, d, k) in [(12, 9, 2, 1), (20, 15, 3, 4), (7, 30, 1, 3)] {
        let p = gaussian_ens(n, d, 0.0, 1.0, 60 + n as u64);
        let q = gaussian_ens(m, d, 0.5, 1.0, 70 + m as u64);
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        for exec in [Execution::Sequential, Execution::Parallel] {
            let got = kth_neighbor_distances(&p, &q, k, exec);
            for (i, &(rho, nu)) in got.iter().enumerate() {
                let mut within: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist(p.row(i), p.row(j)))
                    .collect();
                let mut cross: Vec<f64> = q.rows().map(|r| dist(p.row(i), r)).collect();
                within.sort_by(f64::total_cmp);
                cross.sort_by(f64::total_cmp);
                exact &= rho == within[k - 1] && nu == cross[k - 1];
            }
        }
    }
    check(
        same.abs() < 0.05 && (shift - 0.5).abs() < 0.07 && exact,
        format!("identical {same:.4}, shifted {shift:.4} (closed form 0.5), brute-force distances match: {exact}"),
    )
}

fn kl_at(rep: &ExperimentReport, iteration: usize) -> Result<f64, String> {
    rep.at(iteration)
        .and_then(|r| r.kl)
        .ok_or_else(|| format!("no KL at iteration {iteration} in {}", rep.output.display()))
}

fn with_reference(name: &str, reference: &Path, dir: &Path) -> ExperimentConfig {
    let mut cfg = preset(name, false).unwrap();
    cfg.eval.reference = Some(reference.to_path_buf());
    cfg.output = dir.join(name);
    cfg
}

fn lasso_ordering(reference: &Path, dir: &Path) -> Outcome {
    let run = |name: &str| {
        run_experiment(&with_reference(name, reference, dir)).map_err(|e| e.to_string())
    };
    let ours = kl_at(&run("lasso-zodps")?, 300)?;
    let alone = kl_at(&run("lasso-no-interaction")?, 300)?;
    let rgo = kl_at(&run("lasso-rgo")?, 300)?;
    check(
        ours < rgo && ours < alone,
        format!("KL at 300: zodps {ours:.4}, rgo {rgo:.4}, no interaction {alone:.4}"),
    )
}

fn tori_occupancy(dir: &Path) -> Outcome {
    let t2_at_200 = |name: &str| -> Result<Vec<f64>, String> {
        let mut cfg = preset(name, false).unwrap();
        cfg.output = dir.join(name);
        let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
        Ok(rep
            .seeds
            .iter()
            .map(|s| {
                s.rows
                    .iter()
                    .find(|r| r.iteration == 200)
                    .and_then(|r| r.occ_t2)
                    .unwrap_or(0.0)
            })
            .collect())
    };
    let inout = t2_at_200("tori-inout")?;
    let ours = t2_at_200("tori-zodps")?;
    let reached = ours.iter().filter(|&&c| c > 0.0).count();
    check(
        inout.iter().all(|&c| c == 0.0) && reached >= 4,
        format!("T2 occupancy at 200: in-and-out {inout:?}, zodps {ours:?}"),
    )
}

fn step_size_trend(reference: &Path, dir: &Path) -> Outcome {
    let cfg = with_reference("sweep-h", reference, dir);
    let sweep = sweep_step_size(&cfg, &cfg.sweep.h_values).map_err(|e| e.to_string())?;
    let kls = sweep
        .runs
        .iter()
        .map(|(_, r)| kl_at(r, 100))
        .collect::<Result<Vec<_>, _>>()?;
    check(
        kls.windows(2).all(|w| w[1] <= w[0]),
        format!("KL at 100 for h = 1/20, 1/10, 1/5: {:?}", round(&kls)),
    )
}

fn mn_robustness(reference: &Path, dir: &Path) -> Outcome {
    let cfg = with_reference("sweep-mn", reference, dir);
    let sweep = sweep_mn(&cfg, &cfg.sweep.pairs).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (i, (la, a)) in sweep.runs.iter().enumerate() {
        for (lb, b) in &sweep.runs[i + 1..] {
            for ra in a
                .aggregate
                .iter()
                .filter(|r| r.iteration >= 50 && r.kl.is_some())
            {
                let rb = b
                    .at(ra.iteration)
                    .ok_or_else(|| format!("{lb} lacks iteration {}", ra.iteration))?;
                let pooled =
                    ((ra.kl_variance.unwrap_or(0.0) + rb.kl_variance.unwrap_or(0.0)) / 2.0).sqrt();
                let gap = (ra.kl.unwrap() - rb.kl.unwrap()).abs();
                if pooled == 0.0 {
                    return Err(format!(
                        "{la} vs {lb}: zero seed spread at {}",
                        ra.iteration
                    ));
                }
                worst = worst.max(gap / pooled);
            }
        }
    }
    check(
        worst < 2.0,
        format!("largest gap {worst:.3} pooled seed standard deviations"),
    )
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push((
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn determinism(dir: &Path) -> Outcome {
    let mut compared = 0;
    for name in [
        "lasso-zodps",
        "lasso-no-interaction",
        "lasso-rgo",
        "tori-zodps",
        "tori-inout",
    ] {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let mut cfg = preset(name, false).unwrap();
            cfg.seeds = vec![3, 4];
            cfg.output = dir.join(name).join(run);
            cfg.parallel_seeds = run == "b";
            cfg.zodps.iterations = 6;
            cfg.zodps.interim_samples = 60;
            cfg.zodps.particles = if name == "lasso-no-interaction" {
                1
            } else {
                40
            };
            cfg.zodps.chains = 20;
            cfg.rgo.updates = 60;
            cfg.rgo.chains = 20;
            cfg.inout.iterations = 6;
            cfg.inout.chains = 50;
            cfg.eval.cadence = 2;
            cfg.eval.window = 2;
            cfg.reference.burn_in = 100;
            cfg.reference.collection = 400;
            cfg.reference.size = 200;
            run_experiment(&cfg).map_err(|e| format!("{name}: {e}"))?;
            outputs.push(csv_files(&cfg.output));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            return Err(format!("{name}: CSV outputs differ between reruns"));
        }
        compared += outputs[0].len();
    }
    Ok(format!(
        "{compared} CSV files byte-identical across reruns (sequential vs concurrent seeds)"
    ))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let root = scratch.path();
    let reference = root.join("lasso-reference.csv");
    let prepare = || -> Result<(), String> {
        let cfg = preset("lasso-zodps", true).unwrap();
        let (ens, meta) = generate_reference(&cfg).map_err(|e| e.to_string())?;
        io::write_ensemble(&reference, &ens, &meta).map_err(|e| e.to_string())
    };
    let start = Instant::now();
    let prepared = prepare();
    println!(
        "reference: {} in {:.1} s",
        if prepared.is_ok() {
            "generated"
        } else {
            "FAILED"
        },
        start.elapsed().as_secs_f64()
    );

    let criteria: Vec<Criterion> = vec![
        ("posterior algebra", Box::new(posterior_algebra)),
        ("analytic score", Box::new(analytic_score)),
        (
            "gaussian fixed point",
            Box::new(|| gaussian_fixed_point(&root.join("fixed-point"))),
        ),
        ("rgo exactness", Box::new(rgo_exactness)),
        ("kl calibration", Box::new(kl_calibration)),
        (
            "lasso ordering",
            Box::new(|| lasso_ordering(&reference, &root.join("lasso"))),
        ),
        (
            "tori occupancy",
            Box::new(|| tori_occupancy(&root.join("tori"))),
        ),
        (
            "step-size trend",
            Box::new(|| step_size_trend(&reference, &root.join("step"))),
        ),
        (
            "m x n robustness",
            Box::new(|| mn_robustness(&reference, &root.join("mn"))),
        ),
        (
            "determinism",
            Box::new(|| determinism(&root.join("determinism"))),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = if prepared.is_err() && [6, 8, 9].contains(&(i + 1)) {
            Err("reference generation failed".to_string())
        } else {
            run()
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {} [{name}]: PASS ({detail}) in {secs:.1} s",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {} [{name}]: FAIL ({detail}) in {secs:.1} s",
                    i + 1
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
