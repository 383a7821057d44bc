//! Command-line front end. Exit status: 0 on success, 1 for invalid input,
//! 2 for failures during a run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use zodps_core::diagnostics::knn_kl;

use crate::config::{preset, Experiment, ExperimentConfig, PRESETS};
use crate::error::{HarnessError, Result};
use crate::experiment::{generate_reference, run_config, sweep_mn, sweep_step_size, Report};
use crate::io;

#[derive(Debug, Parser)]
#[command(
    name = "zodps",
    version,
    about = "Run zeroth-order diffusive proximal sampling experiments"
)]
pub struct Cli {
    /// Seed to run; repeat for several. Overrides the configured seeds.
    #[arg(long = "seed", global = true)]
    pub seeds: Vec<u64>,
    /// Output directory. Overrides the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Use the full interim sample counts and reference length in presets.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Worker threads (ZODPS_THREADS takes precedence).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// List the built-in presets and exit.
    #[arg(long)]
    pub print_presets: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment from --config or a preset.
    Run {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Compare step sizes on the lasso target.
    SweepH {
        /// Step size; repeat for several.
        #[arg(long = "h")]
        h: Vec<f64>,
    },
    /// Compare (N, M) splits with a fixed product on the lasso target.
    SweepMn {
        /// Pairs written `N:M`; repeat for several.
        #[arg(long = "pairs", value_parser = parse_pair)]
        pairs: Vec<[usize; 2]>,
    },
    /// Generate the KL reference set described by the configuration.
    MakeReference {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Estimate KL(samples ‖ reference) from two ensemble files.
    EstimateKl {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
    /// List the built-in presets.
    PrintPresets,
}

fn parse_pair(s: &str) -> std::result::Result<[usize; 2], String> {
    let (n, m) = s
        .split_once(':')
        .ok_or_else(|| format!("expected N:M, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok([parse(n)?, parse(m)?])
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(cli: &Cli) -> Result<Option<usize>> {
    match std::env::var("ZODPS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                HarnessError::Validation(format!(
                    "ZODPS_THREADS must be a positive integer, got `{v}`"
                ))
            }),
        Err(_) => match cli.threads {
            Some(0) => Err(HarnessError::Validation(
                "--threads must be at least 1".into(),
            )),
            t => Ok(t),
        },
    }
}

fn execute(cli: &Cli) -> Result<()> {
    if cli.print_presets || matches!(cli.command, Some(Command::PrintPresets)) {
        print_presets(cli.paper_scale);
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(HarnessError::Validation(
            "no command given (try --help)".into(),
        ));
    };
    if let Some(n) = thread_count(cli)? {
        if !zodps_core::par::set_threads(n) {
            eprintln!(
                "warning: thread count {n} ignored (sequential build or pool already started)"
            );
        }
    }
    match command {
        Command::Run { preset } => {
            let cfg = load(cli, preset.as_deref(), "lasso-zodps")?;
            report(run_config(&cfg)?);
        }
        Command::SweepH { h } => {
            let mut cfg = load(cli, None, "sweep-h")?;
            if !h.is_empty() {
                cfg.sweep.h_values = h.clone();
            }
            cfg.experiment = Experiment::SweepH;
            report(sweep_step_size(&cfg, &cfg.sweep.h_values).map(Report::Sweep)?);
        }
        Command::SweepMn { pairs } => {
            let mut cfg = load(cli, None, "sweep-mn")?;
            if !pairs.is_empty() {
                cfg.sweep.pairs = pairs.clone();
            }
            cfg.experiment = Experiment::SweepMn;
            report(sweep_mn(&cfg, &cfg.sweep.pairs).map(Report::Sweep)?);
        }
        Command::MakeReference { preset } => {
            let cfg = load(cli, preset.as_deref(), "lasso-zodps")?;
            cfg.validate()?;
            let (ens, mut meta) = generate_reference(&cfg)?;
            meta.insert("config_hash".into(), cfg.hash());
            let path = cfg.output.join("reference.csv");
            io::write_ensemble(&path, &ens, &meta)?;
            println!("wrote {} samples to {}", ens.len(), path.display());
        }
        Command::EstimateKl {
            samples,
            reference,
            k,
        } => {
            let (p, _) = io::read_ensemble(samples)?;
            let (q, _) = io::read_ensemble(reference)?;
            let est = knn_kl(&p, &q, *k)?;
            println!("{}", est.value);
        }
        Command::PrintPresets => unreachable!("handled above"),
    }
    Ok(())
}

fn load(cli: &Cli, preset_name: Option<&str>, default: &str) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, preset_name) {
        (Some(_), Some(_)) => {
            return Err(HarnessError::Validation(
                "use either --config or --preset, not both".into(),
            ))
        }
        (Some(path), None) => read_config(path)?,
        (None, name) => preset(name.unwrap_or(default), cli.paper_scale)?,
    };
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn print_presets(paper_scale: bool) {
    for name in PRESETS {
        let cfg = preset(name, paper_scale).expect("built-in presets exist");
        println!("# preset: {name}\n{}", cfg.to_toml());
    }
}

fn report(r: Report) {
    let print = |rep: &crate::ExperimentReport, label: &str| {
        if let Some(last) = rep.aggregate.last() {
            let kl = last.kl.map_or("-".into(), |v| format!("{v:.4}"));
            println!("{label}iteration {}: kl {kl}", last.iteration);
        }
        println!("{label}outputs in {}", rep.output.display());
    };
    match r {
        Report::Single(rep) => print(&rep, ""),
        Report::Sweep(s) => {
            for (label, rep) in &s.runs {
                print(rep, &format!("[{label}] "));
            }
            println!("sweep summary in {}", s.output.display());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("100:1000"), Ok([100, 1000]));
        assert!(parse_pair("100x1000").is_err());
        assert!(parse_pair("a:1").is_err());
    }

    #[test]
    fn parse_errors_exit_with_one() {
        assert_eq!(cli_main(["zodps", "--bogus"]), 1);
        assert_eq!(
            cli_main(["zodps", "run", "--preset", "nope", "--out", "/tmp/x"]),
            1
        );
        assert_eq!(
            cli_main(["zodps", "sweep-mn", "--pairs", "1:2", "--pairs", "2:2"]),
            1
        );
        assert_eq!(cli_main(["zodps", "--help"]), 0);
    }
}
