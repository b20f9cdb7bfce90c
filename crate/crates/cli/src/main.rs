use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use assess_core::bayes::MIN_MC_DRAWS;
use assess_core::io::{
    load_observations, parse_config_with_overrides, run_analysis, select_dataset, write_atomic,
    write_outputs, AnalysisConfig,
};
use assess_core::pathology::{optional_stopping_fpr, prior_sensitivity_sweep, StoppingComparison};
use assess_core::Error;

#[derive(Parser)]
#[command(name = "assess", about = "Compare the accuracy of two systems with frequentist and Bayesian methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the analysis config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `[mcmc] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config value, e.g. `--set analysis.alpha=0.01`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and write the report, plot data and traces.
    Analyze(ConfigArgs),
    /// Run one of the methodology simulations.
    Simulate {
        #[command(subcommand)]
        which: Simulation,
    },
    /// Conjugate-only analysis (no MCMC).
    Oracle(ConfigArgs),
    /// Print the version.
    Version,
}

#[derive(Subcommand)]
enum Simulation {
    /// Exact p-values of one data set under fixed-n and fixed-successes stopping.
    Stopping(ConfigArgs),
    /// False-positive rate of a z-test repeated as data accumulate.
    OptionalStopping(ConfigArgs),
    /// Bayes factor and HDI under each prior of `[model] sweep_priors`.
    PriorSweep(ConfigArgs),
}

const EXIT_INPUT: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;

fn load(args: &ConfigArgs, extra: &[&str]) -> Result<(AnalysisConfig, PathBuf), Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Config {
        section: None,
        key: None,
        line: None,
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("mcmc.seed={seed}"));
    }
    overrides.extend(extra.iter().map(|s| s.to_string()));
    let config = parse_config_with_overrides(&text, &overrides)?;
    let base = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok((config, base))
}

fn require<'a, T>(value: &'a Option<T>, section: &str) -> Result<&'a T, Error> {
    value.as_ref().ok_or_else(|| Error::Config {
        section: Some(section.into()),
        key: None,
        line: None,
        message: "section is required for this command".into(),
    })
}

/// Writes to `[output] report` when set, stdout otherwise.
fn emit_json(json: &str, config: &AnalysisConfig, base: &Path) -> Result<(), Error> {
    match &config.output.report {
        Some(p) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            write_atomic(&path, json.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn analyze(args: &ConfigArgs, conjugate_only: bool) -> Result<u8, Error> {
    let extra: &[&str] = if conjugate_only { &["analysis.use_mcmc=false"] } else { &[] };
    let (config, base) = load(args, extra)?;
    let outcome = run_analysis(&config, &base)?;
    match write_outputs(&outcome, &config, &base)? {
        Some(path) => eprintln!("wrote {}", path.display()),
        None => print!("{}", outcome.report.to_json()?),
    }
    for line in &outcome.report.phrasing {
        eprintln!("  {line}");
    }
    if outcome.report.converged() {
        Ok(0)
    } else {
        eprintln!("error: MCMC did not converge");
        Ok(EXIT_NONCONVERGENCE)
    }
}

fn simulate(which: &Simulation) -> Result<u8, Error> {
    match which {
        Simulation::Stopping(args) => {
            let (config, base) = load(args, &[])?;
            let s = require(&config.stopping, "stopping")?;
            let cmp = StoppingComparison::new(s.successes, s.trials, s.theta0)?;
            emit_json(&to_json(&cmp)?, &config, &base)?;
        }
        Simulation::OptionalStopping(args) => {
            let (config, base) = load(args, &[])?;
            let o = require(&config.optional_stopping, "optional_stopping")?;
            let report = optional_stopping_fpr(
                (o.theta, o.theta),
                &o.looks,
                o.alpha,
                o.trials,
                o.direction,
                config.seed()?,
            )?;
            emit_json(&to_json(&report)?, &config, &base)?;
        }
        Simulation::PriorSweep(args) => {
            let (config, base) = load(args, &[])?;
            let set = load_observations(&config, &base)?;
            let dataset = select_dataset(&set, config.data()?)?;
            let a = &config.analysis;
            let rows = prior_sensitivity_sweep(
                &dataset.counts()?,
                &config.model.sweep_priors,
                a.rope_radius,
                a.hdi_mass,
                a.n_mc.max(MIN_MC_DRAWS),
                config.seed()?,
            )?;
            emit_json(&to_json(&rows)?, &config, &base)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => analyze(args, false),
        Command::Oracle(args) => analyze(args, true),
        Command::Simulate { which } => simulate(which),
        Command::Version => {
            println!("assess {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
