use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use semiclassical::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind, RunManifest};
use semiclassical::Error;

#[derive(Parser)]
#[command(name = "app", version, about = "Semiclassical limit experiments")]
struct Cli {
    /// Log at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Experiment name, e.g. harmonic_exact or weak-convergence.
        experiment: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment once per seed or per ε ladder.
    Sweep {
        experiment: String,
        #[command(flatten)]
        common: Common,
        /// Seeds, one run each.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// ε ladders separated by ';', values by ','.
        #[arg(long)]
        ladders: Option<String>,
    },
    /// Sup-norm probe of Husimi functions (conjecture_probe).
    Probe {
        #[command(flatten)]
        common: Common,
    },
    /// Print the default configuration of an experiment as JSON.
    Defaults { experiment: String },
    /// List experiment names.
    List,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; missing fields take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the ε ladder.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write binary phase-space snapshots.
    #[arg(long)]
    dump_grids: bool,
}

enum Failure {
    Assertions,
    Runtime(Error),
    Setup(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) | Error::Convergence(_) => Failure::Runtime(e),
            _ => Failure::Setup(e),
        }
    }
}

fn load_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let serde_json::Value::Object(mut fields) = value else {
                return Err(Error::Format(format!("{} is not a JSON object", path.display())));
            };
            match fields.get("experiment").and_then(|v| v.as_str()) {
                Some(name) if name.parse::<ExperimentKind>()? != kind => {
                    return Err(Error::Config(format!(
                        "{} configures '{name}', not '{}'",
                        path.display(),
                        kind.name()
                    )))
                }
                _ => {}
            }
            fields.insert("experiment".into(), serde_json::Value::String(kind.name().into()));
            ExperimentConfig::defaults(kind).overlay(fields)?
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(eps) = &common.eps {
        cfg.eps_ladder = eps.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.display().to_string());
    }
    cfg.dump_grids |= common.dump_grids;
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new("results").join(cfg.experiment.name()))
}

fn report(m: &RunManifest, dir: &Path) {
    for a in &m.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    for w in &m.warnings {
        println!("warning: {w}");
    }
    println!(
        "{} finished in {:.1} s, config {}, outputs in {}",
        m.experiment.name(),
        m.wall_clock_seconds,
        &m.config_hash[..12],
        dir.display()
    );
}

fn execute(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let m = run_experiment(cfg)?;
    let dir = output_dir(cfg);
    write_outputs(&m, &dir)?;
    report(&m, &dir);
    if m.passed() {
        Ok(())
    } else {
        Err(Failure::Assertions)
    }
}

fn parse_ladders(text: &str) -> Result<Vec<Vec<f64>>, Error> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|ladder| {
            ladder
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad ε value '{v}': {e}")))
                })
                .collect()
        })
        .collect()
}

fn sweep(base: ExperimentConfig, seeds: &[u64], ladders: Option<&str>) -> Result<(), Failure> {
    let root = output_dir(&base);
    let mut points = Vec::new();
    let ladders = match ladders {
        Some(text) => parse_ladders(text)?,
        None => vec![base.eps_ladder.clone()],
    };
    let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds.to_vec() };
    for (li, ladder) in ladders.iter().enumerate() {
        for &seed in &seeds {
            let mut cfg = base.clone();
            cfg.eps_ladder = ladder.clone();
            cfg.seed = seed;
            cfg.output_dir = Some(root.join(format!("ladder{li}_seed{seed}")).display().to_string());
            cfg.validate()?;
            points.push(cfg);
        }
    }
    let outcomes: Vec<Result<(), Failure>> = points.par_iter().map(execute).collect();
    // the most severe outcome decides the exit status
    let mut worst = Ok(());
    for o in outcomes {
        match (&worst, o) {
            (_, Ok(())) => {}
            (Err(Failure::Setup(_)), _) => {}
            (_, Err(e @ Failure::Setup(_))) => worst = Err(e),
            (Err(Failure::Runtime(_)), _) => {}
            (_, Err(e)) => worst = Err(e),
        }
    }
    worst
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { experiment, common } => {
            let cfg = load_config(experiment.parse()?, &common)?;
            execute(&cfg)
        }
        Command::Sweep {
            experiment,
            common,
            seeds,
            ladders,
        } => {
            let cfg = load_config(experiment.parse()?, &common)?;
            sweep(cfg, &seeds, ladders.as_deref())
        }
        Command::Probe { common } => execute(&load_config(ExperimentKind::ConjectureProbe, &common)?),
        Command::Defaults { experiment } => {
            let cfg = ExperimentConfig::defaults(experiment.parse()?);
            println!("{}", serde_json::to_string_pretty(&cfg).map_err(Error::from)?);
            Ok(())
        }
        Command::List => {
            for k in ExperimentKind::ALL {
                println!("{}", k.name());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertions) => ExitCode::from(1),
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Setup(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
