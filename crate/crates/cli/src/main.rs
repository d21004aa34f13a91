//! `ctxtrust`: validate scenarios, run them, and extract trust trajectories.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for runtime failures.

mod report;
mod trace;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use ctxtrust::sim::{self, MetricsLog, ScenarioConfig};
use ctxtrust::TrustError;

use report::{Override, RunReport};

#[derive(Parser)]
#[command(name = "ctxtrust", version, about = "Context-aware trust simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a scenario; writes metrics.csv, metrics.jsonl and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Parameter override, applied in order. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
        set: Vec<Override>,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the tick-sorted trust of one entity in another from a metrics CSV.
    Trace {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        observer: String,
        #[arg(long)]
        subject: String,
    },
}

fn parse_override(s: &str) -> Result<Override, String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok(Override {
        key: key.trim().to_string(),
        value: value.trim().to_string(),
    })
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<TrustError> for Failure {
    fn from(e: TrustError) -> Self {
        match e {
            TrustError::Validation(_) | TrustError::Config(_) => Failure::Invalid(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Run {
            config,
            out,
            set,
            seed,
        } => run(&config, &out, set, seed),
        Command::Trace {
            metrics,
            observer,
            subject,
        } => trace(&metrics, &observer, &subject),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            print_error(&e);
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            print_error(&e);
            ExitCode::from(2)
        }
    }
}

fn print_error(e: &anyhow::Error) {
    match e.downcast_ref::<TrustError>() {
        Some(TrustError::Validation(list)) => {
            eprintln!("error: {} violation(s)", list.len());
            for v in list {
                eprintln!("  - {v}");
            }
        }
        _ => eprintln!("error: {e:#}"),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load(path)?;
    config.validate()?;
    println!(
        "ok: scenario `{}` with {} entities, {} episodes over {} ticks",
        config.name,
        config.entities.len(),
        config.episodes.len(),
        config.ticks
    );
    Ok(())
}

fn run(path: &Path, out: &Path, set: Vec<Override>, seed: Option<u64>) -> Result<(), Failure> {
    let mut config = load(path)?;
    let mut overrides = set;
    if let Some(seed) = seed {
        overrides.push(Override {
            key: "seed".into(),
            value: seed.to_string(),
        });
    }
    for o in &overrides {
        config.apply_override(&o.key, &o.value)?;
    }
    config.validate()?;
    let log = sim::run(&config)?;

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_file(&out.join("metrics.csv"), |w| {
        log.write_csv(w).map_err(Into::into)
    })?;
    write_file(&out.join("metrics.jsonl"), |w| {
        log.write_jsonl(w).map_err(Into::into)
    })?;
    let report = RunReport::new(&config, overrides, &log);
    write_file(&out.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")?;
        Ok(())
    })?;

    println!("scenario `{}`: {} ticks", report.scenario, report.ticks);
    match report.success_rate {
        Some(rate) => println!(
            "episodes: {} succeeded of {} ({:.1}%)",
            report.succeeded,
            report.episodes,
            rate * 100.0
        ),
        None => println!("episodes: none scheduled"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
) -> Result<(), Failure> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush().map_err(Into::into))
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn trace(path: &Path, observer: &str, subject: &str) -> Result<(), Failure> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let log = MetricsLog::read_csv(file)
        .map_err(|e| anyhow::Error::new(e).context(format!("in {}", path.display())))?;
    let rows = trace::trajectory(&log, observer, subject)
        .map_err(|e| Failure::Invalid(anyhow::anyhow!("{e}")))?;
    trace::write_table(&rows, io::stdout().lock()).context("cannot write table")?;
    Ok(())
}
