use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gemhp::config::Config;
use gemhp::events::EventLog;
use gemhp::experiment::{export_report, run_mc};
use gemhp::graph::graph_from_fit;
use gemhp::po::{Estimator, Method};
use gemhp::simulate::simulate_seeded;
use gemhp::Error;

#[derive(Parser)]
#[command(name = "gemhp", version, about = "Simulate and sparsely estimate marked Hawkes processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one path from the configured model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured horizon.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Fit one method to an event file.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        /// Observation horizon of the event file; defaults to the configured one.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Run the Monte Carlo experiment and write its CSV report.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Export the Hawkes graph of a fit.
    Graph {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn horizon_of(config: &Config, flag: Option<f64>) -> Result<f64, Error> {
    flag.or_else(|| config.horizon())
        .ok_or_else(|| Error::Config("no horizon: set simulation.horizon or pass --horizon".into()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, seed, out, horizon } => {
            let cfg = Config::load(&config)?;
            let t = horizon_of(&cfg, horizon)?;
            let log = simulate_seeded(&cfg.params, &cfg.marks, t, seed, &cfg.simulation.options())?;
            log.save(&out)?;
            eprintln!("{} events on [0, {t}] written to {}", log.len(), out.display());
        }
        Command::Estimate { config, events, method, out, horizon } => {
            let cfg = Config::load(&config)?;
            let t = horizon_of(&cfg, horizon)?;
            let log = EventLog::load(&events, t, cfg.params.dim())?;
            if log.mark_dim() != cfg.params.mark_dim() {
                return Err(Error::MarkDimension { expected: cfg.params.mark_dim(), got: log.mark_dim() });
            }
            let fit = Estimator::from_config(&cfg)?.fit(&log, method)?;
            write_json(&out, &fit.to_json(&cfg.marks)?)?;
            eprintln!("{method} fit with {} exact zeros written to {}", fit.zero_set.len(), out.display());
        }
        Command::Mc { config, out, parallel } => {
            let cfg = Config::load(&config)?;
            let dir = out
                .or_else(|| cfg.experiment.output.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set experiment.output".into()))?;
            let threads = parallel.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = run_mc(&cfg, threads)?;
            export_report(&report, &dir)?;
            for cell in &report.cells {
                if !cell.failures.is_empty() {
                    eprintln!("{} T={}: {} of {} trials failed", cell.method, cell.horizon, cell.failures.len(), cell.trials);
                }
            }
            eprintln!("report for {} cells written to {}", report.cells.len(), dir.display());
        }
        Command::Graph { fit, out } => {
            let text = fs::read_to_string(&fit)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            write_json(&out, &graph_from_fit(&value)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
