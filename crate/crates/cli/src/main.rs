//! `nhsw`: run, compare and sweep non-hydrostatic shallow water simulations.

mod commands;
mod config;
mod io;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::{CmdResult, Failure};
use config::{RunArgs, RunConfig};
use nhsw::CriterionKind;

#[derive(Debug, Parser)]
#[command(name = "nhsw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write gauges, snapshots and a report.
    Run(RunArgs),
    /// Compare the outputs of two runs; the second is the reference.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the comparison as JSON here instead of stdout only.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run every criterion in adaptive mode against one global run.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated criteria; an empty value runs none.
        #[arg(long, default_value = "eta_over_d,eta_x,u,u_x,w,w_x")]
        criteria: String,
        /// Comma-separated enlargement settings, `off` and/or `on`.
        #[arg(long, default_value = "off")]
        enlarge_options: String,
    },
}

fn parse_criteria(s: &str) -> anyhow::Result<Vec<CriterionKind>> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| v.parse().map_err(anyhow::Error::from)).collect()
}

fn parse_enlarge(s: &str) -> anyhow::Result<Vec<bool>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| match v {
            "on" | "true" => Ok(true),
            "off" | "false" => Ok(false),
            _ => anyhow::bail!("enlarge option must be on or off, got '{v}'"),
        })
        .collect()
}

fn print_json<T: serde::Serialize>(value: &T) -> CmdResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(Failure::config)?;
    // A closed pipe downstream is not an error of the run.
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig::resolve(&args).map_err(Failure::config)?;
            let report = commands::run(&cfg)?;
            print_json(&report)
        }
        Command::Compare { a, b, output } => {
            let cmp = commands::compare(&a, &b)?;
            if let Some(path) = output {
                io::write_json(&path, &cmp).map_err(Failure::config)?;
            }
            print_json(&cmp)
        }
        Command::Sweep {
            run,
            criteria,
            enlarge_options,
        } => {
            let criteria = parse_criteria(&criteria).context("--criteria").map_err(Failure::config)?;
            let enlarge = parse_enlarge(&enlarge_options).map_err(Failure::config)?;
            let cfg = RunConfig::resolve(&run).map_err(Failure::config)?;
            let table = commands::sweep(&cfg, &criteria, &enlarge)?;
            let mut text = format!("{:<12} {:<8} {:>10} {:>8} {:>12} {:>10}\n", "criterion", "enlarge", "ratio", "flagged", "rmse", "r");
            for row in &table.rows {
                let (rmse, r) = match (&row.analytic, row.gauges.first()) {
                    (Some(m), _) => (m.rmse, m.pearson.value()),
                    (None, Some(g)) => (g.metrics.rmse, g.metrics.pearson.value()),
                    (None, None) => (f64::NAN, None),
                };
                text += &format!(
                    "{:<12} {:<8} {:>10.4} {:>8.3} {:>12.4e} {:>10}\n",
                    row.criterion.to_string(),
                    row.enlarge,
                    row.time_ratio,
                    row.mean_flagged_fraction,
                    rmse,
                    r.map_or("degenerate".to_string(), |r| format!("{r:.5}")),
                );
            }
            let _ = write!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
