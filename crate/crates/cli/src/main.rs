use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wearsar::TissueTable;
use wearsar_cli::{check_materials, report, run_scenario, sweep, CliError, RunConfig, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "wearsar", version, about = "FDTD dosimetry for body-worn slot antennas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one site/variant over the configured frequencies.
    Run { config: PathBuf },
    /// Run every site x variant x frequency and write sweep.csv.
    Sweep { config: PathBuf },
    /// Summarize an output directory after checking its manifest.
    Report { dir: PathBuf },
    /// Print dielectric samples at 2, 2.45 and 3 GHz for every tissue.
    CheckMaterials { table: Option<PathBuf> },
}

fn workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config { key: WORKERS_ENV.into(), reason: format!("'{v}' is not a positive integer") }),
        Err(_) => Ok(1),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = run_scenario(&cfg)?;
            for r in out.results.iter().filter_map(|r| r.report.as_ref().ok()) {
                println!(
                    "{} GHz psSAR10g {} W/kg absorbed {} W",
                    wearsar::format::sig(r.frequency / 1e9),
                    wearsar::format::sig(r.ps_sar_10g.value),
                    wearsar::format::sig(r.total_absorbed)
                );
            }
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::load(&config)?;
            let rows = sweep(&cfg, workers()?)?;
            println!("{} rows written to {}", rows.len(), cfg.output_dir.join("sweep.csv").display());
        }
        Command::Report { dir } => print!("{}", report::summarize(&dir)?),
        Command::CheckMaterials { table } => {
            let t = match table {
                Some(p) => TissueTable::from_path(&p).map_err(|e| CliError::core("check-materials", e))?,
                None => TissueTable::builtin(),
            };
            print!("{}", check_materials(&t)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
