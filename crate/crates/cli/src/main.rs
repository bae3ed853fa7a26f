use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optoqfi::estimation::{self, EstimationError};
use optoqfi::model::{ModelVariant, PhysicalParams};
use optoqfi::sweep::{self, SweepConfig, Tolerances, PRESET_NAMES};
use optoqfi_cli::{exit, validate};

#[derive(Parser)]
#[command(
    name = "optoqfi",
    version,
    about = "Coupling-strength estimation bounds for driven optomechanics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a `key = value` configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full estimation report at one drive and temperature, as JSON.
    Point {
        /// Drive strength in s^-1.
        #[arg(long = "E")]
        drive: f64,
        /// Mechanical bath temperature in K.
        #[arg(long = "T")]
        temperature: f64,
        #[arg(long, default_value = "quadratic")]
        variant: ModelVariant,
        #[arg(long, default_value_t = 1)]
        runs: u32,
    },
    /// Regenerate the data and plot of a figure panel.
    Figure {
        /// One of fig1a, fig1b, fig2a, fig2b, fig3a-fig3d, fig4a, fig4b, fig5a, fig5b.
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every invariant suite and print a JSON summary.
    Validate {
        #[arg(long = "tol-overrides")]
        tol_overrides: Option<PathBuf>,
    },
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn run_and_emit(config: &SweepConfig) -> ExitCode {
    let records = match sweep::run_sweep(config) {
        Ok(r) => r,
        Err(e) => return fail(exit::CONFIG_ERROR, e),
    };
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    match sweep::emit(&records, config) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            if failed > 0 {
                eprintln!(
                    "warning: {failed} of {} points flagged (see status column)",
                    records.len()
                );
            }
            ExitCode::from(exit::SUCCESS as u8)
        }
        Err(e) => fail(exit::CONFIG_ERROR, e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(exit::CONFIG_ERROR, format!("{}: {e}", config.display())),
            };
            match sweep::parse_config(&text) {
                Ok(cfg) => run_and_emit(&cfg),
                Err(e) => fail(exit::CONFIG_ERROR, format!("{}: {e}", config.display())),
            }
        }
        Command::Point {
            drive,
            temperature,
            variant,
            runs,
        } => {
            if runs == 0 {
                return fail(exit::CONFIG_ERROR, "runs must be positive");
            }
            let params = PhysicalParams::reference()
                .with_drive(drive)
                .with_temperature(temperature)
                .with_variant(variant);
            match estimation::estimate(&params, runs) {
                Ok(report) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&report).expect("report serializes")
                    );
                    ExitCode::from(exit::SUCCESS as u8)
                }
                Err(EstimationError::Model(optoqfi::ModelError::InvalidParams(m))) => {
                    fail(exit::CONFIG_ERROR, format!("invalid parameters: {m}"))
                }
                Err(e) => fail(exit::MODEL_ERROR, e),
            }
        }
        Command::Figure { preset, out } => {
            let Some(mut cfg) = sweep::figure_preset(&preset) else {
                return fail(
                    exit::CONFIG_ERROR,
                    format!(
                        "unknown preset '{preset}' (known: {})",
                        PRESET_NAMES.join(", ")
                    ),
                );
            };
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            run_and_emit(&cfg)
        }
        Command::Validate { tol_overrides } => {
            let tol = match tol_overrides {
                None => Tolerances::default(),
                Some(path) => match std::fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|t| sweep::parse_tolerances(&t).map_err(|e| e.to_string()))
                {
                    Ok(t) => t,
                    Err(e) => return fail(exit::CONFIG_ERROR, format!("{}: {e}", path.display())),
                },
            };
            let report = validate::validate(&tol);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            for s in report.suites.iter().filter(|s| !s.passed) {
                eprintln!(
                    "FAIL {}: {} of {} checks, worst {:e} > {:e}",
                    s.name, s.failures, s.checks, s.worst, s.tolerance
                );
            }
            let code = if report.passed {
                exit::SUCCESS
            } else {
                exit::VALIDATION_FAILURE
            };
            ExitCode::from(code as u8)
        }
    }
}
