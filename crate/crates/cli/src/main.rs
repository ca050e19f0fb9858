//! `nhsta`: run, sweep, plot and verify counterdiabatic driving experiments.
//!
//! Exit codes: 0 pass, 2 threshold failure, 3 config or usage error,
//! 4 numeric error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use nhsta::experiment::{
    emit_plots, output_dir, run_experiment, spectrum_sweep, verify_suite, DriveKind, ExperimentConfig, PlotStyle,
    SweepModel,
};
use nhsta::models::Preset;
use nhsta::{Error, Execution};

/// Environment override for the output directory.
const OUT_ENV: &str = "NHSTA_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "nhsta",
    version,
    about = "Counterdiabatic driving for pseudo- and antipseudo-Hermitian Hamiltonians"
)]
struct Cli {
    /// Output directory (beats $NHSTA_OUT_DIR and the config)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Refuse to run anything that would draw random numbers
    #[arg(long, global = true)]
    seedless: bool,

    /// Force single-threaded evaluation
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write CSV and report files
    Run {
        #[arg(long, value_name = "PATH", required_unless_present = "model")]
        config: Option<PathBuf>,
        /// Built-in schedule when no config is given
        #[arg(long, conflicts_with = "config")]
        model: Option<String>,
        /// bare | full-cd | cd-only (with --model)
        #[arg(long, requires = "model", default_value = "full-cd")]
        drive: String,
        /// Step in units of the pulse period
        #[arg(long)]
        step: Option<f64>,
        /// Half-width of the window in pulse periods, or START,END for custom matrices
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
    /// Sample the spectrum along a parameter ratio
    Sweep {
        /// pseudo (x = γ/ω) | antipseudo (x = Ω/γ)
        #[arg(long, default_value = "pseudo")]
        model: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 2.0)]
        to: f64,
        #[arg(long, default_value_t = 400)]
        samples: usize,
    },
    /// Write a matplotlib script for existing CSV files
    Plot {
        #[arg(value_name = "CSV")]
        csvs: Vec<PathBuf>,
        /// Script path (default <out>/plot.py)
        #[arg(long)]
        script: Option<PathBuf>,
        /// four-panel | overlay
        #[arg(long, default_value = "four-panel")]
        style: String,
    },
    /// Run the built-in reproduction suite
    Verify {
        /// Step in units of the pulse period
        #[arg(long)]
        step: Option<f64>,
        /// Half-width of the window in pulse periods
        #[arg(long)]
        window: Option<String>,
        /// Also write CSVs and reports for every run
        #[arg(long)]
        write: bool,
    },
}

enum Outcome {
    Pass,
    ThresholdFailure,
}

fn parse_drive(s: &str) -> Result<DriveKind, Error> {
    match s {
        "bare" => Ok(DriveKind::Bare),
        "full-cd" => Ok(DriveKind::FullCd),
        "cd-only" => Ok(DriveKind::CdOnly),
        _ => Err(Error::Config(format!("unknown drive `{s}`"))),
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, step: Option<f64>, window: Option<&str>) -> Result<(), Error> {
    if let Some(s) = step {
        cfg.grid.step = s;
    }
    if let Some(w) = window {
        let bad = || Error::Config(format!("cannot parse --window `{w}`"));
        match (w.split_once(','), cfg.model.custom.as_mut()) {
            (Some((a, b)), Some(c)) => {
                c.start = a.trim().parse().map_err(|_| bad())?;
                c.end = b.trim().parse().map_err(|_| bad())?;
            }
            (None, None) => cfg.grid.half_width = w.trim().parse().map_err(|_| bad())?,
            (Some(_), None) => return Err(Error::Config("START,END windows apply to custom matrices only".into())),
            (None, Some(_)) => return Err(Error::Config("custom matrices need --window START,END".into())),
        }
    }
    cfg.validate()
}

fn resolve_out(cli_out: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    let env = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let over = cli_out.map(Path::to_path_buf).or(env);
    match cfg {
        Some(c) => output_dir(c, over.as_deref()),
        None => over.unwrap_or_else(|| PathBuf::from("out")),
    }
}

fn run(cli: &Cli, exec: Execution) -> Result<Outcome> {
    match &cli.command {
        Command::Run {
            config,
            model,
            drive,
            step,
            window,
        } => {
            let mut cfg = match (config, model) {
                (Some(p), _) => ExperimentConfig::from_path(p)?,
                (None, Some(m)) => {
                    let case: Preset = m.parse()?;
                    ExperimentConfig::preset(case, parse_drive(drive)?)
                }
                (None, None) => return Err(Error::Config("run needs --config or --model".into()).into()),
            };
            apply_overrides(&mut cfg, *step, window.as_deref())?;
            let dir = resolve_out(cli.out.as_deref(), Some(&cfg));
            let (files, report) = run_experiment(&cfg, &dir, exec).with_context(|| format!("run `{}`", cfg.name()))?;
            print!("{}", report.to_text());
            if cli.seedless {
                println!("seedless: true");
            }
            println!("csv: {}", files.trajectory.display());
            println!("report: {}", files.report.display());
            Ok(if report.passed() {
                Outcome::Pass
            } else {
                Outcome::ThresholdFailure
            })
        }
        Command::Sweep {
            model,
            from,
            to,
            samples,
        } => {
            let m: SweepModel = model.parse()?;
            let table = spectrum_sweep(m, *from, *to, *samples, exec)?;
            let dir = resolve_out(cli.out.as_deref(), None);
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let path = dir.join(format!("{model}_spectrum.csv"));
            std::fs::write(&path, table.to_csv()).map_err(Error::from)?;
            println!("samples: {}", table.x.len());
            println!("skipped: {}", table.skipped());
            println!("csv: {}", path.display());
            Ok(Outcome::Pass)
        }
        Command::Plot { csvs, script, style } => {
            let style: PlotStyle = style.parse()?;
            let script = script
                .clone()
                .unwrap_or_else(|| resolve_out(cli.out.as_deref(), None).join("plot.py"));
            emit_plots(csvs, &script, style)?;
            println!("script: {}", script.display());
            Ok(Outcome::Pass)
        }
        Command::Verify { step, window, write } => verify(cli, exec, *step, window.as_deref(), *write),
    }
}

fn verify(cli: &Cli, exec: Execution, step: Option<f64>, window: Option<&str>, write: bool) -> Result<Outcome> {
    let overridden = step.is_some() || window.is_some();
    let mut all_pass = true;
    if overridden || write {
        let dir = resolve_out(cli.out.as_deref(), None);
        for mut cfg in nhsta::experiment::suite_configs() {
            apply_overrides(&mut cfg, step, window)?;
            let report = if write {
                run_experiment(&cfg, &dir, exec)?.1
            } else {
                nhsta::experiment::execute(&cfg, exec)?.report
            };
            all_pass &= report.passed();
            println!("{} {}", if report.passed() { "PASS" } else { "FAIL" }, report.name);
        }
        return Ok(if all_pass {
            Outcome::Pass
        } else {
            Outcome::ThresholdFailure
        });
    }
    for check in verify_suite(exec)? {
        all_pass &= check.passed;
        println!(
            "{} {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    Ok(if all_pass {
        Outcome::Pass
    } else {
        Outcome::ThresholdFailure
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::InvalidArgument(_) | Error::Schema(_) | Error::Io(_)) => 3,
        Some(_) => 4,
        None => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match run(&cli, exec) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::ThresholdFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
