//! `postsel`: point reports, grid sweeps and the formal check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use postsel::bellprep::StepOrder;
use postsel::indfit::TieBreak;
use postsel::run::{grid_csv, run_formal_check, run_grid, run_point, Settings};
use postsel::scalar::{DEFAULT_DEGREE_CAP, DEFAULT_E_MAX};

#[derive(Parser)]
#[command(name = "postsel", version, about = "Threshold analysis for postselected concatenated four-qubit codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-level report at one physical error point.
    Point(Options),
    /// Maximum gate error over a (p_cnot, p_prep) grid, written as CSV.
    Grid(Options),
    /// Second-order suppression check of the level-1 Bell pair.
    FormalCheck {
        #[arg(long, default_value_t = DEFAULT_DEGREE_CAP)]
        degree_cap: usize,
        #[arg(long, default_value_t = DEFAULT_E_MAX)]
        e_max: f64,
        #[arg(long, default_value_t = 2)]
        cycles: usize,
    },
}

/// Flags override keys of the config file.
#[derive(Args)]
struct Options {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    p_prep: Option<f64>,
    #[arg(long)]
    p_cnot: Option<f64>,
    #[arg(long)]
    p_meas: Option<f64>,
    #[arg(long)]
    p_hadamard: Option<f64>,
    #[arg(long)]
    p_special: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Spectator per level, e.g. `+,0,0,0,+`.
    #[arg(long, allow_hyphen_values = true)]
    schedule: Option<String>,
    /// `double`, `bigfloat[:digits]` or `polynomial[:cap[:e_max]]`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    failure_cutoff: Option<f64>,
    /// Purification cycles per Bell pair.
    #[arg(long)]
    cycles: Option<usize>,
    /// `randomized`, `spectator-last` or `final-spectator-last`.
    #[arg(long, value_parser = parse_order)]
    order: Option<StepOrder>,
    /// `canonical`, `likelihood` or `split`.
    #[arg(long, value_parser = parse_tie_break)]
    tie_break: Option<TieBreak>,
    #[arg(long)]
    memory_error: Option<f64>,
    #[arg(long)]
    code_tolerance: Option<f64>,
    /// Write the text report here as well as to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// JSON document path.
    #[arg(long)]
    document: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    p_cnot_axis: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p_prep_axis: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    extra_p_cnot: Option<Vec<f64>>,
    /// CSV output path for `grid`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_order(s: &str) -> Result<StepOrder, String> {
    match s {
        "randomized" => Ok(StepOrder::Randomized),
        "spectator-last" => Ok(StepOrder::SpectatorLast),
        "final-spectator-last" => Ok(StepOrder::FinalSpectatorLast),
        _ => Err(format!("unknown order {s:?}")),
    }
}

fn parse_tie_break(s: &str) -> Result<TieBreak, String> {
    match s {
        "canonical" => Ok(TieBreak::Canonical),
        "likelihood" => Ok(TieBreak::Likelihood),
        "split" => Ok(TieBreak::Split),
        _ => Err(format!("unknown tie break {s:?}")),
    }
}

impl Options {
    fn settings(self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Settings::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => Settings::default(),
        };
        let flags = Settings {
            p_prep: self.p_prep,
            p_cnot: self.p_cnot,
            p_meas: self.p_meas,
            p_hadamard: self.p_hadamard,
            p_special: self.p_special,
            levels: self.levels,
            schedule: self.schedule,
            backend: self.backend,
            failure_cutoff: self.failure_cutoff,
            cycles: self.cycles,
            order: self.order,
            tie_break: self.tie_break,
            memory_error: self.memory_error,
            code_tolerance: self.code_tolerance,
            report: self.report,
            document: self.document,
            p_cnot_axis: self.p_cnot_axis,
            p_prep_axis: self.p_prep_axis,
            extra_p_cnot: self.extra_p_cnot,
            csv: self.csv,
        };
        Ok(file.overlay(flags))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Point(opts) => {
            let config = opts.settings()?.run_config()?;
            let report = run_point(&config)?;
            let table = report.table();
            print!("{table}");
            if let Some(p) = &config.report {
                write(p, &table)?;
            }
            if let Some(p) = &config.document {
                write(p, &report.document_string())?;
            }
            Ok(true)
        }
        Command::Grid(opts) => {
            let settings = opts.settings()?;
            let config = settings.grid_config()?;
            let rows = run_grid(&config);
            let csv = grid_csv(&rows);
            match &config.csv {
                Some(p) => write(p, &csv)?,
                None => print!("{csv}"),
            }
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            if failed > 0 {
                eprintln!("{failed} grid point(s) failed; see the error column");
            }
            Ok(true)
        }
        Command::FormalCheck { degree_cap, e_max, cycles } => {
            if !(e_max > 0.0 && e_max < 1.0) {
                bail!("e_max must lie in (0, 1)");
            }
            let report = run_formal_check(degree_cap, e_max, cycles)?;
            print!("{}", report.text());
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
