//! `dvscale`: runs the DV-DVFS vs. DVO comparison and its sweeps from a
//! config file and writes CSV/JSON reports plus plot data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dvscale::experiment::{
    emit_report, load_config, run_comparison, run_deadline_sweep, run_variety_sweep, ExperimentConfig,
    ReportFormat, RunError, SweepReport,
};
use dvscale::power::EnergyMode;

const OUT_DIR_ENV: &str = "DVSCALE_OUT_DIR";

#[derive(Parser)]
#[command(name = "dvscale", version, about = "Data-variety-aware DVFS experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DV-DVFS against DVO for every scenario and seed.
    Compare(RunArgs),
    /// The comparison repeated for every exponent in `z_sweep`.
    SweepVariety(RunArgs),
    /// Deadline sensitivity within scenario groups.
    SweepDeadline(RunArgs),
    /// Parse and validate a config without running anything.
    ValidateConfig {
        #[arg(long, default_value = "configs/default.toml")]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "configs/default.toml")]
    config: PathBuf,

    /// Output directory [default: config's output_dir].
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,

    /// Report format; both are written when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Seed override, e.g. `1,2,7` or `1..21` (end exclusive) or `1..=20`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,

    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SlotAverage,
    BusyLiteral,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
        if let Some((a, b)) = part.split_once("..=") {
            seeds.extend(num(a)?..=num(b)?);
        } else if let Some((a, b)) = part.split_once("..") {
            seeds.extend(num(a)?..num(b)?);
        } else {
            seeds.push(num(part)?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(seeds))
}

fn prepare(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = load_config(&args.config)?;
    if let Some(Seeds(seeds)) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(mode) = args.mode {
        config.energy_mode = match mode {
            Mode::SlotAverage => EnergyMode::SlotAverage,
            Mode::BusyLiteral => EnergyMode::BusyTimeLiteral,
        };
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn write_reports(report: &SweepReport, format: Option<Format>, dir: &Path) -> Result<()> {
    let formats = match format {
        Some(Format::Csv) => vec![ReportFormat::Csv],
        Some(Format::Json) => vec![ReportFormat::Json],
        None => vec![ReportFormat::Csv, ReportFormat::Json],
    };
    let mut written = Vec::new();
    for f in formats {
        for path in emit_report(report, f, dir)? {
            if !written.contains(&path) {
                written.push(path);
            }
        }
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn summarize(report: &SweepReport) {
    for a in &report.aggregates {
        println!(
            "{:<24} z={:<4} runs={:<3} savings={:>7.2}%  time_increase={:>6.2}%",
            a.scenario, a.z, a.runs, a.mean_savings_pct, a.mean_time_increase_pct
        );
    }
}

type Sweep = fn(&ExperimentConfig) -> Result<SweepReport, RunError>;

fn run(command: Command) -> Result<()> {
    let (args, sweep): (RunArgs, Sweep) = match command {
        Command::ValidateConfig { config } => {
            let c = load_config(&config)?;
            println!(
                "{}: ok ({} scenarios, {} seeds, {} z values)",
                config.display(),
                c.deadline_scenarios.len(),
                c.seeds.len(),
                c.z_values().len()
            );
            return Ok(());
        }
        Command::Compare(a) => (a, run_comparison),
        Command::SweepVariety(a) => (a, run_variety_sweep),
        Command::SweepDeadline(a) => (a, run_deadline_sweep),
    };
    let config = prepare(&args)?;
    let report = sweep(&config)?;
    write_reports(&report, args.format, &config.output_dir)
        .with_context(|| format!("writing reports to {}", config.output_dir.display()))?;
    summarize(&report);

    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    if !report.infeasible_scenarios.is_empty() {
        bail!("entirely infeasible scenarios: {}", report.infeasible_scenarios.join(", "));
    }
    if !report.violations.is_empty() {
        bail!("{} deadline-monotonicity violations", report.violations.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
