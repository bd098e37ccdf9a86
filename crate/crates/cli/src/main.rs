use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use covarc_cli::output;
use covarc_cli::sweep::{self, SweepSpec};
use covarc_core::ingest::LoadOptions;
use covarc_core::{assess, ActivityProfile, DataSnapshot, PersonProfile, RiskConfig, Sex};
use covarc_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "covarc", version, about = "Interval-valued COVID-19 activity risk estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a snapshot directory and print a summary.
    Ingest {
        #[arg(long)]
        snapshot: PathBuf,
        /// Strict load; exit 2 if there are any warnings.
        #[arg(long)]
        check_only: bool,
        /// Write the normalized snapshot here.
        #[arg(long, conflicts_with = "check_only")]
        out: Option<PathBuf>,
    },
    /// Assess one person, activity and day.
    Risk(RiskArgs),
    /// Run a scenario sweep and write CSV.
    Simulate {
        /// Sweep spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Output file; defaults to the sweep file's `out`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Snapshot directory; defaults to the sweep file's `snapshot`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct RiskArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    region: String,
    #[arg(long)]
    date: NaiveDate,
    #[arg(long)]
    age: u32,
    #[arg(long, value_parser = parse_sex)]
    sex: Sex,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    chronic: bool,
    #[arg(long, default_value = "No Vaccine")]
    vaccine: String,
    #[arg(long, default_value = "No Mask")]
    mask: String,
    #[arg(long, default_value_t = 0)]
    indoor: u32,
    #[arg(long, default_value_t = 0)]
    outdoor: u32,
    #[arg(long)]
    k_indoor: Option<f64>,
    #[arg(long)]
    k_outdoor: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

fn parse_sex(s: &str) -> Result<Sex, String> {
    Sex::from_name(s).ok_or_else(|| format!("expected male or female, got '{s}'"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { snapshot, check_only, out } => ingest(&snapshot, check_only, out.as_deref()),
        Command::Risk(args) => risk(args),
        Command::Simulate { spec, out, snapshot } => simulate(&spec, out, snapshot),
        Command::Serve { config } => serve(&config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(dir: &Path) -> Result<DataSnapshot> {
    let s = DataSnapshot::load_dir(dir, &LoadOptions::lenient()).with_context(|| format!("loading snapshot {}", dir.display()))?;
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

fn ingest(dir: &Path, check_only: bool, out: Option<&Path>) -> Result<ExitCode> {
    let options = if check_only { LoadOptions::default() } else { LoadOptions::lenient() };
    let s = DataSnapshot::load_dir(dir, &options).with_context(|| format!("loading snapshot {}", dir.display()))?;
    print!("{}", output::snapshot_summary(&s));
    if let Some(out) = out {
        s.write_dir(out).with_context(|| format!("writing snapshot to {}", out.display()))?;
        println!("written to       {}", out.display());
    }
    if check_only && !s.warnings().is_empty() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn risk(a: RiskArgs) -> Result<ExitCode> {
    let snapshot = load(&a.snapshot)?;
    let mut config = RiskConfig::default();
    if let Some(k) = a.k_indoor {
        config.k_indoor = k;
    }
    if let Some(k) = a.k_outdoor {
        config.k_outdoor = k;
    }
    let profile = PersonProfile {
        age_years: a.age,
        sex: a.sex,
        chronic_illness: a.chronic,
        vaccine: a.vaccine,
        mask: a.mask,
    };
    let activity = ActivityProfile {
        n_indoor: a.indoor,
        n_outdoor: a.outdoor,
    };
    let report = assess(&snapshot, &a.region, a.date, &profile, &activity, &config)?;
    let text = match a.format {
        Format::Text => output::report_text(&report),
        Format::Csv => output::report_csv(&report),
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(spec_path: &Path, out: Option<PathBuf>, snapshot: Option<PathBuf>) -> Result<ExitCode> {
    let spec = SweepSpec::load(spec_path)?;
    let Some(dir) = snapshot.or_else(|| spec.snapshot.clone()) else {
        bail!("no snapshot directory: pass --snapshot or set `snapshot` in {}", spec_path.display());
    };
    let snapshot = load(&dir)?;
    let result = sweep::run(&spec, &snapshot)?;
    for (scenario, skipped) in &result.skipped {
        if let (Some(first), Some(last)) = (skipped.first(), skipped.last()) {
            eprintln!(
                "scenario '{scenario}': skipped {} day(s) between {} and {}: {}",
                skipped.len(),
                first.date,
                last.date,
                first.reason
            );
        }
    }
    match out.or_else(|| spec.out.clone()) {
        Some(path) => {
            std::fs::write(&path, &result.csv).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} rows to {}", result.rows, path.display());
        }
        None => std::io::stdout().write_all(result.csv.as_bytes())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(path: &Path) -> Result<ExitCode> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(tracing::Level::INFO).init();
    let config = ServiceConfig::load(path)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = covarc_service::bind(&config).await?;
        covarc_service::serve(listener, config, shutdown_signal()).await
    })?;
    Ok(ExitCode::SUCCESS)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
