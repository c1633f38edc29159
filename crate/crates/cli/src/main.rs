use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use scapm_core::config::{parse_market_config, ConfigError, MarketConfig};
use scapm_core::horizon::horizon_report;
use scapm_core::market::{
    check_viability, replication_weights, risk_profile, DEFAULT_VIABILITY_TOL,
};
use scapm_core::parallel::with_threads;
use scapm_core::report::{
    write_full_paths_csv, write_terminal_csv, ReportError, RunManifest, WallClock,
};
use scapm_core::simulation::SimulationConfig;
use scapm_core::verify::{run_all, Level};
use scapm_core::{MarketError, SimError};

const DEFAULT_SEED: u64 = 20_240_601;
const DEFAULT_FULL_PATH_CAP: u128 = 50_000_000;

#[derive(Parser)]
#[command(
    name = "scapm",
    version,
    about = "Test whether an index can be beaten in a Black-Scholes market"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Risk profile and finite-horizon detection report (no simulation).
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Miss probability; a comma-separated list or repeated flag.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.05")]
        epsilon: Vec<f64>,
        /// Outperformance factor is `1/delta`.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.05")]
        delta: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "100")]
        horizon: Vec<f64>,
    },
    /// Simulate prices and the wealth process; write per-path terminal statistics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 250)]
        steps: usize,
        #[arg(long)]
        horizon: f64,
        #[arg(long, env = "SCAPM_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Terminal CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every grid point of every path to this CSV.
        #[arg(long)]
        full_paths: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FULL_PATH_CAP)]
        max_full_path_values: u128,
        /// Worker threads (0 = all cores). Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the acceptance experiments against a market.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "quick")]
        level: Level,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("market is not viable: mu - r is not in the range of sigma (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NotViable { residual: f64, tolerance: f64 },
    #[error("{0} acceptance criteria failed")]
    Acceptance(usize),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::NotViable { .. } => 3,
            Self::Acceptance(_) => 4,
            Self::Io { .. } => 5,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Validation(format!("[{}] {e}", e.code()))
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::NotViable {
                residual,
                tolerance,
            } => Self::NotViable {
                residual,
                tolerance,
            },
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Market(m) => m.into(),
            other => Self::Validation(other.to_string()),
        }
    }
}

fn report_error(e: ReportError, path: &Path) -> CliError {
    match e {
        ReportError::Sim(s) => s.into(),
        ReportError::Io(io) => CliError::io(path, io),
        too_large @ ReportError::TooLarge { .. } => CliError::Validation(too_large.to_string()),
    }
}

fn load_config(path: &Path) -> Result<MarketConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = parse_market_config(&text)?;
    for seg in config.schedule().segments() {
        let v = check_viability(&seg.market, DEFAULT_VIABILITY_TOL)?;
        if !v.viable {
            return Err(CliError::NotViable {
                residual: v.residual,
                tolerance: v.tolerance,
            });
        }
    }
    Ok(config)
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("reports serialise")
    );
}

fn analyze(
    config_path: &Path,
    eps: &[f64],
    delta: &[f64],
    horizon: &[f64],
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let mut manifest = RunManifest::new("analyze");
    manifest.config_path = Some(config_path.display().to_string());
    manifest.parameters = json!({ "epsilon": eps, "delta": delta, "horizon": horizon });

    let mut markets = Vec::new();
    for (i, seg) in config.schedule().segments().iter().enumerate() {
        let m = &seg.market;
        let profile = risk_profile(m)?;
        let mut reports = Vec::new();
        for &e in eps {
            for &d in delta {
                for &t in horizon {
                    reports.push(horizon_report(m, e, d, t)?);
                }
            }
        }
        markets.push(json!({
            "segment": i,
            "duration": if seg.duration.is_finite() { json!(seg.duration) } else { Value::Null },
            "labels": (0..m.n_assets()).map(|k| m.label(k)).collect::<Vec<_>>(),
            "risk_profile": profile,
            "replication_weights": replication_weights(m)?,
            "horizon_reports": reports,
        }));
    }
    print_json(&json!({
        "manifest": manifest,
        "config": config.to_json(),
        "markets": markets,
    }));
    Ok(())
}

fn simulate(
    config_path: &Path,
    cfg: SimulationConfig,
    out: Option<&Path>,
    full_paths: Option<&Path>,
    cap: u128,
    threads: usize,
) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let schedule = config.schedule();
    schedule.step_ranges(&cfg)?;

    let started = Instant::now();
    let started_unix_ms = unix_ms();
    let mut manifest = RunManifest::new("simulate");
    manifest.config_path = Some(config_path.display().to_string());
    manifest.simulation = Some(cfg);
    manifest.seed = Some(cfg.seed);

    let stdout_path = Path::new("<stdout>");
    let summary = with_threads(threads, || -> Result<_, CliError> {
        if let Some(path) = full_paths {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            write_full_paths_csv(&schedule, &cfg, &manifest, cap, BufWriter::new(file))
                .map_err(|e| report_error(e, path))?;
        }
        match out {
            Some(path) => {
                let file = File::create(path).map_err(|e| CliError::io(path, e))?;
                write_terminal_csv(&schedule, &cfg, &manifest, BufWriter::new(file))
                    .map_err(|e| report_error(e, path))
            }
            None => write_terminal_csv(
                &schedule,
                &cfg,
                &manifest,
                BufWriter::new(io::stdout().lock()),
            )
            .map_err(|e| report_error(e, stdout_path)),
        }
    })?;

    manifest.wall_clock = Some(WallClock {
        started_unix_ms,
        elapsed_ms: started.elapsed().as_millis(),
    });
    let report = json!({ "manifest": manifest, "summary": summary });
    let text = serde_json::to_string_pretty(&report).expect("reports serialise");
    // With the CSV on stdout, keep the summary out of the data stream.
    if out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn verify(config_path: &Path, level: Level) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let spec = config.primary_market();
    let outcomes = run_all(spec, level);
    let mut stdout = io::stdout().lock();
    for o in &outcomes {
        writeln!(stdout, "{}", o.line()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    writeln!(
        stdout,
        "{} of {} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    )
    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    if failed > 0 {
        return Err(CliError::Acceptance(failed));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            config,
            epsilon,
            delta,
            horizon,
        } => analyze(&config, &epsilon, &delta, &horizon),
        Command::Simulate {
            config,
            paths,
            steps,
            horizon,
            seed,
            out,
            full_paths,
            max_full_path_values,
            threads,
        } => {
            let cfg = SimulationConfig::new(horizon, steps, paths, seed)?;
            simulate(
                &config,
                cfg,
                out.as_deref(),
                full_paths.as_deref(),
                max_full_path_values,
                threads,
            )
        }
        Command::Verify { config, level } => verify(&config, level),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
