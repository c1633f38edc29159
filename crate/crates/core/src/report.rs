//! Run manifests and CSV output for simulations.
//!
//! Every report embeds a [`RunManifest`]. Wall-clock metadata lives in a
//! separate optional block and never reaches the CSV payloads, so identical
//! manifests give byte-identical CSV files regardless of thread count.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::error::SimError;
use crate::simulation::{Schedule, SimulationConfig};
use crate::stats::mean_sd;
use crate::strategy::{walk_paths, PathSnapshot};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Paths processed per batch when streaming CSV rows.
const TERMINAL_BATCH: usize = 8192;
/// Snapshots held in memory per batch when writing full paths.
const FULL_PATH_BATCH_VALUES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("full-path output would hold {values} values, above the cap of {cap}")]
    TooLarge { values: u128, cap: u128 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallClock {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub simulation: Option<SimulationConfig>,
    pub parameters: serde_json::Value,
    pub tool_version: String,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<WallClock>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config_path: None,
            simulation: None,
            parameters: serde_json::Value::Null,
            tool_version: TOOL_VERSION.to_string(),
            seed: None,
            wall_clock: None,
        }
    }

    /// Manifest without wall-clock metadata, as a single JSON line.
    pub fn deterministic_json(&self) -> String {
        let mut m = self.clone();
        m.wall_clock = None;
        serde_json::to_string(&m).expect("manifest serialises")
    }
}

/// Aggregate statistics of a streamed simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    /// Largest `|central identity residual|` over all paths and grid times.
    pub max_identity_residual: f64,
    pub mean_excess_log_wealth: f64,
    pub sd_excess_log_wealth: f64,
    /// `int_0^T |disc|^2 / 2`, the exact mean of `log K_T - log S^0_T`.
    pub expected_excess_log_wealth: f64,
    /// `sqrt(int_0^T |disc|^2)`, its exact standard deviation.
    pub expected_sd_excess_log_wealth: f64,
    pub mean_log_wealth: f64,
    pub mean_log_prices: Vec<f64>,
    /// Fraction of paths that end above the index.
    pub fraction_beating_index: f64,
}

fn column_labels(schedule: &Schedule) -> Vec<String> {
    let m = &schedule.segments()[0].market;
    (0..m.n_assets()).map(|k| m.label(k)).collect()
}

fn write_header<W: Write>(
    out: &mut W,
    manifest: &RunManifest,
    columns: &[String],
) -> io::Result<()> {
    writeln!(out, "# manifest {}", manifest.deterministic_json())?;
    writeln!(out, "{}", columns.join(","))
}

/// Streams one CSV row per path (`path_id`, terminal log price of every
/// security, `log_K`, terminal identity residual) and returns summary statistics.
pub fn write_terminal_csv<W: Write>(
    schedule: &Schedule,
    cfg: &SimulationConfig,
    manifest: &RunManifest,
    mut out: W,
) -> Result<SimulationSummary, ReportError> {
    let mut columns = vec!["path_id".to_string()];
    columns.extend(column_labels(schedule).iter().map(|l| format!("log_S_{l}")));
    columns.push("log_K".into());
    columns.push("identity_residual".into());
    write_header(&mut out, manifest, &columns)?;

    let n_assets = schedule.n_assets();
    let mut excess = Vec::with_capacity(cfg.n_paths);
    let mut log_k_sum = 0.0;
    let mut log_s_sum = vec![0.0; n_assets];
    let mut max_residual: f64 = 0.0;
    let mut disc_sq = 0.0;
    let mut start = 0;
    while start < cfg.n_paths {
        let end = (start + TERMINAL_BATCH).min(cfg.n_paths);
        let batch = walk_paths(schedule, cfg, start..end, &[cfg.n_steps])?;
        for (j, snaps) in batch.iter().enumerate() {
            let s = &snaps[0];
            write!(out, "{}", start + j)?;
            for x in &s.log_s {
                write!(out, ",{x}")?;
            }
            writeln!(out, ",{},{}", s.log_k, s.identity_residual())?;
            excess.push(s.excess_log_wealth());
            log_k_sum += s.log_k;
            for (acc, x) in log_s_sum.iter_mut().zip(&s.log_s) {
                *acc += x;
            }
            max_residual = max_residual.max(s.max_abs_residual);
            disc_sq = s.disc_sq_integral;
        }
        start = end;
    }
    out.flush()?;

    let n = cfg.n_paths as f64;
    let (mean, sd) = mean_sd(&excess);
    Ok(SimulationSummary {
        n_paths: cfg.n_paths,
        max_identity_residual: max_residual,
        mean_excess_log_wealth: mean,
        sd_excess_log_wealth: sd,
        expected_excess_log_wealth: 0.5 * disc_sq,
        expected_sd_excess_log_wealth: disc_sq.sqrt(),
        mean_log_wealth: log_k_sum / n,
        mean_log_prices: log_s_sum.iter().map(|s| s / n).collect(),
        fraction_beating_index: excess.iter().filter(|&&x| x > 0.0).count() as f64 / n,
    })
}

/// Number of numeric values a full-path dump would contain.
pub fn full_path_values(schedule: &Schedule, cfg: &SimulationConfig) -> u128 {
    (cfg.n_paths as u128) * (cfg.n_steps as u128 + 1) * (schedule.n_assets() as u128 + 4)
}

/// Writes every grid point of every path in long format
/// (`path_id, step, t, log_S_*, log_K, log_R, identity_residual`), refusing
/// when the output would exceed `cap` values.
pub fn write_full_paths_csv<W: Write>(
    schedule: &Schedule,
    cfg: &SimulationConfig,
    manifest: &RunManifest,
    cap: u128,
    mut out: W,
) -> Result<(), ReportError> {
    let values = full_path_values(schedule, cfg);
    if values > cap {
        return Err(ReportError::TooLarge { values, cap });
    }
    let mut columns = vec!["path_id".to_string(), "step".into(), "t".into()];
    columns.extend(column_labels(schedule).iter().map(|l| format!("log_S_{l}")));
    columns.extend(["log_K".into(), "log_R".into(), "identity_residual".into()]);
    write_header(&mut out, manifest, &columns)?;

    let checkpoints: Vec<usize> = (0..=cfg.n_steps).collect();
    let batch_paths = (FULL_PATH_BATCH_VALUES / (cfg.n_steps + 1)).max(1);
    let mut start = 0;
    while start < cfg.n_paths {
        let end = (start + batch_paths).min(cfg.n_paths);
        for (j, snaps) in walk_paths(schedule, cfg, start..end, &checkpoints)?
            .iter()
            .enumerate()
        {
            for s in snaps {
                write_full_row(&mut out, start + j, s)?;
            }
        }
        start = end;
    }
    out.flush()?;
    Ok(())
}

fn write_full_row<W: Write>(out: &mut W, path: usize, s: &PathSnapshot) -> io::Result<()> {
    write!(out, "{path},{},{}", s.step, s.time)?;
    for x in &s.log_s {
        write!(out, ",{x}")?;
    }
    writeln!(out, ",{},{},{}", s.log_k, s.log_r, s.identity_residual())
}
