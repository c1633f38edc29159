//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or a JSON config string and returns a
//! JSON string; errors surface as JavaScript exceptions.

use serde_json::json;
use wasm_bindgen::prelude::*;

use scapm_core::config::parse_market_config;
use scapm_core::horizon::{
    detection_thresholds, horizon_report_for_norm, outperformance_probability,
};
use scapm_core::market::{
    check_viability, replication_weights, risk_profile, DEFAULT_VIABILITY_TOL,
};
use scapm_core::simulation::SimulationConfig;
use scapm_core::strategy::walk_paths;

const MAX_PATH_POINTS: usize = 200_000;

fn grid(t_max: f64, n_points: usize) -> Result<Vec<f64>, String> {
    if !(t_max > 0.0 && t_max.is_finite()) || n_points < 2 {
        return Err("need t_max > 0 and at least two points".into());
    }
    Ok((1..=n_points)
        .map(|i| t_max * i as f64 / n_points as f64)
        .collect())
}

/// Risk profile, replication weights and a horizon report for the first
/// market of `config_json`.
pub fn analyze_json(
    config_json: &str,
    eps: f64,
    delta: f64,
    horizon: f64,
) -> Result<String, String> {
    let config = parse_market_config(config_json).map_err(|e| format!("[{}] {e}", e.code()))?;
    let m = config.primary_market();
    let v = check_viability(m, DEFAULT_VIABILITY_TOL).map_err(|e| e.to_string())?;
    if !v.viable {
        return Err(format!(
            "market is not viable (residual {:.3e})",
            v.residual
        ));
    }
    let profile = risk_profile(m).map_err(|e| e.to_string())?;
    let report = horizon_report_for_norm(profile.disc_norm(), eps, delta, horizon)
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "labels": (0..m.n_assets()).map(|k| m.label(k)).collect::<Vec<_>>(),
        "risk_profile": profile,
        "replication_weights": replication_weights(m).map_err(|e| e.to_string())?,
        "horizon_report": report,
    })
    .to_string())
}

/// Detection thresholds on `n_points` horizons up to `t_max`, and the
/// outperformance probability of a market with discrepancy norm `disc_norm`.
pub fn threshold_curve_json(
    eps: f64,
    delta: f64,
    disc_norm: f64,
    t_max: f64,
    n_points: usize,
) -> Result<String, String> {
    let ts = grid(t_max, n_points)?;
    let mut weak = Vec::with_capacity(ts.len());
    let mut loose = Vec::with_capacity(ts.len());
    let mut improved = Vec::with_capacity(ts.len());
    let mut probability = Vec::with_capacity(ts.len());
    for &t in &ts {
        let th = detection_thresholds(eps, delta, t).map_err(|e| e.to_string())?;
        weak.push(th.weak);
        loose.push(th.loose);
        improved.push(th.improved);
        probability
            .push(outperformance_probability(disc_norm, t, delta).map_err(|e| e.to_string())?);
    }
    Ok(json!({
        "t": ts,
        "weak": weak,
        "loose": loose,
        "improved": improved,
        "probability": probability,
    })
    .to_string())
}

/// Simulated `log K_t - log S^0_t` paths with the exact mean `int |disc|^2 / 2`.
pub fn simulate_excess_paths_json(
    config_json: &str,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<String, String> {
    if n_paths.saturating_mul(n_steps + 1) > MAX_PATH_POINTS {
        return Err(format!("at most {MAX_PATH_POINTS} path points"));
    }
    let config = parse_market_config(config_json).map_err(|e| format!("[{}] {e}", e.code()))?;
    let schedule = config.schedule();
    let cfg = SimulationConfig::new(horizon, n_steps, n_paths, seed).map_err(|e| e.to_string())?;
    let checkpoints: Vec<usize> = (0..=n_steps).collect();
    let snaps = walk_paths(&schedule, &cfg, 0..n_paths, &checkpoints).map_err(|e| e.to_string())?;
    let times: Vec<f64> = checkpoints.iter().map(|&i| cfg.time(i)).collect();
    let paths: Vec<Vec<f64>> = snaps
        .iter()
        .map(|p| p.iter().map(|s| s.excess_log_wealth()).collect())
        .collect();
    let expected: Vec<f64> = snaps[0].iter().map(|s| 0.5 * s.disc_sq_integral).collect();
    let max_residual = snaps
        .iter()
        .filter_map(|p| p.last())
        .fold(0.0f64, |a, s| a.max(s.max_abs_residual));
    Ok(json!({
        "t": times,
        "paths": paths,
        "expected": expected,
        "max_identity_residual": max_residual,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(config_json: &str, eps: f64, delta: f64, horizon: f64) -> Result<String, JsError> {
    js(analyze_json(config_json, eps, delta, horizon))
}

#[wasm_bindgen]
pub fn threshold_curve(
    eps: f64,
    delta: f64,
    disc_norm: f64,
    t_max: f64,
    n_points: usize,
) -> Result<String, JsError> {
    js(threshold_curve_json(eps, delta, disc_norm, t_max, n_points))
}

#[wasm_bindgen]
pub fn simulate_excess_paths(
    config_json: &str,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<String, JsError> {
    js(simulate_excess_paths_json(
        config_json,
        horizon,
        n_steps,
        n_paths,
        seed,
    ))
}
