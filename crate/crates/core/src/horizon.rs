//! Finite-horizon outperformance: closed-form probabilities, detection
//! thresholds and their Monte Carlo counterparts.
//!
//! Over a horizon `T` with constant discrepancy `disc`,
//! `log K_T - log S^0_T ~ N(|disc|^2 T / 2, |disc|^2 T)`. The wealth process
//! beats the index by a factor above `1/delta` with probability at least
//! `1 - eps` exactly when `|disc| >= (z_eps + sqrt(z_eps^2 + 2 ln(1/delta))) / sqrt T`.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::market::{risk_profile, MarketSpec};
use crate::normal::{normal_cdf, upper_quantile};
use crate::simulation::{Schedule, SimulationConfig};
use crate::stats::{mean_sd, quantile_sorted, wilson_interval, Interval};
use crate::strategy::walk_paths;

/// Two-sided 99% normal critical value, `z_{0.005}`.
pub const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// The wealth process beats the index by more than `1/delta` with probability at least `1 - eps`.
    OutperformsWhp,
    /// `|disc|` is below the weak threshold.
    ScapmApproxHolds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// `(z_eps + sqrt(z_eps^2 + 2 ln(1/delta))) / sqrt T`.
    pub weak: f64,
    /// `(2 z_eps + sqrt(2 ln(1/delta))) / sqrt T`.
    pub loose: f64,
    /// `(z_eps + z_delta) / sqrt T`, attainable by a strategy tuned to `(eps, delta)`.
    pub improved: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(SimError::Domain(format!(
            "{name} must lie in (0, 1), got {x}"
        )))
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SimError::Domain(format!(
            "horizon must be positive, got {t}"
        )))
    }
}

pub fn detection_thresholds(eps: f64, delta: f64, horizon: f64) -> Result<Thresholds> {
    check_unit("epsilon", eps)?;
    check_unit("delta", delta)?;
    check_horizon(horizon)?;
    let z_eps = upper_quantile(eps)?;
    let z_delta = upper_quantile(delta)?;
    let log_factor = 2.0 * (1.0 / delta).ln();
    let root_t = horizon.sqrt();
    Ok(Thresholds {
        weak: (z_eps + (z_eps * z_eps + log_factor).sqrt()) / root_t,
        loose: (2.0 * z_eps + log_factor.sqrt()) / root_t,
        improved: (z_eps + z_delta) / root_t,
    })
}

/// `P(K_T / S^0_T > 1/delta)` for a constant discrepancy of norm `disc_norm`.
///
/// `delta = 1` is admitted; with `disc_norm = 0` the wealth process equals
/// the index and the result is `1/2` for `delta = 1`, `0` otherwise.
pub fn outperformance_probability(disc_norm: f64, horizon: f64, delta: f64) -> Result<f64> {
    if !(disc_norm >= 0.0 && disc_norm.is_finite()) {
        return Err(SimError::Domain(format!(
            "discrepancy norm must be finite and non-negative, got {disc_norm}"
        )));
    }
    check_horizon(horizon)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SimError::Domain(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(probability_from_variance(
        disc_norm * disc_norm * horizon,
        delta,
    ))
}

/// Same probability written in terms of `V = int |disc|^2`, which also
/// covers piecewise-constant schedules.
pub(crate) fn probability_from_variance(v: f64, delta: f64) -> f64 {
    let log_factor = (1.0 / delta).ln();
    if v == 0.0 {
        return if delta == 1.0 { 0.5 } else { 0.0 };
    }
    let s = v.sqrt();
    normal_cdf(0.5 * s - log_factor / s)
}

/// Smallest horizon at which a discrepancy of norm `disc_norm` passes the weak threshold.
pub fn detection_horizon(disc_norm: f64, eps: f64, delta: f64) -> Result<f64> {
    check_unit("epsilon", eps)?;
    check_unit("delta", delta)?;
    if disc_norm.is_nan() || disc_norm <= 0.0 {
        return Err(SimError::Domain(
            "zero discrepancy is never detected".into(),
        ));
    }
    let z = upper_quantile(eps)?;
    let c = z + (z * z + 2.0 * (1.0 / delta).ln()).sqrt();
    Ok((c / disc_norm).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonReport {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon_t: f64,
    pub z_epsilon: f64,
    pub z_delta: f64,
    pub threshold_weak: f64,
    pub threshold_loose: f64,
    pub threshold_improved: f64,
    pub disc_norm: f64,
    pub p_outperform: f64,
    pub verdict: Verdict,
}

/// Report for a given discrepancy norm. A norm exactly at the weak threshold
/// counts as outperforming.
pub fn horizon_report_for_norm(
    disc_norm: f64,
    eps: f64,
    delta: f64,
    horizon: f64,
) -> Result<HorizonReport> {
    let th = detection_thresholds(eps, delta, horizon)?;
    let p = outperformance_probability(disc_norm, horizon, delta)?;
    Ok(HorizonReport {
        epsilon: eps,
        delta,
        horizon_t: horizon,
        z_epsilon: upper_quantile(eps)?,
        z_delta: upper_quantile(delta)?,
        threshold_weak: th.weak,
        threshold_loose: th.loose,
        threshold_improved: th.improved,
        disc_norm,
        p_outperform: p,
        verdict: if disc_norm >= th.weak {
            Verdict::OutperformsWhp
        } else {
            Verdict::ScapmApproxHolds
        },
    })
}

pub fn horizon_report(
    spec: &MarketSpec,
    eps: f64,
    delta: f64,
    horizon: f64,
) -> Result<HorizonReport> {
    let profile = risk_profile(spec)?;
    horizon_report_for_norm(profile.disc_norm(), eps, delta, horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutperformance {
    pub n_paths: usize,
    pub successes: usize,
    pub probability: f64,
    /// 99% Wilson interval around `probability`.
    pub ci99: Interval,
    /// Closed-form probability for the same market and horizon.
    pub closed_form: f64,
}

/// Fraction of simulated paths on which `log K_T - log S^0_T > ln(1/delta)`.
pub fn monte_carlo_outperformance(
    schedule: &Schedule,
    cfg: &SimulationConfig,
    delta: f64,
) -> Result<McOutperformance> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SimError::Domain(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let target = (1.0 / delta).ln();
    let snaps = walk_paths(schedule, cfg, 0..cfg.n_paths, &[cfg.n_steps])?;
    let v = snaps[0][0].disc_sq_integral;
    let successes = snaps
        .iter()
        .filter(|s| s[0].excess_log_wealth() > target)
        .count();
    Ok(McOutperformance {
        n_paths: cfg.n_paths,
        successes,
        probability: successes as f64 / cfg.n_paths as f64,
        ci99: wilson_interval(successes, cfg.n_paths, Z_99),
        closed_form: probability_from_variance(v, delta),
    })
}

/// Monte Carlo summary of `(log K_t - log S^0_t) / int_0^t |disc|^2` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub time: f64,
    /// `int_0^t |disc|^2`.
    pub disc_sq_integral: f64,
    pub mean: f64,
    pub sd: f64,
    /// Predicted standard error of the mean, `1 / sqrt(V n)`.
    pub se_theory: f64,
    /// Predicted standard deviation, `1 / sqrt V`.
    pub sd_theory: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

/// Tracks the outperformance rate, whose almost-sure limit is 1/2 whenever
/// the discrepancy integral diverges, at each checkpoint time.
pub fn asymptotic_ratio_experiment(
    schedule: &Schedule,
    cfg: &SimulationConfig,
    checkpoints: &[f64],
) -> Result<Vec<RatioSummary>> {
    cfg.validate()?;
    let dt = cfg.dt();
    let steps = checkpoints
        .iter()
        .map(|&t| {
            let i = (t / dt).round();
            if t > 0.0 && i >= 1.0 && (i * dt - t).abs() <= 1e-9 * t && i as usize <= cfg.n_steps {
                Ok(i as usize)
            } else {
                Err(SimError::Config(format!(
                    "checkpoint t={t} is not a positive grid time"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let snaps = walk_paths(schedule, cfg, 0..cfg.n_paths, &steps)?;
    let n = cfg.n_paths as f64;
    (0..steps.len())
        .map(|c| {
            let v = snaps[0][c].disc_sq_integral;
            if v <= 0.0 {
                return Err(SimError::Domain(format!(
                    "int |theta - sigma^0|^2 = 0 at t={}: the rate-1/2 limit needs a non-zero discrepancy",
                    checkpoints[c]
                )));
            }
            let mut ratios: Vec<f64> = snaps.iter().map(|s| s[c].excess_log_wealth() / v).collect();
            let (mean, sd) = mean_sd(&ratios);
            ratios.sort_by(f64::total_cmp);
            Ok(RatioSummary {
                time: snaps[0][c].time,
                disc_sq_integral: v,
                mean,
                sd,
                se_theory: 1.0 / (v * n).sqrt(),
                sd_theory: 1.0 / v.sqrt(),
                q05: quantile_sorted(&ratios, 0.05),
                q50: quantile_sorted(&ratios, 0.5),
                q95: quantile_sorted(&ratios, 0.95),
            })
        })
        .collect()
}
