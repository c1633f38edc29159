//! Acceptance experiments.
//!
//! Each criterion is a self-contained experiment with its tolerance fixed
//! here. `Level::Full` runs the documented sizes; `Level::Quick` shrinks path
//! counts (tolerances are expressed in standard errors, so they still apply).

use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::SimError;
use crate::horizon::{
    asymptotic_ratio_experiment, detection_thresholds, monte_carlo_outperformance,
    outperformance_probability,
};
use crate::market::{risk_profile, MarketSpec};
use crate::normal::{inverse_normal_cdf, normal_cdf};
use crate::parallel::with_threads;
use crate::report::{write_terminal_csv, RunManifest};
use crate::rng::PathRng;
use crate::simulation::{simulate_prices, Schedule, SimulationConfig};
use crate::stats::mean_sd;
use crate::strategy::{
    log_wealth_path, max_identity_residual, replication_refinement, simulate_terminal,
    ReplicationScheme,
};

const BASE_SEED: u64 = 0x5CA9_2011;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quick" => Ok(Self::Quick),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown level {other:?} (expected quick or full)")),
        }
    }
}

impl Level {
    fn pick<T>(self, quick: T, full: T) -> T {
        match self {
            Self::Quick => quick,
            Self::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs,
            self.detail
        )
    }
}

fn timed(
    id: u8,
    title: &'static str,
    time_limit: Option<f64>,
    f: impl FnOnce() -> Result<(bool, String), SimError>,
) -> CriterionOutcome {
    let start = Instant::now();
    let result = f();
    let elapsed_secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = time_limit {
        if elapsed_secs > limit {
            passed = false;
            detail.push_str(&format!("; exceeded time limit of {limit}s"));
        }
    }
    CriterionOutcome {
        id,
        title,
        passed,
        detail,
        elapsed_secs,
    }
}

/// The two-asset, two-factor market used throughout the documentation:
/// `theta = (0.3, 0)`, `disc = (0.1, 0)`.
pub fn running_example() -> MarketSpec {
    MarketSpec::new(0.02, vec![0.08, 0.05], vec![vec![0.2, 0.0], vec![0.1, 0.3]])
        .expect("running example is well formed")
}

/// Random viable market with `K <= max_stocks` stocks and `D_b <= K + 1`.
pub fn random_viable_market(rng: &mut PathRng, max_stocks: usize) -> MarketSpec {
    loop {
        let n_assets = 1 + (rng.uniform() * (max_stocks + 1) as f64) as usize;
        let dim = 1 + (rng.uniform() * n_assets as f64) as usize;
        let mut sigma: Vec<Vec<f64>> = (0..n_assets)
            .map(|_| (0..dim).map(|_| 0.8 * rng.uniform() - 0.4).collect())
            .collect();
        for (d, row) in sigma.iter_mut().enumerate().take(dim) {
            row[d] += if row[d] >= 0.0 { 0.3 } else { -0.3 };
        }
        let theta: Vec<f64> = (0..dim).map(|_| rng.uniform() - 0.5).collect();
        let r = 0.05 * rng.uniform();
        let mu = sigma
            .iter()
            .map(|row| r + row.iter().zip(&theta).map(|(s, t)| s * t).sum::<f64>())
            .collect();
        match MarketSpec::new(r, mu, sigma) {
            Ok(m) if m.condition_number() < 1e3 => return m,
            _ => continue,
        }
    }
}

/// Criterion 1: the central identity holds pathwise to rounding.
pub fn central_identity(level: Level) -> CriterionOutcome {
    timed(1, "central identity, pathwise", Some(10.0), || {
        let n_specs = level.pick(20, 100);
        let n_paths = level.pick(50, 100);
        let mut rng = PathRng::new(BASE_SEED, 1);
        let mut worst: f64 = 0.0;
        for i in 0..n_specs {
            let spec = random_viable_market(&mut rng, 8);
            let cfg = SimulationConfig::new(10.0, 1000, n_paths, BASE_SEED + i as u64)?;
            let sched = Schedule::constant(spec.clone());
            let bundle = log_wealth_path(&sched, simulate_prices(&spec, &cfg)?)?;
            worst = worst.max(max_identity_residual(&sched, &bundle)?);
        }
        Ok((
            worst <= 1e-9,
            format!("{n_specs} random markets x {n_paths} paths x 1000 steps, max |residual| = {worst:.3e} (limit 1e-9)"),
        ))
    })
}

/// Criterion 2: `(log K_t - log S^0_t) / (|disc|^2 t)` has mean 1/2 and
/// spread `1 / sqrt(|disc|^2 t)`.
pub fn asymptotic_rate(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(2, "asymptotic outperformance rate 1/2", Some(120.0), || {
        let profile = risk_profile(spec)?;
        if profile.disc_norm_sq == 0.0 {
            return Ok((
                true,
                "skipped: zero discrepancy, the rate statement is vacuous".into(),
            ));
        }
        let n_paths = level.pick(2_000, 10_000);
        let n_steps = level.pick(100, 1000);
        let unit = 1.0 / profile.disc_norm_sq;
        let cfg = SimulationConfig::new(1000.0 * unit, n_steps, n_paths, BASE_SEED + 2)?;
        let times = [10.0 * unit, 100.0 * unit, 1000.0 * unit];
        let out = asymptotic_ratio_experiment(&Schedule::constant(spec.clone()), &cfg, &times)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for s in &out {
            let mean_ok = (s.mean - 0.5).abs() <= 4.0 * s.se_theory;
            let sd_ok = (s.sd / s.sd_theory - 1.0).abs() <= 0.1;
            ok &= mean_ok && sd_ok;
            parts.push(format!(
                "V={:.0}: mean {:.5} (|dev|/SE {:.2}), sd {:.5} vs {:.5}",
                s.disc_sq_integral,
                s.mean,
                (s.mean - 0.5).abs() / s.se_theory,
                s.sd,
                s.sd_theory
            ));
        }
        Ok((ok, format!("{n_paths} paths; {}", parts.join("; "))))
    })
}

/// Criterion 3: at `|disc|` equal to the weak threshold the outperformance
/// probability is `1 - eps`, in closed form and by simulation.
pub fn finite_horizon_dichotomy(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(
        3,
        "finite-horizon dichotomy at the weak threshold",
        Some(120.0),
        || {
            let grid = [0.5, 0.1, 0.025];
            let horizons = [25.0, 100.0, 400.0];
            let n_paths = level.pick(10_000, 100_000);
            let sigma = spec.sigma_rows();
            let profile = risk_profile(spec)?;
            let direction: Vec<f64> = if profile.disc_norm_sq > 0.0 {
                profile
                    .disc
                    .iter()
                    .map(|d| d / profile.disc_norm())
                    .collect()
            } else {
                (0..spec.dim())
                    .map(|d| if d == 0 { 1.0 } else { 0.0 })
                    .collect()
            };
            let mut worst_closed: f64 = 0.0;
            let mut misses = Vec::new();
            let mut case = 0u64;
            for &eps in &grid {
                for &delta in &grid {
                    for &t in &horizons {
                        case += 1;
                        let th = detection_thresholds(eps, delta, t)?;
                        let p = outperformance_probability(th.weak, t, delta)?;
                        worst_closed = worst_closed.max((p - (1.0 - eps)).abs());

                        let disc: Vec<f64> = direction.iter().map(|u| u * th.weak).collect();
                        let market = MarketSpec::with_discrepancy(spec.r(), sigma.clone(), &disc)?;
                        let cfg = SimulationConfig::new(t, 1, n_paths, BASE_SEED + 300 + case)?;
                        let mc =
                            monte_carlo_outperformance(&Schedule::constant(market), &cfg, delta)?;
                        if !mc.ci99.contains(1.0 - eps) {
                            misses.push(format!(
                                "(eps={eps}, delta={delta}, T={t}): {:.5} not covering {}",
                                mc.probability,
                                1.0 - eps
                            ));
                        }
                    }
                }
            }
            let ok = worst_closed <= 1e-9 && misses.is_empty();
            Ok((
            ok,
            format!(
                "27 cases, closed-form max |p - (1-eps)| = {worst_closed:.2e}; MC ({n_paths} paths) 99% CI misses: {}",
                if misses.is_empty() { "none".to_string() } else { misses.join(", ") }
            ),
        ))
        },
    )
}

/// Criterion 4: frozen threshold values.
pub fn threshold_arithmetic() -> CriterionOutcome {
    timed(4, "threshold arithmetic", None, || {
        let weak = detection_thresholds(0.5, 0.5, 100.0)?.weak;
        let improved = detection_thresholds(0.025, 0.025, 400.0)?.improved;
        let ok = (weak - 0.117_741_0).abs() <= 1e-6 && (improved - 0.195_996_4).abs() <= 1e-6;
        Ok((
            ok,
            format!("weak(0.5, 0.5, 100) = {weak:.7} (0.1177410); improved(0.025, 0.025, 400) = {improved:.7} (0.1959964)"),
        ))
    })
}

/// Criterion 5: under the simplified CAPM the wealth process is the index, bit for bit.
pub fn scapm_fixed_point(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(5, "simplified CAPM fixed point", None, || {
        let market = MarketSpec::scapm(spec.r(), spec.sigma_rows())?;
        let profile = risk_profile(&market)?;
        let disc_zero = profile.disc.iter().all(|&d| d == 0.0);
        let worst_resid = profile
            .scapm_residuals
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let n_paths = level.pick(200, 1000);
        let cfg = SimulationConfig::new(10.0, 200, n_paths, BASE_SEED + 5)?;
        let sched = Schedule::constant(market.clone());
        let bundle = log_wealth_path(&sched, simulate_prices(&market, &cfg)?)?;
        let mismatches = bundle
            .paths
            .iter()
            .map(|p| {
                let log_k = p.log_k.as_ref().expect("filled");
                (0..log_k.len())
                    .filter(|&i| log_k[i].to_bits() != p.log_s.get(i, 0).to_bits())
                    .count()
            })
            .sum::<usize>();
        Ok((
            disc_zero && worst_resid <= 1e-12 && mismatches == 0,
            format!(
                "disc = 0: {disc_zero}; max |SCAPM residual| = {worst_resid:.1e}; log_K != log_S0 at {mismatches} of {} grid points",
                n_paths * 201
            ),
        ))
    })
}

/// Criterion 6: the growth rate of security k is the optimal rate minus its deficit.
pub fn growth_identity(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(6, "growth rate = optimal rate - deficit", None, || {
        let profile = risk_profile(spec)?;
        let n_paths = level.pick(10_000, 100_000);
        let t = 10.0;
        let cfg = SimulationConfig::new(t, 10, n_paths, BASE_SEED + 6)?;
        let terminal = simulate_terminal(&Schedule::constant(spec.clone()), &cfg)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for k in 0..spec.n_assets() {
            let rates: Vec<f64> = terminal.iter().map(|s| s.log_s[k] / t).collect();
            let (mean, sd) = mean_sd(&rates);
            let se = sd / (n_paths as f64).sqrt();
            let predicted = profile.optimal_growth_rate - profile.deficits[k];
            let z = (mean - predicted).abs() / se;
            ok &= z <= 4.0;
            parts.push(format!(
                "{}: {mean:.5} vs {predicted:.5} ({z:.2} SE)",
                spec.label(k)
            ));
        }
        let rates: Vec<f64> = terminal.iter().map(|s| s.log_k / t).collect();
        let (mean, sd) = mean_sd(&rates);
        let z = (mean - profile.optimal_growth_rate).abs() / (sd / (n_paths as f64).sqrt());
        ok &= z <= 4.0;
        parts.push(format!(
            "K: {mean:.5} vs {:.5} ({z:.2} SE)",
            profile.optimal_growth_rate
        ));
        Ok((
            ok,
            format!("{n_paths} paths, T = {t}; {}", parts.join("; ")),
        ))
    })
}

/// Criterion 7: discretised replication converges to the analytic wealth at first order.
pub fn replication_convergence(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(7, "replication converges at first order", None, || {
        let fine_steps = level.pick(1 << 12, 1 << 14);
        let cfg = SimulationConfig::new(1.0, fine_steps, 100, BASE_SEED + 7)?;
        let sched = Schedule::constant(spec.clone());
        let errors = |scheme| -> Result<Vec<f64>, SimError> {
            Ok(replication_refinement(&sched, &cfg, 3, scheme)?
                .iter()
                .map(|o| o.mean_max_discrepancy)
                .collect())
        };
        // Finest first; ratios are coarse / fine.
        let m = errors(ReplicationScheme::Milstein)?;
        let e = errors(ReplicationScheme::Euler)?;
        let ratios = |v: &[f64]| (v[1] / v[0], v[2] / v[1]);
        let (m1, m2) = ratios(&m);
        let (e1, e2) = ratios(&e);
        let negligible = m.iter().all(|&x| x < 1e-13);
        let ok = negligible || ((1.5..=2.5).contains(&m1) && (1.5..=2.5).contains(&m2));
        Ok((
            ok,
            format!(
                "steps {}/{}/{}: Milstein mean max error {:.3e}/{:.3e}/{:.3e}, ratios {m2:.3} and {m1:.3} (need [1.5, 2.5]); Euler ratios {e2:.3} and {e1:.3} (half order, informational)",
                fine_steps >> 2, fine_steps >> 1, fine_steps, m[2], m[1], m[0]
            ),
        ))
    })
}

/// Renders the terminal CSV for `spec` on a pool of `threads` workers.
pub fn render_simulation_csv(
    spec: &MarketSpec,
    cfg: &SimulationConfig,
    threads: usize,
) -> Result<Vec<u8>, SimError> {
    let mut manifest = RunManifest::new("simulate");
    manifest.simulation = Some(*cfg);
    manifest.seed = Some(cfg.seed);
    let sched = Schedule::constant(spec.clone());
    with_threads(threads, || {
        let mut buf = Vec::new();
        write_terminal_csv(&sched, cfg, &manifest, &mut buf).map_err(|e| match e {
            crate::report::ReportError::Sim(s) => s,
            other => SimError::Config(other.to_string()),
        })?;
        Ok(buf)
    })
}

/// Criterion 8: identical runs, and runs on different thread counts, give identical bytes.
pub fn determinism(spec: &MarketSpec, level: Level) -> CriterionOutcome {
    timed(8, "byte-identical simulation output", None, || {
        let n_paths = level.pick(500, 2_000);
        let cfg = SimulationConfig::new(5.0, 100, n_paths, BASE_SEED + 8)?;
        let one = render_simulation_csv(spec, &cfg, 1)?;
        let again = render_simulation_csv(spec, &cfg, 1)?;
        let many = render_simulation_csv(spec, &cfg, 4)?;
        Ok((
            one == again && one == many,
            format!(
                "{} bytes; repeat identical: {}; 1 vs 4 threads identical: {}",
                one.len(),
                one == again,
                one == many
            ),
        ))
    })
}

/// The documented probability grid: `{1, 2, 5} x 10^-e` for `e = 1..=6`, their complements and 1/2.
pub fn quantile_grid() -> Vec<f64> {
    let mut ps = vec![0.5];
    for e in 1..=6 {
        for m in [1.0, 2.0, 5.0] {
            let p = m * 10f64.powi(-e);
            ps.push(p);
            ps.push(1.0 - p);
        }
    }
    ps.sort_by(f64::total_cmp);
    ps
}

/// Criterion 9: `|Phi(Phi^{-1}(p)) - p| <= 1e-9` on the grid.
pub fn quantile_quality() -> CriterionOutcome {
    timed(9, "normal quantile accuracy", None, || {
        let mut worst: f64 = 0.0;
        for p in quantile_grid() {
            let q = inverse_normal_cdf(p)?;
            worst = worst.max((normal_cdf(q) - p).abs());
        }
        Ok((
            worst <= 1e-9,
            format!(
                "max |Phi(q(p)) - p| = {worst:.2e} over {} points",
                quantile_grid().len()
            ),
        ))
    })
}

/// Runs every criterion against `spec` (the running example in the acceptance suite).
pub fn run_all(spec: &MarketSpec, level: Level) -> Vec<CriterionOutcome> {
    vec![
        central_identity(level),
        asymptotic_rate(spec, level),
        finite_horizon_dichotomy(spec, level),
        threshold_arithmetic(),
        scapm_fixed_point(spec, level),
        growth_identity(spec, level),
        replication_convergence(spec, level),
        determinism(spec, level),
        quantile_quality(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_parses() {
        assert_eq!("quick".parse::<Level>(), Ok(Level::Quick));
        assert_eq!("full".parse::<Level>(), Ok(Level::Full));
        assert!("fast".parse::<Level>().is_err());
    }

    #[test]
    fn random_markets_are_viable_and_bounded() {
        let mut rng = PathRng::new(1, 1);
        for _ in 0..200 {
            let m = random_viable_market(&mut rng, 8);
            assert!(m.n_assets() <= 9 && m.dim() <= m.n_assets());
            assert!(risk_profile(&m).is_ok());
        }
    }

    #[test]
    fn cheap_criteria_pass() {
        assert!(threshold_arithmetic().passed);
        assert!(quantile_quality().passed);
        let spec = running_example();
        let r = scapm_fixed_point(&spec, Level::Quick);
        assert!(r.passed, "{}", r.line());
    }

    #[test]
    fn quick_rate_skips_zero_discrepancy() {
        let spec = MarketSpec::scapm(0.01, vec![vec![0.2]]).unwrap();
        let r = asymptotic_rate(&spec, Level::Quick);
        assert!(r.passed && r.detail.starts_with("skipped"));
    }
}
