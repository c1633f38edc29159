//! The index-beating wealth process and its pathwise checks.
//!
//! The wealth process is the bank account times the density of the physical
//! measure against the risk-neutral one, which in log form is
//! `log K_t = int r + int theta . dW + 1/2 int |theta|^2`. Against the index
//! it satisfies, path by path,
//! `log K_t - log S^0_t = 1/2 int |disc|^2 + int disc . dW`,
//! with `disc = theta - sigma^0`.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::market::{dot, norm_sq, replication_weights, solve_theta, MarketSpec};
use crate::parallel::map_indices;
use crate::simulation::{
    IncrementStream, PathBundle, PricePlan, PriceStep, RowMatrix, Schedule, SimulationConfig,
};

/// Per-segment wealth coefficients.
#[derive(Debug, Clone)]
pub(crate) struct WealthStep {
    theta: Vec<f64>,
    disc: Vec<f64>,
    /// `(r + |theta|^2 / 2) dt`.
    drift_dt: f64,
    /// `|disc|^2 dt`.
    disc_sq_dt: f64,
    /// Zero discrepancy: the wealth process is the index itself.
    tracks_index: bool,
}

impl WealthStep {
    pub(crate) fn new(market: &MarketSpec, dt: f64) -> Result<Self> {
        let theta = solve_theta(market)?;
        let disc: Vec<f64> = theta
            .iter()
            .zip(market.index_volatility())
            .map(|(t, s)| t - s)
            .collect();
        Ok(Self {
            drift_dt: (market.r() + 0.5 * norm_sq(&theta)) * dt,
            disc_sq_dt: norm_sq(&disc) * dt,
            tracks_index: disc.iter().all(|&d| d == 0.0),
            theta,
            disc,
        })
    }
}

/// Running state of one path: prices, wealth and the two terms of the
/// central identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSnapshot {
    pub step: usize,
    pub time: f64,
    pub log_s: Vec<f64>,
    pub log_k: f64,
    pub log_r: f64,
    /// `int_0^t |disc_s|^2 ds`.
    pub disc_sq_integral: f64,
    /// `int_0^t disc_s . dW_s`.
    pub disc_dot_w: f64,
    /// Largest central-identity residual seen on the grid so far.
    pub max_abs_residual: f64,
}

impl PathSnapshot {
    fn start(n_assets: usize) -> Self {
        Self {
            step: 0,
            time: 0.0,
            log_s: vec![0.0; n_assets],
            log_k: 0.0,
            log_r: 0.0,
            disc_sq_integral: 0.0,
            disc_dot_w: 0.0,
            max_abs_residual: 0.0,
        }
    }

    /// `log K_t - log S^0_t`.
    pub fn excess_log_wealth(&self) -> f64 {
        self.log_k - self.log_s[0]
    }

    pub fn identity_residual(&self) -> f64 {
        self.excess_log_wealth() - (0.5 * self.disc_sq_integral + self.disc_dot_w)
    }

    fn advance(&mut self, price: &PriceStep, wealth: &WealthStep, dw: &[f64]) {
        if wealth.tracks_index {
            self.log_k += price.increment(0, dw);
        } else {
            self.log_k += wealth.drift_dt + dot(&wealth.theta, dw);
        }
        price.advance(&mut self.log_s, dw);
        self.log_r += price.r_dt();
        self.disc_sq_integral += wealth.disc_sq_dt;
        self.disc_dot_w += dot(&wealth.disc, dw);
        self.max_abs_residual = self.max_abs_residual.max(self.identity_residual().abs());
    }
}

/// Price and wealth coefficients of a schedule resolved on a grid.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    prices: PricePlan,
    wealth: Vec<WealthStep>,
    segment_of_step: Vec<usize>,
    n_assets: usize,
    dim: usize,
}

impl Plan {
    pub(crate) fn new(schedule: &Schedule, cfg: &SimulationConfig) -> Result<Self> {
        let prices = PricePlan::new(schedule, cfg)?;
        let wealth = schedule
            .segments()
            .iter()
            .map(|s| WealthStep::new(&s.market, cfg.dt()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            segment_of_step: prices.segment_of_steps(),
            prices,
            wealth,
            n_assets: schedule.n_assets(),
            dim: schedule.dim(),
        })
    }

    fn for_bundle(schedule: &Schedule, bundle: &PathBundle) -> Result<Self> {
        if schedule.n_assets() != bundle.n_assets || schedule.dim() != bundle.dim {
            return Err(SimError::Mismatch(format!(
                "market is {}x{}, bundle is {}x{}",
                schedule.n_assets(),
                schedule.dim(),
                bundle.n_assets,
                bundle.dim
            )));
        }
        let plan = Self::new(schedule, &bundle.config)?;
        if plan.segment_of_step != bundle.segment_of_step {
            return Err(SimError::Mismatch(
                "schedule segments do not match the bundle's grid".into(),
            ));
        }
        Ok(plan)
    }

    fn step(&self, snap: &mut PathSnapshot, i: usize, dw: &[f64]) {
        let seg = self.segment_of_step[i];
        snap.advance(&self.prices.steps[seg], &self.wealth[seg], dw);
        snap.step = i + 1;
    }
}

/// Fills `log_k` on every path of `bundle` from the same increments that
/// drove the prices.
pub fn log_wealth_path(schedule: &Schedule, mut bundle: PathBundle) -> Result<PathBundle> {
    let plan = Plan::for_bundle(schedule, &bundle)?;
    for path in &mut bundle.paths {
        let mut snap = PathSnapshot::start(plan.n_assets);
        let mut log_k = Vec::with_capacity(bundle.times.len());
        log_k.push(0.0);
        for i in 0..path.dw.rows() {
            plan.step(&mut snap, i, path.dw.row(i));
            log_k.push(snap.log_k);
        }
        path.log_k = Some(log_k);
    }
    Ok(bundle)
}

/// Per-path, per-time residual of the central identity
/// `[log K - log S^0] - [1/2 int |disc|^2 + int disc . dW]`.
pub fn central_identity_residual(
    schedule: &Schedule,
    bundle: &PathBundle,
) -> Result<Vec<Vec<f64>>> {
    let plan = Plan::for_bundle(schedule, bundle)?;
    bundle
        .paths
        .iter()
        .map(|path| {
            let log_k = path.log_k.as_ref().ok_or_else(|| {
                SimError::Mismatch(format!("path {} has no log wealth", path.index))
            })?;
            let mut quad = 0.0;
            let mut mart = 0.0;
            let mut out = Vec::with_capacity(log_k.len());
            out.push(log_k[0] - path.log_s.get(0, 0));
            for i in 0..path.dw.rows() {
                let w = &plan.wealth[plan.segment_of_step[i]];
                quad += w.disc_sq_dt;
                mart += dot(&w.disc, path.dw.row(i));
                out.push(log_k[i + 1] - path.log_s.get(i + 1, 0) - (0.5 * quad + mart));
            }
            Ok(out)
        })
        .collect()
}

/// Largest absolute central-identity residual over all paths and times.
pub fn max_identity_residual(schedule: &Schedule, bundle: &PathBundle) -> Result<f64> {
    Ok(central_identity_residual(schedule, bundle)?
        .iter()
        .flatten()
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// Streams paths `paths` without storing them and records a snapshot at each
/// requested grid step (`0..=n_steps`, ascending).
pub fn walk_paths(
    schedule: &Schedule,
    cfg: &SimulationConfig,
    paths: Range<usize>,
    checkpoints: &[usize],
) -> Result<Vec<Vec<PathSnapshot>>> {
    let plan = Plan::new(schedule, cfg)?;
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.last().is_some_and(|&c| c > cfg.n_steps)
    {
        return Err(SimError::Config(format!(
            "checkpoints must be strictly increasing grid steps in 0..={}",
            cfg.n_steps
        )));
    }
    if paths.end > cfg.n_paths {
        return Err(SimError::Config(format!(
            "path range {paths:?} exceeds {} paths",
            cfg.n_paths
        )));
    }
    let start = paths.start;
    Ok(map_indices(paths.len(), |j| {
        let mut stream = IncrementStream::new(cfg, start + j);
        let mut dw = vec![0.0; plan.dim];
        let mut snap = PathSnapshot::start(plan.n_assets);
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut next = checkpoints.iter().peekable();
        if next.peek() == Some(&&0) {
            out.push(snap.clone());
            next.next();
        }
        for i in 0..cfg.n_steps {
            if next.peek().is_none() {
                break;
            }
            stream.next_row(&mut dw);
            plan.step(&mut snap, i, &dw);
            if next.peek() == Some(&&(i + 1)) {
                snap.time = cfg.time(i + 1);
                out.push(snap.clone());
                next.next();
            }
        }
        out
    }))
}

/// Terminal snapshot of every path, streamed.
pub fn simulate_terminal(schedule: &Schedule, cfg: &SimulationConfig) -> Result<Vec<PathSnapshot>> {
    Ok(walk_paths(schedule, cfg, 0..cfg.n_paths, &[cfg.n_steps])?
        .into_iter()
        .map(|mut v| v.pop().expect("one checkpoint"))
        .collect())
}

/// Time discretisation of the constant-fraction wealth SDE
/// `dV/V = (r + pi . (mu - r 1)) dt + pi^T sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReplicationScheme {
    /// `V' = V [1 + a dt + b . dW]`; strong order 1/2.
    Euler,
    /// Euler plus the Ito correction `1/2 ((b . dW)^2 - |b|^2 dt)`; strong order 1.
    Milstein,
}

#[derive(Debug, Clone)]
struct ReplicationStep {
    /// `(r + pi . (mu - r 1)) dt`.
    growth_dt: f64,
    /// `sigma^T pi`.
    vol: Vec<f64>,
    vol_sq_dt: f64,
}

impl ReplicationStep {
    fn new(market: &MarketSpec, dt: f64) -> Result<Self> {
        let pi = replication_weights(market)?;
        let excess = market.excess_returns();
        let vol: Vec<f64> = (0..market.dim())
            .map(|d| {
                (0..market.n_assets())
                    .map(|k| pi[k] * market.sigma_row(k)[d])
                    .sum()
            })
            .collect();
        Ok(Self {
            growth_dt: (market.r() + dot(&pi, &excess)) * dt,
            vol_sq_dt: norm_sq(&vol) * dt,
            vol,
        })
    }

    /// Log gross return over one step, `None` when wealth would not stay positive.
    fn log_return(&self, dw: &[f64], scheme: ReplicationScheme) -> Option<f64> {
        let x = dot(&self.vol, dw);
        let gross_minus_one = match scheme {
            ReplicationScheme::Euler => self.growth_dt + x,
            ReplicationScheme::Milstein => self.growth_dt + x + 0.5 * (x * x - self.vol_sq_dt),
        };
        (gross_minus_one > -1.0).then(|| gross_minus_one.ln_1p())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub scheme: ReplicationScheme,
    /// Per path: `max_t |log V_t - log K_t|`, `None` when the discretised wealth hit zero.
    pub per_path_max: Vec<Option<f64>>,
    pub censored: usize,
    /// Largest discrepancy over the uncensored paths.
    pub max_discrepancy: f64,
    /// Mean over uncensored paths of the per-path maximum.
    pub mean_max_discrepancy: f64,
}

impl ReplicationOutcome {
    fn from_paths(scheme: ReplicationScheme, per_path_max: Vec<Option<f64>>) -> Self {
        let kept: Vec<f64> = per_path_max.iter().flatten().copied().collect();
        Self {
            scheme,
            censored: per_path_max.len() - kept.len(),
            max_discrepancy: kept.iter().copied().fold(0.0, f64::max),
            mean_max_discrepancy: if kept.is_empty() {
                f64::NAN
            } else {
                kept.iter().sum::<f64>() / kept.len() as f64
            },
            per_path_max,
        }
    }
}

/// Discretised self-financing replication of the wealth process with
/// constant fractions `pi` (see [`replication_weights`]), compared with the
/// analytic `log K` along each path of a bundle.
pub fn replicate_and_compare(
    schedule: &Schedule,
    bundle: &PathBundle,
    scheme: ReplicationScheme,
) -> Result<ReplicationOutcome> {
    let plan = Plan::for_bundle(schedule, bundle)?;
    let steps = replication_steps(schedule, bundle.config.dt())?;
    let per_path = bundle
        .paths
        .iter()
        .map(|path| {
            let log_k = path.log_k.as_ref().ok_or_else(|| {
                SimError::Mismatch(format!("path {} has no log wealth", path.index))
            })?;
            Ok(replicate_one(
                &plan.segment_of_step,
                &steps,
                &path.dw,
                scheme,
                |i| log_k[i],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationOutcome::from_paths(scheme, per_path))
}

fn replication_steps(schedule: &Schedule, dt: f64) -> Result<Vec<ReplicationStep>> {
    schedule
        .segments()
        .iter()
        .map(|s| ReplicationStep::new(&s.market, dt))
        .collect()
}

fn replicate_one(
    segment_of_step: &[usize],
    steps: &[ReplicationStep],
    dw: &RowMatrix,
    scheme: ReplicationScheme,
    log_k: impl Fn(usize) -> f64,
) -> Option<f64> {
    let mut log_v = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..dw.rows() {
        log_v += steps[segment_of_step[i]].log_return(dw.row(i), scheme)?;
        worst = worst.max((log_v - log_k(i + 1)).abs());
    }
    Some(worst)
}

/// Replication error at successively coarser grids driven by the same
/// Brownian path: level `j` sums blocks of `2^j` fine increments. Returns one
/// outcome per level, finest first.
pub fn replication_refinement(
    schedule: &Schedule,
    fine: &SimulationConfig,
    levels: usize,
    scheme: ReplicationScheme,
) -> Result<Vec<ReplicationOutcome>> {
    let block = 1usize << levels.saturating_sub(1);
    if levels == 0 || !fine.n_steps.is_multiple_of(block) {
        return Err(SimError::Config(format!(
            "{} fine steps cannot be coarsened over {levels} levels",
            fine.n_steps
        )));
    }
    let dim = schedule.dim();
    let configs: Vec<SimulationConfig> = (0..levels)
        .map(|j| SimulationConfig {
            n_steps: fine.n_steps >> j,
            ..*fine
        })
        .collect();
    let plans = configs
        .iter()
        .map(|c| Plan::new(schedule, c))
        .collect::<Result<Vec<_>>>()?;
    let steps = configs
        .iter()
        .map(|c| replication_steps(schedule, c.dt()))
        .collect::<Result<Vec<_>>>()?;

    let per_path: Vec<Vec<Option<f64>>> = map_indices(fine.n_paths, |p| {
        let mut dw = RowMatrix::zeros(fine.n_steps, dim);
        let mut stream = IncrementStream::new(fine, p);
        for i in 0..fine.n_steps {
            stream.next_row(dw.row_mut(i));
        }
        let mut out = Vec::with_capacity(levels);
        for j in 0..levels {
            if j > 0 {
                dw = coarsen(&dw);
            }
            let plan = &plans[j];
            let mut snap = PathSnapshot::start(plan.n_assets);
            let mut log_k = Vec::with_capacity(dw.rows() + 1);
            log_k.push(0.0);
            for i in 0..dw.rows() {
                plan.step(&mut snap, i, dw.row(i));
                log_k.push(snap.log_k);
            }
            out.push(replicate_one(
                &plan.segment_of_step,
                &steps[j],
                &dw,
                scheme,
                |i| log_k[i],
            ));
        }
        out
    });
    Ok((0..levels)
        .map(|j| ReplicationOutcome::from_paths(scheme, per_path.iter().map(|v| v[j]).collect()))
        .collect())
}

/// Sums consecutive pairs of rows.
fn coarsen(dw: &RowMatrix) -> RowMatrix {
    let cols = dw.cols();
    let mut out = RowMatrix::zeros(dw.rows() / 2, cols);
    for i in 0..out.rows() {
        for (d, x) in out.row_mut(i).iter_mut().enumerate() {
            *x = dw.get(2 * i, d) + dw.get(2 * i + 1, d);
        }
    }
    out
}

/// Iterated-logarithm normaliser `sqrt(2 V ln ln V)`; needs `V > e`.
pub fn lil_normalizer(v: f64) -> Result<f64> {
    if v.is_nan() || v <= std::f64::consts::E {
        return Err(SimError::Domain(format!(
            "iterated-logarithm scale needs int |disc|^2 > e, got {v}"
        )));
    }
    Ok((2.0 * v * v.ln().ln()).sqrt())
}

/// `[log K_t - log S^0_t - V_t / 2] / sqrt(2 V_t ln ln V_t)` per path, with
/// `V_t = int_0^t |disc_s|^2 ds` and `t` a grid time.
pub fn lil_statistic(schedule: &Schedule, bundle: &PathBundle, t: f64) -> Result<Vec<f64>> {
    let plan = Plan::for_bundle(schedule, bundle)?;
    let i = bundle
        .time_index(t)
        .ok_or_else(|| SimError::Config(format!("t={t} is not a grid time")))?;
    let v: f64 = plan.segment_of_step[..i]
        .iter()
        .map(|&s| plan.wealth[s].disc_sq_dt)
        .sum();
    let scale = lil_normalizer(v)?;
    bundle
        .paths
        .iter()
        .map(|path| {
            let log_k = path.log_k.as_ref().ok_or_else(|| {
                SimError::Mismatch(format!("path {} has no log wealth", path.index))
            })?;
            Ok((log_k[i] - path.log_s.get(i, 0) - 0.5 * v) / scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{schedule_simulate, simulate_prices, Segment};

    fn running_example() -> MarketSpec {
        MarketSpec::new(0.02, vec![0.08, 0.05], vec![vec![0.2, 0.0], vec![0.1, 0.3]]).unwrap()
    }

    fn wealth_bundle(spec: &MarketSpec, cfg: &SimulationConfig) -> PathBundle {
        let sched = Schedule::constant(spec.clone());
        log_wealth_path(&sched, simulate_prices(spec, cfg).unwrap()).unwrap()
    }

    #[test]
    fn zero_price_of_risk_gives_bank_account() {
        let spec =
            MarketSpec::new(0.03, vec![0.03, 0.03], vec![vec![0.2, 0.0], vec![0.1, 0.3]]).unwrap();
        let cfg = SimulationConfig::new(5.0, 50, 4, 1).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        for p in &b.paths {
            assert_eq!(p.log_k.as_ref().unwrap(), &b.log_r);
        }
    }

    #[test]
    fn zero_discrepancy_wealth_is_the_index_bitwise() {
        let spec = MarketSpec::scapm(0.02, vec![vec![0.2, 0.05], vec![0.1, 0.3], vec![-0.1, 0.2]])
            .unwrap();
        let cfg = SimulationConfig::new(10.0, 200, 8, 3).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        for p in &b.paths {
            let log_k = p.log_k.as_ref().unwrap();
            for (i, k) in log_k.iter().enumerate() {
                assert_eq!(k.to_bits(), p.log_s.get(i, 0).to_bits());
            }
        }
        let res = central_identity_residual(&Schedule::constant(spec), &b).unwrap();
        assert!(res.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn central_identity_holds_on_running_example() {
        let spec = running_example();
        let cfg = SimulationConfig::new(50.0, 1000, 20, 8).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let worst = max_identity_residual(&Schedule::constant(spec), &b).unwrap();
        assert!(worst <= 1e-9, "{worst}");
    }

    #[test]
    fn central_identity_holds_across_schedule_segments() {
        // disc = (0.1, 0) then (0, 0.2).
        let sigma = vec![vec![0.2, 0.0], vec![0.1, 0.3]];
        let a = MarketSpec::with_discrepancy(0.02, sigma.clone(), &[0.1, 0.0]).unwrap();
        let b = MarketSpec::with_discrepancy(0.01, sigma, &[0.0, 0.2]).unwrap();
        let sched = Schedule::new(vec![
            Segment {
                duration: 5.0,
                market: a,
            },
            Segment {
                duration: 5.0,
                market: b,
            },
        ])
        .unwrap();
        let cfg = SimulationConfig::new(10.0, 400, 10, 4).unwrap();
        let bundle = log_wealth_path(&sched, schedule_simulate(&sched, &cfg).unwrap()).unwrap();
        assert!(max_identity_residual(&sched, &bundle).unwrap() <= 1e-9);

        // Piecewise integral oracle: 0.01 * 5 + 0.04 * 5.
        let snaps = walk_paths(&sched, &cfg, 0..1, &[200, 400]).unwrap();
        assert!((snaps[0][0].disc_sq_integral - 0.05).abs() < 1e-12);
        assert!((snaps[0][1].disc_sq_integral - 0.25).abs() < 1e-12);
    }

    #[test]
    fn streamed_paths_match_stored_bundle() {
        let spec = running_example();
        let cfg = SimulationConfig::new(2.0, 64, 6, 21).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let sched = Schedule::constant(spec);
        let snaps = walk_paths(&sched, &cfg, 2..6, &[0, 32, 64]).unwrap();
        for (j, s) in snaps.iter().enumerate() {
            let p = &b.paths[2 + j];
            assert_eq!(s[0].log_k, 0.0);
            assert_eq!(s[1].log_k, p.log_k.as_ref().unwrap()[32]);
            assert_eq!(s[2].log_s, p.log_s.row(64));
            assert_eq!(s[2].log_r, b.log_r[64]);
            assert_eq!(s[2].time, 2.0);
        }
        assert!(walk_paths(&sched, &cfg, 0..7, &[64]).is_err());
        assert!(walk_paths(&sched, &cfg, 0..1, &[32, 32]).is_err());
    }

    #[test]
    fn mismatched_bundle_is_rejected() {
        let cfg = SimulationConfig::new(1.0, 10, 2, 0).unwrap();
        let b = simulate_prices(&running_example(), &cfg).unwrap();
        let other = MarketSpec::new(0.0, vec![0.1, 0.1], vec![vec![0.2], vec![0.1]]).unwrap();
        assert!(matches!(
            log_wealth_path(&Schedule::constant(other), b.clone()),
            Err(SimError::Mismatch(_))
        ));
        assert!(matches!(
            central_identity_residual(&Schedule::constant(running_example()), &b),
            Err(SimError::Mismatch(_))
        ));
    }

    #[test]
    fn replication_with_zero_theta_is_bank_account() {
        let spec =
            MarketSpec::new(0.05, vec![0.05, 0.05], vec![vec![0.2, 0.0], vec![0.1, 0.3]]).unwrap();
        let n = 256;
        let cfg = SimulationConfig::new(1.0, n, 3, 2).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let out =
            replicate_and_compare(&Schedule::constant(spec), &b, ReplicationScheme::Euler).unwrap();
        assert_eq!(out.censored, 0);
        // ln(1 + r dt) - r dt ~ -(r dt)^2 / 2 per step.
        let dt = cfg.dt();
        let bound = n as f64 * (0.05 * dt).powi(2);
        assert!(out.max_discrepancy <= bound, "{}", out.max_discrepancy);
    }

    #[test]
    fn replication_converges_at_scheme_order() {
        let sched = Schedule::constant(running_example());
        let fine = SimulationConfig::new(1.0, 1 << 12, 100, 31).unwrap();
        let ratios = |scheme| {
            let out = replication_refinement(&sched, &fine, 3, scheme).unwrap();
            let e: Vec<f64> = out.iter().map(|o| o.mean_max_discrepancy).collect();
            (e[1] / e[0], e[2] / e[1])
        };
        let (m1, m2) = ratios(ReplicationScheme::Milstein);
        assert!(
            (1.5..=2.5).contains(&m1) && (1.5..=2.5).contains(&m2),
            "{m1} {m2}"
        );
        // Euler is half order: halving dt shrinks the error by about sqrt 2.
        let (e1, e2) = ratios(ReplicationScheme::Euler);
        assert!(
            (1.2..=1.65).contains(&e1) && (1.2..=1.65).contains(&e2),
            "{e1} {e2}"
        );
    }

    #[test]
    fn replication_of_running_example_is_close() {
        let spec = running_example();
        let cfg = SimulationConfig::new(1.0, 1 << 14, 10, 5).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let sched = Schedule::constant(spec);
        let theta_sq = 0.09;
        for scheme in [ReplicationScheme::Euler, ReplicationScheme::Milstein] {
            let out = replicate_and_compare(&sched, &b, scheme).unwrap();
            assert!(
                out.mean_max_discrepancy < 1e-2 * theta_sq,
                "{scheme:?}: {out:?}"
            );
        }
    }

    #[test]
    fn coarse_euler_grid_censors_ruined_paths() {
        // Index only, theta = 1, pi = 5: with |theta|^2 dt = 1 an Euler step
        // ruins the portfolio with probability P(Z < -2).
        let spec = MarketSpec::new(0.0, vec![0.2], vec![vec![0.2]]).unwrap();
        let cfg = SimulationConfig::new(4.0, 4, 200, 1).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let out =
            replicate_and_compare(&Schedule::constant(spec), &b, ReplicationScheme::Euler).unwrap();
        assert!(out.censored > 0);
        assert!(out.censored < 60);
        assert_eq!(
            out.per_path_max.iter().filter(|x| x.is_none()).count(),
            out.censored
        );
    }

    #[test]
    fn lil_normaliser_and_domain() {
        let e2 = std::f64::consts::E.powi(2);
        let expected = (2.0 * e2 * 2f64.ln()).sqrt();
        assert!((lil_normalizer(e2).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 3.200_532_268_849_37).abs() < 1e-12);
        assert!(lil_normalizer(2.0).is_err());

        let spec = MarketSpec::scapm(0.01, vec![vec![0.2]]).unwrap();
        let cfg = SimulationConfig::new(1.0, 4, 2, 0).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        assert!(matches!(
            lil_statistic(&Schedule::constant(spec), &b, 1.0),
            Err(SimError::Domain(_))
        ));
    }

    #[test]
    fn lil_statistic_is_gaussian_with_predicted_variance() {
        // disc . W_t ~ N(0, V), so the statistic is N(0, 1 / (2 ln ln V)).
        let spec = running_example();
        let t = 2000.0; // V = 20
        let cfg = SimulationConfig::new(t, 1, 10_000, 12).unwrap();
        let b = wealth_bundle(&spec, &cfg);
        let stats = lil_statistic(&Schedule::constant(spec), &b, t).unwrap();
        let n = stats.len() as f64;
        let mean = stats.iter().sum::<f64>() / n;
        let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let v: f64 = 20.0;
        let expected = 1.0 / (2.0 * v.ln().ln());
        assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
    }
}
