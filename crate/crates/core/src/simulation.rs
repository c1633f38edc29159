//! Exact grid-point simulation of the price paths.
//!
//! With constant (or piecewise-constant) coefficients the strong solution
//! makes the log-price recursion
//! `log S^k(t+dt) = log S^k(t) + (mu^k - |sigma^k|^2 / 2) dt + sigma^k . dW`
//! exact in distribution, so no discretisation bias exists at grid points.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::market::{norm_sq, MarketSpec};
use crate::parallel::map_indices;
use crate::rng::PathRng;

/// Relative slack allowed when matching segment boundaries to the grid.
const GRID_ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            horizon,
            n_steps,
            n_paths,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::Config(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.n_steps == 0 {
            return Err(SimError::Config("n_steps must be at least 1".into()));
        }
        if self.n_paths == 0 {
            return Err(SimError::Config("n_paths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Grid time of step boundary `i`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }
}

/// One stretch of constant coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub market: MarketSpec,
}

/// Deterministic piecewise-constant coefficient schedule. Every segment has
/// the same number of securities and the same Brownian dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    /// A single market held for the whole horizon; the duration is resolved
    /// against the simulation config.
    pub fn constant(market: MarketSpec) -> Self {
        Self {
            segments: vec![Segment {
                duration: f64::INFINITY,
                market,
            }],
        }
    }

    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| SimError::Config("schedule has no segments".into()))?;
        let (n, d) = (first.market.n_assets(), first.market.dim());
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(SimError::Config(format!(
                    "segment {i}: duration must be positive and finite, got {}",
                    s.duration
                )));
            }
            if s.market.n_assets() != n || s.market.dim() != d {
                return Err(SimError::Config(format!(
                    "segment {i}: shape {}x{} differs from segment 0 ({n}x{d})",
                    s.market.n_assets(),
                    s.market.dim()
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_constant(&self) -> bool {
        self.segments.len() == 1 && self.segments[0].duration.is_infinite()
    }

    pub fn n_assets(&self) -> usize {
        self.segments[0].market.n_assets()
    }

    pub fn dim(&self) -> usize {
        self.segments[0].market.dim()
    }

    /// Total duration, `None` for a constant schedule.
    pub fn total_duration(&self) -> Option<f64> {
        if self.is_constant() {
            None
        } else {
            Some(self.segments.iter().map(|s| s.duration).sum())
        }
    }

    /// Maps every segment onto a range of grid steps. Boundaries must fall on
    /// the grid and the durations must add up to the horizon.
    pub fn step_ranges(&self, cfg: &SimulationConfig) -> Result<Vec<Range<usize>>> {
        cfg.validate()?;
        if self.is_constant() {
            return Ok(std::iter::once(0..cfg.n_steps).collect());
        }
        let dt = cfg.dt();
        let mut ranges = Vec::with_capacity(self.segments.len());
        let mut elapsed = 0.0;
        let mut start = 0usize;
        for s in &self.segments {
            elapsed += s.duration;
            let steps = elapsed / dt;
            let end = steps.round();
            if (steps - end).abs() > GRID_ALIGN_TOL * steps.max(1.0) || end < 1.0 {
                return Err(SimError::Misaligned { time: elapsed, dt });
            }
            let end = end as usize;
            if end <= start {
                return Err(SimError::Misaligned { time: elapsed, dt });
            }
            ranges.push(start..end);
            start = end;
        }
        if start != cfg.n_steps {
            return Err(SimError::Config(format!(
                "segment durations add up to {elapsed}, horizon is {}",
                cfg.horizon
            )));
        }
        Ok(ranges)
    }
}

impl From<MarketSpec> for Schedule {
    fn from(market: MarketSpec) -> Self {
        Self::constant(market)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "RowMatrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Per-path stream of Brownian increments, drawn step by step.
#[derive(Debug, Clone)]
pub struct IncrementStream {
    rng: PathRng,
    scale: f64,
}

impl IncrementStream {
    pub fn new(cfg: &SimulationConfig, path_index: usize) -> Self {
        Self {
            rng: PathRng::new(cfg.seed, path_index as u64),
            scale: cfg.dt().sqrt(),
        }
    }

    /// Fills one row of increments, each `N(0, dt)`.
    pub fn next_row(&mut self, out: &mut [f64]) {
        self.rng.fill_normal(out, self.scale);
    }
}

/// Brownian increments of one path as an `n_steps x dim` matrix. Depends only
/// on `(seed, path_index)`.
pub fn generate_increments(
    cfg: &SimulationConfig,
    path_index: usize,
    dim: usize,
) -> Result<RowMatrix> {
    cfg.validate()?;
    if path_index >= cfg.n_paths {
        return Err(SimError::Config(format!(
            "path index {path_index} out of range for {} paths",
            cfg.n_paths
        )));
    }
    let mut stream = IncrementStream::new(cfg, path_index);
    let mut m = RowMatrix::zeros(cfg.n_steps, dim);
    for i in 0..cfg.n_steps {
        stream.next_row(m.row_mut(i));
    }
    Ok(m)
}

/// Precomputed per-segment price coefficients.
#[derive(Debug, Clone)]
pub(crate) struct PriceStep {
    /// `(mu^k - |sigma^k|^2 / 2) dt`.
    log_drift_dt: Vec<f64>,
    sigma: Vec<f64>,
    dim: usize,
    r_dt: f64,
}

impl PriceStep {
    pub(crate) fn new(market: &MarketSpec, dt: f64) -> Self {
        let log_drift_dt = (0..market.n_assets())
            .map(|k| (market.mu()[k] - 0.5 * norm_sq(market.sigma_row(k))) * dt)
            .collect();
        Self {
            log_drift_dt,
            sigma: (0..market.n_assets())
                .flat_map(|k| market.sigma_row(k).to_vec())
                .collect(),
            dim: market.dim(),
            r_dt: market.r() * dt,
        }
    }

    /// Log-price increment of security `k` driven by `dw`.
    pub(crate) fn increment(&self, k: usize, dw: &[f64]) -> f64 {
        let row = &self.sigma[k * self.dim..(k + 1) * self.dim];
        self.log_drift_dt[k] + row.iter().zip(dw).map(|(s, w)| s * w).sum::<f64>()
    }

    /// Advances `log_s` in place by one exact step driven by `dw`.
    pub(crate) fn advance(&self, log_s: &mut [f64], dw: &[f64]) {
        for (k, x) in log_s.iter_mut().enumerate() {
            *x += self.increment(k, dw);
        }
    }

    pub(crate) fn r_dt(&self) -> f64 {
        self.r_dt
    }
}

/// Resolved schedule on a concrete grid: which coefficients drive each step.
#[derive(Debug, Clone)]
pub(crate) struct PricePlan {
    pub(crate) ranges: Vec<Range<usize>>,
    pub(crate) steps: Vec<PriceStep>,
}

impl PricePlan {
    pub(crate) fn new(schedule: &Schedule, cfg: &SimulationConfig) -> Result<Self> {
        let ranges = schedule.step_ranges(cfg)?;
        let steps = schedule
            .segments()
            .iter()
            .map(|s| PriceStep::new(&s.market, cfg.dt()))
            .collect();
        Ok(Self { ranges, steps })
    }

    /// Segment index driving each grid step.
    pub(crate) fn segment_of_steps(&self) -> Vec<usize> {
        self.ranges
            .iter()
            .enumerate()
            .flat_map(|(j, r)| std::iter::repeat_n(j, r.len()))
            .collect()
    }
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub index: usize,
    /// `n_steps x D_b` Brownian increments.
    pub dw: RowMatrix,
    /// `(n_steps + 1) x (K + 1)` log prices, row 0 all zero.
    pub log_s: RowMatrix,
    /// Log wealth of the outperformance strategy, filled by the strategy engine.
    pub log_k: Option<Vec<f64>>,
}

/// A batch of simulated paths on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    /// Log bank account `int_0^t r ds`.
    pub log_r: Vec<f64>,
    /// Segment index driving each grid step.
    pub segment_of_step: Vec<usize>,
    pub n_assets: usize,
    pub dim: usize,
    pub config: SimulationConfig,
    pub paths: Vec<SamplePath>,
}

impl PathBundle {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Index of grid time `t`, if `t` is (numerically) on the grid.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let dt = self.config.dt();
        let i = (t / dt).round();
        if i < 0.0 || i as usize > self.n_steps() {
            return None;
        }
        let i = i as usize;
        ((self.times[i] - t).abs() <= GRID_ALIGN_TOL * dt.max(t.abs())).then_some(i)
    }
}

/// Simulates `cfg.n_paths` price paths of a constant market.
pub fn simulate_prices(market: &MarketSpec, cfg: &SimulationConfig) -> Result<PathBundle> {
    schedule_simulate(&Schedule::constant(market.clone()), cfg)
}

/// Simulates price paths under a piecewise-constant schedule. Paths are
/// generated in parallel; the result does not depend on the thread count.
pub fn schedule_simulate(schedule: &Schedule, cfg: &SimulationConfig) -> Result<PathBundle> {
    let plan = PricePlan::new(schedule, cfg)?;
    let times = (0..=cfg.n_steps).map(|i| cfg.time(i)).collect();
    let segment_of_step = plan.segment_of_steps();
    let mut log_r = Vec::with_capacity(cfg.n_steps + 1);
    log_r.push(0.0);
    for &seg in &segment_of_step {
        let last = *log_r.last().unwrap();
        log_r.push(last + plan.steps[seg].r_dt());
    }
    let (n_assets, dim) = (schedule.n_assets(), schedule.dim());
    let paths = map_indices(cfg.n_paths, |p| {
        let mut stream = IncrementStream::new(cfg, p);
        let mut dw = RowMatrix::zeros(cfg.n_steps, dim);
        let mut log_s = RowMatrix::zeros(cfg.n_steps + 1, n_assets);
        let mut state = vec![0.0; n_assets];
        for (i, &seg) in segment_of_step.iter().enumerate() {
            stream.next_row(dw.row_mut(i));
            plan.steps[seg].advance(&mut state, dw.row(i));
            log_s.row_mut(i + 1).copy_from_slice(&state);
        }
        SamplePath {
            index: p,
            dw,
            log_s,
            log_k: None,
        }
    });
    Ok(PathBundle {
        times,
        log_r,
        segment_of_step,
        n_assets,
        dim,
        config: *cfg,
        paths,
    })
}
