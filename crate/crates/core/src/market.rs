//! Constant-coefficient multi-asset Black-Scholes market.
//!
//! Security 0 is the index, securities 1..=K are stocks. Prices follow
//! `dS^k/S^k = mu^k dt + sigma^k . dW` with `W` a standard Brownian motion of
//! dimension `D_b <= K+1`. Everything static about the market lives here: the
//! market price of risk `theta` solving `sigma theta = mu - r 1`, the
//! discrepancy `theta - sigma^0`, the residuals of the simplified CAPM
//! `mu^k = r + sigma^k . sigma^0`, and the growth deficits `1/2 |theta - sigma^k|^2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::MarketError;

/// Default relative tolerance for the viability test.
pub const DEFAULT_VIABILITY_TOL: f64 = 1e-9;

/// Relative singular-value cutoff below which sigma is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// `theta` within this relative distance of `sigma^0` is snapped onto it, so a
/// market built to satisfy the simplified CAPM reports a discrepancy of exactly zero.
pub const SCAPM_SNAP_TOL: f64 = 1e-12;

/// Floor on the scale used by the relative viability test.
const VIABILITY_SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    r: f64,
    mu: Vec<f64>,
    /// Row-major, `n_assets x dim`.
    sigma: Vec<f64>,
    dim: usize,
    labels: Option<Vec<String>>,
}

impl MarketSpec {
    /// Builds a market and checks every structural invariant: matching
    /// shapes, finite entries, `D_b <= K+1` and full column rank.
    pub fn new(r: f64, mu: Vec<f64>, sigma_rows: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        if sigma_rows.is_empty() || sigma_rows[0].is_empty() {
            return Err(MarketError::Empty);
        }
        let n_assets = sigma_rows.len();
        let dim = sigma_rows[0].len();
        if mu.len() != n_assets {
            return Err(MarketError::DimensionMismatch {
                field: "mu".into(),
                expected: n_assets,
                found: mu.len(),
            });
        }
        for (k, row) in sigma_rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MarketError::DimensionMismatch {
                    field: format!("sigma[{k}]"),
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        check_finite("r", r)?;
        for (k, &m) in mu.iter().enumerate() {
            check_finite(&format!("mu[{k}]"), m)?;
        }
        for (k, row) in sigma_rows.iter().enumerate() {
            for (d, &s) in row.iter().enumerate() {
                check_finite(&format!("sigma[{k}][{d}]"), s)?;
            }
        }
        if dim > n_assets {
            return Err(MarketError::TooManyFactors {
                dim,
                assets: n_assets,
            });
        }

        let spec = Self {
            r,
            mu,
            sigma: sigma_rows.into_iter().flatten().collect(),
            dim,
            labels: None,
        };
        let (min_singular, max_singular) = spec.singular_range();
        if max_singular == 0.0 || min_singular <= RANK_TOL * max_singular {
            return Err(MarketError::RankDeficient {
                min_singular,
                max_singular,
            });
        }
        Ok(spec)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MarketError> {
        if labels.len() != self.n_assets() {
            return Err(MarketError::DimensionMismatch {
                field: "labels".into(),
                expected: self.n_assets(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Market in which the simplified CAPM holds exactly: `mu = r 1 + sigma sigma^0`.
    pub fn scapm(r: f64, sigma_rows: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        Self::with_market_price_of_risk(r, sigma_rows, |s0| s0.to_vec())
    }

    /// Market whose price of risk is `sigma^0 + disc`, i.e. `mu = r 1 + sigma (sigma^0 + disc)`.
    pub fn with_discrepancy(
        r: f64,
        sigma_rows: Vec<Vec<f64>>,
        disc: &[f64],
    ) -> Result<Self, MarketError> {
        let dim = sigma_rows.first().map_or(0, Vec::len);
        if disc.len() != dim {
            return Err(MarketError::DimensionMismatch {
                field: "disc".into(),
                expected: dim,
                found: disc.len(),
            });
        }
        Self::with_market_price_of_risk(r, sigma_rows, |s0| {
            s0.iter().zip(disc).map(|(a, b)| a + b).collect()
        })
    }

    fn with_market_price_of_risk(
        r: f64,
        sigma_rows: Vec<Vec<f64>>,
        theta_of: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<Self, MarketError> {
        if sigma_rows.is_empty() {
            return Err(MarketError::Empty);
        }
        let theta = theta_of(&sigma_rows[0]);
        let mu = sigma_rows
            .iter()
            .map(|row| {
                if row.len() == theta.len() {
                    r + dot(row, &theta)
                } else {
                    f64::NAN
                }
            })
            .collect();
        // Shape problems surface from `new` before the NaN placeholder does.
        Self::new(r, mu, sigma_rows)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Number of securities, `K + 1`.
    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Brownian dimension `D_b`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma_row(&self, k: usize) -> &[f64] {
        &self.sigma[k * self.dim..(k + 1) * self.dim]
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.sigma.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Volatility vector of the index.
    pub fn index_volatility(&self) -> &[f64] {
        self.sigma_row(0)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of security `k`, falling back to `S0`, `S1`, ...
    pub fn label(&self, k: usize) -> String {
        match &self.labels {
            Some(l) => l[k].clone(),
            None => format!("S{k}"),
        }
    }

    /// `mu - r 1`.
    pub fn excess_returns(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m - self.r).collect()
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_assets(), self.dim, &self.sigma)
    }

    fn singular_range(&self) -> (f64, f64) {
        let sv = self.sigma_matrix().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        (min, max)
    }

    /// 2-norm condition number of sigma.
    pub fn condition_number(&self) -> f64 {
        let (min, max) = self.singular_range();
        max / min
    }
}

fn check_finite(field: &str, value: f64) -> Result<(), MarketError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(MarketError::NonFinite {
            field: field.to_string(),
            value,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Outcome of the viability test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Viability {
    pub viable: bool,
    /// `|sigma theta_ls - (mu - r 1)|` for the least-squares `theta_ls`.
    pub residual: f64,
    /// Absolute tolerance the residual was compared against.
    pub tolerance: f64,
    pub condition_number: f64,
    /// Least-squares solution; the market price of risk when viable.
    pub theta: Vec<f64>,
}

/// Least-squares solve of `sigma theta = mu - r 1`. Square systems go
/// through LU, tall ones through the normal equations `sigma^T sigma`.
fn least_squares_theta(spec: &MarketSpec) -> Result<Vec<f64>, MarketError> {
    let sigma = spec.sigma_matrix();
    let excess = DVector::from_vec(spec.excess_returns());
    let rank_err = || {
        let (min_singular, max_singular) = spec.singular_range();
        MarketError::RankDeficient {
            min_singular,
            max_singular,
        }
    };
    let theta = if spec.dim() == spec.n_assets() {
        sigma.lu().solve(&excess).ok_or_else(rank_err)?
    } else {
        let gram = sigma.transpose() * &sigma;
        let rhs = sigma.transpose() * &excess;
        gram.cholesky().ok_or_else(rank_err)?.solve(&rhs)
    };
    Ok(theta.iter().copied().collect())
}

/// Tests whether `mu - r 1` lies in the column span of sigma. The residual
/// is compared against `tol * max(|mu - r 1|, 1e-12)`.
pub fn check_viability(spec: &MarketSpec, tol: f64) -> Result<Viability, MarketError> {
    let theta = least_squares_theta(spec)?;
    let excess = spec.excess_returns();
    let residual = (0..spec.n_assets())
        .map(|k| {
            let e = dot(spec.sigma_row(k), &theta) - excess[k];
            e * e
        })
        .sum::<f64>()
        .sqrt();
    let tolerance = tol * norm_sq(&excess).sqrt().max(VIABILITY_SCALE_FLOOR);
    Ok(Viability {
        viable: residual <= tolerance,
        residual,
        tolerance,
        condition_number: spec.condition_number(),
        theta,
    })
}

/// Market price of risk at the default viability tolerance.
pub fn solve_theta(spec: &MarketSpec) -> Result<Vec<f64>, MarketError> {
    solve_theta_with(spec, DEFAULT_VIABILITY_TOL)
}

pub fn solve_theta_with(spec: &MarketSpec, tol: f64) -> Result<Vec<f64>, MarketError> {
    let v = check_viability(spec, tol)?;
    if !v.viable {
        return Err(MarketError::NotViable {
            residual: v.residual,
            tolerance: v.tolerance,
        });
    }
    let mut theta = v.theta;
    let s0 = spec.index_volatility();
    let gap = theta
        .iter()
        .zip(s0)
        .map(|(t, s)| (t - s) * (t - s))
        .sum::<f64>()
        .sqrt();
    let scale = norm_sq(s0).sqrt().max(norm_sq(&theta).sqrt());
    if gap <= SCAPM_SNAP_TOL * scale {
        theta.copy_from_slice(s0);
    }
    Ok(theta)
}

/// Static risk quantities derived from a viable market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskProfile {
    pub theta: Vec<f64>,
    /// `theta - sigma^0`.
    pub disc: Vec<f64>,
    pub disc_norm_sq: f64,
    /// `mu^k - r - sigma^k . sigma^0`.
    pub scapm_residuals: Vec<f64>,
    /// `1/2 |theta - sigma^k|^2`, the growth shortfall of security k against the optimal portfolio.
    pub deficits: Vec<f64>,
    /// `r + 1/2 |theta|^2`.
    pub optimal_growth_rate: f64,
}

impl RiskProfile {
    pub fn disc_norm(&self) -> f64 {
        self.disc_norm_sq.sqrt()
    }

    /// Equity premium `mu^0 - r` implied by the simplified CAPM, `|sigma^0|^2`.
    pub fn scapm_equity_premium(spec: &MarketSpec) -> f64 {
        norm_sq(spec.index_volatility())
    }
}

pub fn risk_profile(spec: &MarketSpec) -> Result<RiskProfile, MarketError> {
    let theta = solve_theta(spec)?;
    let s0 = spec.index_volatility();
    let disc: Vec<f64> = theta.iter().zip(s0).map(|(t, s)| t - s).collect();
    let scapm_residuals = (0..spec.n_assets())
        .map(|k| spec.mu()[k] - spec.r() - dot(spec.sigma_row(k), s0))
        .collect();
    let deficits = (0..spec.n_assets())
        .map(|k| {
            0.5 * theta
                .iter()
                .zip(spec.sigma_row(k))
                .map(|(t, s)| (t - s) * (t - s))
                .sum::<f64>()
        })
        .collect();
    Ok(RiskProfile {
        disc_norm_sq: norm_sq(&disc),
        optimal_growth_rate: spec.r() + 0.5 * norm_sq(&theta),
        theta,
        disc,
        scapm_residuals,
        deficits,
    })
}

/// Constant fractions of wealth held in each risky security (the rest earns
/// `r`) whose wealth process has volatility `theta`: `sigma^T pi = theta`.
/// Square markets have a unique solution; otherwise the minimum-norm one,
/// `pi = sigma (sigma^T sigma)^-1 theta`, is returned.
pub fn replication_weights(spec: &MarketSpec) -> Result<Vec<f64>, MarketError> {
    let theta = DVector::from_vec(solve_theta(spec)?);
    let sigma = spec.sigma_matrix();
    let rank_err = || {
        let (min_singular, max_singular) = spec.singular_range();
        MarketError::RankDeficient {
            min_singular,
            max_singular,
        }
    };
    let pi = if spec.dim() == spec.n_assets() {
        sigma.transpose().lu().solve(&theta).ok_or_else(rank_err)?
    } else {
        let gram = sigma.transpose() * &sigma;
        let inner = gram.cholesky().ok_or_else(rank_err)?.solve(&theta);
        &sigma * inner
    };
    Ok(pi.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running_example() -> MarketSpec {
        MarketSpec::new(0.02, vec![0.08, 0.05], vec![vec![0.2, 0.0], vec![0.1, 0.3]]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_market_is_viable_with_zero_residual() {
        let spec =
            MarketSpec::new(0.01, vec![0.05, 0.10], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = check_viability(&spec, DEFAULT_VIABILITY_TOL).unwrap();
        assert!(v.viable);
        assert_eq!(v.residual, 0.0);
        let theta = solve_theta(&spec).unwrap();
        assert!(close(theta[0], 0.04, 1e-15) && close(theta[1], 0.09, 1e-15));
        let pi = replication_weights(&spec).unwrap();
        assert!(close(pi[0], 0.04, 1e-15) && close(pi[1], 0.09, 1e-15));
    }

    #[test]
    fn single_factor_viable_market() {
        let spec = MarketSpec::new(0.02, vec![0.06, 0.08], vec![vec![0.2], vec![0.3]]).unwrap();
        let v = check_viability(&spec, DEFAULT_VIABILITY_TOL).unwrap();
        assert!(v.viable, "residual {}", v.residual);
        let theta = solve_theta(&spec).unwrap();
        assert!(close(theta[0], 0.2, 1e-14));
        let pi = replication_weights(&spec).unwrap();
        assert!(close(pi[0], 0.307_692_307_692_307_7, 1e-12));
        assert!(close(pi[1], 0.461_538_461_538_461_5, 1e-12));
    }

    #[test]
    fn single_factor_non_viable_market_reports_distance_to_span() {
        let spec = MarketSpec::new(0.02, vec![0.06, 0.10], vec![vec![0.2], vec![0.3]]).unwrap();
        let v = check_viability(&spec, DEFAULT_VIABILITY_TOL).unwrap();
        assert!(!v.viable);
        // Distance of (0.04, 0.08) from span{(0.2, 0.3)}: |det| / |sigma|.
        let oracle = (0.2f64 * 0.08 - 0.3 * 0.04).abs() / 0.13f64.sqrt();
        assert!(close(v.residual, oracle, 1e-15));
        assert!(close(v.residual, 0.011_094_003_924_504_58, 1e-14));
        match solve_theta(&spec) {
            Err(MarketError::NotViable { residual, .. }) => assert!(close(residual, oracle, 1e-15)),
            other => panic!("expected NotViable, got {other:?}"),
        }
    }

    #[test]
    fn triangular_running_example() {
        let spec = running_example();
        let theta = solve_theta(&spec).unwrap();
        assert!(close(theta[0], 0.3, 1e-15) && close(theta[1], 0.0, 1e-15));

        let p = risk_profile(&spec).unwrap();
        assert!(close(p.disc[0], 0.1, 1e-15) && close(p.disc[1], 0.0, 1e-15));
        assert!(close(p.disc_norm_sq, 0.01, 1e-15));
        assert!(close(p.deficits[0], 0.005, 1e-15));
        assert!(close(p.deficits[1], 0.065, 1e-15));
        assert!(close(p.optimal_growth_rate, 0.065, 1e-15));
        assert!(close(p.scapm_residuals[0], 0.02, 1e-15));
        assert!(close(p.scapm_residuals[1], 0.01, 1e-15));

        let pi = replication_weights(&spec).unwrap();
        assert!(close(pi[0], 1.5, 1e-14) && close(pi[1], 0.0, 1e-14));
    }

    #[test]
    fn scapm_market_has_zero_discrepancy() {
        let spec = MarketSpec::scapm(
            0.03,
            vec![vec![0.15, 0.05], vec![0.1, 0.25], vec![0.3, -0.1]],
        )
        .unwrap();
        let p = risk_profile(&spec).unwrap();
        assert!(p.disc.iter().all(|&d| d == 0.0));
        assert_eq!(p.disc_norm_sq, 0.0);
        assert_eq!(p.deficits[0], 0.0);
        assert!(p.scapm_residuals.iter().all(|r| r.abs() <= 1e-12));
        let premium = spec.mu()[0] - spec.r();
        assert!(close(
            premium,
            RiskProfile::scapm_equity_premium(&spec),
            1e-15
        ));
    }

    #[test]
    fn index_only_market_is_legal() {
        let spec = MarketSpec::new(0.01, vec![0.05], vec![vec![0.2]]).unwrap();
        let theta = solve_theta(&spec).unwrap();
        assert!(close(theta[0], 0.2, 1e-15));
        // K = 0: theta = sigma^0 exactly, so the index is growth optimal.
        assert_eq!(risk_profile(&spec).unwrap().disc_norm_sq, 0.0);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            MarketSpec::new(0.0, vec![], vec![]),
            Err(MarketError::Empty)
        );
        assert!(matches!(
            MarketSpec::new(0.0, vec![0.1, 0.1], vec![vec![0.1, 0.0], vec![0.2]]),
            Err(MarketError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            MarketSpec::new(0.0, vec![0.1], vec![vec![0.1, 0.0]]),
            Err(MarketError::TooManyFactors { dim: 2, assets: 1 })
        ));
        assert!(matches!(
            MarketSpec::new(0.0, vec![0.1, 0.2], vec![vec![0.1, 0.2], vec![0.2, 0.4]]),
            Err(MarketError::RankDeficient { .. })
        ));
        assert!(matches!(
            MarketSpec::new(f64::NAN, vec![0.1], vec![vec![0.1]]),
            Err(MarketError::NonFinite { .. })
        ));
        assert!(matches!(
            MarketSpec::new(0.0, vec![0.1], vec![vec![0.0]]),
            Err(MarketError::RankDeficient { .. })
        ));
    }

    #[test]
    fn labels_default_and_custom() {
        let spec = running_example();
        assert_eq!(spec.label(1), "S1");
        let spec = spec.with_labels(vec!["IDX".into(), "ACME".into()]).unwrap();
        assert_eq!(spec.label(0), "IDX");
        assert!(running_example().with_labels(vec!["x".into()]).is_err());
    }
}
