//! Outperforming an index in a constant-coefficient Black-Scholes market.
//!
//! Either the market price of risk `theta` coincides with the index
//! volatility `sigma^0` (the simplified CAPM, `mu^k = r + sigma^k . sigma^0`),
//! or a simple wealth process beats the index: asymptotically at rate
//! `1/2 |theta - sigma^0|^2` per unit time, and over a finite horizon with a
//! probability given in closed form.
//!
//! - [`market`]: the market, its price of risk and static risk quantities.
//! - [`simulation`]: exact log-space price paths with keyed randomness.
//! - [`strategy`]: the wealth process, the pathwise identity against the index,
//!   a discretised replication cross-check and the iterated-logarithm statistic.
//! - [`horizon`]: normal quantiles, detection thresholds, outperformance
//!   probabilities and their Monte Carlo counterparts.
//! - [`config`], [`report`], [`verify`]: configuration files, run reports and
//!   the acceptance experiments used by the command-line tool.

pub mod config;
pub mod error;
pub mod horizon;
pub mod market;
pub mod normal;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod strategy;
pub mod verify;

pub use config::{parse_market_config, ConfigError, MarketConfig};
pub use error::{MarketError, SimError};
pub use horizon::{
    asymptotic_ratio_experiment, detection_thresholds, horizon_report, monte_carlo_outperformance,
    outperformance_probability, HorizonReport, Thresholds, Verdict,
};
pub use market::{
    check_viability, replication_weights, risk_profile, solve_theta, MarketSpec, RiskProfile,
};
pub use normal::{inverse_normal_cdf, normal_cdf, upper_quantile};
pub use simulation::{
    generate_increments, schedule_simulate, simulate_prices, PathBundle, Schedule, Segment,
    SimulationConfig,
};
pub use strategy::{
    central_identity_residual, lil_statistic, log_wealth_path, replicate_and_compare,
    ReplicationScheme,
};
