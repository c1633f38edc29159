use proptest::prelude::*;

use scapm_core::config::{parse_market_config, MarketConfig};
use scapm_core::horizon::{detection_thresholds, outperformance_probability};
use scapm_core::market::{replication_weights, risk_profile, solve_theta, MarketSpec};
use scapm_core::normal::{inverse_normal_cdf, normal_cdf};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Well-conditioned viable market plus the price of risk used to build it.
fn viable_market() -> impl Strategy<Value = (MarketSpec, Vec<f64>)> {
    (0usize..=4)
        .prop_flat_map(|k| (Just(k + 1), 1..=k + 1))
        .prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(prop::collection::vec(-0.4f64..0.4, d), n),
                prop::collection::vec(-0.6f64..0.6, d),
                0.0f64..0.08,
            )
        })
        .prop_filter_map("ill-conditioned", |(mut sigma, theta, r)| {
            for (i, row) in sigma.iter_mut().enumerate().take(theta.len()) {
                row[i] += 0.3f64.copysign(row[i]);
            }
            let mu = sigma.iter().map(|row| r + dot(row, &theta)).collect();
            let m = MarketSpec::new(r, mu, sigma).ok()?;
            (m.condition_number() < 1e3).then_some((m, theta))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn theta_solves_the_excess_return_system((m, theta) in viable_market()) {
        let solved = solve_theta(&m).unwrap();
        for (s, t) in solved.iter().zip(&theta) {
            prop_assert!((s - t).abs() <= 1e-10);
        }
        for k in 0..m.n_assets() {
            let resid = dot(m.sigma_row(k), &solved) - (m.mu()[k] - m.r());
            prop_assert!(resid.abs() <= 1e-10);
        }
    }

    #[test]
    fn replication_weights_reproduce_theta((m, _) in viable_market()) {
        let p = risk_profile(&m).unwrap();
        let pi = replication_weights(&m).unwrap();
        for d in 0..m.dim() {
            let v: f64 = (0..m.n_assets()).map(|k| pi[k] * m.sigma_row(k)[d]).sum();
            prop_assert!((v - p.theta[d]).abs() <= 1e-10);
        }
    }

    #[test]
    fn deficits_split_the_optimal_growth_rate((m, _) in viable_market()) {
        let p = risk_profile(&m).unwrap();
        for k in 0..m.n_assets() {
            let growth = m.mu()[k] - 0.5 * norm_sq(m.sigma_row(k));
            prop_assert!((growth - (p.optimal_growth_rate - p.deficits[k])).abs() <= 1e-12);
            prop_assert!(p.deficits[k] >= 0.0);
        }
        prop_assert!((p.deficits[0] - 0.5 * p.disc_norm_sq).abs() <= 1e-15);
    }

    #[test]
    fn scapm_holds_exactly_when_discrepancy_vanishes(
        (m, _) in viable_market(),
        scale in prop::sample::select(vec![0.0, 1e-3, 0.1]),
    ) {
        let sigma = m.sigma_rows();
        let disc: Vec<f64> = (0..m.dim()).map(|d| if d == 0 { scale } else { 0.0 }).collect();
        let shifted = MarketSpec::with_discrepancy(m.r(), sigma, &disc).unwrap();
        let p = risk_profile(&shifted).unwrap();
        let worst = p.scapm_residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        if scale == 0.0 {
            prop_assert!(p.disc.iter().all(|&d| d == 0.0));
            prop_assert!(worst <= 1e-12);
        } else {
            prop_assert!((p.disc_norm() - scale).abs() <= 1e-10);
            prop_assert!(worst > 1e-6 * scale);
        }
    }

    #[test]
    fn theta_is_linear_in_excess_returns((m, _) in viable_market(), c in 0.1f64..5.0) {
        let theta = solve_theta(&m).unwrap();
        let mu: Vec<f64> = m.mu().iter().map(|x| m.r() + c * (x - m.r())).collect();
        let scaled = MarketSpec::new(m.r(), mu, m.sigma_rows()).unwrap();
        for (a, b) in solve_theta(&scaled).unwrap().iter().zip(&theta) {
            prop_assert!((a - c * b).abs() <= 1e-10 * (1.0 + c * b.abs()));
        }
    }

    #[test]
    fn config_round_trip((m, _) in viable_market()) {
        let text = MarketConfig::Single(m.clone()).to_json().to_string();
        let back = parse_market_config(&text).unwrap();
        prop_assert_eq!(back, MarketConfig::Single(m));
    }

    #[test]
    fn detection_dichotomy(
        x in 0.0f64..1.0,
        eps in 0.001f64..0.5,
        delta in 0.001f64..1.0,
        t in 1.0f64..1000.0,
    ) {
        let th = detection_thresholds(eps, delta, t).unwrap();
        prop_assume!((x - th.weak).abs() > 1e-9);
        let p = outperformance_probability(x, t, delta).unwrap();
        prop_assert_eq!(x >= th.weak, p >= 1.0 - eps);
        prop_assert!(th.weak <= th.loose + 1e-15);
    }

    #[test]
    fn outperformance_probability_increases_with_horizon(
        x in 0.01f64..1.0,
        delta in 0.001f64..1.0,
        t in 1.0f64..1000.0,
    ) {
        let a = outperformance_probability(x, t, delta).unwrap();
        let b = outperformance_probability(x, 2.0 * t, delta).unwrap();
        prop_assert!(b >= a);
    }

    #[test]
    fn quantile_inverts_the_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let q = inverse_normal_cdf(p).unwrap();
        prop_assert!((normal_cdf(q) - p).abs() <= 1e-9 * p.min(1.0 - p).max(1e-3));
    }
}
