use scapm_core::market::{risk_profile, MarketSpec};
use scapm_core::normal::normal_cdf;
use scapm_core::simulation::{Schedule, SimulationConfig};
use scapm_core::stats::mean_sd;
use scapm_core::strategy::{simulate_terminal, PathSnapshot};

const N: usize = 40_000;

fn three_asset_market() -> MarketSpec {
    MarketSpec::new(
        0.03,
        vec![0.0735, 0.0875, 0.05],
        vec![vec![0.18, 0.05], vec![0.1, 0.25], vec![-0.05, 0.2]],
    )
    .unwrap()
}

fn terminal(m: &MarketSpec, t: f64, steps: usize, seed: u64) -> Vec<PathSnapshot> {
    let cfg = SimulationConfig::new(t, steps, N, seed).unwrap();
    simulate_terminal(&Schedule::constant(m.clone()), &cfg).unwrap()
}

fn assert_mean(xs: &[f64], expected: f64, what: &str) {
    let (mean, sd) = mean_sd(xs);
    let z = (mean - expected) / (sd / (xs.len() as f64).sqrt());
    assert!(
        z.abs() <= 4.0,
        "{what}: mean {mean} vs {expected} ({z:.2} SE)"
    );
}

fn assert_variance(xs: &[f64], expected: f64, what: &str) {
    let (_, sd) = mean_sd(xs);
    // sd of the sample variance of a normal is sigma^2 sqrt(2 / (n - 1)).
    let se = expected * (2.0 / (xs.len() - 1) as f64).sqrt();
    let z = (sd * sd - expected) / se;
    assert!(
        z.abs() <= 4.0,
        "{what}: variance {} vs {expected} ({z:.2} SE)",
        sd * sd
    );
}

#[test]
fn log_wealth_grows_at_the_optimal_rate() {
    let m = three_asset_market();
    let p = risk_profile(&m).unwrap();
    let t = 5.0;
    let snaps = terminal(&m, t, 5, 1);
    let log_k: Vec<f64> = snaps.iter().map(|s| s.log_k).collect();
    assert_mean(&log_k, p.optimal_growth_rate * t, "log K_T");
    assert_variance(
        &log_k,
        p.theta.iter().map(|x| x * x).sum::<f64>() * t,
        "log K_T",
    );
}

#[test]
fn excess_log_wealth_has_the_predicted_law() {
    let m = three_asset_market();
    let p = risk_profile(&m).unwrap();
    let t = 20.0;
    let snaps = terminal(&m, t, 4, 2);
    let excess: Vec<f64> = snaps.iter().map(|s| s.excess_log_wealth()).collect();
    assert_mean(&excess, 0.5 * p.disc_norm_sq * t, "excess");
    assert_variance(&excess, p.disc_norm_sq * t, "excess");
}

#[test]
fn prices_grow_at_their_drift() {
    let m = three_asset_market();
    let t = 2.0;
    let snaps = terminal(&m, t, 8, 3);
    for k in 0..m.n_assets() {
        let s_t: Vec<f64> = snaps.iter().map(|s| s.log_s[k].exp()).collect();
        assert_mean(&s_t, (m.mu()[k] * t).exp(), "S_T");
        let log_s: Vec<f64> = snaps.iter().map(|s| s.log_s[k]).collect();
        let vol_sq: f64 = m.sigma_row(k).iter().map(|x| x * x).sum();
        assert_variance(&log_s, vol_sq * t, "log S_T");
    }
}

#[test]
fn standardised_index_log_price_is_normal() {
    let m = three_asset_market();
    let t = 3.0;
    let snaps = terminal(&m, t, 3, 4);
    let vol: f64 = m
        .index_volatility()
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let drift = (m.mu()[0] - 0.5 * vol * vol) * t;
    let mut z: Vec<f64> = snaps
        .iter()
        .map(|s| (s.log_s[0] - drift) / (vol * t.sqrt()))
        .collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0f64, f64::max);
    // Kolmogorov-Smirnov critical value at the 1% level.
    assert!(d <= 1.628 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn index_only_market_has_no_excess() {
    let m = MarketSpec::new(0.01, vec![0.05], vec![vec![0.2]]).unwrap();
    let p = risk_profile(&m).unwrap();
    assert!(p.disc_norm_sq == 0.0);
    for s in terminal(&m, 1.0, 4, 5) {
        assert_eq!(s.log_k.to_bits(), s.log_s[0].to_bits());
    }
}
