//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Runs the full-size experiments from `scapm_core::verify` against the
//! bundled running-example config, then repeats the determinism and quantile
//! checks independently (through the real binary, and against a quadrature CDF).

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use scapm_core::config::parse_market_config;
use scapm_core::normal::inverse_normal_cdf;
use scapm_core::verify::{quantile_grid, run_all, Level};

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/running_example.json")
}

fn simulate_csv(dir: &Path, name: &str, threads: usize) -> Vec<u8> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_scapm"))
        .args(["simulate", "--config"])
        .arg(config_path())
        .args([
            "--paths",
            "20000",
            "--steps",
            "50",
            "--horizon",
            "10",
            "--seed",
            "7",
        ])
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(&out)
        .output()
        .expect("binary runs");
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(out).expect("csv written")
}

/// `Phi(x)` by composite Simpson quadrature of the density over `[0, |x|]`.
fn quadrature_cdf(x: f64) -> f64 {
    let n = 20_000;
    let h = x.abs() / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(x.abs());
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    let half_mass = s * h / 3.0;
    if x >= 0.0 {
        0.5 + half_mass
    } else {
        0.5 - half_mass
    }
}

fn main() -> ExitCode {
    let text = std::fs::read_to_string(config_path()).expect("bundled config");
    let config = parse_market_config(&text).expect("bundled config parses");
    let spec = config.primary_market();

    let mut failures = 0;
    for o in run_all(spec, Level::Full) {
        failures += usize::from(!o.passed);
        println!("{}", o.line());
    }

    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let a = simulate_csv(dir.path(), "a.csv", 1);
    let b = simulate_csv(dir.path(), "b.csv", 1);
    let c = simulate_csv(dir.path(), "c.csv", 4);
    let ok = a == b && a == c;
    failures += usize::from(!ok);
    println!(
        "[{}] 8b. scapm simulate is byte-identical across runs and thread counts ({:.2}s): {} bytes; repeat {}, 1 vs 4 threads {}",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64(),
        a.len(),
        a == b,
        a == c
    );

    let start = Instant::now();
    let worst = quantile_grid()
        .into_iter()
        .map(|p| (quadrature_cdf(inverse_normal_cdf(p).unwrap()) - p).abs())
        .fold(0.0f64, f64::max);
    let ok = worst <= 1e-9;
    failures += usize::from(!ok);
    println!(
        "[{}] 9b. quantile accuracy against a quadrature CDF ({:.2}s): max error {worst:.2e}",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
