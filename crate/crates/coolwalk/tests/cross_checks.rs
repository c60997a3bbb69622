//! Cross-method consistency checks: Monte Carlo vs the continued fraction
//! on a shared environment, and the displacement cumulant vs the conjugate
//! computed through the hitting-time chain.

mod common;

use common::ref_dist;
use coolwalk::ratefn::{hitting_logmgf_rate, RateChain, RateChainParams};
use coolwalk::walk::{quenched_logmgf, sample_hitting, HittingOutcome};
use coolwalk::LazyEnvironment;

#[test]
fn censored_monte_carlo_matches_continued_fraction() {
    // E[e^{λ H_m}] estimated from capped hitting samples vs exp(m * rate)
    // from the continued-fraction sweep, on the same counter-based
    // environment. λ < 0 makes the censoring bias one-sided and bounded by
    // e^{λ cap}.
    let dist = ref_dist();
    let env_seed = 2024u64;
    let lambda = -0.05f64;
    let m = 50i64;
    let cap = 4_000u64;
    let rate = hitting_logmgf_rate(&dist, m as u64, lambda, 256, env_seed);
    assert!(rate.is_finite());
    let predicted = (m as f64 * rate).exp();
    let env = LazyEnvironment::new(&dist, env_seed);
    let k = 30_000u64;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut censored = 0u64;
    for seed in 0..k {
        let v = match sample_hitting(&env, m, seed, cap) {
            HittingOutcome::Hit(h) => (lambda * h as f64).exp(),
            HittingOutcome::Censored(c) => {
                censored += 1;
                (lambda * c as f64).exp()
            }
        };
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / k as f64;
    let var = (sum_sq / k as f64 - mean * mean).max(0.0);
    let se = (var / k as f64).sqrt();
    let censor_bound = (lambda * cap as f64).exp();
    assert!(
        (mean - predicted).abs() <= 5.0 * se + censor_bound,
        "MC {mean:.3e} vs CF {predicted:.3e}, se {se:.3e}, censored {censored}"
    );
}

#[test]
fn displacement_cumulant_approaches_chain_conjugate() {
    let dist = ref_dist();
    let lambda = -0.5f64;
    let lambda_grid: Vec<f64> = (-200..=40).map(|i| i as f64 * 0.005).collect();
    let x_grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.0025).collect();
    let chain = RateChain::compute(
        &dist,
        &RateChainParams {
            lambda_grid: &lambda_grid,
            x_grid: &x_grid,
            cf_n: 20_000,
            warmup: 256,
            seed: 5,
        },
    );
    let istar = chain.conjugate.eval(lambda);
    let env = LazyEnvironment::new(&dist, 91);
    let devs: Vec<f64> = [250u64, 1_000, 4_000]
        .iter()
        .map(|&n| {
            let v = quenched_logmgf(&env, n, lambda).unwrap() / n as f64;
            (v - istar).abs()
        })
        .collect();
    let inversions = devs.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(
        inversions <= 1,
        "deviations not shrinking: {devs:?} (I* = {istar})"
    );
    assert!(
        devs.last().unwrap() < &0.05,
        "final deviation {} vs I*({lambda}) = {istar}",
        devs.last().unwrap()
    );
}

#[test]
fn duality_chain_biconjugate_recovers_rate_hull() {
    // legendre(I*) must reproduce the convex hull of I on interior points.
    let dist = ref_dist();
    let lambda_grid: Vec<f64> = (-200..=40).map(|i| i as f64 * 0.005).collect();
    let x_grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.005).collect();
    let chain = RateChain::compute(
        &dist,
        &RateChainParams {
            lambda_grid: &lambda_grid,
            x_grid: &x_grid,
            cf_n: 4_000,
            warmup: 256,
            seed: 5,
        },
    );
    let back = coolwalk::ratefn::legendre(&chain.conjugate, &x_grid).unwrap();
    let hull = common::lower_convex_hull(chain.rate.xs(), chain.rate.ys());
    let h = 0.005 * 2.0;
    for (i, x) in x_grid.iter().enumerate() {
        if x.abs() <= 0.85 {
            let err = (back.ys()[i] - hull[i]).abs();
            // The biconjugate is limited by the λ-grid range [-1, 0.2]
            // where I has slopes in that range; restrict to the matching
            // region via the hull slope.
            let slope_ok = i > 0
                && i + 1 < x_grid.len()
                && {
                    let s = (hull[i + 1] - hull[i - 1]) / (x_grid[i + 1] - x_grid[i - 1]);
                    s > -0.95 && s < 0.18
                };
            if slope_ok {
                assert!(err <= h, "x = {x}: biconjugate {} vs hull {} (err {err})", back.ys()[i], hull[i]);
            }
        }
    }
}
