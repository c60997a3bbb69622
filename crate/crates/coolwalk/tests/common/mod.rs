//! Independent oracles for the integration and acceptance suites. Nothing
//! here calls the forward-pass or continued-fraction code under test.
//!
//! Shared by several test binaries; not every binary uses every oracle.
#![allow(dead_code)]

use coolwalk::env::{AlphaDistribution, CoolingMap, EnvView};
use coolwalk::walk::{interval_env_seed, LatticePmf};
use coolwalk::LazyEnvironment;

/// Exhaustive path enumeration of the static-environment law after n steps.
pub fn enumerate_static_pmf(env: &impl EnvView, n: u64) -> LatticePmf {
    assert!(n <= 20, "enumeration oracle is exponential in n");
    let n_i = n as i64;
    let mut weights = vec![0.0f64; (2 * n + 1) as usize];
    for mask in 0..(1u64 << n) {
        let mut x = 0i64;
        let mut p = 1.0f64;
        for t in 0..n {
            let om = env.omega(x);
            if (mask >> t) & 1 == 1 {
                p *= om;
                x += 1;
            } else {
                p *= 1.0 - om;
                x -= 1;
            }
        }
        weights[(x + n_i) as usize] += p;
    }
    LatticePmf::new(-n_i, weights)
}

/// Exhaustive path enumeration of the cooling chain under the re-centered
/// convention, with the same per-interval seed derivation the library uses.
pub fn enumerate_cooling_pmf(
    dist: &AlphaDistribution,
    map: &CoolingMap,
    n: u64,
    env_seed: u64,
) -> LatticePmf {
    assert!(n <= 20);
    let n_i = n as i64;
    let mut weights = vec![0.0f64; (2 * n + 1) as usize];
    for mask in 0..(1u64 << n) {
        let mut x = 0i64;
        let mut p = 1.0f64;
        let mut k = 0u64;
        let mut tau_k = 0u64;
        let mut origin = 0i64;
        for t in 0..n {
            if t >= tau_k {
                k += 1;
                tau_k += map.increment(k);
                origin = x;
            }
            let env = LazyEnvironment::new(dist, interval_env_seed(env_seed, k));
            let om = env.omega(x - origin);
            if (mask >> t) & 1 == 1 {
                p *= om;
                x += 1;
            } else {
                p *= 1.0 - om;
                x -= 1;
            }
        }
        weights[(x + n_i) as usize] += p;
    }
    LatticePmf::new(-n_i, weights)
}

/// Closed-form fixed point of the homogeneous passage-time MGF recursion.
pub fn homogeneous_phi(p: f64, lambda: f64) -> Option<f64> {
    let disc = 1.0 - 4.0 * p * (1.0 - p) * (2.0 * lambda).exp();
    if disc < 0.0 {
        return None;
    }
    Some((1.0 - disc.sqrt()) / (2.0 * (1.0 - p) * lambda.exp()))
}

/// Rate function of the simple symmetric walk.
pub fn cramer_rate(x: f64) -> f64 {
    if x.abs() > 1.0 {
        return f64::INFINITY;
    }
    if x.abs() == 1.0 {
        return 2f64.ln();
    }
    0.5 * (1.0 + x) * (1.0 + x).ln() + 0.5 * (1.0 - x) * (1.0 - x).ln()
}

/// Lower convex hull by monotone chain, evaluated back on the input grid.
#[allow(clippy::needless_range_loop)]
pub fn lower_convex_hull(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (xs[i] - xs[a]) * (ys[b] - ys[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![0.0f64; xs.len()];
    let mut seg = 0;
    for i in 0..xs.len() {
        while seg + 1 < hull.len() && xs[hull[seg + 1]] < xs[i] {
            seg += 1;
        }
        let (a, b) = (hull[seg], hull[(seg + 1).min(hull.len() - 1)]);
        out[i] = if a == b {
            ys[a]
        } else {
            ys[a] + (ys[b] - ys[a]) * (xs[i] - xs[a]) / (xs[b] - xs[a])
        };
    }
    out
}

/// Independent bisection for the root of ⟨ρ^s⟩ = 1, s > 1, written against
/// the atom list directly.
pub fn solve_s_oracle(atoms: &[(f64, f64)], tol: f64) -> f64 {
    let mean_rho_s = |s: f64| -> f64 {
        atoms
            .iter()
            .map(|&(p, w)| w * ((1.0 - p) / p).powf(s))
            .sum::<f64>()
    };
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    while mean_rho_s(hi) <= 1.0 {
        hi += 0.5;
        assert!(hi < 100.0);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mean_rho_s(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Adjacent inversions of a series that is expected to be nonincreasing.
pub fn inversions(series: &[f64]) -> u32 {
    series.windows(2).filter(|w| w[1] > w[0]).count() as u32
}

pub fn ref_dist() -> AlphaDistribution {
    AlphaDistribution::new(&[(0.8, 0.7), (0.3, 0.3)], 0.2).unwrap()
}

pub fn fair_dist() -> AlphaDistribution {
    AlphaDistribution::homogeneous(0.5).unwrap()
}
