//! Harness for triangular-array ergodic averaging with cooling structure.
//!
//! Given an array ψ_n^(k) (independent across k, bounded increments in n,
//! per-row averages concentrating on a common limit L), the harness
//! evaluates the weighted sum
//!
//! ```text
//! S_n = (1/n) ( Σ_{k<ℓ(n)} ψ_{T_k}^(k) + ψ_{T̄ⁿ}^(ℓ(n)) )
//! ```
//!
//! and its decomposition into refreshed, boundary and deterministic parts
//!
//! ```text
//! S_n - L = R_n + B_n + D_n,
//! R_n = Σ γ_{k,n} C_k,   B_n = γ̄ⁿ C̄ⁿ,
//! D_n = Σ γ_{k,n}(L_k - L) + γ̄ⁿ(L̄ⁿ - L),
//! ```
//!
//! with γ_{k,n} = T_k/n, γ̄ⁿ = T̄ⁿ/n, C_k the centered per-interval
//! averages and L_k their means. The identity is exact when means are
//! exact; with estimated means the R/B vs D separation is noisy and the
//! report records which was used.

use crate::env::{AlphaDistribution, CoolingMap, EnvView, LazyEnvironment};
use crate::rng::{child_seed, hash2, hash3, unit_f64};
use crate::walk::{evolve_pmf, sample_path};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CetError {
    #[error("provider cannot supply means: {0}")]
    MeansUnavailable(String),
}

/// Mean of ψ_n^(k), exact or estimated with the given replica count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanEstimate {
    Exact(f64),
    Estimated { value: f64, replicas: u32 },
}

impl MeanEstimate {
    pub fn value(self) -> f64 {
        match self {
            MeanEstimate::Exact(v) => v,
            MeanEstimate::Estimated { value, .. } => value,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, MeanEstimate::Exact(_))
    }
}

/// Supplier of a triangular array. `value(k, n, seed)` must be a pure
/// function; independence across k is the provider's responsibility and is
/// obtained by deriving per-k child seeds internally.
pub trait ArrayProvider {
    /// ψ_n^(k) under the master seed.
    fn value(&self, k: u64, n: u64, seed: u64) -> f64;
    /// Bound C on |ψ_{n+1}^(k) - ψ_n^(k)|.
    fn increment_bound(&self) -> f64;
    /// E[ψ_n^(k)], exact or estimated.
    fn mean(&self, k: u64, n: u64) -> MeanEstimate;
    /// The common limit L of E[ψ_n^(k)/n].
    fn limit(&self) -> f64;
}

/// Convex-combination weights (γ_1..γ_{ℓ-1}, γ̄) for time n.
/// The underlying integer identity Σ T_k + T̄ = n is exact.
pub fn cooling_weights(map: &CoolingMap, n: u64) -> (Vec<f64>, f64) {
    let (ell, bar_t) = map.locate(n);
    let gammas = (1..ell)
        .map(|k| map.increment(k) as f64 / n as f64)
        .collect();
    (gammas, bar_t as f64 / n as f64)
}

/// The weighted triangular-array sum S_n.
pub fn cooling_sum(provider: &impl ArrayProvider, map: &CoolingMap, n: u64, seed: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (ell, bar_t) = map.locate(n);
    let mut acc = 0.0f64;
    for k in 1..ell {
        acc += provider.value(k, map.increment(k), seed);
    }
    if bar_t > 0 {
        acc += provider.value(ell, bar_t, seed);
    }
    acc / n as f64
}

/// One decomposition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CetRow {
    pub n: u64,
    pub seed: u64,
    pub total: f64,
    pub refreshed: f64,
    pub boundary: f64,
    pub deterministic: f64,
    /// total - L
    pub deviation: f64,
    /// All means used were exact, so total - L = R + B + D holds to
    /// rounding.
    pub exact_means: bool,
}

/// Refreshed/boundary/deterministic decomposition of S_n - L.
pub fn rbd_decompose(
    provider: &impl ArrayProvider,
    map: &CoolingMap,
    n: u64,
    limit: f64,
    seed: u64,
) -> CetRow {
    let (ell, bar_t) = map.locate(n);
    let nf = n as f64;
    let mut refreshed = 0.0f64;
    let mut deterministic = 0.0f64;
    let mut total = 0.0f64;
    let mut exact_means = true;
    for k in 1..ell {
        let t_k = map.increment(k);
        let gamma = t_k as f64 / nf;
        let psi = provider.value(k, t_k, seed);
        let mean = provider.mean(k, t_k);
        exact_means &= mean.is_exact();
        let l_k = mean.value() / t_k as f64;
        refreshed += gamma * (psi / t_k as f64 - l_k);
        deterministic += gamma * (l_k - limit);
        total += psi;
    }
    let mut boundary = 0.0f64;
    if bar_t > 0 {
        let gamma_bar = bar_t as f64 / nf;
        let psi = provider.value(ell, bar_t, seed);
        let mean = provider.mean(ell, bar_t);
        exact_means &= mean.is_exact();
        let l_bar = mean.value() / bar_t as f64;
        boundary = gamma_bar * (psi / bar_t as f64 - l_bar);
        deterministic += gamma_bar * (l_bar - limit);
        total += psi;
    }
    let total = if n == 0 { 0.0 } else { total / nf };
    CetRow {
        n,
        seed,
        total,
        refreshed,
        boundary,
        deterministic,
        deviation: total - limit,
        exact_means,
    }
}

/// Tabulated decompositions over an n-grid and a seed ensemble.
#[derive(Debug, Clone)]
pub struct CetReport {
    pub rows: Vec<CetRow>,
    pub limit: f64,
    /// Median |deviation| per n-grid entry, in grid order.
    pub median_abs_deviation: Vec<(u64, f64)>,
    /// Adjacent inversions of the median deviation trend.
    pub trend_inversions: u32,
    /// Least-squares slope of log median |deviation| on log n: a purely
    /// diagnostic decay exponent (there is no reference value to compare
    /// against). None when a median is zero or the grid is too short.
    pub fitted_decay_exponent: Option<f64>,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub(crate) fn count_inversions(series: &[f64]) -> u32 {
    series.windows(2).filter(|w| w[1] > w[0]).count() as u32
}

pub fn convergence_report(
    provider: &impl ArrayProvider,
    map: &CoolingMap,
    n_grid: &[u64],
    seeds: &[u64],
) -> CetReport {
    assert!(n_grid.windows(2).all(|w| w[0] < w[1]), "n grid must increase");
    let limit = provider.limit();
    let mut rows = Vec::with_capacity(n_grid.len() * seeds.len());
    let mut median_abs_deviation = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mut devs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let row = rbd_decompose(provider, map, n, limit, seed);
            devs.push(row.deviation.abs());
            rows.push(row);
        }
        median_abs_deviation.push((n, median(&mut devs)));
    }
    let trend: Vec<f64> = median_abs_deviation.iter().map(|&(_, d)| d).collect();
    let pts: Vec<(f64, f64)> = median_abs_deviation
        .iter()
        .filter(|&&(_, d)| d > 0.0)
        .map(|&(n, d)| ((n as f64).ln(), d.ln()))
        .collect();
    let fitted_decay_exponent = if pts.len() >= 2 && pts.len() == median_abs_deviation.len() {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    CetReport {
        rows,
        limit,
        median_abs_deviation,
        trend_inversions: count_inversions(&trend),
        fitted_decay_exponent,
    }
}

pub fn report_to_csv(report: &CetReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!("# limit = {}\n", report.limit));
    if let Some(e) = report.fitted_decay_exponent {
        s.push_str(&format!("# fitted_decay_exponent = {e}\n"));
    }
    s.push_str("n,seed,total,r,b,d,deviation\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.seed, r.total, r.refreshed, r.boundary, r.deterministic, r.deviation
        ));
    }
    s
}

/// Spot check of the bounded-increment assumption on random (k, n) cells.
pub fn max_observed_increment(
    provider: &impl ArrayProvider,
    seed: u64,
    cells: u32,
    n_max: u64,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..cells {
        let k = 1 + hash3(seed, i as u64, 0) % 64;
        let n = 1 + hash3(seed, i as u64, 1) % n_max;
        let a = provider.value(k, n, seed);
        let b = provider.value(k, n + 1, seed);
        worst = worst.max((b - a).abs());
    }
    worst
}

/// ψ_n^(k) = n·L exactly, for every k.
#[derive(Debug, Clone, Copy)]
pub struct LinearProvider {
    pub limit: f64,
}

impl ArrayProvider for LinearProvider {
    fn value(&self, _k: u64, n: u64, _seed: u64) -> f64 {
        n as f64 * self.limit
    }

    fn increment_bound(&self) -> f64 {
        self.limit.abs()
    }

    fn mean(&self, _k: u64, n: u64) -> MeanEstimate {
        MeanEstimate::Exact(n as f64 * self.limit)
    }

    fn limit(&self) -> f64 {
        self.limit
    }
}

/// ψ_n^(k) = n·(L + 1/k): deterministic rows whose per-row limits converge
/// to L, exercising only the D_n term.
#[derive(Debug, Clone, Copy)]
pub struct ToeplitzProvider {
    pub limit: f64,
}

impl ArrayProvider for ToeplitzProvider {
    fn value(&self, k: u64, n: u64, _seed: u64) -> f64 {
        n as f64 * (self.limit + 1.0 / k as f64)
    }

    fn increment_bound(&self) -> f64 {
        self.limit.abs() + 1.0
    }

    fn mean(&self, k: u64, n: u64) -> MeanEstimate {
        MeanEstimate::Exact(n as f64 * (self.limit + 1.0 / k as f64))
    }

    fn limit(&self) -> f64 {
        self.limit
    }
}

/// ψ_n^(k) = sum of n i.i.d. uniform variables on [mean - half_width,
/// mean + half_width], independent across k via derived seeds.
#[derive(Debug, Clone, Copy)]
pub struct IidUniformProvider {
    pub mean: f64,
    pub half_width: f64,
}

impl ArrayProvider for IidUniformProvider {
    fn value(&self, k: u64, n: u64, seed: u64) -> f64 {
        let row_seed = child_seed(seed, k);
        (0..n)
            .map(|i| {
                let u = unit_f64(hash2(row_seed, i));
                self.mean + self.half_width * (2.0 * u - 1.0)
            })
            .sum()
    }

    fn increment_bound(&self) -> f64 {
        self.mean.abs() + self.half_width
    }

    fn mean(&self, _k: u64, n: u64) -> MeanEstimate {
        MeanEstimate::Exact(n as f64 * self.mean)
    }

    fn limit(&self) -> f64 {
        self.mean
    }
}

/// ψ_n^(k) = displacement after n steps of a walk in a fresh environment
/// drawn per row. Means are estimated: per-environment expectations are
/// exact (forward pass), averaged over a fixed internal ensemble of
/// environments so the estimate does not depend on the master seed. Rows
/// are identically distributed, so the mean depends on n alone and is
/// cached across (k, seed) calls.
#[derive(Debug)]
pub struct RwreDisplacementProvider {
    pub dist: AlphaDistribution,
    pub mean_replicas: u32,
    pub mean_cap: u64,
    mean_cache: std::sync::Mutex<std::collections::HashMap<u64, f64>>,
}

impl RwreDisplacementProvider {
    pub fn new(dist: AlphaDistribution, mean_replicas: u32, mean_cap: u64) -> Self {
        RwreDisplacementProvider {
            dist,
            mean_replicas,
            mean_cap,
            mean_cache: std::sync::Mutex::new(std::collections::HashMap::new()),
        }
    }
}

const PROVIDER_ENV_TAG: u64 = 0x65_6e76_2d72_6f77;
const PROVIDER_WALK_TAG: u64 = 0x77_6b2d_726f_77aa;
const PROVIDER_MEAN_SEED: u64 = 0x6d65_616e_2d65_7374;

impl ArrayProvider for RwreDisplacementProvider {
    fn value(&self, k: u64, n: u64, seed: u64) -> f64 {
        let row = child_seed(seed, k);
        let env = LazyEnvironment::new(&self.dist, hash2(row, PROVIDER_ENV_TAG));
        let walk_seed = hash2(row, PROVIDER_WALK_TAG);
        sample_path(&env, n, walk_seed).endpoint() as f64
    }

    fn increment_bound(&self) -> f64 {
        1.0
    }

    fn mean(&self, _k: u64, n: u64) -> MeanEstimate {
        let n_eff = n.min(self.mean_cap);
        let per_step = {
            let mut cache = self.mean_cache.lock().unwrap();
            if let Some(&v) = cache.get(&n_eff) {
                v
            } else {
                let mut acc = 0.0;
                for r in 0..self.mean_replicas {
                    let env =
                        LazyEnvironment::new(&self.dist, hash2(PROVIDER_MEAN_SEED, r as u64));
                    acc += evolve_pmf(&env, n_eff).unwrap().mean();
                }
                let v = acc / self.mean_replicas as f64 / n_eff as f64;
                cache.insert(n_eff, v);
                v
            }
        };
        MeanEstimate::Estimated {
            value: per_step * n as f64,
            replicas: self.mean_replicas,
        }
    }

    fn limit(&self) -> f64 {
        self.dist.speed()
    }
}

/// ψ_n^(k) = the k-th refreshed increment of the cooling chain run n steps:
/// a walk from the origin of the interval-k environment, with walk
/// uniforms indexed by absolute chain time. Feeding this provider to
/// `cooling_sum` reproduces X_n/n of `rwcre_sample` identically.
#[derive(Debug, Clone)]
pub struct RwcreIncrementProvider {
    pub dist: AlphaDistribution,
    pub map: CoolingMap,
    pub env_seed: u64,
}

impl ArrayProvider for RwcreIncrementProvider {
    fn value(&self, k: u64, n: u64, walk_seed: u64) -> f64 {
        let env = LazyEnvironment::new(
            &self.dist,
            crate::walk::interval_env_seed(self.env_seed, k),
        );
        let t0 = self.map.tau(k - 1);
        let mut x = 0i64;
        for j in 0..n {
            let u = unit_f64(hash2(walk_seed, t0 + j));
            if u < env.omega(x) {
                x += 1;
            } else {
                x -= 1;
            }
        }
        x as f64
    }

    fn increment_bound(&self) -> f64 {
        1.0
    }

    fn mean(&self, k: u64, n: u64) -> MeanEstimate {
        let env = LazyEnvironment::new(
            &self.dist,
            crate::walk::interval_env_seed(self.env_seed, k),
        );
        MeanEstimate::Estimated {
            value: evolve_pmf(&env, n).unwrap().mean(),
            replicas: 1,
        }
    }

    fn limit(&self) -> f64 {
        self.dist.speed()
    }
}
