//! End-to-end experiment drivers: law-of-large-numbers bands, the
//! per-interval cumulant identity for the cooling chain, cumulant
//! concentration across environments, and the flat-piece annealed tail
//! exponent.
//!
//! Asymptotic statements are checked as trends: a deviation series over an
//! increasing n-grid may have at most one adjacent inversion. Every run is
//! a pure function of (config, master seed); replicas and environments
//! evaluate in parallel with per-cell derived seeds and are folded in fixed
//! cell order.

use crate::cet::{convergence_report, count_inversions, median, CetReport, RwreDisplacementProvider};
use crate::config::ExperimentConfig;
use crate::env::LazyEnvironment;
use crate::ratefn::{hitting_logmgf_rate, RateChain, RateChainParams};
use crate::rng::hash3;
use crate::walk::{evolve_pmf, quenched_logmgf, rwcre_sample};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("interval {k} has length {t} exceeding the exact-pass cap {cap}")]
    IntervalTooLongForExactDp { k: u64, t: u64, cap: u64 },
    #[error("distribution is not in the positive-speed regime: {0}")]
    PreconditionFlatPiece(String),
    #[error("horizon n = {n} exceeds the exact-pass cap {cap}")]
    HorizonTooLongForExactDp { n: u64, cap: u64 },
}

const SLLN_TAG: u64 = 0x736c_6c6e;
const LDP_TAG: u64 = 0x6c_6470;
const CONC_HIT_TAG: u64 = 0x63_6f6e_6368;
const CONC_DISP_TAG: u64 = 0x63_6f6e_6364;
const TAIL_TAG: u64 = 0x7461_696c;

pub const DEFAULT_SLLN_N_GRID: [u64; 3] = [1_000, 10_000, 100_000];
pub const DEFAULT_LDP_N_GRID: [u64; 3] = [2_000, 8_000, 20_000];
pub const DEFAULT_LDP_LAMBDAS: [f64; 4] = [-1.0, -0.5, -0.25, 0.0];
pub const DEFAULT_CONC_HIT_N_GRID: [u64; 3] = [1_000, 4_000, 16_000];
pub const DEFAULT_CONC_DISP_N_GRID: [u64; 3] = [500, 1_000, 2_000];
pub const DEFAULT_TAIL_N_GRID: [u64; 4] = [1_000, 2_000, 4_000, 8_000];

#[derive(Debug, Clone, Copy)]
pub struct SllnRow {
    pub n: u64,
    pub replica: u32,
    pub ratio: f64,
    pub deviation: f64,
    pub within_epsilon: bool,
}

#[derive(Debug, Clone)]
pub struct SllnReport {
    pub speed: f64,
    pub rows: Vec<SllnRow>,
    /// (n, fraction of replicas within epsilon, median |deviation|)
    pub per_n: Vec<(u64, f64, f64)>,
    pub trend_inversions: u32,
    pub band_ok: bool,
}

/// Per-replica cooling-chain trajectories sampled at the n-grid; deviation
/// of X_n/n from the model speed.
pub fn slln_run(cfg: &ExperimentConfig) -> SllnReport {
    let n_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_SLLN_N_GRID.to_vec());
    let n_max = *n_grid.last().unwrap();
    let v = cfg.dist.speed();
    let per_replica: Vec<Vec<f64>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let env_seed = hash3(cfg.seed, SLLN_TAG, (2 * r) as u64);
            let walk_seed = hash3(cfg.seed, SLLN_TAG, (2 * r + 1) as u64);
            let traj = rwcre_sample(&cfg.dist, &cfg.map, n_max, env_seed, walk_seed, cfg.frame);
            n_grid
                .iter()
                .map(|&n| traj.positions()[n as usize] as f64 / n as f64)
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n_grid.len() * cfg.replicas as usize);
    let mut per_n = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let mut within = 0u32;
        let mut devs = Vec::with_capacity(cfg.replicas as usize);
        for (r, ratios) in per_replica.iter().enumerate() {
            let ratio = ratios[i];
            let deviation = (ratio - v).abs();
            let ok = deviation <= cfg.epsilon;
            within += ok as u32;
            devs.push(deviation);
            rows.push(SllnRow {
                n,
                replica: r as u32,
                ratio,
                deviation,
                within_epsilon: ok,
            });
        }
        per_n.push((
            n,
            within as f64 / cfg.replicas as f64,
            median(&mut devs),
        ));
    }
    let medians: Vec<f64> = per_n.iter().map(|&(_, _, m)| m).collect();
    let trend_inversions = count_inversions(&medians);
    SllnReport {
        speed: v,
        rows,
        per_n,
        trend_inversions,
        band_ok: trend_inversions <= 1,
    }
}

pub fn slln_to_csv(r: &SllnReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!("# speed = {}\n", r.speed));
    s.push_str("n,replica,ratio,deviation,within_epsilon\n");
    for row in &r.rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.replica, row.ratio, row.deviation, row.within_epsilon as u8
        ));
    }
    s
}

#[derive(Debug, Clone, Copy)]
pub struct LdpRow {
    pub n: u64,
    pub lambda: f64,
    /// (1/n) log of the chain's quenched MGF, summed per interval.
    pub lhs: f64,
    /// Chain-computed conjugate at the same λ.
    pub istar: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct LdpReport {
    pub rows: Vec<LdpRow>,
    /// Per-λ: (λ, inversions of the deviation trend, final deviation).
    pub per_lambda: Vec<(f64, u32, f64)>,
    pub band_ok: bool,
}

/// The per-interval cumulant identity for the cooling chain, against the
/// conjugate computed independently through the hitting-time chain.
pub fn ldp_cumulant_run(cfg: &ExperimentConfig) -> Result<LdpReport, ExperimentError> {
    let n_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_LDP_N_GRID.to_vec());
    let lambdas: Vec<f64> = match &cfg.lambda_grid {
        crate::config::GridSpec::List(v) => v.clone(),
        crate::config::GridSpec::Linspace { .. } => DEFAULT_LDP_LAMBDAS.to_vec(),
    };
    let n_max = *n_grid.last().unwrap();
    let (ell_max, _) = cfg.map.locate(n_max);
    for k in 1..=ell_max {
        let t = cfg.map.increment(k);
        if t > cfg.exact_dp_cap {
            return Err(ExperimentError::IntervalTooLongForExactDp {
                k,
                t,
                cap: cfg.exact_dp_cap,
            });
        }
    }
    // The identity is checked at the listed λs; the chain itself always
    // gets a dense grid (merged with those λs so the conjugate is evaluated
    // on-grid).
    let mut chain_lambda_grid: Vec<f64> = (0..=400).map(|i| -3.0 + i as f64 * 0.015).collect();
    chain_lambda_grid.extend(lambdas.iter().copied());
    chain_lambda_grid.sort_by(|a, b| a.total_cmp(b));
    chain_lambda_grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let x_grid = cfg.x_grid.resolve();
    let chain = RateChain::compute(
        &cfg.dist,
        &RateChainParams {
            lambda_grid: &chain_lambda_grid,
            x_grid: &x_grid,
            cf_n: cfg.cf_n,
            warmup: cfg.warmup,
            seed: hash3(cfg.seed, LDP_TAG, 0),
        },
    );
    let env_master = hash3(cfg.seed, LDP_TAG, 1);
    let cells: Vec<(u64, f64)> = n_grid
        .iter()
        .flat_map(|&n| lambdas.iter().map(move |&l| (n, l)))
        .collect();
    let rows: Vec<LdpRow> = cells
        .into_par_iter()
        .map(|(n, lambda)| {
            let (ell, bar_t) = cfg.map.locate(n);
            let mut acc = 0.0f64;
            for k in 1..=ell {
                let steps = if k < ell { cfg.map.increment(k) } else { bar_t };
                if steps == 0 {
                    continue;
                }
                let env =
                    LazyEnvironment::new(&cfg.dist, crate::walk::interval_env_seed(env_master, k));
                acc += quenched_logmgf(&env, steps, lambda).expect("lazy env is unbounded");
            }
            let lhs = acc / n as f64;
            let istar = chain.conjugate.eval_clamped(lambda);
            LdpRow {
                n,
                lambda,
                lhs,
                istar,
                deviation: (lhs - istar).abs(),
            }
        })
        .collect();
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    let mut band_ok = true;
    for &l in &lambdas {
        let devs: Vec<f64> = rows
            .iter()
            .filter(|r| r.lambda == l)
            .map(|r| r.deviation)
            .collect();
        let inv = count_inversions(&devs);
        let last = *devs.last().unwrap();
        if l != 0.0 {
            band_ok &= inv <= 1 && last < 0.05;
        }
        per_lambda.push((l, inv, last));
    }
    Ok(LdpReport {
        rows,
        per_lambda,
        band_ok,
    })
}

pub fn ldp_to_csv(r: &LdpReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str("n,lambda,lhs,istar,deviation\n");
    for row in &r.rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.lambda, row.lhs, row.istar, row.deviation
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcStat {
    Hitting,
    Displacement,
}

#[derive(Debug, Clone, Copy)]
pub struct ConcRow {
    pub stat: ConcStat,
    pub n: u64,
    pub env_index: u32,
    pub value: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct ConcReport {
    pub lambda: f64,
    pub rows: Vec<ConcRow>,
    /// (stat, n, exceedance fraction at epsilon, IQR of values)
    pub summary: Vec<(ConcStat, u64, f64, f64)>,
    pub hitting_reference: f64,
    pub displacement_reference: f64,
    pub band_ok: bool,
}

fn iqr(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| -> f64 {
        let pos = f * (values.len() - 1) as f64;
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        if i + 1 < values.len() {
            values[i] * (1.0 - t) + values[i + 1] * t
        } else {
            values[i]
        }
    };
    q(0.75) - q(0.25)
}

/// Per-environment cumulant deviations: the hitting-time statistic via the
/// continued-fraction sweep, the displacement statistic via the exact
/// forward pass on smaller n (its cost is quadratic in n).
pub fn concentration_run(cfg: &ExperimentConfig) -> ConcReport {
    let lambda = cfg.conc_lambda;
    let m = cfg.environments;
    let hit_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_CONC_HIT_N_GRID.to_vec());
    let disp_grid: Vec<u64> = if cfg.n_grid.is_some() {
        hit_grid.iter().map(|&n| (n / 2).max(2)).collect()
    } else {
        DEFAULT_CONC_DISP_N_GRID.to_vec()
    };
    let hit_values: Vec<Vec<f64>> = hit_grid
        .iter()
        .map(|&n| {
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let env_seed = hash3(cfg.seed, CONC_HIT_TAG, i as u64);
                    hitting_logmgf_rate(&cfg.dist, n, lambda, cfg.warmup, env_seed)
                })
                .collect()
        })
        .collect();
    let disp_values: Vec<Vec<f64>> = disp_grid
        .iter()
        .map(|&n| {
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let env_seed = hash3(cfg.seed, CONC_DISP_TAG, i as u64);
                    let env = LazyEnvironment::new(&cfg.dist, env_seed);
                    quenched_logmgf(&env, n, lambda).expect("lazy env is unbounded") / n as f64
                })
                .collect()
        })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let hitting_reference = mean(hit_values.last().unwrap());
    let displacement_reference = mean(disp_values.last().unwrap());
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut hit_exceed = Vec::new();
    for (gi, &n) in hit_grid.iter().enumerate() {
        let vals = &hit_values[gi];
        let mut exceed = 0u32;
        for (i, &v) in vals.iter().enumerate() {
            let dev = (v - hitting_reference).abs();
            exceed += (dev > cfg.epsilon) as u32;
            rows.push(ConcRow {
                stat: ConcStat::Hitting,
                n,
                env_index: i as u32,
                value: v,
                deviation: dev,
            });
        }
        let frac = exceed as f64 / m as f64;
        hit_exceed.push(frac);
        let mut sorted = vals.clone();
        summary.push((ConcStat::Hitting, n, frac, iqr(&mut sorted)));
    }
    let mut disp_iqrs = Vec::new();
    for (gi, &n) in disp_grid.iter().enumerate() {
        let vals = &disp_values[gi];
        let mut exceed = 0u32;
        for (i, &v) in vals.iter().enumerate() {
            let dev = (v - displacement_reference).abs();
            exceed += (dev > cfg.epsilon) as u32;
            rows.push(ConcRow {
                stat: ConcStat::Displacement,
                n,
                env_index: i as u32,
                value: v,
                deviation: dev,
            });
        }
        let mut sorted = vals.clone();
        let spread = iqr(&mut sorted);
        disp_iqrs.push(spread);
        summary.push((ConcStat::Displacement, n, exceed as f64 / m as f64, spread));
    }
    let band_ok = count_inversions(&hit_exceed) <= 1 && count_inversions(&disp_iqrs) <= 1;
    ConcReport {
        lambda,
        rows,
        summary,
        hitting_reference,
        displacement_reference,
        band_ok,
    }
}

pub fn conc_to_csv(r: &ConcReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!("# lambda = {}\n", r.lambda));
    s.push_str(&format!("# hitting_reference = {}\n", r.hitting_reference));
    s.push_str(&format!(
        "# displacement_reference = {}\n",
        r.displacement_reference
    ));
    s.push_str("stat,n,env,value,deviation\n");
    for row in &r.rows {
        let stat = match row.stat {
            ConcStat::Hitting => "hitting",
            ConcStat::Displacement => "displacement",
        };
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            stat, row.n, row.env_index, row.value, row.deviation
        ));
    }
    s
}

pub fn conc_summary_to_csv(r: &ConcReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str("stat,n,exceedance_fraction,iqr\n");
    for (stat, n, frac, spread) in &r.summary {
        let stat = match stat {
            ConcStat::Hitting => "hitting",
            ConcStat::Displacement => "displacement",
        };
        s.push_str(&format!("{stat},{n},{frac},{spread}\n"));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TailReport {
    /// (n, averaged probability of the slow-down interval)
    pub rows: Vec<(u64, f64)>,
    pub interval: (f64, f64),
    pub s_root: f64,
    pub target_slope: f64,
    pub fitted_slope: f64,
    pub band_ok: bool,
    pub note: String,
}

/// Annealed slow-down probabilities inside the flat piece, regressed
/// against log n. The reported exponent is a coarse band check: the
/// underlying statement is a log n-scale limit and the dynamic range of
/// log n at these horizons is small.
pub fn annealed_tail_run(cfg: &ExperimentConfig) -> Result<TailReport, ExperimentError> {
    let s_root = cfg
        .dist
        .solve_s(1e-10)
        .map_err(|e| ExperimentError::PreconditionFlatPiece(e.to_string()))?;
    let v = cfg.dist.speed();
    let interval = (v / 4.0, 3.0 * v / 4.0);
    let n_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_TAIL_N_GRID.to_vec());
    let m = cfg.environments;
    let rows: Vec<(u64, f64)> = n_grid
        .iter()
        .map(|&n| {
            let total: f64 = (0..m)
                .into_par_iter()
                .map(|i| {
                    let env_seed = hash3(cfg.seed, TAIL_TAG, i as u64);
                    let env = LazyEnvironment::new(&cfg.dist, env_seed);
                    let pmf = evolve_pmf(&env, n).expect("lazy env is unbounded");
                    pmf.speed_interval_mass(n, interval.0, interval.1, false, false)
                })
                .sum();
            (n, total / m as f64)
        })
        .collect();
    // Least-squares slope of log p on log n.
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|&&(_, p)| p > 0.0)
        .map(|&(n, p)| ((n as f64).ln(), p.ln()))
        .collect();
    let fitted_slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let target_slope = 1.0 - s_root;
    let band_ok = fitted_slope.is_finite()
        && fitted_slope < 0.0
        && (fitted_slope - target_slope).abs() <= 0.15;
    Ok(TailReport {
        rows,
        interval,
        s_root,
        target_slope,
        fitted_slope,
        band_ok,
        note: "log n spans too little at desk scale to pin the exponent sharply; \
               the slope is a band check, not a measurement"
            .to_string(),
    })
}

pub fn tail_to_csv(r: &TailReport, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!("# interval = ({}, {})\n", r.interval.0, r.interval.1));
    s.push_str(&format!("# s = {}\n", r.s_root));
    s.push_str(&format!("# target_slope = {}\n", r.target_slope));
    s.push_str(&format!("# fitted_slope = {}\n", r.fitted_slope));
    s.push_str(&format!("# band_ok = {}\n", r.band_ok));
    s.push_str(&format!("# note = {}\n", r.note));
    s.push_str("n,p_hat,log_n,log_p\n");
    for &(n, p) in &r.rows {
        s.push_str(&format!("{},{},{},{}\n", n, p, (n as f64).ln(), p.ln()));
    }
    s
}

/// Cooling ergodic averaging of walk displacements over an n-grid and a
/// seed ensemble.
pub fn cet_run(cfg: &ExperimentConfig) -> CetReport {
    let provider = RwreDisplacementProvider::new(cfg.dist.clone(), 8, 2_000);
    let n_grid = cfg
        .n_grid
        .clone()
        .unwrap_or_else(|| vec![1_000, 4_000, 16_000, 64_000]);
    let seeds: Vec<u64> = (0..cfg.replicas as u64)
        .map(|r| hash3(cfg.seed, 0x63_6574, r))
        .collect();
    convergence_report(&provider, &cfg.map, &n_grid, &seeds)
}
