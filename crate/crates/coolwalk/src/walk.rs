//! Exact quenched distribution evolution and Monte Carlo sampling, for a
//! static environment and for the cooling chain.
//!
//! The cooling chain is implemented under two quenched conventions:
//!
//! * [`Frame::Recentered`] — each refresh interval's walk reads its
//!   environment relative to the interval's own starting point, so the
//!   refreshed increments are literally fresh walks from the origin. This is
//!   the primary semantics; the exact law is a convolution of per-interval
//!   laws.
//! * [`Frame::Absolute`] — the kernel reads the current interval's
//!   environment at the absolute lattice position.
//!
//! The two coincide in annealed law (site translation invariance); they
//! differ quenched, and both are exposed.

use crate::env::{AlphaDistribution, CoolingMap, EnvView, LazyEnvironment};
use crate::rng::{child_seed, hash2, unit_f64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("environment window too small: need [{need_lo}, {need_hi}], have [{have_lo}, {have_hi}]")]
    WindowTooSmall {
        need_lo: i64,
        need_hi: i64,
        have_lo: i64,
        have_hi: i64,
    },
}

/// Exact probability mass function on a bounded integer window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    offset: i64,
    weights: Vec<f64>,
}

impl LatticePmf {
    pub fn delta(site: i64) -> LatticePmf {
        LatticePmf {
            offset: site,
            weights: vec![1.0],
        }
    }

    pub fn new(offset: i64, weights: Vec<f64>) -> LatticePmf {
        assert!(!weights.is_empty());
        LatticePmf { offset, weights }
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn value_at(&self, site: i64) -> f64 {
        let idx = site - self.offset;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| (self.offset + i as i64) as f64 * w)
            .sum()
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (self.offset + i as i64, w))
    }

    /// Σ_x pmf(x) e^{λx}, in log domain.
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        let m = self
            .sites()
            .filter(|&(_, w)| w > 0.0)
            .map(|(x, _)| lambda * x as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = self
            .sites()
            .filter(|&(_, w)| w > 0.0)
            .map(|(x, w)| w * (lambda * x as f64 - m).exp())
            .sum();
        m + s.ln()
    }

    /// Exact distribution of the sum of two independent lattice variables.
    pub fn convolve(&self, other: &LatticePmf) -> LatticePmf {
        let (small, big) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = vec![0.0f64; small.weights.len() + big.weights.len() - 1];
        for (i, &a) in small.weights.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in big.weights.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LatticePmf {
            offset: self.offset + other.offset,
            weights: out,
        }
    }

    /// Total variation distance.
    pub fn tv_distance(&self, other: &LatticePmf) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.weights.len() as i64)
            .max(other.offset + other.weights.len() as i64);
        let mut acc = 0.0;
        for x in lo..hi {
            acc += (self.value_at(x) - other.value_at(x)).abs();
        }
        0.5 * acc
    }

    /// Mass on an interval of the empirical speed x/n, with each end open
    /// or closed.
    pub fn speed_interval_mass(
        &self,
        n: u64,
        lo: f64,
        hi: f64,
        closed_left: bool,
        closed_right: bool,
    ) -> f64 {
        let n = n as f64;
        self.sites()
            .filter(|&(x, _)| {
                let t = x as f64 / n;
                let left_ok = if closed_left { t >= lo } else { t > lo };
                let right_ok = if closed_right { t <= hi } else { t < hi };
                left_ok && right_ok
            })
            .map(|(_, w)| w)
            .sum()
    }

    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str("site,mass\n");
        for (x, w) in self.sites() {
            s.push_str(&format!("{x},{w}\n"));
        }
        s
    }
}

/// A sampled nearest-neighbour path, positions[0] = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    positions: Vec<i64>,
    seed: u64,
}

impl Trajectory {
    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn endpoint(&self) -> i64 {
        *self.positions.last().unwrap()
    }

    pub fn len_steps(&self) -> u64 {
        self.positions.len() as u64 - 1
    }

    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str(&format!("# seed = {}\n", self.seed));
        s.push_str("t,position\n");
        for (t, x) in self.positions.iter().enumerate() {
            s.push_str(&format!("{t},{x}\n"));
        }
        s
    }
}

fn require_window(env: &impl EnvView, lo: i64, hi: i64) -> Result<(), WalkError> {
    match env.bounds() {
        None => Ok(()),
        Some((a, b)) => {
            if a <= lo && hi <= b {
                Ok(())
            } else {
                Err(WalkError::WindowTooSmall {
                    need_lo: lo,
                    need_hi: hi,
                    have_lo: a,
                    have_hi: b,
                })
            }
        }
    }
}

/// Exact forward evolution of the quenched kernel for n steps from δ_0.
pub fn evolve_pmf(env: &impl EnvView, n: u64) -> Result<LatticePmf, WalkError> {
    let n_i = n as i64;
    require_window(env, -n_i, n_i)?;
    let len = (2 * n + 1) as usize;
    let mut cur = vec![0.0f64; len];
    let mut next = vec![0.0f64; len];
    cur[n as usize] = 1.0; // origin at index n
    // Cache site probabilities once; the inner loop is then pure arithmetic.
    let omegas: Vec<f64> = (-n_i..=n_i).map(|x| env.omega(x)).collect();
    for t in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        // After t steps only sites with |x| <= t and parity of t carry mass.
        let lo = (n - t) as usize;
        let hi = (n + t) as usize;
        for idx in (lo..=hi).step_by(2) {
            let w = cur[idx];
            if w == 0.0 {
                continue;
            }
            let om = omegas[idx];
            next[idx + 1] += w * om;
            next[idx - 1] += w * (1.0 - om);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(LatticePmf {
        offset: -n_i,
        weights: cur,
    })
}

/// log E_0^ω[e^{λ Z_n}], unnormalized, by the same forward pass carried with
/// per-step weights e^{±λ} and max-renormalization in log domain.
pub fn quenched_logmgf(env: &impl EnvView, n: u64, lambda: f64) -> Result<f64, WalkError> {
    let n_i = n as i64;
    require_window(env, -n_i, n_i)?;
    if lambda == 0.0 {
        // MGF at 0 is 1 identically.
        return Ok(0.0);
    }
    let up = lambda.exp();
    let down = (-lambda).exp();
    let len = (2 * n + 1) as usize;
    let mut cur = vec![0.0f64; len];
    let mut next = vec![0.0f64; len];
    cur[n as usize] = 1.0;
    let omegas: Vec<f64> = (-n_i..=n_i).map(|x| env.omega(x)).collect();
    let mut log_scale = 0.0f64;
    for t in 0..n {
        next.iter_mut().for_each(|v| *v = 0.0);
        let lo = (n - t) as usize;
        let hi = (n + t) as usize;
        let mut max_w = 0.0f64;
        for idx in (lo..=hi).step_by(2) {
            let w = cur[idx];
            if w == 0.0 {
                continue;
            }
            let om = omegas[idx];
            let a = next[idx + 1] + w * om * up;
            next[idx + 1] = a;
            let b = next[idx - 1] + w * (1.0 - om) * down;
            next[idx - 1] = b;
            max_w = max_w.max(a).max(b);
        }
        if max_w > 0.0 {
            let inv = 1.0 / max_w;
            for v in &mut next[lo - 1..=(hi + 1).min(len - 1)] {
                *v *= inv;
            }
            log_scale += max_w.ln();
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let total: f64 = cur.iter().sum();
    Ok(log_scale + total.ln())
}

/// One sampled path of n steps; the step at time t is a pure function of
/// (seed, t) and the site value.
pub fn sample_path(env: &impl EnvView, n: u64, seed: u64) -> Trajectory {
    let mut positions = Vec::with_capacity(n as usize + 1);
    let mut x = 0i64;
    positions.push(x);
    for t in 0..n {
        let u = unit_f64(hash2(seed, t));
        if u < env.omega(x) {
            x += 1;
        } else {
            x -= 1;
        }
        positions.push(x);
    }
    Trajectory { positions, seed }
}

/// First hit of `level`, or censoring at `cap` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HittingOutcome {
    Hit(u64),
    Censored(u64),
}

pub fn sample_hitting(env: &impl EnvView, level: i64, seed: u64, cap: u64) -> HittingOutcome {
    assert!(level >= 1);
    assert!(cap >= level as u64);
    let mut x = 0i64;
    for t in 0..cap {
        let u = unit_f64(hash2(seed, t));
        if u < env.omega(x) {
            x += 1;
        } else {
            x -= 1;
        }
        if x == level {
            return HittingOutcome::Hit(t + 1);
        }
    }
    HittingOutcome::Censored(cap)
}

/// Quenched convention for the cooling chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Recentered,
    Absolute,
}

/// Environment seed for refresh interval k, derived from the master seed.
pub fn interval_env_seed(env_seed: u64, k: u64) -> u64 {
    child_seed(env_seed, k)
}

/// Exact law of the cooling chain at time n under the re-centered
/// convention: the convolution of the per-interval laws.
pub fn rwcre_pmf(
    dist: &AlphaDistribution,
    map: &CoolingMap,
    n: u64,
    env_seed: u64,
) -> LatticePmf {
    let (ell, bar_t) = map.locate(n);
    let mut acc = LatticePmf::delta(0);
    for k in 1..=ell {
        let steps = if k < ell { map.increment(k) } else { bar_t };
        if steps == 0 {
            continue;
        }
        let env = LazyEnvironment::new(dist, interval_env_seed(env_seed, k));
        let piece = evolve_pmf(&env, steps).expect("lazy environment is unbounded");
        acc = acc.convolve(&piece);
    }
    acc
}

/// Exact law at time n under either convention. The absolute frame runs a
/// single time-inhomogeneous pass reading ω_{ℓ(t)} at absolute positions.
pub fn rwcre_pmf_with_frame(
    dist: &AlphaDistribution,
    map: &CoolingMap,
    n: u64,
    env_seed: u64,
    frame: Frame,
) -> LatticePmf {
    match frame {
        Frame::Recentered => rwcre_pmf(dist, map, n, env_seed),
        Frame::Absolute => {
            let n_i = n as i64;
            let len = (2 * n + 1) as usize;
            let mut cur = vec![0.0f64; len];
            let mut next = vec![0.0f64; len];
            cur[n as usize] = 1.0;
            let mut k = 0u64;
            let mut tau_k = 0u64; // tau(k)
            let mut omegas: Vec<f64> = Vec::new();
            for t in 0..n {
                if t >= tau_k {
                    // Step at time t belongs to interval ell(t) = k + 1.
                    k += 1;
                    tau_k = tau_k.saturating_add(map.increment(k));
                    let env = LazyEnvironment::new(dist, interval_env_seed(env_seed, k));
                    omegas = (-n_i..=n_i).map(|x| env.omega(x)).collect();
                }
                next.iter_mut().for_each(|v| *v = 0.0);
                let lo = (n - t) as usize;
                let hi = (n + t) as usize;
                for idx in (lo..=hi).step_by(2) {
                    let w = cur[idx];
                    if w == 0.0 {
                        continue;
                    }
                    let om = omegas[idx];
                    next[idx + 1] += w * om;
                    next[idx - 1] += w * (1.0 - om);
                }
                std::mem::swap(&mut cur, &mut next);
            }
            LatticePmf {
                offset: -n_i,
                weights: cur,
            }
        }
    }
}

/// One sampled cooling-chain path. Walk steps use `walk_seed`; interval
/// environments derive from `env_seed`, so an environment sequence can be
/// held fixed while walk replicas vary.
pub fn rwcre_sample(
    dist: &AlphaDistribution,
    map: &CoolingMap,
    n: u64,
    env_seed: u64,
    walk_seed: u64,
    frame: Frame,
) -> Trajectory {
    let mut positions = Vec::with_capacity(n as usize + 1);
    let mut x = 0i64;
    positions.push(x);
    let mut k = 0u64;
    let mut tau_k = 0u64;
    let mut local_origin = 0i64;
    let mut env_k = LazyEnvironment::new(dist, interval_env_seed(env_seed, 1));
    for t in 0..n {
        if t >= tau_k {
            k += 1;
            tau_k = tau_k.saturating_add(map.increment(k));
            local_origin = x;
            env_k = LazyEnvironment::new(dist, interval_env_seed(env_seed, k));
        }
        let site = match frame {
            Frame::Recentered => x - local_origin,
            Frame::Absolute => x,
        };
        let u = unit_f64(hash2(walk_seed, t));
        if u < env_k.omega(site) {
            x += 1;
        } else {
            x -= 1;
        }
        positions.push(x);
    }
    Trajectory {
        positions,
        seed: walk_seed,
    }
}

/// Refreshed increments Y_k and boundary increment of a trajectory, per the
/// interval structure of the map.
pub fn refreshed_increments(traj: &Trajectory, map: &CoolingMap) -> (Vec<i64>, i64) {
    let n = traj.len_steps();
    let (ell, _) = map.locate(n);
    let mut increments = Vec::with_capacity(ell as usize - 1);
    let pos = traj.positions();
    let mut tau_prev = 0u64;
    for k in 1..ell {
        let tau_k = tau_prev + map.increment(k);
        increments.push(pos[tau_k as usize] - pos[tau_prev as usize]);
        tau_prev = tau_k;
    }
    let boundary = pos[n as usize] - pos[tau_prev as usize];
    (increments, boundary)
}
