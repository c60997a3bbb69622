//! Environment distributions, sampled environments, and cooling maps.
//!
//! An [`AlphaDistribution`] is a finite-support law for a single site
//! probability ω(x). Atom probabilities and weights are snapped to 9-decimal
//! rationals so that the scalar characteristics of the model (ρ-moments,
//! speed, regime boundaries) are exact: `speed()` of the homogeneous p = 0.75
//! distribution is literally `0.5`.

use crate::frac::Frac;
use crate::rng::{hash2, site_bits, unit_f64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("atom list is empty")]
    EmptyAtoms,
    #[error("atom {index}: probability {p} not in (0, 1)")]
    BadProbability { index: usize, p: f64 },
    #[error("atom {index}: weight {w} not in (0, 1]")]
    BadWeight { index: usize, w: f64 },
    #[error("ellipticity constant {c} not in (0, 1/2]")]
    BadEllipticity { c: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },
    #[error("atom {index}: p = {p} outside [{c}, {one_minus_c}]")]
    EllipticityViolated {
        index: usize,
        p: f64,
        c: f64,
        one_minus_c: f64,
    },
    #[error("not nested: rho range [{rho_min}, {rho_max}] does not bracket 1")]
    NotNested { rho_min: f64, rho_max: f64 },
    #[error("mean rho {mean_rho} >= 1: distribution sits in the flat-piece regime")]
    PreconditionFlatPiece { mean_rho: f64 },
    #[error("rho_max {rho_max} <= 1: no root s > 1 exists")]
    PreconditionNested { rho_max: f64 },
    #[error("cooling map parameter invalid: {0}")]
    BadCoolingParam(String),
}

/// One atom of the site-probability law: ω = p with this weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub p: f64,
    pub weight: f64,
    pub(crate) p_frac: Frac,
    pub(crate) w_frac: Frac,
}

impl Atom {
    /// ρ = (1 - p)/p as an exact fraction.
    pub(crate) fn rho_frac(&self) -> Frac {
        Frac::one().sub(self.p_frac).div(self.p_frac)
    }

    pub fn rho(&self) -> f64 {
        self.rho_frac().to_f64()
    }
}

/// Recurrence/transience classification after the reflection convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Recurrent,
    TransientZeroSpeed,
    TransientPositiveSpeed,
}

/// Scalar characteristics of the site-probability law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoMoments {
    pub mean_rho: f64,
    pub mean_log_rho: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub regime: Regime,
    /// True when the classification refers to the reflected law ω̃ = 1 - ω
    /// because ⟨log ρ⟩ > 0 for the law as given.
    pub reflected: bool,
}

/// Finite-support law of a single site probability, uniformly elliptic and
/// (unless constructed as a reference law) nested.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaDistribution {
    atoms: Vec<Atom>,
    ellipticity: f64,
    nested: bool,
    fingerprint: u64,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

fn build_atoms(atoms: &[(f64, f64)]) -> Result<Vec<Atom>, EnvError> {
    if atoms.is_empty() {
        return Err(EnvError::EmptyAtoms);
    }
    let mut out = Vec::with_capacity(atoms.len());
    for (i, &(p, w)) in atoms.iter().enumerate() {
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(EnvError::BadProbability { index: i, p });
        }
        if w.is_nan() || w <= 0.0 || w > 1.0 {
            return Err(EnvError::BadWeight { index: i, w });
        }
        out.push(Atom {
            p,
            weight: w,
            p_frac: Frac::snap(p),
            w_frac: Frac::snap(w),
        });
    }
    Ok(out)
}

fn fingerprint_atoms(atoms: &[Atom], c: Frac) -> u64 {
    let mut h = hash2(0x61_6c70_6861, atoms.len() as u64);
    for a in atoms {
        h = hash2(h, a.p_frac.num as u64);
        h = hash2(h, a.w_frac.num as u64);
    }
    hash2(h, c.num as u64)
}

impl AlphaDistribution {
    /// Validate atoms against the ellipticity and nestedness conditions.
    pub fn new(atoms: &[(f64, f64)], c: f64) -> Result<AlphaDistribution, EnvError> {
        let atoms = build_atoms(atoms)?;
        if c.is_nan() || c <= 0.0 || c > 0.5 {
            return Err(EnvError::BadEllipticity { c });
        }
        let c_frac = Frac::snap(c);
        // The sum condition applies to the weights as given; the snapped
        // fractions (used for exact moment arithmetic) may be off by up to
        // 5e-10 each, e.g. for weights of 1/3.
        let sum_f: f64 = atoms.iter().map(|a| a.weight).sum();
        if (sum_f - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(EnvError::WeightSum { sum: sum_f });
        }
        // c <= p <= 1 - c, checked on the snapped rationals so that boundary
        // atoms (p == 1 - c) are accepted without an epsilon fudge.
        let one_minus_c = Frac::one().sub(c_frac);
        for (i, a) in atoms.iter().enumerate() {
            if a.p_frac.cmp_val(c_frac) == std::cmp::Ordering::Less
                || a.p_frac.cmp_val(one_minus_c) == std::cmp::Ordering::Greater
            {
                return Err(EnvError::EllipticityViolated {
                    index: i,
                    p: a.p,
                    c,
                    one_minus_c: one_minus_c.to_f64(),
                });
            }
        }
        let rho_min = atoms
            .iter()
            .map(Atom::rho_frac)
            .min_by(|a, b| a.cmp_val(*b))
            .unwrap();
        let rho_max = atoms
            .iter()
            .map(Atom::rho_frac)
            .max_by(|a, b| a.cmp_val(*b))
            .unwrap();
        // rho_min < 1 < rho_max, strict on both sides.
        if !rho_min.lt_one() || rho_max.cmp_val(Frac::one()) != std::cmp::Ordering::Greater {
            return Err(EnvError::NotNested {
                rho_min: rho_min.to_f64(),
                rho_max: rho_max.to_f64(),
            });
        }
        let fingerprint = fingerprint_atoms(&atoms, c_frac);
        Ok(AlphaDistribution {
            atoms,
            ellipticity: c,
            nested: true,
            fingerprint,
        })
    }

    /// Single-atom reference law (homogeneous environment). Nestedness is
    /// deliberately not required; everything else still validates.
    pub fn homogeneous(p: f64) -> Result<AlphaDistribution, EnvError> {
        let atoms = build_atoms(&[(p, 1.0)])?;
        let c = p.min(1.0 - p);
        let fingerprint = fingerprint_atoms(&atoms, Frac::snap(c));
        Ok(AlphaDistribution {
            atoms,
            ellipticity: c,
            nested: false,
            fingerprint,
        })
    }

    /// Multi-atom reference law: validated for ellipticity but exempt from
    /// the nestedness requirement. For comparison experiments only.
    pub fn reference(atoms: &[(f64, f64)], c: f64) -> Result<AlphaDistribution, EnvError> {
        match AlphaDistribution::new(atoms, c) {
            Ok(d) => Ok(d),
            Err(EnvError::NotNested { .. }) => {
                let atoms = build_atoms(atoms)?;
                let fingerprint = fingerprint_atoms(&atoms, Frac::snap(c));
                Ok(AlphaDistribution {
                    atoms,
                    ellipticity: c,
                    nested: false,
                    fingerprint,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn is_nested(&self) -> bool {
        self.nested
    }

    /// Stable identifier derived from the snapped atoms.
    pub fn id(&self) -> u64 {
        self.fingerprint
    }

    /// ⟨ρ⟩ as an exact fraction; None when the exact accumulation would
    /// overflow (many atoms with long-denominator probabilities), in which
    /// case callers fall back to float arithmetic.
    pub(crate) fn mean_rho_frac(&self) -> Option<Frac> {
        self.atoms.iter().try_fold(Frac::zero(), |acc, a| {
            acc.checked_add(a.w_frac.checked_mul(a.rho_frac())?)
        })
    }

    /// ⟨ρ⟩, exact when the fraction path fits.
    pub fn mean_rho(&self) -> f64 {
        match self.mean_rho_frac() {
            Some(r) => r.to_f64(),
            None => self.atoms.iter().map(|a| a.weight * a.rho()).sum(),
        }
    }

    /// ⟨ρ⟩ >= 1, decided exactly when possible.
    fn mean_rho_ge_one(&self) -> bool {
        match self.mean_rho_frac() {
            Some(r) => r.ge_one(),
            None => self.mean_rho() >= 1.0,
        }
    }

    /// ⟨log ρ⟩. Computed as Σ w (ln num - ln den) of the reduced ρ fractions,
    /// so symmetric atom pairs cancel to literal 0.
    pub fn mean_log_rho(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let r = a.rho_frac();
                a.w_frac.to_f64() * ((r.num as f64).ln() - (r.den as f64).ln())
            })
            .sum()
    }

    pub fn rho_moments(&self) -> RhoMoments {
        let mean_rho = self.mean_rho();
        let mean_log_rho = self.mean_log_rho();
        let rho_min = self
            .atoms
            .iter()
            .map(Atom::rho_frac)
            .min_by(|a, b| a.cmp_val(*b))
            .unwrap()
            .to_f64();
        let rho_max = self
            .atoms
            .iter()
            .map(Atom::rho_frac)
            .max_by(|a, b| a.cmp_val(*b))
            .unwrap()
            .to_f64();
        let reflected = mean_log_rho > 0.0;
        let (oriented_ge_one, m_log) = if reflected {
            (self.reflected().mean_rho_ge_one(), -mean_log_rho)
        } else {
            (self.mean_rho_ge_one(), mean_log_rho)
        };
        let regime = if m_log == 0.0 {
            Regime::Recurrent
        } else if oriented_ge_one {
            Regime::TransientZeroSpeed
        } else {
            Regime::TransientPositiveSpeed
        };
        RhoMoments {
            mean_rho,
            mean_log_rho,
            rho_min,
            rho_max,
            regime,
            reflected,
        }
    }

    /// The law of ω̃ = 1 - ω.
    pub fn reflected(&self) -> AlphaDistribution {
        let atoms: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (Frac::one().sub(a.p_frac).to_f64(), a.weight))
            .collect();
        if self.nested {
            AlphaDistribution::new(&atoms, self.ellipticity).expect("reflection preserves validity")
        } else {
            AlphaDistribution::reference(&atoms, self.ellipticity)
                .expect("reflection preserves validity")
        }
    }

    /// Asymptotic speed v = 0 if ⟨ρ⟩ >= 1, else (1 - ⟨ρ⟩)/(1 + ⟨ρ⟩), computed
    /// exactly. When ⟨log ρ⟩ > 0 the reflection convention applies and the
    /// returned value is -speed of the reflected law.
    pub fn speed(&self) -> f64 {
        if self.mean_log_rho() > 0.0 {
            return -self.reflected().speed();
        }
        if self.mean_rho_ge_one() {
            return 0.0;
        }
        let exact = self.mean_rho_frac().and_then(|r| {
            Frac::one()
                .checked_sub(r)?
                .checked_div(Frac::one().checked_add(r)?)
        });
        match exact {
            Some(v) => v.to_f64(),
            None => {
                let r = self.mean_rho();
                (1.0 - r) / (1.0 + r)
            }
        }
    }

    /// Unique s > 1 with ⟨ρ^s⟩ = 1, by bisection on the convex map s ↦ ⟨ρ^s⟩.
    pub fn solve_s(&self, tol: f64) -> Result<f64, EnvError> {
        if self.mean_rho_ge_one() {
            return Err(EnvError::PreconditionFlatPiece {
                mean_rho: self.mean_rho(),
            });
        }
        let rho_max = self
            .atoms
            .iter()
            .map(Atom::rho_frac)
            .max_by(|a, b| a.cmp_val(*b))
            .unwrap();
        if rho_max.cmp_val(Frac::one()) != std::cmp::Ordering::Greater {
            return Err(EnvError::PreconditionNested {
                rho_max: rho_max.to_f64(),
            });
        }
        let mean_rho_s = |s: f64| -> f64 {
            self.atoms
                .iter()
                .map(|a| a.weight * a.rho().powf(s))
                .sum::<f64>()
        };
        let mut hi = 2.0;
        while mean_rho_s(hi) <= 1.0 {
            hi *= 2.0;
            if hi > 1e18 {
                // rho_max is not resolvably above 1 at float precision.
                return Err(EnvError::PreconditionNested {
                    rho_max: rho_max.to_f64(),
                });
            }
        }
        let mut lo = 1.0;
        loop {
            let mid = 0.5 * (lo + hi);
            let v = mean_rho_s(mid);
            if (v - 1.0).abs() <= tol || (hi - lo) < f64::EPSILON * hi {
                return Ok(mid);
            }
            if v < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Site value as a pure function of (seed, x): atoms picked by weight
    /// from a counter-based uniform.
    pub fn site_value(&self, seed: u64, x: i64) -> f64 {
        let u = unit_f64(site_bits(seed, x));
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.weight;
            if u < acc {
                return a.p;
            }
        }
        self.atoms.last().unwrap().p
    }

    /// Materialize sites lo..lo+len-1.
    pub fn sample(&self, lo: i64, len: usize, seed: u64) -> Environment {
        assert!(len >= 1, "environment length must be positive");
        let values = (0..len as i64).map(|i| self.site_value(seed, lo + i)).collect();
        Environment {
            lo,
            values,
            seed,
            dist_id: self.fingerprint,
        }
    }
}

/// Read-only view of site probabilities, either materialized or lazy.
pub trait EnvView {
    fn omega(&self, x: i64) -> f64;
    /// Inclusive site bounds, None when unbounded.
    fn bounds(&self) -> Option<(i64, i64)>;

    fn covers(&self, lo: i64, hi: i64) -> bool {
        match self.bounds() {
            None => true,
            Some((a, b)) => a <= lo && hi <= b,
        }
    }
}

/// A sampled window of site probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    lo: i64,
    values: Vec<f64>,
    seed: u64,
    dist_id: u64,
}

impl Environment {
    /// Direct construction from explicit values, for reference and test use.
    pub fn from_values(lo: i64, values: Vec<f64>, seed: u64) -> Environment {
        assert!(!values.is_empty());
        Environment {
            lo,
            values,
            seed,
            dist_id: 0,
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dist_id(&self) -> u64 {
        self.dist_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CSV dump with a replay header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# lo = {}\n", self.lo));
        s.push_str(&format!("# len = {}\n", self.values.len()));
        s.push_str(&format!("# seed = {}\n", self.seed));
        s.push_str(&format!("# dist_id = {}\n", self.dist_id));
        s.push_str("site,omega\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.lo + i as i64, v));
        }
        s
    }
}

impl EnvView for Environment {
    fn omega(&self, x: i64) -> f64 {
        let idx = x - self.lo;
        assert!(
            idx >= 0 && (idx as usize) < self.values.len(),
            "site {x} outside environment window [{}, {}]",
            self.lo,
            self.hi()
        );
        self.values[idx as usize]
    }

    fn bounds(&self) -> Option<(i64, i64)> {
        Some((self.lo, self.hi()))
    }
}

/// Unbounded environment view: site values generated on demand from
/// (seed, x). Agrees bit-exactly with `AlphaDistribution::sample` windows.
#[derive(Debug, Clone, Copy)]
pub struct LazyEnvironment<'a> {
    dist: &'a AlphaDistribution,
    seed: u64,
}

impl<'a> LazyEnvironment<'a> {
    pub fn new(dist: &'a AlphaDistribution, seed: u64) -> Self {
        LazyEnvironment { dist, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl EnvView for LazyEnvironment<'_> {
    fn omega(&self, x: i64) -> f64 {
        self.dist.site_value(self.seed, x)
    }

    fn bounds(&self) -> Option<(i64, i64)> {
        None
    }
}

/// The increment-sequence kinds a cooling map can have.
#[derive(Debug, Clone, PartialEq)]
pub enum CoolingKind {
    /// T_k = max(1, ceil(k^a)), a > 0.
    Polynomial { a: f64 },
    /// T_k = max(1, ceil(e^{b k})), b > 0.
    Exponential { b: f64 },
    /// T_k = t for all k. Flagged as not cooling.
    Constant { t: u64 },
    /// Listed increments; past the end the last one repeats. Flagged as not
    /// cooling since a finite list cannot certify divergence.
    Explicit { increments: Vec<u64> },
}

/// Strictly increasing refresh-time map τ with τ(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingMap {
    kind: CoolingKind,
}

impl CoolingMap {
    pub fn polynomial(a: f64) -> Result<CoolingMap, EnvError> {
        if a.is_nan() || a <= 0.0 || a.is_infinite() {
            return Err(EnvError::BadCoolingParam(format!("polynomial a = {a}")));
        }
        Ok(CoolingMap {
            kind: CoolingKind::Polynomial { a },
        })
    }

    pub fn exponential(b: f64) -> Result<CoolingMap, EnvError> {
        if b.is_nan() || b <= 0.0 || b.is_infinite() {
            return Err(EnvError::BadCoolingParam(format!("exponential b = {b}")));
        }
        Ok(CoolingMap {
            kind: CoolingKind::Exponential { b },
        })
    }

    pub fn constant(t: u64) -> Result<CoolingMap, EnvError> {
        if t < 1 {
            return Err(EnvError::BadCoolingParam("constant T must be >= 1".into()));
        }
        Ok(CoolingMap {
            kind: CoolingKind::Constant { t },
        })
    }

    pub fn explicit(increments: Vec<u64>) -> Result<CoolingMap, EnvError> {
        if increments.is_empty() {
            return Err(EnvError::BadCoolingParam("explicit list is empty".into()));
        }
        if increments.iter().any(|&t| t < 1) {
            return Err(EnvError::BadCoolingParam(
                "explicit increments must be >= 1".into(),
            ));
        }
        Ok(CoolingMap {
            kind: CoolingKind::Explicit { increments },
        })
    }

    pub fn kind(&self) -> &CoolingKind {
        &self.kind
    }

    /// True when T_k -> infinity is guaranteed by the kind.
    pub fn is_cooling(&self) -> bool {
        matches!(
            self.kind,
            CoolingKind::Polynomial { .. } | CoolingKind::Exponential { .. }
        )
    }

    /// Increment T_k, k >= 1.
    pub fn increment(&self, k: u64) -> u64 {
        debug_assert!(k >= 1);
        match &self.kind {
            CoolingKind::Polynomial { a } => {
                let v = (k as f64).powf(*a).ceil();
                if v >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    (v as u64).max(1)
                }
            }
            CoolingKind::Exponential { b } => {
                let v = (*b * k as f64).exp().ceil();
                if v >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    (v as u64).max(1)
                }
            }
            CoolingKind::Constant { t } => *t,
            CoolingKind::Explicit { increments } => {
                let idx = (k as usize - 1).min(increments.len() - 1);
                increments[idx]
            }
        }
    }

    /// τ(k) = Σ_{j<=k} T_j, τ(0) = 0.
    pub fn tau(&self, k: u64) -> u64 {
        let mut acc: u64 = 0;
        for j in 1..=k {
            acc = acc.saturating_add(self.increment(j));
        }
        acc
    }

    /// Interval index and running time at the boundary for time n:
    /// ell = inf{k : τ(k) > n}, bar_t = n - τ(ell - 1).
    pub fn locate(&self, n: u64) -> (u64, u64) {
        let mut k = 0u64;
        let mut tau_k = 0u64;
        loop {
            k += 1;
            let next = tau_k.saturating_add(self.increment(k));
            if next > n {
                return (k, n - tau_k);
            }
            tau_k = next;
        }
    }
}
