//! Quenched cumulant and rate-function machinery.
//!
//! The hitting-time log-MGF is computed by a site-by-site random continued
//! fraction. Writing φ_x(λ) for the MGF of the passage time from x to x+1,
//! first-step decomposition gives
//!
//! ```text
//! φ_x = ω_x e^λ + (1 - ω_x) e^λ φ_{x-1} φ_x
//!     = ω_x e^λ / (1 - (1 - ω_x) e^λ φ_{x-1}),
//! ```
//!
//! and log E_0^ω[e^{λ H_n}] = Σ_{x<n} log φ_x by the strong Markov property.
//! A nonpositive denominator means the passage-time MGF is infinite.
//!
//! The dependence of φ_x on sites far to the left decays geometrically, so
//! the half-line tail is truncated with a warm-up buffer initialized at the
//! homogeneous fixed point of the boundary site; doubling the buffer must
//! not move the result (asserted in tests).

use crate::env::AlphaDistribution;
use crate::walk::LatticePmf;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("grid function has an empty finite part")]
    EmptyFinitePart,
    #[error("bad grid: {0}")]
    BadGrid(String),
}

/// Piecewise-linear numeric function on a sorted grid; +inf marks points
/// outside the domain of finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    xs: Vec<f64>,
    ys: Vec<f64>,
    convex: bool,
}

impl GridFunction {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> GridFunction {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty());
        assert!(
            xs.windows(2).all(|w| w[0] < w[1]),
            "grid must be strictly increasing"
        );
        assert!(xs.iter().all(|x| x.is_finite()));
        assert!(ys.iter().all(|y| !y.is_nan()));
        // Finite values must form one contiguous run flanked by +inf only.
        let first = ys.iter().position(|y| y.is_finite());
        if let Some(first) = first {
            let last = ys.iter().rposition(|y| y.is_finite()).unwrap();
            assert!(
                ys[first..=last].iter().all(|y| y.is_finite()),
                "finite part must be contiguous"
            );
        }
        GridFunction {
            xs,
            ys,
            convex: false,
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn is_flagged_convex(&self) -> bool {
        self.convex
    }

    pub(crate) fn flag_convex(mut self) -> GridFunction {
        self.convex = true;
        self
    }

    /// Indices of the finite part, if any.
    pub fn finite_range(&self) -> Option<(usize, usize)> {
        let first = self.ys.iter().position(|y| y.is_finite())?;
        let last = self.ys.iter().rposition(|y| y.is_finite()).unwrap();
        Some((first, last))
    }

    pub fn min_finite(&self) -> Option<f64> {
        self.ys
            .iter()
            .filter(|y| y.is_finite())
            .cloned()
            .reduce(f64::min)
    }

    /// Linear interpolation; +inf outside the finite part.
    pub fn eval(&self, x: f64) -> f64 {
        let (first, last) = match self.finite_range() {
            Some(r) => r,
            None => return f64::INFINITY,
        };
        if x < self.xs[first] || x > self.xs[last] {
            return f64::INFINITY;
        }
        self.interp_in(first, last, x)
    }

    /// Linear interpolation with clamping to the nearest finite endpoint
    /// value outside the finite part.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (first, last) = match self.finite_range() {
            Some(r) => r,
            None => return f64::INFINITY,
        };
        if x <= self.xs[first] {
            return self.ys[first];
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        self.interp_in(first, last, x)
    }

    fn interp_in(&self, first: usize, last: usize, x: f64) -> f64 {
        let xs = &self.xs[first..=last];
        let ys = &self.ys[first..=last];
        match xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => ys[i],
            Err(i) => {
                // first < x < last guaranteed by callers
                let (x0, x1) = (xs[i - 1], xs[i]);
                let (y0, y1) = (ys[i - 1], ys[i]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Smallest second-difference slack of the finite part; >= -tol means
    /// convex within tol.
    pub fn convexity_slack(&self) -> f64 {
        let (first, last) = match self.finite_range() {
            Some(r) => r,
            None => return 0.0,
        };
        if last - first < 2 {
            return 0.0;
        }
        let mut worst = f64::INFINITY;
        for i in first..last - 1 {
            let s0 = (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i]);
            let s1 = (self.ys[i + 2] - self.ys[i + 1]) / (self.xs[i + 2] - self.xs[i + 1]);
            worst = worst.min(s1 - s0);
        }
        worst
    }

    /// Pointwise shift of the finite part.
    pub fn shifted(&self, delta: f64) -> GridFunction {
        let ys = self
            .ys
            .iter()
            .map(|&y| if y.is_finite() { y + delta } else { y })
            .collect();
        GridFunction {
            xs: self.xs.clone(),
            ys,
            convex: self.convex,
        }
    }

    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str("x,y,is_infinite\n");
        for (x, y) in self.xs.iter().zip(&self.ys) {
            if y.is_finite() {
                s.push_str(&format!("{x},{y},0\n"));
            } else {
                s.push_str(&format!("{x},inf,1\n"));
            }
        }
        s
    }
}

/// Running state of the passage-time MGF recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfState {
    pub phi: f64,
    pub diverged: bool,
}

impl CfState {
    pub fn start(phi: f64) -> CfState {
        CfState {
            phi,
            diverged: false,
        }
    }

    pub fn diverged() -> CfState {
        CfState {
            phi: f64::INFINITY,
            diverged: true,
        }
    }
}

/// One site of the continued fraction: φ_x from φ_{x-1}.
/// Divergence is a state, not an error.
pub fn passage_mgf_step(prev: CfState, omega: f64, lambda: f64) -> CfState {
    if prev.diverged {
        return CfState::diverged();
    }
    let e = lambda.exp();
    let den = 1.0 - (1.0 - omega) * e * prev.phi;
    // NaN propagates to divergence too.
    if den.is_nan() || den <= 0.0 {
        return CfState::diverged();
    }
    let phi = omega * e / den;
    if !phi.is_finite() {
        return CfState::diverged();
    }
    CfState {
        phi,
        diverged: false,
    }
}

/// Fixed point of the recursion in a constant-p environment:
/// the smaller root of (1-p) e^λ φ² - φ + p e^λ = 0.
/// None when the discriminant is negative (MGF infinite).
pub fn homogeneous_fixed_point(p: f64, lambda: f64) -> Option<f64> {
    let disc = 1.0 - 4.0 * p * (1.0 - p) * (2.0 * lambda).exp();
    if disc < 0.0 {
        return None;
    }
    Some((1.0 - disc.sqrt()) / (2.0 * (1.0 - p) * lambda.exp()))
}

/// (1/n) log E_0^ω[e^{λ H_n}] for a counter-based environment, by a
/// continued-fraction sweep with a warm-up buffer; +inf when any step
/// diverges.
pub fn hitting_logmgf_rate(
    dist: &AlphaDistribution,
    n: u64,
    lambda: f64,
    warmup: u32,
    seed: u64,
) -> f64 {
    assert!(n >= 1);
    assert!(warmup >= 1);
    if lambda == 0.0 && dist.mean_log_rho() <= 0.0 {
        // Passage times are a.s. finite; the MGF at 0 is identically 1.
        return 0.0;
    }
    let left = -(warmup as i64);
    let p0 = dist.site_value(seed, left);
    let mut state = match homogeneous_fixed_point(p0, lambda) {
        Some(phi) => CfState::start(phi),
        None => return f64::INFINITY,
    };
    let mut acc = 0.0f64;
    for x in (left + 1)..(n as i64) {
        state = passage_mgf_step(state, dist.site_value(seed, x), lambda);
        if state.diverged {
            return f64::INFINITY;
        }
        if x >= 0 {
            acc += state.phi.ln();
        }
    }
    acc / n as f64
}

/// J* evaluated on a λ-grid over one shared environment, with the detected
/// divergence bracket [last finite λ, first diverged λ].
#[derive(Debug, Clone)]
pub struct HittingCgfCurve {
    pub curve: GridFunction,
    pub lambda_c: Option<(f64, f64)>,
}

pub fn hitting_cgf_curve(
    dist: &AlphaDistribution,
    lambdas: &[f64],
    n: u64,
    warmup: u32,
    seed: u64,
) -> HittingCgfCurve {
    assert!(
        lambdas.windows(2).all(|w| w[0] < w[1]),
        "lambda grid must be sorted strictly increasing"
    );
    let ys: Vec<f64> = lambdas
        .iter()
        .map(|&l| hitting_logmgf_rate(dist, n, l, warmup, seed))
        .collect();
    // The MGF of a positive variable is monotone in λ and its domain of
    // finiteness is a down-set; the sweep preserves both.
    let mut first_inf = None;
    for (i, y) in ys.iter().enumerate() {
        if y.is_finite() {
            assert!(first_inf.is_none(), "non-contiguous divergence in J* sweep");
            if i > 0 && ys[i - 1].is_finite() {
                assert!(
                    *y >= ys[i - 1] - 1e-9,
                    "J* must be nondecreasing: {} then {}",
                    ys[i - 1],
                    y
                );
            }
        } else if first_inf.is_none() {
            first_inf = Some(i);
        }
    }
    let lambda_c = first_inf.and_then(|i| {
        if i > 0 {
            Some((lambdas[i - 1], lambdas[i]))
        } else {
            None
        }
    });
    let curve = GridFunction::new(lambdas.to_vec(), ys);
    let slack = curve.convexity_slack();
    assert!(slack >= -1e-9, "J* convexity violated: slack {slack}");
    HittingCgfCurve {
        curve: curve.flag_convex(),
        lambda_c,
    }
}

/// Legendre transform g(y) = sup_x [y·x - f(x)] by direct scan over the
/// finite grid points.
pub fn legendre(f: &GridFunction, out_grid: &[f64]) -> Result<GridFunction, RateError> {
    let (first, last) = f.finite_range().ok_or(RateError::EmptyFinitePart)?;
    if !out_grid.windows(2).all(|w| w[0] < w[1]) || out_grid.is_empty() {
        return Err(RateError::BadGrid(
            "output grid must be nonempty and strictly increasing".into(),
        ));
    }
    let xs = &f.xs()[first..=last];
    let ys = &f.ys()[first..=last];
    let out = out_grid
        .iter()
        .map(|&y| {
            xs.iter()
                .zip(ys)
                .map(|(&x, &fx)| y * x - fx)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(GridFunction::new(out_grid.to_vec(), out).flag_convex())
}

/// Weak rate function for hitting times to the left: J̃ = J - ⟨log ρ⟩.
pub fn left_hitting_rate(j: &GridFunction, mean_log_rho: f64) -> GridFunction {
    j.shifted(-mean_log_rho)
}

/// Displacement rate function from the hitting-time rates:
/// I(x) = x J(1/x) on (0,1], I(0) = 0, I(x) = (-x) J̃(1/(-x)) on [-1,0).
/// Beyond the grids' largest argument J and J̃ are clamped to their last
/// value, which is where they approach their infimum.
pub fn displacement_rate(
    j: &GridFunction,
    j_left: &GridFunction,
    x_grid: &[f64],
) -> GridFunction {
    assert!(x_grid.windows(2).all(|w| w[0] < w[1]));
    let ys = x_grid
        .iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else if x > 0.0 {
                x * j.eval_clamped(1.0 / x)
            } else {
                (-x) * j_left.eval_clamped(1.0 / (-x))
            }
        })
        .collect();
    GridFunction::new(x_grid.to_vec(), ys)
}

/// Legendre transform of the displacement rate, restricted to [-1, 1].
pub fn displacement_cgf(
    rate: &GridFunction,
    lambdas: &[f64],
) -> Result<GridFunction, RateError> {
    if let Some((first, last)) = rate.finite_range() {
        assert!(
            rate.xs()[first] >= -1.0 - 1e-12 && rate.xs()[last] <= 1.0 + 1e-12,
            "displacement rate must live on [-1, 1]"
        );
    }
    legendre(rate, lambdas)
}

/// One block of the empirical block decomposition of [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRate {
    pub lo: f64,
    pub hi: f64,
    pub closed_left: bool,
    pub mass: f64,
    /// -(1/n) log(mass); +inf for empty blocks.
    pub rate: f64,
}

/// Block decomposition of [-1,1] into 2N blocks of width 1/N, with the
/// blocks covering (0, floor(vN+1)/N] merged when v > 0, and the empirical
/// rate -(1/n) log of each block mass of an n-step law.
pub fn empirical_block_rate(pmf: &LatticePmf, n: u64, blocks: u32, v: f64) -> Vec<BlockRate> {
    assert!(blocks >= 1);
    let nn = blocks as i64;
    let step = 1.0 / blocks as f64;
    let mut out = Vec::new();
    let merged_hi_idx: Option<i64> = if v > 0.0 {
        Some(((v * blocks as f64 + 1.0).floor() as i64).clamp(1, nn))
    } else {
        None
    };
    let mut i = -nn;
    while i < nn {
        let (lo, hi, closed_left, next_i) = if i == -nn {
            (-1.0, -1.0 + step, true, i + 1)
        } else if i == 0 && merged_hi_idx.is_some() {
            let m = merged_hi_idx.unwrap();
            (0.0, m as f64 * step, false, m)
        } else {
            (i as f64 * step, (i + 1) as f64 * step, false, i + 1)
        };
        let mass = pmf.speed_interval_mass(n, lo, hi, closed_left, true);
        let rate = if mass > 0.0 {
            -(mass.ln()) / n as f64
        } else {
            f64::INFINITY
        };
        out.push(BlockRate {
            lo,
            hi,
            closed_left,
            mass,
            rate,
        });
        i = next_i;
    }
    out
}

/// The full duality chain J* → J → (J, J̃) → I → I*, with λ_c bracket
/// refinement and a geometric cluster of grid points approaching λ_c from
/// below. A uniform λ-grid cannot resolve the diverging slope of J* near
/// λ_c, which is exactly what the small-|x| part of I needs.
#[derive(Debug, Clone)]
pub struct RateChain {
    pub jstar: HittingCgfCurve,
    pub hitting_rate: GridFunction,
    pub hitting_rate_left: GridFunction,
    pub rate: GridFunction,
    pub conjugate: GridFunction,
    pub speed: f64,
    pub mean_log_rho: f64,
}

pub struct RateChainParams<'a> {
    pub lambda_grid: &'a [f64],
    pub x_grid: &'a [f64],
    pub cf_n: u64,
    pub warmup: u32,
    pub seed: u64,
}

/// Default hitting-time grid for J: dense near 1 where J is steep, then
/// geometric out to where J has flattened toward its infimum.
pub fn default_t_grid() -> Vec<f64> {
    let mut t = Vec::new();
    for i in 0..=100 {
        t.push(1.0 + i as f64 * 0.01);
    }
    let mut v = 2.0f64;
    let ratio = (256.0f64 / 2.0).powf(1.0 / 160.0);
    for _ in 0..=160 {
        v *= ratio;
        t.push(v);
    }
    t.dedup_by(|a, b| *a <= *b);
    t
}

impl RateChain {
    pub fn compute(dist: &AlphaDistribution, params: &RateChainParams) -> RateChain {
        let eval = |l: f64| hitting_logmgf_rate(dist, params.cf_n, l, params.warmup, params.seed);
        let coarse = hitting_cgf_curve(
            dist,
            params.lambda_grid,
            params.cf_n,
            params.warmup,
            params.seed,
        );
        let mut pts: Vec<(f64, f64)> = coarse
            .curve
            .xs()
            .iter()
            .zip(coarse.curve.ys())
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| (*x, *y))
            .collect();
        let mut lambda_c = coarse.lambda_c;
        if let Some((mut lo, mut hi)) = lambda_c {
            // Tighten the bracket, then add points creeping up to it from
            // below; the slope of J* diverges there and a uniform grid
            // cannot represent it.
            for _ in 0..60 {
                if hi - lo <= 1e-10 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if eval(mid).is_finite() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lambda_c = Some((lo, hi));
            let spacing = pts
                .iter()
                .rev()
                .find(|&&(x, _)| x < lo - 1e-12)
                .map(|&(x, _)| lo - x)
                .unwrap_or(1e-3);
            let mut delta = spacing;
            for _ in 0..96 {
                delta *= 0.7;
                if delta < 1e-12 {
                    break;
                }
                let l = lo - delta;
                let y = eval(l);
                if y.is_finite() {
                    pts.push((l, y));
                }
            }
            let y_lo = eval(lo);
            if y_lo.is_finite() {
                pts.push((lo, y_lo));
            }
        }
        assert!(
            !pts.is_empty(),
            "every grid λ diverges; the λ-grid must contain a nonpositive point"
        );
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-13);
        let (lambdas, values): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let jstar_fine = GridFunction::new(lambdas, values).flag_convex();
        let t_grid = default_t_grid();
        let hitting_rate = legendre(&jstar_fine, &t_grid).expect("J* has a finite part");
        let mean_log_rho = dist.mean_log_rho();
        let hitting_rate_left = left_hitting_rate(&hitting_rate, mean_log_rho);
        let rate = displacement_rate(&hitting_rate, &hitting_rate_left, params.x_grid);
        let conjugate =
            displacement_cgf(&rate, params.lambda_grid).expect("rate has a finite part");
        RateChain {
            jstar: HittingCgfCurve {
                curve: jstar_fine,
                lambda_c,
            },
            hitting_rate,
            hitting_rate_left,
            rate,
            conjugate,
            speed: dist.speed(),
            mean_log_rho,
        }
    }
}
