//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (visible with `cargo test --test acceptance --
//! --nocapture`). Every tolerance is pinned here, in code.

mod common;

use common::*;
use coolwalk::cet::{
    cooling_sum, cooling_weights, rbd_decompose, IidUniformProvider, LinearProvider,
    ToeplitzProvider,
};
use coolwalk::config::parse_config;
use coolwalk::env::{AlphaDistribution, CoolingMap};
use coolwalk::experiments::{annealed_tail_run, concentration_run, ldp_cumulant_run, slln_run, ConcStat};
use coolwalk::ratefn::{hitting_logmgf_rate, legendre, GridFunction, RateChain, RateChainParams};
use coolwalk::rng::{hash2, hash3};
use coolwalk::walk::{evolve_pmf, rwcre_pmf};
use coolwalk::LazyEnvironment;

fn max_site_diff(a: &coolwalk::LatticePmf, b: &coolwalk::LatticePmf) -> f64 {
    let lo = a.offset().min(b.offset());
    let hi = (a.offset() + a.weights().len() as i64).max(b.offset() + b.weights().len() as i64);
    (lo..hi)
        .map(|x| (a.value_at(x) - b.value_at(x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_01_exact_dp_oracle() {
    let dists = [
        ref_dist(),
        AlphaDistribution::new(&[(0.7, 0.4), (0.45, 0.6)], 0.3).unwrap(),
    ];
    let mut worst_static = 0.0f64;
    let mut cases = 0;
    for (i, dist) in dists.iter().enumerate() {
        for j in 0..25u64 {
            let seed = hash3(0xACC_E01, i as u64, j);
            let n = 1 + hash2(seed, 1) % 12;
            let env = LazyEnvironment::new(dist, seed);
            let dp = evolve_pmf(&env, n).unwrap();
            let oracle = enumerate_static_pmf(&env, n);
            worst_static = worst_static.max(max_site_diff(&dp, &oracle));
            cases += 1;
        }
    }
    assert_eq!(cases, 50);
    assert!(worst_static <= 1e-12, "static DP vs enumeration: {worst_static}");

    let mut worst_cooling = 0.0f64;
    for j in 0..12u64 {
        let seed = hash2(0xACC_E0B, j);
        // Random increment profile with total <= 12.
        let mut increments = Vec::new();
        let mut total = 0u64;
        let mut i = 0u64;
        while total < 12 {
            let t = (1 + hash3(seed, i, 7) % 5).min(12 - total);
            increments.push(t);
            total += t;
            i += 1;
        }
        let map = CoolingMap::explicit(increments).unwrap();
        let n = 1 + hash2(seed, 3) % 12;
        let pmf = rwcre_pmf(&ref_dist(), &map, n, seed);
        let oracle = enumerate_cooling_pmf(&ref_dist(), &map, n, seed);
        worst_cooling = worst_cooling.max(max_site_diff(&pmf, &oracle));
    }
    assert!(
        worst_cooling <= 1e-12,
        "cooling-chain convolution vs enumeration: {worst_cooling}"
    );
    println!(
        "acceptance 01 (exact forward pass vs path enumeration): PASS — max static diff {worst_static:.2e}, max cooling diff {worst_cooling:.2e}"
    );
}

#[test]
fn acceptance_02_speed_formula_and_slln_band() {
    let hom = AlphaDistribution::homogeneous(0.75).unwrap();
    assert_eq!(hom.speed(), 0.5, "homogeneous speed must be exactly 0.5");
    assert_eq!(
        ref_dist().speed(),
        1.0 / 15.0,
        "reference speed must be exactly 1/15"
    );
    let cfg = parse_config(
        "[dist]\natoms = (0.75, 1.0)\nreference = true\n\n[map]\nkind = polynomial\na = 1.5\n\n\
         [run]\nseed = 424242\nreplicas = 50\nepsilon = 0.02\nn_grid = 1000, 10000, 100000\n",
    )
    .unwrap();
    let report = slln_run(&cfg);
    let (n, frac, median_dev) = *report.per_n.last().unwrap();
    assert_eq!(n, 100_000);
    assert!(
        frac >= 0.90,
        "only {:.0}% of replicas within 0.02 at n = 1e5",
        frac * 100.0
    );
    println!(
        "acceptance 02 (speed exact + trajectory band): PASS — v(0.75) = 0.5, v(ref) = 1/15, {:.0}% within 0.02 at n=1e5 (median |dev| {median_dev:.4})",
        frac * 100.0
    );
}

#[test]
fn acceptance_03_continued_fraction_fair_walk() {
    let fair = fair_dist();
    let oracle = homogeneous_phi(0.5, -0.1).unwrap().ln();
    let got = hitting_logmgf_rate(&fair, 10_000, -0.1, 256, 99);
    assert!(
        (got - oracle).abs() <= 1e-6,
        "sweep {got} vs closed form {oracle}"
    );
    let doubled = hitting_logmgf_rate(&fair, 10_000, -0.1, 512, 99);
    assert!(
        (got - doubled).abs() < 1e-9,
        "warmup doubling moved the result by {}",
        (got - doubled).abs()
    );
    let diverged = hitting_logmgf_rate(&fair, 10_000, 0.1, 256, 99);
    assert!(diverged.is_infinite() && diverged > 0.0);
    // Also on the disordered reference law: warmup insensitivity.
    let a = hitting_logmgf_rate(&ref_dist(), 10_000, -0.5, 256, 99);
    let b = hitting_logmgf_rate(&ref_dist(), 10_000, -0.5, 512, 99);
    assert!((a - b).abs() < 1e-9);
    println!(
        "acceptance 03 (continued fraction): PASS — J*(-0.1) = {got:.9} (closed form {oracle:.9}), λ=+0.1 diverges, warmup-doubling shift {:.1e}",
        (got - doubled).abs()
    );
}

#[test]
fn acceptance_04_legendre_machinery() {
    // Self-conjugacy of x^2/2 within O(h^2).
    let h = 0.015f64;
    let xs: Vec<f64> = (-200..=200).map(|i| i as f64 * h).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
    let f = GridFunction::new(xs.clone(), ys);
    let g = legendre(&f, &xs).unwrap();
    let mut quad_err = 0.0f64;
    for (l, gl) in g.xs().iter().zip(g.ys()) {
        quad_err = quad_err.max((gl - 0.5 * l * l).abs());
    }
    assert!(quad_err <= h * h, "self-conjugacy error {quad_err} > h^2");

    // Biconjugate equals the lower convex hull, against the direct hull
    // oracle, on 20 random continuous piecewise-linear functions.
    let grid_h = 0.01f64;
    let xs: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 * grid_h).collect();
    let mut hull_err = 0.0f64;
    for seed in 0..20u64 {
        let kink = |j: u64| 2.0 * coolwalk::rng::unit_f64(hash2(seed, j));
        let ys: Vec<f64> = (0..xs.len())
            .map(|i| {
                let j = (i / 25) as u64;
                let t = (i % 25) as f64 / 25.0;
                kink(j) * (1.0 - t) + kink(j + 1) * t
            })
            .collect();
        let f = GridFunction::new(xs.clone(), ys.clone());
        let max_slope = ys
            .windows(2)
            .map(|w| ((w[1] - w[0]) / grid_h).abs())
            .fold(0.0f64, f64::max)
            + 1.0;
        let m = 2000;
        let lgrid: Vec<f64> = (0..=m)
            .map(|i| -max_slope + 2.0 * max_slope * i as f64 / m as f64)
            .collect();
        let fstar = legendre(&f, &lgrid).unwrap();
        let fss = legendre(&fstar, &xs).unwrap();
        let hull = lower_convex_hull(&xs, &ys);
        for (a, b) in fss.ys().iter().zip(&hull) {
            hull_err = hull_err.max((a - b).abs());
        }
    }
    assert!(
        hull_err <= 2.0 * grid_h,
        "biconjugate vs hull error {hull_err} > 2 grid steps"
    );
    println!(
        "acceptance 04 (convex-conjugate machinery): PASS — quadratic self-conjugacy err {quad_err:.2e} (h² = {:.2e}), biconjugate-vs-hull err {hull_err:.2e}",
        h * h
    );
}

#[test]
fn acceptance_05_duality_chain_fair_reference() {
    let lambda_grid: Vec<f64> = (-400..=200).map(|i| i as f64 * 0.015).collect();
    let x_grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.0025).collect();
    let chain = RateChain::compute(
        &fair_dist(),
        &RateChainParams {
            lambda_grid: &lambda_grid,
            x_grid: &x_grid,
            cf_n: 4_000,
            warmup: 256,
            seed: 0,
        },
    );
    let mut rate_err = 0.0f64;
    for (x, y) in chain.rate.xs().iter().zip(chain.rate.ys()) {
        if x.abs() <= 0.9 {
            rate_err = rate_err.max((y - cramer_rate(*x)).abs());
        }
    }
    assert!(rate_err < 1e-3, "rate vs closed form: {rate_err}");
    let mut conj_err = 0.0f64;
    for (l, y) in chain.conjugate.xs().iter().zip(chain.conjugate.ys()) {
        if l.abs() <= 2.0 {
            conj_err = conj_err.max((y - l.cosh().ln()).abs());
        }
    }
    assert!(conj_err < 1e-3, "conjugate vs log cosh: {conj_err}");
    println!(
        "acceptance 05 (duality chain, fair reference): PASS — max |I - Cramér| {rate_err:.2e} on [-0.9,0.9], max |I* - log cosh| {conj_err:.2e} on [-2,2]"
    );
}

#[test]
fn acceptance_06_cooling_cumulant_identity() {
    let cfg = parse_config(
        "[dist]\natoms = (0.8, 0.7), (0.3, 0.3)\n\n[map]\nkind = polynomial\na = 1.5\n\n\
         [run]\nseed = 31415\nlambda_grid = -1, -0.25\nn_grid = 2000, 8000, 20000\ncf_n = 10000\n",
    )
    .unwrap();
    let report = ldp_cumulant_run(&cfg).unwrap();
    for &(lambda, inv, last) in &report.per_lambda {
        assert!(
            inv <= 1,
            "λ = {lambda}: deviation trend has {inv} inversions"
        );
        assert!(last < 0.05, "λ = {lambda}: final deviation {last}");
    }
    let detail: Vec<String> = report
        .per_lambda
        .iter()
        .map(|(l, inv, last)| format!("λ={l}: final dev {last:.4} ({inv} inversions)"))
        .collect();
    println!(
        "acceptance 06 (per-interval cumulant identity vs chain conjugate): PASS — {}",
        detail.join("; ")
    );
}

#[test]
fn acceptance_07_concentration_trend() {
    let cfg = parse_config(
        "[dist]\natoms = (0.8, 0.7), (0.3, 0.3)\n\n[map]\nkind = polynomial\na = 1.5\n\n\
         [run]\nseed = 2718\nenvironments = 200\nepsilon = 0.02\nconc_lambda = -0.25\n",
    )
    .unwrap();
    let report = concentration_run(&cfg);
    let hit: Vec<(u64, f64)> = report
        .summary
        .iter()
        .filter(|(s, _, _, _)| *s == ConcStat::Hitting)
        .map(|&(_, n, frac, _)| (n, frac))
        .collect();
    assert_eq!(
        hit.iter().map(|&(n, _)| n).collect::<Vec<_>>(),
        vec![1_000, 4_000, 16_000]
    );
    let fracs: Vec<f64> = hit.iter().map(|&(_, f)| f).collect();
    assert!(
        inversions(&fracs) <= 1,
        "exceedance fractions not non-increasing: {fracs:?}"
    );
    // The report band also covers the displacement-statistic IQR trend.
    assert!(report.band_ok, "concentration report band failed");
    println!(
        "acceptance 07 (cumulant concentration trend, M=200): PASS — exceedance at ε=0.02: {}",
        hit.iter()
            .map(|(n, f)| format!("n={n}: {f:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
}

#[test]
fn acceptance_08_flat_piece_exponent() {
    let dist = ref_dist();
    let s = dist.solve_s(1e-10).unwrap();
    let s_oracle = solve_s_oracle(&[(0.8, 0.7), (0.3, 0.3)], 1e-12);
    assert!(
        (s - s_oracle).abs() <= 1e-6,
        "s = {s} vs independent bisection {s_oracle}"
    );
    assert!((s - 1.2698).abs() < 1e-3, "s = {s} far from 1.2698");
    let cfg = parse_config(
        "[dist]\natoms = (0.8, 0.7), (0.3, 0.3)\n\n[map]\nkind = constant\nt = 1\n\n\
         [run]\nseed = 1618\nenvironments = 400\nn_grid = 1000, 2000, 4000, 8000\n",
    )
    .unwrap();
    let report = annealed_tail_run(&cfg).unwrap();
    assert!(!report.note.is_empty(), "desk-scale caveat must be reported");
    assert!(report.fitted_slope.is_finite());
    println!(
        "acceptance 08 (flat-piece tail exponent): s = {s:.6} within 1e-6 of the independent \
         bisection oracle; fitted log n-slope {:.4} vs target {:.4}; report caveat: {}",
        report.fitted_slope, report.target_slope, report.note
    );
    // The band assertion as stated. It cannot pass at this scale: with
    // s - 1 = 0.27 the fluctuation scale n^(1/s - 1) still exceeds the speed
    // 1/15 over the whole n-grid (0.23 at n=1e3, 0.16 at n=8e3), so the
    // slow-down interval sits inside the bulk of the position law and its
    // averaged mass is flat in n (~0.06-0.09 out to n=16000, measured); the
    // polynomial-decay regime only opens around n ~ 1e8, far beyond the
    // exact quadratic-cost estimator. Kept red rather than loosened.
    assert!(
        report.fitted_slope < 0.0
            && (report.fitted_slope - report.target_slope).abs() <= 0.15,
        "flat-piece band check failed as analysed: fitted slope {:.4} is not within ±0.15 of \
         target {:.4} (nor reliably negative) because n_grid {{1e3..8e3}} precedes the \
         asymptotic regime for this law; see the decisions ledger for the full analysis",
        report.fitted_slope,
        report.target_slope
    );
    println!("acceptance 08 (flat-piece tail exponent): PASS");
}

#[test]
fn acceptance_09_cet_harness_algebra() {
    // Weight normalization: integer identity exact, float sum to 1e-12.
    let maps = [
        CoolingMap::polynomial(1.5).unwrap(),
        CoolingMap::exponential(0.4).unwrap(),
        CoolingMap::constant(5).unwrap(),
        CoolingMap::explicit(vec![2, 3, 5, 8, 13]).unwrap(),
    ];
    for map in &maps {
        for n in [1u64, 13, 144, 12_345] {
            let (ell, bar_t) = map.locate(n);
            let int_sum: u64 = (1..ell).map(|k| map.increment(k)).sum::<u64>() + bar_t;
            assert_eq!(int_sum, n, "integer weight identity");
            let (gammas, gamma_bar) = cooling_weights(map, n);
            let fsum: f64 = gammas.iter().sum::<f64>() + gamma_bar;
            assert!((fsum - 1.0).abs() <= 1e-12);
        }
    }
    // Exact-means R+B+D identity to 1e-12.
    let iid = IidUniformProvider {
        mean: 0.3,
        half_width: 1.0,
    };
    let map = CoolingMap::polynomial(1.5).unwrap();
    let mut worst_resid = 0.0f64;
    for seed in 0..20u64 {
        for n in [100u64, 1_000, 10_000] {
            let total = cooling_sum(&iid, &map, n, seed);
            let row = rbd_decompose(&iid, &map, n, 0.3, seed);
            let resid = (total - 0.3 - (row.refreshed + row.boundary + row.deterministic)).abs();
            worst_resid = worst_resid.max(resid);
        }
    }
    assert!(worst_resid <= 1e-12, "R+B+D residual {worst_resid}");
    // Deterministic provider: zero deviation exactly.
    let lin = LinearProvider { limit: 0.5 };
    for n in [7u64, 99, 5_000] {
        assert_eq!(cooling_sum(&lin, &map, n, 3), 0.5);
        let row = rbd_decompose(&lin, &map, n, 0.5, 3);
        assert_eq!(row.deviation, 0.0);
        assert_eq!(row.refreshed, 0.0);
        assert_eq!(row.boundary, 0.0);
    }
    // Toeplitz rows: D_n -> 0 along the grid.
    let toep = ToeplitzProvider { limit: 0.5 };
    let mut d_prev = f64::INFINITY;
    let mut d_last = 0.0;
    for n in [100u64, 1_000, 10_000, 100_000] {
        let row = rbd_decompose(&toep, &map, n, 0.5, 0);
        assert!(row.deterministic < d_prev, "D_n not decreasing at n={n}");
        d_prev = row.deterministic;
        d_last = row.deterministic;
    }
    assert!(d_last < 0.02, "D_n at n=1e5 still {d_last}");
    println!(
        "acceptance 09 (ergodic-averaging harness algebra): PASS — worst R+B+D residual {worst_resid:.2e}, Toeplitz D_n(1e5) = {d_last:.5}"
    );
}

#[test]
fn acceptance_10_byte_identical_reruns() {
    let text = "[dist]\natoms = (0.8, 0.7), (0.3, 0.3)\n\n[map]\nkind = explicit\nincrements = 3, 5, 7\n\n\
                [run]\nseed = 11\nreplicas = 8\nn_grid = 50, 200\nn = 16\n";
    let cfg = parse_config(text).unwrap();
    let base = std::env::temp_dir().join(format!("coolwalk-acc10-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let mut outputs: Vec<(String, String)> = Vec::new();
    for (i, threads) in [1usize, 4, 1].iter().enumerate() {
        let dir = base.join(format!("run{i}"));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(*threads)
            .build()
            .unwrap();
        pool.install(|| {
            coolwalk::cli::dispatch("slln", &cfg, &dir).unwrap();
            coolwalk::cli::dispatch("pmf", &cfg, &dir).unwrap();
        });
        let slln = std::fs::read_to_string(dir.join("slln.csv")).unwrap();
        let pmf = std::fs::read_to_string(dir.join("pmf.csv")).unwrap();
        outputs.push((slln, pmf));
    }
    assert_eq!(outputs[0], outputs[1], "1 vs 4 threads changed output bytes");
    assert_eq!(outputs[0], outputs[2], "rerun changed output bytes");
    std::fs::remove_dir_all(&base).unwrap();
    println!(
        "acceptance 10 (reproducibility): PASS — slln.csv and pmf.csv byte-identical across reruns and thread counts 1/4"
    );
}
