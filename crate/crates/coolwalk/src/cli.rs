//! Batch entry point: flag parsing, subcommand dispatch, deterministic
//! seeding, CSV emission, and the run manifest.
//!
//! Exit codes: 0 success, 1 an acceptance band failed (outputs are still
//! written), 2 error.

use crate::cet::report_to_csv;
use crate::config::{parse_config_file, ExperimentConfig};
use crate::experiments::{
    annealed_tail_run, cet_run, conc_summary_to_csv, conc_to_csv, concentration_run, ldp_to_csv,
    ldp_cumulant_run, slln_run, slln_to_csv, tail_to_csv,
};
use crate::output::{write_atomic, RunManifest};
use crate::ratefn::{RateChain, RateChainParams};
use crate::rng::hash2;
use crate::walk::rwcre_pmf_with_frame;
use std::path::{Path, PathBuf};
use std::time::Instant;

const HELP: &str = "\
coolwalk — random walks in static and cooling random environments

USAGE:
    coolwalk <SUBCOMMAND> --config PATH [--seed U64] [--threads N] [--out DIR]

SUBCOMMANDS:
    rates   hitting-time cumulant curve and the full rate-function chain;
            writes jstar.csv, j.csv, jtilde.csv, i.csv, istar.csv
            (columns x,y,is_infinite)
    slln    trajectory speed band check; writes slln.csv
            (n,replica,ratio,deviation,within_epsilon)
    ldp     per-interval cumulant identity vs the chain conjugate;
            writes ldp.csv (n,lambda,lhs,istar,deviation)
    conc    cumulant concentration across environments; writes conc.csv
            (stat,n,env,value,deviation) and conc_summary.csv
            (stat,n,exceedance_fraction,iqr)
    tail    flat-piece slow-down tail exponent; writes tail.csv
            (n,p_hat,log_n,log_p)
    cet     cooling ergodic averaging of walk displacements; writes cet.csv
            (n,seed,total,r,b,d,deviation)
    pmf     exact cooling-chain law at time n; writes pmf.csv (site,mass)

FLAGS:
    --config PATH   experiment configuration file (required)
    --seed U64      master seed; overrides COOLWALK_SEED and the config
    --threads N     worker threads (default: all cores); never changes output
    --out DIR       output directory (default: .)
    -h, --help      this help

Seed precedence: --seed, then COOLWALK_SEED, then the config, then the
built-in default. Outputs are byte-identical for identical
(subcommand, config, seed) regardless of --threads.

A manifest.txt with the effective config, seed and wall time is written
after all outputs.

Exit codes: 0 success; 1 a report band failed (outputs intact); 2 error.
";

struct Args {
    subcommand: String,
    config: PathBuf,
    seed: Option<u64>,
    threads: Option<usize>,
    out: PathBuf,
}

fn parse_args(args: &[String]) -> Result<Option<Args>, String> {
    if args.is_empty() || args[0] == "-h" || args[0] == "--help" {
        return Ok(None);
    }
    let subcommand = args[0].clone();
    if !["rates", "slln", "ldp", "conc", "tail", "cet", "pmf"].contains(&subcommand.as_str()) {
        return Err(format!("unknown subcommand `{subcommand}`"));
    }
    let mut config = None;
    let mut seed = None;
    let mut threads = None;
    let mut out = PathBuf::from(".");
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "-h" | "--help" => return Ok(None),
            "--config" => {
                i += 1;
                config = Some(PathBuf::from(args.get(i).ok_or("--config needs a path")?));
            }
            "--seed" => {
                i += 1;
                let v = args.get(i).ok_or("--seed needs a value")?;
                seed = Some(v.parse::<u64>().map_err(|_| format!("bad seed `{v}`"))?);
            }
            "--threads" => {
                i += 1;
                let v = args.get(i).ok_or("--threads needs a value")?;
                let t: usize = v.parse().map_err(|_| format!("bad thread count `{v}`"))?;
                if t == 0 {
                    return Err("--threads must be >= 1".into());
                }
                threads = Some(t);
            }
            "--out" => {
                i += 1;
                out = PathBuf::from(args.get(i).ok_or("--out needs a directory")?);
            }
            other => return Err(format!("unknown flag `{other}`")),
        }
        i += 1;
    }
    let config = config.ok_or("--config is required")?;
    Ok(Some(Args {
        subcommand,
        config,
        seed,
        threads,
        out,
    }))
}

fn resolve_seed(flag: Option<u64>, cfg: &ExperimentConfig) -> Result<u64, String> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(v) = std::env::var("COOLWALK_SEED") {
        return v
            .parse::<u64>()
            .map_err(|_| format!("COOLWALK_SEED is not a u64: `{v}`"));
    }
    Ok(cfg.seed)
}

/// Run one subcommand against a resolved config, writing outputs and the
/// manifest into `out_dir`. Returns whether every report band held.
pub fn dispatch(
    subcommand: &str,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<bool, String> {
    std::fs::create_dir_all(out_dir).map_err(|e| format!("cannot create output dir: {e}"))?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(subcommand, cfg.seed, cfg.to_text());
    let base_meta = vec![
        ("subcommand".to_string(), subcommand.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
    ];
    let write = |name: &str, contents: &str, manifest: &mut RunManifest| -> Result<(), String> {
        write_atomic(&out_dir.join(name), contents)
            .map_err(|e| format!("cannot write {name}: {e}"))?;
        manifest.outputs.push(name.to_string());
        Ok(())
    };
    let band_ok = match subcommand {
        "rates" => {
            let lambda_grid = cfg.lambda_grid.resolve();
            let x_grid = cfg.x_grid.resolve();
            let chain = RateChain::compute(
                &cfg.dist,
                &RateChainParams {
                    lambda_grid: &lambda_grid,
                    x_grid: &x_grid,
                    cf_n: cfg.cf_n,
                    warmup: cfg.warmup,
                    seed: hash2(cfg.seed, 0x72_6174_6573),
                },
            );
            let mut m = base_meta.clone();
            let atoms = cfg
                .dist
                .atoms()
                .iter()
                .map(|a| format!("({}, {})", a.p, a.weight))
                .collect::<Vec<_>>()
                .join(", ");
            m.push(("dist_atoms".to_string(), atoms));
            m.push(("dist_id".to_string(), cfg.dist.id().to_string()));
            m.push(("cf_n".to_string(), cfg.cf_n.to_string()));
            m.push(("warmup".to_string(), cfg.warmup.to_string()));
            m.push(("speed".to_string(), chain.speed.to_string()));
            m.push(("mean_log_rho".to_string(), chain.mean_log_rho.to_string()));
            if let Some((lo, hi)) = chain.jstar.lambda_c {
                m.push(("lambda_c_bracket".to_string(), format!("[{lo}, {hi}]")));
            }
            let s_note = match cfg.dist.solve_s(1e-10) {
                Ok(s) => s.to_string(),
                Err(e) => format!("undefined ({e})"),
            };
            m.push(("s".to_string(), s_note.clone()));
            manifest.notes.push(format!("s = {s_note}"));
            write("jstar.csv", &chain.jstar.curve.to_csv(&m), &mut manifest)?;
            write("j.csv", &chain.hitting_rate.to_csv(&m), &mut manifest)?;
            write("jtilde.csv", &chain.hitting_rate_left.to_csv(&m), &mut manifest)?;
            write("i.csv", &chain.rate.to_csv(&m), &mut manifest)?;
            write("istar.csv", &chain.conjugate.to_csv(&m), &mut manifest)?;
            manifest.notes.push(format!("speed = {}", chain.speed));
            if let Some((lo, hi)) = chain.jstar.lambda_c {
                manifest
                    .notes
                    .push(format!("lambda_c bracket = [{lo}, {hi}]"));
            }
            true
        }
        "slln" => {
            if !cfg.map.is_cooling() {
                manifest
                    .notes
                    .push("map does not certify diverging increments (no-cooling comparison run)".into());
            }
            let r = slln_run(cfg);
            write("slln.csv", &slln_to_csv(&r, &base_meta), &mut manifest)?;
            r.band_ok
        }
        "ldp" => {
            let r = ldp_cumulant_run(cfg).map_err(|e| e.to_string())?;
            write("ldp.csv", &ldp_to_csv(&r, &base_meta), &mut manifest)?;
            r.band_ok
        }
        "conc" => {
            let r = concentration_run(cfg);
            write("conc.csv", &conc_to_csv(&r, &base_meta), &mut manifest)?;
            write(
                "conc_summary.csv",
                &conc_summary_to_csv(&r, &base_meta),
                &mut manifest,
            )?;
            r.band_ok
        }
        "tail" => {
            let r = annealed_tail_run(cfg).map_err(|e| e.to_string())?;
            write("tail.csv", &tail_to_csv(&r, &base_meta), &mut manifest)?;
            manifest.notes.push(r.note.clone());
            manifest
                .notes
                .push(format!(
                    "fitted_slope = {}, target = {}",
                    r.fitted_slope, r.target_slope
                ));
            r.band_ok
        }
        "cet" => {
            let r = cet_run(cfg);
            write("cet.csv", &report_to_csv(&r, &base_meta), &mut manifest)?;
            r.trend_inversions <= 1
        }
        "pmf" => {
            let n = cfg.n.unwrap_or(1_000);
            if n > cfg.exact_dp_cap {
                return Err(crate::experiments::ExperimentError::HorizonTooLongForExactDp {
                    n,
                    cap: cfg.exact_dp_cap,
                }
                .to_string());
            }
            let pmf = rwcre_pmf_with_frame(&cfg.dist, &cfg.map, n, cfg.seed, cfg.frame);
            let mut m = base_meta.clone();
            m.push(("n".to_string(), n.to_string()));
            m.push((
                "frame".to_string(),
                match cfg.frame {
                    crate::walk::Frame::Recentered => "recentered".to_string(),
                    crate::walk::Frame::Absolute => "absolute".to_string(),
                },
            ));
            write("pmf.csv", &pmf.to_csv(&m), &mut manifest)?;
            true
        }
        other => return Err(format!("unknown subcommand `{other}`")),
    };
    manifest.band_ok = band_ok;
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest
        .write(out_dir)
        .map_err(|e| format!("cannot write manifest: {e}"))?;
    Ok(band_ok)
}

/// CLI entry point; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let parsed = match parse_args(&args) {
        Ok(Some(a)) => a,
        Ok(None) => {
            print!("{HELP}");
            return 0;
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            return 2;
        }
    };
    let mut cfg = match parse_config_file(&parsed.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    cfg.seed = match resolve_seed(parsed.seed, &cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let work = || match dispatch(&parsed.subcommand, &cfg, &parsed.out) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("band check failed; outputs written");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    match parsed.threads {
        None => work(),
        Some(t) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    return 2;
                }
            };
            pool.install(work)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn tmp_dir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("coolwalk-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    const SMALL: &str = "\
[dist]
atoms = (0.8, 0.7), (0.3, 0.3)

[map]
kind = explicit
increments = 3, 5, 7

[run]
seed = 5
n = 12
";

    #[test]
    fn pmf_dispatch_writes_outputs() {
        let cfg = parse_config(SMALL).unwrap();
        let dir = tmp_dir("pmf");
        let ok = dispatch("pmf", &cfg, &dir).unwrap();
        assert!(ok);
        let pmf = std::fs::read_to_string(dir.join("pmf.csv")).unwrap();
        assert!(pmf.contains("site,mass"));
        let manifest = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(manifest.contains("subcommand = pmf"));
        assert!(manifest.contains("band_ok = true"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn pmf_rejects_horizon_beyond_cap() {
        let mut cfg = parse_config(SMALL).unwrap();
        cfg.n = Some(100);
        cfg.exact_dp_cap = 50;
        let dir = tmp_dir("pmfcap");
        let err = dispatch("pmf", &cfg, &dir).unwrap_err();
        assert!(err.contains("cap"), "{err}");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn arg_parsing() {
        let ok = parse_args(&[
            "slln".into(),
            "--config".into(),
            "x.cfg".into(),
            "--seed".into(),
            "9".into(),
        ])
        .unwrap()
        .unwrap();
        assert_eq!(ok.subcommand, "slln");
        assert_eq!(ok.seed, Some(9));
        assert!(parse_args(&["bogus".into()]).is_err());
        assert!(parse_args(&["slln".into()]).is_err());
        assert!(parse_args(&[]).unwrap().is_none());
        assert!(parse_args(&["--help".into()]).unwrap().is_none());
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let text = format!("{SMALL}replicas = 6\nn_grid = 50, 200\n");
        let cfg = parse_config(&text).unwrap();
        let d1 = tmp_dir("t1");
        let d2 = tmp_dir("t2");
        let p1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        p1.install(|| dispatch("slln", &cfg, &d1).unwrap());
        let p4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        p4.install(|| dispatch("slln", &cfg, &d2).unwrap());
        let a = std::fs::read_to_string(d1.join("slln.csv")).unwrap();
        let b = std::fs::read_to_string(d2.join("slln.csv")).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&d1).unwrap();
        std::fs::remove_dir_all(&d2).unwrap();
    }
}
