//! Experiment configuration: a small sectioned key/value text format.
//!
//! ```text
//! [dist]
//! atoms = (0.8, 0.7), (0.3, 0.3)
//! ellipticity = 0.2
//!
//! [map]
//! kind = polynomial
//! a = 1.5
//!
//! [run]
//! seed = 42
//! n_grid = 1000, 4000, 16000
//! lambda_grid = linspace(-3, 3, 401)
//! ```
//!
//! Unknown sections and keys are errors, not warnings. `to_text` emits the
//! effective configuration in canonical form; parsing that text yields an
//! identical configuration.

use crate::env::{AlphaDistribution, CoolingKind, CoolingMap, EnvError};
use crate::walk::Frame;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid value for `{field}`: {msg}")]
    Validation { field: String, msg: String },
}

impl ConfigError {
    fn validation(field: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Validation {
            field: field.to_string(),
            msg: msg.into(),
        }
    }
}

fn env_err(field: &str, e: EnvError) -> ConfigError {
    ConfigError::validation(field, e.to_string())
}

/// A numeric grid, kept in the form it was written in.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Linspace { lo: f64, hi: f64, points: u32 },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            GridSpec::Linspace { lo, hi, points } => {
                let k = *points as usize;
                (0..k)
                    .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                    .collect()
            }
            GridSpec::List(v) => v.clone(),
        }
    }

    fn to_text(&self) -> String {
        match self {
            GridSpec::Linspace { lo, hi, points } => format!("linspace({lo}, {hi}, {points})"),
            GridSpec::List(v) => v
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x636F_6F6C_7761_6C6B;

/// Validated experiment configuration with defaults filled.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dist: AlphaDistribution,
    pub map: CoolingMap,
    /// The `reference = true` flag that allows non-nested distributions.
    pub reference: bool,
    pub seed: u64,
    pub replicas: u32,
    pub environments: u32,
    pub epsilon: f64,
    pub warmup: u32,
    pub cf_n: u64,
    pub exact_dp_cap: u64,
    pub block_n: u32,
    pub conc_lambda: f64,
    pub frame: Frame,
    /// Single time horizon (pmf subcommand).
    pub n: Option<u64>,
    /// Time grid; drivers fill their own default when absent.
    pub n_grid: Option<Vec<u64>>,
    pub lambda_grid: GridSpec,
    pub x_grid: GridSpec,
}

struct RawAtoms {
    atoms: Vec<(f64, f64)>,
    ellipticity: Option<f64>,
    reference: bool,
}

/// Tightest ellipticity constant compatible with the atoms.
fn default_ellipticity(atoms: &[(f64, f64)]) -> f64 {
    atoms
        .iter()
        .map(|&(p, _)| p.min(1.0 - p))
        .fold(0.5f64, f64::min)
}

/// Parse an atom list literal: `(p, w), (p, w), ...`
pub fn parse_atom_list(s: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut atoms = Vec::new();
    let mut rest = s.trim();
    if rest.is_empty() {
        return Err("empty atom list".into());
    }
    loop {
        rest = rest.trim_start();
        let Some(stripped) = rest.strip_prefix('(') else {
            return Err(format!("expected '(' at `{}`", truncate(rest)));
        };
        let Some(close) = stripped.find(')') else {
            return Err("missing ')'".into());
        };
        let inner = &stripped[..close];
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("expected `p, w` inside parentheses, got `{inner}`"));
        }
        let p: f64 = parse_float(parts[0])?;
        let w: f64 = parse_float(parts[1])?;
        atoms.push((p, w));
        rest = stripped[close + 1..].trim_start();
        if rest.is_empty() {
            break;
        }
        let Some(tail) = rest.strip_prefix(',') else {
            return Err(format!("expected ',' between atoms at `{}`", truncate(rest)));
        };
        rest = tail;
        if rest.trim().is_empty() {
            return Err("trailing comma in atom list".into());
        }
    }
    if atoms.len() > 64 {
        return Err("too many atoms (max 64)".into());
    }
    Ok(atoms)
}

fn truncate(s: &str) -> String {
    let t: String = s.chars().take(16).collect();
    if s.chars().count() > 16 {
        format!("{t}...")
    } else {
        t
    }
}

fn parse_float(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let v: f64 = t.parse().map_err(|_| format!("not a number: `{}`", truncate(t)))?;
    if !v.is_finite() {
        return Err(format!("not finite: `{}`", truncate(t)));
    }
    Ok(v)
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("not a nonnegative integer: `{}`", truncate(s.trim())))
}

fn parse_u32(s: &str) -> Result<u32, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("not a nonnegative integer: `{}`", truncate(s.trim())))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true/false, got `{}`", truncate(other))),
    }
}

fn parse_float_list(s: &str) -> Result<Vec<f64>, String> {
    let items: Result<Vec<f64>, String> = s.split(',').map(parse_float).collect();
    let v = items?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    if v.len() > 100_000 {
        return Err("list too long".into());
    }
    Ok(v)
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    let items: Result<Vec<u64>, String> = s.split(',').map(parse_u64).collect();
    let v = items?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    if v.len() > 100_000 {
        return Err("list too long".into());
    }
    Ok(v)
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let t = s.trim();
    if let Some(stripped) = t.strip_prefix("linspace(") {
        let Some(inner) = stripped.strip_suffix(')') else {
            return Err("linspace: missing ')'".into());
        };
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err("linspace needs (lo, hi, points)".into());
        }
        let lo = parse_float(parts[0])?;
        let hi = parse_float(parts[1])?;
        let points = parse_u32(parts[2])?;
        if lo >= hi {
            return Err("linspace: lo must be < hi".into());
        }
        if !(2..=1_000_000).contains(&points) {
            return Err("linspace: points must be in [2, 1e6]".into());
        }
        Ok(GridSpec::Linspace { lo, hi, points })
    } else {
        let v = parse_float_list(t)?;
        if !v.windows(2).all(|w| w[0] < w[1]) {
            return Err("grid list must be strictly increasing".into());
        }
        Ok(GridSpec::List(v))
    }
}

#[derive(Default)]
struct RawMap {
    kind: Option<String>,
    a: Option<f64>,
    b: Option<f64>,
    t: Option<u64>,
    increments: Option<Vec<u64>>,
}

/// Parse configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut section = String::new();
    let mut dist_spec = RawAtoms {
        atoms: Vec::new(),
        ellipticity: None,
        reference: false,
    };
    let mut map_spec = RawMap::default();
    let mut seed = DEFAULT_SEED;
    let mut replicas: u32 = 50;
    let mut environments: u32 = 200;
    let mut epsilon: f64 = 0.02;
    let mut warmup: u32 = 256;
    let mut cf_n: u64 = 10_000;
    let mut exact_dp_cap: u64 = 20_000;
    let mut block_n: u32 = 20;
    let mut conc_lambda: f64 = -0.25;
    let mut frame = Frame::Recentered;
    let mut n: Option<u64> = None;
    let mut n_grid: Option<Vec<u64>> = None;
    let mut lambda_grid = GridSpec::Linspace {
        lo: -3.0,
        hi: 3.0,
        points: 401,
    };
    let mut x_grid = GridSpec::Linspace {
        lo: -1.0,
        hi: 1.0,
        points: 401,
    };

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(sec) = trimmed.strip_prefix('[') {
            let Some(name) = sec.strip_suffix(']') else {
                return Err(ConfigError::Parse {
                    line,
                    col: stripped.find('[').unwrap_or(0) + 1,
                    msg: "unterminated section header".into(),
                });
            };
            let name = name.trim();
            if !["dist", "map", "run"].contains(&name) {
                return Err(ConfigError::Parse {
                    line,
                    col: 1,
                    msg: format!("unknown section `[{name}]`"),
                });
            }
            section = name.to_string();
            continue;
        }
        let Some(eq) = stripped.find('=') else {
            return Err(ConfigError::Parse {
                line,
                col: 1,
                msg: "expected `key = value`".into(),
            });
        };
        let key = stripped[..eq].trim();
        let value = stripped[eq + 1..].trim();
        let val_col = eq + 2;
        let err = |msg: String| ConfigError::Parse {
            line,
            col: val_col,
            msg,
        };
        let key_err = |msg: String| ConfigError::Parse {
            line,
            col: 1,
            msg,
        };
        match (section.as_str(), key) {
            ("dist", "atoms") => dist_spec.atoms = parse_atom_list(value).map_err(err)?,
            ("dist", "ellipticity") => {
                dist_spec.ellipticity = Some(parse_float(value).map_err(err)?)
            }
            ("dist", "reference") => dist_spec.reference = parse_bool(value).map_err(err)?,
            ("map", "kind") => map_spec.kind = Some(value.to_string()),
            ("map", "a") => map_spec.a = Some(parse_float(value).map_err(err)?),
            ("map", "b") => map_spec.b = Some(parse_float(value).map_err(err)?),
            ("map", "t") => map_spec.t = Some(parse_u64(value).map_err(err)?),
            ("map", "increments") => {
                map_spec.increments = Some(parse_u64_list(value).map_err(err)?)
            }
            ("run", "seed") => seed = parse_u64(value).map_err(err)?,
            ("run", "replicas") => replicas = parse_u32(value).map_err(err)?,
            ("run", "environments") => environments = parse_u32(value).map_err(err)?,
            ("run", "epsilon") => epsilon = parse_float(value).map_err(err)?,
            ("run", "warmup") => warmup = parse_u32(value).map_err(err)?,
            ("run", "cf_n") => cf_n = parse_u64(value).map_err(err)?,
            ("run", "exact_dp_cap") => exact_dp_cap = parse_u64(value).map_err(err)?,
            ("run", "block_n") => block_n = parse_u32(value).map_err(err)?,
            ("run", "conc_lambda") => conc_lambda = parse_float(value).map_err(err)?,
            ("run", "frame") => {
                frame = match value {
                    "recentered" => Frame::Recentered,
                    "absolute" => Frame::Absolute,
                    other => {
                        return Err(err(format!(
                            "expected recentered/absolute, got `{}`",
                            truncate(other)
                        )))
                    }
                }
            }
            ("run", "n") => n = Some(parse_u64(value).map_err(err)?),
            ("run", "n_grid") => {
                let grid = parse_u64_list(value).map_err(err)?;
                if !grid.windows(2).all(|w| w[0] < w[1]) {
                    return Err(err("n_grid must be strictly increasing".into()));
                }
                n_grid = Some(grid);
            }
            ("run", "lambda_grid") => lambda_grid = parse_grid(value).map_err(err)?,
            ("run", "x_grid") => x_grid = parse_grid(value).map_err(err)?,
            ("", k) => {
                return Err(key_err(format!(
                    "key `{}` before any section header",
                    truncate(k)
                )))
            }
            (s, k) => {
                return Err(key_err(format!(
                    "unknown key `{}` in section [{s}]",
                    truncate(k)
                )))
            }
        }
    }

    if dist_spec.atoms.is_empty() {
        return Err(ConfigError::validation("dist.atoms", "missing"));
    }
    let c = dist_spec
        .ellipticity
        .unwrap_or_else(|| default_ellipticity(&dist_spec.atoms));
    let dist = if dist_spec.reference {
        AlphaDistribution::reference(&dist_spec.atoms, c).map_err(|e| env_err("dist", e))?
    } else {
        AlphaDistribution::new(&dist_spec.atoms, c).map_err(|e| env_err("dist", e))?
    };
    let map = match map_spec.kind.as_deref() {
        None => return Err(ConfigError::validation("map.kind", "missing")),
        Some("polynomial") => {
            let a = map_spec
                .a
                .ok_or_else(|| ConfigError::validation("map.a", "missing for polynomial map"))?;
            CoolingMap::polynomial(a).map_err(|e| env_err("map.a", e))?
        }
        Some("exponential") => {
            let b = map_spec
                .b
                .ok_or_else(|| ConfigError::validation("map.b", "missing for exponential map"))?;
            CoolingMap::exponential(b).map_err(|e| env_err("map.b", e))?
        }
        Some("constant") => {
            let t = map_spec
                .t
                .ok_or_else(|| ConfigError::validation("map.t", "missing for constant map"))?;
            CoolingMap::constant(t).map_err(|e| env_err("map.t", e))?
        }
        Some("explicit") => {
            let inc = map_spec.increments.ok_or_else(|| {
                ConfigError::validation("map.increments", "missing for explicit map")
            })?;
            CoolingMap::explicit(inc).map_err(|e| env_err("map.increments", e))?
        }
        Some(other) => {
            return Err(ConfigError::validation(
                "map.kind",
                format!("unknown kind `{}`", truncate(other)),
            ))
        }
    };
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ConfigError::validation("run.epsilon", "must be positive"));
    }
    if replicas < 1 {
        return Err(ConfigError::validation("run.replicas", "must be >= 1"));
    }
    if environments < 1 {
        return Err(ConfigError::validation("run.environments", "must be >= 1"));
    }
    if warmup < 1 {
        return Err(ConfigError::validation("run.warmup", "must be >= 1"));
    }
    if cf_n < 1 {
        return Err(ConfigError::validation("run.cf_n", "must be >= 1"));
    }
    if block_n < 1 {
        return Err(ConfigError::validation("run.block_n", "must be >= 1"));
    }
    if !lambda_grid.resolve().iter().any(|&l| l <= 0.0) {
        return Err(ConfigError::validation(
            "run.lambda_grid",
            "must contain at least one nonpositive point (the cumulant curve diverges for large positive arguments)",
        ));
    }
    if x_grid
        .resolve()
        .iter()
        .any(|&x| !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&x))
    {
        return Err(ConfigError::validation(
            "run.x_grid",
            "must lie within [-1, 1], the support of the empirical speed",
        ));
    }
    Ok(ExperimentConfig {
        dist,
        map,
        reference: dist_spec.reference,
        seed,
        replicas,
        environments,
        epsilon,
        warmup,
        cf_n,
        exact_dp_cap,
        block_n,
        conc_lambda,
        frame,
        n,
        n_grid,
        lambda_grid,
        x_grid,
    })
}

pub fn parse_config_file(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: 0,
        col: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// Canonical emission of the effective configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[dist]\n");
        let atoms = self
            .dist
            .atoms()
            .iter()
            .map(|a| format!("({}, {})", a.p, a.weight))
            .collect::<Vec<_>>()
            .join(", ");
        s.push_str(&format!("atoms = {atoms}\n"));
        s.push_str(&format!("ellipticity = {}\n", self.dist.ellipticity()));
        s.push_str(&format!("reference = {}\n", self.reference));
        s.push_str("\n[map]\n");
        match self.map.kind() {
            CoolingKind::Polynomial { a } => {
                s.push_str("kind = polynomial\n");
                s.push_str(&format!("a = {a}\n"));
            }
            CoolingKind::Exponential { b } => {
                s.push_str("kind = exponential\n");
                s.push_str(&format!("b = {b}\n"));
            }
            CoolingKind::Constant { t } => {
                s.push_str("kind = constant\n");
                s.push_str(&format!("t = {t}\n"));
            }
            CoolingKind::Explicit { increments } => {
                s.push_str("kind = explicit\n");
                let inc = increments
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(", ");
                s.push_str(&format!("increments = {inc}\n"));
            }
        }
        s.push_str("\n[run]\n");
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("replicas = {}\n", self.replicas));
        s.push_str(&format!("environments = {}\n", self.environments));
        s.push_str(&format!("epsilon = {}\n", self.epsilon));
        s.push_str(&format!("warmup = {}\n", self.warmup));
        s.push_str(&format!("cf_n = {}\n", self.cf_n));
        s.push_str(&format!("exact_dp_cap = {}\n", self.exact_dp_cap));
        s.push_str(&format!("block_n = {}\n", self.block_n));
        s.push_str(&format!("conc_lambda = {}\n", self.conc_lambda));
        s.push_str(&format!(
            "frame = {}\n",
            match self.frame {
                Frame::Recentered => "recentered",
                Frame::Absolute => "absolute",
            }
        ));
        if let Some(n) = self.n {
            s.push_str(&format!("n = {n}\n"));
        }
        if let Some(grid) = &self.n_grid {
            let g = grid
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            s.push_str(&format!("n_grid = {g}\n"));
        }
        s.push_str(&format!("lambda_grid = {}\n", self.lambda_grid.to_text()));
        s.push_str(&format!("x_grid = {}\n", self.x_grid.to_text()));
        s
    }
}
