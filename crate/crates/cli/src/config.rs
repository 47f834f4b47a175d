//! Run configuration: a flat `key = value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hvarx::{CvMode, PenaltyKind};
use serde::Serialize;

use crate::Failure;

/// Either a fixed order or the `⌊1.5√T⌋` rule resolved after loading the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Auto,
    Fixed(usize),
}

impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Order::Auto => s.serialize_str("auto"),
            Order::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(Order::Auto)
        } else {
            s.parse().map(Order::Fixed).map_err(|_| format!("expected an integer or \"auto\", got {s:?}"))
        }
    }
}

/// Every setting a subcommand can read, after merging file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub endo_path: Option<PathBuf>,
    pub exog_path: Option<PathBuf>,
    pub p: Order,
    pub s: Order,
    #[serde(serialize_with = "penalty_label")]
    pub penalty: PenaltyKind,
    pub lambda_phi: Option<f64>,
    pub lambda_b: Option<f64>,
    pub grid_points: usize,
    pub grid_ratio: f64,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub cv_mode: CvMode,
    pub parallel_eval: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub verbosity: u8,
    // simulate
    pub k: usize,
    pub m: usize,
    pub t_len: usize,
    pub max_lag: usize,
    pub density: f64,
    pub coefficient_scale: f64,
    pub target_radius: f64,
    pub innovation_sd: f64,
    pub burn_in: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            endo_path: None,
            exog_path: None,
            p: Order::Auto,
            s: Order::Auto,
            penalty: PenaltyKind::Hierarchical,
            lambda_phi: None,
            lambda_b: None,
            grid_points: 10,
            grid_ratio: 1e-3,
            test_fraction: 0.15,
            validation_fraction: 0.15,
            cv_mode: CvMode::WarmStart,
            parallel_eval: false,
            max_iter: 10_000,
            tol: 1e-5,
            output_dir: PathBuf::from("hvarx-out"),
            seed: 1,
            verbosity: 1,
            k: 4,
            m: 2,
            t_len: 200,
            max_lag: 2,
            density: 0.25,
            coefficient_scale: 0.5,
            target_radius: 0.8,
            innovation_sd: 1.0,
            burn_in: 200,
        }
    }
}

fn penalty_label<S: serde::Serializer>(p: &PenaltyKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(p.label())
}

pub fn parse_penalty(s: &str) -> Result<PenaltyKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "hvarx" | "hierarchical" => Ok(PenaltyKind::Hierarchical),
        "l1" | "lasso" => Ok(PenaltyKind::L1),
        _ => Err(format!("expected \"hvarx\" or \"l1\", got {s:?}")),
    }
}

fn parse_cv_mode(s: &str) -> Result<CvMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "warm_start" | "warm-start" | "sequential" => Ok(CvMode::WarmStart),
        "parallel" => Ok(CvMode::Parallel),
        _ => Err(format!("expected \"warm_start\" or \"parallel\", got {s:?}")),
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid number {s:?}"))
}

impl RunConfig {
    /// Applies one `key = value` setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "endo_path" => self.endo_path = Some(PathBuf::from(value)),
            "exog_path" => self.exog_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "p" => self.p = value.parse()?,
            "s" => self.s = value.parse()?,
            "penalty" => self.penalty = parse_penalty(value)?,
            "lambda_phi" => self.lambda_phi = Some(parse_num(value)?),
            "lambda_b" => self.lambda_b = Some(parse_num(value)?),
            "grid_points" => self.grid_points = parse_num(value)?,
            "grid_ratio" => self.grid_ratio = parse_num(value)?,
            "test_fraction" => self.test_fraction = parse_num(value)?,
            "validation_fraction" => self.validation_fraction = parse_num(value)?,
            "cv_mode" => self.cv_mode = parse_cv_mode(value)?,
            "parallel_eval" => self.parallel_eval = parse_bool(value)?,
            "max_iter" => self.max_iter = parse_num(value)?,
            "tol" => self.tol = parse_num(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(value)?,
            "verbosity" => self.verbosity = parse_num(value)?,
            "k" => self.k = parse_num(value)?,
            "m" => self.m = parse_num(value)?,
            "t_len" => self.t_len = parse_num(value)?,
            "max_lag" => self.max_lag = parse_num(value)?,
            "density" => self.density = parse_num(value)?,
            "coefficient_scale" => self.coefficient_scale = parse_num(value)?,
            "target_radius" => self.target_radius = parse_num(value)?,
            "innovation_sd" => self.innovation_sd = parse_num(value)?,
            "burn_in" => self.burn_in = parse_num(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Reads a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("config file {}: {e}", path.display())))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::validation(format!("config file {} line {}: expected key = value", path.display(), n + 1))
            })?;
            let key = key.trim();
            self.set(key, value.trim()).map_err(|e| {
                Failure::validation(format!("config file {} line {}, field {key}: {e}", path.display(), n + 1))
            })?;
        }
        Ok(())
    }

    /// Applies flag overrides collected as `(key, value)` pairs.
    pub fn apply_flags(&mut self, flags: &BTreeMap<&'static str, String>) -> Result<(), Failure> {
        for (key, value) in flags {
            self.set(key, value)
                .map_err(|e| Failure::validation(format!("flag --{}: {e}", key.replace('_', "-"))))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |field: &str, msg: &str| Err(Failure::validation(format!("field {field}: {msg}")));
        if self.grid_points < 2 {
            return bad("grid_points", "must be at least 2");
        }
        if !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return bad("grid_ratio", "must lie in (0, 1)");
        }
        for (name, v) in [("test_fraction", self.test_fraction), ("validation_fraction", self.validation_fraction)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(name, "must lie in (0, 1)");
            }
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol", "must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive");
        }
        for (name, v) in [("lambda_phi", self.lambda_phi), ("lambda_b", self.lambda_b)] {
            if v.is_some_and(|x| !(x >= 0.0 && x.is_finite())) {
                return bad(name, "must be a nonnegative number");
            }
        }
        Ok(())
    }
}
