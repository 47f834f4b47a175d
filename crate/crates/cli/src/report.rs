//! `report.json` layout. Every subcommand writes one report; the run-specific
//! part (`fit`, `cv`, `estimators`, `simulation`) is added next to the common
//! fields. Paths live under `metadata` so identical runs in different
//! directories produce identical reports outside that field.

use std::collections::BTreeMap;
use std::path::Path;

use hvarx::{Bic, CoefficientSet, CvResult, FitResult};
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

#[derive(Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub endo_path: Option<String>,
    pub exog_path: Option<String>,
    pub output_dir: String,
}

impl Metadata {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Self {
        let show = |p: &Path| p.display().to_string();
        Metadata {
            tool: "hvarx",
            version: env!("CARGO_PKG_VERSION"),
            command,
            endo_path: cfg.endo_path.as_deref().map(show),
            exog_path: cfg.exog_path.as_deref().map(show),
            output_dir: show(&cfg.output_dir),
        }
    }
}

/// Dimensions and resolved orders of the data a command ran on.
#[derive(Serialize)]
pub struct DataSummary {
    pub k: usize,
    pub m: usize,
    pub t_len: usize,
    pub p: usize,
    pub s: usize,
}

#[derive(Serialize)]
pub struct FitSummary {
    pub penalty: &'static str,
    pub lambda_phi: f64,
    pub lambda_b: f64,
    /// `given` or `cv`.
    pub lambda_source: &'static str,
    /// Observations the model was fitted on, starting at time 0.
    pub sample_len: usize,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub bic: f64,
    pub bic_df: usize,
    pub bic_singular: bool,
    pub nonzero: usize,
    pub spectral_radius: Option<f64>,
}

impl FitSummary {
    pub fn new(
        penalty: &'static str,
        source: &'static str,
        fit: &FitResult<f64>,
        bic: Bic<f64>,
        lambdas: (f64, f64),
        sample_len: usize,
    ) -> Self {
        FitSummary {
            penalty,
            lambda_phi: lambdas.0,
            lambda_b: lambdas.1,
            lambda_source: source,
            sample_len,
            converged: fit.converged,
            iterations: fit.iterations,
            objective: fit.final_objective(),
            bic: bic.value,
            bic_df: bic.df,
            bic_singular: bic.singular,
            nonzero: fit.coefficients.nonzero_count(),
            spectral_radius: spectral_radius(&fit.coefficients),
        }
    }
}

pub fn spectral_radius(coefs: &CoefficientSet<f64>) -> Option<f64> {
    coefs
        .spectral_radius()
        .map_err(|e| log::warn!("spectral radius unavailable: {e}"))
        .ok()
}

#[derive(Serialize)]
pub struct CvSummary {
    pub lambda_phi_grid: Vec<f64>,
    pub lambda_b_grid: Vec<f64>,
    /// Validation MSFE, rows follow `lambda_phi_grid`, columns `lambda_b_grid`; null marks a failed fit.
    pub msfe_surface: Vec<Vec<Option<f64>>>,
    pub best_lambda_phi: f64,
    pub best_lambda_b: f64,
    pub best_msfe: f64,
    pub train_end: usize,
    pub validation_end: usize,
}

impl CvSummary {
    pub fn new(cv: &CvResult<f64>) -> Self {
        let surface: Vec<Vec<Option<f64>>> = cv
            .cv_msfe_surface
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
            .collect();
        let best_msfe = cv.cv_msfe_surface.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        CvSummary {
            lambda_phi_grid: cv.grid.phi_values.clone(),
            lambda_b_grid: cv.grid.b_values.clone(),
            msfe_surface: surface,
            best_lambda_phi: cv.best_lambda_phi,
            best_lambda_b: cv.best_lambda_b,
            best_msfe,
            train_end: cv.split_boundary,
            validation_end: cv.validation_end,
        }
    }
}

/// One estimator's out-of-sample results in an `evaluate` report.
#[derive(Serialize)]
pub struct EstimatorReport {
    pub msfe: f64,
    /// Diebold–Mariano statistic of this estimator against the other one;
    /// negative means this estimator forecast better.
    pub dm_statistic: f64,
    pub dm_pvalue: f64,
    pub bic: f64,
    pub horizon: usize,
    pub test_start: usize,
    pub failed_steps: usize,
    pub nonconverged_steps: usize,
    pub cv: Option<CvSummary>,
    pub fit: FitSummary,
}

#[derive(Serialize)]
pub struct Report<B: Serialize> {
    pub metadata: Metadata,
    pub config: BTreeMap<String, serde_json::Value>,
    pub data: DataSummary,
    #[serde(flatten)]
    pub body: B,
}

/// The resolved configuration without the path fields, which go to `metadata`.
pub fn config_map(cfg: &RunConfig) -> BTreeMap<String, serde_json::Value> {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let serde_json::Value::Object(map) = value else {
        unreachable!("config is a struct")
    };
    map.into_iter()
        .filter(|(k, _)| !matches!(k.as_str(), "endo_path" | "exog_path" | "output_dir"))
        .collect()
}

pub fn write_json<B: Serialize>(report: &Report<B>, dir: &Path) -> Result<(), Failure> {
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}
