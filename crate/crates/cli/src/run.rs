//! Subcommand bodies. Each one writes its artifacts into `output_dir` and
//! finishes with `report.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hvarx::select::CvSplit;
use hvarx::{
    bic, build_compact, build_grid, compare_reports, cross_validate, expanding_window_eval, extract_lag_matrices,
    fit as solve, generate, lambda_max, write_coefficients, write_heatmap, write_lag_matrix, write_means,
    CoefficientSet, CvOptions, CvResult, EvalOptions, ForecastReport, PenaltyKind, SimDesign, SolverConfig,
    VarxDataset, VarxSpec,
};
use serde::Serialize;

use crate::config::{Order, RunConfig};
use crate::report::{
    config_map, spectral_radius, write_json, CvSummary, DataSummary, EstimatorReport, FitSummary, Metadata, Report,
};
use crate::{Completion, Failure};

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn output_dir(dir: &Path) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::validation(format!("field output_dir ({}): {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

struct Loaded {
    ds: VarxDataset<f64>,
    spec: VarxSpec,
}

impl Loaded {
    fn summary(&self) -> DataSummary {
        DataSummary {
            k: self.ds.k(),
            m: self.ds.m(),
            t_len: self.ds.len(),
            p: self.spec.p,
            s: self.spec.s,
        }
    }
}

/// `auto` orders become ⌊1.5√T⌋; `s` is 0 when there is no exogenous block.
fn resolve_orders(p: Order, s: Order, t_len: usize, m: usize) -> VarxSpec {
    let auto = VarxSpec::default_order(t_len);
    let p = match p {
        Order::Auto => auto,
        Order::Fixed(p) => p,
    };
    let s = match s {
        Order::Auto if m == 0 => 0,
        Order::Auto => auto,
        Order::Fixed(s) => s,
    };
    VarxSpec::new(p, s)
}

fn load(cfg: &RunConfig) -> Result<Loaded, Failure> {
    let endo = cfg
        .endo_path
        .as_deref()
        .ok_or_else(|| Failure::validation("field endo_path: required"))?;
    if let (None, Order::Fixed(s)) = (&cfg.exog_path, cfg.s) {
        if s > 0 {
            return Err(Failure::validation(format!(
                "field exog_path: required when s = {s} > 0"
            )));
        }
    }
    let ds = VarxDataset::load_and_center(endo, cfg.exog_path.as_deref())?;
    let spec = resolve_orders(cfg.p, cfg.s, ds.len(), ds.m());
    spec.validate(ds.m(), ds.len())
        .map_err(|e| Failure::validation(format!("fields p, s (resolved p = {}, s = {}): {e}", spec.p, spec.s)))?;
    log::info!(
        "loaded k = {}, m = {}, T = {}; orders p = {}, s = {}",
        ds.k(),
        ds.m(),
        ds.len(),
        spec.p,
        spec.s
    );
    Ok(Loaded { ds, spec })
}

fn solver_config(cfg: &RunConfig, penalty: PenaltyKind) -> SolverConfig<f64> {
    SolverConfig {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        ..SolverConfig::new(penalty, 0.0, 0.0)
    }
}

fn cv_options(cfg: &RunConfig) -> CvOptions {
    CvOptions {
        test_fraction: cfg.test_fraction,
        validation_fraction: cfg.validation_fraction,
        mode: cfg.cv_mode,
    }
}

/// Penalty levels from the config, if any were given.
fn given_lambdas(cfg: &RunConfig, m: usize) -> Result<Option<(f64, f64)>, Failure> {
    match (cfg.lambda_phi, cfg.lambda_b) {
        (None, None) => Ok(None),
        (Some(lp), _) if m == 0 => Ok(Some((lp, 0.0))),
        (Some(lp), Some(lb)) => Ok(Some((lp, lb))),
        (Some(_), None) => Err(Failure::validation(
            "field lambda_b: required with lambda_phi when exogenous series are present",
        )),
        (None, Some(_)) => Err(Failure::validation("field lambda_phi: required when lambda_b is given")),
    }
}

/// Builds the grid from λ_max on the training segment and runs cross-validation.
fn select(loaded: &Loaded, config: &SolverConfig<f64>, cfg: &RunConfig) -> Result<CvResult<f64>, Failure> {
    let options = cv_options(cfg);
    let split = CvSplit::new(loaded.ds.len(), &options)?;
    let train = build_compact(&loaded.ds.window(0, split.train_end)?, loaded.spec)?;
    let lmax = lambda_max(&train, config.penalty)?;
    let grid = build_grid(lmax, cfg.grid_points, cfg.grid_ratio)?;
    log::info!(
        "{}: λ_max = ({:.4e}, {:.4e}), {} grid points",
        config.penalty.label(),
        lmax.0,
        lmax.1,
        grid.points().len()
    );
    let cv = cross_validate(&loaded.ds, loaded.spec, &grid, config, &options)?;
    log::info!(
        "{}: selected λ = ({:.4e}, {:.4e})",
        config.penalty.label(),
        cv.best_lambda_phi,
        cv.best_lambda_b
    );
    Ok(cv)
}

fn write_csv<F>(path: &Path, write: F) -> Result<(), Failure>
where
    F: FnOnce(BufWriter<File>) -> Result<(), csv::Error>,
{
    write(create(path)?).map_err(|e| io_failure(path, e))
}

/// Coefficients, means, lag matrices and heatmap data for one model.
fn write_model(dir: &Path, prefix: &str, coefs: &CoefficientSet<f64>, endo: &[String], exog: &[String]) -> Result<(), Failure> {
    let name = |base: &str| dir.join(format!("{prefix}{base}"));
    write_csv(&name("coefficients.csv"), |w| write_coefficients(coefs, endo, exog, w))?;
    write_csv(&name("means.csv"), |w| write_means(coefs, endo, exog, w))?;
    let lags = extract_lag_matrices(coefs, 0.0);
    write_csv(&name("lag_matrix_phi.csv"), |w| write_lag_matrix(&lags.phi, endo, endo, w))?;
    write_csv(&name("lag_matrix_b.csv"), |w| write_lag_matrix(&lags.b, endo, exog, w))?;
    write_csv(&name("heatmap_phi.csv"), |w| write_heatmap(&lags.phi, endo, endo, w))?;
    write_csv(&name("heatmap_b.csv"), |w| write_heatmap(&lags.b, endo, exog, w))?;
    Ok(())
}

/// Fits on observations `0..sample_len`, writes the model files and summarizes the fit.
fn fit_and_write(
    dir: &Path,
    loaded: &Loaded,
    sample_len: usize,
    config: &SolverConfig<f64>,
    lambdas: (f64, f64),
    source: &'static str,
) -> Result<FitSummary, Failure> {
    let window = if sample_len == loaded.ds.len() {
        loaded.ds.clone()
    } else {
        loaded.ds.window(0, sample_len)?
    };
    let data = build_compact(&window, loaded.spec)?;
    let fitted = solve(&data, &config.with_lambdas(lambdas.0, lambdas.1))?;
    if !fitted.converged {
        log::warn!("{}: fit stopped at the iteration limit ({})", config.penalty.label(), fitted.iterations);
    }
    let criterion = bic(&fitted, &data);
    write_model(dir, "", &fitted.coefficients, window.endo_names(), window.exog_names())?;
    Ok(FitSummary::new(config.penalty.label(), source, &fitted, criterion, lambdas, sample_len))
}

fn write_surface(path: &Path, cv: &CvResult<f64>) -> Result<(), Failure> {
    write_csv(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["lambda_phi", "lambda_b", "msfe"])?;
        for ((i, j), (lp, lb)) in cv.grid.points() {
            let v = cv.cv_msfe_surface[(i, j)];
            let msfe = if v.is_finite() { hvarx::model::format_exact(v) } else { "NaN".into() };
            wtr.write_record([hvarx::model::format_exact(lp), hvarx::model::format_exact(lb), msfe])?;
        }
        wtr.flush()?;
        Ok(())
    })
}

fn write_forecasts(path: &Path, report: &ForecastReport<f64>, names: &[String]) -> Result<(), Failure> {
    write_csv(path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_index", "series", "forecast", "actual"])?;
        for h in 0..report.horizon {
            let t = (report.test_start + h).to_string();
            for (i, name) in names.iter().enumerate() {
                wtr.write_record([
                    t.as_str(),
                    name,
                    &hvarx::model::format_exact(report.per_step_forecasts[(i, h)]),
                    &hvarx::model::format_exact(report.per_step_actuals[(i, h)]),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    })
}

fn completion(nonconverged: Vec<String>) -> Completion {
    if nonconverged.is_empty() {
        Completion::Converged
    } else {
        Completion::NotConverged(nonconverged.join("; "))
    }
}

#[derive(Serialize)]
struct FitBody {
    cv: Option<CvSummary>,
    fit: FitSummary,
}

fn fit_command(cfg: &RunConfig, command: &'static str, force_cv: bool) -> Result<Completion, Failure> {
    let loaded = load(cfg)?;
    let dir = output_dir(&cfg.output_dir)?;
    let config = solver_config(cfg, cfg.penalty);
    let given = given_lambdas(cfg, loaded.ds.m())?;
    if force_cv && given.is_some() {
        log::warn!("cv ignores lambda_phi / lambda_b and selects them on the grid");
    }
    let (lambdas, source, cv) = match given.filter(|_| !force_cv) {
        Some(l) => (l, "given", None),
        None => {
            let cv = select(&loaded, &config, cfg)?;
            write_surface(&dir.join("cv_surface.csv"), &cv)?;
            ((cv.best_lambda_phi, cv.best_lambda_b), "cv", Some(CvSummary::new(&cv)))
        }
    };
    let fit = fit_and_write(&dir, &loaded, loaded.ds.len(), &config, lambdas, source)?;
    let done = completion(if fit.converged { vec![] } else { vec!["final fit".into()] });
    let report = Report {
        metadata: Metadata::new(command, cfg),
        config: config_map(cfg),
        data: loaded.summary(),
        body: FitBody { cv, fit },
    };
    write_json(&report, &dir)?;
    Ok(done)
}

pub fn fit(cfg: &RunConfig) -> Result<Completion, Failure> {
    fit_command(cfg, "fit", false)
}

pub fn cv(cfg: &RunConfig) -> Result<Completion, Failure> {
    fit_command(cfg, "cv", true)
}

#[derive(Serialize)]
struct EvaluateBody {
    estimators: BTreeMap<&'static str, EstimatorReport>,
}

/// Runs both penalties through selection, expanding-window forecasting and
/// an in-sample fit on the pre-test segment, then compares them.
pub fn evaluate(cfg: &RunConfig) -> Result<Completion, Failure> {
    let loaded = load(cfg)?;
    let dir = output_dir(&cfg.output_dir)?;
    let given = given_lambdas(cfg, loaded.ds.m())?;
    let eval_options = EvalOptions {
        test_fraction: cfg.test_fraction,
        parallel: cfg.parallel_eval,
        reselect: None,
    };

    let mut runs = Vec::new();
    let mut nonconverged = Vec::new();
    for penalty in [PenaltyKind::Hierarchical, PenaltyKind::L1] {
        let label = penalty.label();
        let sub = output_dir(&dir.join(label))?;
        let config = solver_config(cfg, penalty);
        let (lambdas, source, cv) = match given {
            Some(l) => (l, "given", None),
            None => {
                let cv = select(&loaded, &config, cfg)?;
                write_surface(&sub.join("cv_surface.csv"), &cv)?;
                ((cv.best_lambda_phi, cv.best_lambda_b), "cv", Some(CvSummary::new(&cv)))
            }
        };
        let forecasts = expanding_window_eval(&loaded.ds, loaded.spec, lambdas, &config, &eval_options)?;
        log::info!("{label}: expanding-window MSFE = {:.6}", forecasts.msfe);
        write_forecasts(&sub.join("forecasts.csv"), &forecasts, loaded.ds.endo_names())?;
        let fit = fit_and_write(&sub, &loaded, forecasts.test_start, &config, lambdas, source)?;
        let steps = forecasts.nonconverged.iter().filter(|b| **b).count();
        if steps > 0 {
            nonconverged.push(format!("{label}: {steps} forecast steps"));
        }
        if !fit.converged {
            nonconverged.push(format!("{label}: pre-test fit"));
        }
        runs.push((label, forecasts, cv, fit));
    }

    let (first, rest) = runs.split_at_mut(1);
    compare_reports(&mut first[0].1, &mut rest[0].1)?;
    let estimators = runs
        .into_iter()
        .map(|(label, forecasts, cv, fit)| {
            let dm = forecasts.dm.expect("filled by compare_reports");
            let report = EstimatorReport {
                msfe: forecasts.msfe,
                dm_statistic: dm.statistic,
                dm_pvalue: dm.pvalue,
                bic: fit.bic,
                horizon: forecasts.horizon,
                test_start: forecasts.test_start,
                failed_steps: forecasts.failed.iter().filter(|b| **b).count(),
                nonconverged_steps: forecasts.nonconverged.iter().filter(|b| **b).count(),
                cv,
                fit,
            };
            (label, report)
        })
        .collect();
    let report = Report {
        metadata: Metadata::new("evaluate", cfg),
        config: config_map(cfg),
        data: loaded.summary(),
        body: EvaluateBody { estimators },
    };
    write_json(&report, &dir)?;
    Ok(completion(nonconverged))
}

#[derive(Serialize)]
struct SimulationBody {
    simulation: SimulationSummary,
}

#[derive(Serialize)]
struct SimulationSummary {
    seed: u64,
    spectral_radius: Option<f64>,
    nonzero: usize,
    true_lag_matrix_phi: Vec<Vec<usize>>,
    true_lag_matrix_b: Vec<Vec<usize>>,
}

/// Draws a sparse low-lag design and writes the series plus the truth.
pub fn simulate(cfg: &RunConfig) -> Result<Completion, Failure> {
    let spec = resolve_orders(cfg.p, cfg.s, cfg.t_len, cfg.m);
    let mut design = SimDesign::<f64>::random_low_lag(
        cfg.k,
        cfg.m,
        spec.p,
        spec.s,
        cfg.max_lag,
        cfg.density,
        cfg.t_len,
        cfg.seed,
    );
    design.coefficient_scale = cfg.coefficient_scale;
    design.target_spectral_radius = cfg.target_radius;
    design.innovation_sd = cfg.innovation_sd;
    design.burn_in = cfg.burn_in;
    if cfg.k == 0 {
        return Err(Failure::validation("field k: must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.density) {
        return Err(Failure::validation("field density: must lie in [0, 1]"));
    }
    let (ds, truth) = generate(&design).map_err(|e| match e {
        hvarx::VarxError::InvalidConfig(msg) => Failure::validation(format!(
            "simulation design (k, m, p, s, t_len, coefficient_scale, target_radius, innovation_sd): {msg}"
        )),
        other => other.into(),
    })?;

    let dir = output_dir(&cfg.output_dir)?;
    let (endo, exog) = ds.to_tables();
    write_csv(&dir.join("endo.csv"), |w| endo.write(w))?;
    if ds.m() > 0 {
        write_csv(&dir.join("exog.csv"), |w| exog.write(w))?;
    }
    write_model(&dir, "true_", &truth, ds.endo_names(), ds.exog_names())?;

    let rows = |a: &ndarray::Array2<usize>| a.rows().into_iter().map(|r| r.to_vec()).collect();
    let report = Report {
        metadata: Metadata::new("simulate", cfg),
        config: config_map(cfg),
        data: DataSummary {
            k: ds.k(),
            m: ds.m(),
            t_len: ds.len(),
            p: spec.p,
            s: spec.s,
        },
        body: SimulationBody {
            simulation: SimulationSummary {
                seed: cfg.seed,
                spectral_radius: spectral_radius(&truth),
                nonzero: truth.nonzero_count(),
                true_lag_matrix_phi: rows(&design.true_lag_matrix_phi),
                true_lag_matrix_b: rows(&design.true_lag_matrix_b),
            },
        },
    };
    write_json(&report, &dir)?;
    Ok(Completion::Converged)
}
