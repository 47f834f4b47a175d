//! Lag matrices, one-step-ahead forecasting, expanding-window evaluation
//! and the Diebold–Mariano comparison.

use ndarray::{s, Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};
use crate::model::{build_compact, CoefficientSet, VarxDataset, VarxSpec};
use crate::prox::max_nonzero_lag;
use crate::scalar::Scalar;
use crate::select::{build_grid, cross_validate, lambda_max_weighted, CvOptions};
use crate::solver::{Problem, SolverConfig};

/// `ceil(fraction·t_len)`, tolerant of representation error in the product.
pub fn holdout_len(t_len: usize, fraction: f64) -> usize {
    ((fraction * t_len as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Largest nonzero lag per (equation, series) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagMatrices<T> {
    /// k × k, entries in `0..=p`.
    pub phi: Array2<usize>,
    /// k × m, entries in `0..=s`.
    pub b: Array2<usize>,
    pub zero_threshold: T,
}

/// Entry `(i, d)` is `max{ℓ : |Φ_ℓ[i,d]| > threshold}`, or 0 if the whole
/// path is at or below the threshold; likewise for `B`.
pub fn extract_lag_matrices<T: Scalar>(coefs: &CoefficientSet<T>, zero_threshold: T) -> LagMatrices<T> {
    let (k, m) = (coefs.k(), coefs.m());
    let phi = Array2::from_shape_fn((k, k), |(i, d)| max_nonzero_lag(&coefs.phi_path(i, d), zero_threshold));
    let b = Array2::from_shape_fn((k, m), |(i, r)| max_nonzero_lag(&coefs.b_path(i, r), zero_threshold));
    LagMatrices {
        phi,
        b,
        zero_threshold,
    }
}

/// Forecast of the next observation given raw histories (k × t and m × t,
/// most recent column last), on the original scale.
pub fn one_step_forecast<T: Scalar>(
    coefs: &CoefficientSet<T>,
    history_endo: ArrayView2<'_, T>,
    history_exog: ArrayView2<'_, T>,
) -> Result<Array1<T>> {
    let spec = coefs.spec();
    let (k, m) = (coefs.k(), coefs.m());
    if history_endo.nrows() != k || (m > 0 && history_exog.nrows() != m) {
        return Err(VarxError::DimensionMismatch {
            source_name: "forecast history".into(),
            detail: format!(
                "histories have {} and {} rows, model has k = {k}, m = {m}",
                history_endo.nrows(),
                history_exog.nrows()
            ),
        });
    }
    let t = history_endo.ncols();
    if t < spec.p {
        return Err(VarxError::InsufficientHistory { needed: spec.p, got: t });
    }
    if m > 0 && history_exog.ncols() < spec.s {
        return Err(VarxError::InsufficientHistory {
            needed: spec.s,
            got: history_exog.ncols(),
        });
    }
    let endo_means = coefs.endo_means();
    let exog_means = coefs.exog_means();
    let mut out = Array1::zeros(k);
    for lag in 1..=spec.p {
        let y = &history_endo.column(t - lag) - &endo_means;
        out += &coefs.phi_lag(lag).dot(&y);
    }
    if m > 0 {
        let tx = history_exog.ncols();
        for lag in 1..=spec.s {
            let x = &history_exog.column(tx - lag) - &exog_means;
            out += &coefs.b_lag(lag).dot(&x);
        }
    }
    Ok(out + endo_means)
}

/// Mean of squared entries.
pub fn msfe<T: Scalar>(errors: ArrayView2<'_, T>) -> T {
    if errors.is_empty() {
        return T::nan();
    }
    errors.iter().map(|e| *e * *e).sum::<T>() / T::of_usize(errors.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmTest<T> {
    pub statistic: T,
    pub pvalue: T,
}

/// Diebold–Mariano test on squared-error loss for two k × H error matrices.
///
/// The loss differential at step t is the cross-series mean of
/// `e_a² − e_b²`; its long-run variance uses the lag-0 (sample) variance,
/// which is the standard choice for one-step-ahead errors. Positive
/// statistics mean `a` is less accurate. The p-value is two-sided under
/// the standard normal.
pub fn diebold_mariano<T: Scalar>(errors_a: ArrayView2<'_, T>, errors_b: ArrayView2<'_, T>) -> Result<DmTest<T>> {
    if errors_a.shape() != errors_b.shape() {
        return Err(VarxError::DimensionMismatch {
            source_name: "diebold_mariano".into(),
            detail: format!("{:?} vs {:?}", errors_a.shape(), errors_b.shape()),
        });
    }
    let h = errors_a.ncols();
    if h < 2 || errors_a.nrows() == 0 {
        return Err(VarxError::TooFewObservations(format!(
            "Diebold-Mariano needs at least 2 forecast steps, got {h}"
        )));
    }
    let k = T::of_usize(errors_a.nrows());
    let d: Vec<T> = (0..h)
        .map(|t| {
            errors_a
                .column(t)
                .iter()
                .zip(errors_b.column(t))
                .map(|(a, b)| *a * *a - *b * *b)
                .sum::<T>()
                / k
        })
        .collect();
    let hf = T::of_usize(h);
    let mean = d.iter().copied().sum::<T>() / hf;
    let var = d.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / T::of_usize(h - 1);
    if !(var > T::zero()) {
        return Ok(DmTest {
            statistic: T::zero(),
            pvalue: T::one(),
        });
    }
    let statistic = mean / (var / hf).sqrt();
    let z = statistic.abs().to_f64_lossy();
    let pvalue = statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(DmTest {
        statistic,
        pvalue: T::of(pvalue),
    })
}

/// Re-run penalty selection on every expanding window instead of freezing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reselection {
    pub n_points: usize,
    pub grid_ratio: f64,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Fraction of observations forecast at the end of the sample.
    pub test_fraction: f64,
    /// Fit the windows concurrently from cold starts instead of sequentially
    /// warm-started from the previous window.
    pub parallel: bool,
    pub reselect: Option<Reselection>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            test_fraction: 0.15,
            parallel: false,
            reselect: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastReport<T> {
    /// k × H forecasts on the original scale.
    pub per_step_forecasts: Array2<T>,
    /// k × H realised values.
    pub per_step_actuals: Array2<T>,
    pub msfe: T,
    /// Comparison against another forecaster, filled by [`compare_reports`].
    pub dm: Option<DmTest<T>>,
    pub horizon: usize,
    /// Time index of the first forecast.
    pub test_start: usize,
    /// Steps whose fit failed; their forecast is the window mean.
    pub failed: Vec<bool>,
    /// Steps whose fit hit the iteration limit.
    pub nonconverged: Vec<bool>,
    /// Penalty levels used at each step.
    pub lambdas: Vec<(T, T)>,
}

impl<T: Scalar> ForecastReport<T> {
    /// Actual minus forecast, k × H.
    pub fn errors(&self) -> Array2<T> {
        &self.per_step_actuals - &self.per_step_forecasts
    }
}

struct StepOutcome<T> {
    forecast: Array1<T>,
    coefs: Option<CoefficientSet<T>>,
    failed: bool,
    converged: bool,
    lambdas: (T, T),
}

/// One-step-ahead forecasts over the last `ceil(test_fraction·T)` points.
///
/// For each test time t the model is re-centered and re-fitted on
/// observations `0..t` with the given penalty pair (or a freshly selected one
/// when re-selection is enabled), then used to forecast `y_t`.
pub fn expanding_window_eval<T: Scalar>(
    dataset: &VarxDataset<T>,
    spec: VarxSpec,
    lambdas: (T, T),
    config: &SolverConfig<T>,
    options: &EvalOptions,
) -> Result<ForecastReport<T>> {
    config.validate()?;
    let t_len = dataset.len();
    let h = holdout_len(t_len, options.test_fraction);
    if h < 2 || h >= t_len {
        return Err(VarxError::TooFewObservations(format!(
            "test block of {h} points out of T = {t_len}; need at least 2"
        )));
    }
    let test_start = t_len - h;
    spec.validate(dataset.m(), test_start)?;
    let raw_endo = dataset.raw_endo();
    let raw_exog = dataset.raw_exog();

    let step = |t: usize, warm: Option<&CoefficientSet<T>>| -> StepOutcome<T> {
        let history_endo = raw_endo.slice(s![.., ..t]);
        let history_exog = raw_exog.slice(s![.., ..t]);
        let attempt = || -> Result<(CoefficientSet<T>, bool, (T, T))> {
            let window = dataset.window(0, t)?;
            let lam = match &options.reselect {
                None => lambdas,
                Some(rs) => reselect(&window, spec, config, rs)?,
            };
            let data = build_compact(&window, spec)?;
            let problem = Problem::new(&data)?;
            let fitted = problem.fit_from(&config.with_lambdas(lam.0, lam.1), warm)?;
            Ok((fitted.coefficients, fitted.converged, lam))
        };
        match attempt().and_then(|(c, conv, lam)| {
            let f = one_step_forecast(&c, history_endo, history_exog)?;
            Ok((c, conv, lam, f))
        }) {
            Ok((coefs, converged, lam, forecast)) => StepOutcome {
                forecast,
                coefs: Some(coefs),
                failed: false,
                converged,
                lambdas: lam,
            },
            Err(e) => {
                log::warn!("expanding window step t = {t} failed: {e}");
                let n = T::of_usize(t);
                let forecast = history_endo.rows().into_iter().map(|r| r.sum() / n).collect();
                StepOutcome {
                    forecast,
                    coefs: None,
                    failed: true,
                    converged: false,
                    lambdas,
                }
            }
        }
    };

    let outcomes: Vec<StepOutcome<T>> = if options.parallel {
        (test_start..t_len).into_par_iter().map(|t| step(t, None)).collect()
    } else {
        let mut out: Vec<StepOutcome<T>> = Vec::with_capacity(h);
        for t in test_start..t_len {
            let warm = out.last().and_then(|o| o.coefs.as_ref());
            let o = step(t, warm);
            out.push(o);
        }
        out
    };

    let k = dataset.k();
    let mut forecasts = Array2::zeros((k, h));
    for (j, o) in outcomes.iter().enumerate() {
        forecasts.column_mut(j).assign(&o.forecast);
    }
    let actuals = raw_endo.slice(s![.., test_start..]).to_owned();
    let msfe = msfe((&actuals - &forecasts).view());
    Ok(ForecastReport {
        per_step_forecasts: forecasts,
        per_step_actuals: actuals,
        msfe,
        dm: None,
        horizon: h,
        test_start,
        failed: outcomes.iter().map(|o| o.failed).collect(),
        nonconverged: outcomes.iter().map(|o| !o.failed && !o.converged).collect(),
        lambdas: outcomes.iter().map(|o| o.lambdas).collect(),
    })
}

fn reselect<T: Scalar>(
    window: &VarxDataset<T>,
    spec: VarxSpec,
    config: &SolverConfig<T>,
    rs: &Reselection,
) -> Result<(T, T)> {
    let cv_opts = CvOptions {
        test_fraction: 0.0,
        validation_fraction: rs.validation_fraction,
        ..Default::default()
    };
    let split = crate::select::CvSplit::new(window.len(), &cv_opts)?;
    let train = build_compact(&window.window(0, split.train_end)?, spec)?;
    let lmax = lambda_max_weighted(
        &train,
        config.penalty,
        config.phi_weights.as_deref(),
        config.b_weights.as_deref(),
    )?;
    let grid = build_grid(lmax, rs.n_points, T::of(rs.grid_ratio))?;
    let cv = cross_validate(window, spec, &grid, config, &cv_opts)?;
    Ok((cv.best_lambda_phi, cv.best_lambda_b))
}

/// Runs the Diebold–Mariano test of `a` against `b` and stores the result in
/// both reports (`b` receives the mirrored statistic).
pub fn compare_reports<T: Scalar>(a: &mut ForecastReport<T>, b: &mut ForecastReport<T>) -> Result<DmTest<T>> {
    let dm = diebold_mariano(a.errors().view(), b.errors().view())?;
    a.dm = Some(dm);
    b.dm = Some(DmTest {
        statistic: -dm.statistic,
        pvalue: dm.pvalue,
    });
    Ok(dm)
}
