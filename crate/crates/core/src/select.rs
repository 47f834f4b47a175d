//! Penalty grids, time-series cross-validation of `(λ_Φ, λ_B)` and BIC.

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};
use crate::eval::{holdout_len, one_step_forecast};
use crate::linalg::symmetric_eigenvalues;
use crate::model::{build_compact, CoefficientSet, CompactForm, VarxDataset, VarxSpec};
use crate::prox::{zeroing_threshold, PenaltyKind};
use crate::scalar::Scalar;
use crate::solver::{FitResult, Problem, SolverConfig};

/// How the two penalty axes are combined into grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPairing {
    /// Every `(λ_Φ, λ_B)` combination.
    Cartesian,
    /// `(λ_Φ[i], λ_B[i])` only; both axes must have equal length.
    CommonIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid<T> {
    /// Strictly descending.
    pub phi_values: Vec<T>,
    /// Strictly descending; a single `0` when the model has no exogenous block.
    pub b_values: Vec<T>,
    pub pairing: GridPairing,
}

impl<T: Scalar> LambdaGrid<T> {
    pub fn single(lambda_phi: T, lambda_b: T) -> Self {
        LambdaGrid {
            phi_values: vec![lambda_phi],
            b_values: vec![lambda_b],
            pairing: GridPairing::Cartesian,
        }
    }

    /// Grid points in warm-start order: descending λ_Φ, then descending λ_B.
    /// Each entry carries its `(row, column)` in the surface.
    pub fn points(&self) -> Vec<((usize, usize), (T, T))> {
        match self.pairing {
            GridPairing::Cartesian => self
                .phi_values
                .iter()
                .enumerate()
                .flat_map(|(i, lp)| {
                    self.b_values
                        .iter()
                        .enumerate()
                        .map(move |(j, lb)| ((i, j), (*lp, *lb)))
                })
                .collect(),
            GridPairing::CommonIndex => self
                .phi_values
                .iter()
                .zip(&self.b_values)
                .enumerate()
                .map(|(i, (lp, lb))| ((i, i), (*lp, *lb)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let descending = |v: &[T], allow_single_zero: bool| {
            if v.is_empty() {
                return false;
            }
            if allow_single_zero && v.len() == 1 && v[0] == T::zero() {
                return true;
            }
            v.iter().all(|x| *x > T::zero() && x.is_finite()) && v.windows(2).all(|w| w[0] > w[1])
        };
        if !descending(&self.phi_values, false) || !descending(&self.b_values, true) {
            return Err(VarxError::InvalidConfig(
                "penalty grids must be nonempty, positive and strictly descending".into(),
            ));
        }
        if self.pairing == GridPairing::CommonIndex && self.phi_values.len() != self.b_values.len() {
            return Err(VarxError::InvalidConfig(
                "common-index pairing needs equally long grids".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest `(λ_Φ, λ_B)` at which the fit is identically zero.
///
/// At zero coefficients the negative gradient of equation `i` is `[Z; X] yᵢ`;
/// a path stays at zero exactly when its proximal map at that gradient
/// vanishes. The maxima over all paths are returned, inflated by a relative
/// √ε so that rounding in the scaled gradient step cannot revive a path.
/// `λ_B` is zero when there is no exogenous block.
pub fn lambda_max<T: Scalar>(data: &CompactForm<T>, penalty: PenaltyKind) -> Result<(T, T)> {
    lambda_max_weighted(data, penalty, None, None)
}

pub fn lambda_max_weighted<T: Scalar>(
    data: &CompactForm<T>,
    penalty: PenaltyKind,
    phi_weights: Option<&[T]>,
    b_weights: Option<&[T]>,
) -> Result<(T, T)> {
    if data.y.iter().all(|v| *v == T::zero()) {
        return Err(VarxError::ZeroResponse);
    }
    let (k, m, p, s) = (data.k, data.m, data.spec.p, data.spec.s);
    let design = data.design();
    let mut phi_max = T::zero();
    let mut b_max = T::zero();
    let mut path = Vec::new();
    for i in 0..k {
        let g = design.dot(&data.y.row(i));
        for d in 0..k {
            path.clear();
            path.extend((0..p).map(|l| g[l * k + d]));
            phi_max = phi_max.max(zeroing_threshold(&path, penalty, phi_weights));
        }
        for r in 0..m {
            path.clear();
            path.extend((0..s).map(|l| g[k * p + l * m + r]));
            b_max = b_max.max(zeroing_threshold(&path, penalty, b_weights));
        }
    }
    let pad = T::one() + T::epsilon().sqrt();
    Ok((phi_max * pad, b_max * pad))
}

/// Log-spaced descending grid from `λ_max` down to `ratio·λ_max` on each axis.
/// An axis whose anchor is zero collapses to the single value `0`.
pub fn build_grid<T: Scalar>(lmax: (T, T), n_points: usize, ratio: T) -> Result<LambdaGrid<T>> {
    if n_points < 2 {
        return Err(VarxError::InvalidConfig("grid needs at least 2 points".into()));
    }
    if !(ratio > T::zero() && ratio < T::one()) {
        return Err(VarxError::InvalidConfig("grid ratio must lie in (0, 1)".into()));
    }
    let axis = |top: T| -> Vec<T> {
        if top == T::zero() {
            return vec![T::zero()];
        }
        let denom = T::of_usize(n_points - 1);
        (0..n_points)
            .map(|i| match i {
                0 => top,
                _ if i == n_points - 1 => top * ratio,
                _ => top * ratio.powf(T::of_usize(i) / denom),
            })
            .collect()
    };
    let grid = LambdaGrid {
        phi_values: axis(lmax.0),
        b_values: axis(lmax.1),
        pairing: GridPairing::Cartesian,
    };
    grid.validate()?;
    Ok(grid)
}

/// How the grid is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    /// Sequential along the grid order, each fit warm-started from the previous one.
    #[default]
    WarmStart,
    /// Independent cold-start fits in parallel.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Fraction of the sample held out as the final test block.
    pub test_fraction: f64,
    /// Fraction of the sample used for validation just before the test block.
    pub validation_fraction: f64,
    pub mode: CvMode,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            test_fraction: 0.15,
            validation_fraction: 0.15,
            mode: CvMode::WarmStart,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult<T> {
    pub best_lambda_phi: T,
    pub best_lambda_b: T,
    /// Validation MSFE indexed by (λ_Φ position, λ_B position); NaN for failed fits.
    pub cv_msfe_surface: Array2<T>,
    /// First validation time index; training uses `0..split_boundary`.
    pub split_boundary: usize,
    /// One past the last validation index (= start of the test block).
    pub validation_end: usize,
    pub grid: LambdaGrid<T>,
}

/// Training / validation / test boundaries for a series of length `t_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvSplit {
    pub train_end: usize,
    pub validation_end: usize,
}

impl CvSplit {
    pub fn new(t_len: usize, options: &CvOptions) -> Result<Self> {
        let test = holdout_len(t_len, options.test_fraction);
        let validation = holdout_len(t_len, options.validation_fraction).max(2);
        if test + validation >= t_len {
            return Err(VarxError::TooFewObservations(format!(
                "T = {t_len} cannot hold {validation} validation and {test} test points"
            )));
        }
        Ok(CvSplit {
            train_end: t_len - test - validation,
            validation_end: t_len - test,
        })
    }
}

/// Selects `(λ_Φ, λ_B)` by one-step-ahead validation MSFE.
///
/// Coefficients are fitted once per grid point on the training segment
/// (re-centered on training means) and held fixed while forecasting each
/// validation point from the observed history before it. The minimum of the
/// surface wins; ties go to the earlier grid point, i.e. the larger penalties.
pub fn cross_validate<T: Scalar>(
    dataset: &VarxDataset<T>,
    spec: VarxSpec,
    grid: &LambdaGrid<T>,
    config: &SolverConfig<T>,
    options: &CvOptions,
) -> Result<CvResult<T>> {
    grid.validate()?;
    config.validate()?;
    let split = CvSplit::new(dataset.len(), options)?;
    let train = dataset.window(0, split.train_end)?;
    let data = build_compact(&train, spec)?;
    let problem = Problem::new(&data)?;
    let raw_endo = dataset.raw_endo();
    let raw_exog = dataset.raw_exog();

    let score = |coefs: &CoefficientSet<T>| -> Result<T> {
        let mut sse = T::zero();
        for t in split.train_end..split.validation_end {
            let fc = one_step_forecast(
                coefs,
                raw_endo.slice(s![.., ..t]),
                raw_exog.slice(s![.., ..t]),
            )?;
            sse += fc
                .iter()
                .zip(raw_endo.column(t))
                .map(|(f, a)| (*a - *f) * (*a - *f))
                .sum::<T>();
        }
        Ok(sse / T::of_usize(dataset.k() * (split.validation_end - split.train_end)))
    };

    let points = grid.points();
    let scores: Vec<T> = match options.mode {
        CvMode::WarmStart => {
            let mut prev: Option<CoefficientSet<T>> = None;
            let mut out = Vec::with_capacity(points.len());
            for (_, (lp, lb)) in &points {
                let cfg = config.with_lambdas(*lp, *lb);
                match problem.fit_from(&cfg, prev.as_ref()) {
                    Ok(fitted) => {
                        out.push(score(&fitted.coefficients).unwrap_or(T::nan()));
                        prev = Some(fitted.coefficients);
                    }
                    Err(e) => {
                        log::warn!("fit failed at ({lp}, {lb}): {e}");
                        out.push(T::nan());
                    }
                }
            }
            out
        }
        CvMode::Parallel => points
            .par_iter()
            .map(|(_, (lp, lb))| {
                problem
                    .fit(&config.with_lambdas(*lp, *lb))
                    .and_then(|f| score(&f.coefficients))
                    .unwrap_or(T::nan())
            })
            .collect(),
    };

    let mut surface = Array2::from_elem((grid.phi_values.len(), grid.b_values.len()), T::nan());
    let mut best: Option<(usize, T)> = None;
    for (idx, (((i, j), _), sc)) in points.iter().zip(&scores).enumerate() {
        surface[(*i, *j)] = *sc;
        if sc.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| *sc < b) {
            best = Some((idx, *sc));
        }
    }
    let (best_idx, _) = best.ok_or(VarxError::AllFitsFailed)?;
    let (_, (lp, lb)) = points[best_idx];
    Ok(CvResult {
        best_lambda_phi: lp,
        best_lambda_b: lb,
        cv_msfe_surface: surface,
        split_boundary: split.train_end,
        validation_end: split.validation_end,
        grid: grid.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bic<T> {
    pub value: T,
    /// Number of nonzero coefficients.
    pub df: usize,
    /// Residual covariance was singular; the log-determinant used only
    /// eigenvalues above the floor.
    pub singular: bool,
}

const BIC_EIGEN_FLOOR: f64 = 1e-12;

/// `log det(ÊÊᵀ/N) + (log N / N)·df` with `Ê = Y − Φ̂Z − B̂X`.
pub fn bic<T: Scalar>(fit: &FitResult<T>, data: &CompactForm<T>) -> Bic<T> {
    bic_of(&fit.coefficients, data)
}

pub fn bic_of<T: Scalar>(coefs: &CoefficientSet<T>, data: &CompactForm<T>) -> Bic<T> {
    let n = T::of_usize(data.n_samples());
    let resid = &data.y - &coefs.phi().dot(&data.z) - &coefs.b().dot(&data.x);
    let cov = resid.dot(&resid.t()) / n;
    let eig = symmetric_eigenvalues(cov.view());
    let floor = T::of(BIC_EIGEN_FLOOR);
    let singular = eig.iter().any(|e| *e <= floor);
    let logdet: T = eig.iter().filter(|e| **e > floor).map(|e| e.ln()).sum();
    let df = coefs.nonzero_count();
    Bic {
        value: logdet + n.ln() / n * T::of_usize(df),
        df,
        singular,
    }
}
