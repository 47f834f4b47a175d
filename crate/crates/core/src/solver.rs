//! Proximal-gradient estimation of the penalized VARX least-squares problem
//!
//! ```text
//! ½‖Y − ΦZ − BX‖²_F + λ_Φ Σ_{i,d} Ω(Φ-path_{id}) + λ_B Σ_{i,r} Ω(B-path_{ir})
//! ```
//!
//! where `Ω` is either the nested lag-suffix group norm or the ℓ1 norm.
//! The loss and the penalty both split over the rows of `[Φ | B]`, so each
//! marginal equation is solved independently (and in parallel) against the
//! shared design `[Z; X]` with a common step size `1/L`, `L = λ_max([Z; X][Z; X]ᵀ)`.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};
use crate::linalg::gram_top_eigenvalue;
use crate::model::{CoefficientSet, CompactForm};
use crate::prox::{
    path_penalty, prox_hier_suffix_weighted_in_place, prox_l1_in_place, PenaltyKind,
};
use crate::scalar::Scalar;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub lambda_phi: T,
    pub lambda_b: T,
    pub max_iter: usize,
    /// Relative objective change that counts as converged.
    pub tol: T,
    /// Nesterov momentum with restart on objective increase.
    pub acceleration: bool,
    pub penalty: PenaltyKind,
    /// Optional per-lag group weights for Φ paths (length p); unit weights if absent.
    pub phi_weights: Option<Vec<T>>,
    /// Optional per-lag group weights for B paths (length s); unit weights if absent.
    pub b_weights: Option<Vec<T>>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            lambda_phi: T::zero(),
            lambda_b: T::zero(),
            max_iter: 10_000,
            tol: T::of(1e-5),
            acceleration: true,
            penalty: PenaltyKind::Hierarchical,
            phi_weights: None,
            b_weights: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(penalty: PenaltyKind, lambda_phi: T, lambda_b: T) -> Self {
        SolverConfig {
            penalty,
            lambda_phi,
            lambda_b,
            ..Default::default()
        }
    }

    pub fn with_lambdas(&self, lambda_phi: T, lambda_b: T) -> Self {
        SolverConfig {
            lambda_phi,
            lambda_b,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VarxError::InvalidConfig(m.to_string()));
        if !(self.tol > T::zero()) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.lambda_phi >= T::zero()) || !(self.lambda_b >= T::zero()) {
            return bad("penalty levels must be nonnegative");
        }
        if !self.lambda_phi.is_finite() || !self.lambda_b.is_finite() {
            return bad("penalty levels must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub coefficients: CoefficientSet<T>,
    /// Total objective after each iteration; entry 0 is the starting point.
    pub objective_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> FitResult<T> {
    pub fn final_objective(&self) -> T {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// Index layout of one joint coefficient row `[Φ_i· | B_i·]`.
#[derive(Debug, Clone, Copy)]
struct RowLayout {
    k: usize,
    p: usize,
    m: usize,
    s: usize,
}

impl RowLayout {
    fn of(data: &CompactForm<impl Scalar>) -> Self {
        RowLayout {
            k: data.k,
            p: data.spec.p,
            m: data.m,
            s: data.spec.s,
        }
    }

    fn phi_index(&self, d: usize, lag0: usize) -> usize {
        lag0 * self.k + d
    }

    fn b_index(&self, r: usize, lag0: usize) -> usize {
        self.k * self.p + lag0 * self.m + r
    }
}

/// Applies the configured proximal map to every path in one coefficient row.
struct RowProx<'a, T> {
    layout: RowLayout,
    config: &'a SolverConfig<T>,
}

impl<T: Scalar> RowProx<'_, T> {
    fn apply(&self, w: &mut Array1<T>, step: T, buf: &mut Vec<T>) {
        let l = self.layout;
        let tau_phi = step * self.config.lambda_phi;
        let tau_b = step * self.config.lambda_b;
        for d in 0..l.k {
            buf.clear();
            buf.extend((0..l.p).map(|j| w[l.phi_index(d, j)]));
            self.prox_path(buf, tau_phi, self.config.phi_weights.as_deref());
            for (j, v) in buf.iter().enumerate() {
                w[l.phi_index(d, j)] = *v;
            }
        }
        for r in 0..l.m {
            buf.clear();
            buf.extend((0..l.s).map(|j| w[l.b_index(r, j)]));
            self.prox_path(buf, tau_b, self.config.b_weights.as_deref());
            for (j, v) in buf.iter().enumerate() {
                w[l.b_index(r, j)] = *v;
            }
        }
    }

    fn prox_path(&self, path: &mut [T], tau: T, weights: Option<&[T]>) {
        match self.config.penalty {
            PenaltyKind::Hierarchical => prox_hier_suffix_weighted_in_place(path, tau, weights),
            PenaltyKind::L1 => prox_l1_in_place(path, tau),
        }
    }

    fn penalty(&self, w: ArrayView1<'_, T>, buf: &mut Vec<T>) -> T {
        let l = self.layout;
        let cfg = self.config;
        let mut phi_pen = T::zero();
        for d in 0..l.k {
            buf.clear();
            buf.extend((0..l.p).map(|j| w[l.phi_index(d, j)]));
            phi_pen += path_penalty(buf, cfg.penalty, cfg.phi_weights.as_deref());
        }
        let mut b_pen = T::zero();
        for r in 0..l.m {
            buf.clear();
            buf.extend((0..l.s).map(|j| w[l.b_index(r, j)]));
            b_pen += path_penalty(buf, cfg.penalty, cfg.b_weights.as_deref());
        }
        cfg.lambda_phi * phi_pen + cfg.lambda_b * b_pen
    }
}

/// Penalized objective of a full coefficient set.
pub fn objective<T: Scalar>(
    coefs: &CoefficientSet<T>,
    data: &CompactForm<T>,
    config: &SolverConfig<T>,
) -> Result<T> {
    if coefs.k() != data.k || coefs.m() != data.m || coefs.spec() != data.spec {
        return Err(VarxError::DimensionMismatch {
            source_name: "objective".into(),
            detail: "coefficient set does not match the compact form".into(),
        });
    }
    let resid = &data.y - &coefs.phi().dot(&data.z) - &coefs.b().dot(&data.x);
    let half = T::of(0.5);
    let mut total = half * resid.iter().map(|v| *v * *v).sum::<T>();
    let prox = RowProx {
        layout: RowLayout::of(data),
        config,
    };
    let mut buf = Vec::new();
    for i in 0..data.k {
        total += prox.penalty(coefs.row(i).view(), &mut buf);
    }
    Ok(total)
}

/// Step-size constant `L = λ_max([Z; X][Z; X]ᵀ)`.
pub fn lipschitz_constant<T: Scalar>(data: &CompactForm<T>) -> T {
    gram_top_eigenvalue(data.design().view(), T::of(POWER_TOL), POWER_MAX_ITER)
}

/// A compact form prepared for repeated fits (e.g. along a penalty grid):
/// the stacked design and step size are computed once.
#[derive(Debug)]
pub struct Problem<'a, T> {
    data: &'a CompactForm<T>,
    design: Array2<T>,
    step: T,
}

struct RowOutcome<T> {
    w: Array1<T>,
    trace: Vec<T>,
    iterations: usize,
    converged: bool,
}

impl<'a, T: Scalar> Problem<'a, T> {
    pub fn new(data: &'a CompactForm<T>) -> Result<Self> {
        if data.n_samples() == 0 {
            return Err(VarxError::TooFewObservations("no effective samples".into()));
        }
        let design = data.design();
        let lip = gram_top_eigenvalue(design.view(), T::of(POWER_TOL), POWER_MAX_ITER);
        if !(lip > T::zero()) || !lip.is_finite() {
            return Err(VarxError::DegenerateDesign);
        }
        Ok(Problem {
            data,
            design,
            step: T::one() / lip,
        })
    }

    pub fn data(&self) -> &CompactForm<T> {
        self.data
    }

    pub fn step_size(&self) -> T {
        self.step
    }

    /// Fits from zero.
    pub fn fit(&self, config: &SolverConfig<T>) -> Result<FitResult<T>> {
        self.fit_from(config, None)
    }

    /// Fits from `init` when given (warm start), else from zero.
    pub fn fit_from(
        &self,
        config: &SolverConfig<T>,
        init: Option<&CoefficientSet<T>>,
    ) -> Result<FitResult<T>> {
        config.validate()?;
        self.check_weights(config)?;
        let k = self.data.k;
        let d = self.design.nrows();
        let rows: Vec<RowOutcome<T>> = (0..k)
            .into_par_iter()
            .map(|i| {
                let w0 = init.map_or_else(|| Array1::zeros(d), |c| c.row(i));
                self.solve_row(i, config, w0)
            })
            .collect();
        Ok(self.assemble(rows))
    }

    /// Fits a single marginal equation and returns its coefficient row
    /// `[Φ_i· | B_i·]` with its objective trace.
    pub fn fit_row(&self, i: usize, config: &SolverConfig<T>) -> Result<(Array1<T>, Vec<T>, bool)> {
        config.validate()?;
        self.check_weights(config)?;
        let out = self.solve_row(i, config, Array1::zeros(self.design.nrows()));
        Ok((out.w, out.trace, out.converged))
    }

    fn check_weights(&self, config: &SolverConfig<T>) -> Result<()> {
        let spec = self.data.spec;
        if config.phi_weights.as_ref().is_some_and(|w| w.len() != spec.p)
            || config.b_weights.as_ref().is_some_and(|w| w.len() != spec.s)
        {
            return Err(VarxError::InvalidConfig(
                "group weights need one entry per lag".into(),
            ));
        }
        Ok(())
    }

    fn assemble(&self, rows: Vec<RowOutcome<T>>) -> FitResult<T> {
        let iterations = rows.iter().map(|r| r.iterations).max().unwrap_or(0);
        let converged = rows.iter().all(|r| r.converged);
        let mut trace = vec![T::zero(); iterations + 1];
        for r in &rows {
            let last = *r.trace.last().expect("nonempty trace");
            for (j, slot) in trace.iter_mut().enumerate() {
                *slot += r.trace.get(j).copied().unwrap_or(last);
            }
        }
        let ws: Vec<Array1<T>> = rows.into_iter().map(|r| r.w).collect();
        FitResult {
            coefficients: CoefficientSet::from_rows(&ws, self.data),
            objective_trace: trace,
            iterations,
            converged,
        }
    }

    fn residual(&self, i: usize, w: &Array1<T>) -> Array1<T> {
        &self.data.y.row(i) - &self.design.t().dot(w)
    }

    fn row_objective(&self, resid: &Array1<T>, w: &Array1<T>, prox: &RowProx<'_, T>, buf: &mut Vec<T>) -> T {
        T::of(0.5) * resid.dot(resid) + prox.penalty(w.view(), buf)
    }

    /// One proximal-gradient step from the point whose residual is `resid`.
    fn prox_step(&self, point: &Array1<T>, resid: &Array1<T>, prox: &RowProx<'_, T>, buf: &mut Vec<T>) -> Array1<T> {
        // w − η∇f(w) with ∇f(w) = −[Z; X] r
        let mut next = point + &(self.design.dot(resid) * self.step);
        prox.apply(&mut next, self.step, buf);
        next
    }

    fn solve_row(&self, i: usize, config: &SolverConfig<T>, w0: Array1<T>) -> RowOutcome<T> {
        let prox = RowProx {
            layout: RowLayout::of(self.data),
            config,
        };
        let mut buf = Vec::with_capacity(self.data.spec.obar());
        let tiny = T::min_positive_value();

        let mut x = w0;
        let mut r_x = self.residual(i, &x);
        let mut f = self.row_objective(&r_x, &x, &prox, &mut buf);
        let mut trace = vec![f];

        // extrapolated point and its residual (residuals are affine in w)
        let mut yk = x.clone();
        let mut r_y = r_x.clone();
        let mut momentum = T::one();
        let mut small_changes = 0usize;
        let mut converged = false;
        let mut iterations = 0;

        for iter in 1..=config.max_iter {
            iterations = iter;
            let mut cand = self.prox_step(&yk, &r_y, &prox, &mut buf);
            let mut r_cand = self.residual(i, &cand);
            let mut f_cand = self.row_objective(&r_cand, &cand, &prox, &mut buf);
            if config.acceleration && f_cand > f {
                // restart: plain step from the last accepted iterate
                momentum = T::one();
                cand = self.prox_step(&x, &r_x, &prox, &mut buf);
                r_cand = self.residual(i, &cand);
                f_cand = self.row_objective(&r_cand, &cand, &prox, &mut buf);
            }
            if config.acceleration {
                let next_m = (T::one() + (T::one() + T::of(4.0) * momentum * momentum).sqrt()) * T::of(0.5);
                let beta = (momentum - T::one()) / next_m;
                yk = &cand + &((&cand - &x) * beta);
                r_y = &r_cand + &((&r_cand - &r_x) * beta);
                momentum = next_m;
            } else {
                yk = cand.clone();
                r_y = r_cand.clone();
            }
            let rel_change = if f == f_cand {
                T::zero()
            } else {
                (f - f_cand).abs() / f.abs().max(tiny)
            };
            x = cand;
            r_x = r_cand;
            f = f_cand;
            trace.push(f);

            if rel_change < config.tol {
                small_changes += 1;
            } else {
                small_changes = 0;
            }
            if small_changes >= 2 {
                let probe = self.prox_step(&x, &r_x, &prox, &mut buf);
                if relative_max_change(&probe, &x) <= config.tol {
                    converged = true;
                    break;
                }
            }
        }
        RowOutcome {
            w: x,
            trace,
            iterations,
            converged,
        }
    }
}

/// `‖a − b‖∞ / ‖b‖∞`, with `0` when both are zero.
pub fn relative_max_change<T: Scalar>(a: &Array1<T>, b: &Array1<T>) -> T {
    let diff = a
        .iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()));
    if diff == T::zero() {
        return T::zero();
    }
    let scale = b.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    diff / scale.max(T::min_positive_value())
}

/// Fits from zero coefficients.
pub fn fit<T: Scalar>(data: &CompactForm<T>, config: &SolverConfig<T>) -> Result<FitResult<T>> {
    Problem::new(data)?.fit(config)
}

/// Fits starting from `init` (warm start).
pub fn fit_warm<T: Scalar>(
    data: &CompactForm<T>,
    config: &SolverConfig<T>,
    init: &CoefficientSet<T>,
) -> Result<FitResult<T>> {
    Problem::new(data)?.fit_from(config, Some(init))
}
