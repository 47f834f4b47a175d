//! Reference computations for the hvarx test suites.
//!
//! Nothing here calls into the estimator. Each routine solves its problem by
//! a different, slower route (dual block-coordinate ascent with a duality-gap
//! certificate, grid and golden-section search, cyclic coordinate descent,
//! explicit loops) so that agreement with the library is meaningful.

use ndarray::{Array1, ArrayView1, ArrayView2};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nested suffix-group penalty `Σ_j ‖w[j..]‖₂`.
pub fn nested_penalty(w: &[f64]) -> f64 {
    (0..w.len()).map(|j| norm(&w[j..])).sum()
}

/// Prox objective `½‖w − v‖² + τ Σ_j ‖w[j..]‖₂`.
pub fn nested_prox_objective(w: &[f64], v: &[f64], tau: f64) -> f64 {
    0.5 * w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + tau * nested_penalty(w)
}

/// Minimizer of the nested-group prox objective by block-coordinate ascent
/// on the dual, sweeping from the outermost group inwards.
///
/// The dual variables are `u_j` supported on lags `j..q` with `‖u_j‖ ≤ τ`;
/// the primal point is `w = v − Σ u_j`. Iteration stops once the duality gap
/// is below `gap_tol`, which certifies `‖w − w*‖₂ ≤ √(2·gap_tol)`.
/// Returns the primal point and the final gap.
pub fn nested_prox_dual(v: &[f64], tau: f64, gap_tol: f64) -> (Vec<f64>, f64) {
    let q = v.len();
    if tau == 0.0 {
        return (v.to_vec(), 0.0);
    }
    let mut duals = vec![vec![0.0; q]; q];
    let mut w = v.to_vec();
    let mut gap = f64::INFINITY;
    for _sweep in 0..2_000_000 {
        let before = w.clone();
        for j in 0..q {
            // put block j back, then project the free residual onto its ball
            for l in j..q {
                w[l] += duals[j][l];
            }
            let n = norm(&w[j..]);
            let shrink = if n > tau { tau / n } else { 1.0 };
            for l in j..q {
                duals[j][l] = w[l] * shrink;
                w[l] -= duals[j][l];
            }
        }
        let primal = nested_prox_objective(&w, v, tau);
        let dual = 0.5 * v.iter().map(|x| x * x).sum::<f64>() - 0.5 * w.iter().map(|x| x * x).sum::<f64>();
        gap = primal - dual;
        if gap <= gap_tol || before == w {
            break;
        }
    }
    (w, gap)
}

/// Group soft-threshold of a 2-vector by nested grid refinement of
/// `½‖w − v‖² + τ‖w‖₂`.
pub fn group_threshold_grid_2d(v: [f64; 2], tau: f64) -> [f64; 2] {
    let f = |w: [f64; 2]| {
        0.5 * ((w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2)) + tau * (w[0] * w[0] + w[1] * w[1]).sqrt()
    };
    let radius = v[0].abs().max(v[1].abs()) + 1.0;
    let mut center = [0.0, 0.0];
    let mut half_width = radius;
    let steps = 200;
    while half_width > 1e-11 {
        let h = 2.0 * half_width / steps as f64;
        let mut best = (f64::INFINITY, center);
        for a in 0..=steps {
            for b in 0..=steps {
                let w = [center[0] - half_width + a as f64 * h, center[1] - half_width + b as f64 * h];
                let val = f(w);
                if val < best.0 {
                    best = (val, w);
                }
            }
        }
        center = best.1;
        half_width = 4.0 * h;
    }
    center
}

/// Golden-section minimizer of a convex scalar function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    while (hi - lo).abs() > tol {
        if f(c) < f(d) {
            hi = d;
        } else {
            lo = c;
        }
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    0.5 * (lo + hi)
}

/// Coordinatewise minimizer of `½(w − v)² + τ|w|` by golden-section search.
pub fn l1_prox_scalar_search(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter()
        .map(|&vi| {
            let span = vi.abs() + 1.0;
            golden_section(|w| 0.5 * (w - vi).powi(2) + tau * w.abs(), -span, span, 1e-13)
        })
        .collect()
}

/// Cyclic coordinate descent for `½‖y − Xᵀw‖² + Σ_j λ_j |w_j|` with `X` the
/// d × N design (one regressor per row).
pub fn lasso_coordinate_descent(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, penalties: &[f64], tol: f64) -> Array1<f64> {
    let d = design.nrows();
    assert_eq!(penalties.len(), d);
    let sq: Vec<f64> = design.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut w = Array1::<f64>::zeros(d);
    let mut resid = y.to_owned();
    for _sweep in 0..1_000_000 {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if sq[j] == 0.0 {
                continue;
            }
            let xj = design.row(j);
            let rho = xj.dot(&resid) + sq[j] * w[j];
            let new = if rho > penalties[j] {
                (rho - penalties[j]) / sq[j]
            } else if rho < -penalties[j] {
                (rho + penalties[j]) / sq[j]
            } else {
                0.0
            };
            let delta = new - w[j];
            if delta != 0.0 {
                resid.scaled_add(-delta, &xj);
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            break;
        }
    }
    w
}

/// Dimensions of a VARX coefficient row `[Φ_i· | B_i·]`:
/// Φ lag ℓ (0-based) of series d sits at `ℓ·k + d`, B lag ℓ of series r at `k·p + ℓ·m + r`.
#[derive(Debug, Clone, Copy)]
pub struct Dims {
    pub k: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
}

impl Dims {
    pub fn phi_path(&self, row: &[f64], d: usize) -> Vec<f64> {
        (0..self.p).map(|l| row[l * self.k + d]).collect()
    }

    pub fn b_path(&self, row: &[f64], r: usize) -> Vec<f64> {
        (0..self.s).map(|l| row[self.k * self.p + l * self.m + r]).collect()
    }

    /// Indices of all paths as (is_phi, index list).
    pub fn paths(&self) -> Vec<(bool, Vec<usize>)> {
        let mut out = Vec::new();
        for d in 0..self.k {
            out.push((true, (0..self.p).map(|l| l * self.k + d).collect()));
        }
        for r in 0..self.m {
            out.push((false, (0..self.s).map(|l| self.k * self.p + l * self.m + r).collect()));
        }
        out
    }
}

/// Objective evaluated term by term with explicit loops over equations,
/// samples, lags and groups. `phi` is k × kp, `b` is k × ms, `y` k × N,
/// `z` kp × N, `x` ms × N.
#[allow(clippy::too_many_arguments)]
pub fn objective_by_terms(
    phi: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    dims: Dims,
    lambda_phi: f64,
    lambda_b: f64,
    hierarchical: bool,
) -> f64 {
    let Dims { k, m, p, s } = dims;
    let n = y.ncols();
    let mut loss = 0.0;
    for i in 0..k {
        for t in 0..n {
            let mut fit = 0.0;
            for c in 0..k * p {
                fit += phi[(i, c)] * z[(c, t)];
            }
            for c in 0..m * s {
                fit += b[(i, c)] * x[(c, t)];
            }
            loss += 0.5 * (y[(i, t)] - fit).powi(2);
        }
    }
    let mut pen_phi = 0.0;
    let mut pen_b = 0.0;
    for i in 0..k {
        for d in 0..k {
            let path: Vec<f64> = (0..p).map(|l| phi[(i, l * k + d)]).collect();
            pen_phi += if hierarchical {
                nested_penalty(&path)
            } else {
                path.iter().map(|v| v.abs()).sum()
            };
        }
        for r in 0..m {
            let path: Vec<f64> = (0..s).map(|l| b[(i, l * m + r)]).collect();
            pen_b += if hierarchical {
                nested_penalty(&path)
            } else {
                path.iter().map(|v| v.abs()).sum()
            };
        }
    }
    loss + lambda_phi * pen_phi + lambda_b * pen_b
}

/// Gradient of `½‖y − Xᵀw‖²` for one equation.
pub fn row_gradient(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> Array1<f64> {
    let resid = &y - &design.t().dot(&w);
    -design.dot(&resid)
}

/// Largest violation of the optimality conditions of one equation under the
/// nested penalty.
///
/// Support lags `1..=L` of a path must satisfy
/// `∇_ℓ + λ Σ_{j ≤ ℓ} w_ℓ / ‖w[j..]‖ = 0`; the zero tail must satisfy
/// `−∇_tail ∈ λ ∂Ω_tail(0)`, checked as the size of the (oracle) proximal
/// point of `−∇_tail` at level λ, which is zero exactly when it holds.
pub fn nested_kkt_violation(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, dims: Dims, lambda_phi: f64, lambda_b: f64) -> f64 {
    let g = row_gradient(design, y, w);
    let mut worst: f64 = 0.0;
    for (is_phi, idx) in dims.paths() {
        let lam = if is_phi { lambda_phi } else { lambda_b };
        let path: Vec<f64> = idx.iter().map(|&c| w[c]).collect();
        let grad: Vec<f64> = idx.iter().map(|&c| g[c]).collect();
        let support = path.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
        let suffix_norms: Vec<f64> = (0..path.len()).map(|j| norm(&path[j..])).collect();
        for l in 0..support {
            let mut pen = 0.0;
            for norm_j in suffix_norms.iter().take(l + 1) {
                pen += path[l] / norm_j;
            }
            worst = worst.max((grad[l] + lam * pen).abs());
        }
        if support < path.len() {
            let neg_tail: Vec<f64> = grad[support..].iter().map(|v| -v).collect();
            let (prox, _) = nested_prox_dual(&neg_tail, lam, 1e-20);
            worst = worst.max(prox.iter().fold(0.0, |a, v| a.max(v.abs())));
        }
    }
    worst
}

/// Largest violation of the lasso optimality conditions of one equation.
pub fn l1_kkt_violation(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, dims: Dims, lambda_phi: f64, lambda_b: f64) -> f64 {
    let g = row_gradient(design, y, w);
    let kp = dims.k * dims.p;
    let mut worst: f64 = 0.0;
    for (c, (gc, wc)) in g.iter().zip(w.iter()).enumerate() {
        let lam = if c < kp { lambda_phi } else { lambda_b };
        let v = if *wc != 0.0 {
            (gc + lam * wc.signum()).abs()
        } else {
            (gc.abs() - lam).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
