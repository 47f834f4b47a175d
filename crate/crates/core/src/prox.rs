//! Proximal operators for the elementwise ℓ1 penalty and the nested
//! lag-suffix group penalty.
//!
//! For a coefficient path `v = [v_1, …, v_q]` indexed by lag, the
//! hierarchical penalty is `Σ_ℓ w_ℓ ‖v[ℓ..q]‖₂`: every suffix of the path
//! forms a group, and each group is nested inside the previous one. Its
//! proximal map zeroes high lags before low lags, so the support of the
//! output is always a prefix `{1, …, L}`.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Which penalty the estimator applies to each coefficient path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    /// Nested lag-suffix group lasso.
    Hierarchical,
    /// Elementwise lasso.
    L1,
}

impl PenaltyKind {
    pub fn label(self) -> &'static str {
        match self {
            PenaltyKind::Hierarchical => "hvarx",
            PenaltyKind::L1 => "l1",
        }
    }
}

/// One lag-indexed coefficient path, e.g. `[Φ_1[i,d], …, Φ_p[i,d]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffixGroupVector<T>(Vec<T>);

impl<T: Scalar> SuffixGroupVector<T> {
    /// Returns `None` for an empty or non-finite path.
    pub fn new(values: Vec<T>) -> Option<Self> {
        (!values.is_empty() && values.iter().all(|v| v.is_finite())).then_some(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prox(&self, tau: T) -> Vec<T> {
        prox_hier_suffix(&self.0, tau)
    }

    /// Largest lag with a nonzero coefficient, 0 when the path is zero.
    pub fn max_lag(&self) -> usize {
        max_nonzero_lag(&self.0, T::zero())
    }
}

pub(crate) fn l2_norm<T: Scalar>(v: &[T]) -> T {
    // scaled accumulation guards against overflow for large entries
    let scale = v.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss: T = v.iter().map(|x| (*x / scale) * (*x / scale)).sum();
    scale * ss.sqrt()
}

/// Largest 1-based index with `|v| > threshold`; 0 if none.
pub fn max_nonzero_lag<T: Scalar>(v: &[T], threshold: T) -> usize {
    v.iter().rposition(|x| x.abs() > threshold).map_or(0, |i| i + 1)
}

/// Block soft-thresholding `max(0, 1 − τ/‖v‖₂)·v`, in place.
///
/// A vector with `‖v‖₂ ≤ τ` maps to zero, including `v = 0`.
pub fn group_soft_threshold_in_place<T: Scalar>(v: &mut [T], tau: T) {
    let norm = l2_norm(v);
    if norm <= tau {
        v.iter_mut().for_each(|x| *x = T::zero());
    } else if tau > T::zero() {
        let scale = T::one() - tau / norm;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

pub fn group_soft_threshold<T: Scalar>(v: &[T], tau: T) -> Vec<T> {
    let mut out = v.to_vec();
    group_soft_threshold_in_place(&mut out, tau);
    out
}

/// Proximal map of `τ Σ_ℓ w_ℓ ‖v[ℓ..q]‖₂`, in place.
///
/// Groups are nested, so composing the group shrinkage maps from the
/// innermost group (the last lag alone) out to the full path gives the exact
/// proximal point. `weights`, when given, must have one entry per lag.
pub fn prox_hier_suffix_weighted_in_place<T: Scalar>(v: &mut [T], tau: T, weights: Option<&[T]>) {
    if let Some(w) = weights {
        assert_eq!(w.len(), v.len(), "one weight per suffix group");
    }
    let q = v.len();
    for start in (0..q).rev() {
        let t = weights.map_or(tau, |w| tau * w[start]);
        group_soft_threshold_in_place(&mut v[start..], t);
    }
}

pub fn prox_hier_suffix_in_place<T: Scalar>(v: &mut [T], tau: T) {
    prox_hier_suffix_weighted_in_place(v, tau, None);
}

pub fn prox_hier_suffix<T: Scalar>(v: &[T], tau: T) -> Vec<T> {
    let mut out = v.to_vec();
    prox_hier_suffix_in_place(&mut out, tau);
    out
}

/// Elementwise soft-thresholding `sign(v)·max(0, |v| − τ)`, in place.
pub fn prox_l1_in_place<T: Scalar>(v: &mut [T], tau: T) {
    for x in v.iter_mut() {
        let a = x.abs() - tau;
        *x = if a > T::zero() { x.signum() * a } else { T::zero() };
    }
}

pub fn prox_l1<T: Scalar>(v: &[T], tau: T) -> Vec<T> {
    let mut out = v.to_vec();
    prox_l1_in_place(&mut out, tau);
    out
}

/// Penalty value of one path (unit multiplier).
pub fn path_penalty<T: Scalar>(v: &[T], kind: PenaltyKind, weights: Option<&[T]>) -> T {
    match kind {
        PenaltyKind::Hierarchical => (0..v.len())
            .map(|l| weights.map_or(T::one(), |w| w[l]) * l2_norm(&v[l..]))
            .sum(),
        PenaltyKind::L1 => v.iter().map(|x| x.abs()).sum(),
    }
}

/// Smallest τ at which the path's proximal map is exactly zero.
///
/// For ℓ1 this is `max |v_i|`. For the nested penalty the zero set of the
/// prox grows monotonically in τ, so the boundary is located by bisection on
/// `[0, ‖v‖₂ / w_1]`; the returned value is the upper end of the final bracket
/// and therefore always zeroes the path.
pub fn zeroing_threshold<T: Scalar>(v: &[T], kind: PenaltyKind, weights: Option<&[T]>) -> T {
    match kind {
        PenaltyKind::L1 => v.iter().fold(T::zero(), |a, x| a.max(x.abs())),
        PenaltyKind::Hierarchical => {
            let norm = l2_norm(v);
            if norm == T::zero() {
                return T::zero();
            }
            let w_first = weights.map_or(T::one(), |w| w[0]);
            let mut hi = norm / w_first;
            let mut lo = T::zero();
            let mut buf = v.to_vec();
            let is_zero = |tau: T, buf: &mut Vec<T>| {
                buf.copy_from_slice(v);
                prox_hier_suffix_weighted_in_place(buf, tau, weights);
                buf.iter().all(|x| *x == T::zero())
            };
            for _ in 0..200 {
                let mid = lo + (hi - lo) * T::of(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if is_zero(mid, &mut buf) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    }
}
