//! Synthetic stable VARX processes with known lag structure.
//!
//! Draw order for a given seed: Φ coefficients (equation, series, lag),
//! then B coefficients in the same order, then for every time step the
//! exogenous vector followed by the innovation vector. Replication `r` of a
//! Monte Carlo study uses seed `seed + r`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};
use crate::model::{companion_spectral_radius, CoefficientSet, VarxDataset, VarxSpec};
use crate::scalar::Scalar;

const RADIUS_TOL: f64 = 1e-8;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign<T> {
    pub k: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    /// True maximal lag of series d in equation i, entries in `0..=p`.
    pub true_lag_matrix_phi: Array2<usize>,
    /// True maximal lag of exogenous series r in equation i, entries in `0..=s`.
    pub true_lag_matrix_b: Array2<usize>,
    pub coefficient_scale: T,
    pub target_spectral_radius: T,
    pub innovation_sd: T,
    pub seed: u64,
    pub t_len: usize,
    pub burn_in: usize,
}

impl<T: Scalar> SimDesign<T> {
    /// Design with the given lag structure and default scales.
    pub fn new(p: usize, s: usize, true_lag_matrix_phi: Array2<usize>, true_lag_matrix_b: Array2<usize>, t_len: usize, seed: u64) -> Self {
        SimDesign {
            k: true_lag_matrix_phi.nrows(),
            m: true_lag_matrix_b.ncols(),
            p,
            s,
            true_lag_matrix_phi,
            true_lag_matrix_b,
            coefficient_scale: T::of(0.5),
            target_spectral_radius: T::of(0.8),
            innovation_sd: T::one(),
            seed,
            t_len,
            burn_in: 200,
        }
    }

    /// Sparse low-order design: every own lag is active, each cross pair is
    /// active with probability `density`; active lags are uniform on `1..=max_lag`.
    /// The structure is drawn from its own stream seeded by `structure_seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn random_low_lag(k: usize, m: usize, p: usize, s: usize, max_lag: usize, density: f64, t_len: usize, structure_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(structure_seed);
        let max_phi = max_lag.min(p);
        let max_b = max_lag.min(s);
        let mut draw = |own: bool, cap: usize| -> usize {
            if cap == 0 {
                return 0;
            }
            if own || rng.random_bool(density) {
                rng.random_range(1..=cap)
            } else {
                0
            }
        };
        let lag_phi = Array2::from_shape_fn((k, k), |(i, d)| draw(i == d, max_phi));
        let lag_b = Array2::from_shape_fn((k, m), |_| draw(false, max_b));
        Self::new(p, s, lag_phi, lag_b, t_len, structure_seed)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VarxError::InvalidConfig(m));
        if self.true_lag_matrix_phi.dim() != (self.k, self.k) || self.true_lag_matrix_b.dim() != (self.k, self.m) {
            return bad("lag matrix shapes do not match (k, m)".into());
        }
        if self.true_lag_matrix_phi.iter().any(|l| *l > self.p) || self.true_lag_matrix_b.iter().any(|l| *l > self.s) {
            return bad("true lags exceed the model orders".into());
        }
        if self.p == 0 || (self.m > 0) != (self.s > 0) {
            return bad(format!("invalid orders p = {}, s = {} for m = {}", self.p, self.s, self.m));
        }
        if !(self.target_spectral_radius >= T::zero() && self.target_spectral_radius < T::one()) {
            return bad("target spectral radius must lie in [0, 1)".into());
        }
        if !(self.innovation_sd > T::zero()) || !(self.coefficient_scale > T::zero()) {
            return bad("scales must be positive".into());
        }
        if self.t_len < 2 {
            return bad("series length must be at least 2".into());
        }
        Ok(())
    }
}

/// Simulates the design and returns the centered dataset with the true coefficients.
pub fn generate<T: Scalar>(design: &SimDesign<T>) -> Result<(VarxDataset<T>, CoefficientSet<T>)> {
    design.validate()?;
    let (k, m, p, s) = (design.k, design.m, design.p, design.s);
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let scale = design.coefficient_scale.to_f64_lossy();
    let uniform = |rng: &mut ChaCha8Rng| T::of(rng.random_range(-scale..=scale));

    let mut phi = Array2::<T>::zeros((k, k * p));
    for i in 0..k {
        for d in 0..k {
            for lag in 0..design.true_lag_matrix_phi[(i, d)] {
                phi[(i, lag * k + d)] = uniform(&mut rng);
            }
        }
    }
    let mut b = Array2::<T>::zeros((k, m * s));
    for i in 0..k {
        for r in 0..m {
            for lag in 0..design.true_lag_matrix_b[(i, r)] {
                b[(i, lag * m + r)] = uniform(&mut rng);
            }
        }
    }
    let phi = rescale_to_radius(phi, p, design.target_spectral_radius)?;

    let total = design.burn_in + design.t_len;
    let mut y = Array2::<T>::zeros((k, total));
    let mut x = Array2::<T>::zeros((m, total));
    let noise = Normal::new(0.0, design.innovation_sd.to_f64_lossy())
        .map_err(|e| VarxError::InvalidConfig(e.to_string()))?;
    for t in 0..total {
        for r in 0..m {
            let v: f64 = StandardNormal.sample(&mut rng);
            x[(r, t)] = T::of(v);
        }
        let mut yt: Array1<T> = (0..k).map(|_| T::of(noise.sample(&mut rng))).collect();
        for lag in 1..=p.min(t) {
            yt += &phi.slice(ndarray::s![.., (lag - 1) * k..lag * k]).dot(&y.column(t - lag));
        }
        for lag in 1..=s.min(t) {
            yt += &b.slice(ndarray::s![.., (lag - 1) * m..lag * m]).dot(&x.column(t - lag));
        }
        y.column_mut(t).assign(&yt);
    }
    let keep = ndarray::s![.., design.burn_in..];
    let endo_names = (1..=k).map(|i| format!("y{i}")).collect();
    let exog_names = (1..=m).map(|i| format!("x{i}")).collect();
    let dataset = VarxDataset::new(y.slice(keep).to_owned(), x.slice(keep).to_owned(), endo_names, exog_names)?;
    let truth = CoefficientSet::new(
        phi,
        b,
        VarxSpec::new(p, s),
        dataset.endo_means().to_owned(),
        dataset.exog_means().to_owned(),
    )?;
    Ok((dataset, truth))
}

/// Scales Φ by a scalar so that its companion spectral radius equals `target`.
///
/// For p = 1 the radius is homogeneous in the scale and the factor is exact;
/// otherwise the factor is found by bisection.
pub fn rescale_to_radius<T: Scalar>(phi: Array2<T>, p: usize, target: T) -> Result<Array2<T>> {
    let radius = companion_spectral_radius(phi.view(), p)?;
    if radius == T::zero() {
        if target > T::zero() {
            log::warn!("all-zero endogenous coefficients cannot be rescaled to radius {target}");
        }
        return Ok(phi);
    }
    if p == 1 {
        return Ok(phi.mapv(|v| v * (target / radius)));
    }
    let radius_at = |c: T| companion_spectral_radius(phi.mapv(|v| v * c).view(), p);
    let tol = T::of(RADIUS_TOL);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut doublings = 0;
    while radius_at(hi)? < target {
        lo = hi;
        hi *= T::of(2.0);
        doublings += 1;
        if doublings > BISECTION_STEPS {
            return Err(VarxError::BisectionNoConvergence(BISECTION_STEPS));
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) * T::of(0.5);
        let r = radius_at(mid)?;
        if (r - target).abs() <= tol {
            return Ok(phi.mapv(|v| v * mid));
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(VarxError::BisectionNoConvergence(BISECTION_STEPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scalar_design_hits_radius_exactly() {
        let d = SimDesign::<f64>::new(1, 0, array![[1]], Array2::zeros((1, 0)), 50, 3);
        let d = SimDesign {
            target_spectral_radius: 0.5,
            ..d
        };
        let (_, truth) = generate(&d).unwrap();
        assert!((truth.phi()[(0, 0)].abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_lags_give_zero_phi() {
        let d = SimDesign::<f64>::new(2, 0, Array2::zeros((2, 2)), Array2::zeros((2, 0)), 30, 1);
        let (ds, truth) = generate(&d).unwrap();
        assert!(truth.phi().iter().all(|v| *v == 0.0));
        assert_eq!(ds.len(), 30);
    }

    #[test]
    fn rejects_lags_beyond_order() {
        let d = SimDesign::<f64>::new(1, 0, array![[2]], Array2::zeros((1, 0)), 30, 1);
        assert!(generate(&d).is_err());
    }

    #[test]
    fn low_lag_structure_respects_cap() {
        let d = SimDesign::<f64>::random_low_lag(4, 2, 6, 6, 2, 0.3, 100, 9);
        assert!(d.true_lag_matrix_phi.iter().all(|l| *l <= 2));
        assert!((0..4).all(|i| d.true_lag_matrix_phi[(i, i)] >= 1));
        assert!(d.true_lag_matrix_b.iter().all(|l| *l <= 2));
    }
}
