mod common;

use common::small_instance;
use hvarx::{
    bic, bic_of, build_compact, build_grid, cross_validate, diebold_mariano, expanding_window_eval,
    extract_lag_matrices, fit, generate, holdout_len, lambda_max, msfe, one_step_forecast, CoefficientSet, CvMode,
    CvOptions, CvSplit, EvalOptions, LambdaGrid, PenaltyKind, Reselection, SimDesign, SolverConfig, VarxDataset,
    VarxError, VarxSpec,
};
use ndarray::{array, s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn low_lag_dataset(seed: u64, t_len: usize) -> VarxDataset<f64> {
    let design = SimDesign::random_low_lag(3, 1, 3, 2, 2, 0.3, t_len, seed);
    generate(&design).unwrap().0
}

#[test]
fn lambda_max_scalar_closed_form() {
    let ds = VarxDataset::new(array![[0.3, -1.0, 0.8, 0.1, -0.4, 1.2, 0.5]], Array2::zeros((0, 7)), names("y", 1), vec![])
        .unwrap();
    let data = build_compact(&ds, VarxSpec::new(1, 0)).unwrap();
    let yz: f64 = data.y.row(0).dot(&data.z.row(0));
    for penalty in [PenaltyKind::Hierarchical, PenaltyKind::L1] {
        let (lp, lb) = lambda_max(&data, penalty).unwrap();
        assert!((lp - yz.abs()).abs() <= 1e-7 * yz.abs());
        assert_eq!(lb, 0.0);
    }
}

#[test]
fn lambda_max_rejects_zero_response() {
    let ds = VarxDataset::<f64>::new(Array2::zeros((2, 10)), Array2::zeros((0, 10)), names("y", 2), vec![]).unwrap();
    let data = build_compact(&ds, VarxSpec::new(1, 0)).unwrap();
    assert!(matches!(lambda_max(&data, PenaltyKind::L1), Err(VarxError::ZeroResponse)));
}

#[test]
fn hierarchical_anchor_is_bounded_by_path_norms() {
    for seed in 0..20 {
        let (_, data) = small_instance(seed);
        let (lp, _) = lambda_max(&data, PenaltyKind::Hierarchical).unwrap();
        let yz = data.y.dot(&data.z.t());
        let (k, p) = (data.k, data.spec.p);
        let mut bound: f64 = 0.0;
        for i in 0..k {
            for d in 0..k {
                let n: f64 = (0..p).map(|l| yz[(i, l * k + d)].powi(2)).sum::<f64>().sqrt();
                bound = bound.max(n);
            }
        }
        assert!(lp <= bound * (1.0 + 1e-7));
    }
}

#[test]
fn default_grid_is_ten_by_ten() {
    let ds = low_lag_dataset(1, 120);
    let spec = VarxSpec::new(3, 2);
    let split = CvSplit::new(ds.len(), &CvOptions::default()).unwrap();
    let train = build_compact(&ds.window(0, split.train_end).unwrap(), spec).unwrap();
    let grid = build_grid(lambda_max(&train, PenaltyKind::Hierarchical).unwrap(), 10, 1e-3).unwrap();
    let config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    let cv = cross_validate(&ds, spec, &grid, &config, &CvOptions::default()).unwrap();
    assert_eq!(cv.cv_msfe_surface.dim(), (10, 10));
    assert!(cv.cv_msfe_surface.iter().all(|v| v.is_finite()));
    let min = cv.cv_msfe_surface.iter().copied().fold(f64::INFINITY, f64::min);
    let ip = grid.phi_values.iter().position(|v| *v == cv.best_lambda_phi).unwrap();
    let ib = grid.b_values.iter().position(|v| *v == cv.best_lambda_b).unwrap();
    assert_eq!(cv.cv_msfe_surface[(ip, ib)], min);
    assert_eq!(cv.split_boundary, split.train_end);

    // the corner at λ_max reproduces the zero model, i.e. forecasting the training mean
    let raw = ds.raw_endo();
    let mean = raw.slice(s![.., ..split.train_end]).mean_axis(ndarray::Axis(1)).unwrap();
    let block = raw.slice(s![.., split.train_end..split.validation_end]);
    let zero_msfe = msfe((&block - &mean.insert_axis(ndarray::Axis(1))).view());
    assert!((cv.cv_msfe_surface[(0, 0)] - zero_msfe).abs() < 1e-12);
}

#[test]
fn single_pair_grid_returns_that_pair() {
    let ds = low_lag_dataset(2, 80);
    let config = SolverConfig::new(PenaltyKind::L1, 0.0, 0.0);
    let cv = cross_validate(&ds, VarxSpec::new(3, 2), &LambdaGrid::single(3.5, 1.25), &config, &CvOptions::default()).unwrap();
    assert_eq!((cv.best_lambda_phi, cv.best_lambda_b), (3.5, 1.25));
}

#[test]
fn ties_go_to_the_sparser_model() {
    // every grid point lies above λ_max, so the whole surface is the zero model
    let ds = low_lag_dataset(3, 80);
    let spec = VarxSpec::new(3, 2);
    let split = CvSplit::new(ds.len(), &CvOptions::default()).unwrap();
    let train = build_compact(&ds.window(0, split.train_end).unwrap(), spec).unwrap();
    let (lp, lb) = lambda_max(&train, PenaltyKind::Hierarchical).unwrap();
    let grid = build_grid((4.0 * lp, 4.0 * lb), 3, 0.5).unwrap();
    let config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    let cv = cross_validate(&ds, spec, &grid, &config, &CvOptions::default()).unwrap();
    let first = cv.cv_msfe_surface[(0, 0)];
    assert!(cv.cv_msfe_surface.iter().all(|v| *v == first));
    assert_eq!((cv.best_lambda_phi, cv.best_lambda_b), (4.0 * lp, 4.0 * lb));
}

#[test]
fn cross_validation_is_deterministic_and_modes_agree() {
    let ds = low_lag_dataset(4, 100);
    let spec = VarxSpec::new(3, 2);
    let split = CvSplit::new(ds.len(), &CvOptions::default()).unwrap();
    let train = build_compact(&ds.window(0, split.train_end).unwrap(), spec).unwrap();
    let grid = build_grid(lambda_max(&train, PenaltyKind::L1).unwrap(), 5, 1e-2).unwrap();
    let mut config = SolverConfig::new(PenaltyKind::L1, 0.0, 0.0);
    config.tol = 1e-10;
    let a = cross_validate(&ds, spec, &grid, &config, &CvOptions::default()).unwrap();
    let b = cross_validate(&ds, spec, &grid, &config, &CvOptions::default()).unwrap();
    assert_eq!(a.cv_msfe_surface, b.cv_msfe_surface);
    let parallel = CvOptions {
        mode: CvMode::Parallel,
        ..CvOptions::default()
    };
    let c = cross_validate(&ds, spec, &grid, &config, &parallel).unwrap();
    for (x, y) in a.cv_msfe_surface.iter().zip(c.cv_msfe_surface.iter()) {
        assert!((x - y).abs() < 1e-6 * x.abs());
    }
}

#[test]
fn validation_forecasts_do_not_see_the_future() {
    // A huge value placed at a validation time can change the score only
    // through that point and the ones after it.
    let ds = low_lag_dataset(5, 100);
    let spec = VarxSpec::new(3, 2);
    let opts = CvOptions::default();
    let split = CvSplit::new(ds.len(), &opts).unwrap();
    let coefs = {
        let train = build_compact(&ds.window(0, split.train_end).unwrap(), spec).unwrap();
        let (lp, lb) = lambda_max(&train, PenaltyKind::L1).unwrap();
        fit(&train, &SolverConfig::new(PenaltyKind::L1, 0.1 * lp, 0.1 * lb)).unwrap().coefficients
    };
    let raw_endo = ds.raw_endo();
    let raw_exog = ds.raw_exog();
    let sentinel_at = split.train_end + 5;
    let mut poisoned = raw_endo.clone();
    poisoned.column_mut(sentinel_at).fill(1e6);
    for t in split.train_end..=sentinel_at {
        let clean = one_step_forecast(&coefs, raw_endo.slice(s![.., ..t]), raw_exog.slice(s![.., ..t])).unwrap();
        let dirty = one_step_forecast(&coefs, poisoned.slice(s![.., ..t]), raw_exog.slice(s![.., ..t])).unwrap();
        assert_eq!(clean, dirty, "forecast at t = {t} used data from t or later");
    }
}

#[test]
fn evaluation_forecasts_do_not_see_the_future() {
    let ds = low_lag_dataset(6, 90);
    let spec = VarxSpec::new(3, 2);
    let config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    let h = holdout_len(ds.len(), 0.15);
    let last = ds.len() - 1;
    let base = expanding_window_eval(&ds, spec, (20.0, 20.0), &config, &EvalOptions::default()).unwrap();

    let mut endo = ds.raw_endo();
    endo.column_mut(last).mapv_inplace(|v| v + 1e3);
    let perturbed = VarxDataset::new(endo, ds.raw_exog(), ds.endo_names().to_vec(), ds.exog_names().to_vec()).unwrap();
    let other = expanding_window_eval(&perturbed, spec, (20.0, 20.0), &config, &EvalOptions::default()).unwrap();
    assert_eq!(base.horizon, h);
    for j in 0..h {
        for i in 0..ds.k() {
            assert!((base.per_step_forecasts[(i, j)] - other.per_step_forecasts[(i, j)]).abs() < 1e-9);
        }
    }
}

#[test]
fn forecast_matches_simulation_recursion() {
    let design = SimDesign::random_low_lag(2, 1, 2, 1, 2, 0.5, 50, 9);
    let (ds, truth) = generate(&design).unwrap();
    let raw_y = ds.raw_endo();
    let raw_x = ds.raw_exog();
    let t = 40;
    // the truth has zero means: forecast = Σ Φ_ℓ y_{t−ℓ} + Σ B_j x_{t−j}
    let zero_means = CoefficientSet::new(
        truth.phi().to_owned(),
        truth.b().to_owned(),
        truth.spec(),
        Array1::zeros(2),
        Array1::zeros(1),
    )
    .unwrap();
    let fc: Array1<f64> = one_step_forecast(&zero_means, raw_y.slice(s![.., ..t]), raw_x.slice(s![.., ..t])).unwrap();
    let mut manual = Array1::<f64>::zeros(2);
    for lag in 1..=2 {
        manual = manual + truth.phi_lag(lag).dot(&raw_y.column(t - lag));
    }
    manual = manual + truth.b_lag(1).dot(&raw_x.column(t - 1));
    for (a, b) in fc.iter().zip(manual.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(one_step_forecast(&zero_means, raw_y.slice(s![.., ..1]), raw_x.slice(s![.., ..1])).is_err());
}

#[test]
fn white_noise_msfe_is_close_to_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t_len = 600;
    let endo = Array2::from_shape_fn((2, t_len), |_| rng.sample::<f64, _>(StandardNormal) * 1.5);
    let ds = VarxDataset::new(endo, Array2::zeros((0, t_len)), names("y", 2), vec![]).unwrap();
    let spec = VarxSpec::new(2, 0);
    let train = build_compact(&ds, spec).unwrap();
    let (lp, _) = lambda_max(&train, PenaltyKind::Hierarchical).unwrap();
    let config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    let report = expanding_window_eval(&ds, spec, (1.01 * lp, 0.0), &config, &EvalOptions::default()).unwrap();
    assert!((report.msfe - 2.25).abs() < 0.45, "msfe {}", report.msfe);
    assert!(report.failed.iter().all(|f| !f));
}

#[test]
fn test_block_size_follows_rounding_rule() {
    assert_eq!(holdout_len(76, 0.15), 12);
    assert_eq!(holdout_len(200, 0.15), 30);
    assert_eq!(holdout_len(101, 0.15), 16);
}

#[test]
fn parallel_and_sequential_evaluation_agree() {
    let ds = low_lag_dataset(11, 80);
    let spec = VarxSpec::new(3, 2);
    let mut config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    config.tol = 1e-10;
    let seq = expanding_window_eval(&ds, spec, (5.0, 5.0), &config, &EvalOptions::default()).unwrap();
    let par = expanding_window_eval(
        &ds,
        spec,
        (5.0, 5.0),
        &config,
        &EvalOptions {
            parallel: true,
            ..EvalOptions::default()
        },
    )
    .unwrap();
    for (a, b) in seq.per_step_forecasts.iter().zip(par.per_step_forecasts.iter()) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn reselection_picks_a_pair_per_step() {
    let ds = low_lag_dataset(12, 80);
    let config = SolverConfig::new(PenaltyKind::L1, 0.0, 0.0);
    let options = EvalOptions {
        reselect: Some(Reselection {
            n_points: 3,
            grid_ratio: 0.01,
            validation_fraction: 0.15,
        }),
        ..EvalOptions::default()
    };
    let report = expanding_window_eval(&ds, VarxSpec::new(3, 2), (0.0, 0.0), &config, &options).unwrap();
    assert_eq!(report.lambdas.len(), report.horizon);
    assert!(report.lambdas.iter().all(|(a, b)| *a > 0.0 && *b > 0.0));
}

#[test]
fn lag_matrix_extraction_round_trip() {
    let design = SimDesign::new(4, 3, array![[2, 0], [4, 1]], array![[3], [0]], 60, 1);
    let (_, truth) = generate(&design).unwrap();
    let lags = extract_lag_matrices(&truth, 0.0);
    assert_eq!(lags.phi, design.true_lag_matrix_phi);
    assert_eq!(lags.b, design.true_lag_matrix_b);
}

#[test]
fn bic_of_zero_model_is_log_det_of_response_covariance() {
    let (_, data) = small_instance(13);
    let zero = CoefficientSet::zeros_like(&data);
    let n = data.n_samples() as f64;
    let cov = data.y.dot(&data.y.t()) / n;
    let logdet = match data.k {
        1 => cov[(0, 0)].ln(),
        _ => (cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)]).ln(),
    };
    let b = bic_of(&zero, &data);
    assert_eq!(b.df, 0);
    assert!(!b.singular);
    assert!((b.value - logdet).abs() < 1e-10);
}

#[test]
fn bic_penalizes_each_nonzero() {
    let (_, data) = small_instance(14);
    let fitted = fit(&data, &SolverConfig::new(PenaltyKind::L1, 0.0, 0.0)).unwrap();
    let b = bic(&fitted, &data);
    let n = data.n_samples() as f64;
    let resid = &data.y - &fitted.coefficients.phi().dot(&data.z) - &fitted.coefficients.b().dot(&data.x);
    let cov = resid.dot(&resid.t()) / n;
    let logdet = match data.k {
        1 => cov[(0, 0)].ln(),
        _ => (cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)]).ln(),
    };
    assert_eq!(b.df, fitted.coefficients.nonzero_count());
    assert!((b.value - (logdet + n.ln() / n * b.df as f64)).abs() < 1e-9);
}

#[test]
fn bic_flags_perfect_fit() {
    // y_t = 0.5 y_{t-1} exactly
    let endo: Array2<f64> = Array2::from_shape_fn((1, 30), |(_, t)| 0.5f64.powi(t as i32));
    let ds = VarxDataset::new(endo, Array2::zeros((0, 30)), names("y", 1), vec![]).unwrap();
    let data = build_compact(&ds, VarxSpec::new(1, 0)).unwrap();
    let mut perfect = data.clone();
    perfect.y = data.z.mapv(|v| 0.5 * v);
    let coefs = CoefficientSet::new(array![[0.5]], Array2::zeros((1, 0)), VarxSpec::new(1, 0), array![0.0], Array1::zeros(0)).unwrap();
    let b = bic_of(&coefs, &perfect);
    assert!(b.singular);
    assert!(b.value.is_finite());
}

#[test]
fn dm_statistic_is_antisymmetric_and_zero_for_identical_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = Array2::from_shape_fn((3, 40), |_| rng.sample::<f64, _>(StandardNormal));
    let b = Array2::from_shape_fn((3, 40), |_| rng.sample::<f64, _>(StandardNormal) * 1.3);
    let ab = diebold_mariano(a.view(), b.view()).unwrap();
    let ba = diebold_mariano(b.view(), a.view()).unwrap();
    assert!((ab.statistic + ba.statistic).abs() < 1e-12);
    assert!((ab.pvalue - ba.pvalue).abs() < 1e-12);
    let same = diebold_mariano(a.view(), a.view()).unwrap();
    assert_eq!((same.statistic, same.pvalue), (0.0, 1.0));
    assert!(diebold_mariano(a.view(), b.slice(s![.., ..10])).is_err());
}

#[test]
fn dm_statistic_matches_hand_computation() {
    let a = array![[1.0, 2.0, 0.0, 1.0]];
    let b = array![[0.0, 1.0, 1.0, 0.0]];
    // d = [1, 3, -1, 1], mean 1, sample variance 8/3
    let dm = diebold_mariano(a.view(), b.view()).unwrap();
    let expected = 1.0 / (8.0f64 / 3.0 / 4.0).sqrt();
    assert!((dm.statistic - expected).abs() < 1e-12);
    let p = statrs::function::erf::erfc(expected / 2f64.sqrt());
    assert!((dm.pvalue - p).abs() < 1e-12);
}

#[test]
fn dm_test_has_nominal_size_under_equal_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let reps = 1000;
    let mut rejections = 0;
    for _ in 0..reps {
        let a = Array2::from_shape_fn((4, 50), |_| rng.sample::<f64, _>(StandardNormal));
        let b = Array2::from_shape_fn((4, 50), |_| rng.sample::<f64, _>(StandardNormal));
        if diebold_mariano(a.view(), b.view()).unwrap().pvalue < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
}

#[test]
fn cross_validation_ignores_the_test_block() {
    let ds = low_lag_dataset(17, 100);
    let spec = VarxSpec::new(3, 2);
    let opts = CvOptions::default();
    let split = CvSplit::new(ds.len(), &opts).unwrap();
    let mut endo = ds.raw_endo();
    endo.slice_mut(s![.., split.validation_end..]).fill(1e6);
    let poisoned = VarxDataset::new(endo, ds.raw_exog(), ds.endo_names().to_vec(), ds.exog_names().to_vec()).unwrap();
    let grid = build_grid((50.0, 50.0), 4, 0.01).unwrap();
    let config = SolverConfig::new(PenaltyKind::Hierarchical, 0.0, 0.0);
    let clean = cross_validate(&ds, spec, &grid, &config, &opts).unwrap();
    let dirty = cross_validate(&poisoned, spec, &grid, &config, &opts).unwrap();
    for (a, b) in clean.cv_msfe_surface.iter().zip(dirty.cv_msfe_surface.iter()) {
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }
}
