//! Simulates a sparse low-lag VARX, selects penalties by cross-validation
//! for both estimators and compares their expanding-window forecasts.
//!
//! cargo run --release -p hvarx --example compare_penalties -- [k m p T seed]

use std::time::Instant;

use hvarx::{
    bic, build_compact, build_grid, compare_reports, cross_validate, expanding_window_eval, extract_lag_matrices,
    fit, generate, lambda_max, CvOptions, CvSplit, EvalOptions, PenaltyKind, SimDesign, SolverConfig, VarxSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let arg = |i: usize, default: usize| args.get(i).copied().unwrap_or(default);
    let (k, m, p, t_len, seed) = (arg(0, 4), arg(1, 2), arg(2, 6), arg(3, 200), arg(4, 1) as u64);

    let design = SimDesign::<f64>::random_low_lag(k, m, p, p, 2, 0.25, t_len, seed);
    let (dataset, truth) = generate(&design)?;
    let spec = VarxSpec::new(p, p);
    println!("true Φ lag matrix:\n{}", design.true_lag_matrix_phi);

    let cv_opts = CvOptions::default();
    let split = CvSplit::new(dataset.len(), &cv_opts)?;
    let train = build_compact(&dataset.window(0, split.train_end)?, spec)?;
    let mut reports = Vec::new();
    for penalty in [PenaltyKind::Hierarchical, PenaltyKind::L1] {
        let start = Instant::now();
        let config = SolverConfig::new(penalty, 0.0, 0.0);
        let grid = build_grid(lambda_max(&train, penalty)?, 10, 1e-3)?;
        let cv = cross_validate(&dataset, spec, &grid, &config, &cv_opts)?;
        let cv_time = start.elapsed();
        let lambdas = (cv.best_lambda_phi, cv.best_lambda_b);
        let report = expanding_window_eval(&dataset, spec, lambdas, &config, &EvalOptions::default())?;

        let full = build_compact(&dataset.window(0, report.test_start)?, spec)?;
        let fitted = fit(&full, &config.with_lambdas(lambdas.0, lambdas.1))?;
        let lags = extract_lag_matrices(&fitted.coefficients, 0.0);
        println!(
            "{:>5}: λ = ({:.4}, {:.4})  msfe = {:.4}  bic = {:.3}  cv {:?}  total {:?}",
            penalty.label(),
            lambdas.0,
            lambdas.1,
            report.msfe,
            bic(&fitted, &full).value,
            cv_time,
            start.elapsed()
        );
        println!("estimated Φ lag matrix:\n{}", lags.phi);
        reports.push(report);
    }
    let (a, b) = reports.split_at_mut(1);
    let dm = compare_reports(&mut a[0], &mut b[0])?;
    println!("Diebold-Mariano (hvarx vs l1): stat = {:.3}, p = {:.3}", dm.statistic, dm.pvalue);
    println!("true radius {:.3}", truth.spectral_radius()?);
    Ok(())
}
