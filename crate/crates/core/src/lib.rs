//! Sparse estimation of high-dimensional VARX models
//!
//! ```text
//! y_t = Σ_{ℓ=1..p} Φ_ℓ y_{t−ℓ} + Σ_{j=1..s} B_j x_{t−j} + ε_t
//! ```
//!
//! with a lag-based hierarchical group-lasso penalty (automatic lag
//! selection per coefficient pair) or an elementwise ℓ1 baseline.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below name the common instantiations.

// `!(x > 0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod prox;
pub mod scalar;
pub mod select;
pub mod simgen;
pub mod solver;

pub use error::{Result, VarxError};
pub use eval::{
    compare_reports, diebold_mariano, expanding_window_eval, extract_lag_matrices, holdout_len, msfe,
    one_step_forecast, DmTest, EvalOptions, ForecastReport, LagMatrices, Reselection,
};
pub use io::{
    read_coefficients, write_coefficients, write_heatmap, write_lag_matrix, write_means, LabeledCoefficients,
};
pub use model::{
    build_compact, companion_matrix, companion_spectral_radius, CoefficientSet, CompactForm, SeriesTable,
    VarxDataset, VarxSpec,
};
pub use prox::{
    group_soft_threshold, prox_hier_suffix, prox_l1, PenaltyKind, SuffixGroupVector,
};
pub use scalar::Scalar;
pub use select::{
    bic, bic_of, build_grid, cross_validate, lambda_max, Bic, CvMode, CvOptions, CvResult, CvSplit,
    GridPairing, LambdaGrid,
};
pub use simgen::{generate, SimDesign};
pub use solver::{fit, fit_warm, objective, FitResult, Problem, SolverConfig};

pub type VarxDatasetF64 = VarxDataset<f64>;
pub type VarxDatasetF32 = VarxDataset<f32>;
pub type CompactFormF64 = CompactForm<f64>;
pub type CompactFormF32 = CompactForm<f32>;
pub type CoefficientSetF64 = CoefficientSet<f64>;
pub type CoefficientSetF32 = CoefficientSet<f32>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type FitResultF64 = FitResult<f64>;
pub type FitResultF32 = FitResult<f32>;
pub type LambdaGridF64 = LambdaGrid<f64>;
pub type CvResultF64 = CvResult<f64>;
pub type ForecastReportF64 = ForecastReport<f64>;
pub type SimDesignF64 = SimDesign<f64>;
