//! Per-gesture identification of `(b, k, T)` and fit scoring.
//!
//! The second-order model is split into `x' = y` and `y' = -k x - b y + kT`.
//! Regressing the derivative series `[x', y']` on the library `[x, y, 1]`
//! gives a 2×3 coefficient matrix whose first row is pinned to `[0, 1, 0]`
//! by an equality constraint; the second row carries `[-k, -b, kT]`.

mod batch;
mod features;
mod score;
mod solver;

pub use batch::{
    fit_corpus, preprocess, smooth, CenteringScope, CorpusFit, FitConfig, GestureCountMismatch, SkipReport, SummaryRow,
};
pub use features::{build_features, FeatureMatrix};
pub use score::{r_squared, score_fit, simulate_segment, FitResult};
pub use solver::{fit_constrained_ls, CoefficientMatrix, MAX_ITERATIONS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("gesture has {0} samples; at least 4 are needed for 3 coefficients")]
    TooShort(usize),
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("feature matrix is rank deficient")]
    Singular,
    #[error("stiffness {0} too close to zero; target is undefined")]
    TargetUndefined(f64),
    #[error("estimated stiffness {0} is not positive; cannot reintegrate")]
    NonAttractor(f64),
    #[error(transparent)]
    Oscillator(#[from] crate::oscillator::OscillatorError),
}
