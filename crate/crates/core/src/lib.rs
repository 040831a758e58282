//! Estimation of linear harmonic-oscillator parameters (stiffness `k`,
//! damping `b`, target `T`) from articulator kinematic trajectories.
//!
//! The pipeline runs per trajectory: optional downsampling and centering,
//! truncated-DCT smoothing, velocity zero-crossing segmentation, an
//! equality-constrained least-squares fit of `x'' + b x' + k (x - T) = 0`
//! per gesture, and RK4 reintegration scored by R². Fitted parameters can
//! then be compared across measurement modalities with a hierarchical
//! Bayesian model.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what file I/O and the
//! MCMC sampler use.

pub mod corpus;
pub mod estimate;
pub mod gesture;
pub mod oscillator;
pub mod scalar;
pub mod signal;
pub mod stats;
pub mod synth;

pub use scalar::Scalar;

pub type Trajectory = corpus::TrajectoryRecord<f64>;
pub type Smoothed = signal::SmoothedTrajectory<f64>;
pub type Segment = gesture::GestureSegment<f64>;
pub type Params = oscillator::OscillatorParams<f64>;
pub type Fit = estimate::FitResult<f64>;
pub type Features = estimate::FeatureMatrix<f64>;
pub type Coefficients = estimate::CoefficientMatrix<f64>;

pub type Trajectory32 = corpus::TrajectoryRecord<f32>;
pub type Params32 = oscillator::OscillatorParams<f32>;
pub type Fit32 = estimate::FitResult<f32>;

/// Any error raised by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Oscillator(#[from] oscillator::OscillatorError),
    #[error(transparent)]
    Estimate(#[from] estimate::EstimateError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
