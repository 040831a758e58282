//! Preprocessing: downsampling, centering, truncated-DCT smoothing and
//! finite-difference derivatives.

use crate::corpus::TrajectoryRecord;
use crate::scalar::{count, lit, mean, Scalar};

/// Number of retained DCT coefficients used when none is given.
pub const DEFAULT_DCT_ORDER: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("target rate {target} Hz exceeds source rate {source_rate} Hz (upsampling refused)")]
    Upsampling { target: f64, source_rate: f64 },
    #[error("target rate must be positive and finite")]
    InvalidRate,
    #[error("DCT order {order} outside 1..={len}")]
    InvalidOrder { order: usize, len: usize },
    #[error("differentiation needs at least 3 samples, got {0}")]
    TooShort(usize),
}

/// A trajectory after smoothing, with derivatives of the smoothed positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTrajectory<F> {
    pub base: TrajectoryRecord<F>,
    pub smoothed_positions: Vec<F>,
    pub velocity: Vec<F>,
    pub acceleration: Vec<F>,
    pub dct_order: usize,
}

impl<F: Scalar> SmoothedTrajectory<F> {
    /// Skips smoothing: derivatives are taken from the raw positions and
    /// `dct_order` is the sample count (the identity projection).
    pub fn unsmoothed(record: TrajectoryRecord<F>) -> Result<Self, SignalError> {
        let n = record.len();
        let positions = record.positions.clone();
        Self::from_positions(record, positions, n)
    }

    fn from_positions(base: TrajectoryRecord<F>, smoothed: Vec<F>, dct_order: usize) -> Result<Self, SignalError> {
        let velocity = differentiate(&smoothed, base.sample_rate)?;
        let acceleration = differentiate(&velocity, base.sample_rate)?;
        Ok(SmoothedTrajectory { base, smoothed_positions: smoothed, velocity, acceleration, dct_order })
    }

    pub fn len(&self) -> usize {
        self.smoothed_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smoothed_positions.is_empty()
    }
}

/// Resamples onto a coarser uniform grid by linear interpolation.
///
/// Output sample `j` sits at `t0 + j / target_rate`; the grid stops at the
/// last point not beyond the input's final sample.
pub fn downsample<F: Scalar>(record: &TrajectoryRecord<F>, target_rate: F) -> Result<TrajectoryRecord<F>, SignalError> {
    if !(target_rate > F::zero()) || !target_rate.is_finite() {
        return Err(SignalError::InvalidRate);
    }
    if target_rate > record.sample_rate {
        return Err(SignalError::Upsampling {
            target: target_rate.to_f64().unwrap_or(f64::NAN),
            source_rate: record.sample_rate.to_f64().unwrap_or(f64::NAN),
        });
    }
    let x = &record.positions;
    let last = x.len() - 1;
    let ratio = record.sample_rate / target_rate;
    // small slack so a grid point landing on the final sample up to rounding is kept
    let m = (count::<F>(last) / ratio + lit(1e-9)).floor().to_usize().unwrap_or(0);

    let positions = (0..=m)
        .map(|j| {
            let u = count::<F>(j) * ratio;
            let i = u.floor().to_usize().unwrap_or(0).min(last);
            let frac = u - count::<F>(i);
            if i == last || frac <= F::zero() {
                x[i]
            } else {
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect();

    Ok(TrajectoryRecord { id: record.id.clone(), sample_rate: target_rate, t0: record.t0, positions })
}

/// Subtracts the arithmetic mean; no scaling.
pub fn center<F: Scalar>(record: &TrajectoryRecord<F>) -> TrajectoryRecord<F> {
    let m = mean(&record.positions);
    shift(record, -m)
}

/// Adds a constant offset to every sample.
pub fn shift<F: Scalar>(record: &TrajectoryRecord<F>, offset: F) -> TrajectoryRecord<F> {
    record.with_positions(record.positions.iter().map(|&x| x + offset).collect())
}

/// Orthonormal DCT-II basis value `s_k cos(pi (2n + 1) k / 2N)`.
fn dct_basis<F: Scalar>(k: usize, n: usize, len: usize) -> F {
    let scale = if k == 0 { F::one() / count::<F>(len) } else { lit::<F>(2.0) / count::<F>(len) };
    let angle = F::PI() * count::<F>(2 * n + 1) * count::<F>(k) / count::<F>(2 * len);
    scale.sqrt() * angle.cos()
}

/// Orthonormal forward DCT-II coefficients `0..order`.
pub fn dct_coefficients<F: Scalar>(values: &[F], order: usize) -> Vec<F> {
    let len = values.len();
    (0..order.min(len)).map(|k| values.iter().enumerate().map(|(n, &x)| x * dct_basis::<F>(k, n, len)).sum()).collect()
}

/// Orthonormal inverse (DCT-III) of a truncated coefficient vector onto `len` samples.
pub fn inverse_dct<F: Scalar>(coefficients: &[F], len: usize) -> Vec<F> {
    (0..len).map(|n| coefficients.iter().enumerate().map(|(k, &c)| c * dct_basis::<F>(k, n, len)).sum()).collect()
}

/// Projects `values` onto the first `order` cosine basis functions.
pub fn dct_project<F: Scalar>(values: &[F], order: usize) -> Result<Vec<F>, SignalError> {
    if order == 0 || order > values.len() {
        return Err(SignalError::InvalidOrder { order, len: values.len() });
    }
    Ok(inverse_dct(&dct_coefficients(values, order), values.len()))
}

/// Truncated-DCT smoothing retaining coefficients `0..order`, followed by
/// differentiation of the smoothed positions.
pub fn dct_smooth<F: Scalar>(record: &TrajectoryRecord<F>, order: usize) -> Result<SmoothedTrajectory<F>, SignalError> {
    let smoothed = dct_project(&record.positions, order)?;
    SmoothedTrajectory::from_positions(record.clone(), smoothed, order)
}

/// Central differences inside, one-sided first-order differences at both ends.
pub fn differentiate<F: Scalar>(values: &[F], sample_rate: F) -> Result<Vec<F>, SignalError> {
    let n = values.len();
    if n < 3 {
        return Err(SignalError::TooShort(n));
    }
    let half = sample_rate / lit(2.0);
    let mut out = Vec::with_capacity(n);
    out.push((values[1] - values[0]) * sample_rate);
    out.extend(values.windows(3).map(|w| (w[2] - w[0]) * half));
    out.push((values[n - 1] - values[n - 2]) * sample_rate);
    Ok(out)
}
