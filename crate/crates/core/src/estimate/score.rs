use super::{CoefficientMatrix, EstimateError};
use crate::corpus::TrajectoryId;
use crate::gesture::GestureSegment;
use crate::oscillator::{integrate_rk4, OscillatorParams};
use crate::scalar::{lit, mean, to_f64, Scalar};

/// Largest `omega * h` used when reintegrating; coarser data grids are
/// integrated with sub-steps and sampled back onto the data grid.
const MAX_STEP_PHASE: f64 = 0.1;

/// Estimated parameters of one gesture and how well the reintegrated model
/// reproduces it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<F> {
    pub id: TrajectoryId,
    pub gesture_index: usize,
    pub t_start: F,
    pub t_end: F,
    pub params: OscillatorParams<F>,
    pub coefficients: [[F; 3]; 2],
    /// `None` when the empirical series is constant (R² undefined).
    pub r2_pos: Option<F>,
    pub r2_vel: Option<F>,
    pub converged: bool,
    pub n_iter: usize,
}

/// `1 - SS_res / SS_tot` with `SS_tot` about the empirical mean.
pub fn r_squared<F: Scalar>(empirical: &[F], model: &[F]) -> Option<F> {
    let m = mean(empirical);
    let ss_tot: F = empirical.iter().map(|&e| (e - m) * (e - m)).sum();
    if ss_tot == F::zero() {
        return None;
    }
    let ss_res: F = empirical.iter().zip(model).map(|(&e, &p)| (e - p) * (e - p)).sum();
    Some(F::one() - ss_res / ss_tot)
}

/// Model trajectory on the segment's grid, started from the segment's first
/// position and velocity sample.
pub fn simulate_segment<F: Scalar>(
    params: &OscillatorParams<F>,
    x0: F,
    v0: F,
    sample_rate: F,
    len: usize,
) -> Result<(Vec<F>, Vec<F>), EstimateError> {
    if !params.is_attractor() {
        return Err(EstimateError::NonAttractor(to_f64(params.k)));
    }
    if len < 2 {
        return Ok((vec![x0; len], vec![v0; len]));
    }
    let h = F::one() / sample_rate;
    let speed = params.k.sqrt() + params.b.abs();
    let substeps = (speed * h / lit(MAX_STEP_PHASE)).ceil().to_usize().unwrap_or(1).clamp(1, 1000);
    let fine_rate = sample_rate * lit(substeps as f64);
    let (xs, vs) = integrate_rk4(params, x0, v0, fine_rate, (len - 1) * substeps)?;
    Ok((xs.into_iter().step_by(substeps).collect(), vs.into_iter().step_by(substeps).collect()))
}

/// Reintegrates the identified oscillator over the segment and scores it.
pub fn score_fit<F: Scalar>(
    seg: &GestureSegment<F>,
    coef: &CoefficientMatrix<F>,
) -> Result<FitResult<F>, EstimateError> {
    let params = coef.params()?;
    let (x_model, v_model) = simulate_segment(&params, seg.positions[0], seg.velocity[0], seg.sample_rate, seg.len())?;
    Ok(FitResult {
        id: seg.source.clone(),
        gesture_index: seg.gesture_index,
        t_start: seg.t_start,
        t_end: seg.t_end(),
        params,
        coefficients: coef.xi,
        r2_pos: r_squared(&seg.positions, &x_model),
        r2_vel: r_squared(&seg.velocity, &v_model),
        converged: coef.converged,
        n_iter: coef.n_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Modality};
    use crate::estimate::{build_features, fit_constrained_ls};
    use crate::oscillator::solve_analytic;

    #[test]
    fn r_squared_reference_points() {
        let e = [1.0, 3.0, 2.0, 5.0];
        assert_eq!(r_squared(&e, &e), Some(1.0));
        assert_eq!(r_squared(&e, &[2.75; 4]), Some(0.0));
        assert_eq!(r_squared(&[2.0; 4], &e), None);
    }

    #[test]
    fn noise_free_gesture_scores_one() {
        let p = OscillatorParams::new(14.0, 150.0, 2.0);
        let rate = 100.0;
        let t: Vec<f64> = (0..60).map(|i| i as f64 / rate).collect();
        let (x, v) = solve_analytic(&p, -6.0, 0.0, &t).unwrap();
        let a = x.iter().zip(&v).map(|(&xi, &vi)| p.acceleration(xi, vi)).collect();
        let id = TrajectoryId::new("s", "w", Modality::Us, Channel::JAWx, 1);
        let seg = GestureSegment::from_series(id, x, v, a, rate);
        let fit = score_fit(&seg, &fit_constrained_ls(&build_features(&seg).unwrap()).unwrap()).unwrap();
        assert!(fit.r2_vel.unwrap() > 1.0 - 1e-6);
        assert!(fit.r2_pos.unwrap() > 1.0 - 1e-6);
        assert_eq!(fit.coefficients[0], [0.0, 1.0, 0.0]);
        assert!((fit.t_end - 0.59).abs() < 1e-12);
    }

    #[test]
    fn non_attractor_coefficients_rejected() {
        let coef =
            CoefficientMatrix { xi: [[0.0, 1.0, 0.0], [5.0, -1.0, 3.0]], converged: true, n_iter: 1, condition: 1.0 };
        let id = TrajectoryId::new("s", "w", Modality::Us, Channel::JAWx, 1);
        let seg = GestureSegment::from_series(id, vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], vec![0.0; 4], 10.0);
        assert!(matches!(score_fit(&seg, &coef), Err(EstimateError::NonAttractor(_))));
    }
}
