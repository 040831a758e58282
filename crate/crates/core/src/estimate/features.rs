use super::EstimateError;
use crate::gesture::GestureSegment;
use crate::scalar::Scalar;

/// Library rows `[x, y, 1]` with derivative targets `x'` (velocity) and `y'` (acceleration).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    pub rows: Vec<[F; 3]>,
    pub velocity: Vec<F>,
    pub acceleration: Vec<F>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = F> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}

pub fn build_features<F: Scalar>(seg: &GestureSegment<F>) -> Result<FeatureMatrix<F>, EstimateError> {
    let n = seg.positions.len();
    if seg.velocity.len() != n || seg.acceleration.len() != n {
        return Err(EstimateError::LengthMismatch);
    }
    if n < 4 {
        return Err(EstimateError::TooShort(n));
    }
    let finite = |s: &[F]| s.iter().all(|v| v.is_finite());
    if !finite(&seg.positions) || !finite(&seg.velocity) || !finite(&seg.acceleration) {
        return Err(EstimateError::NonFinite);
    }
    Ok(FeatureMatrix {
        rows: seg.positions.iter().zip(&seg.velocity).map(|(&x, &y)| [x, y, F::one()]).collect(),
        velocity: seg.velocity.clone(),
        acceleration: seg.acceleration.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Modality, TrajectoryId};
    use crate::oscillator::{solve_analytic, OscillatorParams};

    fn id() -> TrajectoryId {
        TrajectoryId::new("s", "w", Modality::Ema, Channel::TDx, 0)
    }

    #[test]
    fn shape_and_ones_column() {
        let seg = GestureSegment::from_series(id(), vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0; 5], vec![0.0; 5], 1.0);
        let f = build_features(&seg).unwrap();
        assert_eq!(f.len(), 5);
        assert!(f.column(2).all(|v| v == 1.0));
    }

    #[test]
    fn constant_position_segment() {
        let seg = GestureSegment::from_series(id(), vec![2.0; 6], vec![0.0; 6], vec![0.0; 6], 10.0);
        let f = build_features(&seg).unwrap();
        assert!(f.column(0).all(|v| v == 2.0));
        assert!(f.column(1).all(|v| v == 0.0));
    }

    #[test]
    fn too_short() {
        let seg = GestureSegment::from_series(id(), vec![1.0; 3], vec![1.0; 3], vec![1.0; 3], 1.0);
        assert_eq!(build_features(&seg), Err(EstimateError::TooShort(3)));
    }

    #[test]
    fn analytic_rows_satisfy_model() {
        let p = OscillatorParams::new(20.0, 100.0, 1.0);
        let t: Vec<f64> = (0..50).map(|i| i as f64 / 200.0).collect();
        let (x, v) = solve_analytic(&p, -3.0, 0.0, &t).unwrap();
        let a: Vec<f64> = x.iter().zip(&v).map(|(&xi, &vi)| p.acceleration(xi, vi)).collect();
        let f = build_features(&GestureSegment::from_series(id(), x, v, a, 200.0)).unwrap();
        for (row, acc) in f.rows.iter().zip(&f.acceleration) {
            let model = -p.k * row[0] - p.b * row[1] + p.k * p.target * row[2];
            assert!((model - acc).abs() < 1e-6);
        }
    }
}
