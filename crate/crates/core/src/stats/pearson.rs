use super::StatsError;
use crate::scalar::{mean, Scalar};

/// Sample Pearson correlation of two equally long series.
pub fn pearson_r<F: Scalar>(a: &[F], b: &[F]) -> Result<F, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(StatsError::TooFewValues(a.len()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = F::zero();
    let mut saa = F::zero();
    let mut sbb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa == F::zero() || sbb == F::zero() {
        return Err(StatsError::ZeroVariance);
    }
    let r = sab / (saa * sbb).sqrt();
    Ok(r.max(-F::one()).min(F::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_correlations() {
        let a = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(pearson_r(&a, &a).unwrap(), 1.0);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(pearson_r(&a, &neg).unwrap(), -1.0);
    }

    #[test]
    fn hand_evaluated_case() {
        // means 2.5 and 2.75; Sab = 6.5, Saa = 5, Sbb = 8.75
        let r = pearson_r(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        let expected = 6.5 / (5.0f64 * 8.75).sqrt();
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.9827076298239908).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewValues(2)));
        assert_eq!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(3, 2)));
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson_r(&a, &b) {
                prop_assert_eq!(r, pearson_r(&b, &a).unwrap());
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
