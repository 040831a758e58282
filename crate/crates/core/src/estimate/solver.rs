use super::{EstimateError, FeatureMatrix};
use crate::oscillator::OscillatorParams;
use crate::scalar::{lit, to_f64, Scalar};

/// Upper bound on solves (initial solve plus refinement passes).
pub const MAX_ITERATIONS: usize = 30;
/// Relative change in residual norm that ends refinement.
pub const REFINEMENT_TOLERANCE: f64 = 1e-10;
/// Condition number of the Gram matrix above which a warning is logged.
pub const CONDITION_WARNING: f64 = 1e10;
/// |k| below this leaves `T = kT / k` ill-posed.
pub const STIFFNESS_FLOOR: f64 = 1e-8;

/// Constrained first row: `x' = y`.
const KINEMATIC_ROW: [f64; 3] = [0.0, 1.0, 0.0];

/// Coefficients mapping `[x, y, 1]` to `[x', y']`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientMatrix<F> {
    pub xi: [[F; 3]; 2],
    pub converged: bool,
    pub n_iter: usize,
    /// Condition number of the unscaled Gram matrix `Θᵀ Θ`.
    pub condition: F,
}

impl<F: Scalar> CoefficientMatrix<F> {
    pub fn stiffness(&self) -> F {
        -self.xi[1][0]
    }

    pub fn damping(&self) -> F {
        -self.xi[1][1]
    }

    pub fn target(&self) -> Result<F, EstimateError> {
        let k = self.stiffness();
        if k.abs() < lit(STIFFNESS_FLOOR) {
            return Err(EstimateError::TargetUndefined(to_f64(k)));
        }
        Ok(self.xi[1][2] / k)
    }

    pub fn params(&self) -> Result<OscillatorParams<F>, EstimateError> {
        Ok(OscillatorParams::new(self.damping(), self.stiffness(), self.target()?))
    }
}

type Mat3<F> = [[F; 3]; 3];

fn cholesky<F: Scalar>(a: &Mat3<F>, pivot_tol: F) -> Option<Mat3<F>> {
    let mut l = [[F::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for p in 0..j {
                s = s - l[i][p] * l[j][p];
            }
            if i == j {
                if !(s > pivot_tol) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<F: Scalar>(l: &Mat3<F>, rhs: [F; 3]) -> [F; 3] {
    let mut y = [F::zero(); 3];
    for i in 0..3 {
        let mut s = rhs[i];
        for p in 0..i {
            s = s - l[i][p] * y[p];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [F::zero(); 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for p in i + 1..3 {
            s = s - l[p][i] * x[p];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Eigenvalues of a symmetric 3×3 matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues<F: Scalar>(mut a: Mat3<F>) -> [F; 3] {
    let two = lit::<F>(2.0);
    for _ in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= F::epsilon() * F::epsilon() * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == F::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
            let c = F::one() / (t * t + F::one()).sqrt();
            let s = t * c;
            for r in 0..3 {
                let (arp, arq) = (a[r][p], a[r][q]);
                a[r][p] = c * arp - s * arq;
                a[r][q] = s * arp + c * arq;
            }
            for r in 0..3 {
                let (apr, aqr) = (a[p][r], a[q][r]);
                a[p][r] = c * apr - s * aqr;
                a[q][r] = s * apr + c * aqr;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

fn residual<F: Scalar>(feat: &FeatureMatrix<F>, coef: &[F; 3]) -> Vec<F> {
    feat.rows
        .iter()
        .zip(&feat.acceleration)
        .map(|(row, &target)| target - (row[0] * coef[0] + row[1] * coef[1] + row[2] * coef[2]))
        .collect()
}

fn norm<F: Scalar>(v: &[F]) -> F {
    v.iter().map(|&e| e * e).sum::<F>().sqrt()
}

/// Least squares for the library coefficients subject to the first row
/// being `[0, 1, 0]`.
///
/// The constraint selects every coefficient of the first row, so the KKT
/// system decouples: the constrained block equals the constraint vector and
/// the second row is the unconstrained least-squares solution of
/// `y' ~ [x, y, 1]`. That block is solved through column-equilibrated normal
/// equations (Cholesky), followed by iterative refinement on the true residual
/// until the relative change in residual norm drops below 1e-10, the
/// correction reaches rounding level, or [`MAX_ITERATIONS`] solves are used.
pub fn fit_constrained_ls<F: Scalar>(feat: &FeatureMatrix<F>) -> Result<CoefficientMatrix<F>, EstimateError> {
    let n = feat.len();
    if n < 4 {
        return Err(EstimateError::TooShort(n));
    }
    if feat.acceleration.len() != n || feat.velocity.len() != n {
        return Err(EstimateError::LengthMismatch);
    }

    let mut gram = [[F::zero(); 3]; 3];
    for row in &feat.rows {
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = gram[i][j] + row[i] * row[j];
            }
        }
    }
    if gram.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EstimateError::NonFinite);
    }
    let scale: [F; 3] = std::array::from_fn(|j| gram[j][j].sqrt());
    if scale.iter().any(|&s| s == F::zero()) {
        return Err(EstimateError::Singular);
    }
    let scaled: Mat3<F> = std::array::from_fn(|i| std::array::from_fn(|j| gram[i][j] / (scale[i] * scale[j])));
    let l = cholesky(&scaled, lit::<F>(1e3) * F::epsilon()).ok_or(EstimateError::Singular)?;

    let eig = symmetric_eigenvalues(gram);
    let (lo, hi) = eig.iter().fold((F::infinity(), F::zero()), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > F::zero() { hi / lo } else { F::infinity() };
    if condition > lit(CONDITION_WARNING) {
        log::warn!("ill-conditioned feature Gram matrix (condition {condition:e})");
    } else {
        log::debug!("feature Gram condition {condition:e}");
    }

    let project = |r: &[F]| -> [F; 3] {
        let mut g = [F::zero(); 3];
        for (row, &e) in feat.rows.iter().zip(r) {
            for j in 0..3 {
                g[j] = g[j] + row[j] * e;
            }
        }
        std::array::from_fn(|j| g[j] / scale[j])
    };

    let tol = lit::<F>(REFINEMENT_TOLERANCE).max(lit::<F>(8.0) * F::epsilon());
    let rounding = lit::<F>(64.0) * F::epsilon();

    let mut coef = [F::zero(); 3];
    let mut r = feat.acceleration.clone();
    let mut res_norm = norm(&r);
    let mut n_iter = 0;
    let mut converged = false;
    while n_iter < MAX_ITERATIONS {
        let dz = cholesky_solve(&l, project(&r));
        let mut step = F::zero();
        let mut size = F::zero();
        for j in 0..3 {
            coef[j] = coef[j] + dz[j] / scale[j];
            step = step + dz[j] * dz[j];
            size = size + (coef[j] * scale[j]) * (coef[j] * scale[j]);
        }
        n_iter += 1;
        r = residual(feat, &coef);
        let new_norm = norm(&r);
        if n_iter > 1 {
            let change = (new_norm - res_norm).abs();
            if change <= tol * res_norm.max(new_norm) || step.sqrt() <= rounding * size.sqrt() {
                converged = true;
                res_norm = new_norm;
                break;
            }
        }
        res_norm = new_norm;
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(EstimateError::NonFinite);
    }
    log::trace!("constrained LS: {n_iter} solves, residual norm {res_norm}");

    let kinematic = KINEMATIC_ROW.map(lit::<F>);
    Ok(CoefficientMatrix { xi: [kinematic, coef], converged, n_iter, condition })
}
