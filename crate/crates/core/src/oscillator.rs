//! Forward model `x'' + b x' + k (x - T) = 0` with unit mass.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{TrajectoryId, TrajectoryRecord};
use crate::scalar::{count, lit, to_f64, Scalar};

/// Relative tolerance on `|b^2 - 4k|` for classifying a system as critically damped.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OscillatorError {
    #[error("stiffness must be non-negative, got {0}")]
    NegativeStiffness(f64),
    #[error("stiffness must be positive for a point attractor, got {0}")]
    NonAttractor(f64),
    #[error("sample rate must be positive and finite")]
    InvalidRate,
    #[error("at least one integration step required")]
    NoSteps,
    #[error("integration blew up at step {0}")]
    BlowUp(usize),
    #[error("noise standard deviation must be finite and non-negative")]
    InvalidNoise,
    #[error("cannot build trajectory: {0}")]
    Record(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DampingClass {
    Underdamped,
    Critical,
    Overdamped,
}

impl DampingClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DampingClass::Underdamped => "underdamped",
            DampingClass::Critical => "critical",
            DampingClass::Overdamped => "overdamped",
        }
    }
}

impl fmt::Display for DampingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DampingClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "underdamped" => Ok(DampingClass::Underdamped),
            "critical" => Ok(DampingClass::Critical),
            "overdamped" => Ok(DampingClass::Overdamped),
            other => Err(format!("unknown damping class `{other}`")),
        }
    }
}

/// Damping `b` (1/s), stiffness `k` (1/s²) and target `T` (mm). Mass is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams<F> {
    pub b: F,
    pub k: F,
    pub target: F,
}

impl<F: Scalar> OscillatorParams<F> {
    pub fn new(b: F, k: F, target: F) -> Self {
        OscillatorParams { b, k, target }
    }

    /// Critically damped system with stiffness `k`.
    pub fn critical(k: F, target: F) -> Result<Self, OscillatorError> {
        Ok(OscillatorParams { b: critical_damping(k)?, k, target })
    }

    pub fn is_attractor(&self) -> bool {
        self.k > F::zero()
    }

    pub fn damping_class(&self) -> DampingClass {
        let b2 = self.b * self.b;
        let four_k = lit::<F>(4.0) * self.k;
        if (b2 - four_k).abs() <= lit::<F>(CRITICAL_TOLERANCE) * b2.max(four_k) {
            DampingClass::Critical
        } else if b2 < four_k {
            DampingClass::Underdamped
        } else {
            DampingClass::Overdamped
        }
    }

    /// Acceleration at state `(x, v)`.
    #[inline]
    pub fn acceleration(&self, x: F, v: F) -> F {
        -self.b * v - self.k * (x - self.target)
    }

    /// `v^2/2 + k (x - T)^2 / 2`, conserved when `b = 0`.
    pub fn energy(&self, x: F, v: F) -> F {
        let d = x - self.target;
        (v * v + self.k * d * d) / lit(2.0)
    }

    pub fn to_f64(&self) -> OscillatorParams<f64> {
        OscillatorParams { b: to_f64(self.b), k: to_f64(self.k), target: to_f64(self.target) }
    }
}

/// `b = 2 sqrt(k)` (unit mass).
pub fn critical_damping<F: Scalar>(k: F) -> Result<F, OscillatorError> {
    if k < F::zero() || k.is_nan() {
        return Err(OscillatorError::NegativeStiffness(to_f64(k)));
    }
    Ok(lit::<F>(2.0) * k.sqrt())
}

/// Closed-form solution from `(x0, v0)` at `t = 0`, evaluated at `times`.
pub fn solve_analytic<F: Scalar>(
    p: &OscillatorParams<F>,
    x0: F,
    v0: F,
    times: &[F],
) -> Result<(Vec<F>, Vec<F>), OscillatorError> {
    if !p.is_attractor() {
        return Err(OscillatorError::NonAttractor(to_f64(p.k)));
    }
    let two = lit::<F>(2.0);
    let y0 = x0 - p.target;
    let eval: Box<dyn Fn(F) -> (F, F)> = match p.damping_class() {
        DampingClass::Underdamped => {
            let alpha = -p.b / two;
            let omega = (lit::<F>(4.0) * p.k - p.b * p.b).sqrt() / two;
            let a = y0;
            let c = (v0 - alpha * y0) / omega;
            Box::new(move |t| {
                let e = (alpha * t).exp();
                let (s, co) = (omega * t).sin_cos();
                let y = e * (a * co + c * s);
                let v = e * ((alpha * a + omega * c) * co + (alpha * c - omega * a) * s);
                (y, v)
            })
        }
        DampingClass::Critical => {
            let r = -p.b / two;
            let c1 = y0;
            let c2 = v0 - r * y0;
            Box::new(move |t| {
                let e = (r * t).exp();
                ((c1 + c2 * t) * e, (c2 + r * (c1 + c2 * t)) * e)
            })
        }
        DampingClass::Overdamped => {
            let disc = (p.b * p.b - lit::<F>(4.0) * p.k).sqrt();
            // fast root directly, slow root from r1 r2 = k to avoid cancellation
            let r1 = -(p.b + disc) / two;
            let r2 = p.k / r1;
            let c2 = (v0 - r1 * y0) / (r2 - r1);
            let c1 = y0 - c2;
            Box::new(move |t| {
                let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
                (c1 * e1 + c2 * e2, r1 * c1 * e1 + r2 * c2 * e2)
            })
        }
    };
    let (xs, vs) = times
        .iter()
        .map(|&t| {
            let (y, v) = eval(t);
            (y + p.target, v)
        })
        .unzip();
    Ok((xs, vs))
}

/// Classic fixed-step RK4 on `(x' = v, v' = -b v - k (x - T))`.
/// Returns `n_steps + 1` states including the initial one.
pub fn integrate_rk4<F: Scalar>(
    p: &OscillatorParams<F>,
    x0: F,
    v0: F,
    sample_rate: F,
    n_steps: usize,
) -> Result<(Vec<F>, Vec<F>), OscillatorError> {
    if !(sample_rate > F::zero()) || !sample_rate.is_finite() {
        return Err(OscillatorError::InvalidRate);
    }
    if n_steps == 0 {
        return Err(OscillatorError::NoSteps);
    }
    let h = F::one() / sample_rate;
    let half = h / lit(2.0);
    let sixth = h / lit(6.0);
    let two = lit::<F>(2.0);

    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut vs = Vec::with_capacity(n_steps + 1);
    let (mut x, mut v) = (x0, v0);
    xs.push(x);
    vs.push(v);
    for step in 1..=n_steps {
        let (k1x, k1v) = (v, p.acceleration(x, v));
        let (x2, v2) = (x + half * k1x, v + half * k1v);
        let (k2x, k2v) = (v2, p.acceleration(x2, v2));
        let (x3, v3) = (x + half * k2x, v + half * k2v);
        let (k3x, k3v) = (v3, p.acceleration(x3, v3));
        let (x4, v4) = (x + h * k3x, v + h * k3v);
        let (k4x, k4v) = (v4, p.acceleration(x4, v4));
        x = x + sixth * (k1x + two * k2x + two * k3x + k4x);
        v = v + sixth * (k1v + two * k2v + two * k3v + k4v);
        if !x.is_finite() || !v.is_finite() {
            return Err(OscillatorError::BlowUp(step));
        }
        xs.push(x);
        vs.push(v);
    }
    Ok((xs, vs))
}

/// Analytic solution on a uniform grid plus i.i.d. Gaussian noise.
/// Sample count is `floor(duration * sample_rate) + 1`; `t0 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn synth_gesture<F: Scalar>(
    id: TrajectoryId,
    p: &OscillatorParams<F>,
    x0: F,
    v0: F,
    sample_rate: F,
    duration: F,
    noise_sd: F,
    seed: u64,
) -> Result<TrajectoryRecord<F>, OscillatorError> {
    if !(noise_sd >= F::zero()) || !noise_sd.is_finite() {
        return Err(OscillatorError::InvalidNoise);
    }
    if !(sample_rate > F::zero()) || !sample_rate.is_finite() {
        return Err(OscillatorError::InvalidRate);
    }
    let n = (duration * sample_rate + lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    let times: Vec<F> = (0..n).map(|i| count::<F>(i) / sample_rate).collect();
    let (mut xs, _) = solve_analytic(p, x0, v0, &times)?;
    if noise_sd > F::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, to_f64(noise_sd)).map_err(|_| OscillatorError::InvalidNoise)?;
        for x in xs.iter_mut() {
            *x = *x + lit::<F>(normal.sample(&mut rng));
        }
    }
    TrajectoryRecord::new(id, sample_rate, F::zero(), xs).map_err(|e| OscillatorError::Record(e.to_string()))
}
