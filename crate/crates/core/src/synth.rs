//! Synthetic two-modality corpora with known oscillator parameters.
//!
//! A token is two gestures: an approach from rest toward the word's target,
//! then a release back toward the starting position. Each phase lasts
//! `gesture_span / sqrt(k)` seconds, so the movement fills the token
//! whatever its stiffness. The ultrasound copy of a token is the EMA
//! movement translated by `us_target_offset`, sampled at its own rate with
//! its own noise, so the true modality effect on `T` is exactly that offset
//! and the effect on `b` and `k` is zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Channel, Modality, TrajectoryId, TrajectoryRecord};
use crate::oscillator::{solve_analytic, OscillatorError, OscillatorParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub speakers: usize,
    pub words: usize,
    pub reps: usize,
    pub channels: Vec<Channel>,
    pub ema_rate: f64,
    pub us_rate: f64,
    pub ema_noise: f64,
    pub us_noise: f64,
    pub us_target_offset: f64,
    /// Per-word targets are drawn from `U(-word_spread, word_spread)` mm.
    pub word_spread: f64,
    /// SD of the per-speaker target offset, mm.
    pub speaker_sd: f64,
    pub k_range: (f64, f64),
    /// `b` is the critical value times a factor from this range.
    pub damping_ratio_range: (f64, f64),
    /// Distance between start position and target, mm.
    pub amplitude_range: (f64, f64),
    /// Release stiffness relative to the approach stiffness.
    pub release_k_ratio: (f64, f64),
    /// Length of each gesture phase in units of `1 / sqrt(k)`.
    pub gesture_span: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            speakers: 6,
            words: 29,
            reps: 4,
            channels: vec![Channel::TDx],
            ema_rate: 250.0,
            us_rate: 81.0,
            ema_noise: 0.05,
            us_noise: 0.3,
            us_target_offset: 0.0,
            word_spread: 10.0,
            speaker_sd: 2.0,
            k_range: (100.0, 400.0),
            damping_ratio_range: (0.9, 1.3),
            amplitude_range: (5.0, 12.0),
            release_k_ratio: (0.8, 1.25),
            gesture_span: 4.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Oscillator(#[from] OscillatorError),
}

/// Ground truth for one generated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthToken {
    pub id: TrajectoryId,
    pub approach: OscillatorParams<f64>,
    pub release: OscillatorParams<f64>,
    /// Start position; also the release target.
    pub x0: f64,
    /// Time at which the release gesture takes over, s.
    pub switch_time: f64,
}

/// Generated trajectories with the parameters used for each.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<TrajectoryRecord<f64>>,
    pub truth: Vec<SynthToken>,
}

pub fn speaker_name(i: usize) -> String {
    format!("S{:02}", i + 1)
}

pub fn word_name(i: usize) -> String {
    format!("w{:02}", i + 1)
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.speakers == 0 || self.words == 0 || self.reps == 0 || self.channels.is_empty() {
            return bad("speakers, words, reps and channels must be non-empty");
        }
        let positive = [self.ema_rate, self.us_rate, self.gesture_span];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("rates and gesture span must be positive");
        }
        let non_negative = [self.ema_noise, self.us_noise, self.word_spread, self.speaker_sd];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise levels and spreads must be non-negative");
        }
        if !self.us_target_offset.is_finite() {
            return bad("offset must be finite");
        }
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.k_range) || self.k_range.0 <= 0.0 {
            return bad("k range must be positive and ordered");
        }
        if !ordered(self.damping_ratio_range) || self.damping_ratio_range.0 <= 0.0 {
            return bad("damping ratio range must be positive and ordered");
        }
        if !ordered(self.release_k_ratio) || self.release_k_ratio.0 <= 0.0 {
            return bad("release stiffness ratio must be positive and ordered");
        }
        if !ordered(self.amplitude_range) || self.amplitude_range.0 < 0.0 {
            return bad("amplitude range must be non-negative and ordered");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Noise-free positions of an approach-then-release token on a uniform grid from `t = 0`.
pub fn token_positions(token: &SynthToken, sample_rate: f64, n: usize) -> Result<Vec<f64>, OscillatorError> {
    let times: Vec<f64> = (0..n).map(|i| i as f64 / sample_rate).collect();
    let split = times.partition_point(|&t| t < token.switch_time);
    let (mut xs, _) = solve_analytic(&token.approach, token.x0, 0.0, &times[..split])?;
    let (x1, v1) = solve_analytic(&token.approach, token.x0, 0.0, &[token.switch_time])?;
    let later: Vec<f64> = times[split..].iter().map(|t| t - token.switch_time).collect();
    let (tail, _) = solve_analytic(&token.release, x1[0], v1[0], &later)?;
    xs.extend(tail);
    Ok(xs)
}

fn sample_token(token: &SynthToken, rate: f64, noise: f64, seed: u64) -> Result<TrajectoryRecord<f64>, SynthError> {
    let n = (2.0 * token.switch_time * rate + 1e-9).floor() as usize + 1;
    let mut xs = token_positions(token, rate, n)?;
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise).map_err(|_| OscillatorError::InvalidNoise)?;
        xs.iter_mut().for_each(|x| *x += normal.sample(&mut rng));
    }
    TrajectoryRecord::new(token.id.clone(), rate, 0.0, xs)
        .map_err(|e| SynthError::Oscillator(OscillatorError::Record(e.to_string())))
}

/// Builds the corpus. Output order is speaker, word, channel, rep, modality
/// (EMA first), and is fully determined by `config.seed`.
pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let speaker_offset = Normal::new(0.0, config.speaker_sd).expect("validated sd");
    let word_targets: Vec<f64> =
        (0..config.words).map(|_| uniform(&mut rng, (-config.word_spread, config.word_spread))).collect();
    let speaker_offsets: Vec<f64> = (0..config.speakers).map(|_| speaker_offset.sample(&mut rng)).collect();

    let mut records = Vec::new();
    let mut truth = Vec::new();
    for (s, s_off) in speaker_offsets.iter().enumerate() {
        for (w, w_target) in word_targets.iter().enumerate() {
            for channel in &config.channels {
                for rep in 0..config.reps {
                    let target = w_target + s_off;
                    let k = uniform(&mut rng, config.k_range);
                    let b = 2.0 * k.sqrt() * uniform(&mut rng, config.damping_ratio_range);
                    let k2 = k * uniform(&mut rng, config.release_k_ratio);
                    let b2 = 2.0 * k2.sqrt() * uniform(&mut rng, config.damping_ratio_range);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let x0 = target + sign * uniform(&mut rng, config.amplitude_range);
                    let switch_time = config.gesture_span / k.sqrt();
                    let seeds: [u64; 2] = [rng.random(), rng.random()];
                    let modalities = [
                        (Modality::Ema, config.ema_rate, config.ema_noise, 0.0),
                        (Modality::Us, config.us_rate, config.us_noise, config.us_target_offset),
                    ];
                    for ((modality, rate, noise, offset), seed) in modalities.into_iter().zip(seeds) {
                        let token = SynthToken {
                            id: TrajectoryId::new(
                                &speaker_name(s),
                                &word_name(w),
                                modality,
                                channel.clone(),
                                rep as u32 + 1,
                            ),
                            approach: OscillatorParams::new(b, k, target + offset),
                            release: OscillatorParams::new(b2, k2, x0 + offset),
                            x0: x0 + offset,
                            switch_time,
                        };
                        records.push(sample_token(&token, rate, noise, seed)?);
                        truth.push(token);
                    }
                }
            }
        }
    }
    Ok(SynthCorpus { records, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::solve_analytic;

    #[test]
    fn full_design_has_expected_group_count() {
        let corpus = synth_corpus(&SynthConfig::default()).unwrap();
        assert_eq!(corpus.records.len(), 6 * 29 * 4 * 2);
        assert_eq!(corpus.truth.len(), corpus.records.len());
    }

    #[test]
    fn single_clean_gesture_matches_analytic() {
        let cfg = SynthConfig { speakers: 1, words: 1, reps: 1, ema_noise: 0.0, us_noise: 0.0, ..Default::default() };
        let corpus = synth_corpus(&cfg).unwrap();
        for (rec, token) in corpus.records.iter().zip(&corpus.truth) {
            assert_eq!(rec.id, token.id);
            assert_eq!(rec.positions[0], token.x0);
            let times: Vec<f64> = (0..rec.len()).map(|i| rec.time(i)).collect();
            let split = times.partition_point(|&t| t < token.switch_time);
            let (xs, _) = solve_analytic(&token.approach, token.x0, 0.0, &times[..split]).unwrap();
            assert_eq!(xs, rec.positions[..split]);
            assert!(split > 5 && split < rec.len() - 5);
        }
    }

    #[test]
    fn release_is_continuous_and_heads_back() {
        let cfg = SynthConfig { speakers: 1, words: 3, reps: 2, ema_noise: 0.0, us_noise: 0.0, ..Default::default() };
        let corpus = synth_corpus(&cfg).unwrap();
        for (rec, token) in corpus.records.iter().zip(&corpus.truth) {
            let dense = token_positions(token, 10_000.0, (2.0 * token.switch_time * 10_000.0) as usize).unwrap();
            let max_step = dense.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            assert!(max_step < 0.05, "jump {max_step}");
            let mid = (token.switch_time * rec.sample_rate) as usize;
            let end = *rec.positions.last().unwrap();
            assert!((end - token.x0).abs() < (rec.positions[mid] - token.x0).abs());
        }
    }

    #[test]
    fn ultrasound_copy_is_translated() {
        let cfg = SynthConfig {
            speakers: 2,
            words: 2,
            reps: 1,
            ema_noise: 0.0,
            us_noise: 0.0,
            us_rate: 250.0,
            us_target_offset: -1.2,
            ..Default::default()
        };
        let corpus = synth_corpus(&cfg).unwrap();
        for pair in corpus.records.chunks(2) {
            for (e, u) in pair[0].positions.iter().zip(&pair[1].positions) {
                assert!((u - e + 1.2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig { speakers: 2, words: 3, reps: 2, ..Default::default() };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        let c = synth_corpus(&SynthConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn invalid_settings_rejected() {
        let cfg = SynthConfig { us_noise: -1.0, ..Default::default() };
        assert!(matches!(synth_corpus(&cfg), Err(SynthError::Invalid(_))));
        let cfg = SynthConfig { k_range: (10.0, 5.0), ..Default::default() };
        assert!(matches!(synth_corpus(&cfg), Err(SynthError::Invalid(_))));
    }
}
