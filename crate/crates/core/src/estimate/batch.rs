use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{build_features, fit_constrained_ls, score_fit, FitResult};
use crate::corpus::{Channel, Modality, PairKey, RecordPair, TrajectoryId, TrajectoryRecord, GRID_TOLERANCE};
use crate::gesture::{segment_gestures, DEFAULT_MIN_PEAK_VELOCITY, DEFAULT_MIN_SAMPLES};
use crate::scalar::{lit, to_f64, Scalar};
use crate::signal::{center, dct_smooth, downsample, shift, SmoothedTrajectory, DEFAULT_DCT_ORDER};

/// Which samples share an origin when centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteringScope {
    None,
    /// Each trajectory about its own mean.
    Trajectory,
    /// All trajectories of one speaker, channel and modality about their pooled mean.
    SpeakerChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Retained DCT coefficients; `None` disables smoothing.
    pub dct_order: Option<usize>,
    /// Records sampled faster than this (by more than the 1% grid tolerance)
    /// are downsampled to it; `None` keeps native rates.
    pub target_rate: Option<f64>,
    pub min_samples: usize,
    pub min_peak_vel: f64,
    pub centering: CenteringScope,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            dct_order: Some(DEFAULT_DCT_ORDER),
            target_rate: Some(81.0),
            min_samples: DEFAULT_MIN_SAMPLES,
            min_peak_vel: DEFAULT_MIN_PEAK_VELOCITY,
            centering: CenteringScope::SpeakerChannel,
        }
    }
}

/// A trajectory or gesture that produced no fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipReport {
    pub id: TrajectoryId,
    pub gesture_index: Option<usize>,
    pub reason: String,
}

/// Paired trajectories whose modalities yielded different gesture counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureCountMismatch {
    pub key: PairKey,
    pub ema: usize,
    pub us: usize,
}

/// R² summary of velocity fits for one channel and modality.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub channel: Channel,
    pub modality: Modality,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct CorpusFit<F> {
    /// Sorted by pair key, then modality (EMA first), then gesture index.
    pub results: Vec<FitResult<F>>,
    pub skipped: Vec<SkipReport>,
    pub mismatches: Vec<GestureCountMismatch>,
    pub summary: Vec<SummaryRow>,
}

struct TrajectoryOutcome<F> {
    results: Vec<FitResult<F>>,
    skipped: Vec<SkipReport>,
    segments: usize,
}

fn skip(id: &TrajectoryId, gesture_index: Option<usize>, reason: impl ToString) -> SkipReport {
    SkipReport { id: id.clone(), gesture_index, reason: reason.to_string() }
}

/// Resamples and centers every record according to `config`.
pub fn preprocess<F: Scalar>(
    records: Vec<TrajectoryRecord<F>>,
    config: &FitConfig,
) -> (Vec<TrajectoryRecord<F>>, Vec<SkipReport>) {
    let mut kept = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in records {
        match config.target_rate {
            Some(rate) if to_f64(r.sample_rate) > rate * (1.0 + GRID_TOLERANCE) => match downsample(&r, lit(rate)) {
                Ok(d) if d.len() >= 2 => kept.push(d),
                Ok(_) => skipped.push(skip(&r.id, None, "fewer than two samples after downsampling")),
                Err(e) => skipped.push(skip(&r.id, None, e)),
            },
            _ => kept.push(r),
        }
    }

    match config.centering {
        CenteringScope::None => {}
        CenteringScope::Trajectory => kept = kept.iter().map(center).collect(),
        CenteringScope::SpeakerChannel => {
            let mut sums: BTreeMap<(String, Channel, Modality), (F, usize)> = BTreeMap::new();
            for r in &kept {
                let k = (r.id.key.speaker.clone(), r.id.key.channel.clone(), r.id.modality);
                let e = sums.entry(k).or_insert((F::zero(), 0));
                e.0 = e.0 + r.positions.iter().copied().sum::<F>();
                e.1 += r.len();
            }
            kept = kept
                .iter()
                .map(|r| {
                    let k = (r.id.key.speaker.clone(), r.id.key.channel.clone(), r.id.modality);
                    let (sum, n) = sums[&k];
                    shift(r, -sum / lit(n as f64))
                })
                .collect();
        }
    }
    (kept, skipped)
}

/// Smoothing step of the pipeline (identity derivatives when smoothing is disabled).
pub fn smooth<F: Scalar>(
    record: &TrajectoryRecord<F>,
    config: &FitConfig,
) -> Result<SmoothedTrajectory<F>, crate::signal::SignalError> {
    match config.dct_order {
        Some(order) => dct_smooth(record, order),
        None => SmoothedTrajectory::unsmoothed(record.clone()),
    }
}

fn fit_trajectory<F: Scalar>(record: &TrajectoryRecord<F>, config: &FitConfig) -> TrajectoryOutcome<F> {
    let mut out = TrajectoryOutcome { results: Vec::new(), skipped: Vec::new(), segments: 0 };
    let traj = match smooth(record, config) {
        Ok(t) => t,
        Err(e) => {
            out.skipped.push(skip(&record.id, None, e));
            return out;
        }
    };
    let segments = segment_gestures(&traj, config.min_samples, lit(config.min_peak_vel));
    out.segments = segments.len();
    for seg in &segments {
        let fitted = build_features(seg).and_then(|f| fit_constrained_ls(&f)).and_then(|c| score_fit(seg, &c));
        match fitted {
            Ok(r) => out.results.push(r),
            Err(e) => out.skipped.push(skip(&record.id, Some(seg.gesture_index), e)),
        }
    }
    out
}

fn summarize<F: Scalar>(results: &[FitResult<F>]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Channel, Modality), Vec<f64>> = BTreeMap::new();
    for r in results {
        if let Some(r2) = r.r2_vel {
            groups.entry((r.id.key.channel.clone(), r.id.modality)).or_default().push(to_f64(r2));
        }
    }
    groups
        .into_iter()
        .map(|((channel, modality), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd =
                if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
            SummaryRow {
                channel,
                modality,
                n,
                mean,
                sd,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Runs preprocessing, smoothing, segmentation, fitting and scoring over
/// every paired trajectory. Per-gesture failures are collected in
/// [`CorpusFit::skipped`]; the batch never aborts. Trajectories are processed
/// in parallel on the current rayon pool with deterministic output order.
pub fn fit_corpus<F: Scalar>(pairs: &[RecordPair<F>], config: &FitConfig) -> CorpusFit<F> {
    let records: Vec<TrajectoryRecord<F>> = pairs.iter().flat_map(|p| [p.ema.clone(), p.us.clone()]).collect();
    let (records, mut skipped) = preprocess(records, config);

    let outcomes: Vec<(TrajectoryId, TrajectoryOutcome<F>)> =
        records.par_iter().map(|r| (r.id.clone(), fit_trajectory(r, config))).collect();

    let mut counts: BTreeMap<PairKey, [Option<usize>; 2]> = BTreeMap::new();
    let mut results = Vec::new();
    for (id, outcome) in outcomes {
        counts.entry(id.key.clone()).or_default()[id.modality.indicator() as usize] = Some(outcome.segments);
        results.extend(outcome.results);
        skipped.extend(outcome.skipped);
    }
    results.sort_by(|a, b| (&a.id, a.gesture_index).cmp(&(&b.id, b.gesture_index)));
    skipped.sort_by(|a, b| (&a.id, a.gesture_index).cmp(&(&b.id, b.gesture_index)));

    let mismatches = counts
        .into_iter()
        .filter_map(|(key, c)| match c {
            [Some(ema), Some(us)] if ema != us => Some(GestureCountMismatch { key, ema, us }),
            _ => None,
        })
        .collect::<Vec<_>>();
    for m in &mismatches {
        log::info!("{}: EMA has {} gestures, US has {}", m.key, m.ema, m.us);
    }

    let summary = summarize(&results);
    CorpusFit { results, skipped, mismatches, summary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::pair_records;

    #[test]
    fn empty_corpus() {
        let fit = fit_corpus::<f64>(&[], &FitConfig::default());
        assert!(fit.results.is_empty() && fit.summary.is_empty() && fit.skipped.is_empty());
    }

    #[test]
    fn speaker_channel_centering_uses_pooled_mean() {
        let mk = |rep, xs: Vec<f64>| {
            TrajectoryRecord::new(TrajectoryId::new("s", "w", Modality::Ema, Channel::TDx, rep), 81.0, 0.0, xs).unwrap()
        };
        let cfg = FitConfig { centering: CenteringScope::SpeakerChannel, ..FitConfig::default() };
        let (out, skipped) = preprocess(vec![mk(0, vec![1.0, 3.0]), mk(1, vec![5.0, 7.0])], &cfg);
        assert!(skipped.is_empty());
        assert_eq!(out[0].positions, vec![-3.0, -1.0]);
        assert_eq!(out[1].positions, vec![1.0, 3.0]);
    }

    #[test]
    fn short_record_is_skipped_not_fatal() {
        let mk = |m| {
            TrajectoryRecord::new(TrajectoryId::new("s", "w", m, Channel::TDx, 0), 81.0, 0.0, vec![1.0, 2.0, 4.0])
                .unwrap()
        };
        let pairing = pair_records(vec![mk(Modality::Ema), mk(Modality::Us)]).unwrap();
        let fit = fit_corpus(&pairing.pairs, &FitConfig::default());
        assert!(fit.results.is_empty());
        assert_eq!(fit.skipped.len(), 2);
    }
}
