//! Trajectory data model plus CSV ingestion and result export.
//!
//! Input is long-format CSV, one sample per row:
//!
//! ```text
//! speaker,word,modality,channel,rep,t,x
//! ```
//!
//! Result files carry one row per fitted gesture:
//!
//! ```text
//! speaker,word,modality,channel,rep,gesture_index,t_start,t_end,b,k,T,damping_class,r2_pos,r2_vel,converged
//! ```
//!
//! Lines starting with `#` are comments; the CLI uses them for its
//! provenance header, so every file it writes can be fed straight back in.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::estimate::FitResult;
use crate::oscillator::DampingClass;
use crate::scalar::{lit, to_f64, Scalar};

pub const TRAJECTORY_HEADER: [&str; 7] = ["speaker", "word", "modality", "channel", "rep", "t", "x"];

pub const RESULT_HEADER: [&str; 15] = [
    "speaker",
    "word",
    "modality",
    "channel",
    "rep",
    "gesture_index",
    "t_start",
    "t_end",
    "b",
    "k",
    "T",
    "damping_class",
    "r2_pos",
    "r2_vel",
    "converged",
];

/// Relative deviation of a sampling interval from the median interval
/// beyond which a group is rejected as non-uniform.
pub const GRID_TOLERANCE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("header mismatch: expected columns `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: column `{column}` has invalid value `{value}`")]
    Parse { line: u64, column: &'static str, value: String },
    #[error("line {line}: non-finite value in column `{column}`")]
    NonFinite { line: u64, column: &'static str },
    #[error("line {line}: time is not strictly increasing within {id}")]
    NonMonotoneTime { line: u64, id: TrajectoryId },
    #[error("{id}: non-uniform sampling grid (interval {dt} s deviates from median {median} s by more than 1%)")]
    NonUniformGrid { id: TrajectoryId, dt: f64, median: f64 },
    #[error("{id}: invalid trajectory: {reason}")]
    InvalidRecord { id: TrajectoryId, reason: String },
    #[error("duplicate {modality} trajectory for {key}")]
    DuplicatePair { key: PairKey, modality: Modality },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Ema,
    Us,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ema => "EMA",
            Modality::Us => "US",
        }
    }

    /// Regression indicator: EMA is the baseline (0), ultrasound is 1.
    pub fn indicator(self) -> u8 {
        match self {
            Modality::Ema => 0,
            Modality::Us => 1,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EMA" => Ok(Modality::Ema),
            "US" => Ok(Modality::Us),
            other => Err(format!("unknown modality `{other}` (expected EMA or US)")),
        }
    }
}

/// Measurement dimension. Anything outside the four standard channels is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    TDx,
    TDy,
    JAWx,
    JAWy,
    Other(String),
}

impl Channel {
    pub fn as_str(&self) -> &str {
        match self {
            Channel::TDx => "TDx",
            Channel::TDy => "TDy",
            Channel::JAWx => "JAWx",
            Channel::JAWy => "JAWy",
            Channel::Other(s) => s,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "TDx" => Channel::TDx,
            "TDy" => Channel::TDy,
            "JAWx" => Channel::JAWx,
            "JAWy" => Channel::JAWy,
            "" => return Err("empty channel label".into()),
            other => Channel::Other(other.to_string()),
        })
    }
}

/// Identifies an EMA/US trajectory pair within one sensor dimension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub speaker: String,
    pub word: String,
    pub channel: Channel,
    pub rep: u32,
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}/{}", self.speaker, self.word, self.channel, self.rep)
    }
}

/// Full identity of one trajectory: its pair key plus the modality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrajectoryId {
    pub key: PairKey,
    pub modality: Modality,
}

impl TrajectoryId {
    pub fn new(speaker: &str, word: &str, modality: Modality, channel: Channel, rep: u32) -> Self {
        TrajectoryId { key: PairKey { speaker: speaker.to_string(), word: word.to_string(), channel, rep }, modality }
    }
}

impl fmt::Display for TrajectoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = &self.key;
        write!(f, "{}/{}/{}/{}/{}", k.speaker, k.word, self.modality, k.channel, k.rep)
    }
}

/// One channel's uniformly sampled position series (mm).
///
/// Sample `i` sits at time `t0 + i / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<F> {
    pub id: TrajectoryId,
    pub sample_rate: F,
    pub t0: F,
    pub positions: Vec<F>,
}

impl<F: Scalar> TrajectoryRecord<F> {
    pub fn new(id: TrajectoryId, sample_rate: F, t0: F, positions: Vec<F>) -> Result<Self, CorpusError> {
        let invalid = |reason: &str| CorpusError::InvalidRecord { id: id.clone(), reason: reason.to_string() };
        if !(sample_rate > F::zero()) || !sample_rate.is_finite() {
            return Err(invalid("sample rate must be positive and finite"));
        }
        if !t0.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        if positions.len() < 2 {
            return Err(invalid("at least two samples required"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite position"));
        }
        Ok(TrajectoryRecord { id, sample_rate, t0, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self, i: usize) -> F {
        self.t0 + crate::scalar::count::<F>(i) / self.sample_rate
    }

    pub fn duration(&self) -> F {
        crate::scalar::count::<F>(self.len() - 1) / self.sample_rate
    }

    /// Same identity and grid, new sample values.
    pub fn with_positions(&self, positions: Vec<F>) -> Self {
        TrajectoryRecord { id: self.id.clone(), sample_rate: self.sample_rate, t0: self.t0, positions }
    }
}

fn csv_error(e: csv::Error) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CorpusError::Csv { line, source: e }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), CorpusError> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(CorpusError::Header { expected: expected.join(","), found: found.iter().collect::<Vec<_>>().join(",") })
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(source)
}

fn field(rec: &csv::StringRecord, idx: usize) -> &str {
    rec.get(idx).unwrap_or("")
}

fn parse_with<T, E>(
    rec: &csv::StringRecord,
    idx: usize,
    column: &'static str,
    line: u64,
    parse: impl FnOnce(&str) -> Result<T, E>,
) -> Result<T, CorpusError> {
    let raw = field(rec, idx);
    parse(raw).map_err(|_| CorpusError::Parse { line, column, value: raw.to_string() })
}

fn parse_f64(rec: &csv::StringRecord, idx: usize, column: &'static str, line: u64) -> Result<f64, CorpusError> {
    let v: f64 = parse_with(rec, idx, column, line, str::parse)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CorpusError::NonFinite { line, column })
    }
}

/// Reads long-format trajectory CSV, one record per
/// (speaker, word, modality, channel, rep) group, sorted by identity.
pub fn read_trajectories<F: Scalar, R: Read>(source: R) -> Result<Vec<TrajectoryRecord<F>>, CorpusError> {
    let mut rdr = reader(source);
    check_header(rdr.headers().map_err(csv_error)?, &TRAJECTORY_HEADER)?;

    let mut groups: BTreeMap<TrajectoryId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rdr.records() {
        let rec = row.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let modality = parse_with(&rec, 2, "modality", line, Modality::from_str)?;
        let channel = parse_with(&rec, 3, "channel", line, Channel::from_str)?;
        let rep = parse_with(&rec, 4, "rep", line, u32::from_str)?;
        let t = parse_f64(&rec, 5, "t", line)?;
        let x = parse_f64(&rec, 6, "x", line)?;
        let id = TrajectoryId::new(field(&rec, 0), field(&rec, 1), modality, channel, rep);

        let (ts, xs) = groups.entry(id.clone()).or_default();
        if let Some(&prev) = ts.last() {
            if t <= prev {
                return Err(CorpusError::NonMonotoneTime { line, id });
            }
        }
        ts.push(t);
        xs.push(x);
    }

    groups
        .into_iter()
        .map(|(id, (ts, xs))| {
            if ts.len() < 2 {
                return Err(CorpusError::InvalidRecord { id, reason: "at least two samples required".into() });
            }
            let dts: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
            let mut sorted = dts.clone();
            sorted.sort_by(f64::total_cmp);
            let median = median_sorted(&sorted);
            if let Some(&dt) = dts.iter().find(|&&dt| (dt - median).abs() > GRID_TOLERANCE * median) {
                return Err(CorpusError::NonUniformGrid { id, dt, median });
            }
            let positions = xs.into_iter().map(lit::<F>).collect();
            TrajectoryRecord::new(id, lit(1.0 / median), lit(ts[0]), positions)
        })
        .collect()
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Writes records in the long-format input schema.
pub fn write_trajectories<F: Scalar, W: Write>(records: &[TrajectoryRecord<F>], sink: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    for r in records {
        let k = &r.id.key;
        let rep = k.rep.to_string();
        for (i, x) in r.positions.iter().enumerate() {
            let t = to_f64(r.t0) + i as f64 / to_f64(r.sample_rate);
            w.write_record([
                k.speaker.as_str(),
                k.word.as_str(),
                r.id.modality.as_str(),
                k.channel.as_str(),
                rep.as_str(),
                &t.to_string(),
                &to_f64(*x).to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A matched EMA/US trajectory pair.
#[derive(Debug, Clone)]
pub struct RecordPair<F> {
    pub key: PairKey,
    pub ema: TrajectoryRecord<F>,
    pub us: TrajectoryRecord<F>,
}

#[derive(Debug, Clone)]
pub struct Pairing<F> {
    /// Complete pairs, sorted by key.
    pub pairs: Vec<RecordPair<F>>,
    /// Records without a partner in the other modality, sorted by identity.
    pub unpaired: Vec<TrajectoryRecord<F>>,
}

/// Matches EMA and US records sharing a [`PairKey`].
pub fn pair_records<F: Scalar>(records: Vec<TrajectoryRecord<F>>) -> Result<Pairing<F>, CorpusError> {
    type Slot<F> = (Option<TrajectoryRecord<F>>, Option<TrajectoryRecord<F>>);
    let mut slots: BTreeMap<PairKey, Slot<F>> = BTreeMap::new();
    for r in records {
        let key = r.id.key.clone();
        let modality = r.id.modality;
        let slot = slots.entry(key.clone()).or_default();
        let target = match modality {
            Modality::Ema => &mut slot.0,
            Modality::Us => &mut slot.1,
        };
        if target.is_some() {
            return Err(CorpusError::DuplicatePair { key, modality });
        }
        *target = Some(r);
    }

    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for (key, slot) in slots {
        match slot {
            (Some(ema), Some(us)) => pairs.push(RecordPair { key, ema, us }),
            (Some(r), None) | (None, Some(r)) => unpaired.push(r),
            (None, None) => unreachable!(),
        }
    }
    Ok(Pairing { pairs, unpaired })
}

/// One row of the result schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub id: TrajectoryId,
    pub gesture_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub b: f64,
    pub k: f64,
    pub target: f64,
    pub damping_class: DampingClass,
    pub r2_pos: Option<f64>,
    pub r2_vel: Option<f64>,
    pub converged: bool,
}

impl<F: Scalar> From<&FitResult<F>> for ResultRecord {
    fn from(fit: &FitResult<F>) -> Self {
        ResultRecord {
            id: fit.id.clone(),
            gesture_index: fit.gesture_index,
            t_start: to_f64(fit.t_start),
            t_end: to_f64(fit.t_end),
            b: to_f64(fit.params.b),
            k: to_f64(fit.params.k),
            target: to_f64(fit.params.target),
            damping_class: fit.params.damping_class(),
            r2_pos: fit.r2_pos.map(to_f64),
            r2_vel: fit.r2_vel.map(to_f64),
            converged: fit.converged,
        }
    }
}

fn opt_to_string(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes fit results in the result schema. An empty slice yields the header only.
pub fn write_results<F: Scalar, W: Write>(results: &[FitResult<F>], sink: W) -> Result<(), CorpusError> {
    let records: Vec<ResultRecord> = results.iter().map(ResultRecord::from).collect();
    write_result_records(&records, sink)
}

pub fn write_result_records<W: Write>(records: &[ResultRecord], sink: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RESULT_HEADER).map_err(csv_error)?;
    for r in records {
        let k = &r.id.key;
        w.write_record([
            k.speaker.clone(),
            k.word.clone(),
            r.id.modality.to_string(),
            k.channel.to_string(),
            k.rep.to_string(),
            r.gesture_index.to_string(),
            r.t_start.to_string(),
            r.t_end.to_string(),
            r.b.to_string(),
            r.k.to_string(),
            r.target.to_string(),
            r.damping_class.to_string(),
            opt_to_string(r.r2_pos),
            opt_to_string(r.r2_vel),
            r.converged.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the result schema written by [`write_results`].
pub fn read_results<R: Read>(source: R) -> Result<Vec<ResultRecord>, CorpusError> {
    let mut rdr = reader(source);
    check_header(rdr.headers().map_err(csv_error)?, &RESULT_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let rec = row.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let modality = parse_with(&rec, 2, "modality", line, Modality::from_str)?;
        let channel = parse_with(&rec, 3, "channel", line, Channel::from_str)?;
        let rep = parse_with(&rec, 4, "rep", line, u32::from_str)?;
        let opt = |idx: usize, column: &'static str| -> Result<Option<f64>, CorpusError> {
            if field(&rec, idx).is_empty() {
                Ok(None)
            } else {
                parse_with(&rec, idx, column, line, f64::from_str).map(Some)
            }
        };
        out.push(ResultRecord {
            id: TrajectoryId::new(field(&rec, 0), field(&rec, 1), modality, channel, rep),
            gesture_index: parse_with(&rec, 5, "gesture_index", line, usize::from_str)?,
            t_start: parse_f64(&rec, 6, "t_start", line)?,
            t_end: parse_f64(&rec, 7, "t_end", line)?,
            b: parse_with(&rec, 8, "b", line, f64::from_str)?,
            k: parse_with(&rec, 9, "k", line, f64::from_str)?,
            target: parse_with(&rec, 10, "T", line, f64::from_str)?,
            damping_class: parse_with(&rec, 11, "damping_class", line, DampingClass::from_str)?,
            r2_pos: opt(12, "r2_pos")?,
            r2_vel: opt(13, "r2_vel")?,
            converged: parse_with(&rec, 14, "converged", line, bool::from_str)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(modality: Modality) -> TrajectoryId {
        TrajectoryId::new("s1", "heed", modality, Channel::TDx, 0)
    }

    fn rec(modality: Modality) -> TrajectoryRecord<f64> {
        TrajectoryRecord::new(id(modality), 81.0, 0.0, vec![0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn reads_single_group_and_infers_rate() {
        let csv = "speaker,word,modality,channel,rep,t,x\n\
                   s1,heed,EMA,TDx,0,0,1.0\n\
                   s1,heed,EMA,TDx,0,0.0125,2.0\n\
                   s1,heed,EMA,TDx,0,0.025,3.0\n";
        let recs: Vec<TrajectoryRecord<f64>> = read_trajectories(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert!((recs[0].sample_rate - 80.0).abs() < 1e-9);
        assert_eq!(recs[0].positions, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let csv = "speaker,word,modality,channel,rep,t,x\n\
                   s1,heed,EMA,TDx,0,0,1\n\
                   s1,heed,EMA,TDx,0,0.01,1\n\
                   s1,heed,EMA,TDx,0,0.03,1\n";
        let err = read_trajectories::<f64, _>(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::NonUniformGrid { .. }), "{err}");
    }

    #[test]
    fn rejects_non_monotone_time_with_line_number() {
        let csv = "speaker,word,modality,channel,rep,t,x\n\
                   s1,heed,EMA,TDx,0,0.01,1\n\
                   s1,heed,EMA,TDx,0,0.00,1\n";
        match read_trajectories::<f64, _>(csv.as_bytes()).unwrap_err() {
            CorpusError::NonMonotoneTime { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_missing_column_and_non_finite() {
        let csv = "speaker,word,modality,channel,t,x\ns1,heed,EMA,TDx,0,1\n";
        assert!(matches!(read_trajectories::<f64, _>(csv.as_bytes()), Err(CorpusError::Header { .. })));
        let csv = "speaker,word,modality,channel,rep,t,x\ns1,heed,EMA,TDx,0,0,NaN\ns1,heed,EMA,TDx,0,1,1\n";
        assert!(matches!(read_trajectories::<f64, _>(csv.as_bytes()), Err(CorpusError::NonFinite { .. })));
    }

    #[test]
    fn comment_lines_are_skipped() {
        let csv = "# provenance a=1\nspeaker,word,modality,channel,rep,t,x\ns1,w,US,JAWy,2,0,1\ns1,w,US,JAWy,2,0.5,1\n";
        let recs: Vec<TrajectoryRecord<f64>> = read_trajectories(csv.as_bytes()).unwrap();
        assert_eq!(recs[0].id.key.channel, Channel::JAWy);
        assert_eq!(recs[0].sample_rate, 2.0);
    }

    #[test]
    fn groups_differing_in_modality_share_a_key() {
        let csv = "speaker,word,modality,channel,rep,t,x\n\
                   s1,heed,EMA,TDx,0,0,1\ns1,heed,US,TDx,0,0,1\n\
                   s1,heed,EMA,TDx,0,0.1,1\ns1,heed,US,TDx,0,0.1,1\n";
        let recs: Vec<TrajectoryRecord<f64>> = read_trajectories(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id.key, recs[1].id.key);
        assert_ne!(recs[0].id.modality, recs[1].id.modality);
    }

    #[test]
    fn pairing_cases() {
        let p = pair_records(vec![rec(Modality::Us), rec(Modality::Ema)]).unwrap();
        assert_eq!(p.pairs.len(), 1);
        assert_eq!(p.pairs[0].ema.id.modality, Modality::Ema);
        assert!(p.unpaired.is_empty());

        let p = pair_records(vec![rec(Modality::Ema)]).unwrap();
        assert_eq!(p.pairs.len(), 0);
        assert_eq!(p.unpaired.len(), 1);

        let err = pair_records(vec![rec(Modality::Ema), rec(Modality::Ema)]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicatePair { modality: Modality::Ema, .. }));
    }

    #[test]
    fn trajectory_roundtrip_through_csv() {
        let r = TrajectoryRecord::new(id(Modality::Us), 81.0, 0.0, vec![0.1, -2.5, 3.25, 7.0]).unwrap();
        let mut buf = Vec::new();
        write_trajectories(std::slice::from_ref(&r), &mut buf).unwrap();
        let back: Vec<TrajectoryRecord<f64>> = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(back[0].positions, r.positions);
        assert!((back[0].sample_rate - 81.0).abs() < 1e-9);
    }

    #[test]
    fn empty_result_list_is_header_only() {
        let mut buf = Vec::new();
        write_results::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", RESULT_HEADER.join(",")));
    }

    #[test]
    fn invalid_records_rejected() {
        assert!(TrajectoryRecord::new(id(Modality::Ema), 0.0, 0.0, vec![1.0, 2.0]).is_err());
        assert!(TrajectoryRecord::new(id(Modality::Ema), 10.0, 0.0, vec![1.0]).is_err());
        assert!(TrajectoryRecord::new(id(Modality::Ema), 10.0, 0.0, vec![1.0, f64::INFINITY]).is_err());
    }
}
