//! Cross-modality comparison of fitted parameters.
//!
//! The comparison model is
//!
//! ```text
//! y_i ~ Normal(alpha + alpha_s[s_i] + (beta + beta_w[w_i]) * modality_i, sigma)
//! alpha_s ~ Normal(0, tau_alpha),  beta_w ~ Normal(0, tau_beta)
//! alpha, beta ~ Normal(0, 2);  sigma, tau_alpha, tau_beta ~ HalfNormal(0, 2)
//! ```
//!
//! with EMA as the baseline (`modality = 0`), so `beta` is the average
//! amount by which ultrasound estimates differ from EMA.

mod diagnostics;
mod effects;
mod hierarchical;
mod pearson;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

pub use diagnostics::{effective_sample_size, mean_var, potential_scale_reduction, quantile_sorted, split_rhat};
pub use effects::{word_effects, WordEffect};
pub use hierarchical::{
    fit_hierarchical, Draws, HierarchicalFit, McmcConfig, PosteriorSummary, RHAT_THRESHOLD, SCALE_FLOOR,
};
pub use pearson::pearson_r;

use crate::corpus::{Channel, Modality, ResultRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 values, got {0}")]
    TooFewValues(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("degenerate grouping: {0}")]
    DegenerateGrouping(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid MCMC configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown parameter `{0}` (expected T, k or b)")]
    UnknownParameter(String),
}

/// Which fitted quantity is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Target,
    Stiffness,
    Damping,
}

impl Parameter {
    pub fn of(self, r: &ResultRecord) -> f64 {
        match self {
            Parameter::Target => r.target,
            Parameter::Stiffness => r.k,
            Parameter::Damping => r.b,
        }
    }
}

impl FromStr for Parameter {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(Parameter::Target),
            "k" => Ok(Parameter::Stiffness),
            "b" => Ok(Parameter::Damping),
            other => Err(StatsError::UnknownParameter(other.to_string())),
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::Target => "T",
            Parameter::Stiffness => "k",
            Parameter::Damping => "b",
        })
    }
}

/// One gesture-fit value with its grouping indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonObservation {
    pub y: f64,
    pub speaker: usize,
    pub word: usize,
    /// 0 for EMA, 1 for ultrasound.
    pub modality: u8,
}

/// Validated input for [`fit_hierarchical`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonData {
    pub observations: Vec<ComparisonObservation>,
    pub speakers: Vec<String>,
    pub words: Vec<String>,
}

impl ComparisonData {
    pub fn new(
        observations: Vec<ComparisonObservation>,
        speakers: Vec<String>,
        words: Vec<String>,
    ) -> Result<Self, StatsError> {
        if speakers.len() < 2 {
            return Err(StatsError::DegenerateGrouping(format!("{} speaker(s); need at least 2", speakers.len())));
        }
        if words.len() < 2 {
            return Err(StatsError::DegenerateGrouping(format!("{} word(s); need at least 2", words.len())));
        }
        for o in &observations {
            if !o.y.is_finite() {
                return Err(StatsError::InvalidObservation("non-finite outcome".into()));
            }
            if o.speaker >= speakers.len() || o.word >= words.len() || o.modality > 1 {
                return Err(StatsError::InvalidObservation(format!("index out of range: {o:?}")));
            }
        }
        for m in [0, 1] {
            if !observations.iter().any(|o| o.modality == m) {
                return Err(StatsError::DegenerateGrouping(format!("no observations with modality {m}")));
            }
        }
        let used = |f: fn(&ComparisonObservation) -> usize, len: usize| {
            let seen: BTreeSet<usize> = observations.iter().map(f).collect();
            seen.len() == len
        };
        if !used(|o| o.speaker, speakers.len()) || !used(|o| o.word, words.len()) {
            return Err(StatsError::InvalidObservation("speaker and word indices must be dense".into()));
        }
        Ok(ComparisonData { observations, speakers, words })
    }

    /// Observations of one parameter in one channel; speakers and words are
    /// indexed in sorted order. Non-finite values are rejected, not dropped.
    pub fn from_results(records: &[ResultRecord], parameter: Parameter, channel: &Channel) -> Result<Self, StatsError> {
        let rows: Vec<&ResultRecord> = records.iter().filter(|r| &r.id.key.channel == channel).collect();
        let speakers: Vec<String> =
            rows.iter().map(|r| r.id.key.speaker.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let words: Vec<String> =
            rows.iter().map(|r| r.id.key.word.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let observations = rows
            .iter()
            .map(|r| ComparisonObservation {
                y: parameter.of(r),
                speaker: speakers.binary_search(&r.id.key.speaker).unwrap(),
                word: words.binary_search(&r.id.key.word).unwrap(),
                modality: r.id.modality.indicator(),
            })
            .collect();
        ComparisonData::new(observations, speakers, words)
    }

    /// Same data with EMA and ultrasound indicators swapped.
    pub fn swap_modality(&self) -> Self {
        let mut out = self.clone();
        for o in &mut out.observations {
            o.modality = 1 - o.modality;
        }
        out
    }

    pub fn modality_label(indicator: u8) -> Modality {
        if indicator == 0 {
            Modality::Ema
        } else {
            Modality::Us
        }
    }
}
