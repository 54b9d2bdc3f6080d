//! Reading raw recordings and aligning them onto the 1 Hz grid.
//!
//! Two on-disk shapes are understood:
//!
//! - **Device session directories** (`EDA.csv`, `BVP.csv`, `HR.csv`,
//!   `TEMP.csv`, `ACC.csv`, `tags.csv`): per-channel CSVs whose first line is
//!   the Unix epoch start, second line the sample rate in Hz, and remaining
//!   lines one sample each (`ACC.csv` carries three comma-separated axis
//!   columns per line). `tags.csv` holds event timestamps; consecutive pairs
//!   delimit stress spans, everything outside them is baseline, and an
//!   unpaired final tag opens a stress span that runs to the session end.
//! - **Canonical CSVs** (`subject_id,t_s,eda_us,hr_bpm,label`): the pipeline's
//!   own 1 Hz interchange format, one row per second, rows grouped by subject.
//!
//! [`align_uniform`] produces the [`UniformSeries`] everything downstream
//! consumes: per-second mean EDA, interpolated HR, and one 0/1 label per
//! second obtained by mapping raw span labels through a [`LabelProtocol`].
//! Seconds whose label maps to DROP are removed; the surviving stretches are
//! tracked as runs so later stages never window across the gap.

mod align;
mod canonical;
mod e4;
mod hr;
mod summary;

pub use align::align_uniform;
pub use canonical::{read_canonical_csv, write_canonical_csv, write_canonical_to_string, CANONICAL_HEADER};
pub use e4::{read_e4_session, write_e4_session};
pub use hr::derive_hr_from_bvp;
pub use summary::{dataset_summary, write_summary_csv, DatasetStats, SummaryStats};

use crate::series::{SeriesError, SourceDataset};
use std::path::PathBuf;

/// Errors raised while reading or aligning recordings.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error at {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session {dir}: required channel {channel} missing")]
    MissingChannel { dir: PathBuf, channel: &'static str },
    #[error("{file}:{line}: malformed header ({detail})")]
    MalformedHeader { file: PathBuf, line: usize, detail: String },
    #[error("{file}: channel has no samples")]
    EmptyChannel { file: PathBuf },
    #[error("{path}:{line}: {detail}")]
    SchemaMismatch { path: PathBuf, line: usize, detail: String },
    #[error("{path}:{line}: timestep differs from 1 s")]
    NonUniformTimestep { path: PathBuf, line: usize },
    #[error("{path}:{line}: label {value:?} outside {{0,1}}")]
    LabelOutOfDomain { path: PathBuf, line: usize, value: String },
    #[error("recording too short: {detail}")]
    TooShort { detail: String },
    #[error("no pulse peaks detected in BVP signal")]
    NoPeaksDetected,
    #[error("unsupported sample rate {rate} Hz ({detail})")]
    UnsupportedRate { rate: f64, detail: String },
    #[error("raw label {raw:?} has no protocol mapping")]
    UnmappedLabel { raw: String },
    #[error("invalid label spans: {detail}")]
    InvalidLabelSpans { detail: String },
    #[error("subject {subject_id:?}: no seconds left after dropping unlabeled spans")]
    EmptyAfterDrop { subject_id: String },
    #[error("empty input: {detail}")]
    EmptyInput { detail: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Biosignal channels a session may carry. TEMP and ACC are parsed for
/// completeness but excluded from modeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Eda,
    Bvp,
    Hr,
    Temp,
    Acc,
}

impl ChannelKind {
    pub fn file_name(self) -> &'static str {
        match self {
            ChannelKind::Eda => "EDA.csv",
            ChannelKind::Bvp => "BVP.csv",
            ChannelKind::Hr => "HR.csv",
            ChannelKind::Temp => "TEMP.csv",
            ChannelKind::Acc => "ACC.csv",
        }
    }

    /// Values per sample line (3 axes for ACC, 1 otherwise).
    pub fn values_per_sample(self) -> usize {
        match self {
            ChannelKind::Acc => 3,
            _ => 1,
        }
    }
}

/// One raw channel: declared rate plus the parsed sample stream
/// (ACC samples are flattened x,y,z triplets).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub rate_hz: f64,
    pub start_epoch_s: f64,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.kind.values_per_sample()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.rate_hz
    }
}

/// A raw labeled span in session-relative seconds, half-open `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub raw_label: String,
}

/// One subject's raw recording before alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSession {
    pub subject_id: String,
    pub source_dataset: SourceDataset,
    pub channels: Vec<Channel>,
    pub label_spans: Vec<LabelSpan>,
    /// Sample lines that failed to parse and were skipped.
    pub malformed_lines: usize,
}

impl SensorSession {
    pub fn channel(&self, kind: ChannelKind) -> Option<&Channel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    /// Usable duration in whole seconds: the shortest of the channels that
    /// feed the aligned grid (EDA plus native HR or BVP).
    pub fn duration_s(&self) -> f64 {
        let mut dur = f64::INFINITY;
        for kind in [ChannelKind::Eda, ChannelKind::Hr, ChannelKind::Bvp] {
            if let Some(c) = self.channel(kind) {
                dur = dur.min(c.duration_s());
            }
        }
        if dur.is_finite() {
            dur
        } else {
            0.0
        }
    }
}

/// How a second's label maps into the binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LabelClass {
    Zero,
    One,
    /// Remove the second from the series entirely.
    Drop,
}

/// Maps raw span labels onto {0, 1, DROP}.
///
/// Rules match case-insensitively on the exact raw string; a `"*"` rule
/// matches anything not covered earlier. Raw labels that parse as numbers can
/// instead be classified by `numeric_threshold` (value ≥ threshold → 1),
/// which is how self-reported scores are binarized.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelProtocol {
    rules: Vec<(String, LabelClass)>,
    numeric_threshold: Option<f64>,
}

impl LabelProtocol {
    pub fn new(rules: Vec<(String, LabelClass)>) -> LabelProtocol {
        let rules = rules
            .into_iter()
            .map(|(k, v)| (k.to_ascii_lowercase(), v))
            .collect();
        LabelProtocol { rules, numeric_threshold: None }
    }

    pub fn with_numeric_threshold(mut self, threshold: f64) -> LabelProtocol {
        self.numeric_threshold = Some(threshold);
        self
    }

    /// Prepends an override rule; earlier rules win, so this replaces any
    /// default mapping for the same raw label.
    pub fn with_rule(mut self, raw: &str, class: LabelClass) -> LabelProtocol {
        self.rules.insert(0, (raw.to_ascii_lowercase(), class));
        self
    }

    pub fn map(&self, raw: &str) -> Option<LabelClass> {
        let key = raw.trim().to_ascii_lowercase();
        for (rule, class) in &self.rules {
            if rule == &key {
                return Some(*class);
            }
        }
        if let Some(thr) = self.numeric_threshold {
            if let Ok(v) = key.parse::<f64>() {
                return Some(if v >= thr { LabelClass::One } else { LabelClass::Zero });
            }
        }
        self.rules
            .iter()
            .find(|(rule, _)| rule == "*")
            .map(|(_, class)| *class)
    }

    /// Protocol for tag-delimited sessions (the fixture convention):
    /// baseline → 0, stress → 1, untagged stretches dropped.
    pub fn tags() -> LabelProtocol {
        LabelProtocol::new(vec![
            ("baseline".into(), LabelClass::Zero),
            ("stress".into(), LabelClass::One),
            ("unlabeled".into(), LabelClass::Drop),
        ])
    }

    /// Placeholder protocol for unlabeled inference: every span maps to 0 so
    /// alignment succeeds; the labels are ignored downstream.
    pub fn unlabeled_zero() -> LabelProtocol {
        LabelProtocol::new(vec![("*".into(), LabelClass::Zero)])
    }

    /// Documented default protocol for a named dataset. These cover the
    /// conventional binary condition mappings; registry entries can override
    /// them per deployment.
    pub fn for_dataset(source: SourceDataset) -> LabelProtocol {
        match source {
            SourceDataset::Swell => LabelProtocol::new(vec![
                ("no stress".into(), LabelClass::Zero),
                ("neutral".into(), LabelClass::Zero),
                ("time pressure".into(), LabelClass::One),
                ("interruptions".into(), LabelClass::One),
            ]),
            SourceDataset::Neuro => LabelProtocol::new(vec![
                ("relax".into(), LabelClass::Zero),
                ("physical stress".into(), LabelClass::One),
                ("emotional stress".into(), LabelClass::One),
                ("cognitive stress".into(), LabelClass::One),
            ]),
            SourceDataset::Wesad => LabelProtocol::new(vec![
                ("baseline".into(), LabelClass::Zero),
                ("stress".into(), LabelClass::One),
                ("transient".into(), LabelClass::Drop),
                ("amusement".into(), LabelClass::Drop),
                ("meditation".into(), LabelClass::Drop),
            ]),
            // Self-reported scores binarized at the midpoint of the 0..10
            // scale by default; override the threshold in the registry.
            SourceDataset::Ubfc => LabelProtocol::new(vec![
                ("rest".into(), LabelClass::Zero),
                ("stress".into(), LabelClass::One),
            ])
            .with_numeric_threshold(5.0),
            SourceDataset::Exam => LabelProtocol::new(vec![
                ("baseline".into(), LabelClass::Zero),
                ("midterm".into(), LabelClass::One),
                ("final".into(), LabelClass::One),
                ("exam".into(), LabelClass::One),
            ]),
            SourceDataset::Toadstool => LabelProtocol::unlabeled_zero(),
            SourceDataset::Canonical | SourceDataset::Fixture => LabelProtocol::tags(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_matches_case_insensitively() {
        let p = LabelProtocol::tags();
        assert_eq!(p.map("Baseline"), Some(LabelClass::Zero));
        assert_eq!(p.map("STRESS"), Some(LabelClass::One));
        assert_eq!(p.map("amusement"), None);
    }

    #[test]
    fn numeric_threshold_binarizes_scores() {
        let p = LabelProtocol::for_dataset(SourceDataset::Ubfc);
        assert_eq!(p.map("7"), Some(LabelClass::One));
        assert_eq!(p.map("4.5"), Some(LabelClass::Zero));
        assert_eq!(p.map("rest"), Some(LabelClass::Zero));
    }

    #[test]
    fn wildcard_catches_everything() {
        let p = LabelProtocol::unlabeled_zero();
        assert_eq!(p.map("whatever"), Some(LabelClass::Zero));
    }
}
