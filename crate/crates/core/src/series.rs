//! The uniform 1 Hz series every pipeline stage exchanges.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Origin of a recording. Determines the default label protocol and the
/// grouping used by dataset summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceDataset {
    Swell,
    Neuro,
    Wesad,
    Ubfc,
    Exam,
    Toadstool,
    /// Read from a canonical CSV without further provenance (also used for
    /// synthesized subjects, whose true origins live in their constituents).
    Canonical,
    /// Generated by the built-in fixture generator.
    Fixture,
}

impl SourceDataset {
    pub fn parse(name: &str) -> Option<SourceDataset> {
        match name.to_ascii_lowercase().as_str() {
            "swell" => Some(SourceDataset::Swell),
            "neuro" => Some(SourceDataset::Neuro),
            "wesad" => Some(SourceDataset::Wesad),
            "ubfc" => Some(SourceDataset::Ubfc),
            "exam" => Some(SourceDataset::Exam),
            "toadstool" => Some(SourceDataset::Toadstool),
            "canonical" => Some(SourceDataset::Canonical),
            "fixture" => Some(SourceDataset::Fixture),
            _ => None,
        }
    }
}

impl fmt::Display for SourceDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SourceDataset::Swell => "swell",
            SourceDataset::Neuro => "neuro",
            SourceDataset::Wesad => "wesad",
            SourceDataset::Ubfc => "ubfc",
            SourceDataset::Exam => "exam",
            SourceDataset::Toadstool => "toadstool",
            SourceDataset::Canonical => "canonical",
            SourceDataset::Fixture => "fixture",
        };
        f.write_str(s)
    }
}

/// One subject's recording resampled to 1 Hz.
///
/// Invariants, enforced by [`UniformSeries::new`]:
/// - `t`, `eda_us`, `hr_bpm`, `label` all have equal length;
/// - `t` is re-indexed `0,1,2,…` (strictly increasing 1-second steps);
/// - every label is 0 or 1;
/// - all signal values are finite.
///
/// Seconds removed during alignment (labels the protocol maps to DROP) split
/// the series into contiguous *runs*, tracked by `run_starts` so windowing
/// and segmentation never straddle a gap. `run_starts` is strictly
/// increasing and begins with 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformSeries {
    pub subject_id: String,
    pub t: Vec<u32>,
    pub eda_us: Vec<f64>,
    pub hr_bpm: Vec<f64>,
    pub label: Vec<u8>,
    pub source_dataset: SourceDataset,
    pub run_starts: Vec<usize>,
}

/// Violations of the [`UniformSeries`] invariants.
#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("series {subject_id:?}: channel lengths differ ({detail})")]
    LengthMismatch { subject_id: String, detail: String },
    #[error("series {subject_id:?}: label {value} at second {t} outside {{0,1}}")]
    LabelOutOfDomain { subject_id: String, t: usize, value: u8 },
    #[error("series {subject_id:?}: non-finite sample at second {t}")]
    NonFiniteSample { subject_id: String, t: usize },
    #[error("series {subject_id:?}: invalid run boundaries ({detail})")]
    InvalidRuns { subject_id: String, detail: String },
}

impl UniformSeries {
    /// Builds a single-run series, validating every invariant.
    pub fn new(
        subject_id: impl Into<String>,
        eda_us: Vec<f64>,
        hr_bpm: Vec<f64>,
        label: Vec<u8>,
        source_dataset: SourceDataset,
    ) -> Result<UniformSeries, SeriesError> {
        let run_starts = if eda_us.is_empty() { vec![] } else { vec![0] };
        UniformSeries::with_runs(subject_id, eda_us, hr_bpm, label, source_dataset, run_starts)
    }

    /// Builds a series with explicit run boundaries.
    pub fn with_runs(
        subject_id: impl Into<String>,
        eda_us: Vec<f64>,
        hr_bpm: Vec<f64>,
        label: Vec<u8>,
        source_dataset: SourceDataset,
        run_starts: Vec<usize>,
    ) -> Result<UniformSeries, SeriesError> {
        let subject_id = subject_id.into();
        let n = eda_us.len();
        if hr_bpm.len() != n || label.len() != n {
            return Err(SeriesError::LengthMismatch {
                subject_id,
                detail: format!("eda {}, hr {}, label {}", n, hr_bpm.len(), label.len()),
            });
        }
        for (t, (&e, &h)) in eda_us.iter().zip(&hr_bpm).enumerate() {
            if !e.is_finite() || !h.is_finite() {
                return Err(SeriesError::NonFiniteSample { subject_id, t });
            }
        }
        for (t, &l) in label.iter().enumerate() {
            if l > 1 {
                return Err(SeriesError::LabelOutOfDomain { subject_id, t, value: l });
            }
        }
        if n == 0 {
            if !run_starts.is_empty() {
                return Err(SeriesError::InvalidRuns {
                    subject_id,
                    detail: "run boundaries on an empty series".into(),
                });
            }
        } else if run_starts.first() != Some(&0)
            || run_starts.windows(2).any(|w| w[0] >= w[1])
            || run_starts.last().is_some_and(|&s| s >= n)
        {
            return Err(SeriesError::InvalidRuns {
                subject_id,
                detail: format!("run_starts {run_starts:?} for length {n}"),
            });
        }
        Ok(UniformSeries {
            subject_id,
            t: (0..n as u32).collect(),
            eda_us,
            hr_bpm,
            label,
            source_dataset,
            run_starts,
        })
    }

    pub fn len(&self) -> usize {
        self.eda_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eda_us.is_empty()
    }

    /// Contiguous runs as half-open index ranges.
    pub fn runs(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let n = self.len();
        self.run_starts.iter().enumerate().map(move |(i, &start)| {
            let end = self.run_starts.get(i + 1).copied().unwrap_or(n);
            start..end
        })
    }

    pub fn with_source(mut self, source: SourceDataset) -> UniformSeries {
        self.source_dataset = source;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> UniformSeries {
        UniformSeries::new("a", vec![1.0; n], vec![70.0; n], vec![0; n], SourceDataset::Fixture)
            .unwrap()
    }

    #[test]
    fn reindexes_time_from_zero() {
        let s = series(5);
        assert_eq!(s.t, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.runs().collect::<Vec<_>>(), vec![0..5]);
    }

    #[test]
    fn rejects_out_of_domain_label() {
        let err = UniformSeries::new("a", vec![1.0], vec![70.0], vec![2], SourceDataset::Fixture)
            .unwrap_err();
        assert!(matches!(err, SeriesError::LabelOutOfDomain { value: 2, .. }));
    }

    #[test]
    fn rejects_length_mismatch_and_non_finite() {
        assert!(UniformSeries::new("a", vec![1.0], vec![], vec![0], SourceDataset::Fixture).is_err());
        assert!(
            UniformSeries::new("a", vec![f64::NAN], vec![70.0], vec![0], SourceDataset::Fixture)
                .is_err()
        );
    }

    #[test]
    fn run_boundaries_partition_the_series() {
        let s = UniformSeries::with_runs(
            "a",
            vec![1.0; 6],
            vec![70.0; 6],
            vec![0; 6],
            SourceDataset::Fixture,
            vec![0, 4],
        )
        .unwrap();
        assert_eq!(s.runs().collect::<Vec<_>>(), vec![0..4, 4..6]);
        assert!(UniformSeries::with_runs(
            "a",
            vec![1.0; 6],
            vec![70.0; 6],
            vec![0; 6],
            SourceDataset::Fixture,
            vec![1, 4],
        )
        .is_err());
    }

    #[test]
    fn empty_series_has_no_runs() {
        let s = UniformSeries::new("a", vec![], vec![], vec![], SourceDataset::Fixture).unwrap();
        assert_eq!(s.runs().count(), 0);
    }
}
