//! Classification metrics, evaluation reports, and the harnesses built on
//! them.
//!
//! Everything downstream of model fitting lives here: thresholding
//! probabilities into labels, confusion counting, leave-one-subject-out and
//! holdout harnesses, the numbered experiment configurations, and plot
//! rendering. Aggregate counts are always the sum of per-subject counts, and
//! every harness is deterministic under a fixed seed.

pub mod experiments;
pub mod loso;
pub mod plot;

use crate::ensemble::WeightPolicy;
use crate::features::SchemaMode;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty evaluation input: {detail}")]
    EmptyInput { detail: String },
    #[error("leave-one-subject-out needs at least 2 subjects, got {got}")]
    TooFewSubjects { got: usize },
    #[error("missing datasets: supply {needed:?} to run this experiment")]
    MissingDataset { needed: Vec<String> },
    #[error("io error at {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Gbdt(#[from] crate::gbdt::GbdtError),
    #[error(transparent)]
    Mlp(#[from] crate::mlp::MlpError),
    #[error(transparent)]
    Ensemble(#[from] crate::ensemble::EnsembleError),
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
}

/// 2×2 confusion counts, stressed = positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Confusion {
    pub fn from_labels(pred: &[u8], truth: &[u8]) -> Result<Confusion, EvalError> {
        if pred.len() != truth.len() {
            return Err(EvalError::LengthMismatch { pred: pred.len(), truth: truth.len() });
        }
        if pred.is_empty() {
            return Err(EvalError::EmptyInput { detail: "no predictions to score".into() });
        }
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p, t) {
                (1, 1) => c.true_pos += 1,
                (1, 0) => c.false_pos += 1,
                (0, 1) => c.false_neg += 1,
                _ => c.true_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn n(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    pub fn accuracy(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        (self.true_pos + self.true_neg) as f64 / self.n() as f64
    }
}

/// Scalar metrics derived from a confusion table.
///
/// A zero denominator pins the metric to 0 and raises the matching flag —
/// never NaN, and never silently indistinguishable from a genuine zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined_precision: bool,
    pub undefined_recall: bool,
    pub undefined_f1: bool,
}

impl Metrics {
    pub fn from_confusion(c: &Confusion) -> Metrics {
        let tp = c.true_pos as f64;
        let pred_pos = c.true_pos + c.false_pos;
        let actual_pos = c.true_pos + c.false_neg;
        let (precision, undefined_precision) =
            if pred_pos == 0 { (0.0, true) } else { (tp / pred_pos as f64, false) };
        let (recall, undefined_recall) =
            if actual_pos == 0 { (0.0, true) } else { (tp / actual_pos as f64, false) };
        let (f1, undefined_f1) = if precision + recall == 0.0 {
            (0.0, true)
        } else {
            (2.0 * precision * recall / (precision + recall), false)
        };
        Metrics {
            accuracy: c.accuracy(),
            precision,
            recall,
            f1,
            undefined_precision,
            undefined_recall,
            undefined_f1,
        }
    }
}

/// Thresholds probabilities into 0/1 labels; the boundary is stressed.
pub fn classify(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}

/// Scores a prediction against truth.
pub fn metrics(pred: &[u8], truth: &[u8]) -> Result<Metrics, EvalError> {
    Ok(Metrics::from_confusion(&Confusion::from_labels(pred, truth)?))
}

/// How validation rows were held out from training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationScheme {
    /// Train on some datasets, score each remaining dataset separately.
    HoldoutDatasets,
    /// Leave-one-subject-out over one row set.
    Loso,
    /// Train on everything except WESAD, score WESAD.
    WesadHoldout,
}

impl std::fmt::Display for ValidationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValidationScheme::HoldoutDatasets => "holdout-datasets",
            ValidationScheme::Loso => "loso",
            ValidationScheme::WesadHoldout => "wesad-holdout",
        })
    }
}

/// One subject's slice of the aggregate confusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectOutcome {
    pub subject_id: String,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub n_rows: usize,
}

/// One validation dataset's slice, for multi-dataset holdouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOutcome {
    pub dataset: String,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

/// The full result of one harness run: pooled counts, derived metrics, and
/// the per-subject / per-dataset breakdowns they aggregate, plus an echo of
/// the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment_id: Option<u8>,
    pub scheme: ValidationScheme,
    pub schema: SchemaMode,
    pub policy: Option<WeightPolicy>,
    pub seed: u64,
    pub confusion: Confusion,
    pub metrics: Metrics,
    /// Unweighted mean of per-subject accuracies, reported alongside the
    /// pooled metrics since the two aggregations genuinely differ.
    pub mean_subject_accuracy: f64,
    pub subjects: Vec<SubjectOutcome>,
    pub datasets: Vec<DatasetOutcome>,
}

impl EvalReport {
    /// Assembles the aggregate from per-subject outcomes.
    pub fn from_subjects(
        scheme: ValidationScheme,
        schema: SchemaMode,
        policy: Option<WeightPolicy>,
        seed: u64,
        subjects: Vec<SubjectOutcome>,
        datasets: Vec<DatasetOutcome>,
    ) -> EvalReport {
        let mut confusion = Confusion::default();
        for s in &subjects {
            confusion.merge(&s.confusion);
        }
        let mean_subject_accuracy = if subjects.is_empty() {
            0.0
        } else {
            subjects.iter().map(|s| s.accuracy).sum::<f64>() / subjects.len() as f64
        };
        EvalReport {
            experiment_id: None,
            scheme,
            schema,
            policy,
            seed,
            metrics: Metrics::from_confusion(&confusion),
            confusion,
            mean_subject_accuracy,
            subjects,
            datasets,
        }
    }

    pub fn with_experiment_id(mut self, id: u8) -> EvalReport {
        self.experiment_id = Some(id);
        self
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| EvalError::Io { path: path.into(), source })
    }
}
