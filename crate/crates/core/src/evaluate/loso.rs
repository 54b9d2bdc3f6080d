//! Model-fitting recipes and the leave-one-subject-out harness.
//!
//! A [`Trainer`] owns everything needed to turn feature rows into a fitted
//! model, including the internal 70/30 stratified split both learners use
//! for early stopping. [`run_loso`] holds out each subject in turn, trains
//! on the rest, and aggregates the per-subject confusions; folds run in
//! parallel with per-fold seeds derived from the master seed, so parallel
//! and serial execution produce identical reports.

use super::{classify, Confusion, EvalError, EvalReport, SubjectOutcome, ValidationScheme};
use crate::ensemble::{ensemble_predict, BlendedPrediction, EnsembleWeights, WeightPolicy};
use crate::features::{FeatureMatrix, FeatureRow, FeatureSchema};
use crate::gbdt::{stratified_split, GbdtModel, GbdtParams};
use crate::mlp::{MlpModel, TrainConfig};
use crate::util::derive_seed;
use rayon::prelude::*;

/// Recipe for fitting one fold's model.
#[derive(Debug, Clone, PartialEq)]
pub enum Trainer {
    /// Boosted trees alone.
    GbdtOnly { params: GbdtParams },
    /// Trees blended with the network under a weight policy.
    Ensemble { gbdt: GbdtParams, mlp: TrainConfig, policy: WeightPolicy },
}

impl Trainer {
    pub fn policy(&self) -> Option<WeightPolicy> {
        match self {
            Trainer::GbdtOnly { .. } => None,
            Trainer::Ensemble { policy, .. } => Some(*policy),
        }
    }

    /// Fits on `rows`, carving an internal 70/30 stratified split out of them
    /// for early stopping. Both learners see the same split.
    pub fn fit(
        &self,
        rows: &[FeatureRow],
        feature_names: &[String],
        seed: u64,
    ) -> Result<FittedModel, EvalError> {
        if rows.is_empty() {
            return Err(EvalError::EmptyInput { detail: "no training rows".into() });
        }
        let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
        let (train_idx, stop_idx) = stratified_split(&labels, 0.3, derive_seed(seed, 0));
        let take = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) {
            (
                idx.iter().map(|&i| rows[i].values.clone()).collect(),
                idx.iter().map(|&i| rows[i].label).collect(),
            )
        };
        let (xt, yt) = take(&train_idx);
        let (xv, yv) = take(&stop_idx);

        match self {
            Trainer::GbdtOnly { params } => {
                let params = GbdtParams { seed: derive_seed(seed, 1), ..params.clone() };
                let gbdt = GbdtModel::fit_with_valid(&xt, &yt, &xv, &yv, feature_names, &params)?;
                let policy = WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt: 1.0 } };
                Ok(FittedModel { gbdt, mlp: None, policy })
            }
            Trainer::Ensemble { gbdt, mlp, policy } => {
                let tree_params = GbdtParams { seed: derive_seed(seed, 1), ..gbdt.clone() };
                let tree =
                    GbdtModel::fit_with_valid(&xt, &yt, &xv, &yv, feature_names, &tree_params)?;
                let net_config = TrainConfig { seed: derive_seed(seed, 2), ..mlp.clone() };
                let net = MlpModel::fit_with_valid(&xt, &yt, &xv, &yv, feature_names, &net_config)?;
                Ok(FittedModel { gbdt: tree, mlp: Some(net), policy: *policy })
            }
        }
    }
}

/// A fitted fold: trees, optional network, and the blend policy.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FittedModel {
    pub gbdt: GbdtModel,
    pub mlp: Option<MlpModel>,
    pub policy: WeightPolicy,
}

/// A fitted model together with the feature recipe that feeds it: the
/// on-disk form that `train` writes and `eval`/`predict` read back.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SavedModel {
    pub schema: FeatureSchema,
    pub model: FittedModel,
}

impl SavedModel {
    pub fn save(&self, path: &std::path::Path) -> Result<(), EvalError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| EvalError::Io { path: path.into(), source })
    }

    pub fn load(path: &std::path::Path) -> Result<SavedModel, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EvalError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl FittedModel {
    /// Blended probability per row. Rows are grouped by subject so the
    /// length rule (when configured) resolves on each subject's recording
    /// duration; outputs stay aligned with the input order.
    pub fn predict_rows(
        &self,
        rows: &[FeatureRow],
        window_s: usize,
    ) -> Result<Vec<f64>, EvalError> {
        Ok(self.predict_parts(rows, window_s)?.blended)
    }

    /// Component and blended probabilities for `rows`.
    pub fn predict_parts(
        &self,
        rows: &[FeatureRow],
        window_s: usize,
    ) -> Result<BlendedPrediction, EvalError> {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
        let p_gbdt = self.gbdt.predict_proba(&x)?;
        let Some(net) = &self.mlp else {
            return Ok(BlendedPrediction { blended: p_gbdt.clone(), gbdt: p_gbdt, mlp: None });
        };
        let p_mlp = net.predict_proba(&x)?;

        let mut blended = vec![0.0; rows.len()];
        for (start, end) in subject_spans(rows) {
            let len_s = recording_seconds(&rows[start..end], window_s);
            let piece =
                ensemble_predict(&p_gbdt[start..end], &p_mlp[start..end], &self.policy, len_s)?;
            blended[start..end].copy_from_slice(&piece);
        }
        Ok(BlendedPrediction { gbdt: p_gbdt, mlp: Some(p_mlp), blended })
    }
}

/// Half-open index spans of consecutive same-subject rows.
fn subject_spans(rows: &[FeatureRow]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].subject_id != rows[start].subject_id {
            spans.push((start, i));
            start = i;
        }
    }
    spans
}

/// Recording extent implied by a subject's rows: last window start plus one
/// window. Exact for gap-free streams; a lower bound when runs drop
/// remainders.
fn recording_seconds(rows: &[FeatureRow], window_s: usize) -> u32 {
    rows.iter().map(|r| r.window_start_s).max().unwrap_or(0) + window_s as u32
}

/// Distinct subjects in first-appearance order.
pub fn subject_ids(rows: &[FeatureRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.subject_id) {
            out.push(r.subject_id.clone());
        }
    }
    out
}

/// Leave-one-subject-out evaluation of `trainer` over one feature matrix.
///
/// Each fold trains on every other subject and scores the held-out one; the
/// report pools all per-subject confusions and also carries the unweighted
/// mean of per-subject accuracies.
pub fn run_loso(
    matrix: &FeatureMatrix,
    trainer: &Trainer,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let subjects = subject_ids(&matrix.rows);
    if subjects.len() < 2 {
        return Err(EvalError::TooFewSubjects { got: subjects.len() });
    }

    let outcomes: Vec<SubjectOutcome> = subjects
        .par_iter()
        .enumerate()
        .map(|(fold, held_out)| run_fold(matrix, trainer, held_out, derive_seed(seed, fold as u64)))
        .collect::<Result<_, _>>()?;

    Ok(EvalReport::from_subjects(
        ValidationScheme::Loso,
        matrix.schema.mode,
        trainer.policy(),
        seed,
        outcomes,
        Vec::new(),
    ))
}

fn run_fold(
    matrix: &FeatureMatrix,
    trainer: &Trainer,
    held_out: &str,
    fold_seed: u64,
) -> Result<SubjectOutcome, EvalError> {
    let (train, test): (Vec<FeatureRow>, Vec<FeatureRow>) =
        matrix.rows.iter().cloned().partition(|r| r.subject_id != held_out);
    // The entire point of LOSO: the held-out subject must not leak into
    // training. Defended here, not just assumed.
    assert!(
        train.iter().all(|r| r.subject_id != held_out),
        "subject {held_out} leaked into its own training fold"
    );
    let fitted = trainer.fit(&train, &matrix.schema.names, fold_seed)?;
    let probs = fitted.predict_rows(&test, matrix.schema.window_s)?;
    let preds = classify(&probs, 0.5);
    let truth: Vec<u8> = test.iter().map(|r| r.label).collect();
    let confusion = Confusion::from_labels(&preds, &truth)?;
    Ok(SubjectOutcome {
        subject_id: held_out.to_string(),
        accuracy: confusion.accuracy(),
        n_rows: test.len(),
        confusion,
    })
}
