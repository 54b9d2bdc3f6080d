//! Weighted blending of the two probability streams.
//!
//! An ensemble pairs a boosted-tree model with an optional network and mixes
//! their stress probabilities as `w·p_tree + (1−w)·p_net`. The weight may be
//! fixed or chosen by recording length: long recordings lean on the network,
//! short ones on the trees.

use crate::features::SchemaMode;
use crate::gbdt::{GbdtError, GbdtModel};
use crate::mlp::{MlpError, MlpModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tag identifying the JSON model document.
pub const ENSEMBLE_FORMAT: &str = "ensemble-v1";

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("blend weight {weight} outside [0, 1]")]
    WeightOutOfRange { weight: f64 },
    #[error("probability streams differ in length: {gbdt} vs {mlp}")]
    LengthMismatch { gbdt: usize, mlp: usize },
    #[error("component feature sets disagree: trees use {gbdt}, network uses {mlp}")]
    ComponentMismatch { gbdt: usize, mlp: usize },
    #[error("model document has format {found:?}, expected {ENSEMBLE_FORMAT:?}")]
    FormatTag { found: String },
    #[error("io error at {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Blend weight on the tree model; the network gets the complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub w_gbdt: f64,
}

impl EnsembleWeights {
    pub fn new(w_gbdt: f64) -> Result<EnsembleWeights, EnsembleError> {
        if !(0.0..=1.0).contains(&w_gbdt) {
            return Err(EnsembleError::WeightOutOfRange { weight: w_gbdt });
        }
        Ok(EnsembleWeights { w_gbdt })
    }

    pub fn w_mlp(&self) -> f64 {
        1.0 - self.w_gbdt
    }
}

/// How a fold picks its blend weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightPolicy {
    Fixed { weights: EnsembleWeights },
    /// Recordings strictly longer than `threshold_s` use `long`, the rest
    /// `short`.
    ByLength { threshold_s: u32, long: EnsembleWeights, short: EnsembleWeights },
}

impl WeightPolicy {
    pub fn resolve(&self, recording_s: u32) -> EnsembleWeights {
        match *self {
            WeightPolicy::Fixed { weights } => weights,
            WeightPolicy::ByLength { threshold_s, long, short } => {
                if recording_s > threshold_s {
                    long
                } else {
                    short
                }
            }
        }
    }
}

/// Per-row probabilities from each component plus the blend.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedPrediction {
    pub gbdt: Vec<f64>,
    pub mlp: Option<Vec<f64>>,
    pub blended: Vec<f64>,
}

/// `w·p_tree + (1−w)·p_net`, element-wise, with `w` resolved from the
/// policy for a recording of `segment_len_s` seconds. At w = 1 or w = 0 the
/// output equals the respective input bit for bit.
pub fn ensemble_predict(
    p_gbdt: &[f64],
    p_mlp: &[f64],
    policy: &WeightPolicy,
    segment_len_s: u32,
) -> Result<Vec<f64>, EnsembleError> {
    if p_gbdt.len() != p_mlp.len() {
        return Err(EnsembleError::LengthMismatch { gbdt: p_gbdt.len(), mlp: p_mlp.len() });
    }
    let weights = policy.resolve(segment_len_s);
    Ok(blend(p_gbdt, p_mlp, weights))
}

fn blend(p_gbdt: &[f64], p_mlp: &[f64], weights: EnsembleWeights) -> Vec<f64> {
    p_gbdt
        .iter()
        .zip(p_mlp)
        .map(|(&a, &b)| weights.w_gbdt * a + weights.w_mlp() * b)
        .collect()
}

/// A tree model, an optional network, and the blend between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub schema_mode: SchemaMode,
    pub weights: EnsembleWeights,
    pub gbdt: GbdtModel,
    pub mlp: Option<MlpModel>,
}

impl EnsembleModel {
    pub fn new(
        schema_mode: SchemaMode,
        gbdt: GbdtModel,
        mlp: Option<MlpModel>,
        weights: EnsembleWeights,
    ) -> Result<EnsembleModel, EnsembleError> {
        EnsembleWeights::new(weights.w_gbdt)?;
        if let Some(m) = &mlp {
            if m.feature_names != gbdt.feature_names {
                return Err(EnsembleError::ComponentMismatch {
                    gbdt: gbdt.n_features(),
                    mlp: m.n_features(),
                });
            }
        }
        Ok(EnsembleModel { format: ENSEMBLE_FORMAT.into(), schema_mode, weights, gbdt, mlp })
    }

    /// Same components, different blend.
    pub fn with_weights(mut self, weights: EnsembleWeights) -> Result<EnsembleModel, EnsembleError> {
        EnsembleWeights::new(weights.w_gbdt)?;
        self.weights = weights;
        Ok(self)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.gbdt.feature_names
    }

    /// Blended stress probability per row. Without a network the tree
    /// probabilities pass through regardless of the weight.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, EnsembleError> {
        Ok(self.predict_parts(x)?.blended)
    }

    /// Component and blended probabilities in one pass.
    pub fn predict_parts(&self, x: &[Vec<f64>]) -> Result<BlendedPrediction, EnsembleError> {
        let gbdt = self.gbdt.predict_proba(x)?;
        match &self.mlp {
            None => Ok(BlendedPrediction { blended: gbdt.clone(), gbdt, mlp: None }),
            Some(m) => {
                let mlp = m.predict_proba(x)?;
                let blended = blend(&gbdt, &mlp, self.weights);
                Ok(BlendedPrediction { gbdt, mlp: Some(mlp), blended })
            }
        }
    }

    pub fn to_json(&self) -> Result<String, EnsembleError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<EnsembleModel, EnsembleError> {
        let model: EnsembleModel = serde_json::from_str(text)?;
        if model.format != ENSEMBLE_FORMAT {
            return Err(EnsembleError::FormatTag { found: model.format });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| EnsembleError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<EnsembleModel, EnsembleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EnsembleError::Io { path: path.into(), source })?;
        EnsembleModel::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::GbdtParams;
    use crate::mlp::TrainConfig;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn separable(n_per_class: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_per_class {
            x.push(vec![i as f64 * 0.01, 0.5]);
            y.push(0);
            x.push(vec![8.0 + i as f64 * 0.01, 0.5]);
            y.push(1);
        }
        (x, y)
    }

    fn fitted_pair() -> (GbdtModel, MlpModel, Vec<Vec<f64>>, Vec<u8>) {
        let (x, y) = separable(30);
        let gbdt = GbdtModel::fit(
            &x,
            &y,
            &names(2),
            &GbdtParams { n_rounds: 10, ..GbdtParams::default() },
        )
        .unwrap();
        let mlp = MlpModel::fit(
            &x,
            &y,
            &names(2),
            &TrainConfig { max_epochs: 40, batch_size: 16, ..TrainConfig::default() },
        )
        .unwrap();
        (gbdt, mlp, x, y)
    }

    #[test]
    fn blend_is_the_weighted_mean() {
        let w = EnsembleWeights::new(0.6).unwrap();
        assert!((w.w_mlp() - 0.4).abs() < 1e-15);
        let policy = WeightPolicy::Fixed { weights: w };
        let blended = ensemble_predict(&[0.8, 1.0], &[0.5, 0.0], &policy, 0).unwrap();
        assert!((blended[0] - 0.68).abs() < 1e-15);
        assert!((blended[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn mismatched_streams_are_rejected() {
        let policy = WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt: 0.5 } };
        assert!(matches!(
            ensemble_predict(&[0.5, 0.5], &[0.5], &policy, 0),
            Err(EnsembleError::LengthMismatch { gbdt: 2, mlp: 1 })
        ));
    }

    #[test]
    fn length_rule_is_resolved_inside_the_blend() {
        let policy = WeightPolicy::ByLength {
            threshold_s: 960,
            long: EnsembleWeights { w_gbdt: 0.4 },
            short: EnsembleWeights { w_gbdt: 0.7 },
        };
        // A 1000-second recording exceeds the threshold: long weights.
        let long = ensemble_predict(&[1.0], &[0.0], &policy, 1000).unwrap();
        assert!((long[0] - 0.4).abs() < 1e-15);
        let short = ensemble_predict(&[1.0], &[0.0], &policy, 960).unwrap();
        assert!((short[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn unit_weights_pass_inputs_through_exactly() {
        let p_gbdt = [0.123456789, 0.987654321, 0.5];
        let p_mlp = [0.3, 0.6, 0.9];
        let w1 = WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt: 1.0 } };
        assert_eq!(ensemble_predict(&p_gbdt, &p_mlp, &w1, 0).unwrap(), p_gbdt.to_vec());
        let w0 = WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt: 0.0 } };
        assert_eq!(ensemble_predict(&p_gbdt, &p_mlp, &w0, 0).unwrap(), p_mlp.to_vec());
    }

    #[test]
    fn out_of_range_weights_are_rejected() {
        assert!(matches!(EnsembleWeights::new(-0.1), Err(EnsembleError::WeightOutOfRange { .. })));
        assert!(matches!(EnsembleWeights::new(1.1), Err(EnsembleError::WeightOutOfRange { .. })));
        assert!(EnsembleWeights::new(0.0).is_ok());
        assert!(EnsembleWeights::new(1.0).is_ok());
    }

    #[test]
    fn degenerate_weights_reproduce_the_components() {
        let (gbdt, mlp, x, _) = fitted_pair();
        let p_gbdt = gbdt.predict_proba(&x).unwrap();
        let p_mlp = mlp.predict_proba(&x).unwrap();

        let all_trees = EnsembleModel::new(
            SchemaMode::Raw2,
            gbdt.clone(),
            Some(mlp.clone()),
            EnsembleWeights { w_gbdt: 1.0 },
        )
        .unwrap();
        assert_eq!(all_trees.predict_proba(&x).unwrap(), p_gbdt);

        let all_net = all_trees.clone().with_weights(EnsembleWeights { w_gbdt: 0.0 }).unwrap();
        assert_eq!(all_net.predict_proba(&x).unwrap(), p_mlp);
    }

    #[test]
    fn missing_network_passes_trees_through() {
        let (gbdt, _, x, _) = fitted_pair();
        let p_gbdt = gbdt.predict_proba(&x).unwrap();
        let model =
            EnsembleModel::new(SchemaMode::Raw2, gbdt, None, EnsembleWeights { w_gbdt: 0.3 })
                .unwrap();
        let parts = model.predict_parts(&x).unwrap();
        assert_eq!(parts.blended, p_gbdt);
        assert!(parts.mlp.is_none());
    }

    #[test]
    fn component_feature_mismatch_is_rejected() {
        let (gbdt, _, _, _) = fitted_pair();
        let (x, y) = separable(10);
        let x3: Vec<Vec<f64>> = x.iter().map(|r| [r.clone(), vec![0.0]].concat()).collect();
        let mlp3 = MlpModel::fit(
            &x3,
            &y,
            &names(3),
            &TrainConfig { max_epochs: 5, ..TrainConfig::default() },
        )
        .unwrap();
        assert!(matches!(
            EnsembleModel::new(
                SchemaMode::Raw2,
                gbdt,
                Some(mlp3),
                EnsembleWeights { w_gbdt: 0.5 }
            ),
            Err(EnsembleError::ComponentMismatch { gbdt: 2, mlp: 3 })
        ));
    }

    #[test]
    fn length_policy_switches_strictly_above_threshold() {
        let policy = WeightPolicy::ByLength {
            threshold_s: 960,
            long: EnsembleWeights { w_gbdt: 0.4 },
            short: EnsembleWeights { w_gbdt: 0.7 },
        };
        assert_eq!(policy.resolve(960).w_gbdt, 0.7);
        assert_eq!(policy.resolve(961).w_gbdt, 0.4);
        assert_eq!(policy.resolve(0).w_gbdt, 0.7);
        let fixed = WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt: 0.6 } };
        assert_eq!(fixed.resolve(10_000).w_gbdt, 0.6);
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (gbdt, mlp, x, _) = fitted_pair();
        let model =
            EnsembleModel::new(SchemaMode::Raw2, gbdt, Some(mlp), EnsembleWeights { w_gbdt: 0.6 })
                .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ensemble.json");
        model.save(&path).unwrap();
        let reloaded = EnsembleModel::load(&path).unwrap();
        assert_eq!(model, reloaded);
        assert_eq!(model.predict_proba(&x).unwrap(), reloaded.predict_proba(&x).unwrap());

        let doctored = model.to_json().unwrap().replace(ENSEMBLE_FORMAT, "other");
        assert!(matches!(EnsembleModel::from_json(&doctored), Err(EnsembleError::FormatTag { .. })));
    }
}
