//! A small feed-forward network trained with Adam.
//!
//! The architecture follows the input width `n`: three affine layers sized
//! `n → n → ⌈n/2⌉ → 1` with ReLU between them and a linear output. Inputs
//! are z-scored with statistics frozen from the training split (a constant
//! feature standardizes to zero). Training minimizes either the mean squared
//! error of the raw output against 0/1 labels or the cross-entropy of its
//! sigmoid, in shuffled mini-batches, and keeps the weights from the best
//! validation epoch. Predictions are clipped to [0, 1] either way.
//!
//! `loss_and_grad` / `params_flat` expose the exact objective and its
//! analytic gradient so tests can compare against finite differences.

use crate::util::{gauss, sigmoid};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tag identifying the JSON model document.
pub const MLP_FORMAT: &str = "mlp-v1";

/// Probability clip inside the cross-entropy logarithms.
const P_CLIP: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum MlpError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("row {row} has {got} features, expected {expected}")]
    FeatureCountMismatch { row: usize, expected: usize, got: usize },
    #[error("labels must be 0 or 1, found {value}")]
    LabelOutOfDomain { value: u8 },
    #[error("non-finite feature value in row {row}")]
    NonFiniteFeature { row: usize },
    #[error("training loss became non-finite at epoch {epoch} ({loss}); try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("invalid config: {detail}")]
    InvalidConfig { detail: String },
    #[error("model document has format {found:?}, expected {MLP_FORMAT:?}")]
    FormatTag { found: String },
    #[error("io error at {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error of the linear output against 0/1 labels.
    SquaredError,
    /// Cross-entropy of the sigmoid output.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            loss: LossKind::SquaredError,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 512,
            max_epochs: 200,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        let bad = |detail: &str| Err(MlpError::InvalidConfig { detail: detail.into() });
        // NaN fails every comparison, so it is rejected here too.
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must be in [0, 1)");
        }
        Ok(())
    }
}

/// Per-feature z-score transform with statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation; 0 marks a constant feature, which maps to 0.
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>], n_features: usize) -> Standardizer {
        let n = x.len() as f64;
        let mut mean = vec![0.0; n_features];
        for row in x {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut sd = vec![0.0; n_features];
        if x.len() > 1 {
            for row in x {
                for ((s, &v), &m) in sd.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut sd {
                *s = (*s / (n - 1.0)).sqrt();
            }
        }
        Standardizer { mean, sd }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((&v, &m), &s)| if s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }
}

/// One dense layer; `w[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Affine {
    fn zeros(n_out: usize, n_in: usize) -> Affine {
        Affine { w: vec![vec![0.0; n_in]; n_out], b: vec![0.0; n_out] }
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, &b)| b + row.iter().zip(input).map(|(&w, &x)| w * x).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochHistory {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// Epoch whose weights the model kept (0-based).
    pub best_epoch: usize,
}

/// A fitted network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format: String,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    /// Three layers: `n → n`, `n → ⌈n/2⌉`, `⌈n/2⌉ → 1`.
    pub layers: Vec<Affine>,
    pub history: EpochHistory,
}


fn layer_sizes(n_features: usize) -> [usize; 4] {
    [n_features, n_features, n_features.div_ceil(2), 1]
}

fn init_layers(n_features: usize, rng: &mut ChaCha8Rng) -> Vec<Affine> {
    let sizes = layer_sizes(n_features);
    sizes
        .windows(2)
        .map(|pair| {
            let (n_in, n_out) = (pair[0], pair[1]);
            // He initialization for the ReLU stack; biases start at zero.
            let scale = (2.0 / n_in as f64).sqrt();
            Affine {
                w: (0..n_out)
                    .map(|_| (0..n_in).map(|_| scale * gauss(rng)).collect())
                    .collect(),
                b: vec![0.0; n_out],
            }
        })
        .collect()
}

fn validate_xy(x: &[Vec<f64>], y: &[u8], n_features: usize) -> Result<(), MlpError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(MlpError::EmptyTrainingSet);
    }
    for (row, values) in x.iter().enumerate() {
        if values.len() != n_features {
            return Err(MlpError::FeatureCountMismatch {
                row,
                expected: n_features,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MlpError::NonFiniteFeature { row });
        }
    }
    if let Some(&value) = y.iter().find(|&&l| l > 1) {
        return Err(MlpError::LabelOutOfDomain { value });
    }
    Ok(())
}

impl MlpModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Trains on the full data without early stopping.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        feature_names: &[String],
        config: &TrainConfig,
    ) -> Result<MlpModel, MlpError> {
        MlpModel::fit_impl(x, y, None, feature_names, config)
    }

    /// Trains with early stopping on the validation loss and restores the
    /// weights of the best epoch.
    pub fn fit_with_valid(
        x: &[Vec<f64>],
        y: &[u8],
        x_valid: &[Vec<f64>],
        y_valid: &[u8],
        feature_names: &[String],
        config: &TrainConfig,
    ) -> Result<MlpModel, MlpError> {
        MlpModel::fit_impl(x, y, Some((x_valid, y_valid)), feature_names, config)
    }

    fn fit_impl(
        x: &[Vec<f64>],
        y: &[u8],
        valid: Option<(&[Vec<f64>], &[u8])>,
        feature_names: &[String],
        config: &TrainConfig,
    ) -> Result<MlpModel, MlpError> {
        config.validate()?;
        let n_features = feature_names.len();
        validate_xy(x, y, n_features)?;
        if let Some((xv, yv)) = valid {
            validate_xy(xv, yv, n_features)?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let standardizer = Standardizer::fit(x, n_features);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| standardizer.apply_row(r)).collect();
        let xvs: Option<Vec<Vec<f64>>> =
            valid.map(|(xv, _)| xv.iter().map(|r| standardizer.apply_row(r)).collect());

        let mut model = MlpModel {
            format: MLP_FORMAT.into(),
            config: config.clone(),
            feature_names: feature_names.to_vec(),
            standardizer,
            layers: init_layers(n_features, &mut rng),
            history: EpochHistory { train_loss: Vec::new(), valid_loss: Vec::new(), best_epoch: 0 },
        };

        let n_params = model.params_flat().len();
        let mut adam_m = vec![0.0; n_params];
        let mut adam_v = vec![0.0; n_params];
        let mut step = 0u64;

        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut best_loss = f64::INFINITY;
        let mut best_params: Option<Vec<f64>> = None;
        let mut since_best = 0usize;

        for epoch in 0..config.max_epochs {
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for batch in order.chunks(config.batch_size) {
                let (_, grad) = model.batch_loss_grad(&xs, y, batch);
                step += 1;
                let mut params = model.params_flat();
                let bc1 = 1.0 - config.beta1.powi(step as i32);
                let bc2 = 1.0 - config.beta2.powi(step as i32);
                for i in 0..n_params {
                    adam_m[i] = config.beta1 * adam_m[i] + (1.0 - config.beta1) * grad[i];
                    adam_v[i] = config.beta2 * adam_v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                    let m_hat = adam_m[i] / bc1;
                    let v_hat = adam_v[i] / bc2;
                    params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
                }
                model.set_params_flat(&params);
            }

            let all: Vec<usize> = (0..xs.len()).collect();
            let (train_loss, _) = model.batch_loss_grad(&xs, y, &all);
            if !train_loss.is_finite() {
                return Err(MlpError::NonFiniteLoss { epoch, loss: train_loss });
            }
            model.history.train_loss.push(train_loss);

            let monitored = match (&xvs, valid) {
                (Some(xvs), Some((_, yv))) => {
                    let idx: Vec<usize> = (0..xvs.len()).collect();
                    let (vl, _) = model.batch_loss_grad(xvs, yv, &idx);
                    if !vl.is_finite() {
                        return Err(MlpError::NonFiniteLoss { epoch, loss: vl });
                    }
                    model.history.valid_loss.push(vl);
                    vl
                }
                _ => train_loss,
            };
            if monitored < best_loss {
                best_loss = monitored;
                best_params = Some(model.params_flat());
                model.history.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if valid.is_some() && since_best >= config.patience {
                    break;
                }
            }
        }
        if let Some(p) = best_params {
            model.set_params_flat(&p);
        }
        Ok(model)
    }

    /// Linear output of the network for one already-standardized row.
    fn forward_std(&self, row: &[f64]) -> f64 {
        let mut a = self.layers[0].apply(row);
        for v in &mut a {
            *v = v.max(0.0);
        }
        let mut a2 = self.layers[1].apply(&a);
        for v in &mut a2 {
            *v = v.max(0.0);
        }
        self.layers[2].apply(&a2)[0]
    }

    /// Stress probability per row, clipped to [0, 1].
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, MlpError> {
        x.iter()
            .enumerate()
            .map(|(row, values)| {
                if values.len() != self.n_features() {
                    return Err(MlpError::FeatureCountMismatch {
                        row,
                        expected: self.n_features(),
                        got: values.len(),
                    });
                }
                let z = self.forward_std(&self.standardizer.apply_row(values));
                Ok(match self.config.loss {
                    LossKind::SquaredError => z.clamp(0.0, 1.0),
                    LossKind::CrossEntropy => sigmoid(z),
                })
            })
            .collect()
    }

    /// Mean loss over raw (unstandardized) rows.
    pub fn loss(&self, x: &[Vec<f64>], y: &[u8]) -> f64 {
        let xs: Vec<Vec<f64>> = x.iter().map(|r| self.standardizer.apply_row(r)).collect();
        let idx: Vec<usize> = (0..xs.len()).collect();
        self.batch_loss_grad(&xs, y, &idx).0
    }

    /// Mean loss and its analytic gradient (in `params_flat` order) over raw
    /// rows — the exact objective a finite-difference probe should match.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[u8]) -> (f64, Vec<f64>) {
        let xs: Vec<Vec<f64>> = x.iter().map(|r| self.standardizer.apply_row(r)).collect();
        let idx: Vec<usize> = (0..xs.len()).collect();
        self.batch_loss_grad(&xs, y, &idx)
    }

    /// Mean loss and flat gradient over the given standardized rows.
    fn batch_loss_grad(&self, xs: &[Vec<f64>], y: &[u8], batch: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<Affine> = self
            .layers
            .iter()
            .map(|l| Affine::zeros(l.b.len(), l.w[0].len()))
            .collect();
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;

        for &i in batch {
            let a0 = &xs[i];
            let z1 = self.layers[0].apply(a0);
            let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
            let z2 = self.layers[1].apply(&a1);
            let a2: Vec<f64> = z2.iter().map(|&v| v.max(0.0)).collect();
            let z3 = self.layers[2].apply(&a2)[0];
            let target = f64::from(y[i]);

            // dz3 already carries the 1/|B| of the batch mean.
            let dz3 = match self.config.loss {
                LossKind::SquaredError => {
                    loss += scale * (z3 - target) * (z3 - target);
                    scale * 2.0 * (z3 - target)
                }
                LossKind::CrossEntropy => {
                    let p = sigmoid(z3);
                    let pc = p.clamp(P_CLIP, 1.0 - P_CLIP);
                    loss += scale * -(target * pc.ln() + (1.0 - target) * (1.0 - pc).ln());
                    scale * (p - target)
                }
            };

            for (j, &a) in a2.iter().enumerate() {
                grads[2].w[0][j] += dz3 * a;
            }
            grads[2].b[0] += dz3;

            let dz2: Vec<f64> = (0..a2.len())
                .map(|j| if z2[j] > 0.0 { self.layers[2].w[0][j] * dz3 } else { 0.0 })
                .collect();
            for (j, &d) in dz2.iter().enumerate() {
                for (g, &a) in grads[1].w[j].iter_mut().zip(&a1) {
                    *g += d * a;
                }
                grads[1].b[j] += d;
            }

            let dz1: Vec<f64> = (0..a1.len())
                .map(|j| {
                    if z1[j] > 0.0 {
                        dz2.iter().enumerate().map(|(k, &d)| self.layers[1].w[k][j] * d).sum()
                    } else {
                        0.0
                    }
                })
                .collect();
            for (j, &d) in dz1.iter().enumerate() {
                for (g, &a) in grads[0].w[j].iter_mut().zip(a0) {
                    *g += d * a;
                }
                grads[0].b[j] += d;
            }
        }

        let mut flat = Vec::new();
        for g in &grads {
            for row in &g.w {
                flat.extend_from_slice(row);
            }
            flat.extend_from_slice(&g.b);
        }
        (loss, flat)
    }

    /// All weights and biases as one vector, layer by layer (weights
    /// row-major, then biases).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for layer in &self.layers {
            for row in &layer.w {
                flat.extend_from_slice(row);
            }
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    /// Inverse of [`params_flat`](Self::params_flat).
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for row in &mut layer.w {
                for v in row {
                    *v = *it.next().expect("flat params too short");
                }
            }
            for v in &mut layer.b {
                *v = *it.next().expect("flat params too short");
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }

    pub fn to_json(&self) -> Result<String, MlpError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<MlpModel, MlpError> {
        let model: MlpModel = serde_json::from_str(text)?;
        if model.format != MLP_FORMAT {
            return Err(MlpError::FormatTag { found: model.format });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| MlpError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<MlpModel, MlpError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| MlpError::Io { path: path.into(), source })?;
        MlpModel::from_json(&text)
    }
}
