//! Gradient-boosted decision trees for binary classification.
//!
//! Second-order boosting on the logistic loss: each round fits a regression
//! tree to the per-row gradient/Hessian pair `g = w(p - y)`, `h = w·p(1-p)`
//! (with `w` the positive-class weight), using exact greedy splits over
//! presorted feature values. Split gain is
//! `½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]`, leaf weights are
//! `−η·G/(H+λ)`, and rows with a missing (NaN) feature value always take the
//! left branch. Thresholds sit halfway between adjacent distinct values so
//! the learned trees are insensitive to within-gap perturbations.
//!
//! Training starts from a weighted log-odds base score, optionally
//! early-stops on a validation set, and records per-round losses so the
//! descent is auditable. Models serialize to a tagged JSON document.

use crate::util::{derive_seed, sigmoid};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Tag identifying the JSON model document.
pub const GBDT_FORMAT: &str = "gbdt-logistic-v1";

/// Probability clip used by the log-loss, mirroring the network trainer.
const P_CLIP: f64 = 1e-7;

#[derive(Debug, thiserror::Error)]
pub enum GbdtError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training labels contain a single class only")]
    SingleClassTraining,
    #[error("row {row} has {got} features, expected {expected}")]
    FeatureCountMismatch { row: usize, expected: usize, got: usize },
    #[error("labels must be 0 or 1, found {value}")]
    LabelOutOfDomain { value: u8 },
    #[error("invalid parameter: {detail}")]
    InvalidParams { detail: String },
    #[error("model document has format {found:?}, expected {GBDT_FORMAT:?}")]
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

/// Boosting hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    /// Shrinkage applied to every leaf weight.
    pub eta: f64,
    pub max_depth: usize,
    /// Minimum Hessian mass `H` required on each side of a split.
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Fraction of rows drawn (without replacement) per tree.
    pub subsample: f64,
    /// Upper bound on boosting rounds.
    pub n_rounds: usize,
    /// Stop after this many rounds without a new validation-loss minimum.
    pub early_stopping_rounds: usize,
    /// Multiplier on the gradient/Hessian of positive rows.
    pub scale_pos_weight: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> GbdtParams {
        GbdtParams {
            eta: 0.3,
            max_depth: 6,
            min_child_weight: 1.0,
            lambda: 1.0,
            subsample: 1.0,
            n_rounds: 5000,
            early_stopping_rounds: 3,
            scale_pos_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<(), GbdtError> {
        let bad = |detail: &str| Err(GbdtError::InvalidParams { detail: detail.into() });
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must be in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if self.lambda < 0.0 || self.min_child_weight < 0.0 {
            return bad("lambda and min_child_weight must be non-negative");
        }
        if self.n_rounds == 0 {
            return bad("n_rounds must be positive");
        }
        if self.scale_pos_weight <= 0.0 || !self.scale_pos_weight.is_finite() {
            return bad("scale_pos_weight must be positive and finite");
        }
        Ok(())
    }
}

/// One node of a flattened tree. Internal nodes route `value < threshold`
/// to `left`; missing (NaN) values follow `default_left`, the direction that
/// scored better at fit time. Leaves carry the additive `value` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub is_leaf: bool,
    pub feature: u32,
    pub threshold: f64,
    pub default_left: bool,
    pub left: u32,
    pub right: u32,
    /// Leaf weight; 0 on internal nodes.
    pub value: f64,
    /// Split gain; 0 on leaves.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Margin contribution for one row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf {
                return n.value;
            }
            let v = row[n.feature as usize];
            let go_left = if v.is_nan() { n.default_left } else { v < n.threshold };
            i = if go_left { n.left as usize } else { n.right as usize };
        }
    }
}

/// Per-round loss trace kept inside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Weighted train log-loss after each round (entry 0 = base score only).
    pub train_logloss: Vec<f64>,
    /// Unweighted validation log-loss indexed by tree count (entry 0 = base
    /// score only), when a validation set was given.
    pub valid_logloss: Vec<f64>,
    /// Number of trees kept after early stopping.
    pub best_round: usize,
}

/// A fitted boosted-tree classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub params: GbdtParams,
    pub feature_names: Vec<String>,
    /// Initial margin (weighted log-odds of the training labels).
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub history: TrainHistory,
}

/// A candidate split: routes `value < threshold` left and missing values to
/// the `default_left` side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub default_left: bool,
    pub gain: f64,
}

/// Gradient and Hessian of the weighted logistic loss at one margin.
pub fn logistic_grad_hess(margin: f64, label: u8, weight: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (weight * (p - f64::from(label)), weight * p * (1.0 - p))
}

/// Log-loss of clipped probabilities against 0/1 labels, with per-row
/// weights (pass 1.0 for the unweighted mean).
pub fn weighted_logloss(probs: &[f64], labels: &[u8], pos_weight: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(P_CLIP, 1.0 - P_CLIP);
        let w = if y == 1 { pos_weight } else { 1.0 };
        num += w * -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln());
        den += w;
    }
    num / den
}

/// Exact greedy split search over the given rows.
///
/// Features are scanned in order; for each, rows with a present value are
/// sorted and every boundary between distinct adjacent values is scored,
/// with missing-value rows tried on the left and then on the right — the
/// better direction is kept per candidate. Only strictly positive gains
/// count, and ties keep the first candidate found (feature order, then
/// missing-left before missing-right, then ascending threshold).
pub fn find_best_split(
    columns: &[Vec<f64>],
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    min_child_weight: f64,
) -> Option<Split> {
    let g_total: f64 = rows.iter().map(|&r| g[r]).sum();
    let h_total: f64 = rows.iter().map(|&r| h[r]).sum();
    let parent = g_total * g_total / (h_total + lambda);

    let mut best: Option<Split> = None;
    for (feature, col) in columns.iter().enumerate() {
        let mut present: Vec<usize> = rows.iter().copied().filter(|&r| !col[r].is_nan()).collect();
        if present.len() < 2 {
            continue;
        }
        present.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite"));

        let g_present: f64 = present.iter().map(|&r| g[r]).sum();
        let h_present: f64 = present.iter().map(|&r| h[r]).sum();
        let g_missing = g_total - g_present;
        let h_missing = h_total - h_present;
        let has_missing = present.len() < rows.len();

        for missing_left in [true, false] {
            if !missing_left && !has_missing {
                break; // both directions coincide without missing rows
            }
            let mut g_left = if missing_left { g_missing } else { 0.0 };
            let mut h_left = if missing_left { h_missing } else { 0.0 };
            for i in 0..present.len() - 1 {
                g_left += g[present[i]];
                h_left += h[present[i]];
                let (va, vb) = (col[present[i]], col[present[i + 1]]);
                if va == vb {
                    continue;
                }
                let h_right = h_total - h_left;
                if h_left < min_child_weight || h_right < min_child_weight {
                    continue;
                }
                let g_right = g_total - g_left;
                let gain = 0.5
                    * (g_left * g_left / (h_left + lambda)
                        + g_right * g_right / (h_right + lambda)
                        - parent);
                if gain <= 0.0 {
                    continue;
                }
                if best.is_none_or(|b| gain > b.gain) {
                    // Midpoint, nudged up to vb if rounding collapsed it onto
                    // va, so `value < threshold` keeps va on the left.
                    let mut threshold = va + (vb - va) / 2.0;
                    if threshold <= va {
                        threshold = vb;
                    }
                    best = Some(Split { feature, threshold, default_left: missing_left, gain });
                }
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbdtParams,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `rows`; returns its node index, or None when
    /// the root itself has no valid split (callers treat that as the end of
    /// boosting rather than emitting a constant tree).
    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let split = if depth < self.params.max_depth {
            find_best_split(
                self.columns,
                rows,
                self.g,
                self.h,
                self.params.lambda,
                self.params.min_child_weight,
            )
        } else {
            None
        };
        let Some(split) = split else {
            return self.push_leaf(rows);
        };

        let col = &self.columns[split.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
            if col[r].is_nan() {
                split.default_left
            } else {
                col[r] < split.threshold
            }
        });

        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            is_leaf: false,
            feature: split.feature as u32,
            threshold: split.threshold,
            default_left: split.default_left,
            left: 0,
            right: 0,
            value: 0.0,
            gain: split.gain,
        });
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        self.nodes[idx].left = left as u32;
        self.nodes[idx].right = right as u32;
        idx
    }

    fn push_leaf(&mut self, rows: &[usize]) -> usize {
        let g_sum: f64 = rows.iter().map(|&r| self.g[r]).sum();
        let h_sum: f64 = rows.iter().map(|&r| self.h[r]).sum();
        let value = -self.params.eta * g_sum / (h_sum + self.params.lambda);
        self.nodes.push(TreeNode {
            is_leaf: true,
            feature: 0,
            threshold: 0.0,
            default_left: true,
            left: 0,
            right: 0,
            value,
            gain: 0.0,
        });
        self.nodes.len() - 1
    }
}

fn validate_xy(x: &[Vec<f64>], y: &[u8], n_features: usize) -> Result<(), GbdtError> {
    if x.is_empty() || x.len() != y.len() {
        return Err(GbdtError::EmptyTrainingSet);
    }
    for (row, values) in x.iter().enumerate() {
        if values.len() != n_features {
            return Err(GbdtError::FeatureCountMismatch {
                row,
                expected: n_features,
                got: values.len(),
            });
        }
    }
    if let Some(&value) = y.iter().find(|&&l| l > 1) {
        return Err(GbdtError::LabelOutOfDomain { value });
    }
    Ok(())
}

fn transpose(x: &[Vec<f64>], n_features: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(x.len()); n_features];
    for row in x {
        for (c, &v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    cols
}

/// Weighted log-odds of the positive class, clipped away from ±∞.
fn weighted_base_score(y: &[u8], pos_weight: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &label in y {
        let w = if label == 1 { pos_weight } else { 1.0 };
        num += w * f64::from(label);
        den += w;
    }
    let p = (num / den).clamp(P_CLIP, 1.0 - P_CLIP);
    (p / (1.0 - p)).ln()
}

/// First `k` of `0..n` after a partial shuffle, in ascending order.
fn subsample_rows(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((fraction * n as f64).floor() as usize).max(1);
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        all.swap(i, j);
    }
    let mut picked = all[..k].to_vec();
    picked.sort_unstable();
    picked
}

impl GbdtModel {
    /// Trains for exactly `params.n_rounds` rounds (fewer if a tree finds no
    /// valid split).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        feature_names: &[String],
        params: &GbdtParams,
    ) -> Result<GbdtModel, GbdtError> {
        GbdtModel::fit_impl(x, y, None, feature_names, params)
    }

    /// Trains with early stopping: boosting stops once the validation
    /// log-loss has not improved for `early_stopping_rounds` rounds, and the
    /// model keeps only the trees up to the best round.
    pub fn fit_with_valid(
        x: &[Vec<f64>],
        y: &[u8],
        x_valid: &[Vec<f64>],
        y_valid: &[u8],
        feature_names: &[String],
        params: &GbdtParams,
    ) -> Result<GbdtModel, GbdtError> {
        GbdtModel::fit_impl(x, y, Some((x_valid, y_valid)), feature_names, params)
    }

    fn fit_impl(
        x: &[Vec<f64>],
        y: &[u8],
        valid: Option<(&[Vec<f64>], &[u8])>,
        feature_names: &[String],
        params: &GbdtParams,
    ) -> Result<GbdtModel, GbdtError> {
        params.validate()?;
        let n_features = feature_names.len();
        validate_xy(x, y, n_features)?;
        if y.iter().all(|&l| l == y[0]) {
            return Err(GbdtError::SingleClassTraining);
        }
        if let Some((xv, yv)) = valid {
            validate_xy(xv, yv, n_features)?;
        }

        let columns = transpose(x, n_features);
        let n = x.len();
        let w = params.scale_pos_weight;
        let base_score = weighted_base_score(y, w);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        let mut margins = vec![base_score; n];
        let mut valid_margins = valid.map(|(xv, _)| vec![base_score; xv.len()]);
        let mut trees: Vec<Tree> = Vec::new();
        let mut history = TrainHistory {
            train_logloss: vec![train_loss(&margins, y, w)],
            valid_logloss: Vec::new(),
            best_round: 0,
        };
        let mut best_valid = f64::INFINITY;
        let mut since_best = 0usize;
        if let (Some(vm), Some((_, yv))) = (valid_margins.as_ref(), valid) {
            // The base score is a legitimate stopping point: if no tree ever
            // improves on it, early stopping keeps zero trees.
            let probs: Vec<f64> = vm.iter().map(|&m| sigmoid(m)).collect();
            best_valid = weighted_logloss(&probs, yv, 1.0);
            history.valid_logloss.push(best_valid);
        }

        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..params.n_rounds {
            for i in 0..n {
                let (gi, hi) = logistic_grad_hess(margins[i], y[i], w);
                g[i] = gi;
                h[i] = hi;
            }
            let rows = subsample_rows(n, params.subsample, &mut rng);
            let mut builder =
                TreeBuilder { columns: &columns, g: &g, h: &h, params, nodes: Vec::new() };
            if find_best_split(&columns, &rows, &g, &h, params.lambda, params.min_child_weight)
                .is_none()
            {
                // Nothing left to separate; adding constant trees would only
                // drift the margin, so boosting ends here.
                break;
            }
            builder.build(&rows, 0);
            let tree = Tree { nodes: builder.nodes };

            for (m, row) in margins.iter_mut().zip(x) {
                *m += tree.predict_row(row);
            }
            history.train_logloss.push(train_loss(&margins, y, w));
            trees.push(tree);

            if let (Some(vm), Some((xv, yv))) = (valid_margins.as_mut(), valid) {
                let t = trees.last().expect("just pushed");
                for (m, row) in vm.iter_mut().zip(xv) {
                    *m += t.predict_row(row);
                }
                let probs: Vec<f64> = vm.iter().map(|&m| sigmoid(m)).collect();
                let loss = weighted_logloss(&probs, yv, 1.0);
                history.valid_logloss.push(loss);
                if loss < best_valid {
                    best_valid = loss;
                    history.best_round = trees.len();
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= params.early_stopping_rounds {
                        break;
                    }
                }
            } else {
                history.best_round = trees.len();
            }
        }

        if valid.is_some() {
            trees.truncate(history.best_round);
        }
        Ok(GbdtModel {
            format: GBDT_FORMAT.into(),
            params: params.clone(),
            feature_names: feature_names.to_vec(),
            base_score,
            trees,
            history,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Raw additive margin (log-odds) per row.
    pub fn predict_margin(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, GbdtError> {
        x.iter()
            .enumerate()
            .map(|(row, values)| {
                if values.len() != self.n_features() {
                    return Err(GbdtError::FeatureCountMismatch {
                        row,
                        expected: self.n_features(),
                        got: values.len(),
                    });
                }
                Ok(self.base_score + self.trees.iter().map(|t| t.predict_row(values)).sum::<f64>())
            })
            .collect()
    }

    /// Stress probability per row, kept one epsilon inside the open
    /// interval (0, 1) so extreme margins never saturate to exactly 0 or 1.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, GbdtError> {
        Ok(self
            .predict_margin(x)?
            .into_iter()
            .map(|m| sigmoid(m).clamp(f64::EPSILON, 1.0 - f64::EPSILON))
            .collect())
    }

    /// Total split gain per feature, in `feature_names` order.
    pub fn importance_gain(&self) -> Vec<(String, f64)> {
        let mut totals = vec![0.0f64; self.n_features()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if !node.is_leaf {
                    totals[node.feature as usize] += node.gain;
                }
            }
        }
        self.feature_names.iter().cloned().zip(totals).collect()
    }

    pub fn to_json(&self) -> Result<String, GbdtError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<GbdtModel, GbdtError> {
        let model: GbdtModel = serde_json::from_str(text)?;
        if model.format != GBDT_FORMAT {
            return Err(GbdtError::FormatTag { found: model.format });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), GbdtError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| GbdtError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<GbdtModel, GbdtError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GbdtError::Io { path: path.into(), source })?;
        GbdtModel::from_json(&text)
    }
}

fn train_loss(margins: &[f64], y: &[u8], pos_weight: f64) -> f64 {
    let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
    weighted_logloss(&probs, y, pos_weight)
}

/// One grid-search candidate with its cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: GbdtParams,
    pub mean_valid_logloss: f64,
    pub mean_best_round: f64,
}

/// Outcome of a grid search: the winning parameters plus the full table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: GbdtParams,
    /// Round count for the final refit (mean best round across folds).
    pub refit_rounds: usize,
    pub rows: Vec<GridRow>,
}

/// The default hyper-parameter grid: learning rate × depth × child weight ×
/// subsample, 36 combinations. Weighting, seeding and stopping settings are
/// inherited from `base`.
pub fn default_grid(base: &GbdtParams) -> Vec<GbdtParams> {
    let mut grid = Vec::with_capacity(36);
    for &eta in &[0.05, 0.1, 0.3] {
        for &max_depth in &[3usize, 4, 6] {
            for &min_child_weight in &[1.0, 5.0] {
                for &lambda in &[1.0] {
                    for &subsample in &[0.8, 1.0] {
                        grid.push(GbdtParams {
                            eta,
                            max_depth,
                            min_child_weight,
                            lambda,
                            subsample,
                            ..base.clone()
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Splits `0..labels.len()` into `k` stratified folds: each class is
/// shuffled separately and dealt round-robin, so fold class ratios track the
/// whole set. Folds are returned as sorted index lists.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in [0u8, 1] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        for (offset, i) in idx.into_iter().enumerate() {
            folds[offset % k].push(i);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

/// Stratified holdout split: `(train, test)` index lists with roughly
/// `test_fraction` of each class in the test part.
pub fn stratified_split(labels: &[u8], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend(idx.drain(..n_test.min(idx.len())));
        train.extend(idx);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// K-fold cross-validated grid search.
///
/// Every candidate is scored by its mean validation log-loss at the early
/// stopping optimum, averaged over stratified folds. Ties go to the
/// candidate needing fewer rounds, then to grid order.
pub fn grid_search(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: &[String],
    grid: &[GbdtParams],
    k: usize,
    seed: u64,
) -> Result<GridSearchOutcome, GbdtError> {
    if x.len() < k || k < 2 {
        return Err(GbdtError::InvalidParams {
            detail: format!("{k}-fold search needs at least {k} rows, got {}", x.len()),
        });
    }
    if grid.is_empty() {
        return Err(GbdtError::InvalidParams { detail: "empty grid".into() });
    }
    let folds = stratified_kfold(y, k, derive_seed(seed, 0));
    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, f64)> = None; // (grid index, loss, rounds)

    for (gi, candidate) in grid.iter().enumerate() {
        let mut loss_sum = 0.0;
        let mut round_sum = 0.0;
        let mut n_folds = 0usize;
        for (fi, fold) in folds.iter().enumerate() {
            if fold.is_empty() || fold.len() == x.len() {
                continue;
            }
            let in_fold: Vec<bool> = {
                let mut mask = vec![false; x.len()];
                for &i in fold {
                    mask[i] = true;
                }
                mask
            };
            let (mut xt, mut yt, mut xv, mut yv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if in_fold[i] {
                    xv.push(x[i].clone());
                    yv.push(y[i]);
                } else {
                    xt.push(x[i].clone());
                    yt.push(y[i]);
                }
            }
            let params = GbdtParams {
                seed: derive_seed(seed, (gi * folds.len() + fi + 1) as u64),
                ..candidate.clone()
            };
            let model = GbdtModel::fit_with_valid(&xt, &yt, &xv, &yv, feature_names, &params)?;
            let best_loss = model
                .history
                .valid_logloss
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            loss_sum += best_loss;
            round_sum += model.history.best_round as f64;
            n_folds += 1;
        }
        if n_folds == 0 {
            return Err(GbdtError::InvalidParams { detail: "all folds were degenerate".into() });
        }
        let mean_loss = loss_sum / n_folds as f64;
        let mean_rounds = round_sum / n_folds as f64;
        rows.push(GridRow {
            params: candidate.clone(),
            mean_valid_logloss: mean_loss,
            mean_best_round: mean_rounds,
        });
        let better = match best {
            None => true,
            Some((_, bl, br)) => mean_loss < bl || (mean_loss == bl && mean_rounds < br),
        };
        if better {
            best = Some((gi, mean_loss, mean_rounds));
        }
    }

    let (gi, _, mean_rounds) = best.expect("grid is non-empty");
    Ok(GridSearchOutcome {
        best: grid[gi].clone(),
        refit_rounds: (mean_rounds.round() as usize).max(1),
        rows,
    })
}

/// Default-grid search followed by a full-data refit at the chosen
/// parameters and round count.
pub fn fit_with_grid(
    x: &[Vec<f64>],
    y: &[u8],
    feature_names: &[String],
    base: &GbdtParams,
    k: usize,
    seed: u64,
) -> Result<(GbdtModel, GridSearchOutcome), GbdtError> {
    let outcome = grid_search(x, y, feature_names, &default_grid(base), k, seed)?;
    let params = GbdtParams {
        n_rounds: outcome.refit_rounds,
        seed: derive_seed(seed, u64::MAX),
        ..outcome.best.clone()
    };
    let model = GbdtModel::fit(x, y, feature_names, &params)?;
    Ok((model, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    /// Two well-separated blobs in one dimension.
    fn separable(n_per_class: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_per_class {
            x.push(vec![i as f64 * 0.01, 1.0]);
            y.push(0);
            x.push(vec![10.0 + i as f64 * 0.01, 1.0]);
            y.push(1);
        }
        (x, y)
    }

    #[test]
    fn best_split_matches_hand_computation() {
        // Four rows, one feature: values 1,2,3,4 with g = [-1,-1,1,1], h = 1.
        // The 2|3 boundary puts all negatives left: gain
        // ½(4/(2+1) + 4/(2+1) - 0/(4+1)) = 4/3.
        let columns = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let rows = [0, 1, 2, 3];
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let split = find_best_split(&columns, &rows, &g, &h, 1.0, 0.0).unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 2.5);
        assert!((split.gain - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_child_weight_blocks_unbalanced_splits() {
        let columns = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let rows = [0, 1, 2, 3];
        let g = [-5.0, 1.0, 1.0, 1.0];
        let h = [1.0; 4];
        // mcw 2 forbids the 1|234 cut, so the best is at 2|34.
        let split = find_best_split(&columns, &rows, &g, &h, 1.0, 2.0).unwrap();
        assert_eq!(split.threshold, 2.5);
        // mcw 3 forbids everything.
        assert!(find_best_split(&columns, &rows, &g, &h, 1.0, 3.0).is_none());
    }

    #[test]
    fn constant_feature_has_no_split() {
        let columns = vec![vec![2.0; 6]];
        let rows = [0, 1, 2, 3, 4, 5];
        let g = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let h = [1.0; 6];
        assert!(find_best_split(&columns, &rows, &g, &h, 1.0, 0.0).is_none());
    }

    #[test]
    fn missing_direction_is_learned() {
        let columns = vec![vec![f64::NAN, f64::NAN, 1.0, 2.0]];
        let rows = [0, 1, 2, 3];
        let h = [1.0; 4];
        // NaN rows share the sign of the left child: left wins.
        // gain = ½(49/4 + 49/2 − 0/5) = 18.375 with {NaN, NaN, 1} | {2}.
        let g = [-3.0, -3.0, -1.0, 7.0];
        let split = find_best_split(&columns, &rows, &g, &h, 1.0, 0.0).unwrap();
        assert_eq!((split.threshold, split.default_left), (1.5, true));
        assert!((split.gain - 18.375).abs() < 1e-12);
        // Flipped signs: the same gain now needs the NaN rows on the right.
        let g = [3.0, 3.0, -7.0, 1.0];
        let split = find_best_split(&columns, &rows, &g, &h, 1.0, 0.0).unwrap();
        assert_eq!((split.threshold, split.default_left), (1.5, false));
        assert!((split.gain - 18.375).abs() < 1e-12);
    }

    #[test]
    fn prediction_routes_missing_by_default_direction() {
        let node = |default_left| TreeNode {
            is_leaf: false,
            feature: 0,
            threshold: 1.5,
            default_left,
            left: 1,
            right: 2,
            value: 0.0,
            gain: 0.0,
        };
        let leaf = |value| TreeNode {
            is_leaf: true,
            feature: 0,
            threshold: 0.0,
            default_left: true,
            left: 0,
            right: 0,
            value,
            gain: 0.0,
        };
        let tree = Tree { nodes: vec![node(true), leaf(-1.0), leaf(1.0)] };
        assert_eq!(tree.predict_row(&[f64::NAN]), -1.0);
        assert_eq!(tree.predict_row(&[0.0]), -1.0);
        assert_eq!(tree.predict_row(&[5.0]), 1.0);
        let tree = Tree { nodes: vec![node(false), leaf(-1.0), leaf(1.0)] };
        assert_eq!(tree.predict_row(&[f64::NAN]), 1.0);
        assert_eq!(tree.predict_row(&[0.0]), -1.0);
    }

    #[test]
    fn single_class_training_is_rejected() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(matches!(
            GbdtModel::fit(&x, &[1, 1, 1], &names(1), &GbdtParams::default()),
            Err(GbdtError::SingleClassTraining)
        ));
    }

    #[test]
    fn weighting_equals_duplication_at_the_statistics_level() {
        // One positive duplicated d times at weight 1 contributes the same
        // first/second-order sums as a single copy at weight d.
        for margin in [-1.3, 0.0, 0.7] {
            for d in [2u32, 5] {
                let (g1, h1) = logistic_grad_hess(margin, 1, f64::from(d));
                let (gd, hd) = logistic_grad_hess(margin, 1, 1.0);
                assert!((g1 - f64::from(d) * gd).abs() < 1e-9);
                assert!((h1 - f64::from(d) * hd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gap_data_yields_depth_one_tree_in_the_gap() {
        // x < 0 → label 0, x ≥ 0 → label 1, 100 rows with a gap at zero.
        let x: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i as f64 - 49.5) / 10.0])
            .collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] >= 0.0)).collect();
        let params = GbdtParams { n_rounds: 1, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(1), &params).unwrap();
        let tree = &model.trees[0];
        // One internal node, two leaves, threshold inside the central gap.
        assert_eq!(tree.nodes.iter().filter(|n| !n.is_leaf).count(), 1);
        let root = &tree.nodes[0];
        assert!(root.threshold > -0.05 && root.threshold < 0.05);
        let probs = model.predict_proba(&x).unwrap();
        for (p, &label) in probs.iter().zip(&y) {
            assert_eq!(u8::from(*p >= 0.5), label);
        }
    }

    #[test]
    fn probabilities_stay_strictly_inside_unit_interval() {
        let (x, y) = separable(50);
        let params = GbdtParams { n_rounds: 60, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        for p in model.predict_proba(&x).unwrap() {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn separable_data_is_fit_perfectly() {
        let (x, y) = separable(50);
        let params = GbdtParams { n_rounds: 20, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let probs = model.predict_proba(&x).unwrap();
        for (p, &label) in probs.iter().zip(&y) {
            assert_eq!(u8::from(*p >= 0.5), label);
        }
    }

    #[test]
    fn train_loss_descends_on_training_data() {
        let (x, y) = separable(30);
        let params = GbdtParams { n_rounds: 15, eta: 0.1, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let hist = &model.history.train_logloss;
        assert!(hist.len() >= 2);
        for pair in hist.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss rose: {} -> {}", pair[0], pair[1]);
        }
        assert!(hist.last().unwrap() < &hist[0]);
    }

    #[test]
    fn base_score_is_weighted_log_odds() {
        // 3 positives, 1 negative, w+ = 2: p = 6/7.
        let y = [1, 1, 1, 0];
        let x: Vec<Vec<f64>> = y.iter().map(|&l| vec![f64::from(l)]).collect();
        let params = GbdtParams { n_rounds: 1, scale_pos_weight: 2.0, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(1), &params).unwrap();
        let p: f64 = 6.0 / 7.0;
        assert!((model.base_score - (p / (1.0 - p)).ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_features_yield_base_only_model() {
        let x = vec![vec![1.0, 2.0]; 10];
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let model = GbdtModel::fit(&x, &y, &names(2), &GbdtParams::default()).unwrap();
        assert!(model.trees.is_empty());
        let probs = model.predict_proba(&x).unwrap();
        for p in probs {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn early_stopping_truncates_to_best_round() {
        let (x, y) = separable(40);
        // Validation set that disagrees with training: loss soon stops improving.
        let xv = vec![vec![0.2, 1.0], vec![10.2, 1.0]];
        let yv = [1u8, 0];
        let params = GbdtParams { n_rounds: 50, ..GbdtParams::default() };
        let model = GbdtModel::fit_with_valid(&x, &y, &xv, &yv, &names(2), &params).unwrap();
        assert_eq!(model.trees.len(), model.history.best_round);
        assert!(model.trees.len() < 50);
        let best = model.history.valid_logloss.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(model.history.valid_logloss[model.history.best_round], best);
    }

    #[test]
    fn fits_are_deterministic() {
        let (x, y) = separable(30);
        let params =
            GbdtParams { n_rounds: 10, subsample: 0.8, seed: 9, ..GbdtParams::default() };
        let a = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let b = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = separable(25);
        let params = GbdtParams { n_rounds: 8, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.json");
        model.save(&path).unwrap();
        let reloaded = GbdtModel::load(&path).unwrap();
        assert_eq!(model, reloaded);
        assert_eq!(model.predict_proba(&x).unwrap(), reloaded.predict_proba(&x).unwrap());
    }

    #[test]
    fn format_tag_is_enforced() {
        let (x, y) = separable(5);
        let params = GbdtParams { n_rounds: 2, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let doctored = model.to_json().unwrap().replace(GBDT_FORMAT, "something-else");
        assert!(matches!(GbdtModel::from_json(&doctored), Err(GbdtError::FormatTag { .. })));
    }

    #[test]
    fn importance_lands_on_the_informative_feature() {
        let (x, y) = separable(40);
        let params = GbdtParams { n_rounds: 10, ..GbdtParams::default() };
        let model = GbdtModel::fit(&x, &y, &names(2), &params).unwrap();
        let imp = model.importance_gain();
        assert!(imp[0].1 > 0.0);
        assert_eq!(imp[1].1, 0.0); // the constant column never splits
    }

    #[test]
    fn kfold_is_a_stratified_partition() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 5 == 0)).collect();
        let folds = stratified_kfold(&labels, 10, 3);
        let mut seen = [false; 100];
        for fold in &folds {
            assert_eq!(fold.len(), 10);
            assert_eq!(fold.iter().filter(|&&i| labels[i] == 1).count(), 2);
            for &i in fold {
                assert!(!seen[i], "index {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn split_fractions_are_respected() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
        let (train, test) = stratified_split(&labels, 0.3, 11);
        assert_eq!(train.len() + test.len(), 100);
        // Per class, rounded half-up: 25 × 0.3 → 8 positives, 75 × 0.3 → 23.
        assert_eq!(test.len(), 31);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 8);
        let (t2, v2) = stratified_split(&labels, 0.3, 11);
        assert_eq!((train, test), (t2, v2));
    }

    #[test]
    fn grid_search_scores_every_candidate() {
        let (x, y) = separable(30);
        let base = GbdtParams { n_rounds: 30, ..GbdtParams::default() };
        let grid = default_grid(&base);
        let outcome = grid_search(&x, &y, &names(2), &grid, 5, 21).unwrap();
        assert_eq!(outcome.rows.len(), 36);
        assert!(outcome.refit_rounds >= 1);
        assert!(outcome.rows.iter().all(|r| r.mean_valid_logloss.is_finite()));
        let again = grid_search(&x, &y, &names(2), &grid, 5, 21).unwrap();
        assert_eq!(outcome, again);
    }

    #[test]
    fn grid_of_one_point_selects_that_point() {
        let (x, y) = separable(30);
        let only = GbdtParams { max_depth: 2, n_rounds: 15, ..GbdtParams::default() };
        let outcome = grid_search(&x, &y, &names(2), std::slice::from_ref(&only), 3, 5).unwrap();
        assert_eq!(outcome.rows.len(), 1);
        assert_eq!(outcome.best, only);
        assert!(matches!(
            grid_search(&x, &y, &names(2), &[], 3, 5),
            Err(GbdtError::InvalidParams { .. })
        ));
    }

    #[test]
    fn duplicate_grid_points_tie_to_the_earlier_entry() {
        let (x, y) = separable(30);
        let a = GbdtParams { max_depth: 3, n_rounds: 10, ..GbdtParams::default() };
        let grid = [a.clone(), a.clone()];
        let outcome = grid_search(&x, &y, &names(2), &grid, 3, 5).unwrap();
        assert_eq!(outcome.rows[0].mean_valid_logloss, outcome.rows[1].mean_valid_logloss);
        assert_eq!(outcome.rows[0].params, outcome.best);
    }
}
