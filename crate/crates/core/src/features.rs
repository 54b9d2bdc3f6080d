//! Tumbling-window feature engineering over the 1 Hz grid.
//!
//! Three feature schemas feed the models:
//!
//! - `raw2` — the per-second `[eda, hr]` pair, bypassing windowing entirely;
//! - `full17` — every windowed statistic: mean, median, max, min, sample SD,
//!   sample variance, skewness and excess kurtosis per biomarker, plus the
//!   sample covariance of the two;
//! - `fe10` — the ten-feature engineered subset that ranked highest by split
//!   gain, dominated by HR statistics.
//!
//! Windows are tumbling (non-overlapping), cut independently inside each
//! contiguous run of a series so no window straddles a dropped gap; a short
//! tail is discarded. A window's label is the per-second majority, ties going
//! to stressed.
//!
//! In windowed schemas the bare names `eda`/`hr` denote the window **median**
//! of the raw biomarker — the representative raw value of the window — so the
//! engineered list projects losslessly out of `full17`.

use crate::series::UniformSeries;
use crate::util::{is_constant, mean};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Default tumbling window length in seconds.
pub const DEFAULT_WINDOW_S: usize = 25;

pub const RAW2_NAMES: [&str; 2] = ["eda", "hr"];

pub const ENGINEERED10_NAMES: [&str; 10] = [
    "hr", "hr_mean", "hr_min", "hr_max", "hr_sd", "hr_skew",
    "eda", "eda_mean", "eda_sd", "cov_eda_hr",
];

pub const FULL17_NAMES: [&str; 17] = [
    "eda_mean", "eda_median", "eda_max", "eda_min", "eda_sd", "eda_var", "eda_skew", "eda_kurt",
    "hr_mean", "hr_median", "hr_max", "hr_min", "hr_sd", "hr_var", "hr_skew", "hr_kurt",
    "cov_eda_hr",
];

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("window is empty")]
    EmptyWindow,
    #[error("feature {name:?} is not available in the source schema")]
    MissingFeature { name: String },
    #[error("schema mismatch: {detail}")]
    SchemaMismatch { detail: String },
    #[error("empty input: {detail}")]
    EmptyInput { detail: String },
    #[error("io error at {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which feature space a row lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    Raw2,
    Engineered10,
    Full17,
}

impl SchemaMode {
    pub fn parse(s: &str) -> Option<SchemaMode> {
        match s.to_ascii_lowercase().as_str() {
            "raw2" => Some(SchemaMode::Raw2),
            "fe10" | "engineered10" => Some(SchemaMode::Engineered10),
            "full17" => Some(SchemaMode::Full17),
            _ => None,
        }
    }
}

impl fmt::Display for SchemaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaMode::Raw2 => "raw2",
            SchemaMode::Engineered10 => "fe10",
            SchemaMode::Full17 => "full17",
        })
    }
}

/// Ordered feature names plus the window length that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub mode: SchemaMode,
    pub names: Vec<String>,
    /// Window length in seconds; 1 for the per-second raw schema.
    pub window_s: usize,
}

impl FeatureSchema {
    pub fn raw2() -> FeatureSchema {
        FeatureSchema {
            mode: SchemaMode::Raw2,
            names: RAW2_NAMES.iter().map(|s| s.to_string()).collect(),
            window_s: 1,
        }
    }

    pub fn engineered10() -> FeatureSchema {
        FeatureSchema {
            mode: SchemaMode::Engineered10,
            names: ENGINEERED10_NAMES.iter().map(|s| s.to_string()).collect(),
            window_s: DEFAULT_WINDOW_S,
        }
    }

    pub fn full17() -> FeatureSchema {
        FeatureSchema {
            mode: SchemaMode::Full17,
            names: FULL17_NAMES.iter().map(|s| s.to_string()).collect(),
            window_s: DEFAULT_WINDOW_S,
        }
    }

    pub fn for_mode(mode: SchemaMode) -> FeatureSchema {
        match mode {
            SchemaMode::Raw2 => FeatureSchema::raw2(),
            SchemaMode::Engineered10 => FeatureSchema::engineered10(),
            SchemaMode::Full17 => FeatureSchema::full17(),
        }
    }

    /// Replaces the engineered feature list with a custom selection; every
    /// name must resolve within the windowed feature space.
    pub fn engineered_custom(names: Vec<String>) -> Result<FeatureSchema, FeatureError> {
        for name in &names {
            if resolve_windowed_name(name).is_none() {
                return Err(FeatureError::MissingFeature { name: name.clone() });
            }
        }
        if names.is_empty() {
            return Err(FeatureError::EmptyInput { detail: "custom schema has no features".into() });
        }
        Ok(FeatureSchema { mode: SchemaMode::Engineered10, names, window_s: DEFAULT_WINDOW_S })
    }

    pub fn with_window(mut self, window_s: usize) -> FeatureSchema {
        if self.mode != SchemaMode::Raw2 {
            self.window_s = window_s.max(1);
        }
        self
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }
}

/// One model-ready row: a feature vector with provenance and its 0/1 label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subject_id: String,
    pub window_start_s: u32,
    pub values: Vec<f64>,
    pub label: u8,
}

/// A batch of rows that all share one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// CSV rendering: `subject_id,window_start_s,<one column per feature>,label`.
    /// Floats print in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,window_start_s");
        for name in &self.schema.names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",label\n");
        for row in &self.rows {
            out.push_str(&row.subject_id);
            out.push_str(&format!(",{}", row.window_start_s));
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", row.label));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_csv())
            .map_err(|source| FeatureError::Io { path: path.into(), source })
    }
}

/// A borrowed view of one tumbling window.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub subject_id: &'a str,
    pub start_s: u32,
    pub eda: &'a [f64],
    pub hr: &'a [f64],
    pub labels: &'a [u8],
}

/// Cuts tumbling windows of `window_s` seconds inside each contiguous run;
/// remainders shorter than the window are dropped.
pub fn tumble_windows(series: &UniformSeries, window_s: usize) -> Vec<Window<'_>> {
    let window_s = window_s.max(1);
    let mut out = Vec::new();
    for run in series.runs() {
        let mut start = run.start;
        while start + window_s <= run.end {
            out.push(Window {
                subject_id: &series.subject_id,
                start_s: series.t[start],
                eda: &series.eda_us[start..start + window_s],
                hr: &series.hr_bpm[start..start + window_s],
                labels: &series.label[start..start + window_s],
            });
            start += window_s;
        }
    }
    out
}

/// Computes the full windowed statistics vector (`full17` order).
///
/// Moments use the n-denominator central moments; SD, variance and covariance
/// use the sample (n−1) estimators. Constant channels and single-sample
/// windows yield exact zeros for spread, skewness and kurtosis — never NaN.
pub fn window_stats(w: &Window<'_>) -> Result<FeatureRow, FeatureError> {
    if w.eda.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let eda = channel_stats(w.eda);
    let hr = channel_stats(w.hr);
    let cov = sample_cov(w.eda, w.hr);

    let values = vec![
        eda.mean, eda.median, eda.max, eda.min, eda.sd, eda.var, eda.skew, eda.kurt,
        hr.mean, hr.median, hr.max, hr.min, hr.sd, hr.var, hr.skew, hr.kurt,
        cov,
    ];
    Ok(FeatureRow {
        subject_id: w.subject_id.to_string(),
        window_start_s: w.start_s,
        values,
        label: majority_label(w.labels),
    })
}

/// Per-second majority; exact ties classify as stressed.
pub fn majority_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    u8::from(ones * 2 >= labels.len())
}

struct ChannelStats {
    mean: f64,
    median: f64,
    max: f64,
    min: f64,
    sd: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

fn channel_stats(x: &[f64]) -> ChannelStats {
    let n = x.len() as f64;
    let m = mean(x);
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    let max = *sorted.last().expect("non-empty");
    let min = sorted[0];

    if x.len() < 2 || is_constant(x) {
        return ChannelStats { mean: m, median, max, min, sd: 0.0, var: 0.0, skew: 0.0, kurt: 0.0 };
    }

    let var = x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    let m2 = x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n;
    let m3 = x.iter().map(|&v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = x.iter().map(|&v| (v - m).powi(4)).sum::<f64>() / n;
    ChannelStats {
        mean: m,
        median,
        max,
        min,
        sd: var.sqrt(),
        var,
        skew: m3 / m2.powf(1.5),
        kurt: m4 / (m2 * m2) - 3.0,
    }
}

/// Sample covariance (n−1); 0 when either channel is constant or n < 2.
fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || is_constant(x) || is_constant(y) {
        return 0.0;
    }
    let mx = mean(x);
    let my = mean(y);
    x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

/// Maps a windowed feature name onto its canonical `full17` name.
/// Bare `eda`/`hr` are the window medians.
fn resolve_windowed_name(name: &str) -> Option<usize> {
    let canonical = match name {
        "eda" => "eda_median",
        "hr" => "hr_median",
        other => other,
    };
    FULL17_NAMES.iter().position(|&n| n == canonical)
}

/// Projects a row from one schema onto another.
///
/// Windowed schemas project freely among themselves as long as every target
/// feature is available; `raw2` can never be a projection target because its
/// per-second values are destroyed by windowing.
pub fn select_features(
    row: &FeatureRow,
    source: &FeatureSchema,
    target: &FeatureSchema,
) -> Result<FeatureRow, FeatureError> {
    if row.values.len() != source.n_features() {
        return Err(FeatureError::SchemaMismatch {
            detail: format!(
                "row has {} values but source schema {} expects {}",
                row.values.len(),
                source.mode,
                source.n_features()
            ),
        });
    }
    if source.mode == SchemaMode::Raw2 || target.mode == SchemaMode::Raw2 {
        if source.names == target.names {
            return Ok(row.clone());
        }
        return Err(FeatureError::MissingFeature {
            name: "raw per-second values are not recoverable from windows".into(),
        });
    }
    let values = target
        .names
        .iter()
        .map(|name| {
            let canonical = canonical_name(name);
            source
                .names
                .iter()
                .position(|n| canonical_name(n) == canonical)
                .map(|i| row.values[i])
                .ok_or_else(|| FeatureError::MissingFeature { name: name.clone() })
        })
        .collect::<Result<Vec<f64>, FeatureError>>()?;
    Ok(FeatureRow {
        subject_id: row.subject_id.clone(),
        window_start_s: row.window_start_s,
        values,
        label: row.label,
    })
}

fn canonical_name(name: &str) -> &str {
    match name {
        "eda" => "eda_median",
        "hr" => "hr_median",
        other => other,
    }
}

/// Featurizes every series under one schema.
///
/// `raw2` emits one row per second with that second's label; windowed schemas
/// tumble each run and project the statistics vector onto the schema.
/// Subjects are processed in parallel but emitted in input order.
pub fn featurize_dataset(
    series: &[UniformSeries],
    schema: &FeatureSchema,
) -> Result<FeatureMatrix, FeatureError> {
    let per_subject: Vec<Vec<FeatureRow>> = series
        .par_iter()
        .map(|s| featurize_one(s, schema))
        .collect::<Result<_, _>>()?;
    Ok(FeatureMatrix { schema: schema.clone(), rows: per_subject.into_iter().flatten().collect() })
}

fn featurize_one(series: &UniformSeries, schema: &FeatureSchema) -> Result<Vec<FeatureRow>, FeatureError> {
    match schema.mode {
        SchemaMode::Raw2 => Ok((0..series.len())
            .map(|i| FeatureRow {
                subject_id: series.subject_id.clone(),
                window_start_s: series.t[i],
                values: vec![series.eda_us[i], series.hr_bpm[i]],
                label: series.label[i],
            })
            .collect()),
        SchemaMode::Engineered10 | SchemaMode::Full17 => {
            let full = FeatureSchema::full17().with_window(schema.window_s);
            tumble_windows(series, schema.window_s)
                .iter()
                .map(|w| {
                    let row = window_stats(w)?;
                    if schema.names == full.names {
                        Ok(row)
                    } else {
                        select_features(&row, &full, schema)
                    }
                })
                .collect()
        }
    }
}

/// Writes a feature matrix as CSV: `subject_id,window_start_s,<names…>,label`.
pub fn write_feature_csv(matrix: &FeatureMatrix, path: &Path) -> Result<(), FeatureError> {
    let mut out = String::from("subject_id,window_start_s,");
    out.push_str(&matrix.schema.names.join(","));
    out.push_str(",label\n");
    for row in &matrix.rows {
        out.push_str(&row.subject_id);
        out.push_str(&format!(",{}", row.window_start_s));
        for v in &row.values {
            out.push_str(&format!(",{v:.9}"));
        }
        out.push_str(&format!(",{}\n", row.label));
    }
    std::fs::write(path, out).map_err(|source| FeatureError::Io { path: path.into(), source })
}

/// Reads a feature CSV back. The schema mode is recognized from the header
/// names; the window length is assumed to be the default for windowed modes.
pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io { path: path.into(), source })?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| FeatureError::SchemaMismatch {
        detail: format!("{}: file is empty", path.display()),
    })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[0] != "subject_id" || cols[1] != "window_start_s" || *cols.last().unwrap() != "label" {
        return Err(FeatureError::SchemaMismatch {
            detail: format!("{}: unrecognized feature header", path.display()),
        });
    }
    let names: Vec<String> = cols[2..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let schema = if names == RAW2_NAMES {
        FeatureSchema::raw2()
    } else if names == ENGINEERED10_NAMES {
        FeatureSchema::engineered10()
    } else if names == FULL17_NAMES {
        FeatureSchema::full17()
    } else {
        FeatureSchema::engineered_custom(names)?
    };

    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != schema.n_features() + 3 {
            return Err(FeatureError::SchemaMismatch {
                detail: format!("{}:{}: wrong column count", path.display(), idx + 2),
            });
        }
        let bad = |what: &str| FeatureError::SchemaMismatch {
            detail: format!("{}:{}: malformed {what}", path.display(), idx + 2),
        };
        let window_start_s: u32 = cols[1].parse().map_err(|_| bad("window_start_s"))?;
        let values = cols[2..cols.len() - 1]
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("feature value")))
            .collect::<Result<Vec<f64>, _>>()?;
        let label: u8 = match *cols.last().unwrap() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label")),
        };
        rows.push(FeatureRow { subject_id: cols[0].to_string(), window_start_s, values, label });
    }
    Ok(FeatureMatrix { schema, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SourceDataset;

    #[test]
    fn csv_lists_one_column_per_feature() {
        let matrix = FeatureMatrix {
            schema: FeatureSchema {
                mode: SchemaMode::Engineered10,
                names: vec!["a".into(), "b".into()],
                window_s: 25,
            },
            rows: vec![FeatureRow {
                subject_id: "s1".into(),
                window_start_s: 50,
                values: vec![0.1, 2.5],
                label: 1,
            }],
        };
        assert_eq!(matrix.to_csv(), "subject_id,window_start_s,a,b,label\ns1,50,0.1,2.5,1\n");
    }

    fn series(n: usize) -> UniformSeries {
        UniformSeries::new(
            "s1",
            (0..n).map(|i| 1.0 + (i as f64 * 0.31).sin()).collect(),
            (0..n).map(|i| 70.0 + (i as f64 * 0.17).cos() * 8.0).collect(),
            (0..n).map(|i| u8::from(i % 2 == 0)).collect(),
            SourceDataset::Fixture,
        )
        .unwrap()
    }

    #[test]
    fn window_counts_follow_floor_division() {
        assert_eq!(tumble_windows(&series(100), 25).len(), 4);
        assert_eq!(tumble_windows(&series(99), 25).len(), 3);
        assert_eq!(tumble_windows(&series(24), 25).len(), 0);
    }

    #[test]
    fn windows_never_straddle_run_gaps() {
        let s = UniformSeries::with_runs(
            "s1",
            vec![1.0; 80],
            vec![70.0; 80],
            vec![0; 80],
            SourceDataset::Fixture,
            vec![0, 30],
        )
        .unwrap();
        let windows = tumble_windows(&s, 25);
        assert_eq!(windows.len(), 3);
        assert_eq!(windows[0].start_s, 0);
        assert_eq!(windows[1].start_s, 30);
        assert_eq!(windows[2].start_s, 55);
    }

    #[test]
    fn constant_window_statistics_are_exact() {
        let eda = vec![2.0; 25];
        let hr = vec![70.0; 25];
        let labels = vec![0u8; 25];
        let w = Window { subject_id: "s", start_s: 0, eda: &eda, hr: &hr, labels: &labels };
        let row = window_stats(&w).unwrap();
        let schema = FeatureSchema::full17();
        let get = |name: &str| row.values[schema.names.iter().position(|n| n == name).unwrap()];
        for name in ["eda_mean", "eda_median", "eda_max", "eda_min"] {
            assert_eq!(get(name), 2.0);
        }
        for name in ["hr_mean", "hr_median", "hr_max", "hr_min"] {
            assert_eq!(get(name), 70.0);
        }
        for name in ["eda_sd", "eda_var", "eda_skew", "eda_kurt", "hr_sd", "hr_var", "hr_skew", "hr_kurt", "cov_eda_hr"] {
            assert_eq!(get(name), 0.0, "{name}");
        }
    }

    #[test]
    fn known_window_matches_hand_computation() {
        let eda = [1.0, 2.0, 3.0, 4.0];
        let hr = [2.0, 4.0, 6.0, 8.0];
        let labels = [0u8, 0, 1, 1];
        let w = Window { subject_id: "s", start_s: 0, eda: &eda, hr: &hr, labels: &labels };
        let row = window_stats(&w).unwrap();
        let schema = FeatureSchema::full17();
        let get = |name: &str| row.values[schema.names.iter().position(|n| n == name).unwrap()];
        assert!((get("eda_mean") - 2.5).abs() < 1e-12);
        assert!((get("eda_var") - 5.0 / 3.0).abs() < 1e-12);
        assert!((get("cov_eda_hr") - 10.0 / 3.0).abs() < 1e-12);
        assert!((get("eda_median") - 2.5).abs() < 1e-12);
        // Symmetric values: no skew; uniform-ish: negative excess kurtosis.
        assert!(get("eda_skew").abs() < 1e-12);
        assert!(get("eda_kurt") < 0.0);
        // Tie between 0s and 1s goes to stressed.
        assert_eq!(row.label, 1);
    }

    #[test]
    fn majority_label_examples() {
        let mut labels = vec![1u8; 13];
        labels.extend(vec![0u8; 12]);
        assert_eq!(majority_label(&labels), 1);
        let mut labels = vec![1u8; 12];
        labels.extend(vec![0u8; 13]);
        assert_eq!(majority_label(&labels), 0);
    }

    #[test]
    fn full17_projects_to_engineered10() {
        let windows_src = series(25);
        let w = tumble_windows(&windows_src, 25);
        let row = window_stats(&w[0]).unwrap();
        let full = FeatureSchema::full17();
        let e10 = FeatureSchema::engineered10();
        let projected = select_features(&row, &full, &e10).unwrap();
        assert_eq!(projected.values.len(), 10);
        // Bare names are the window medians.
        let hr_median = row.values[full.names.iter().position(|n| n == "hr_median").unwrap()];
        assert_eq!(projected.values[0], hr_median);
        // Projection is idempotent.
        let again = select_features(&projected, &e10, &e10).unwrap();
        assert_eq!(again, projected);
    }

    #[test]
    fn raw2_cannot_be_projected_from_windows() {
        let src = series(25);
        let w = tumble_windows(&src, 25);
        let row = window_stats(&w[0]).unwrap();
        let err = select_features(&row, &FeatureSchema::full17(), &FeatureSchema::raw2()).unwrap_err();
        assert!(matches!(err, FeatureError::MissingFeature { .. }));
    }

    #[test]
    fn featurize_raw2_emits_one_row_per_second() {
        let s = series(30);
        let m = featurize_dataset(std::slice::from_ref(&s), &FeatureSchema::raw2()).unwrap();
        assert_eq!(m.rows.len(), 30);
        assert_eq!(m.rows[7].values, vec![s.eda_us[7], s.hr_bpm[7]]);
        assert_eq!(m.rows[7].label, s.label[7]);
    }

    #[test]
    fn featurize_window_count_matches_run_arithmetic() {
        let s = UniformSeries::with_runs(
            "s1",
            vec![1.0; 130],
            vec![70.0; 130],
            vec![0; 130],
            SourceDataset::Fixture,
            vec![0, 60],
        )
        .unwrap();
        let m = featurize_dataset(std::slice::from_ref(&s), &FeatureSchema::engineered10()).unwrap();
        // floor(60/25) + floor(70/25) = 2 + 2
        assert_eq!(m.rows.len(), 4);
        assert!(m.rows.iter().all(|r| r.values.len() == 10));
    }

    #[test]
    fn feature_csv_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.csv");
        let m = featurize_dataset(&[series(100)], &FeatureSchema::engineered10()).unwrap();
        write_feature_csv(&m, &path).unwrap();
        let back = read_feature_csv(&path).unwrap();
        assert_eq!(back.schema.names, m.schema.names);
        assert_eq!(back.rows.len(), m.rows.len());
        for (a, b) in m.rows.iter().zip(&back.rows) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn custom_engineered_names_are_validated() {
        assert!(FeatureSchema::engineered_custom(vec!["hr".into(), "eda_var".into()]).is_ok());
        assert!(FeatureSchema::engineered_custom(vec!["bogus".into()]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Brute-force recomputation with independently written formulas.
        fn oracle(x: &[f64]) -> (f64, f64, f64, f64, f64, f64, f64, f64) {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let mut s = x.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if s.len() % 2 == 1 {
                s[s.len() / 2]
            } else {
                0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
            };
            let constant = s[0] == s[s.len() - 1];
            if x.len() < 2 || constant {
                return (mean, median, s[s.len() - 1], s[0], 0.0, 0.0, 0.0, 0.0);
            }
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            (mean, median, s[s.len() - 1], s[0], var.sqrt(), var, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        }

        fn window_values() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..60).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-10.0f64..10.0, n),
                    proptest::collection::vec(30.0f64..200.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn stats_match_brute_force((eda, hr) in window_values()) {
                let labels = vec![0u8; eda.len()];
                let w = Window { subject_id: "p", start_s: 0, eda: &eda, hr: &hr, labels: &labels };
                let row = window_stats(&w).unwrap();
                let (em, emed, emax, emin, esd, evar, eskew, ekurt) = oracle(&eda);
                let expect = [em, emed, emax, emin, esd, evar, eskew, ekurt];
                for (i, e) in expect.iter().enumerate() {
                    prop_assert!((row.values[i] - e).abs() < 1e-9, "feature {i}");
                }
                for v in &row.values {
                    prop_assert!(v.is_finite());
                }
                // Order statistics are consistent.
                prop_assert!(row.values[3] <= row.values[1] && row.values[1] <= row.values[2]);
                // var = sd^2
                prop_assert!((row.values[4] * row.values[4] - row.values[5]).abs() < 1e-9);
            }

            #[test]
            fn cov_of_identical_channels_is_variance((eda, _) in window_values()) {
                let labels = vec![0u8; eda.len()];
                let w = Window { subject_id: "p", start_s: 0, eda: &eda, hr: &eda, labels: &labels };
                let row = window_stats(&w).unwrap();
                // cov(x, x) == var(x)
                prop_assert!((row.values[16] - row.values[5]).abs() < 1e-9);
            }

            #[test]
            fn windows_partition_each_run(n in 1usize..200, w in 1usize..40) {
                let s = UniformSeries::new(
                    "p",
                    vec![1.0; n],
                    vec![70.0; n],
                    vec![0; n],
                    SourceDataset::Fixture,
                )
                .unwrap();
                let windows = tumble_windows(&s, w);
                prop_assert_eq!(windows.len(), n / w);
                for (i, win) in windows.iter().enumerate() {
                    prop_assert_eq!(win.start_s as usize, i * w);
                    prop_assert_eq!(win.eda.len(), w);
                }
            }
        }
    }
}
