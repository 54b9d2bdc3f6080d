//! Per-dataset descriptive statistics over aligned series.

use super::IngestError;
use crate::series::{SourceDataset, UniformSeries};
use crate::util::{mean, sample_sd};
use std::collections::BTreeMap;
use std::path::Path;

/// Pooled biomarker statistics and class balance for one dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DatasetStats {
    pub n_subjects: usize,
    pub n_samples: usize,
    pub eda_mean: f64,
    pub eda_sd: f64,
    pub hr_mean: f64,
    pub hr_sd: f64,
    pub pct_nonstressed: f64,
    pub pct_stressed: f64,
}

/// Summary table, one row per source dataset in enum order.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SummaryStats {
    pub per_dataset: Vec<(SourceDataset, DatasetStats)>,
}

/// Pools every sample of every series, grouped by source dataset.
/// Standard deviations use the sample (n−1) estimator.
pub fn dataset_summary(series: &[UniformSeries]) -> Result<SummaryStats, IngestError> {
    if series.is_empty() {
        return Err(IngestError::EmptyInput { detail: "dataset summary needs at least one series".into() });
    }
    let mut groups: BTreeMap<SourceDataset, Vec<&UniformSeries>> = BTreeMap::new();
    for s in series {
        groups.entry(s.source_dataset).or_default().push(s);
    }

    let mut per_dataset = Vec::with_capacity(groups.len());
    for (source, members) in groups {
        let mut eda = Vec::new();
        let mut hr = Vec::new();
        let mut stressed = 0usize;
        for m in &members {
            eda.extend_from_slice(&m.eda_us);
            hr.extend_from_slice(&m.hr_bpm);
            stressed += m.label.iter().filter(|&&l| l == 1).count();
        }
        let n = eda.len();
        if n == 0 {
            continue;
        }
        per_dataset.push((
            source,
            DatasetStats {
                n_subjects: members.len(),
                n_samples: n,
                eda_mean: mean(&eda),
                eda_sd: sample_sd(&eda),
                hr_mean: mean(&hr),
                hr_sd: sample_sd(&hr),
                pct_nonstressed: 100.0 * (n - stressed) as f64 / n as f64,
                pct_stressed: 100.0 * stressed as f64 / n as f64,
            },
        ));
    }
    Ok(SummaryStats { per_dataset })
}

/// CSV rendering of the summary table.
pub fn write_summary_csv(summary: &SummaryStats, path: &Path) -> Result<(), IngestError> {
    let mut out = String::from(
        "dataset,n_subjects,n_samples,eda_mean,eda_sd,hr_mean,hr_sd,pct_nonstressed,pct_stressed\n",
    );
    for (source, s) in &summary.per_dataset {
        out.push_str(&format!(
            "{source},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            s.n_subjects, s.n_samples, s.eda_mean, s.eda_sd, s.hr_mean, s.hr_sd,
            s.pct_nonstressed, s.pct_stressed
        ));
    }
    std::fs::write(path, out).map_err(|source| IngestError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_sd_and_full_baseline() {
        let s = UniformSeries::new(
            "a",
            vec![1.0; 50],
            vec![60.0; 50],
            vec![0; 50],
            SourceDataset::Fixture,
        )
        .unwrap();
        let sum = dataset_summary(std::slice::from_ref(&s)).unwrap();
        assert_eq!(sum.per_dataset.len(), 1);
        let (_, stats) = &sum.per_dataset[0];
        assert_eq!(stats.eda_mean, 1.0);
        assert_eq!(stats.eda_sd, 0.0);
        assert_eq!(stats.hr_mean, 60.0);
        assert_eq!(stats.hr_sd, 0.0);
        assert_eq!(stats.pct_nonstressed, 100.0);
        assert_eq!(stats.pct_stressed, 0.0);
    }

    /// Welford's online algorithm as an independent oracle for the pooled
    /// mean and sample SD.
    fn welford(values: impl Iterator<Item = f64>) -> (f64, f64) {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let sd = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
        (mean, sd)
    }

    #[test]
    fn pooled_stats_match_welford_oracle() {
        let series: Vec<UniformSeries> = (0..3)
            .map(|k| {
                let n = 40 + 7 * k;
                UniformSeries::new(
                    format!("s{k}"),
                    (0..n).map(|i| 1.0 + (i as f64 * 0.37 + k as f64).sin()).collect(),
                    (0..n).map(|i| 70.0 + (i as f64 * 0.11 + k as f64).cos() * 9.0).collect(),
                    (0..n).map(|i| u8::from((i + k) % 3 == 0)).collect(),
                    SourceDataset::Fixture,
                )
                .unwrap()
            })
            .collect();
        let sum = dataset_summary(&series).unwrap();
        let (_, stats) = &sum.per_dataset[0];

        let (em, esd) = welford(series.iter().flat_map(|s| s.eda_us.iter().copied()));
        let (hm, hsd) = welford(series.iter().flat_map(|s| s.hr_bpm.iter().copied()));
        assert!((stats.eda_mean - em).abs() < 1e-9);
        assert!((stats.eda_sd - esd).abs() < 1e-9);
        assert!((stats.hr_mean - hm).abs() < 1e-9);
        assert!((stats.hr_sd - hsd).abs() < 1e-9);

        let total: usize = series.iter().map(|s| s.len()).sum();
        let stressed: usize = series
            .iter()
            .flat_map(|s| s.label.iter())
            .filter(|&&l| l == 1)
            .count();
        assert!((stats.pct_stressed - 100.0 * stressed as f64 / total as f64).abs() < 1e-9);
        assert!((stats.pct_stressed + stats.pct_nonstressed - 100.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(dataset_summary(&[]), Err(IngestError::EmptyInput { .. })));
    }

    #[test]
    fn groups_by_source_dataset() {
        let mk = |src| {
            UniformSeries::new("x", vec![1.0; 5], vec![70.0; 5], vec![0; 5], src).unwrap()
        };
        let sum = dataset_summary(&[
            mk(SourceDataset::Wesad),
            mk(SourceDataset::Swell),
            mk(SourceDataset::Wesad),
        ])
        .unwrap();
        assert_eq!(sum.per_dataset.len(), 2);
        assert_eq!(sum.per_dataset[0].0, SourceDataset::Swell);
        assert_eq!(sum.per_dataset[1].1.n_subjects, 2);
    }
}
