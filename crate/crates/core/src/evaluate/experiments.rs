//! The numbered experiment configurations and their runner.
//!
//! The ten experiments form a fixed, versioned table: which model, which
//! feature schema, which datasets train and which validate, which blend
//! weights, whether training rows are balanced or synthesized first, and how
//! many repetitions to aggregate. [`run_experiment`] executes one row of
//! that table against whatever datasets the caller has loaded and is fully
//! reproducible from the master seed.

use super::loso::{run_loso, subject_ids, Trainer};
use super::{
    classify, Confusion, DatasetOutcome, EvalError, EvalReport, Metrics, SubjectOutcome,
    ValidationScheme,
};
use crate::ensemble::{EnsembleWeights, WeightPolicy};
use crate::features::{featurize_dataset, FeatureRow, FeatureSchema, SchemaMode};
use crate::gbdt::GbdtParams;
use crate::mlp::TrainConfig;
use crate::series::{SourceDataset, UniformSeries};
use crate::synthesis::{
    build_segment_pool, build_synthetic_dataset, class_weight, resample_balance, BalanceMode,
    SubjectLayout, DEFAULT_SEGMENT_S,
};
use crate::util::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// The four-dataset 99-subject merge used by the LOSO experiments.
pub const STRESS_DATA: [SourceDataset; 4] = [
    SourceDataset::Neuro,
    SourceDataset::Wesad,
    SourceDataset::Swell,
    SourceDataset::Ubfc,
];

/// The five-dataset pool the synthesis experiments draw segments from.
pub const POOL_SOURCES: [SourceDataset; 5] = [
    SourceDataset::Neuro,
    SourceDataset::Wesad,
    SourceDataset::Swell,
    SourceDataset::Ubfc,
    SourceDataset::Exam,
];

/// [`STRESS_DATA`] without WESAD, for the WESAD-holdout experiments.
pub const STRESS_DATA_MINUS_WESAD: [SourceDataset; 3] =
    [SourceDataset::Neuro, SourceDataset::Swell, SourceDataset::Ubfc];

/// [`POOL_SOURCES`] without WESAD.
pub const POOL_SOURCES_MINUS_WESAD: [SourceDataset; 4] = [
    SourceDataset::Neuro,
    SourceDataset::Swell,
    SourceDataset::Ubfc,
    SourceDataset::Exam,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    Ensemble,
}

/// How many synthetic subjects to draw, and their block layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub layout: SubjectLayout,
    pub n_subjects: usize,
}

/// One immutable row of the experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: u8,
    pub title: &'static str,
    pub model: ModelKind,
    pub schema: SchemaMode,
    pub scheme: ValidationScheme,
    /// Datasets providing training material (or pool material when
    /// `synthesis` is set).
    pub train: &'static [SourceDataset],
    /// Datasets scored against; empty for LOSO, which validates within
    /// `train`.
    pub validation: &'static [SourceDataset],
    pub policy: Option<WeightPolicy>,
    pub synthesis: Option<SynthesisPlan>,
    pub balancing: Option<BalanceMode>,
    pub iterations: u32,
}

fn fixed(w_gbdt: f64) -> Option<WeightPolicy> {
    Some(WeightPolicy::Fixed { weights: EnsembleWeights { w_gbdt } })
}

/// The full experiment table. Immutable: tests pin its contents.
pub fn experiment_table() -> Vec<ExperimentSpec> {
    let base = ExperimentSpec {
        id: 0,
        title: "",
        model: ModelKind::Gbdt,
        schema: SchemaMode::Raw2,
        scheme: ValidationScheme::HoldoutDatasets,
        train: &[SourceDataset::Swell],
        validation: &[SourceDataset::Neuro, SourceDataset::Wesad],
        policy: None,
        synthesis: None,
        balancing: None,
        iterations: 1,
    };
    vec![
        ExperimentSpec { id: 1, title: "trees, cross-dataset transfer, raw signals", ..base.clone() },
        ExperimentSpec {
            id: 2,
            title: "trees, cross-dataset transfer, windowed features",
            schema: SchemaMode::Engineered10,
            ..base.clone()
        },
        ExperimentSpec {
            id: 3,
            title: "trees, merged-data LOSO, raw signals",
            scheme: ValidationScheme::Loso,
            train: &STRESS_DATA,
            validation: &[],
            ..base.clone()
        },
        ExperimentSpec {
            id: 4,
            title: "trees, merged-data LOSO, windowed features",
            schema: SchemaMode::Engineered10,
            scheme: ValidationScheme::Loso,
            train: &STRESS_DATA,
            validation: &[],
            ..base.clone()
        },
        ExperimentSpec {
            id: 5,
            title: "ensemble 60/40, cross-dataset transfer, raw signals",
            model: ModelKind::Ensemble,
            policy: fixed(0.6),
            ..base.clone()
        },
        ExperimentSpec {
            id: 6,
            title: "ensemble 80/20, cross-dataset transfer, windowed features",
            model: ModelKind::Ensemble,
            schema: SchemaMode::Engineered10,
            policy: fixed(0.8),
            ..base.clone()
        },
        ExperimentSpec {
            id: 7,
            title: "ensemble, merged-data LOSO, duration-switched weights",
            model: ModelKind::Ensemble,
            schema: SchemaMode::Engineered10,
            scheme: ValidationScheme::Loso,
            train: &STRESS_DATA,
            validation: &[],
            policy: Some(WeightPolicy::ByLength {
                threshold_s: 960,
                long: EnsembleWeights { w_gbdt: 0.4 },
                short: EnsembleWeights { w_gbdt: 0.7 },
            }),
            ..base.clone()
        },
        ExperimentSpec {
            id: 8,
            title: "ensemble 30/70, WESAD holdout, balanced training",
            model: ModelKind::Ensemble,
            schema: SchemaMode::Engineered10,
            scheme: ValidationScheme::WesadHoldout,
            train: &STRESS_DATA_MINUS_WESAD,
            validation: &[SourceDataset::Wesad],
            policy: fixed(0.3),
            balancing: Some(BalanceMode::Both),
            ..base.clone()
        },
        ExperimentSpec {
            id: 9,
            title: "ensemble 60/40, synthesized subjects, LOSO",
            model: ModelKind::Ensemble,
            schema: SchemaMode::Engineered10,
            scheme: ValidationScheme::Loso,
            train: &POOL_SOURCES,
            validation: &[],
            policy: fixed(0.6),
            synthesis: Some(SynthesisPlan {
                layout: SubjectLayout { baseline_min: 6, stress_min: 6 },
                n_subjects: 200,
            }),
            ..base.clone()
        },
        ExperimentSpec {
            id: 10,
            title: "ensemble 45/55, synthesized training, WESAD holdout, 10 repeats",
            model: ModelKind::Ensemble,
            schema: SchemaMode::Engineered10,
            scheme: ValidationScheme::WesadHoldout,
            train: &POOL_SOURCES_MINUS_WESAD,
            validation: &[SourceDataset::Wesad],
            policy: fixed(0.45),
            synthesis: Some(SynthesisPlan {
                layout: SubjectLayout { baseline_min: 12, stress_min: 12 },
                n_subjects: 200,
            }),
            iterations: 10,
            ..base
        },
    ]
}

pub fn experiment_spec(id: u8) -> Option<ExperimentSpec> {
    experiment_table().into_iter().find(|s| s.id == id)
}

/// The datasets available to the runner.
#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    datasets: BTreeMap<SourceDataset, Vec<UniformSeries>>,
}

impl ExperimentData {
    pub fn new() -> ExperimentData {
        ExperimentData::default()
    }

    pub fn insert(&mut self, dataset: SourceDataset, series: Vec<UniformSeries>) {
        self.datasets.entry(dataset).or_default().extend(series);
    }

    pub fn get(&self, dataset: SourceDataset) -> Option<&[UniformSeries]> {
        self.datasets.get(&dataset).map(Vec::as_slice)
    }

    pub fn names(&self) -> Vec<String> {
        self.datasets.keys().map(|d| d.to_string()).collect()
    }

    /// Concatenates the wanted datasets in the order given. Merging more
    /// than one dataset namespaces subject ids as `dataset:subject` so LOSO
    /// grouping cannot collide across sources.
    pub fn gather(&self, wanted: &[SourceDataset]) -> Result<Vec<UniformSeries>, EvalError> {
        let missing: Vec<String> = wanted
            .iter()
            .filter(|d| self.datasets.get(d).is_none_or(|v| v.is_empty()))
            .map(|d| d.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(EvalError::MissingDataset { needed: missing });
        }
        let namespace = wanted.len() > 1;
        let mut out = Vec::new();
        for &d in wanted {
            for s in &self.datasets[&d] {
                let mut s = s.clone();
                if namespace {
                    s.subject_id = format!("{d}:{}", s.subject_id);
                }
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// One repetition's headline numbers, tracking each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: u32,
    pub gbdt_accuracy: f64,
    pub mlp_accuracy: f64,
    pub ensemble_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Aggregate over repeated runs: per-iteration rows plus mean/SD summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTable {
    pub rows: Vec<IterationRow>,
    pub mean_gbdt_accuracy: f64,
    pub mean_mlp_accuracy: f64,
    pub mean_ensemble_accuracy: f64,
    /// Sample standard deviation of the ensemble accuracy across iterations.
    pub sd_ensemble_accuracy: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub reports: Vec<EvalReport>,
}

impl IterationTable {
    fn from_rows(rows: Vec<IterationRow>, reports: Vec<EvalReport>) -> IterationTable {
        let n = rows.len() as f64;
        let mean = |f: fn(&IterationRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let mean_ensemble_accuracy = mean(|r| r.ensemble_accuracy);
        let sd_ensemble_accuracy = if rows.len() < 2 {
            0.0
        } else {
            (rows
                .iter()
                .map(|r| (r.ensemble_accuracy - mean_ensemble_accuracy).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        };
        IterationTable {
            mean_gbdt_accuracy: mean(|r| r.gbdt_accuracy),
            mean_mlp_accuracy: mean(|r| r.mlp_accuracy),
            mean_ensemble_accuracy,
            sd_ensemble_accuracy,
            mean_precision: mean(|r| r.precision),
            mean_recall: mean(|r| r.recall),
            mean_f1: mean(|r| r.f1),
            rows,
            reports,
        }
    }
}

/// What [`run_experiment`] yields: one report, or a table of repetitions.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutcome {
    Single(EvalReport),
    Iterated(IterationTable),
}

impl ExperimentOutcome {
    /// The single report, or the first iteration's report.
    pub fn primary_report(&self) -> &EvalReport {
        match self {
            ExperimentOutcome::Single(r) => r,
            ExperimentOutcome::Iterated(t) => &t.reports[0],
        }
    }
}

/// Executes one experiment against the loaded datasets.
pub fn run_experiment(
    spec: &ExperimentSpec,
    data: &ExperimentData,
    seed: u64,
) -> Result<ExperimentOutcome, EvalError> {
    if spec.iterations <= 1 {
        let run = run_once(spec, data, seed)?;
        return Ok(ExperimentOutcome::Single(run.report));
    }
    let mut rows = Vec::with_capacity(spec.iterations as usize);
    let mut reports = Vec::with_capacity(spec.iterations as usize);
    for it in 0..spec.iterations {
        let run = run_once(spec, data, derive_seed(seed, 1000 + it as u64))?;
        rows.push(IterationRow {
            iteration: it + 1,
            gbdt_accuracy: run.gbdt_accuracy,
            mlp_accuracy: run.mlp_accuracy.unwrap_or(run.gbdt_accuracy),
            ensemble_accuracy: run.report.metrics.accuracy,
            precision: run.report.metrics.precision,
            recall: run.report.metrics.recall,
            f1: run.report.metrics.f1,
        });
        reports.push(run.report);
    }
    Ok(ExperimentOutcome::Iterated(IterationTable::from_rows(rows, reports)))
}

struct SingleRun {
    report: EvalReport,
    /// Pooled validation accuracy of the tree component alone.
    gbdt_accuracy: f64,
    /// Pooled validation accuracy of the network alone, when one exists.
    mlp_accuracy: Option<f64>,
}

fn run_once(spec: &ExperimentSpec, data: &ExperimentData, seed: u64) -> Result<SingleRun, EvalError> {
    let schema = FeatureSchema::for_mode(spec.schema);
    let train_series = training_series(spec, data, seed)?;
    let train_matrix = featurize_dataset(&train_series, &schema)?;
    let mut train_rows = train_matrix.rows;
    if let Some(mode) = spec.balancing {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 12));
        train_rows = resample_balance(&train_rows, mode, &mut rng)?;
    }

    let labels: Vec<u8> = train_rows.iter().map(|r| r.label).collect();
    let pos_weight = class_weight(&labels).unwrap_or(1.0);
    let trainer = trainer_for(spec, pos_weight);

    match spec.scheme {
        ValidationScheme::Loso => {
            let matrix = crate::features::FeatureMatrix { schema, rows: train_rows };
            let report = run_loso(&matrix, &trainer, derive_seed(seed, 14))?
                .with_experiment_id(spec.id);
            let gbdt_accuracy = report.metrics.accuracy;
            Ok(SingleRun { report, gbdt_accuracy, mlp_accuracy: None })
        }
        ValidationScheme::HoldoutDatasets | ValidationScheme::WesadHoldout => {
            let fitted = trainer.fit(&train_rows, &schema.names, derive_seed(seed, 13))?;

            let mut subjects = Vec::new();
            let mut dataset_outcomes = Vec::new();
            let mut all = ComponentCounts::default();
            for &d in spec.validation {
                let series = data.gather(std::slice::from_ref(&d))?;
                let matrix = featurize_dataset(&series, &schema)?;
                let mut dataset_confusion = Confusion::default();
                for sid in subject_ids(&matrix.rows) {
                    let rows: Vec<FeatureRow> = matrix
                        .rows
                        .iter()
                        .filter(|r| r.subject_id == sid)
                        .cloned()
                        .collect();
                    let parts = fitted.predict_parts(&rows, schema.window_s)?;
                    let truth: Vec<u8> = rows.iter().map(|r| r.label).collect();
                    let confusion =
                        Confusion::from_labels(&classify(&parts.blended, 0.5), &truth)?;
                    all.absorb(&parts.gbdt, parts.mlp.as_deref(), &truth)?;
                    dataset_confusion.merge(&confusion);
                    subjects.push(SubjectOutcome {
                        subject_id: format!("{d}:{sid}"),
                        accuracy: confusion.accuracy(),
                        n_rows: rows.len(),
                        confusion,
                    });
                }
                dataset_outcomes.push(DatasetOutcome {
                    dataset: d.to_string(),
                    metrics: Metrics::from_confusion(&dataset_confusion),
                    confusion: dataset_confusion,
                });
            }
            let report = EvalReport::from_subjects(
                spec.scheme,
                spec.schema,
                trainer.policy(),
                seed,
                subjects,
                dataset_outcomes,
            )
            .with_experiment_id(spec.id);
            Ok(SingleRun {
                report,
                gbdt_accuracy: all.gbdt.accuracy(),
                mlp_accuracy: all.mlp.map(|c| c.accuracy()),
            })
        }
    }
}

/// Pooled per-component confusions across all validation rows.
#[derive(Default)]
struct ComponentCounts {
    gbdt: Confusion,
    mlp: Option<Confusion>,
}

impl ComponentCounts {
    fn absorb(
        &mut self,
        p_gbdt: &[f64],
        p_mlp: Option<&[f64]>,
        truth: &[u8],
    ) -> Result<(), EvalError> {
        self.gbdt.merge(&Confusion::from_labels(&classify(p_gbdt, 0.5), truth)?);
        if let Some(p) = p_mlp {
            let c = Confusion::from_labels(&classify(p, 0.5), truth)?;
            self.mlp.get_or_insert_with(Confusion::default).merge(&c);
        }
        Ok(())
    }
}

/// Training material per the spec row: either the raw merged datasets or a
/// synthesized cohort drawn from their segment pool.
fn training_series(
    spec: &ExperimentSpec,
    data: &ExperimentData,
    seed: u64,
) -> Result<Vec<UniformSeries>, EvalError> {
    let sources = data.gather(spec.train)?;
    let Some(plan) = &spec.synthesis else {
        return Ok(sources);
    };
    let pool = build_segment_pool(&sources, DEFAULT_SEGMENT_S)?;
    let subjects =
        build_synthetic_dataset(&pool, &plan.layout, plan.n_subjects, derive_seed(seed, 11))?;
    Ok(subjects.into_iter().map(|s| s.series).collect())
}

fn trainer_for(spec: &ExperimentSpec, pos_weight: f64) -> Trainer {
    let gbdt = GbdtParams { scale_pos_weight: pos_weight, ..GbdtParams::default() };
    match spec.model {
        ModelKind::Gbdt => Trainer::GbdtOnly { params: gbdt },
        ModelKind::Ensemble => Trainer::Ensemble {
            gbdt,
            mlp: TrainConfig::default(),
            policy: spec.policy.unwrap_or(WeightPolicy::Fixed {
                weights: EnsembleWeights { w_gbdt: 0.5 },
            }),
        },
    }
}

/// One summary line per report (and one per validation dataset when the
/// report breaks those out), in a fixed column layout.
pub fn write_summary_csv(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    let mut out = String::from(
        "experiment,scheme,schema,scope,accuracy,precision,recall,f1,mean_subject_accuracy,n_rows\n",
    );
    for r in reports {
        let id = r.experiment_id.map_or_else(|| "-".into(), |i| i.to_string());
        out.push_str(&format!(
            "{},{},{},all,{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            id,
            r.scheme,
            r.schema,
            r.metrics.accuracy,
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.f1,
            r.mean_subject_accuracy,
            r.confusion.n()
        ));
        for d in &r.datasets {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},,{}\n",
                id,
                r.scheme,
                r.schema,
                d.dataset,
                d.metrics.accuracy,
                d.metrics.precision,
                d.metrics.recall,
                d.metrics.f1,
                d.confusion.n()
            ));
        }
    }
    std::fs::write(path, out).map_err(|source| EvalError::Io { path: path.into(), source })
}

/// Per-iteration accuracies plus the mean/SD footer rows.
pub fn write_iteration_csv(table: &IterationTable, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from(
        "iteration,gbdt_accuracy,mlp_accuracy,ensemble_accuracy,precision,recall,f1\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.iteration,
            r.gbdt_accuracy,
            r.mlp_accuracy,
            r.ensemble_accuracy,
            r.precision,
            r.recall,
            r.f1
        ));
    }
    out.push_str(&format!(
        "mean,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        table.mean_gbdt_accuracy,
        table.mean_mlp_accuracy,
        table.mean_ensemble_accuracy,
        table.mean_precision,
        table.mean_recall,
        table.mean_f1
    ));
    out.push_str(&format!("sd,,,{:.6},,,\n", table.sd_ensemble_accuracy));
    std::fs::write(path, out).map_err(|source| EvalError::Io { path: path.into(), source })
}
