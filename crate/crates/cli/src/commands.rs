//! One function per subcommand, plus the clap argument structs they parse.
//!
//! Filesystem layout decisions live here — what gets written where, and
//! what each command prints — while all numeric work stays in the library.
//! Every command that produces artifacts finishes by hashing them into
//! `manifest.json` in the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use wearstress_core::ensemble::{EnsembleWeights, WeightPolicy};
use wearstress_core::evaluate::experiments::{
    self, experiment_spec, run_experiment, ExperimentOutcome,
};
use wearstress_core::evaluate::loso::{SavedModel, Trainer};
use wearstress_core::evaluate::plot::{expand_to_seconds, render_timeline};
use wearstress_core::evaluate::{
    classify, Confusion, DatasetOutcome, EvalReport, Metrics, SubjectOutcome, ValidationScheme,
};
use wearstress_core::features::{featurize_dataset, FeatureRow, FeatureSchema};
use wearstress_core::fixture::{self, FixtureError};
use wearstress_core::gbdt::GbdtParams;
use wearstress_core::ingest::{
    self, align_uniform, read_e4_session, write_canonical_csv, LabelProtocol,
};
use wearstress_core::mlp::TrainConfig;
use wearstress_core::registry::{load_registry, Registry};
use wearstress_core::series::{SourceDataset, UniformSeries};
use wearstress_core::synthesis::{
    build_segment_pool, build_synthetic_dataset, class_weight, write_pool_manifest,
};

use crate::config::Ctx;
use crate::manifest::write_manifest;
use crate::UsageError;

#[derive(Args)]
pub(crate) struct IngestArgs {
    /// Device session directory; repeatable.
    #[arg(long, value_name = "DIR")]
    session: Vec<PathBuf>,
    /// Registry of datasets to ingest instead of single sessions.
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Label source for bare sessions: device tags or all-baseline.
    #[arg(long, value_name = "tags|zero", default_value = "tags")]
    labels: String,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct FeaturizeArgs {
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    /// Dataset name; repeatable. Default: everything registered.
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    /// Feature space: raw2, fe10, or full17.
    #[arg(long, value_name = "MODE")]
    schema: Option<String>,
    /// Window length in seconds for the windowed schemas.
    #[arg(long, value_name = "SECONDS")]
    window: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct PoolArgs {
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    /// Segment length in seconds.
    #[arg(long, value_name = "SECONDS")]
    segment: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct SynthesizeArgs {
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    #[arg(long, value_name = "SECONDS")]
    segment: Option<usize>,
    /// Baseline,stress block lengths in minutes.
    #[arg(long, value_name = "B,S")]
    layout: Option<String>,
    /// Number of synthetic subjects to draw.
    #[arg(long, value_name = "N")]
    subjects: Option<usize>,
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct TrainArgs {
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    #[arg(long, value_name = "MODE")]
    schema: Option<String>,
    #[arg(long, value_name = "SECONDS")]
    window: Option<usize>,
    /// Model family: ensemble (trees + network) or gbdt.
    #[arg(long, value_name = "ensemble|gbdt", default_value = "ensemble")]
    model: String,
    /// Tree weight in the fixed blend, in [0, 1].
    #[arg(long, value_name = "WXGB")]
    weights: Option<f64>,
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct EvalArgs {
    /// Saved model JSON from `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct ExperimentArgs {
    /// Experiment number, 1 through 10.
    #[arg(long, value_name = "N")]
    id: u8,
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct PredictArgs {
    /// Saved model JSON from `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Device session directory to score.
    #[arg(long, value_name = "DIR")]
    session: PathBuf,
    /// Tree weight for the blend; default 0.5 when the model has a network.
    #[arg(long, value_name = "WXGB")]
    weights: Option<f64>,
    /// Also render the probability timeline to this SVG path.
    #[arg(long, value_name = "FILE.svg")]
    plot: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct SummaryArgs {
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    dataset: Vec<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn open_registry(ctx: &Ctx, flag: Option<&Path>) -> Result<Registry> {
    let path = ctx.registry_path(flag)?;
    Ok(load_registry(&path)?)
}

/// Resolves `--dataset` names, or substitutes every registered dataset when
/// none were given. Explicit names keep their order; duplicates collapse.
fn wanted_datasets(registry: &Registry, names: &[String]) -> Result<Vec<SourceDataset>> {
    if names.is_empty() {
        return Ok(registry.entries().iter().map(|e| e.dataset).collect());
    }
    let mut out = Vec::new();
    for name in names {
        let d = SourceDataset::parse(name)
            .ok_or_else(|| UsageError::new(format!("unknown dataset {name:?}")))?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn finish(out_dir: &Path, files: &[PathBuf]) -> Result<()> {
    let manifest = write_manifest(out_dir, files)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

pub(crate) fn ingest(ctx: &Ctx, args: IngestArgs) -> Result<()> {
    match (args.session.is_empty(), &args.registry) {
        (false, Some(_)) => {
            return Err(UsageError::new("--session and --registry are mutually exclusive").into())
        }
        (true, None) => {
            return Err(
                UsageError::new("nothing to ingest: pass --session DIR or --registry FILE").into()
            )
        }
        _ => {}
    }
    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let mut files = Vec::new();

    if args.session.is_empty() {
        let registry = open_registry(ctx, args.registry.as_deref())?;
        let (data, _) = registry.load_all()?;
        for entry in registry.entries() {
            let series = data.get(entry.dataset).unwrap_or(&[]);
            let path = out.join(format!("{}.csv", entry.dataset));
            write_canonical_csv(series, &path)?;
            println!("{}: {} subjects -> {}", entry.dataset, series.len(), path.display());
            files.push(path);
        }
    } else {
        let protocol = match args.labels.as_str() {
            "tags" => LabelProtocol::tags(),
            "zero" => LabelProtocol::unlabeled_zero(),
            other => {
                return Err(UsageError::new(format!(
                    "--labels {other:?} is not \"tags\" or \"zero\""
                ))
                .into())
            }
        };
        for dir in &args.session {
            let dir = ctx.resolve_data(dir);
            let session = read_e4_session(&dir)?;
            let series = align_uniform(&session, &protocol)?;
            let path = out.join(format!("{}.csv", series.subject_id));
            write_canonical_csv(std::slice::from_ref(&series), &path)?;
            println!("aligned {} -> {} ({} s)", dir.display(), path.display(), series.len());
            files.push(path);
        }
    }
    finish(&out, &files)
}

pub(crate) fn featurize(ctx: &Ctx, args: FeaturizeArgs) -> Result<()> {
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let schema = FeatureSchema::for_mode(ctx.schema(args.schema.as_deref())?)
        .with_window(ctx.window(args.window)?);
    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let mut files = Vec::new();
    for &d in &wanted {
        let matrix = featurize_dataset(data.get(d).unwrap_or(&[]), &schema)?;
        let path = out.join(format!("features_{d}.csv"));
        matrix.write_csv(&path)?;
        println!(
            "{d}: {} rows x {} features ({}) -> {}",
            matrix.len(),
            schema.n_features(),
            schema.mode,
            path.display()
        );
        files.push(path);
    }
    finish(&out, &files)
}

pub(crate) fn pool(ctx: &Ctx, args: PoolArgs) -> Result<()> {
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let series = data.gather(&wanted)?;
    let segment_s = ctx.segment(args.segment)?;
    let pool = build_segment_pool(&series, segment_s)?;

    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let path = out.join("pool.csv");
    write_pool_manifest(&pool, &path)?;
    println!(
        "pool: {} non-stressed + {} stressed = {} segments of {} s",
        pool.nonstressed.len(),
        pool.stressed.len(),
        pool.total(),
        segment_s
    );
    for (d, n) in pool.provenance() {
        println!("  {d}: {n}");
    }
    finish(&out, &[path])
}

pub(crate) fn synthesize(ctx: &Ctx, args: SynthesizeArgs) -> Result<()> {
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let series = data.gather(&wanted)?;
    let pool = build_segment_pool(&series, ctx.segment(args.segment)?)?;
    let layout = ctx.layout(args.layout.as_deref())?;
    let n = ctx.n_subjects(args.subjects, 200);
    let seed = ctx.seed(args.seed);
    let subjects = build_synthetic_dataset(&pool, &layout, n, seed)?;

    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let all: Vec<UniformSeries> = subjects.iter().map(|s| s.series.clone()).collect();
    let csv_path = out.join("synthetic.csv");
    write_canonical_csv(&all, &csv_path)?;

    let mut prov = String::from("synth_id,position,class,origin_subject,origin_dataset,start_offset_s\n");
    for s in &subjects {
        for (i, c) in s.constituents.iter().enumerate() {
            writeln!(
                prov,
                "{},{},{},{},{},{}",
                s.synth_id, i, c.class_label, c.origin_subject, c.origin_dataset, c.start_offset_s
            )
            .expect("string write");
        }
    }
    let prov_path = out.join("constituents.csv");
    fs::write(&prov_path, prov)
        .with_context(|| format!("writing {}", prov_path.display()))?;

    println!(
        "synthesized {} subjects of {} s (seed {}) -> {}",
        subjects.len(),
        layout.total_s(),
        seed,
        csv_path.display()
    );
    println!("segment provenance -> {}", prov_path.display());
    finish(&out, &[csv_path, prov_path])
}

pub(crate) fn train(ctx: &Ctx, args: TrainArgs) -> Result<()> {
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let series = data.gather(&wanted)?;
    let schema = FeatureSchema::for_mode(ctx.schema(args.schema.as_deref())?)
        .with_window(ctx.window(args.window)?);
    let matrix = featurize_dataset(&series, &schema)?;

    // Single-class corpora train unweighted rather than failing here; the
    // fit itself will reject them if the split cannot stratify.
    let scale_pos_weight = class_weight(&matrix.labels()).unwrap_or(1.0);
    let gbdt = GbdtParams { scale_pos_weight, ..GbdtParams::default() };
    let trainer = match args.model.as_str() {
        "gbdt" => {
            if args.weights.is_some() {
                return Err(
                    UsageError::new("--weights only applies to --model ensemble").into()
                );
            }
            Trainer::GbdtOnly { params: gbdt }
        }
        "ensemble" => {
            let w = ctx.weights(args.weights)?.unwrap_or(0.5);
            Trainer::Ensemble {
                gbdt,
                mlp: TrainConfig::default(),
                policy: WeightPolicy::Fixed { weights: EnsembleWeights::new(w)? },
            }
        }
        other => {
            return Err(
                UsageError::new(format!("--model {other:?} is not \"ensemble\" or \"gbdt\"")).into()
            )
        }
    };
    let seed = ctx.seed(args.seed);
    let fitted = trainer.fit(&matrix.rows, &matrix.schema.names, seed)?;

    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let path = out.join("model.json");
    SavedModel { schema: matrix.schema.clone(), model: fitted }.save(&path)?;
    println!(
        "trained {} on {} rows x {} features (seed {}) -> {}",
        args.model,
        matrix.len(),
        schema.n_features(),
        seed,
        path.display()
    );
    finish(&out, &[path])
}

/// Rows as (subject, half-open index range) in first-appearance order.
/// Feature rows arrive grouped per subject, so a change of id starts a span.
fn subject_spans(rows: &[FeatureRow]) -> Vec<(String, std::ops::Range<usize>)> {
    let mut spans: Vec<(String, std::ops::Range<usize>)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match spans.last_mut() {
            Some((id, span)) if *id == row.subject_id => span.end = i + 1,
            _ => spans.push((row.subject_id.clone(), i..i + 1)),
        }
    }
    spans
}

pub(crate) fn eval(ctx: &Ctx, args: EvalArgs) -> Result<()> {
    let saved = SavedModel::load(&args.model)?;
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let namespace = wanted.len() > 1;

    let mut subjects = Vec::new();
    let mut datasets = Vec::new();
    for &d in &wanted {
        let matrix = featurize_dataset(data.get(d).unwrap_or(&[]), &saved.schema)?;
        let probs = saved.model.predict_rows(&matrix.rows, saved.schema.window_s)?;
        let pred = classify(&probs, 0.5);
        let truth = matrix.labels();
        for (id, span) in subject_spans(&matrix.rows) {
            let confusion = Confusion::from_labels(&pred[span.clone()], &truth[span.clone()])?;
            let accuracy =
                (confusion.true_pos + confusion.true_neg) as f64 / span.len() as f64;
            let subject_id = if namespace { format!("{d}:{id}") } else { id };
            subjects.push(SubjectOutcome { subject_id, confusion, accuracy, n_rows: span.len() });
        }
        let confusion = Confusion::from_labels(&pred, &truth)?;
        let metrics = Metrics::from_confusion(&confusion);
        println!(
            "{d}: accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  ({} rows)",
            metrics.accuracy,
            metrics.precision,
            metrics.recall,
            metrics.f1,
            matrix.len()
        );
        datasets.push(DatasetOutcome { dataset: d.to_string(), confusion, metrics });
    }

    let policy = saved.model.mlp.is_some().then_some(saved.model.policy);
    let report = EvalReport::from_subjects(
        ValidationScheme::HoldoutDatasets,
        saved.schema.mode,
        policy,
        0,
        subjects,
        datasets,
    );
    println!(
        "overall: accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
        report.metrics.accuracy, report.metrics.precision, report.metrics.recall, report.metrics.f1
    );

    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let report_path = out.join("report.json");
    report.save(&report_path)?;
    let csv_path = out.join("summary.csv");
    experiments::write_summary_csv(std::slice::from_ref(&report), &csv_path)?;
    finish(&out, &[report_path, csv_path])
}

pub(crate) fn experiment(ctx: &Ctx, args: ExperimentArgs) -> Result<()> {
    let spec = experiment_spec(args.id).ok_or_else(|| {
        UsageError::new(format!("unknown experiment id {} (valid: 1 through 10)", args.id))
    })?;
    let mut needed: Vec<SourceDataset> = Vec::new();
    for &d in spec.train.iter().chain(spec.validation) {
        if !needed.contains(&d) {
            needed.push(d);
        }
    }
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let (data, _) = registry.load(&needed)?;
    let seed = ctx.seed(args.seed);
    println!("experiment {}: {}", spec.id, spec.title);
    let outcome = run_experiment(&spec, &data, seed)?;

    let out = ctx.out_dir(args.out).join(format!("experiment-{}", spec.id));
    ensure_dir(&out)?;
    let mut files = Vec::new();
    let report_path = out.join("report.json");
    outcome.primary_report().save(&report_path)?;
    files.push(report_path);

    match &outcome {
        ExperimentOutcome::Single(report) => {
            let path = out.join("summary.csv");
            experiments::write_summary_csv(std::slice::from_ref(report), &path)?;
            files.push(path);
            let m = &report.metrics;
            println!(
                "  accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
                m.accuracy, m.precision, m.recall, m.f1
            );
        }
        ExperimentOutcome::Iterated(table) => {
            let path = out.join("iterations.csv");
            experiments::write_iteration_csv(table, &path)?;
            files.push(path);
            let path = out.join("table.json");
            let mut text = serde_json::to_string_pretty(table)?;
            text.push('\n');
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            files.push(path);
            println!(
                "  mean ensemble accuracy {:.4} (SD {:.4}) over {} iterations",
                table.mean_ensemble_accuracy,
                table.sd_ensemble_accuracy,
                table.rows.len()
            );
            println!(
                "  mean precision {:.4}  recall {:.4}  f1 {:.4}",
                table.mean_precision, table.mean_recall, table.mean_f1
            );
        }
    }
    finish(&out, &files)
}

pub(crate) fn predict(ctx: &Ctx, args: PredictArgs) -> Result<()> {
    let saved = SavedModel::load(&args.model)?;
    let mut model = saved.model;
    // An explicit weight wins; otherwise two-component models score with an
    // even blend, leaving any trained-in length rule to `eval`.
    if let Some(w) = ctx.weights(args.weights)? {
        model.policy = WeightPolicy::Fixed { weights: EnsembleWeights::new(w)? };
    } else if model.mlp.is_some() {
        model.policy = WeightPolicy::Fixed { weights: EnsembleWeights::new(0.5)? };
    }

    let dir = ctx.resolve_data(&args.session);
    let session = read_e4_session(&dir)?;
    let series = align_uniform(&session, &LabelProtocol::unlabeled_zero())?;
    let total_s = series.t.last().map_or(0, |&t| t as usize + 1);
    let matrix = featurize_dataset(std::slice::from_ref(&series), &saved.schema)?;
    let parts = model.predict_parts(&matrix.rows, saved.schema.window_s)?;

    let mut csv = String::from("window_start_s,p_gbdt,p_mlp,p_blend\n");
    for (i, row) in matrix.rows.iter().enumerate() {
        let p_mlp = parts.mlp.as_ref().map_or(String::new(), |m| format!("{:.6}", m[i]));
        writeln!(
            csv,
            "{},{:.6},{},{:.6}",
            row.window_start_s, parts.gbdt[i], p_mlp, parts.blended[i]
        )
        .expect("string write");
    }
    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let csv_path = out.join("predictions.csv");
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let mut files = vec![csv_path];

    let starts: Vec<u32> = matrix.rows.iter().map(|r| r.window_start_s).collect();
    let per_second = expand_to_seconds(&starts, &parts.blended, saved.schema.window_s, total_s);
    let bands = classify(&per_second, 0.5);
    if let Some(plot) = &args.plot {
        render_timeline(&bands, &per_second, plot)?;
        println!("plot -> {}", plot.display());
        files.push(plot.clone());
    }
    let stressed = bands.iter().filter(|&&b| b == 1).count();
    println!(
        "scored {} s across {} windows: {:.1}% stressed",
        total_s,
        matrix.len(),
        100.0 * stressed as f64 / total_s.max(1) as f64
    );
    finish(&out, &files)
}

pub(crate) fn fixture_gen(
    ctx: &Ctx,
    subjects: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let n = ctx.n_subjects(subjects, 8);
    let seed = ctx.seed(seed);
    let out = ctx.out_dir(out);
    let layout = fixture::fixture_gen(n, seed, &out).map_err(|e| match e {
        FixtureError::TooFewSubjects { .. } => anyhow::Error::new(UsageError::new(e.to_string())),
        other => anyhow::Error::new(other),
    })?;
    println!(
        "fixture: {} subjects of {} s each (seed {}) -> {}",
        n,
        fixture::SESSION_S,
        seed,
        out.display()
    );
    println!("registry -> {}", layout.registry_path.display());
    finish(&layout.out_dir, &layout.files)
}

pub(crate) fn summary(ctx: &Ctx, args: SummaryArgs) -> Result<()> {
    let registry = open_registry(ctx, args.registry.as_deref())?;
    let wanted = wanted_datasets(&registry, &args.dataset)?;
    let (data, _) = registry.load(&wanted)?;
    let mut all: Vec<UniformSeries> = Vec::new();
    for &d in &wanted {
        all.extend(data.get(d).unwrap_or(&[]).iter().cloned());
    }
    let stats = ingest::dataset_summary(&all)?;
    for (d, s) in &stats.per_dataset {
        println!(
            "{d}: {} subjects, {} samples | eda {:.3} sd {:.3} | hr {:.1} sd {:.1} | {:.1}% stressed",
            s.n_subjects, s.n_samples, s.eda_mean, s.eda_sd, s.hr_mean, s.hr_sd, s.pct_stressed
        );
    }
    let out = ctx.out_dir(args.out);
    ensure_dir(&out)?;
    let path = out.join("summary.csv");
    ingest::write_summary_csv(&stats, &path)?;
    finish(&out, &[path])
}
