//! Dataset registry: a TOML file that names each dataset, points at its
//! on-disk location, and picks the adapter that reads it.
//!
//! Two adapters cover every supported layout. `canonical` reads a single
//! already-aligned CSV holding any number of subjects. `e4` treats the path
//! as a directory of per-subject session folders (Empatica E4 export layout)
//! and aligns each one to the 1 Hz grid with the dataset's label protocol.
//!
//! ```toml
//! [datasets.swell]
//! adapter = "canonical"
//! path = "swell.csv"
//!
//! [datasets.wesad]
//! adapter = "e4"
//! path = "wesad_sessions"
//! subjects = ["S2", "S3"]          # optional allow-list
//! self_report_threshold = 6.0      # optional numeric-label cutoff
//!
//! [datasets.wesad.labels]          # optional raw-label overrides
//! amusement = "drop"
//! ```
//!
//! Relative paths resolve against the registry file's own directory, so a
//! registry can travel with its data. Subjects that cannot be aligned for
//! per-subject reasons (a missing channel, no usable pulse peaks, nothing
//! left after dropping unlabeled spans) are skipped with a warning instead
//! of failing the whole dataset; structural problems still error out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::evaluate::experiments::ExperimentData;
use crate::ingest::{
    align_uniform, read_canonical_csv, read_e4_session, IngestError, LabelClass, LabelProtocol,
};
use crate::series::{SourceDataset, UniformSeries};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("io error at {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("registry names unknown dataset {name:?}")]
    UnknownDataset { name: String },
    #[error("dataset {name:?}: unknown adapter {adapter:?} (expected \"canonical\" or \"e4\")")]
    UnknownAdapter { name: String, adapter: String },
    #[error("dataset {name:?}: label class {value:?} (expected \"0\", \"1\", or \"drop\")")]
    BadLabelClass { name: String, value: String },
    #[error("dataset {name:?} at {path}: no subjects could be loaded")]
    EmptyDataset { name: String, path: PathBuf },
    #[error("registry has no entry for {name:?} (available: {available:?})")]
    MissingEntry { name: String, available: Vec<String> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// How a registry entry's path is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adapter {
    /// One aligned CSV, any number of subjects.
    Canonical,
    /// A directory of per-subject E4 session folders.
    E4,
}

/// One resolved `[datasets.<name>]` table.
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub dataset: SourceDataset,
    pub adapter: Adapter,
    /// Absolute or registry-relative path, already resolved.
    pub path: PathBuf,
    /// Allow-list of subject ids; `None` keeps everyone.
    pub subjects: Option<Vec<String>>,
    pub protocol: LabelProtocol,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: Vec<RegistryEntry>,
}

/// Wire format of one entry, before resolution.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    adapter: String,
    path: String,
    subjects: Option<Vec<String>>,
    self_report_threshold: Option<f64>,
    labels: Option<BTreeMap<String, String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    datasets: BTreeMap<String, RawEntry>,
}

fn parse_label_class(name: &str, value: &str) -> Result<LabelClass, RegistryError> {
    match value.to_ascii_lowercase().as_str() {
        "0" | "zero" => Ok(LabelClass::Zero),
        "1" | "one" => Ok(LabelClass::One),
        "drop" => Ok(LabelClass::Drop),
        _ => Err(RegistryError::BadLabelClass { name: name.into(), value: value.into() }),
    }
}

/// Parses a registry file and resolves each entry's path and label protocol.
pub fn load_registry(path: &Path) -> Result<Registry, RegistryError> {
    let text =
        fs::read_to_string(path).map_err(|source| RegistryError::Io { path: path.into(), source })?;
    let raw: RawRegistry = toml::from_str(&text)
        .map_err(|e| RegistryError::Parse { path: path.into(), detail: e.to_string() })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut entries = Vec::new();
    for (name, raw) in raw.datasets {
        let dataset = SourceDataset::parse(&name)
            .ok_or_else(|| RegistryError::UnknownDataset { name: name.clone() })?;
        let adapter = match raw.adapter.to_ascii_lowercase().as_str() {
            "canonical" => Adapter::Canonical,
            "e4" => Adapter::E4,
            other => {
                return Err(RegistryError::UnknownAdapter {
                    name: name.clone(),
                    adapter: other.into(),
                })
            }
        };
        let entry_path = base.join(&raw.path);

        let mut protocol = LabelProtocol::for_dataset(dataset);
        if let Some(threshold) = raw.self_report_threshold {
            protocol = protocol.with_numeric_threshold(threshold);
        }
        if let Some(overrides) = raw.labels {
            for (label, class) in overrides {
                protocol = protocol.with_rule(&label, parse_label_class(&name, &class)?);
            }
        }

        entries.push(RegistryEntry {
            dataset,
            adapter,
            path: entry_path,
            subjects: raw.subjects,
            protocol,
        });
    }
    // BTreeMap iteration already sorted by name; keep that order.
    Ok(Registry { entries })
}

impl Registry {
    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn entry(&self, dataset: SourceDataset) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.dataset == dataset)
    }

    /// Loads every registered dataset. Warnings describe skipped subjects.
    pub fn load_all(&self) -> Result<(ExperimentData, Vec<String>), RegistryError> {
        self.load_each(&self.entries)
    }

    /// Loads exactly the named datasets, failing fast if one is unregistered.
    pub fn load(
        &self,
        wanted: &[SourceDataset],
    ) -> Result<(ExperimentData, Vec<String>), RegistryError> {
        let mut picked = Vec::new();
        for d in wanted {
            match self.entry(*d) {
                Some(e) => picked.push(e.clone()),
                None => {
                    return Err(RegistryError::MissingEntry {
                        name: d.to_string(),
                        available: self.entries.iter().map(|e| e.dataset.to_string()).collect(),
                    })
                }
            }
        }
        self.load_each(&picked)
    }

    fn load_each(
        &self,
        entries: &[RegistryEntry],
    ) -> Result<(ExperimentData, Vec<String>), RegistryError> {
        let mut data = ExperimentData::new();
        let mut warnings = Vec::new();
        for entry in entries {
            let series = load_entry(entry, &mut warnings)?;
            data.insert(entry.dataset, series);
        }
        Ok((data, warnings))
    }
}

/// Loads one entry into aligned series, appending skip warnings.
pub fn load_entry(
    entry: &RegistryEntry,
    warnings: &mut Vec<String>,
) -> Result<Vec<UniformSeries>, RegistryError> {
    let mut series = match entry.adapter {
        Adapter::Canonical => {
            let mut all = read_canonical_csv(&entry.path)?;
            for s in &mut all {
                s.source_dataset = entry.dataset;
            }
            all
        }
        Adapter::E4 => read_e4_dir(entry, warnings)?,
    };
    if let Some(keep) = &entry.subjects {
        series.retain(|s| keep.iter().any(|k| k == &s.subject_id));
    }
    if series.is_empty() {
        return Err(RegistryError::EmptyDataset {
            name: entry.dataset.to_string(),
            path: entry.path.clone(),
        });
    }
    Ok(series)
}

/// Alignment failures that indict one subject's recording, not the dataset.
fn is_subject_local(err: &IngestError) -> bool {
    matches!(
        err,
        IngestError::MissingChannel { .. }
            | IngestError::EmptyChannel { .. }
            | IngestError::NoPeaksDetected
            | IngestError::TooShort { .. }
            | IngestError::EmptyAfterDrop { .. }
    )
}

fn read_e4_dir(
    entry: &RegistryEntry,
    warnings: &mut Vec<String>,
) -> Result<Vec<UniformSeries>, RegistryError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(&entry.path)
        .map_err(|source| RegistryError::Io { path: entry.path.clone(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort(); // directory order is OS-dependent; subject order must not be

    let mut out = Vec::new();
    for dir in dirs {
        if let Some(keep) = &entry.subjects {
            let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if !keep.iter().any(|k| k == &id) {
                continue;
            }
        }
        let aligned = read_e4_session(&dir).and_then(|mut session| {
            session.source_dataset = entry.dataset;
            align_uniform(&session, &entry.protocol)
        });
        match aligned {
            Ok(s) => out.push(s),
            Err(e) if is_subject_local(&e) => {
                let msg = format!("{}: skipping {}: {e}", entry.dataset, dir.display());
                log::warn!("{msg}");
                warnings.push(msg);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}
