//! Run configuration: defaults, TOML file values, environment, and flags.
//!
//! Precedence, highest first: explicit flag, config file, environment
//! (`WEARSTRESS_DATA_ROOT` for the data root), built-in default. Every
//! stochastic command therefore always has a seed: the built-in default
//! keeps runs reproducible even when nobody passed `--seed`.

use std::env;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use wearstress_core::features::SchemaMode;
use wearstress_core::synthesis::SubjectLayout;

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_WINDOW_S: usize = 25;
pub const DEFAULT_SEGMENT_S: usize = 180;
pub const DEFAULT_OUT: &str = "out";
pub const DATA_ROOT_ENV: &str = "WEARSTRESS_DATA_ROOT";

/// The config-file schema. Field names match the long flags.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_root: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub window_s: Option<usize>,
    pub schema: Option<String>,
    pub segment_s: Option<usize>,
    pub layout: Option<String>,
    pub n_subjects: Option<usize>,
    pub weights: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// Resolved configuration shared by every subcommand.
pub struct Ctx {
    cfg: RunConfig,
    data_root: Option<PathBuf>,
}

impl Ctx {
    pub fn new(config: Option<&Path>, data_root_flag: Option<PathBuf>) -> Result<Ctx> {
        let cfg = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        let data_root = data_root_flag
            .or_else(|| cfg.data_root.clone())
            .or_else(|| env::var_os(DATA_ROOT_ENV).map(PathBuf::from));
        Ok(Ctx { cfg, data_root })
    }

    /// Relative data paths resolve against the data root when one is set.
    pub fn resolve_data(&self, path: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if path.is_relative() => root.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// The registry file: the flag or config value, where naming a directory
    /// means `<dir>/registry.toml`.
    pub fn registry_path(&self, flag: Option<&Path>) -> Result<PathBuf> {
        let raw = flag
            .map(Path::to_path_buf)
            .or_else(|| self.cfg.registry.clone())
            .ok_or_else(|| UsageError::new("no registry given: pass --registry or set it in the config file"))?;
        let resolved = self.resolve_data(&raw);
        if resolved.is_dir() {
            Ok(resolved.join("registry.toml"))
        } else {
            Ok(resolved)
        }
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.cfg.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn jobs(&self, flag: Option<usize>) -> Option<usize> {
        flag.or(self.cfg.jobs)
    }

    pub fn out_dir(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn window(&self, flag: Option<usize>) -> Result<usize> {
        let w = flag.or(self.cfg.window_s).unwrap_or(DEFAULT_WINDOW_S);
        if w == 0 {
            return Err(UsageError::new("--window must be at least 1 second").into());
        }
        Ok(w)
    }

    pub fn schema(&self, flag: Option<&str>) -> Result<SchemaMode> {
        let raw = flag.map(str::to_string).or_else(|| self.cfg.schema.clone());
        match raw {
            None => Ok(SchemaMode::Engineered10),
            Some(s) => SchemaMode::parse(&s).ok_or_else(|| {
                UsageError::new(format!("unknown schema {s:?} (expected raw2, fe10, or full17)")).into()
            }),
        }
    }

    pub fn segment(&self, flag: Option<usize>) -> Result<usize> {
        let s = flag.or(self.cfg.segment_s).unwrap_or(DEFAULT_SEGMENT_S);
        if s == 0 {
            return Err(UsageError::new("--segment must be at least 1 second").into());
        }
        Ok(s)
    }

    /// `--layout B,S`: baseline and stress block lengths in minutes.
    pub fn layout(&self, flag: Option<&str>) -> Result<SubjectLayout> {
        let raw = flag.map(str::to_string).or_else(|| self.cfg.layout.clone());
        let Some(raw) = raw else {
            return Ok(SubjectLayout::new(6, 6));
        };
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        let parsed: Option<(u32, u32)> = match parts.as_slice() {
            [b, s] => b.parse().ok().zip(s.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((b, s)) if b > 0 && s > 0 => Ok(SubjectLayout::new(b, s)),
            _ => Err(UsageError::new(format!(
                "bad layout {raw:?}: expected baseline,stress minutes such as 6,6"
            ))
            .into()),
        }
    }

    pub fn n_subjects(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.cfg.n_subjects).unwrap_or(default)
    }

    /// Tree weight for fixed blends; `None` keeps the caller's default.
    pub fn weights(&self, flag: Option<f64>) -> Result<Option<f64>> {
        let w = flag.or(self.cfg.weights);
        if let Some(w) = w {
            if !(0.0..=1.0).contains(&w) || w.is_nan() {
                return Err(UsageError::new(format!("--weights {w} must lie in [0, 1]")).into());
            }
        }
        Ok(w)
    }
}
