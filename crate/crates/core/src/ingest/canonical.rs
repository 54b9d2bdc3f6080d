//! The canonical 1 Hz CSV interchange format.
//!
//! Header `subject_id,t_s,eda_us,hr_bpm,label`, one row per second, rows
//! grouped by subject with `t_s` counting 0,1,2,… within each subject.
//! Floats are written with nine decimals, so write → read → write is
//! byte-stable and values survive to well under 1e-9.
//!
//! Run boundaries produced by DROP labels are in-memory metadata only; a
//! subject read back from a canonical CSV is one contiguous run.

use super::IngestError;
use crate::series::{SourceDataset, UniformSeries};
use std::fs;
use std::io::Write as _;
use std::path::Path;

pub const CANONICAL_HEADER: &str = "subject_id,t_s,eda_us,hr_bpm,label";

/// Serializes series in input order.
pub fn write_canonical_to_string(series: &[UniformSeries]) -> String {
    let mut out = String::from(CANONICAL_HEADER);
    out.push('\n');
    for s in series {
        for i in 0..s.len() {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{}\n",
                s.subject_id, s.t[i], s.eda_us[i], s.hr_bpm[i], s.label[i]
            ));
        }
    }
    out
}

pub fn write_canonical_csv(series: &[UniformSeries], path: &Path) -> Result<(), IngestError> {
    let mut f = fs::File::create(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    f.write_all(write_canonical_to_string(series).as_bytes())
        .map_err(|source| IngestError::Io { path: path.into(), source })
}

/// Reads every subject in file order. Source dataset is set to `canonical`;
/// callers that know better override it.
pub fn read_canonical_csv(path: &Path) -> Result<Vec<UniformSeries>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    let mut lines = text.lines().enumerate();

    match lines.next() {
        Some((_, header)) if header.trim() == CANONICAL_HEADER => {}
        Some((_, header)) => {
            return Err(IngestError::SchemaMismatch {
                path: path.into(),
                line: 1,
                detail: format!("expected header {CANONICAL_HEADER:?}, found {:?}", header.trim()),
            })
        }
        None => {
            return Err(IngestError::SchemaMismatch {
                path: path.into(),
                line: 1,
                detail: "file is empty".into(),
            })
        }
    }

    struct Partial {
        subject_id: String,
        eda: Vec<f64>,
        hr: Vec<f64>,
        label: Vec<u8>,
        last_t: i64,
    }

    let mut series: Vec<UniformSeries> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let mut current: Option<Partial> = None;

    let finish = |p: Partial, series: &mut Vec<UniformSeries>| -> Result<(), IngestError> {
        series.push(UniformSeries::new(
            p.subject_id,
            p.eda,
            p.hr,
            p.label,
            SourceDataset::Canonical,
        )?);
        Ok(())
    };

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(IngestError::SchemaMismatch {
                path: path.into(),
                line: line_no,
                detail: format!("expected 5 columns, found {}", cols.len()),
            });
        }
        let subject_id = cols[0].to_string();
        let t = parse_second(path, line_no, cols[1])?;
        let eda = parse_float(path, line_no, "eda_us", cols[2])?;
        let hr = parse_float(path, line_no, "hr_bpm", cols[3])?;
        let label = match cols[4].trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(IngestError::LabelOutOfDomain {
                    path: path.into(),
                    line: line_no,
                    value: other.to_string(),
                })
            }
        };

        let start_new = current.as_ref().map(|p| p.subject_id != subject_id).unwrap_or(true);
        if start_new {
            if let Some(p) = current.take() {
                finish(p, &mut series)?;
            }
            if seen.contains(&subject_id) {
                return Err(IngestError::SchemaMismatch {
                    path: path.into(),
                    line: line_no,
                    detail: format!("rows for subject {subject_id:?} are not contiguous"),
                });
            }
            seen.push(subject_id.clone());
            current = Some(Partial { subject_id, eda: vec![], hr: vec![], label: vec![], last_t: -1 });
        }
        let p = current.as_mut().expect("just initialized");
        if p.last_t >= 0 && t != p.last_t + 1 {
            return Err(IngestError::NonUniformTimestep { path: path.into(), line: line_no });
        }
        p.last_t = t;
        p.eda.push(eda);
        p.hr.push(hr);
        p.label.push(label);
    }
    if let Some(p) = current.take() {
        finish(p, &mut series)?;
    }
    Ok(series)
}

fn parse_second(path: &Path, line: usize, text: &str) -> Result<i64, IngestError> {
    let v: f64 = text.trim().parse().map_err(|_| IngestError::SchemaMismatch {
        path: path.into(),
        line,
        detail: format!("t_s {text:?} is not a number"),
    })?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(IngestError::NonUniformTimestep { path: path.into(), line });
    }
    Ok(v as i64)
}

fn parse_float(path: &Path, line: usize, col: &str, text: &str) -> Result<f64, IngestError> {
    match text.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::SchemaMismatch {
            path: path.into(),
            line,
            detail: format!("{col} value {text:?} is not a finite number"),
        }),
    }
}
