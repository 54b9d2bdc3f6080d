//! Device session directories: one CSV per channel plus event tags.

use super::{Channel, ChannelKind, IngestError, LabelSpan, SensorSession};
use crate::series::SourceDataset;
use std::fs;
use std::io::Write as _;
use std::path::Path;

const HR_CLAMP: (f64, f64) = (20.0, 250.0);

/// Reads a session directory.
///
/// `EDA.csv` and at least one of `BVP.csv` / `HR.csv` are required; `TEMP.csv`
/// and `ACC.csv` are parsed when present but excluded from modeling. Header
/// lines must be numeric; malformed sample lines are counted on the returned
/// session and skipped. HR samples are clamped into the physiological range
/// [20, 250] bpm.
///
/// The subject id is the directory name and the source dataset defaults to
/// `fixture`; registry adapters override it.
pub fn read_e4_session(dir: &Path) -> Result<SensorSession, IngestError> {
    let subject_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());

    let mut channels = Vec::new();
    let mut malformed_lines = 0usize;
    for kind in [
        ChannelKind::Eda,
        ChannelKind::Bvp,
        ChannelKind::Hr,
        ChannelKind::Temp,
        ChannelKind::Acc,
    ] {
        let path = dir.join(kind.file_name());
        if !path.exists() {
            continue;
        }
        let (channel, bad) = read_channel(&path, kind)?;
        malformed_lines += bad;
        channels.push(channel);
    }

    let has = |k: ChannelKind| channels.iter().any(|c| c.kind == k);
    if !has(ChannelKind::Eda) {
        return Err(IngestError::MissingChannel { dir: dir.into(), channel: "EDA" });
    }
    if !has(ChannelKind::Bvp) && !has(ChannelKind::Hr) {
        return Err(IngestError::MissingChannel { dir: dir.into(), channel: "BVP or HR" });
    }

    let mut session = SensorSession {
        subject_id,
        source_dataset: SourceDataset::Fixture,
        channels,
        label_spans: Vec::new(),
        malformed_lines,
    };
    let duration = session.duration_s().floor();
    let epoch = session.channel(ChannelKind::Eda).expect("checked above").start_epoch_s;
    let (spans, bad_tags) = read_tags(&dir.join("tags.csv"), epoch, duration)?;
    session.label_spans = spans;
    session.malformed_lines += bad_tags;
    if session.malformed_lines > 0 {
        log::warn!(
            "session {}: skipped {} malformed line(s)",
            dir.display(),
            session.malformed_lines
        );
    }
    Ok(session)
}

/// Writes a session back out in device format. Samples carry six decimals, so
/// a directory produced here re-reads to identical sample sequences.
pub fn write_e4_session(session: &SensorSession, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|source| IngestError::Io { path: dir.into(), source })?;
    for channel in &session.channels {
        let path = dir.join(channel.kind.file_name());
        let mut out = String::new();
        out.push_str(&format!("{:.6}\n{:.6}\n", channel.start_epoch_s, channel.rate_hz));
        let width = channel.kind.values_per_sample();
        for sample in channel.samples.chunks(width) {
            let cols: Vec<String> = sample.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        write_file(&path, out.as_bytes())?;
    }
    // Stress span boundaries become tag pairs; baseline spans are implicit.
    let epoch = session
        .channels
        .first()
        .map(|c| c.start_epoch_s)
        .unwrap_or(0.0);
    let mut tags = String::new();
    for span in &session.label_spans {
        if span.raw_label.eq_ignore_ascii_case("stress") {
            tags.push_str(&format!("{:.6}\n{:.6}\n", epoch + span.start_s, epoch + span.end_s));
        }
    }
    write_file(&dir.join("tags.csv"), tags.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    let mut f = fs::File::create(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    f.write_all(bytes).map_err(|source| IngestError::Io { path: path.into(), source })
}

fn read_channel(path: &Path, kind: ChannelKind) -> Result<(Channel, usize), IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    let mut lines = text.lines().enumerate();

    let start_epoch_s = header_value(path, lines.next())?;
    let rate_hz = header_value(path, lines.next())?;
    // NaN fails every comparison, so it lands here too.
    if rate_hz <= 0.0 || rate_hz.is_nan() {
        return Err(IngestError::MalformedHeader {
            file: path.into(),
            line: 2,
            detail: format!("sample rate {rate_hz} must be positive"),
        });
    }

    let width = kind.values_per_sample();
    let mut samples = Vec::new();
    let mut malformed = 0usize;
    for (_, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parsed: Option<Vec<f64>> = if cols.len() == width {
            cols.iter()
                .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        } else {
            None
        };
        match parsed {
            Some(vals) => samples.extend(vals),
            None => malformed += 1,
        }
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyChannel { file: path.into() });
    }
    if kind == ChannelKind::Hr {
        for v in &mut samples {
            *v = v.clamp(HR_CLAMP.0, HR_CLAMP.1);
        }
    }
    Ok((Channel { kind, rate_hz, start_epoch_s, samples }, malformed))
}

/// Header lines may carry one column, or one per axis on multi-axis files;
/// the first column is authoritative.
fn header_value(path: &Path, line: Option<(usize, &str)>) -> Result<f64, IngestError> {
    let (idx, text) = line.ok_or_else(|| IngestError::MalformedHeader {
        file: path.into(),
        line: 1,
        detail: "file has no header lines".into(),
    })?;
    let first = text.split(',').next().unwrap_or("").trim();
    first.parse::<f64>().map_err(|_| IngestError::MalformedHeader {
        file: path.into(),
        line: idx + 1,
        detail: format!("expected a number, found {first:?}"),
    })
}

/// Tag timestamps → alternating baseline/stress spans covering [0, duration).
/// No tags file (or no usable tags) yields a single "unlabeled" span.
fn read_tags(path: &Path, epoch: f64, duration_s: f64) -> Result<(Vec<LabelSpan>, usize), IngestError> {
    let mut tags = Vec::new();
    let mut malformed = 0usize;
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            match line.split(',').next().unwrap_or("").trim().parse::<f64>() {
                Ok(v) if v.is_finite() => tags.push((v - epoch).clamp(0.0, duration_s)),
                _ => malformed += 1,
            }
        }
    }
    tags.sort_by(|a, b| a.partial_cmp(b).expect("finite tags"));
    tags.dedup();

    if tags.is_empty() {
        let spans = if duration_s > 0.0 {
            vec![LabelSpan { start_s: 0.0, end_s: duration_s, raw_label: "unlabeled".into() }]
        } else {
            Vec::new()
        };
        return Ok((spans, malformed));
    }

    let mut spans = Vec::new();
    let mut cursor = 0.0;
    let mut stressed = false;
    for t in tags {
        push_span(&mut spans, cursor, t, stressed);
        cursor = t;
        stressed = !stressed;
    }
    push_span(&mut spans, cursor, duration_s, stressed);
    Ok((spans, malformed))
}

fn push_span(spans: &mut Vec<LabelSpan>, start: f64, end: f64, stressed: bool) {
    if end > start {
        spans.push(LabelSpan {
            start_s: start,
            end_s: end,
            raw_label: if stressed { "stress".into() } else { "baseline".into() },
        });
    }
}
