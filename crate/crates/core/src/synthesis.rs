//! Segment pooling and synthetic subject construction.
//!
//! Real recordings are chopped into fixed-length same-label segments (180 s
//! by default): within each contiguous run, every maximal same-label stretch
//! yields `floor(len / segment_s)` segments cut left to right, the remainder
//! discarded. Synthetic subjects then concatenate segments drawn uniformly
//! with replacement from the class pools — a baseline block followed by a
//! stress block, sized by a [`SubjectLayout`] in minutes — producing a
//! class-balanced dataset with a known label boundary.

use crate::features::FeatureRow;
use crate::series::{SourceDataset, UniformSeries};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Default segment length in seconds.
pub const DEFAULT_SEGMENT_S: usize = 180;

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("no run reaches the segment length of {segment_s} s")]
    EmptyPool { segment_s: usize },
    #[error("pool has no {class} segments to draw from")]
    InsufficientPool { class: &'static str },
    #[error("invalid layout: {detail}")]
    InvalidLayout { detail: String },
    #[error("labels contain a single class only")]
    SingleClass,
    #[error("empty input: {detail}")]
    EmptyInput { detail: String },
    #[error("malformed pool manifest at line {line}: {detail}")]
    MalformedManifest { line: usize, detail: String },
    #[error("io error at {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
}

/// A fixed-length same-label slice of one subject's recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub origin_subject: String,
    pub origin_dataset: SourceDataset,
    pub label: u8,
    /// Index of the first sample within the origin series (re-indexed time).
    pub start_offset_s: u32,
    pub eda: Vec<f64>,
    pub hr: Vec<f64>,
}

/// All segments of one length, split by class.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPool {
    pub segment_s: usize,
    pub nonstressed: Vec<Segment>,
    pub stressed: Vec<Segment>,
}

impl SegmentPool {
    pub fn total(&self) -> usize {
        self.nonstressed.len() + self.stressed.len()
    }

    /// Segment counts per origin dataset, ordered by dataset.
    pub fn provenance(&self) -> Vec<(SourceDataset, usize)> {
        let mut counts: BTreeMap<SourceDataset, usize> = BTreeMap::new();
        for seg in self.nonstressed.iter().chain(&self.stressed) {
            *counts.entry(seg.origin_dataset).or_default() += 1;
        }
        counts.into_iter().collect()
    }
}

/// Block lengths of a synthetic subject, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SubjectLayout {
    pub baseline_min: u32,
    pub stress_min: u32,
}

impl SubjectLayout {
    pub fn new(baseline_min: u32, stress_min: u32) -> SubjectLayout {
        SubjectLayout { baseline_min, stress_min }
    }

    pub fn total_s(&self) -> usize {
        (self.baseline_min + self.stress_min) as usize * 60
    }

    /// Segments per block for the given segment length.
    fn block_counts(&self, segment_s: usize) -> Result<(usize, usize), SynthesisError> {
        let seg_min = segment_s / 60;
        if seg_min == 0 || !segment_s.is_multiple_of(60) {
            return Err(SynthesisError::InvalidLayout {
                detail: format!("segment length {segment_s}s is not a whole number of minutes"),
            });
        }
        if self.baseline_min == 0 || self.stress_min == 0 {
            return Err(SynthesisError::InvalidLayout {
                detail: "both blocks must be non-empty".into(),
            });
        }
        if !(self.baseline_min as usize).is_multiple_of(seg_min)
            || !(self.stress_min as usize).is_multiple_of(seg_min)
        {
            return Err(SynthesisError::InvalidLayout {
                detail: format!(
                    "block lengths ({}, {}) min must be multiples of the {}-min segment",
                    self.baseline_min, self.stress_min, seg_min
                ),
            });
        }
        Ok((self.baseline_min as usize / seg_min, self.stress_min as usize / seg_min))
    }
}

/// A generated subject plus the provenance of every segment it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub synth_id: String,
    pub series: UniformSeries,
    pub constituents: Vec<Constituent>,
}

/// One drawn segment: which class pool, which index, where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Constituent {
    pub class_label: u8,
    pub index_in_class: usize,
    pub origin_subject: String,
    pub origin_dataset: SourceDataset,
    pub start_offset_s: u32,
}

/// Chops every series into same-label segments of `segment_s` seconds.
/// Class counts are independent of subject order; segment order follows the
/// input order.
pub fn build_segment_pool(
    series: &[UniformSeries],
    segment_s: usize,
) -> Result<SegmentPool, SynthesisError> {
    build_segment_pool_trimmed(series, segment_s, 0)
}

/// [`build_segment_pool`] with `trim_s` seconds dropped on each side of a
/// label transition before cutting, as a cool-down buffer against response
/// lag bleeding across the switch. Run and recording edges are not
/// transitions and keep their full extent. Subjects are chopped in parallel
/// and merged back in input order.
pub fn build_segment_pool_trimmed(
    series: &[UniformSeries],
    segment_s: usize,
    trim_s: usize,
) -> Result<SegmentPool, SynthesisError> {
    use rayon::prelude::*;

    if segment_s == 0 {
        return Err(SynthesisError::InvalidLayout { detail: "segment length must be positive".into() });
    }
    let per_subject: Vec<(Vec<Segment>, Vec<Segment>)> = series
        .par_iter()
        .map(|s| chop_series(s, segment_s, trim_s))
        .collect();
    let mut nonstressed = Vec::new();
    let mut stressed = Vec::new();
    for (n, st) in per_subject {
        nonstressed.extend(n);
        stressed.extend(st);
    }
    if nonstressed.is_empty() && stressed.is_empty() {
        return Err(SynthesisError::EmptyPool { segment_s });
    }
    Ok(SegmentPool { segment_s, nonstressed, stressed })
}

/// Same-label segments of one series, split `(nonstressed, stressed)`.
fn chop_series(s: &UniformSeries, segment_s: usize, trim_s: usize) -> (Vec<Segment>, Vec<Segment>) {
    let mut nonstressed = Vec::new();
    let mut stressed = Vec::new();
    for run in s.runs() {
        let mut start = run.start;
        while start < run.end {
            let label = s.label[start];
            let mut end = start;
            while end < run.end && s.label[end] == label {
                end += 1;
            }
            // Maximal same-label stretch [start, end): shave the buffer off
            // any side that touches a label switch, then cut left to right.
            let mut lo = start;
            let mut hi = end;
            if start > run.start {
                lo = (start + trim_s).min(end);
            }
            if end < run.end {
                hi = end.saturating_sub(trim_s).max(lo);
            }
            let mut cut = lo;
            while cut + segment_s <= hi {
                let seg = Segment {
                    origin_subject: s.subject_id.clone(),
                    origin_dataset: s.source_dataset,
                    label,
                    start_offset_s: s.t[cut],
                    eda: s.eda_us[cut..cut + segment_s].to_vec(),
                    hr: s.hr_bpm[cut..cut + segment_s].to_vec(),
                };
                if label == 1 {
                    stressed.push(seg);
                } else {
                    nonstressed.push(seg);
                }
                cut += segment_s;
            }
            start = end;
        }
    }
    (nonstressed, stressed)
}

/// Draws one synthetic subject: a baseline block then a stress block, each
/// drawn uniformly with replacement from its class pool. The label sequence
/// steps from 0 to 1 exactly at the block boundary, which is also a run
/// boundary so windowing never mixes the blocks.
pub fn sample_subject(
    pool: &SegmentPool,
    layout: &SubjectLayout,
    synth_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticSubject, SynthesisError> {
    let (n_baseline, n_stress) = layout.block_counts(pool.segment_s)?;
    if pool.nonstressed.is_empty() {
        return Err(SynthesisError::InsufficientPool { class: "non-stressed" });
    }
    if pool.stressed.is_empty() {
        return Err(SynthesisError::InsufficientPool { class: "stressed" });
    }

    let total = layout.total_s();
    let mut eda = Vec::with_capacity(total);
    let mut hr = Vec::with_capacity(total);
    let mut constituents = Vec::with_capacity(n_baseline + n_stress);
    for (count, class, segments) in [
        (n_baseline, 0u8, &pool.nonstressed),
        (n_stress, 1u8, &pool.stressed),
    ] {
        for _ in 0..count {
            let idx = rng.gen_range(0..segments.len());
            let seg = &segments[idx];
            eda.extend_from_slice(&seg.eda);
            hr.extend_from_slice(&seg.hr);
            constituents.push(Constituent {
                class_label: class,
                index_in_class: idx,
                origin_subject: seg.origin_subject.clone(),
                origin_dataset: seg.origin_dataset,
                start_offset_s: seg.start_offset_s,
            });
        }
    }

    let baseline_len = n_baseline * pool.segment_s;
    let mut label = vec![0u8; baseline_len];
    label.extend(vec![1u8; n_stress * pool.segment_s]);
    let series = UniformSeries::with_runs(
        synth_id,
        eda,
        hr,
        label,
        SourceDataset::Canonical,
        vec![0, baseline_len],
    )?;
    Ok(SyntheticSubject { synth_id: synth_id.into(), series, constituents })
}

/// Draws `n_subjects` synthetic subjects `X1..Xn` from one seeded stream.
pub fn build_synthetic_dataset(
    pool: &SegmentPool,
    layout: &SubjectLayout,
    n_subjects: usize,
    seed: u64,
) -> Result<Vec<SyntheticSubject>, SynthesisError> {
    if n_subjects == 0 {
        return Err(SynthesisError::EmptyInput { detail: "zero synthetic subjects requested".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n_subjects)
        .map(|i| sample_subject(pool, layout, &format!("X{i}"), &mut rng))
        .collect()
}

/// Ratio of non-stressed to stressed labels, the positive-class weight for
/// imbalanced training.
pub fn class_weight(labels: &[u8]) -> Result<f64, SynthesisError> {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(SynthesisError::SingleClass);
    }
    Ok(zeros as f64 / ones as f64)
}

/// Row-level rebalancing strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMode {
    /// Duplicate minority rows until the classes match.
    Over,
    /// Drop majority rows until the classes match.
    Under,
    /// Meet at the midpoint: oversample the minority and undersample the
    /// majority to `(n_min + n_maj) / 2` each.
    Both,
}

impl BalanceMode {
    pub fn parse(s: &str) -> Option<BalanceMode> {
        match s.to_ascii_lowercase().as_str() {
            "over" => Some(BalanceMode::Over),
            "under" => Some(BalanceMode::Under),
            "both" => Some(BalanceMode::Both),
            _ => None,
        }
    }
}

/// Rebalances rows to equal class counts.
///
/// Retained rows keep their original order; duplicated minority rows are
/// appended at the end in draw order. Downsampling selects without
/// replacement, upsampling with replacement.
pub fn resample_balance(
    rows: &[FeatureRow],
    mode: BalanceMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<FeatureRow>, SynthesisError> {
    let ones: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.label == 1).map(|(i, _)| i).collect();
    let zeros: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.label == 0).map(|(i, _)| i).collect();
    if ones.is_empty() || zeros.is_empty() {
        return Err(SynthesisError::SingleClass);
    }
    let (minority, majority) = if ones.len() <= zeros.len() { (&ones, &zeros) } else { (&zeros, &ones) };
    let (min_target, maj_target) = match mode {
        BalanceMode::Over => (majority.len(), majority.len()),
        BalanceMode::Under => (minority.len(), minority.len()),
        BalanceMode::Both => {
            let mid = (minority.len() + majority.len()) / 2;
            (mid, mid)
        }
    };

    // Which majority rows survive (all the minority's survive by construction).
    let kept_majority = sample_without_replacement(majority, maj_target, rng);
    let mut keep = vec![false; rows.len()];
    for &i in minority.iter().chain(&kept_majority) {
        keep[i] = true;
    }
    let mut out: Vec<FeatureRow> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, r)| r.clone())
        .collect();
    for _ in 0..min_target.saturating_sub(minority.len()) {
        let pick = minority[rng.gen_range(0..minority.len())];
        out.push(rows[pick].clone());
    }
    Ok(out)
}

/// K distinct picks via partial Fisher–Yates, returned in original order.
fn sample_without_replacement(indices: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k >= indices.len() {
        return indices.to_vec();
    }
    let mut shuffled = indices.to_vec();
    for i in 0..k {
        let j = rng.gen_range(i..shuffled.len());
        shuffled.swap(i, j);
    }
    let mut kept = shuffled[..k].to_vec();
    kept.sort_unstable();
    kept
}

/// Writes the pool as an auditable manifest:
/// `#` header lines with counts, then one
/// `class,origin_subject,origin_dataset,start_offset_s` line per segment.
pub fn write_pool_manifest(pool: &SegmentPool, path: &Path) -> Result<(), SynthesisError> {
    let mut out = String::new();
    writeln!(out, "# segment pool: segment_s={}", pool.segment_s).expect("string write");
    writeln!(out, "# nonstressed={} stressed={} total={}", pool.nonstressed.len(), pool.stressed.len(), pool.total())
        .expect("string write");
    for (dataset, count) in pool.provenance() {
        writeln!(out, "# origin {dataset}: {count}").expect("string write");
    }
    writeln!(out, "class,origin_subject,origin_dataset,start_offset_s").expect("string write");
    for seg in pool.nonstressed.iter().chain(&pool.stressed) {
        writeln!(out, "{},{},{},{}", seg.label, seg.origin_subject, seg.origin_dataset, seg.start_offset_s)
            .expect("string write");
    }
    std::fs::write(path, out).map_err(|source| SynthesisError::Io { path: path.into(), source })
}

/// Reloads a pool manifest by slicing the referenced series, without
/// re-running segmentation.
pub fn load_pool_manifest(path: &Path, series: &[UniformSeries]) -> Result<SegmentPool, SynthesisError> {
    let text = std::fs::read_to_string(path).map_err(|source| SynthesisError::Io { path: path.into(), source })?;
    let mut segment_s: Option<usize> = None;
    let mut nonstressed = Vec::new();
    let mut stressed = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("segment pool: segment_s=") {
                segment_s = v.trim().parse().ok();
            }
            continue;
        }
        if !saw_header {
            if line != "class,origin_subject,origin_dataset,start_offset_s" {
                return Err(SynthesisError::MalformedManifest {
                    line: line_no,
                    detail: "unexpected column header".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let seg_len = segment_s.ok_or(SynthesisError::MalformedManifest {
            line: line_no,
            detail: "missing segment_s header".into(),
        })?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(SynthesisError::MalformedManifest { line: line_no, detail: "expected 4 columns".into() });
        }
        let label: u8 = cols[0].parse().map_err(|_| SynthesisError::MalformedManifest {
            line: line_no,
            detail: "bad class".into(),
        })?;
        let offset: usize = cols[3].parse().map_err(|_| SynthesisError::MalformedManifest {
            line: line_no,
            detail: "bad offset".into(),
        })?;
        let origin = series
            .iter()
            .find(|s| s.subject_id == cols[1])
            .ok_or_else(|| SynthesisError::MalformedManifest {
                line: line_no,
                detail: format!("unknown origin subject {:?}", cols[1]),
            })?;
        if offset + seg_len > origin.len() {
            return Err(SynthesisError::MalformedManifest {
                line: line_no,
                detail: format!("segment at {offset} overruns subject {:?}", cols[1]),
            });
        }
        let seg = Segment {
            origin_subject: origin.subject_id.clone(),
            origin_dataset: origin.source_dataset,
            label,
            start_offset_s: offset as u32,
            eda: origin.eda_us[offset..offset + seg_len].to_vec(),
            hr: origin.hr_bpm[offset..offset + seg_len].to_vec(),
        };
        if label == 1 {
            stressed.push(seg);
        } else {
            nonstressed.push(seg);
        }
    }
    let segment_s = segment_s.ok_or(SynthesisError::MalformedManifest {
        line: 1,
        detail: "missing segment_s header".into(),
    })?;
    Ok(SegmentPool { segment_s, nonstressed, stressed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_series(id: &str, blocks: &[(usize, u8)]) -> UniformSeries {
        let mut eda = Vec::new();
        let mut hr = Vec::new();
        let mut label = Vec::new();
        for &(len, l) in blocks {
            for i in 0..len {
                eda.push(1.0 + l as f64 + i as f64 * 1e-3);
                hr.push(70.0 + 10.0 * l as f64);
                label.push(l);
            }
        }
        UniformSeries::new(id, eda, hr, label, SourceDataset::Fixture).unwrap()
    }

    #[test]
    fn pool_chops_runs_and_drops_remainders() {
        // 360 s stressed + 200 s non-stressed → 2 + 1 segments.
        let s = labeled_series("a", &[(360, 1), (200, 0)]);
        let pool = build_segment_pool(std::slice::from_ref(&s), 180).unwrap();
        assert_eq!(pool.stressed.len(), 2);
        assert_eq!(pool.nonstressed.len(), 1);
        assert_eq!(pool.stressed[0].start_offset_s, 0);
        assert_eq!(pool.stressed[1].start_offset_s, 180);
        assert_eq!(pool.nonstressed[0].start_offset_s, 360);
        assert!(pool.stressed.iter().all(|seg| seg.eda.len() == 180));
    }

    #[test]
    fn segments_match_their_origin_slices() {
        let s = labeled_series("a", &[(400, 1)]);
        let pool = build_segment_pool(std::slice::from_ref(&s), 180).unwrap();
        for seg in &pool.stressed {
            let o = seg.start_offset_s as usize;
            assert_eq!(&seg.eda[..], &s.eda_us[o..o + 180]);
            assert_eq!(&seg.hr[..], &s.hr_bpm[o..o + 180]);
        }
    }

    #[test]
    fn class_counts_ignore_subject_order() {
        let a = labeled_series("a", &[(360, 1), (200, 0)]);
        let b = labeled_series("b", &[(190, 0), (181, 1)]);
        let p1 = build_segment_pool(&[a.clone(), b.clone()], 180).unwrap();
        let p2 = build_segment_pool(&[b, a], 180).unwrap();
        assert_eq!(p1.stressed.len(), p2.stressed.len());
        assert_eq!(p1.nonstressed.len(), p2.nonstressed.len());
    }

    #[test]
    fn short_runs_yield_empty_pool() {
        let s = labeled_series("a", &[(100, 1), (100, 0)]);
        assert!(matches!(
            build_segment_pool(std::slice::from_ref(&s), 180),
            Err(SynthesisError::EmptyPool { segment_s: 180 })
        ));
    }

    #[test]
    fn trim_shaves_label_transitions_but_not_edges() {
        // One run: 300 s baseline, 300 s stress; one transition at t = 300.
        let s = labeled_series("a", &[(300, 0), (300, 1)]);
        let full = build_segment_pool(std::slice::from_ref(&s), 60).unwrap();
        assert_eq!((full.nonstressed.len(), full.stressed.len()), (5, 5));

        let trimmed = build_segment_pool_trimmed(std::slice::from_ref(&s), 60, 30).unwrap();
        // Each side of the switch loses 30 s; recording edges keep theirs.
        assert_eq!((trimmed.nonstressed.len(), trimmed.stressed.len()), (4, 4));
        assert_eq!(trimmed.nonstressed[0].start_offset_s, 0);
        assert_eq!(trimmed.stressed[0].start_offset_s, 330);
        // A buffer wider than the stretch just empties it.
        let huge = build_segment_pool_trimmed(std::slice::from_ref(&s), 60, 300);
        assert!(matches!(huge, Err(SynthesisError::EmptyPool { .. })));
    }

    fn pool_for_sampling() -> SegmentPool {
        let a = labeled_series("a", &[(720, 0), (720, 1)]);
        let b = labeled_series("b", &[(360, 1), (360, 0)]);
        build_segment_pool(&[a, b], 180).unwrap()
    }

    #[test]
    fn sampled_subject_has_layout_shape() {
        let pool = pool_for_sampling();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let subj = sample_subject(&pool, &SubjectLayout::new(6, 6), "X1", &mut rng).unwrap();
        assert_eq!(subj.series.len(), 720);
        assert_eq!(subj.constituents.len(), 4);
        assert_eq!(&subj.series.label[..360], &vec![0u8; 360][..]);
        assert_eq!(&subj.series.label[360..], &vec![1u8; 360][..]);
        // The label step is a run boundary.
        assert_eq!(subj.series.runs().collect::<Vec<_>>(), vec![0..360, 360..720]);
    }

    #[test]
    fn twelve_twelve_layout_doubles_everything() {
        let pool = pool_for_sampling();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let subj = sample_subject(&pool, &SubjectLayout::new(12, 12), "X1", &mut rng).unwrap();
        assert_eq!(subj.series.len(), 1440);
        assert_eq!(subj.constituents.iter().filter(|c| c.class_label == 0).count(), 4);
        assert_eq!(subj.constituents.iter().filter(|c| c.class_label == 1).count(), 4);
    }

    #[test]
    fn constituent_samples_are_correct_slices() {
        let pool = pool_for_sampling();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let subj = sample_subject(&pool, &SubjectLayout::new(6, 6), "X1", &mut rng).unwrap();
        let first = &subj.constituents[0];
        let seg = &pool.nonstressed[first.index_in_class];
        assert_eq!(&subj.series.eda_us[..180], &seg.eda[..]);
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        let pool = pool_for_sampling();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for layout in [SubjectLayout::new(0, 6), SubjectLayout::new(4, 6)] {
            assert!(matches!(
                sample_subject(&pool, &layout, "X1", &mut rng),
                Err(SynthesisError::InvalidLayout { .. })
            ));
        }
    }

    #[test]
    fn missing_class_is_insufficient() {
        let s = labeled_series("a", &[(360, 1)]);
        let pool = build_segment_pool(std::slice::from_ref(&s), 180).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_subject(&pool, &SubjectLayout::new(3, 3), "X1", &mut rng),
            Err(SynthesisError::InsufficientPool { class: "non-stressed" })
        ));
    }

    #[test]
    fn dataset_build_is_deterministic() {
        let pool = pool_for_sampling();
        let layout = SubjectLayout::new(6, 6);
        let a = build_synthetic_dataset(&pool, &layout, 10, 42).unwrap();
        let b = build_synthetic_dataset(&pool, &layout, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = build_synthetic_dataset(&pool, &layout, 10, 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(a[0].synth_id, "X1");
        assert_eq!(a[9].synth_id, "X10");
    }

    #[test]
    fn class_weight_is_zeros_over_ones() {
        let mut labels = vec![0u8; 796];
        labels.extend(vec![1u8; 2962]);
        let w = class_weight(&labels).unwrap();
        assert!((w - 796.0 / 2962.0).abs() < 1e-12);
        assert_eq!(class_weight(&[0, 1]).unwrap(), 1.0);
        assert!(matches!(class_weight(&[1, 1]), Err(SynthesisError::SingleClass)));
    }

    fn rows(n0: usize, n1: usize) -> Vec<FeatureRow> {
        let mut out = Vec::new();
        for i in 0..n0 + n1 {
            out.push(FeatureRow {
                subject_id: format!("r{i}"),
                window_start_s: i as u32,
                values: vec![i as f64],
                label: u8::from(i >= n0),
            });
        }
        out
    }

    #[test]
    fn resample_targets_exact_counts() {
        let rows = rows(10, 2);
        let count = |rs: &[FeatureRow], l: u8| rs.iter().filter(|r| r.label == l).count();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let over = resample_balance(&rows, BalanceMode::Over, &mut rng).unwrap();
        assert_eq!((count(&over, 0), count(&over, 1)), (10, 10));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let under = resample_balance(&rows, BalanceMode::Under, &mut rng).unwrap();
        assert_eq!((count(&under, 0), count(&under, 1)), (2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let both = resample_balance(&rows, BalanceMode::Both, &mut rng).unwrap();
        assert_eq!((count(&both, 0), count(&both, 1)), (6, 6));
    }

    #[test]
    fn resample_is_deterministic_and_preserves_membership() {
        let rows = rows(9, 4);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            resample_balance(&rows, BalanceMode::Both, &mut rng).unwrap()
        };
        assert_eq!(run(7), run(7));
        for r in run(7) {
            assert!(rows.iter().any(|o| o == &r));
        }
        assert!(matches!(
            resample_balance(&rows[..9], BalanceMode::Over, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(SynthesisError::SingleClass)
        ));
    }

    #[test]
    fn manifest_round_trips_bit_exactly() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("pool.txt");
        let a = labeled_series("a", &[(720, 0), (720, 1)]);
        let b = labeled_series("b", &[(360, 1), (360, 0)]);
        let series = [a, b];
        let pool = build_segment_pool(&series, 180).unwrap();
        write_pool_manifest(&pool, &path).unwrap();
        let reloaded = load_pool_manifest(&path, &series).unwrap();
        assert_eq!(pool, reloaded);
    }
}
