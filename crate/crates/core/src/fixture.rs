//! Desk-scale synthetic recordings with a programmed stress response.
//!
//! Each subject is a 20-minute 1 Hz session: heart rate and electrodermal
//! activity wander around per-subject baselines, and one contiguous stress
//! span (45–55% of the session) shifts HR by +15 bpm and EDA by +1.5 µS.
//! The physiological response ramps in over the 30 s after onset and decays
//! over the 30 s after release, so windows near the boundaries genuinely
//! overlap the classes and trained models score below 1.0.
//!
//! `write_out` lays the subjects on disk three ways at once so the whole
//! ingest surface is exercised: one device-format session directory per
//! subject, one canonical CSV per dataset role, and a registry file wiring
//! them together. Subjects rotate through the dataset roles round-robin;
//! the third role is loaded back through the session-directory adapter
//! (pulse channel only, so HR derivation runs too), the rest through their
//! canonical CSVs. Everything is a pure function of `(n_subjects, seed)`,
//! byte for byte.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    write_canonical_csv, write_e4_session, Channel, ChannelKind, IngestError, LabelSpan,
    SensorSession,
};
use crate::series::{SourceDataset, UniformSeries};
use crate::util::{derive_seed, gauss};

/// Session length: 20 minutes at 1 Hz.
pub const SESSION_S: u32 = 1200;
/// Stress span length bounds; 540–660 s of 1200 keeps every subject's
/// stressed fraction inside 45–55%.
const STRESS_MIN_S: u32 = 540;
const STRESS_MAX_S: u32 = 660;
/// Clean seconds guaranteed before span start and after span end.
const EDGE_MARGIN_S: u32 = 60;
/// Linear onset/offset ramp of the physiological response.
const RAMP_S: f64 = 30.0;
const HR_SHIFT_BPM: f64 = 15.0;
const EDA_SHIFT_US: f64 = 1.5;
/// The N(72, 5) baseline HR marginal splits into a per-subject offset,
/// slow wander, and per-second noise; likewise N(1.5, 0.3) for EDA.
const HR_BASE: f64 = 72.0;
const HR_SUBJECT_SD: f64 = 3.0;
const HR_NOISE_SD: f64 = 3.4;
const EDA_BASE: f64 = 1.5;
const EDA_SUBJECT_SD: f64 = 0.18;
const EDA_NOISE_SD: f64 = 0.19;

const EDA_RATE_HZ: f64 = 4.0;
const BVP_RATE_HZ: f64 = 64.0;
const TEMP_RATE_HZ: f64 = 4.0;
/// Session start epochs: a fixed base plus one day per subject.
const EPOCH_BASE_S: f64 = 1_700_000_000.0;

/// Dataset roles assigned round-robin by subject index. The third role is
/// the one read back through the session-directory adapter.
pub const ROLES: [SourceDataset; 5] = [
    SourceDataset::Swell,
    SourceDataset::Neuro,
    SourceDataset::Wesad,
    SourceDataset::Ubfc,
    SourceDataset::Exam,
];

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("need at least 2 subjects, got {got}")]
    TooFewSubjects { got: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// One generated subject: the programmed ground truth plus its device-format
/// rendering.
#[derive(Debug, Clone)]
pub struct FixtureSubject {
    pub series: UniformSeries,
    pub session: SensorSession,
    pub role: SourceDataset,
    pub stress_start_s: u32,
    pub stress_len_s: u32,
}

/// Paths produced by [`write_out`], sorted, for manifests and logs.
#[derive(Debug, Clone)]
pub struct FixtureLayout {
    pub out_dir: PathBuf,
    pub registry_path: PathBuf,
    pub files: Vec<PathBuf>,
}

fn role_of(index: usize) -> SourceDataset {
    ROLES[index % ROLES.len()]
}

fn subject_id(index: usize, n_subjects: usize) -> String {
    let width = n_subjects.to_string().len();
    format!("F{:0width$}", index + 1)
}

/// Response strength in [0, 1]: ramps up inside the span start, holds at 1,
/// and decays after the span ends (the body lags the label on both edges).
fn response(t: u32, start: u32, end: u32) -> f64 {
    if t < start {
        0.0
    } else if t < end {
        (f64::from(t - start + 1) / RAMP_S).min(1.0)
    } else {
        (1.0 - f64::from(t - end + 1) / RAMP_S).max(0.0)
    }
}

/// Generates `n_subjects` independent subjects. Subject `i` depends only on
/// `(seed, i, n_subjects)`, never on its neighbours.
pub fn generate(n_subjects: usize, seed: u64) -> Result<Vec<FixtureSubject>, FixtureError> {
    if n_subjects < 2 {
        return Err(FixtureError::TooFewSubjects { got: n_subjects });
    }
    Ok((0..n_subjects).map(|i| generate_subject(i, n_subjects, seed)).collect())
}

fn generate_subject(index: usize, n_subjects: usize, seed: u64) -> FixtureSubject {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64 + 1));
    let id = subject_id(index, n_subjects);
    let role = role_of(index);

    let base_hr = HR_BASE + HR_SUBJECT_SD * gauss(&mut rng);
    let base_eda = (EDA_BASE + EDA_SUBJECT_SD * gauss(&mut rng)).max(0.3);
    let wander_amp = rng.gen_range(2.0..4.0);
    let wander_period = rng.gen_range(180.0..420.0);
    let wander_phase = rng.gen_range(0.0..TAU);
    let drift_amp = rng.gen_range(0.10..0.25);
    let drift_period = rng.gen_range(400.0..900.0);
    let drift_phase = rng.gen_range(0.0..TAU);
    let drift_slope = rng.gen_range(-0.15..0.15);
    let temp_base = 33.5 + rng.gen_range(-0.8..0.8);
    let stress_len = rng.gen_range(STRESS_MIN_S..=STRESS_MAX_S);
    let stress_start = rng.gen_range(EDGE_MARGIN_S..=SESSION_S - EDGE_MARGIN_S - stress_len);
    let stress_end = stress_start + stress_len;

    let mut hr = Vec::with_capacity(SESSION_S as usize);
    let mut eda = Vec::with_capacity(SESSION_S as usize);
    let mut label = Vec::with_capacity(SESSION_S as usize);
    for t in 0..SESSION_S {
        let f = response(t, stress_start, stress_end);
        let ts = f64::from(t);
        let wander = wander_amp * (TAU * ts / wander_period + wander_phase).sin();
        let drift = drift_amp * (TAU * ts / drift_period + drift_phase).sin()
            + drift_slope * ts / f64::from(SESSION_S);
        let hr_t = base_hr + wander + HR_SHIFT_BPM * f + HR_NOISE_SD * gauss(&mut rng);
        let eda_t = base_eda + drift + EDA_SHIFT_US * f + EDA_NOISE_SD * gauss(&mut rng);
        hr.push(hr_t.clamp(40.0, 190.0));
        eda.push(eda_t.max(0.05));
        label.push(u8::from(t >= stress_start && t < stress_end));
    }

    let series = UniformSeries {
        subject_id: id.clone(),
        t: (0..SESSION_S).collect(),
        eda_us: eda.clone(),
        hr_bpm: hr.clone(),
        label,
        source_dataset: role,
        run_starts: vec![0],
    };

    let epoch = EPOCH_BASE_S + 86_400.0 * index as f64;
    let mut channels = vec![Channel {
        kind: ChannelKind::Eda,
        rate_hz: EDA_RATE_HZ,
        start_epoch_s: epoch,
        samples: eda.iter().flat_map(|&v| std::iter::repeat_n(v, 4)).collect(),
    }];
    if role == SourceDataset::Wesad {
        channels.push(Channel {
            kind: ChannelKind::Bvp,
            rate_hz: BVP_RATE_HZ,
            start_epoch_s: epoch,
            samples: synth_bvp(&hr, &mut rng),
        });
    } else {
        channels.push(Channel {
            kind: ChannelKind::Hr,
            rate_hz: 1.0,
            start_epoch_s: epoch,
            samples: hr.clone(),
        });
    }
    channels.push(Channel {
        kind: ChannelKind::Temp,
        rate_hz: TEMP_RATE_HZ,
        start_epoch_s: epoch,
        samples: vec![temp_base; (SESSION_S as usize) * 4],
    });

    let session = SensorSession {
        subject_id: id,
        source_dataset: role,
        channels,
        label_spans: vec![
            LabelSpan { start_s: 0.0, end_s: f64::from(stress_start), raw_label: "baseline".into() },
            LabelSpan {
                start_s: f64::from(stress_start),
                end_s: f64::from(stress_end),
                raw_label: "stress".into(),
            },
            LabelSpan {
                start_s: f64::from(stress_end),
                end_s: f64::from(SESSION_S),
                raw_label: "baseline".into(),
            },
        ],
        malformed_lines: 0,
    };

    FixtureSubject { series, session, role, stress_start_s: stress_start, stress_len_s: stress_len }
}

/// Pulse wave whose instantaneous beat frequency tracks the per-second HR:
/// a phase accumulator stepped at `hr/60` cycles per second, plus a little
/// measurement noise.
fn synth_bvp(hr_bpm: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let per_second = BVP_RATE_HZ as usize;
    let mut samples = Vec::with_capacity(hr_bpm.len() * per_second);
    let mut phase = 0.0f64;
    for &hr in hr_bpm {
        let step = TAU * (hr / 60.0) / BVP_RATE_HZ;
        for _ in 0..per_second {
            phase += step;
            samples.push(phase.sin() + 0.03 * gauss(rng));
        }
    }
    samples
}

/// Writes session directories, per-role canonical CSVs, an all-subjects
/// canonical CSV, and a registry wiring the roles to their files.
pub fn write_out(subjects: &[FixtureSubject], out: &Path) -> Result<FixtureLayout, FixtureError> {
    fs::create_dir_all(out).map_err(|source| IngestError::Io { path: out.into(), source })?;
    let mut files = Vec::new();

    let sessions = out.join("sessions");
    for s in subjects {
        let dir = sessions.join(&s.series.subject_id);
        write_e4_session(&s.session, &dir)?;
        for channel in &s.session.channels {
            files.push(dir.join(channel.kind.file_name()));
        }
        files.push(dir.join("tags.csv"));
    }

    let mut registry = String::new();
    for role in ROLES {
        let members: Vec<&FixtureSubject> = subjects.iter().filter(|s| s.role == role).collect();
        if members.is_empty() {
            continue;
        }
        if role == SourceDataset::Wesad {
            let ids: Vec<String> =
                members.iter().map(|s| format!("{:?}", s.series.subject_id)).collect();
            registry.push_str(&format!(
                "[datasets.{role}]\nadapter = \"e4\"\npath = \"sessions\"\nsubjects = [{}]\n\n",
                ids.join(", ")
            ));
        } else {
            let path = out.join(format!("{role}.csv"));
            let series: Vec<UniformSeries> = members.iter().map(|s| s.series.clone()).collect();
            write_canonical_csv(&series, &path)?;
            files.push(path);
            registry.push_str(&format!(
                "[datasets.{role}]\nadapter = \"canonical\"\npath = \"{role}.csv\"\n\n"
            ));
        }
    }

    let all: Vec<UniformSeries> = subjects.iter().map(|s| s.series.clone()).collect();
    let all_path = out.join("fixture.csv");
    write_canonical_csv(&all, &all_path)?;
    files.push(all_path);

    let registry_path = out.join("registry.toml");
    fs::write(&registry_path, registry)
        .map_err(|source| IngestError::Io { path: registry_path.clone(), source })?;
    files.push(registry_path.clone());

    files.sort();
    Ok(FixtureLayout { out_dir: out.into(), registry_path, files })
}

/// Generates and writes in one step.
pub fn fixture_gen(
    n_subjects: usize,
    seed: u64,
    out: &Path,
) -> Result<FixtureLayout, FixtureError> {
    write_out(&generate(n_subjects, seed)?, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::derive_hr_from_bvp;
    use crate::registry::load_registry;

    fn stressed_fraction(s: &UniformSeries) -> f64 {
        s.label.iter().map(|&l| f64::from(l)).sum::<f64>() / s.label.len() as f64
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn one_subject_is_rejected() {
        assert!(matches!(generate(1, 0), Err(FixtureError::TooFewSubjects { got: 1 })));
    }

    #[test]
    fn labels_land_between_45_and_55_percent_stressed() {
        for s in generate(8, 7).unwrap() {
            let frac = stressed_fraction(&s.series);
            assert!((0.45..=0.55).contains(&frac), "{}: {frac:.3}", s.series.subject_id);
            assert_eq!(s.series.t.len(), SESSION_S as usize);
            assert!(s.series.eda_us.iter().all(|&v| v > 0.0));
            assert!(s.series.hr_bpm.iter().all(|&v| (40.0..=190.0).contains(&v)));
        }
    }

    #[test]
    fn roles_rotate_round_robin() {
        let subjects = generate(8, 7).unwrap();
        let roles: Vec<SourceDataset> = subjects.iter().map(|s| s.role).collect();
        assert_eq!(roles[..5], ROLES[..]);
        assert_eq!(roles[5..], ROLES[..3]);
        let ids: Vec<&str> = subjects.iter().map(|s| s.series.subject_id.as_str()).collect();
        assert_eq!(ids, ["F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8"]);
    }

    #[test]
    fn stress_plateau_shifts_both_signals() {
        let s = &generate(4, 3).unwrap()[0];
        let (start, end) = (s.stress_start_s as usize, (s.stress_start_s + s.stress_len_s) as usize);
        let hr_base = mean(&s.series.hr_bpm[..start - 30]);
        let hr_peak = mean(&s.series.hr_bpm[start + 60..end - 30]);
        assert!((hr_peak - hr_base - 15.0).abs() < 5.0, "HR shift {:.2}", hr_peak - hr_base);
        let eda_base = mean(&s.series.eda_us[..start - 30]);
        let eda_peak = mean(&s.series.eda_us[start + 60..end - 30]);
        assert!((eda_peak - eda_base - 1.5).abs() < 0.5, "EDA shift {:.2}", eda_peak - eda_base);
    }

    #[test]
    fn pulse_channel_encodes_the_programmed_heart_rate() {
        // Subject index 2 carries a pulse wave instead of an HR channel.
        let s = &generate(3, 7).unwrap()[2];
        let bvp = s.session.channels.iter().find(|c| c.kind == ChannelKind::Bvp).unwrap();
        let derived = derive_hr_from_bvp(bvp).unwrap();
        assert_eq!(derived.samples.len(), SESSION_S as usize);

        let (start, end) = (s.stress_start_s as usize, (s.stress_start_s + s.stress_len_s) as usize);
        for (name, range) in
            [("baseline", 10..start - 10), ("stress", start + 40..end - 10)]
        {
            let programmed = mean(&s.series.hr_bpm[range.clone()]);
            let recovered = mean(&derived.samples[range]);
            assert!(
                (recovered - programmed).abs() <= 3.0,
                "{name}: programmed {programmed:.2}, recovered {recovered:.2}"
            );
        }
    }

    #[test]
    fn written_fixture_reloads_through_the_registry() {
        let tmp = tempfile::tempdir().unwrap();
        let subjects = generate(5, 11).unwrap();
        let layout = write_out(&subjects, tmp.path()).unwrap();

        let registry = load_registry(&layout.registry_path).unwrap();
        let (data, warnings) = registry.load_all().unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");

        for s in &subjects {
            let loaded = &data.get(s.role).unwrap()[0];
            assert_eq!(loaded.subject_id, s.series.subject_id);
            assert_eq!(loaded.label, s.series.label, "labels are exact for {}", loaded.subject_id);
            let max_eda_err = loaded
                .eda_us
                .iter()
                .zip(&s.series.eda_us)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            // Device files carry six decimals; per-second means re-average them.
            assert!(max_eda_err < 1e-5, "{}: eda err {max_eda_err}", loaded.subject_id);
        }
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
            let mut files = Vec::new();
            let mut stack = vec![dir.to_path_buf()];
            while let Some(d) = stack.pop() {
                for entry in fs::read_dir(&d).unwrap() {
                    let p = entry.unwrap().path();
                    if p.is_dir() {
                        stack.push(p);
                    } else {
                        let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                        files.push((rel, fs::read(&p).unwrap()));
                    }
                }
            }
            files.sort();
            files
        }

        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        fixture_gen(4, 9, a.path()).unwrap();
        fixture_gen(4, 9, b.path()).unwrap();
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        assert_eq!(sa.len(), sb.len());
        for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
            assert_eq!(na, nb);
            assert_eq!(ba, bb, "{na} differs between runs");
        }

        let c = tempfile::tempdir().unwrap();
        fixture_gen(4, 10, c.path()).unwrap();
        let sc = snapshot(c.path());
        assert!(
            sa.iter().zip(&sc).any(|((_, ba), (_, bc))| ba != bc),
            "different seeds must change the data"
        );
    }
}
