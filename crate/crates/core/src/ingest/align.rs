//! Alignment of a raw session onto the uniform 1 Hz grid.

use super::{derive_hr_from_bvp, Channel, ChannelKind, IngestError, LabelClass, LabelProtocol, SensorSession};
use crate::series::UniformSeries;

/// Resamples a session to 1 Hz and attaches one 0/1 label per second.
///
/// EDA becomes the per-second mean of the raw samples; HR is linearly
/// interpolated from the native channel, or derived from BVP when no HR
/// channel exists. Each second takes the label of the span covering its
/// midpoint, mapped through `protocol`; uncovered seconds and DROP-mapped
/// labels are removed, splitting the series into contiguous runs.
pub fn align_uniform(session: &SensorSession, protocol: &LabelProtocol) -> Result<UniformSeries, IngestError> {
    let eda = session.channel(ChannelKind::Eda).ok_or(IngestError::MissingChannel {
        dir: session.subject_id.clone().into(),
        channel: "EDA",
    })?;

    let derived;
    let hr: &Channel = match session.channel(ChannelKind::Hr) {
        Some(native) => native,
        None => {
            let bvp = session.channel(ChannelKind::Bvp).ok_or(IngestError::MissingChannel {
                dir: session.subject_id.clone().into(),
                channel: "BVP or HR",
            })?;
            derived = derive_hr_from_bvp(bvp)?;
            &derived
        }
    };

    let seconds = eda.duration_s().min(hr.duration_s()).floor();
    if seconds < 1.0 {
        return Err(IngestError::TooShort {
            detail: format!("subject {:?} has under one usable second", session.subject_id),
        });
    }
    let seconds = seconds as usize;

    validate_spans(session)?;

    let hr_times: Vec<f64> = (0..hr.n_samples()).map(|i| i as f64 / hr.rate_hz).collect();

    let mut eda_out = Vec::with_capacity(seconds);
    let mut hr_out = Vec::with_capacity(seconds);
    let mut label_out = Vec::with_capacity(seconds);
    let mut run_starts = Vec::new();
    let mut in_gap = true;

    for s in 0..seconds {
        let class = match raw_label_at(session, s as f64 + 0.5) {
            Some(raw) => protocol
                .map(raw)
                .ok_or_else(|| IngestError::UnmappedLabel { raw: raw.to_string() })?,
            // Seconds no span covers carry no usable label.
            None => LabelClass::Drop,
        };
        let label = match class {
            LabelClass::Zero => 0u8,
            LabelClass::One => 1u8,
            LabelClass::Drop => {
                in_gap = true;
                continue;
            }
        };
        if in_gap {
            run_starts.push(eda_out.len());
            in_gap = false;
        }
        eda_out.push(second_mean(eda, s));
        hr_out.push(crate::util::interp_clamped(&hr_times, &hr.samples, s as f64));
        label_out.push(label);
    }

    if eda_out.is_empty() {
        return Err(IngestError::EmptyAfterDrop { subject_id: session.subject_id.clone() });
    }

    Ok(UniformSeries::with_runs(
        session.subject_id.clone(),
        eda_out,
        hr_out,
        label_out,
        session.source_dataset,
        run_starts,
    )?)
}

/// Mean of the samples falling in `[s, s+1)`; interpolates when the channel
/// is slower than 1 Hz and contributes no sample to the second.
fn second_mean(channel: &Channel, s: usize) -> f64 {
    let rate = channel.rate_hz;
    let lo = ((s as f64) * rate - 1e-9).ceil().max(0.0) as usize;
    let hi = (((s + 1) as f64) * rate - 1e-9).ceil() as usize;
    let hi = hi.min(channel.n_samples());
    if lo < hi {
        channel.samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    } else {
        let times: Vec<f64> = (0..channel.n_samples()).map(|i| i as f64 / rate).collect();
        crate::util::interp_clamped(&times, &channel.samples, s as f64 + 0.5)
    }
}

fn raw_label_at(session: &SensorSession, t: f64) -> Option<&str> {
    session
        .label_spans
        .iter()
        .find(|span| span.start_s <= t && t < span.end_s)
        .map(|span| span.raw_label.as_str())
}

fn validate_spans(session: &SensorSession) -> Result<(), IngestError> {
    let spans = &session.label_spans;
    for span in spans {
        // Also rejects NaN endpoints, which fail every comparison.
        if span.start_s >= span.end_s || span.start_s.is_nan() || span.end_s.is_nan() {
            return Err(IngestError::InvalidLabelSpans {
                detail: format!(
                    "span {:?} [{}, {}) is empty or inverted",
                    span.raw_label, span.start_s, span.end_s
                ),
            });
        }
    }
    let mut sorted: Vec<&super::LabelSpan> = spans.iter().collect();
    sorted.sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).expect("finite span bounds"));
    for pair in sorted.windows(2) {
        if pair[0].end_s > pair[1].start_s + 1e-9 {
            return Err(IngestError::InvalidLabelSpans {
                detail: format!(
                    "spans {:?} and {:?} overlap",
                    pair[0].raw_label, pair[1].raw_label
                ),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LabelSpan;
    use crate::series::SourceDataset;

    fn session(eda: Channel, hr: Channel, spans: Vec<LabelSpan>) -> SensorSession {
        SensorSession {
            subject_id: "T1".into(),
            source_dataset: SourceDataset::Fixture,
            channels: vec![eda, hr],
            label_spans: spans,
            malformed_lines: 0,
        }
    }

    fn eda_channel(samples: Vec<f64>, rate: f64) -> Channel {
        Channel { kind: ChannelKind::Eda, rate_hz: rate, start_epoch_s: 0.0, samples }
    }

    fn hr_channel(samples: Vec<f64>) -> Channel {
        Channel { kind: ChannelKind::Hr, rate_hz: 1.0, start_epoch_s: 0.0, samples }
    }

    fn span(start: f64, end: f64, raw: &str) -> LabelSpan {
        LabelSpan { start_s: start, end_s: end, raw_label: raw.into() }
    }

    #[test]
    fn hundred_second_session_labels_split_50_50() {
        let s = session(
            eda_channel(vec![1.0; 400], 4.0),
            hr_channel(vec![70.0; 100]),
            vec![span(0.0, 50.0, "baseline"), span(50.0, 100.0, "stress")],
        );
        let u = align_uniform(&s, &LabelProtocol::tags()).unwrap();
        assert_eq!(u.len(), 100);
        assert_eq!(u.label.iter().filter(|&&l| l == 0).count(), 50);
        assert_eq!(&u.label[..50], &vec![0u8; 50][..]);
        assert_eq!(&u.label[50..], &vec![1u8; 50][..]);
        assert_eq!(u.runs().collect::<Vec<_>>(), vec![0..100]);
    }

    #[test]
    fn eda_second_mean_averages_four_samples() {
        let mut eda = vec![1.0, 1.0, 3.0, 3.0];
        eda.extend(vec![2.0; 4]);
        let s = session(
            eda_channel(eda, 4.0),
            hr_channel(vec![70.0; 2]),
            vec![span(0.0, 2.0, "baseline")],
        );
        let u = align_uniform(&s, &LabelProtocol::tags()).unwrap();
        assert_eq!(u.eda_us[0], 2.0);
        assert_eq!(u.eda_us[1], 2.0);
    }

    #[test]
    fn hr_interpolates_between_native_samples() {
        let hr = Channel { kind: ChannelKind::Hr, rate_hz: 0.5, start_epoch_s: 0.0, samples: vec![60.0, 80.0, 60.0] };
        let s = session(
            eda_channel(vec![1.0; 16], 4.0),
            hr,
            vec![span(0.0, 4.0, "baseline")],
        );
        let u = align_uniform(&s, &LabelProtocol::tags()).unwrap();
        assert_eq!(u.hr_bpm[0], 60.0);
        assert_eq!(u.hr_bpm[1], 70.0);
        assert_eq!(u.hr_bpm[2], 80.0);
        assert_eq!(u.hr_bpm[3], 70.0);
    }

    #[test]
    fn unmapped_raw_label_errors() {
        let s = session(
            eda_channel(vec![1.0; 8], 4.0),
            hr_channel(vec![70.0; 2]),
            vec![span(0.0, 2.0, "amusement")],
        );
        assert!(matches!(
            align_uniform(&s, &LabelProtocol::tags()),
            Err(IngestError::UnmappedLabel { .. })
        ));
    }

    #[test]
    fn dropped_spans_split_runs_and_reindex() {
        let s = session(
            eda_channel(vec![1.0; 40], 4.0),
            hr_channel(vec![70.0; 10]),
            vec![
                span(0.0, 4.0, "baseline"),
                span(4.0, 6.0, "unlabeled"),
                span(6.0, 10.0, "stress"),
            ],
        );
        let u = align_uniform(&s, &LabelProtocol::tags()).unwrap();
        assert_eq!(u.len(), 8);
        assert_eq!(u.t, (0..8).collect::<Vec<u32>>());
        assert_eq!(u.runs().collect::<Vec<_>>(), vec![0..4, 4..8]);
        assert_eq!(u.label, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn all_dropped_is_an_error() {
        let s = session(
            eda_channel(vec![1.0; 8], 4.0),
            hr_channel(vec![70.0; 2]),
            vec![span(0.0, 2.0, "unlabeled")],
        );
        assert!(matches!(
            align_uniform(&s, &LabelProtocol::tags()),
            Err(IngestError::EmptyAfterDrop { .. })
        ));
    }

    #[test]
    fn overlapping_spans_are_rejected() {
        let s = session(
            eda_channel(vec![1.0; 8], 4.0),
            hr_channel(vec![70.0; 2]),
            vec![span(0.0, 1.5, "baseline"), span(1.0, 2.0, "stress")],
        );
        assert!(matches!(
            align_uniform(&s, &LabelProtocol::tags()),
            Err(IngestError::InvalidLabelSpans { .. })
        ));
    }

    #[test]
    fn uncovered_seconds_are_dropped() {
        let s = session(
            eda_channel(vec![1.0; 16], 4.0),
            hr_channel(vec![70.0; 4]),
            vec![span(0.0, 2.0, "baseline"), span(3.0, 4.0, "stress")],
        );
        let u = align_uniform(&s, &LabelProtocol::tags()).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(u.runs().count(), 2);
    }
}
