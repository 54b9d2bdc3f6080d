//! Heart rate derivation from blood volume pulse.

use super::{Channel, ChannelKind, IngestError};
use crate::util::{interp_clamped, moving_average, percentile};

const MIN_RATE_HZ: f64 = 32.0;
const MIN_DURATION_S: f64 = 10.0;
/// Minimum spacing between accepted pulse peaks (~171 bpm ceiling per beat pair).
const REFRACTORY_S: f64 = 0.35;
/// Peaks must clear this percentile of the positive detrended excursions.
const PEAK_PERCENTILE: f64 = 60.0;
const HR_CLAMP: (f64, f64) = (30.0, 220.0);
const SMOOTH_WINDOW_S: usize = 5;

/// Derives a 1 Hz HR channel from a BVP channel.
///
/// The signal is detrended with a centred 1-second moving average; pulse
/// peaks are local maxima above the 60th percentile of positive excursions,
/// at least 0.35 s apart (the larger peak wins inside the refractory window).
/// Each inter-beat interval yields an instantaneous rate at the later peak,
/// which is then linearly interpolated onto whole seconds, clamped to
/// [30, 220] bpm and smoothed with a centred 5-second moving average.
pub fn derive_hr_from_bvp(bvp: &Channel) -> Result<Channel, IngestError> {
    if bvp.rate_hz < MIN_RATE_HZ {
        return Err(IngestError::UnsupportedRate {
            rate: bvp.rate_hz,
            detail: format!("pulse detection needs at least {MIN_RATE_HZ} Hz"),
        });
    }
    let duration = bvp.duration_s();
    if duration < MIN_DURATION_S {
        return Err(IngestError::TooShort {
            detail: format!("BVP covers {duration:.1} s, need {MIN_DURATION_S} s"),
        });
    }

    let ma = moving_average(&bvp.samples, bvp.rate_hz.round() as usize);
    let detrended: Vec<f64> = bvp.samples.iter().zip(&ma).map(|(x, m)| x - m).collect();

    let positives: Vec<f64> = detrended.iter().copied().filter(|&v| v > 0.0).collect();
    // Guard against rounding residue on flat signals: demand a pulse
    // amplitude that is non-negligible relative to the raw signal scale.
    let scale = bvp.samples.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let amplitude = positives.iter().fold(0.0f64, |a, &v| a.max(v));
    if positives.is_empty() || amplitude <= 1e-9 * scale.max(1e-12) {
        return Err(IngestError::NoPeaksDetected);
    }
    let threshold = percentile(&positives, PEAK_PERCENTILE);

    let refractory = REFRACTORY_S * bvp.rate_hz;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..detrended.len().saturating_sub(1) {
        let v = detrended[i];
        if v <= threshold || v <= detrended[i - 1] || v < detrended[i + 1] {
            continue;
        }
        match peaks.last() {
            Some(&last) if ((i - last) as f64) < refractory => {
                if v > detrended[last] {
                    *peaks.last_mut().expect("non-empty") = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    if peaks.len() < 2 {
        return Err(IngestError::NoPeaksDetected);
    }

    // Instantaneous rate from each inter-beat interval, stamped at the later peak.
    let mut beat_t = Vec::with_capacity(peaks.len() - 1);
    let mut beat_hr = Vec::with_capacity(peaks.len() - 1);
    for pair in peaks.windows(2) {
        let ibi = (pair[1] - pair[0]) as f64 / bvp.rate_hz;
        beat_t.push(pair[1] as f64 / bvp.rate_hz);
        beat_hr.push(60.0 / ibi);
    }

    let seconds = duration.floor() as usize;
    let mut hr: Vec<f64> = (0..seconds)
        .map(|s| interp_clamped(&beat_t, &beat_hr, s as f64).clamp(HR_CLAMP.0, HR_CLAMP.1))
        .collect();
    hr = moving_average(&hr, SMOOTH_WINDOW_S);

    Ok(Channel {
        kind: ChannelKind::Hr,
        rate_hz: 1.0,
        start_epoch_s: bvp.start_epoch_s,
        samples: hr,
    })
}
