//! Small numeric helpers shared across the pipeline.

/// Derives an independent per-task seed from a master seed, so parallel and
/// serial execution of seeded sub-tasks (folds, iterations) agree exactly.
///
/// SplitMix64 finalizer over `master ^ golden·(stream+1)`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ (stream.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard normal draw via Box–Muller.
pub fn gauss(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng as _;
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Numerically stable logistic function, strictly inside (0, 1) for finite x.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow for large |x|.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Percentile in [0, 100] with linear interpolation between order statistics.
/// `values` need not be sorted; must be non-empty.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = (v.len() - 1) as f64 * (p / 100.0);
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        let frac = rank - lo as f64;
        v[lo] + (v[hi] - v[lo]) * frac
    }
}

/// Linear interpolation of `(xs, ys)` sample points (xs strictly increasing)
/// at `x`, holding the boundary value outside the sampled range.
pub fn interp_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    // partition_point returns the first index with xs[i] > x.
    let hi = xs.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let span = xs[hi] - xs[lo];
    let frac = (x - xs[lo]) / span;
    ys[lo] + (ys[hi] - ys[lo]) * frac
}

/// Centered moving average with window `w` samples, truncated at the edges.
pub fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let w = w.max(1);
    let half = w / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let sum: f64 = x[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    out
}

/// Mean of a non-empty slice.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n−1 denominator); 0 for fewer than two samples
/// or a constant slice.
pub fn sample_sd(x: &[f64]) -> f64 {
    sample_var(x).sqrt()
}

/// Sample variance (n−1 denominator); 0 for fewer than two samples or a
/// constant slice.
pub fn sample_var(x: &[f64]) -> f64 {
    if x.len() < 2 || is_constant(x) {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// True when all values are bit-identical; constant inputs short-circuit the
/// moment-based statistics to exact zeros instead of rounding noise.
pub fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_stable_and_spreads() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-12);
        assert!(sigmoid(-30.0) > 0.0);
        assert!(sigmoid(30.0) < 1.0);
        // Extreme inputs saturate without producing NaN or infinities.
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for x in [-20.0, -1.0, 0.0, 1.0, 20.0] {
            assert!((softplus(x) - (1f64 + x.exp()).ln()).abs() < 1e-12);
        }
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert!((percentile(&v, 50.0) - 2.5).abs() < 1e-12);
        assert!((percentile(&v, 60.0) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn interp_holds_ends() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [10.0, 20.0, 40.0];
        assert_eq!(interp_clamped(&xs, &ys, 0.5), 10.0);
        assert_eq!(interp_clamped(&xs, &ys, 9.0), 40.0);
        assert!((interp_clamped(&xs, &ys, 3.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn moving_average_truncates_at_edges() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let ma = moving_average(&x, 3);
        assert!((ma[0] - 1.5).abs() < 1e-12);
        assert!((ma[1] - 2.0).abs() < 1e-12);
        assert!((ma[3] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn variance_of_constant_is_exactly_zero() {
        assert_eq!(sample_var(&[0.1, 0.1, 0.1]), 0.0);
        assert_eq!(sample_sd(&[5.0]), 0.0);
        assert!((sample_var(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-12);
    }
}
