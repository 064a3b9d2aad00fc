//! Burst detection by local peaky-ness: a centered sliding-window z-score.

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;
use crate::store::TimeSeries;

pub const EPSILON: f64 = 1e-9;
pub const DEFAULT_WINDOW: usize = 25;
pub const DEFAULT_TAU: f64 = 3.0;
pub const DEFAULT_MIN_LEN: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstInterval {
    pub start: i64,
    /// Exclusive: one bucket past the last bursting bucket.
    pub end: i64,
    pub peak: f64,
}

fn check_window(window: usize, len: usize) -> Result<(), AnalyticsError> {
    if window % 2 == 0 {
        return Err(AnalyticsError::InvalidArgument(format!("window {window} must be odd")));
    }
    if window < 3 || window > len {
        return Err(AnalyticsError::SeriesTooShort { window, len });
    }
    Ok(())
}

/// z-score of every point against the centered window of `window` points
/// around it, truncated at the series boundaries:
/// `z(t) = (x_t - mean) / (std + EPSILON)` with the population standard
/// deviation. A constant window scores exactly zero.
///
/// Points are taken as given; densify sparse series first if empty buckets
/// should count as zeros.
pub fn local_peakyness(s: &TimeSeries, window: usize) -> Result<Vec<(i64, f64)>, AnalyticsError> {
    let xs = s.values();
    check_window(window, xs.len())?;
    let half = window / 2;
    let out = xs
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(xs.len());
            let w = &xs[lo..hi];
            if w.iter().all(|&v| v == x) {
                return (s.points[t].0, 0.0);
            }
            let n = w.len() as f64;
            let mean = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (s.points[t].0, (x - mean) / (var.sqrt() + EPSILON))
        })
        .collect();
    Ok(out)
}

/// Maximal runs of at least `min_len` consecutive points with `z >= tau`.
pub fn detect_bursts(
    s: &TimeSeries,
    window: usize,
    tau: f64,
    min_len: usize,
) -> Result<Vec<BurstInterval>, AnalyticsError> {
    if !(tau > 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if min_len == 0 {
        return Err(AnalyticsError::InvalidArgument("min_len must be at least 1".into()));
    }
    let z = local_peakyness(s, window)?;
    let step = s.granularity.seconds();
    let mut out = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for i in 0..=z.len() {
        let hot = i < z.len() && z[i].1 >= tau;
        match (hot, run) {
            (true, None) => run = Some((i, z[i].1)),
            (true, Some((start, peak))) => run = Some((start, peak.max(z[i].1))),
            (false, Some((start, peak))) => {
                if i - start >= min_len {
                    out.push(BurstInterval { start: z[start].0, end: z[i - 1].0 + step, peak });
                }
                run = None;
            }
            (false, None) => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Granularity;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(vals: &[f64]) -> TimeSeries {
        let pts = vals.iter().enumerate().map(|(i, &v)| (i as i64 * 3600, v)).collect();
        TimeSeries::new("s", Granularity::Hour, pts).unwrap()
    }

    fn oracle(vals: &[f64], w: usize) -> Vec<f64> {
        let r = (w / 2) as isize;
        let n = vals.len() as isize;
        (0..n)
            .map(|t| {
                let mut win = Vec::new();
                for j in (t - r)..=(t + r) {
                    if j >= 0 && j < n {
                        win.push(vals[j as usize]);
                    }
                }
                if win.iter().all(|v| *v == vals[t as usize]) {
                    return 0.0;
                }
                let mut sum = 0.0;
                for v in &win {
                    sum += v;
                }
                let m = sum / win.len() as f64;
                let mut ss = 0.0;
                for v in &win {
                    ss += (v - m).powi(2);
                }
                (vals[t as usize] - m) / ((ss / win.len() as f64).sqrt() + 1e-9)
            })
            .collect()
    }

    #[test]
    fn constant_series() {
        let s = series(&[4.0; 30]);
        assert!(local_peakyness(&s, 25).unwrap().iter().all(|p| p.1 == 0.0));
        assert!(detect_bursts(&s, 25, 3.0, 1).unwrap().is_empty());
    }

    #[test]
    fn single_peak_is_argmax() {
        let s = series(&[5.0, 5.0, 5.0, 50.0, 5.0, 5.0, 5.0]);
        let z = local_peakyness(&s, 7).unwrap();
        let best = z.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
        assert_eq!(best, 3);
    }

    #[test]
    fn window_preconditions() {
        let s = series(&[1.0, 2.0, 3.0]);
        assert!(matches!(local_peakyness(&s, 5), Err(AnalyticsError::SeriesTooShort { .. })));
        assert!(matches!(local_peakyness(&s, 1), Err(AnalyticsError::SeriesTooShort { .. })));
        assert!(matches!(local_peakyness(&s, 2), Err(AnalyticsError::InvalidArgument(_))));
        assert!(detect_bursts(&s, 3, 0.0, 1).is_err());
        assert!(detect_bursts(&s, 3, 1.0, 0).is_err());
    }

    #[test]
    fn two_impulses_two_intervals() {
        let mut v = vec![1.0; 80];
        v[20] = 40.0;
        v[60] = 40.0;
        let b = detect_bursts(&series(&v), 25, 3.0, 1).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].start, b[0].end), (20 * 3600, 21 * 3600));
        assert_eq!((b[1].start, b[1].end), (60 * 3600, 61 * 3600));
        assert!(b.iter().all(|i| i.peak >= 3.0));
    }

    #[test]
    fn min_len_drops_short_runs() {
        let mut v = vec![1.0; 60];
        v[30] = 50.0;
        assert!(detect_bursts(&series(&v), 25, 3.0, 2).unwrap().is_empty());
    }

    #[test]
    fn matches_oracle_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(3..120);
            let vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
            let mut w = rng.random_range(3..=n);
            if w % 2 == 0 {
                w -= 1;
            }
            let got = local_peakyness(&series(&vals), w).unwrap();
            for (g, o) in got.iter().zip(oracle(&vals, w)) {
                assert!((g.1 - o).abs() <= 1e-12, "{} vs {o}", g.1);
            }
        }
    }

    proptest! {
        #[test]
        fn scale_invariant(vals in proptest::collection::vec(0.0f64..1000.0, 9..60), c in 0.1f64..50.0) {
            let a = local_peakyness(&series(&vals), 9).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let b = local_peakyness(&series(&scaled), 9).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.1 - y.1).abs() < 1e-6);
            }
        }

        #[test]
        fn bursts_are_maximal_sorted_runs(vals in proptest::collection::vec(0.0f64..20.0, 7..80), tau in 0.5f64..2.5) {
            let s = series(&vals);
            let z = local_peakyness(&s, 7).unwrap();
            let b = detect_bursts(&s, 7, tau, 1).unwrap();
            for w in b.windows(2) {
                prop_assert!(w[0].end < w[1].start);
            }
            let mut hot = vec![false; z.len()];
            for iv in &b {
                prop_assert!(iv.start < iv.end && iv.peak >= tau);
                for (i, p) in z.iter().enumerate() {
                    if p.0 >= iv.start && p.0 < iv.end {
                        prop_assert!(p.1 >= tau);
                        hot[i] = true;
                    }
                }
            }
            for (i, p) in z.iter().enumerate() {
                prop_assert_eq!(hot[i], p.1 >= tau);
            }
        }
    }
}
