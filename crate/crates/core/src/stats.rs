//! Summary statistics used by the session report and the spectrometer.

use std::fmt::Write as _;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Mean and unbiased variance, or `None` for fewer than two samples.
pub fn mean_var(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    Some((mean, ss / (n - 1.0)))
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Gaussian sigma estimated as 1.4826 times the median absolute deviation.
/// Insensitive to a small fraction of uncorrelated (dark-count) outliers.
pub fn robust_sigma(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let med = median_of(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Some(1.482_602_218_505_602 * median_of(&dev))
}

/// Wilson score interval for `k` successes out of `n` at the 95% level.
pub fn wilson_95(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes; avoid cancellation residue
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Fixed-width histogram spanning the sample range, so every sample lands in a bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub start: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_samples(xs: &[f64], n_bins: usize) -> Self {
        let n_bins = n_bins.max(1);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if xs.is_empty() || !(hi > lo) {
            let start = if xs.is_empty() { 0.0 } else { lo };
            return Self {
                start,
                bin_width: 0.0,
                counts: vec![xs.len() as u64],
            };
        }
        let width = (hi - lo) / n_bins as f64;
        let mut counts = vec![0u64; n_bins];
        for &x in xs {
            let i = (((x - lo) / width) as usize).min(n_bins - 1);
            counts[i] += 1;
        }
        Self {
            start: lo,
            bin_width: width,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.start + (i as f64 + 0.5) * self.bin_width
    }

    /// `bin_center_s,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_s,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{:.9e},{}", self.center(i), c);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert!(mean_var(&[1.0]).is_none());
    }

    #[test]
    fn robust_sigma_ignores_outliers() {
        let mut xs: Vec<f64> = (0..1001).map(|i| (i as f64 - 500.0) / 500.0).collect();
        let clean = robust_sigma(&xs).unwrap();
        xs[0] = 1e9;
        xs[1] = -1e9;
        let dirty = robust_sigma(&xs).unwrap();
        assert!((clean - dirty).abs() / clean < 0.01);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_95(50, 1000);
        assert!(lo < 0.05 && 0.05 < hi);
        assert_eq!(wilson_95(0, 100).0, 0.0);
        // textbook value: k=0, n=100 -> upper 0.0370
        assert!((wilson_95(0, 100).1 - 0.036_995).abs() < 1e-4);
    }

    #[test]
    fn histogram_conserves_count() {
        let xs: Vec<f64> = (0..997).map(|i| (i as f64).sin()).collect();
        let h = Histogram::from_samples(&xs, 50);
        assert_eq!(h.total(), 997);
        assert_eq!(h.counts.len(), 50);
        let flat = Histogram::from_samples(&[0.0; 10], 50);
        assert_eq!(flat.counts, vec![10]);
        assert!(h.to_csv().starts_with("bin_center_s,count\n"));
    }
}
