use std::io::{self, Write};

use crate::analysis::{mean_variance, numerically_constant, AnalysisError, Spectrum};
use crate::Scalar;

/// Biased sample moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatSummary<T> {
    pub len: usize,
    pub mean: T,
    pub std_dev: T,
    pub skewness: T,
    /// Kurtosis minus 3.
    pub excess_kurtosis: T,
}

pub fn stat_summary<T: Scalar>(series: &[T]) -> Result<StatSummary<T>, AnalysisError> {
    if series.len() < 2 {
        return Err(AnalysisError::TooShort {
            len: series.len(),
            needed: 2,
        });
    }
    let n = T::of(series.len() as f64);
    let (mean, m2) = mean_variance(series);
    let moment = |p: i32| series.iter().map(|&x| (x - mean).powi(p)).sum::<T>() / n;
    if numerically_constant(series, m2) {
        return Err(AnalysisError::ConstantSeries);
    }
    let skewness = moment(3) / m2.powf(T::of(1.5));
    let excess_kurtosis = moment(4) / (m2 * m2) - T::of(3.0);
    Ok(StatSummary {
        len: series.len(),
        mean,
        std_dev: m2.sqrt(),
        skewness,
        excess_kurtosis,
    })
}

/// `key = value` summary of a spectrum, its slope over a band and the sample moments.
pub fn write_summary<T: Scalar, W: Write>(
    mut out: W,
    name: &str,
    spec: &Spectrum<T>,
    slope: Option<T>,
    stats: &StatSummary<T>,
) -> io::Result<()> {
    writeln!(out, "series = {name}")?;
    writeln!(out, "samples = {}", stats.len)?;
    writeln!(out, "sample_rate_hz = {:e}", spec.sample_rate)?;
    writeln!(out, "segment_length = {}", spec.segment_length)?;
    writeln!(out, "segments = {}", spec.segments)?;
    match slope {
        Some(s) => writeln!(out, "loglog_slope = {s:e}")?,
        None => writeln!(out, "loglog_slope = nan")?,
    }
    writeln!(out, "mean = {:e}", stats.mean)?;
    writeln!(out, "std_dev = {:e}", stats.std_dev)?;
    writeln!(out, "skewness = {:e}", stats.skewness)?;
    writeln!(out, "excess_kurtosis = {:e}", stats.excess_kurtosis)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_points() {
        let s = stat_summary(&[1.0_f64, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_dev, 1.0);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(s.excess_kurtosis, -2.0);
    }

    #[test]
    fn normal_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = stat_summary(&x).unwrap();
        // Standard errors at N = 1e4: skew sqrt(6/N) ≈ 0.024, kurtosis sqrt(24/N) ≈ 0.049.
        assert!(s.skewness.abs() < 0.1);
        assert!(s.excess_kurtosis.abs() < 0.2);
        assert!((s.std_dev - 1.0).abs() < 0.03);
    }

    #[test]
    fn exponential_is_skewed() {
        let x: Vec<f64> = (1..=2000).map(|k| -(1.0 - k as f64 / 2001.0).ln()).collect();
        let s = stat_summary(&x).unwrap();
        assert!(s.skewness > 1.5);
    }

    #[test]
    fn constant_and_short_are_errors() {
        assert_eq!(stat_summary(&[2.5_f64; 50]), Err(AnalysisError::ConstantSeries));
        assert!(matches!(stat_summary(&[1.0_f64]), Err(AnalysisError::TooShort { .. })));
    }
}
