//! Spectral and statistical characterization of loop logs.

mod spectrum;
mod stats;

use thiserror::Error;

pub use spectrum::{loglog_slope, spectral_flatness, welch_psd, write_spectrum_csv, Spectrum};
pub use stats::{stat_summary, write_summary, StatSummary};

/// Mean and biased variance by the corrected two-pass algorithm; the
/// correction removes the round-off of the first-pass mean.
pub(crate) fn mean_variance<T: crate::Scalar>(series: &[T]) -> (T, T) {
    let n = T::of(series.len() as f64);
    let rough = series.iter().copied().sum::<T>() / n;
    let mean = rough + series.iter().map(|&x| x - rough).sum::<T>() / n;
    let var = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var)
}

/// True when the spread of `series` about `mean` is zero or at round-off
/// level relative to the largest magnitude in the series.
pub(crate) fn numerically_constant<T: crate::Scalar>(series: &[T], variance: T) -> bool {
    let scale = series.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    !(variance > T::zero()) || variance.sqrt() <= scale * T::epsilon() * T::of(64.0)
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("series too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("overlap must lie in [0, 1), got {0}")]
    InvalidOverlap(f64),
    #[error("segment length must be at least 4, got {0}")]
    InvalidSegment(usize),
    #[error("constant series (zero variance) has no spectrum or distribution shape")]
    ConstantSeries,
    #[error("band [{f_lo}, {f_hi}] Hz holds {bins} bins, need at least {needed}")]
    EmptyBand {
        f_lo: f64,
        f_hi: f64,
        bins: usize,
        needed: usize,
    },
    #[error("non-positive PSD value in band")]
    NonPositivePsd,
}
