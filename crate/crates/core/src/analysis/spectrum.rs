use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::analysis::{mean_variance, numerically_constant, AnalysisError};
use crate::Scalar;

/// One-sided power spectral density, DC excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub frequencies: Vec<T>,
    /// Absolute PSD in input units squared per hertz.
    pub psd: Vec<T>,
    /// PSD divided by its integral over `(0, f_s/2]`, in 1/Hz.
    pub normalized: Vec<T>,
    pub sample_rate: T,
    pub segment_length: usize,
    pub overlap: T,
    pub segments: usize,
}

impl<T: Scalar> Spectrum<T> {
    pub fn resolution(&self) -> T {
        self.sample_rate / T::of(self.segment_length as f64)
    }

    /// `Σ S_norm·Δf`, one by construction.
    pub fn normalized_integral(&self) -> T {
        self.normalized.iter().copied().sum::<T>() * self.resolution()
    }

    pub fn lowest(&self) -> T {
        self.frequencies[0]
    }

    pub fn highest(&self) -> T {
        *self.frequencies.last().unwrap()
    }

    fn band(&self, f_lo: T, f_hi: T) -> impl Iterator<Item = usize> + '_ {
        (0..self.frequencies.len()).filter(move |&i| {
            let f = self.frequencies[i];
            f >= f_lo && f <= f_hi
        })
    }

    /// Mean absolute PSD over `[f_lo, f_hi]`.
    pub fn band_mean(&self, f_lo: T, f_hi: T) -> Result<T, AnalysisError> {
        let idx: Vec<usize> = self.band(f_lo, f_hi).collect();
        if idx.is_empty() {
            return Err(empty(f_lo, f_hi, 0, 1));
        }
        Ok(idx.iter().map(|&i| self.psd[i]).sum::<T>() / T::of(idx.len() as f64))
    }
}

fn empty<T: Scalar>(f_lo: T, f_hi: T, bins: usize, needed: usize) -> AnalysisError {
    AnalysisError::EmptyBand {
        f_lo: f_lo.as_f64(),
        f_hi: f_hi.as_f64(),
        bins,
        needed,
    }
}

/// Welch estimate: Hann-windowed segments of `segment_length` samples with
/// fractional `overlap`, each with its mean removed, periodograms averaged.
pub fn welch_psd<T: Scalar>(
    series: &[T],
    sample_rate: T,
    segment_length: usize,
    overlap: T,
) -> Result<Spectrum<T>, AnalysisError> {
    if segment_length < 4 {
        return Err(AnalysisError::InvalidSegment(segment_length));
    }
    if !(overlap >= T::zero() && overlap < T::one()) {
        return Err(AnalysisError::InvalidOverlap(overlap.as_f64()));
    }
    if series.len() < 2 * segment_length {
        return Err(AnalysisError::TooShort {
            len: series.len(),
            needed: 2 * segment_length,
        });
    }
    let (_, var) = mean_variance(series);
    if numerically_constant(series, var) {
        return Err(AnalysisError::ConstantSeries);
    }

    let m = segment_length;
    let step = ((T::of(m as f64) * (T::one() - overlap)).round().to_usize().unwrap_or(1)).max(1);
    let window: Vec<T> = (0..m)
        .map(|i| {
            let x = T::of(2.0) * T::PI() * T::of(i as f64) / T::of(m as f64);
            T::of(0.5) - T::of(0.5) * x.cos()
        })
        .collect();
    let window_power: T = window.iter().map(|&w| w * w).sum();

    let fft = FftPlanner::<T>::new().plan_fft_forward(m);
    let half = m / 2;
    let mut acc = vec![T::zero(); half];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
    let mut start = 0;
    while start + m <= series.len() {
        let seg = &series[start..start + m];
        let seg_mean = seg.iter().copied().sum::<T>() / T::of(m as f64);
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - seg_mean) * w, T::zero());
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a = *a + buf[k + 1].norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let scale = T::one() / (sample_rate * window_power * T::of(segments as f64));
    let frequencies: Vec<T> = (1..=half)
        .map(|k| T::of(k as f64) * sample_rate / T::of(m as f64))
        .collect();
    let psd: Vec<T> = acc
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let one_sided = if i + 1 == half && m % 2 == 0 { T::one() } else { T::of(2.0) };
            a * scale * one_sided
        })
        .collect();
    let df = sample_rate / T::of(m as f64);
    let total: T = psd.iter().copied().sum::<T>() * df;
    if !(total > T::zero()) {
        return Err(AnalysisError::ConstantSeries);
    }
    let normalized = psd.iter().map(|&p| p / total).collect();
    Ok(Spectrum {
        frequencies,
        psd,
        normalized,
        sample_rate,
        segment_length: m,
        overlap,
        segments,
    })
}

/// Least-squares slope of `log10 S` against `log10 f` over `[f_lo, f_hi]`.
pub fn loglog_slope<T: Scalar>(spec: &Spectrum<T>, f_lo: T, f_hi: T) -> Result<T, AnalysisError> {
    let idx: Vec<usize> = spec.band(f_lo, f_hi).collect();
    if idx.len() < 6 {
        return Err(empty(f_lo, f_hi, idx.len(), 6));
    }
    if idx.iter().any(|&i| !(spec.normalized[i] > T::zero())) {
        return Err(AnalysisError::NonPositivePsd);
    }
    let xs: Vec<T> = idx.iter().map(|&i| spec.frequencies[i].log10()).collect();
    let ys: Vec<T> = idx.iter().map(|&i| spec.normalized[i].log10()).collect();
    let n = T::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Geometric over arithmetic mean of the PSD in `[f_lo, f_hi]`; 1 for a
/// flat spectrum.
pub fn spectral_flatness<T: Scalar>(spec: &Spectrum<T>, f_lo: T, f_hi: T) -> Result<T, AnalysisError> {
    let vals: Vec<T> = spec.band(f_lo, f_hi).map(|i| spec.normalized[i]).collect();
    if vals.is_empty() {
        return Err(empty(f_lo, f_hi, 0, 1));
    }
    if vals.iter().any(|v| !(*v > T::zero())) {
        return Err(AnalysisError::NonPositivePsd);
    }
    let n = T::of(vals.len() as f64);
    let geo = (vals.iter().map(|v| v.ln()).sum::<T>() / n).exp();
    let arith = vals.iter().copied().sum::<T>() / n;
    Ok((geo / arith).min(T::one()))
}

pub fn write_spectrum_csv<T: Scalar, W: Write>(spec: &Spectrum<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "f_hz,S_norm_per_hz")?;
    for (f, s) in spec.frequencies.iter().zip(&spec.normalized) {
        writeln!(out, "{f:e},{s:e}")?;
    }
    Ok(())
}
