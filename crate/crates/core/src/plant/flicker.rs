use rand::Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// 1/f noise as a sum of first-order autoregressive processes, one per
/// octave, with equal variance per octave.
///
/// Octave `k` has its corner at `0.25 / 2^k` cycles per sample, so the sum
/// follows a 1/f spectrum from about a quarter of the sample rate down to
/// `0.25 / 2^(octaves-1)` cycles per sample.
#[derive(Debug, Clone)]
pub struct FlickerProcess<T> {
    amplitude: T,
    poles: Vec<T>,
    innovations: Vec<T>,
    states: Vec<T>,
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

impl<T: Scalar> FlickerProcess<T> {
    /// `amplitude` is the total standard deviation. States start from the
    /// stationary distribution, so there is no start-up transient.
    pub fn new<R: Rng + ?Sized>(amplitude: T, octaves: usize, rng: &mut R) -> Self {
        let octaves = octaves.max(1);
        let sigma = amplitude / T::of(octaves as f64).sqrt();
        let mut poles = Vec::with_capacity(octaves);
        let mut innovations = Vec::with_capacity(octaves);
        let mut states = Vec::with_capacity(octaves);
        for k in 0..octaves {
            let corner = 0.25 / 2f64.powi(k as i32);
            let a = (-2.0 * std::f64::consts::PI * corner).exp();
            poles.push(T::of(a));
            innovations.push(sigma * T::of((1.0 - a * a).sqrt()));
            states.push(sigma * normal::<T, R>(rng));
        }
        Self {
            amplitude,
            poles,
            innovations,
            states,
        }
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn octaves(&self) -> usize {
        self.poles.len()
    }

    pub fn value(&self) -> T {
        self.states.iter().copied().sum()
    }

    /// Advances one sample and returns the new value.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> T {
        for ((x, &a), &g) in self.states.iter_mut().zip(&self.poles).zip(&self.innovations) {
            *x = a * *x + g * normal::<T, R>(rng);
        }
        self.value()
    }
}
