//! Heater resistors, source-measure units and the thermopile.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::plant::{FlickerProcess, PlantError};
use crate::Scalar;

/// Thin-film heater resistor.
#[derive(Debug, Clone)]
pub struct HeaterState<T> {
    /// Resistance at the reference temperature (Ω).
    pub r0: T,
    /// Temperature coefficient of resistance (1/K).
    pub tcr: T,
    /// Fractional resistance drift process.
    pub flicker: FlickerProcess<T>,
    /// Current fractional drift.
    pub drift: T,
    /// Element temperature above the reference (self-heating plus ambient), K.
    pub rise: T,
}

impl<T: Scalar> HeaterState<T> {
    pub fn new(r0: T, tcr: T, flicker: FlickerProcess<T>) -> Self {
        let drift = flicker.value();
        Self {
            r0,
            tcr,
            flicker,
            drift,
            rise: T::zero(),
        }
    }

    /// `R = R0·(1 + tcr·rise)·(1 + drift)`.
    pub fn resistance(&self) -> T {
        self.r0 * (T::one() + self.tcr * self.rise) * (T::one() + self.drift)
    }
}

/// One source-measure reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmuReading<T> {
    pub current: T,
    pub voltage: T,
    /// Power actually dissipated in the resistor.
    pub power: T,
}

impl<T: Scalar> SmuReading<T> {
    /// `V / I`, the resistance the instrument reports.
    pub fn resistance(&self) -> Option<T> {
        (self.current != T::zero()).then(|| self.voltage / self.current)
    }
}

/// Power-mode actuation: the unit measures the resistance through its
/// voltage reading (with fractional error `meas_error`) and sets
/// `I = sqrt(P_target / R_measured)`.
///
/// With `meas_error = 0` the dissipated power equals the target exactly, for
/// any resistance value.
pub fn smu_apply_power<T: Scalar>(
    heater: &HeaterState<T>,
    p_target: T,
    meas_error: T,
) -> Result<SmuReading<T>, PlantError> {
    let r_true = heater.resistance();
    if !(r_true > T::zero()) {
        return Err(PlantError::NonPositiveResistance(r_true.as_f64()));
    }
    if p_target < T::zero() {
        return Err(PlantError::NegativePower(p_target.as_f64()));
    }
    let r_measured = r_true * (T::one() + meas_error);
    if !(r_measured > T::zero()) {
        return Err(PlantError::NonPositiveResistance(r_measured.as_f64()));
    }
    let current = (p_target / r_measured).sqrt();
    let voltage = current * r_true;
    Ok(SmuReading {
        current,
        voltage,
        power: current * voltage,
    })
}

/// One instrument channel: slowly drifting calibration plus white reading noise.
#[derive(Debug, Clone)]
pub struct SmuChannel<T> {
    pub meas_noise: T,
    pub gain_drift: FlickerProcess<T>,
}

impl<T: Scalar> SmuChannel<T> {
    pub fn apply<R: Rng + ?Sized>(
        &self,
        heater: &HeaterState<T>,
        p_target: T,
        rng: &mut R,
    ) -> Result<SmuReading<T>, PlantError> {
        let white = T::of(rng.sample::<f64, _>(StandardNormal));
        smu_apply_power(heater, p_target, self.gain_drift.value() + self.meas_noise * white)
    }
}

/// Series thermocouple chain read by a voltmeter.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermopileModel<T> {
    pub junction_count: usize,
    /// Net Seebeck coefficient per junction pair (V/K).
    pub seebeck: T,
    /// Nonlinearity coefficient (1/K); `V = N·α·ΔT·(1 + β·ΔT)`.
    pub beta: T,
    /// Voltmeter noise, V rms.
    pub voltmeter_noise: T,
}

impl<T: Scalar> Default for ThermopileModel<T> {
    fn default() -> Self {
        Self {
            junction_count: 26,
            seebeck: T::of(100e-6),
            beta: T::zero(),
            voltmeter_noise: T::of(20e-9),
        }
    }
}

impl<T: Scalar> ThermopileModel<T> {
    /// Noise-free EMF; exactly zero at `ΔT = 0`.
    pub fn emf(&self, delta_t: T) -> T {
        T::of(self.junction_count as f64) * self.seebeck * delta_t * (T::one() + self.beta * delta_t)
    }

    /// `dV/dΔT` at `ΔT = 0`.
    pub fn sensitivity(&self) -> T {
        T::of(self.junction_count as f64) * self.seebeck
    }
}

/// Voltmeter reading of the thermopile at temperature difference `delta_t`.
pub fn thermopile_emf<T: Scalar, R: Rng + ?Sized>(tp: &ThermopileModel<T>, delta_t: T, rng: &mut R) -> T {
    let noise = T::of(rng.sample::<f64, _>(StandardNormal));
    tp.emf(delta_t) + tp.voltmeter_noise * noise
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn heater(r0: f64) -> HeaterState<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        HeaterState::new(r0, 3.9e-3, FlickerProcess::new(0.0, 4, &mut rng))
    }

    #[test]
    fn fifty_microwatts_into_one_kiloohm() {
        let r = smu_apply_power(&heater(1000.0), 50e-6, 0.0).unwrap();
        // I = sqrt(50e-6 / 1000) = 2.2360679...e-4 A
        assert!((r.current - 2.236_067_977_5e-4).abs() < 1e-13);
        assert!((r.voltage - 0.223_606_797_75).abs() < 1e-10);
        assert!((r.power - 50e-6).abs() < 1e-18);
        assert!((r.resistance().unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_power_gives_zero_reading() {
        let r = smu_apply_power(&heater(1000.0), 0.0, 0.0).unwrap();
        assert_eq!((r.current, r.voltage, r.power), (0.0, 0.0, 0.0));
    }

    #[test]
    fn drifted_resistor_still_gets_target_power() {
        let mut h = heater(1000.0);
        h.drift = 0.10;
        let r = smu_apply_power(&h, 50e-6, 0.0).unwrap();
        assert!((r.power - 50e-6).abs() <= 50e-6 * 1e-15);
        assert!((r.resistance().unwrap() - 1100.0).abs() < 1e-9);
    }

    #[test]
    fn measurement_error_perturbs_power() {
        let r = smu_apply_power(&heater(1000.0), 50e-6, 1e-3).unwrap();
        assert!((r.power - 50e-6 / 1.001).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_resistance_is_rejected() {
        let mut h = heater(1000.0);
        h.drift = -1.0;
        assert!(matches!(
            smu_apply_power(&h, 1e-6, 0.0),
            Err(PlantError::NonPositiveResistance(_))
        ));
    }

    #[test]
    fn thermopile_product_formula() {
        let tp = ThermopileModel::<f64> {
            voltmeter_noise: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(thermopile_emf(&tp, 0.0, &mut rng), 0.0);
        assert!((thermopile_emf(&tp, 1.0, &mut rng) - 2.6e-3).abs() < 1e-15);
    }

    #[test]
    fn nonlinearity_breaks_odd_symmetry() {
        let tp = ThermopileModel::<f64> {
            beta: 0.01,
            voltmeter_noise: 0.0,
            ..Default::default()
        };
        assert_ne!(tp.emf(1.0).abs(), tp.emf(-1.0).abs());
        assert_eq!(tp.emf(0.0), 0.0);
    }
}
