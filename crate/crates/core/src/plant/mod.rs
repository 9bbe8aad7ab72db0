//! Electro-thermal hardware emulation.
//!
//! Two heater resistors with 1/f drift and a temperature coefficient are
//! driven in power mode by source-measure channels. The thermopile reads a
//! temperature difference that relaxes with a single time constant toward the
//! steady value given by tabulated thermal-model gains. A shared 1/f ambient
//! temperature process moves both resistances together.

mod devices;
mod flicker;
mod influence;

use rand::Rng;
use thiserror::Error;

pub use devices::{
    smu_apply_power, thermopile_emf, HeaterState, SmuChannel, SmuReading, ThermopileModel,
};
pub use flicker::FlickerProcess;
pub use influence::{influence_table, Influence, InfluenceTable};

use crate::thermal::ThermalError;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("non-positive heater resistance {0} Ω")]
    NonPositiveResistance(f64),
    #[error("negative power target {0:e} W")]
    NegativePower(f64),
    #[error("flow {q_ul_per_min} µl/min lies outside the influence table")]
    FlowOutOfTable { q_ul_per_min: f64 },
    #[error("influence table is empty")]
    EmptyTable,
    #[error("influence table flows must be strictly increasing")]
    UnsortedTable,
    #[error("invalid plant parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

/// Noise magnitudes. Fractional quantities are dimensionless standard
/// deviations; `ambient` is in kelvin.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams<T> {
    pub heater_drift: T,
    pub ambient: T,
    pub smu_gain_drift: T,
    pub smu_meas_noise: T,
    pub flicker_octaves: usize,
}

impl<T: Scalar> Default for NoiseParams<T> {
    fn default() -> Self {
        Self {
            heater_drift: T::of(1e-4),
            ambient: T::of(0.05),
            smu_gain_drift: T::of(3e-7),
            smu_meas_noise: T::of(1e-6),
            flicker_octaves: 16,
        }
    }
}

impl<T: Scalar> NoiseParams<T> {
    pub fn silent() -> Self {
        Self {
            heater_drift: T::zero(),
            ambient: T::zero(),
            smu_gain_drift: T::zero(),
            smu_meas_noise: T::zero(),
            flicker_octaves: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams<T> {
    pub heater_r0: T,
    pub tcr: T,
    /// Thermal time constant of the thermopile response (s).
    pub thermal_time_constant: T,
    /// Heat-conduction asymmetry skewing `d1`/`d2`.
    pub asymmetry: T,
    pub thermopile: ThermopileModel<T>,
    pub noise: NoiseParams<T>,
}

impl<T: Scalar> Default for PlantParams<T> {
    fn default() -> Self {
        Self {
            heater_r0: T::of(1000.0),
            tcr: T::of(3.9e-3),
            thermal_time_constant: T::of(0.05),
            asymmetry: T::zero(),
            thermopile: ThermopileModel::default(),
            noise: NoiseParams::default(),
        }
    }
}

impl<T: Scalar> PlantParams<T> {
    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |m: &str| Err(PlantError::InvalidParameter(m.into()));
        if !(self.heater_r0 > T::zero()) {
            return bad("heater_r0 must be positive");
        }
        if !(self.thermal_time_constant > T::zero()) {
            return bad("thermal_time_constant must be positive");
        }
        if !(self.asymmetry.abs() < T::one()) {
            return bad("asymmetry must lie in (-1, 1)");
        }
        let n = &self.noise;
        if [n.heater_drift, n.ambient, n.smu_gain_drift, n.smu_meas_noise, self.thermopile.voltmeter_noise]
            .iter()
            .any(|v| *v < T::zero())
        {
            return bad("noise amplitudes must be non-negative");
        }
        if self.thermopile.junction_count == 0 {
            return bad("junction_count must be at least 1");
        }
        Ok(())
    }
}

fn skewed_gains<T: Scalar>(params: &PlantParams<T>, table: &InfluenceTable<T>, q: T) -> Result<(T, T), PlantError> {
    let g = table.at(q)?;
    let e = params.asymmetry;
    Ok((g.d1 * (T::one() + e), g.d2 * (T::one() - e)))
}

/// Noise-free small-signal gain `dV_TC/dΔP` (V/W) at flow `q`.
pub fn loop_gain<T: Scalar>(params: &PlantParams<T>, table: &InfluenceTable<T>, q: T) -> Result<T, PlantError> {
    let (d1, d2) = skewed_gains(params, table, q)?;
    Ok(params.thermopile.sensitivity() * (d2 - d1) / T::of(2.0))
}

/// `ΔP = P2 - P1` nulling the noise-free thermopile at flow `q` and total
/// power `total_power`.
pub fn balanced_dp<T: Scalar>(
    params: &PlantParams<T>,
    table: &InfluenceTable<T>,
    q: T,
    total_power: T,
) -> Result<T, PlantError> {
    let (d1, d2) = skewed_gains(params, table, q)?;
    Ok(total_power * (d1 + d2) / (d1 - d2))
}

/// Emulated sensor hardware. Owns all stochastic state; evolution is strictly
/// sequential.
#[derive(Debug, Clone)]
pub struct Plant<T> {
    params: PlantParams<T>,
    table: InfluenceTable<T>,
    heaters: [HeaterState<T>; 2],
    smu: [SmuChannel<T>; 2],
    ambient: FlickerProcess<T>,
    actual_power: [T; 2],
    delta_t: T,
}

impl<T: Scalar> Plant<T> {
    /// Plant at rest at flow `q` with both heaters at `p1`, `p2` and the
    /// thermopile at its steady difference.
    pub fn new<R: Rng + ?Sized>(
        params: PlantParams<T>,
        table: InfluenceTable<T>,
        q: T,
        p1: T,
        p2: T,
        rng: &mut R,
    ) -> Result<Self, PlantError> {
        params.validate()?;
        let n = &params.noise;
        let heater = |rng: &mut R| {
            HeaterState::new(
                params.heater_r0,
                params.tcr,
                FlickerProcess::new(n.heater_drift, n.flicker_octaves, rng),
            )
        };
        let heaters = [heater(rng), heater(rng)];
        let smu = [
            SmuChannel {
                meas_noise: n.smu_meas_noise,
                gain_drift: FlickerProcess::new(n.smu_gain_drift, n.flicker_octaves, rng),
            },
            SmuChannel {
                meas_noise: n.smu_meas_noise,
                gain_drift: FlickerProcess::new(n.smu_gain_drift, n.flicker_octaves, rng),
            },
        ];
        let ambient = FlickerProcess::new(n.ambient, n.flicker_octaves, rng);
        let mut plant = Self {
            params,
            table,
            heaters,
            smu,
            ambient,
            actual_power: [p1, p2],
            delta_t: T::zero(),
        };
        plant.update_rises(q)?;
        plant.delta_t = plant.steady_delta_t(q)?;
        Ok(plant)
    }

    pub fn params(&self) -> &PlantParams<T> {
        &self.params
    }

    pub fn table(&self) -> &InfluenceTable<T> {
        &self.table
    }

    pub fn heaters(&self) -> &[HeaterState<T>; 2] {
        &self.heaters
    }

    pub fn delta_t(&self) -> T {
        self.delta_t
    }

    pub fn actual_power(&self) -> [T; 2] {
        self.actual_power
    }

    /// Skewed gains `(d1·(1+ε), d2·(1-ε))` at flow `q`.
    pub fn gains(&self, q: T) -> Result<(T, T), PlantError> {
        skewed_gains(&self.params, &self.table, q)
    }

    /// `ΔT_ss = P1·d1·(1+ε) + P2·d2·(1-ε)` for the dissipated powers.
    pub fn steady_delta_t(&self, q: T) -> Result<T, PlantError> {
        let (d1, d2) = self.gains(q)?;
        Ok(self.actual_power[0] * d1 + self.actual_power[1] * d2)
    }

    /// Noise-free small-signal gain `dV_TC/dΔP` at flow `q`, with
    /// `P1 = (P_T - ΔP)/2`, `P2 = (P_T + ΔP)/2`.
    pub fn loop_gain(&self, q: T) -> Result<T, PlantError> {
        loop_gain(&self.params, &self.table, q)
    }

    /// Voltmeter reading of the thermopile.
    pub fn read_vtc<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        thermopile_emf(&self.params.thermopile, self.delta_t, rng)
    }

    /// Commands both heater powers through the source-measure channels.
    pub fn apply_powers<R: Rng + ?Sized>(
        &mut self,
        p1: T,
        p2: T,
        rng: &mut R,
    ) -> Result<[SmuReading<T>; 2], PlantError> {
        let r1 = self.smu[0].apply(&self.heaters[0], p1, rng)?;
        let r2 = self.smu[1].apply(&self.heaters[1], p2, rng)?;
        self.actual_power = [r1.power, r2.power];
        Ok([r1, r2])
    }

    fn update_rises(&mut self, q: T) -> Result<(), PlantError> {
        let g = self.table.at(q)?;
        let ambient = self.ambient.value();
        self.heaters[0].rise = g.h1 * self.actual_power[0] + ambient;
        self.heaters[1].rise = g.h2 * self.actual_power[1] + ambient;
        Ok(())
    }

    /// Advances drift, ambient and instrument processes by one sample and
    /// relaxes ΔT_TC toward its steady value over `dt` seconds.
    pub fn step<R: Rng + ?Sized>(&mut self, q: T, dt: T, rng: &mut R) -> Result<(), PlantError> {
        for h in &mut self.heaters {
            h.drift = h.flicker.step(rng);
        }
        for s in &mut self.smu {
            s.gain_drift.step(rng);
        }
        self.ambient.step(rng);
        self.update_rises(q)?;
        let target = self.steady_delta_t(q)?;
        let k = T::one() - (-dt / self.params.thermal_time_constant).exp();
        self.delta_t = self.delta_t + (target - self.delta_t) * k;
        Ok(())
    }
}
