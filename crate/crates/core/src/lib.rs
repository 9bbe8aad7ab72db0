//! Digital twin of a temperature-balancing thermopile flow sensor.
//!
//! * [`thermal`]: axisymmetric finite-volume model of the suspended channel.
//! * [`balancing`]: heater power split that nulls the thermopile signal, and
//!   the calibration curve built from it.
//! * [`plant`]: electro-thermal hardware emulation with drifting resistors.
//! * [`control`]: PI power-feedback loop and open-loop baseline.
//! * [`analysis`]: Welch spectra, slopes, flatness and moment statistics.
//!
//! Everything numerical is generic over [`Scalar`] (`f32`/`f64`); the `*64`
//! aliases below fix the usual double-precision choice.

pub mod analysis;
pub mod balancing;
pub mod config;
pub mod control;
pub mod plant;
mod scalar;
pub mod thermal;
pub mod units;

pub use scalar::Scalar;

pub type SensorGeometry64 = thermal::SensorGeometry<f64>;
pub type MaterialSet64 = thermal::MaterialSet<f64>;
pub type GridSpec64 = thermal::GridSpec<f64>;
pub type Mesh64 = thermal::Mesh<f64>;
pub type ThermalModel64 = thermal::ThermalModel<f64>;
pub type TemperatureField64 = thermal::TemperatureField<f64>;
pub type BalanceResult64 = balancing::BalanceResult<f64>;
pub type CalibrationCurve64 = balancing::CalibrationCurve<f64>;
pub type Plant64 = plant::Plant<f64>;
pub type PIController64 = control::PIController<f64>;
pub type TimeSeries64 = control::TimeSeries<f64>;
pub type Spectrum64 = analysis::Spectrum<f64>;
