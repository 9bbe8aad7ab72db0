use rayon::prelude::*;

use crate::plant::PlantError;
use crate::thermal::{delta_t_thermopile, heater_temperature, Heater, ThermalModel};
use crate::units::to_ul_per_min;
use crate::Scalar;

/// Plant gains at one flow rate, all per watt of total heater power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Influence<T> {
    /// ΔT_TC per watt in the upstream heater (K/W).
    pub d1: T,
    /// ΔT_TC per watt in the downstream heater (K/W).
    pub d2: T,
    /// Upstream heater self-heating (K/W).
    pub h1: T,
    /// Downstream heater self-heating (K/W).
    pub h2: T,
}

impl<T: Scalar> Influence<T> {
    fn lerp(&self, other: &Self, t: T) -> Self {
        let mix = |a: T, b: T| a + (b - a) * t;
        Self {
            d1: mix(self.d1, other.d1),
            d2: mix(self.d2, other.d2),
            h1: mix(self.h1, other.h1),
            h2: mix(self.h2, other.h2),
        }
    }
}

/// Influence coefficients tabulated over a flow grid (m³/s).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceTable<T> {
    flows: Vec<T>,
    entries: Vec<Influence<T>>,
}

impl<T: Scalar> InfluenceTable<T> {
    pub fn from_entries(flows: Vec<T>, entries: Vec<Influence<T>>) -> Result<Self, PlantError> {
        if flows.is_empty() || flows.len() != entries.len() {
            return Err(PlantError::EmptyTable);
        }
        if flows.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PlantError::UnsortedTable);
        }
        Ok(Self { flows, entries })
    }

    pub fn flows(&self) -> &[T] {
        &self.flows
    }

    pub fn entries(&self) -> &[Influence<T>] {
        &self.entries
    }

    /// Piecewise-linear interpolation; exact at grid flows.
    pub fn at(&self, q: T) -> Result<Influence<T>, PlantError> {
        if let Some(i) = self.flows.iter().position(|&f| f == q) {
            return Ok(self.entries[i]);
        }
        let (first, last) = (self.flows[0], self.flows[self.flows.len() - 1]);
        if !(q > first && q < last) {
            return Err(PlantError::FlowOutOfTable {
                q_ul_per_min: to_ul_per_min(q).as_f64(),
            });
        }
        let i = self.flows.partition_point(|&f| f < q) - 1;
        let t = (q - self.flows[i]) / (self.flows[i + 1] - self.flows[i]);
        Ok(self.entries[i].lerp(&self.entries[i + 1], t))
    }
}

/// Tabulates `d1`, `d2` and the self-heating diagonals from unit-power solves
/// of the thermal model at each flow in `flows` (sorted, m³/s).
pub fn influence_table<T: Scalar>(
    model: &ThermalModel<T>,
    flows: &[T],
) -> Result<InfluenceTable<T>, PlantError> {
    if flows.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PlantError::UnsortedTable);
    }
    let entries = flows
        .par_iter()
        .map(|&q| {
            let op = model.operator(q)?;
            let (up, down) = op.unit_fields()?;
            Ok(Influence {
                d1: delta_t_thermopile(&up),
                d2: delta_t_thermopile(&down),
                h1: heater_temperature(&up, Heater::Up),
                h2: heater_temperature(&down, Heater::Down),
            })
        })
        .collect::<Result<Vec<_>, crate::thermal::ThermalError>>()?;
    InfluenceTable::from_entries(flows.to_vec(), entries)
}
