use std::io::{self, Write};
use std::sync::Arc;

use crate::thermal::{CellWeights, Mesh};
use crate::Scalar;

/// Power bookkeeping of one steady solve, per channel (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance<T> {
    pub injected: T,
    pub boundary_conduction: T,
    pub enthalpy_outflow: T,
}

impl<T: Scalar> EnergyBalance<T> {
    /// `|in - out| / in`; zero when nothing is injected and nothing leaves.
    pub fn relative_imbalance(&self) -> T {
        let out = self.boundary_conduction + self.enthalpy_outflow;
        let diff = (self.injected - out).abs();
        if self.injected == T::zero() {
            diff
        } else {
            diff / self.injected.abs()
        }
    }
}

/// Steady temperature rise above ambient (K) per cell.
#[derive(Debug, Clone)]
pub struct TemperatureField<T> {
    pub mesh: Arc<Mesh<T>>,
    pub rise: Vec<T>,
    pub q: T,
    pub p1: T,
    pub p2: T,
    /// Relative residual of the discrete system.
    pub residual: T,
    pub energy: EnergyBalance<T>,
}

impl<T: Scalar> TemperatureField<T> {
    pub fn max_rise(&self) -> T {
        self.rise.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min_rise(&self) -> T {
        self.rise.iter().copied().fold(T::infinity(), T::min)
    }

    /// Rise at radial ring `ir`, axial cell `iz`.
    pub fn at(&self, ir: usize, iz: usize) -> T {
        self.rise[self.mesh.index(ir, iz)]
    }

    /// Pointwise linear combination `a·self + b·other`, defined on the same mesh.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let rise = self
            .rise
            .iter()
            .zip(&other.rise)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Self {
            mesh: Arc::clone(&self.mesh),
            rise,
            q: self.q,
            p1: a * self.p1 + b * other.p1,
            p2: a * self.p2 + b * other.p2,
            residual: self.residual.max(other.residual),
            energy: EnergyBalance {
                injected: a * self.energy.injected + b * other.energy.injected,
                boundary_conduction: a * self.energy.boundary_conduction
                    + b * other.energy.boundary_conduction,
                enthalpy_outflow: a * self.energy.enthalpy_outflow
                    + b * other.energy.enthalpy_outflow,
            },
        }
    }

    fn probe(&self, weights: &CellWeights<T>) -> T {
        weights.iter().map(|&(c, w)| w * self.rise[c]).sum()
    }
}

/// Thermopile temperature difference: wall-surface rise at the downstream
/// junction line minus the one at the upstream line.
pub fn delta_t_thermopile<T: Scalar>(field: &TemperatureField<T>) -> T {
    field.probe(&field.mesh.junction_down) - field.probe(&field.mesh.junction_up)
}

/// Wall-surface rise along the channel, bracketed by the Dirichlet end
/// points `(0, 0)` and `(L, 0)`.
pub fn axial_profile<T: Scalar>(field: &TemperatureField<T>) -> Vec<(T, T)> {
    let mesh = &field.mesh;
    let ir = mesh.wall_surface_ring();
    let mut out = Vec::with_capacity(mesh.n_axial() + 2);
    out.push((T::zero(), T::zero()));
    out.extend(
        mesh.z_centers()
            .iter()
            .enumerate()
            .map(|(iz, &z)| (z, field.at(ir, iz))),
    );
    out.push((mesh.cavity_length(), T::zero()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heater {
    Up,
    Down,
}

fn heater_set<T>(mesh: &Mesh<T>, heater: Heater) -> &CellWeights<T> {
    match heater {
        Heater::Up => &mesh.heater_up,
        Heater::Down => &mesh.heater_down,
    }
}

/// Power-weighted mean rise of a heater element.
pub fn heater_temperature<T: Scalar>(field: &TemperatureField<T>, heater: Heater) -> T {
    field.probe(heater_set(&field.mesh, heater))
}

/// Highest wall-surface rise over the axial span covered by a heater.
pub fn heater_peak_rise<T: Scalar>(field: &TemperatureField<T>, heater: Heater) -> T {
    let mesh = &field.mesh;
    let ir = mesh.wall_surface_ring();
    heater_set(mesh, heater)
        .iter()
        .map(|&(c, _)| field.at(ir, mesh.split(c).1))
        .fold(T::neg_infinity(), T::max)
}

pub fn write_field_csv<T: Scalar, W: Write>(field: &TemperatureField<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "r_m,z_m,region,temp_rise_K")?;
    for (cell, t) in field.rise.iter().enumerate() {
        let (r, z) = field.mesh.center(cell);
        writeln!(out, "{r:e},{z:e},{},{t:e}", field.mesh.region(cell).as_str())?;
    }
    Ok(())
}

pub fn write_profile_csv<T: Scalar, W: Write>(profile: &[(T, T)], mut out: W) -> io::Result<()> {
    writeln!(out, "z_m,temp_rise_K")?;
    for (z, t) in profile {
        writeln!(out, "{z:e},{t:e}")?;
    }
    Ok(())
}
