//! Axisymmetric finite-volume thermal model of a suspended microchannel.
//!
//! The domain is the cylinder `r <= ambient_radius`, `0 <= z <= cavity_length`
//! around one channel. Fluid, wall and air bands are separated by cell faces.
//! Conduction acts everywhere, advection only in the fluid (first-order
//! upwind), and the temperature rise is fixed to zero on the outer radius and
//! on both cavity ends. The discrete problem is linear in the heater powers.

mod banded;
mod field;
mod geometry;
mod mesh;

use std::sync::Arc;

use thiserror::Error;

pub use banded::{BandedLu, Stencil};
pub use field::{
    axial_profile, delta_t_thermopile, heater_peak_rise, heater_temperature, write_field_csv,
    write_profile_csv, EnergyBalance, Heater, TemperatureField,
};
pub use geometry::{mean_velocity, GridSpec, MaterialSet, SensorGeometry, VelocityProfile};
pub use mesh::{build_mesh, CellWeights, Mesh, Region};

use crate::Scalar;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid materials: {0}")]
    InvalidMaterials(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("element unresolved: {element} spans {size:e} m but the axial cell is {cell:e} m")]
    ElementUnresolved {
        element: &'static str,
        size: f64,
        cell: f64,
    },
    #[error("negative heater power (P1 = {p1:e} W, P2 = {p2:e} W) outside superposition mode")]
    NegativePower { p1: f64, p2: f64 },
    #[error("flow rate is not finite")]
    NonFiniteFlow,
    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("steady solve did not converge, relative residual history {residuals:?}")]
    NotConverged { residuals: Vec<f64> },
}

/// Whether source terms must be physical (non-negative) powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    Physical,
    /// Signed powers, used when fields are combined linearly.
    Superposition,
}

/// Immutable model context: geometry, materials, mesh and solver settings.
#[derive(Debug, Clone)]
pub struct ThermalModel<T> {
    geometry: SensorGeometry<T>,
    materials: MaterialSet<T>,
    grid: GridSpec<T>,
    profile: VelocityProfile,
    tolerance: T,
    mesh: Arc<Mesh<T>>,
}

impl<T: Scalar> ThermalModel<T> {
    pub fn new(
        geometry: SensorGeometry<T>,
        materials: MaterialSet<T>,
        grid: GridSpec<T>,
    ) -> Result<Self, ThermalError> {
        materials.validate()?;
        let mesh = Arc::new(build_mesh(&geometry, &grid)?);
        Ok(Self {
            geometry,
            materials,
            grid,
            profile: VelocityProfile::Plug,
            tolerance: T::solver_tolerance(),
            mesh,
        })
    }

    pub fn with_profile(mut self, profile: VelocityProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn geometry(&self) -> &SensorGeometry<T> {
        &self.geometry
    }

    pub fn materials(&self) -> &MaterialSet<T> {
        &self.materials
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn profile(&self) -> VelocityProfile {
        self.profile
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    /// Same model on a grid refined by `factor` in every direction.
    pub fn refined(&self, factor: usize) -> Result<Self, ThermalError> {
        Ok(Self::new(
            self.geometry.clone(),
            self.materials.clone(),
            self.grid.refined(factor),
        )?
        .with_profile(self.profile)
        .with_tolerance(self.tolerance))
    }

    /// Ring-averaged axial velocity of fluid ring `ir`.
    fn ring_velocity(&self, mean: T, ir: usize) -> T {
        match self.profile {
            VelocityProfile::Plug => mean,
            VelocityProfile::Parabolic => {
                let r = self.geometry.channel_inner_radius;
                let a = self.mesh.r_faces()[ir];
                let b = self.mesh.r_faces()[ir + 1];
                T::of(2.0) * mean * (T::one() - (a * a + b * b) / (T::of(2.0) * r * r))
            }
        }
    }

    /// Assembles and factors the steady operator at flow `q` (m³/s).
    pub fn operator(&self, q: T) -> Result<SteadyOperator<T>, ThermalError> {
        if !q.is_finite() {
            return Err(ThermalError::NonFiniteFlow);
        }
        let mesh = &*self.mesh;
        let (nr, nz) = (mesh.n_radial(), mesh.n_axial());
        let n = mesh.len();
        let mut st = Stencil::zeros(n, nr);
        let mut boundary = vec![T::zero(); n];
        let mut outflow = vec![T::zero(); n];
        let two_pi = T::of(2.0) * T::PI();
        let m = &self.materials;

        let k_radial = |ir: usize| match mesh.radial_region(ir) {
            Region::Fluid => m.k_fluid,
            Region::Wall => m.k_wall,
            Region::Air => m.k_air,
        };
        let k_axial = |ir: usize| match mesh.radial_region(ir) {
            Region::Fluid => m.k_fluid,
            Region::Wall => m.k_wall * m.wall_axial_conductance_boost,
            Region::Air => m.k_air,
        };

        let rf = mesh.r_faces();
        let rc = mesh.r_centers();
        let zf = mesh.z_faces();
        let zc = mesh.z_centers();

        for iz in 0..nz {
            let dz = zf[iz + 1] - zf[iz];
            // radial conduction, logarithmic resistance between centres
            for ir in 0..nr {
                let i = mesh.index(ir, iz);
                if ir + 1 < nr {
                    let res = (rf[ir + 1] / rc[ir]).ln() / k_radial(ir)
                        + (rc[ir + 1] / rf[ir + 1]).ln() / k_radial(ir + 1);
                    let g = two_pi * dz / res;
                    let j = mesh.index(ir + 1, iz);
                    st.north[i] = st.north[i] + g;
                    st.south[j] = st.south[j] + g;
                    st.diag[i] = st.diag[i] + g;
                    st.diag[j] = st.diag[j] + g;
                } else {
                    let g = two_pi * dz * k_radial(ir) / (rf[nr] / rc[ir]).ln();
                    st.diag[i] = st.diag[i] + g;
                    boundary[i] = boundary[i] + g;
                }
            }
        }

        for ir in 0..nr {
            let area = mesh.ring_area(ir);
            let k = k_axial(ir);
            for iz in 0..nz {
                let i = mesh.index(ir, iz);
                if iz + 1 < nz {
                    let g = k * area / (zc[iz + 1] - zc[iz]);
                    let j = mesh.index(ir, iz + 1);
                    st.east[i] = st.east[i] + g;
                    st.west[j] = st.west[j] + g;
                    st.diag[i] = st.diag[i] + g;
                    st.diag[j] = st.diag[j] + g;
                }
            }
            let g0 = k * area / (zc[0] - zf[0]);
            let g1 = k * area / (zf[nz] - zc[nz - 1]);
            let first = mesh.index(ir, 0);
            let last = mesh.index(ir, nz - 1);
            st.diag[first] = st.diag[first] + g0;
            boundary[first] = boundary[first] + g0;
            st.diag[last] = st.diag[last] + g1;
            boundary[last] = boundary[last] + g1;
        }

        let mean = mean_velocity(q, &self.geometry);
        for ir in mesh.fluid_rings() {
            let flux = m.rho_cp_fluid * self.ring_velocity(mean, ir) * mesh.ring_area(ir);
            if flux == T::zero() {
                continue;
            }
            let mag = flux.abs();
            for iz in 0..nz {
                let i = mesh.index(ir, iz);
                st.diag[i] = st.diag[i] + mag;
                if flux > T::zero() {
                    if iz > 0 {
                        st.west[i] = st.west[i] + mag;
                    }
                    if iz + 1 == nz {
                        outflow[i] = mag;
                    }
                } else {
                    if iz + 1 < nz {
                        st.east[i] = st.east[i] + mag;
                    }
                    if iz == 0 {
                        outflow[i] = mag;
                    }
                }
            }
        }

        let lu = BandedLu::factor(&st)?;
        Ok(SteadyOperator {
            q,
            channel_count: self.geometry.channel_count,
            tolerance: self.tolerance,
            mesh: Arc::clone(&self.mesh),
            stencil: st,
            lu,
            boundary,
            outflow,
        })
    }

    /// Steady temperature rise for total heater powers `p1`, `p2` (W) at flow `q` (m³/s).
    pub fn solve_steady(&self, q: T, p1: T, p2: T) -> Result<TemperatureField<T>, ThermalError> {
        self.operator(q)?.solve(p1, p2, SourceMode::Physical)
    }
}

/// Factored steady operator at one flow rate. Reusable for any number of
/// source combinations.
#[derive(Debug, Clone)]
pub struct SteadyOperator<T> {
    q: T,
    channel_count: usize,
    tolerance: T,
    mesh: Arc<Mesh<T>>,
    stencil: Stencil<T>,
    lu: BandedLu<T>,
    boundary: Vec<T>,
    outflow: Vec<T>,
}

impl<T: Scalar> SteadyOperator<T> {
    pub fn flow(&self) -> T {
        self.q
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn stencil(&self) -> &Stencil<T> {
        &self.stencil
    }

    /// Source vector for total powers split evenly over the parallel channels.
    pub fn rhs(&self, p1: T, p2: T) -> Vec<T> {
        let per = T::one() / T::of(self.channel_count as f64);
        let mut b = vec![T::zero(); self.mesh.len()];
        for &(c, w) in &self.mesh.heater_up {
            b[c] = b[c] + p1 * per * w;
        }
        for &(c, w) in &self.mesh.heater_down {
            b[c] = b[c] + p2 * per * w;
        }
        b
    }

    pub fn solve(&self, p1: T, p2: T, mode: SourceMode) -> Result<TemperatureField<T>, ThermalError> {
        if mode == SourceMode::Physical && (p1 < T::zero() || p2 < T::zero()) {
            return Err(ThermalError::NegativePower {
                p1: p1.as_f64(),
                p2: p2.as_f64(),
            });
        }
        let b = self.rhs(p1, p2);
        let (rise, residual) = banded::solve_refined(&self.stencil, &self.lu, &b, self.tolerance)?;
        let injected = (p1 + p2) / T::of(self.channel_count as f64);
        let conduction = rise.iter().zip(&self.boundary).map(|(&t, &g)| t * g).sum();
        let enthalpy = rise.iter().zip(&self.outflow).map(|(&t, &m)| t * m).sum();
        Ok(TemperatureField {
            mesh: Arc::clone(&self.mesh),
            rise,
            q: self.q,
            p1,
            p2,
            residual,
            energy: EnergyBalance {
                injected,
                boundary_conduction: conduction,
                enthalpy_outflow: enthalpy,
            },
        })
    }

    /// Unit-power fields `(field(q, 1, 0), field(q, 0, 1))`.
    pub fn unit_fields(&self) -> Result<(TemperatureField<T>, TemperatureField<T>), ThermalError> {
        Ok((
            self.solve(T::one(), T::zero(), SourceMode::Physical)?,
            self.solve(T::zero(), T::one(), SourceMode::Physical)?,
        ))
    }
}
