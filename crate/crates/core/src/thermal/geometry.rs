use crate::thermal::ThermalError;
use crate::Scalar;

/// Physical layout of one suspended channel and its sensing elements.
///
/// All lengths are in metres and axial positions are measured from the
/// upstream end of the cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGeometry<T> {
    pub channel_inner_radius: T,
    pub wall_thickness: T,
    pub channel_count: usize,
    pub cavity_length: T,
    pub ambient_radius: T,
    pub heater_up_center: T,
    pub heater_down_center: T,
    pub heater_width: T,
    pub tc_junction_up: T,
    pub tc_junction_down: T,
    pub junction_count: usize,
    /// Require the element layout to be mirror-symmetric about the cavity centre.
    pub symmetric: bool,
}

impl<T: Scalar> Default for SensorGeometry<T> {
    fn default() -> Self {
        let length = T::of(1.6e-3);
        let mid = length / T::of(2.0);
        Self {
            channel_inner_radius: T::of(10e-6),
            wall_thickness: T::of(1.7e-6),
            channel_count: 5,
            cavity_length: length,
            ambient_radius: T::of(450e-6),
            heater_up_center: mid - T::of(250e-6),
            heater_down_center: mid + T::of(250e-6),
            heater_width: T::of(100e-6),
            tc_junction_up: mid - T::of(100e-6),
            tc_junction_down: mid + T::of(100e-6),
            junction_count: 26,
            symmetric: true,
        }
    }
}

impl<T: Scalar> SensorGeometry<T> {
    pub fn outer_wall_radius(&self) -> T {
        self.channel_inner_radius + self.wall_thickness
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let bad = |msg: String| Err(ThermalError::InvalidGeometry(msg));
        let r_in = self.channel_inner_radius;
        let r_out = self.outer_wall_radius();
        if !(r_in > T::zero() && self.wall_thickness > T::zero() && r_out < self.ambient_radius) {
            return bad(format!(
                "radii must satisfy 0 < {r_in} < {r_out} < {}",
                self.ambient_radius
            ));
        }
        if self.channel_count == 0 || self.junction_count == 0 {
            return bad("channel_count and junction_count must be at least 1".into());
        }
        if !(self.cavity_length > T::zero()) || !(self.heater_width > T::zero()) {
            return bad("cavity_length and heater_width must be positive".into());
        }
        let inside = |z: T| z > T::zero() && z < self.cavity_length;
        let half = self.heater_width / T::of(2.0);
        for (name, z) in [
            ("heater_up_center", self.heater_up_center),
            ("heater_down_center", self.heater_down_center),
        ] {
            if !inside(z - half) || !inside(z + half) {
                return bad(format!("{name} = {z} does not fit inside the cavity"));
            }
        }
        for (name, z) in [
            ("tc_junction_up", self.tc_junction_up),
            ("tc_junction_down", self.tc_junction_down),
        ] {
            if !inside(z) {
                return bad(format!("{name} = {z} lies outside the cavity"));
            }
        }
        if !(self.heater_up_center < self.heater_down_center)
            || !(self.tc_junction_up < self.tc_junction_down)
        {
            return bad("upstream elements must precede downstream elements".into());
        }
        if self.symmetric {
            let tol = self.cavity_length * T::of(1e-9);
            let mirror = |a: T, b: T| ((a + b) - self.cavity_length).abs() <= tol;
            if !mirror(self.heater_up_center, self.heater_down_center)
                || !mirror(self.tc_junction_up, self.tc_junction_down)
            {
                return bad("symmetric layout requested but elements are not mirrored".into());
            }
        }
        Ok(())
    }
}

/// Thermal properties. Conductivities in W/(m·K), heat capacity in J/(m³·K).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSet<T> {
    pub k_fluid: T,
    pub k_wall: T,
    pub k_air: T,
    pub rho_cp_fluid: T,
    /// Multiplier on the axial wall conductivity accounting for metal leads.
    pub wall_axial_conductance_boost: T,
}

impl<T: Scalar> Default for MaterialSet<T> {
    fn default() -> Self {
        Self {
            k_fluid: T::of(0.60),
            k_wall: T::of(3.0),
            k_air: T::of(0.026),
            rho_cp_fluid: T::of(4.18e6),
            wall_axial_conductance_boost: T::of(2.0),
        }
    }
}

impl<T: Scalar> MaterialSet<T> {
    pub fn validate(&self) -> Result<(), ThermalError> {
        let positive = [self.k_fluid, self.k_wall, self.k_air, self.rho_cp_fluid];
        if positive.iter().any(|v| !(*v > T::zero())) {
            return Err(ThermalError::InvalidMaterials(
                "conductivities and rho_cp_fluid must be positive".into(),
            ));
        }
        if !(self.wall_axial_conductance_boost >= T::one()) {
            return Err(ThermalError::InvalidMaterials(
                "wall_axial_conductance_boost must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cell counts for the structured (r, z) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub n_axial: usize,
    pub radial_cells_fluid: usize,
    pub radial_cells_wall: usize,
    pub radial_cells_air: usize,
    /// Geometric growth factor of successive air cells.
    pub radial_grading: T,
}

impl<T: Scalar> Default for GridSpec<T> {
    fn default() -> Self {
        Self {
            n_axial: 320,
            radial_cells_fluid: 4,
            radial_cells_wall: 2,
            radial_cells_air: 30,
            radial_grading: T::of(1.15),
        }
    }
}

impl<T: Scalar> GridSpec<T> {
    pub fn validate(&self) -> Result<(), ThermalError> {
        let counts = [
            self.n_axial,
            self.radial_cells_fluid,
            self.radial_cells_wall,
            self.radial_cells_air,
        ];
        if counts.iter().any(|&n| n < 2) {
            return Err(ThermalError::InvalidGrid("all cell counts must be >= 2".into()));
        }
        if !(self.radial_grading >= T::one()) {
            return Err(ThermalError::InvalidGrid("radial_grading must be >= 1".into()));
        }
        Ok(())
    }

    /// Every count multiplied by `factor`; the air grading is adjusted so the
    /// refined cells subdivide the same overall stretching.
    pub fn refined(&self, factor: usize) -> Self {
        let g = self.radial_grading.as_f64().powf(1.0 / factor as f64);
        Self {
            n_axial: self.n_axial * factor,
            radial_cells_fluid: self.radial_cells_fluid * factor,
            radial_cells_wall: self.radial_cells_wall * factor,
            radial_cells_air: self.radial_cells_air * factor,
            radial_grading: T::of(g),
        }
    }
}

/// Axial velocity distribution across the channel cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VelocityProfile {
    #[default]
    Plug,
    Parabolic,
}

impl std::str::FromStr for VelocityProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plug" => Ok(Self::Plug),
            "parabolic" => Ok(Self::Parabolic),
            other => Err(format!("unknown velocity profile `{other}` (plug|parabolic)")),
        }
    }
}

impl std::fmt::Display for VelocityProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Plug => "plug",
            Self::Parabolic => "parabolic",
        })
    }
}

/// Mean axial velocity in one channel for the total volumetric flow `q`
/// (m³/s) shared equally by all parallel channels.
pub fn mean_velocity<T: Scalar>(q: T, geom: &SensorGeometry<T>) -> T {
    let per_channel = q / T::of(geom.channel_count as f64);
    let r = geom.channel_inner_radius;
    per_channel / (T::PI() * r * r)
}
