use crate::thermal::{GridSpec, SensorGeometry, ThermalError};
use crate::Scalar;

/// Material region of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Wall,
    Air,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Fluid => "fluid",
            Region::Wall => "wall",
            Region::Air => "air",
        }
    }
}

/// Weighted set of cells: `(cell index, weight)`.
pub type CellWeights<T> = Vec<(usize, T)>;

/// Structured axisymmetric finite-volume grid over `0 <= r <= ambient_radius`,
/// `0 <= z <= cavity_length`.
///
/// Cells are numbered radius-fastest, `index = iz * n_radial + ir`, so the
/// 5-point stencil has bandwidth `n_radial`.
#[derive(Debug, Clone)]
pub struct Mesh<T> {
    r_faces: Vec<T>,
    z_faces: Vec<T>,
    r_centers: Vec<T>,
    z_centers: Vec<T>,
    radial_region: Vec<Region>,
    n_fluid: usize,
    n_wall: usize,
    /// Fraction of the upstream heater power deposited in each cell.
    pub heater_up: CellWeights<T>,
    pub heater_down: CellWeights<T>,
    /// Interpolation weights reading the wall-surface temperature at a junction.
    pub junction_up: CellWeights<T>,
    pub junction_down: CellWeights<T>,
}

impl<T: Scalar> Mesh<T> {
    pub fn n_radial(&self) -> usize {
        self.r_centers.len()
    }

    pub fn n_axial(&self) -> usize {
        self.z_centers.len()
    }

    pub fn len(&self) -> usize {
        self.n_radial() * self.n_axial()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ir: usize, iz: usize) -> usize {
        iz * self.n_radial() + ir
    }

    /// `(ir, iz)` of a cell index.
    pub fn split(&self, cell: usize) -> (usize, usize) {
        (cell % self.n_radial(), cell / self.n_radial())
    }

    pub fn r_faces(&self) -> &[T] {
        &self.r_faces
    }

    pub fn z_faces(&self) -> &[T] {
        &self.z_faces
    }

    pub fn r_centers(&self) -> &[T] {
        &self.r_centers
    }

    pub fn z_centers(&self) -> &[T] {
        &self.z_centers
    }

    pub fn axial_step(&self) -> T {
        self.z_faces[1] - self.z_faces[0]
    }

    pub fn ambient_radius(&self) -> T {
        *self.r_faces.last().unwrap()
    }

    pub fn cavity_length(&self) -> T {
        *self.z_faces.last().unwrap()
    }

    pub fn radial_region(&self, ir: usize) -> Region {
        self.radial_region[ir]
    }

    pub fn region(&self, cell: usize) -> Region {
        self.radial_region[self.split(cell).0]
    }

    /// Radial indices of the fluid cells.
    pub fn fluid_rings(&self) -> std::ops::Range<usize> {
        0..self.n_fluid
    }

    /// Radial index of the outermost wall ring (the wall surface).
    pub fn wall_surface_ring(&self) -> usize {
        self.n_fluid + self.n_wall - 1
    }

    /// Annular cross-section of a radial ring.
    pub fn ring_area(&self, ir: usize) -> T {
        let (a, b) = (self.r_faces[ir], self.r_faces[ir + 1]);
        T::PI() * (b * b - a * a)
    }

    pub fn volume(&self, cell: usize) -> T {
        let (ir, iz) = self.split(cell);
        self.ring_area(ir) * (self.z_faces[iz + 1] - self.z_faces[iz])
    }

    pub fn center(&self, cell: usize) -> (T, T) {
        let (ir, iz) = self.split(cell);
        (self.r_centers[ir], self.z_centers[iz])
    }
}

fn uniform<T: Scalar>(start: T, end: T, n: usize) -> Vec<T> {
    (0..=n)
        .map(|i| {
            if i == n {
                end
            } else {
                start + (end - start) * T::of(i as f64) / T::of(n as f64)
            }
        })
        .collect()
}

fn graded<T: Scalar>(start: T, end: T, n: usize, growth: T) -> Vec<T> {
    if growth == T::one() {
        return uniform(start, end, n);
    }
    let span = end - start;
    let first = span * (growth - T::one()) / (growth.powi(n as i32) - T::one());
    let mut faces = Vec::with_capacity(n + 1);
    let mut r = start;
    let mut h = first;
    faces.push(start);
    for _ in 0..n - 1 {
        r = r + h;
        faces.push(r);
        h = h * growth;
    }
    faces.push(end);
    faces
}

/// Builds the finite-volume mesh and maps the heaters and thermopile
/// junctions onto cell sets.
pub fn build_mesh<T: Scalar>(
    geom: &SensorGeometry<T>,
    grid: &GridSpec<T>,
) -> Result<Mesh<T>, ThermalError> {
    geom.validate()?;
    grid.validate()?;
    let r_in = geom.channel_inner_radius;
    let r_out = geom.outer_wall_radius();

    let mut r_faces = uniform(T::zero(), r_in, grid.radial_cells_fluid);
    r_faces.extend(uniform(r_in, r_out, grid.radial_cells_wall).into_iter().skip(1));
    r_faces.extend(
        graded(r_out, geom.ambient_radius, grid.radial_cells_air, grid.radial_grading)
            .into_iter()
            .skip(1),
    );
    let z_faces = uniform(T::zero(), geom.cavity_length, grid.n_axial);

    let mid = |f: &[T]| -> Vec<T> { f.windows(2).map(|w| (w[0] + w[1]) / T::of(2.0)).collect() };
    let r_centers = mid(&r_faces);
    let z_centers = mid(&z_faces);

    let radial_region = (0..r_centers.len())
        .map(|ir| {
            if ir < grid.radial_cells_fluid {
                Region::Fluid
            } else if ir < grid.radial_cells_fluid + grid.radial_cells_wall {
                Region::Wall
            } else {
                Region::Air
            }
        })
        .collect();

    let mut mesh = Mesh {
        r_faces,
        z_faces,
        r_centers,
        z_centers,
        radial_region,
        n_fluid: grid.radial_cells_fluid,
        n_wall: grid.radial_cells_wall,
        heater_up: Vec::new(),
        heater_down: Vec::new(),
        junction_up: Vec::new(),
        junction_down: Vec::new(),
    };
    mesh.heater_up = heater_cells(&mesh, geom.heater_up_center, geom.heater_width, "heater_up")?;
    mesh.heater_down =
        heater_cells(&mesh, geom.heater_down_center, geom.heater_width, "heater_down")?;
    mesh.junction_up = junction_probe(&mesh, geom.tc_junction_up, "tc_junction_up")?;
    mesh.junction_down = junction_probe(&mesh, geom.tc_junction_down, "tc_junction_down")?;
    Ok(mesh)
}

/// Power fractions over the wall cells overlapped by a heater strip,
/// proportional to overlapped volume.
fn heater_cells<T: Scalar>(
    mesh: &Mesh<T>,
    center: T,
    width: T,
    element: &'static str,
) -> Result<CellWeights<T>, ThermalError> {
    let dz = mesh.axial_step();
    if width < dz {
        return Err(ThermalError::ElementUnresolved {
            element,
            size: width.as_f64(),
            cell: dz.as_f64(),
        });
    }
    let lo = center - width / T::of(2.0);
    let hi = center + width / T::of(2.0);
    let wall: Vec<usize> = (mesh.n_fluid..mesh.n_fluid + mesh.n_wall).collect();
    let wall_area: T = wall.iter().map(|&ir| mesh.ring_area(ir)).sum();
    let mut cells = Vec::new();
    for iz in 0..mesh.n_axial() {
        let overlap = mesh.z_faces[iz + 1].min(hi) - mesh.z_faces[iz].max(lo);
        if overlap <= T::zero() {
            continue;
        }
        for &ir in &wall {
            let w = overlap / width * mesh.ring_area(ir) / wall_area;
            cells.push((mesh.index(ir, iz), w));
        }
    }
    if cells.is_empty() {
        return Err(ThermalError::ElementUnresolved {
            element,
            size: width.as_f64(),
            cell: dz.as_f64(),
        });
    }
    Ok(cells)
}

/// Linear interpolation of the wall-surface ring along z. Between the first
/// (last) cell centre and the end of the cavity the Dirichlet value 0 is the
/// second interpolation node.
fn junction_probe<T: Scalar>(
    mesh: &Mesh<T>,
    z: T,
    element: &'static str,
) -> Result<CellWeights<T>, ThermalError> {
    let ir = mesh.wall_surface_ring();
    let zc = &mesh.z_centers;
    let n = zc.len();
    let mut weights = Vec::with_capacity(2);
    if z <= zc[0] {
        weights.push((mesh.index(ir, 0), z / zc[0]));
    } else if z >= zc[n - 1] {
        let l = mesh.cavity_length();
        weights.push((mesh.index(ir, n - 1), (l - z) / (l - zc[n - 1])));
    } else {
        let i = zc.partition_point(|&c| c <= z) - 1;
        let t = (z - zc[i]) / (zc[i + 1] - zc[i]);
        weights.push((mesh.index(ir, i), T::one() - t));
        weights.push((mesh.index(ir, i + 1), t));
    }
    weights.retain(|(_, w)| *w > T::zero());
    if weights.is_empty() {
        return Err(ThermalError::ElementUnresolved {
            element,
            size: 0.0,
            cell: mesh.axial_step().as_f64(),
        });
    }
    Ok(weights)
}
