//! Simulation state, material constants, and racetrack geometry.

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Reduced Planck constant, J*s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Gyromagnetic ratio of the free electron in micromagnetic units, m/(A*s).
pub const GAMMA_DEFAULT: f64 = 2.211e5;

/// Material and film constants. All values SI.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub a_ex: f64,
    pub k_u: f64,
    pub m_s: f64,
    pub dmi_d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta_sh: f64,
    pub t_film: f64,
    pub gamma: f64,
    pub use_thin_film_demag: bool,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            a_ex: 15e-12,
            k_u: 0.8e6,
            m_s: 5.8e5,
            dmi_d: 3.5e-3,
            alpha: 0.3,
            beta: 0.1,
            theta_sh: 0.3,
            t_film: 0.4e-9,
            gamma: GAMMA_DEFAULT,
            use_thin_film_demag: true,
        }
    }
}

impl MaterialParams {
    /// Effective uniaxial anisotropy; the local thin-film shape term is
    /// subtracted when `use_thin_film_demag` is set.
    pub fn k_eff(&self) -> f64 {
        if self.use_thin_film_demag {
            self.k_u - 0.5 * MU0 * self.m_s * self.m_s
        } else {
            self.k_u
        }
    }

    /// Bloch-wall width parameter sqrt(A/K_eff), m.
    pub fn wall_width(&self) -> f64 {
        (self.a_ex / self.k_eff()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        }
        fn unit_interval(field: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    field,
                    reason: format!("must lie in (0, 1], got {v}"),
                })
            }
        }
        positive("a_ex", self.a_ex)?;
        positive("k_u", self.k_u)?;
        positive("m_s", self.m_s)?;
        positive("t_film", self.t_film)?;
        positive("gamma", self.gamma)?;
        unit_interval("alpha", self.alpha)?;
        unit_interval("theta_sh", self.theta_sh)?;
        if !self.dmi_d.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dmi_d",
                reason: "must be finite".into(),
            });
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter {
                field: "beta",
                reason: "must be finite".into(),
            });
        }
        if self.k_eff() <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "k_u",
                reason: format!(
                    "effective anisotropy {:.4e} J/m^3 is not positive; the film would be in-plane",
                    self.k_eff()
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotchSide {
    Upper,
    Lower,
}

impl std::str::FromStr for NotchSide {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "upper" => Ok(NotchSide::Upper),
            "lower" => Ok(NotchSide::Lower),
            other => Err(format!("expected `upper` or `lower`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for NotchSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NotchSide::Upper => "upper",
            NotchSide::Lower => "lower",
        })
    }
}

/// Rectangular cut-out on one long edge of the track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Notch {
    pub center_x: f64,
    pub length: f64,
    pub depth: f64,
    pub side: NotchSide,
}

impl Notch {
    pub fn x_range(&self) -> (f64, f64) {
        (
            self.center_x - 0.5 * self.length,
            self.center_x + 0.5 * self.length,
        )
    }
}

/// Mesh description shared by all geometry masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Default for Mesh {
    fn default() -> Self {
        Mesh {
            nx: 255,
            ny: 40,
            dx: 2e-9,
            dy: 2e-9,
            dz: 0.4e-9,
        }
    }
}

impl Mesh {
    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn width(&self) -> f64 {
        self.ny as f64 * self.dy
    }
}

/// Active/inactive cell map of the racetrack.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMask {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub active: Vec<bool>,
    pub notch: Option<Notch>,
}

impl GeometryMask {
    /// Full rectangle of active cells, optionally with a notch cut from one edge.
    /// A cell is removed when its center lies inside the notch rectangle.
    pub fn racetrack(mesh: Mesh, notch: Option<Notch>) -> Result<Self> {
        if mesh.nx < 2 || mesh.ny < 2 {
            return Err(Error::InvalidParameter {
                field: "nx",
                reason: "mesh needs at least 2x2 cells".into(),
            });
        }
        for (field, v) in [("dx", mesh.dx), ("dy", mesh.dy), ("dz", mesh.dz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        let mut active = vec![true; mesh.nx * mesh.ny];
        if let Some(n) = notch {
            if n.depth >= mesh.width() || n.length <= 0.0 || n.depth <= 0.0 {
                return Err(Error::InvalidParameter {
                    field: "notch_depth",
                    reason: "notch must have positive size and leave part of the track width".into(),
                });
            }
            // Half-open in x so an outline through cell centers still cuts
            // length/dx cells.
            let (x0, x1) = n.x_range();
            let (x0, x1) = (x0 - 1e-6 * mesh.dx, x1 - 1e-6 * mesh.dx);
            let w = mesh.width();
            let fuzz = 1e-6 * mesh.dy;
            for j in 0..mesh.ny {
                let y = (j as f64 + 0.5) * mesh.dy;
                let in_y = match n.side {
                    NotchSide::Upper => y > w - n.depth + fuzz,
                    NotchSide::Lower => y < n.depth - fuzz,
                };
                if !in_y {
                    continue;
                }
                for i in 0..mesh.nx {
                    let x = (i as f64 + 0.5) * mesh.dx;
                    if x >= x0 && x < x1 {
                        active[j * mesh.nx + i] = false;
                    }
                }
            }
        }
        Ok(GeometryMask {
            nx: mesh.nx,
            ny: mesh.ny,
            dx: mesh.dx,
            dy: mesh.dy,
            dz: mesh.dz,
            active,
            notch,
        })
    }

    pub fn mesh(&self) -> Mesh {
        Mesh {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
            dz: self.dz,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.active[self.index(i, j)]
    }

    /// Cell-center position, m.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_volume(&self) -> f64 {
        self.active_count() as f64 * self.cell_volume()
    }

    pub fn length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn width(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    /// Same mesh with every cell active.
    pub fn without_notch(&self) -> GeometryMask {
        GeometryMask {
            active: vec![true; self.nx * self.ny],
            notch: None,
            ..self.clone()
        }
    }
}

/// Table I device: 510 x 80 x 0.4 nm film on 2 x 2 x 0.4 nm cells with a
/// 30 x 10 nm notch on the upper edge.
pub fn build_default_track() -> (MaterialParams, GeometryMask) {
    let mask = GeometryMask::racetrack(Mesh::default(), Some(default_notch()))
        .expect("default mesh is valid");
    (MaterialParams::default(), mask)
}

pub fn default_notch() -> Notch {
    Notch {
        center_x: 350e-9,
        length: 30e-9,
        depth: 10e-9,
        side: NotchSide::Upper,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    MinusX,
    PlusX,
    MinusY,
    PlusY,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::MinusX,
        Direction::PlusX,
        Direction::MinusY,
        Direction::PlusY,
    ];

    fn offset(self) -> (isize, isize) {
        match self {
            Direction::MinusX => (-1, 0),
            Direction::PlusX => (1, 0),
            Direction::MinusY => (0, -1),
            Direction::PlusY => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub direction: Direction,
    /// `None` when the neighbor is outside the mesh or inactive.
    pub cell: Option<(usize, usize)>,
}

impl Neighbor {
    pub fn is_boundary(&self) -> bool {
        self.cell.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellNeighbors {
    pub neighbors: [Neighbor; 4],
}

impl CellNeighbors {
    pub fn active_count(&self) -> usize {
        self.neighbors.iter().filter(|n| !n.is_boundary()).count()
    }

    pub fn get(&self, d: Direction) -> Neighbor {
        self.neighbors[d as usize]
    }
}

/// Lateral neighbors of an active cell, in `Direction::ALL` order.
pub fn cell_neighbors(mask: &GeometryMask, i: usize, j: usize) -> Result<CellNeighbors> {
    if !mask.is_active(i, j) {
        return Err(Error::InactiveCell { i, j });
    }
    let neighbors = Direction::ALL.map(|direction| {
        let (di, dj) = direction.offset();
        let ni = i as isize + di;
        let nj = j as isize + dj;
        let cell = if ni >= 0
            && nj >= 0
            && mask.is_active(ni as usize, nj as usize)
        {
            Some((ni as usize, nj as usize))
        } else {
            None
        };
        Neighbor { direction, cell }
    });
    Ok(CellNeighbors { neighbors })
}

/// Flattened neighbor table used by the field kernels. A missing neighbor
/// points back at the cell itself with weight zero, so the kernels run
/// without branches.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub active_cells: Vec<u32>,
    pub neighbor: Vec<[u32; 4]>,
    pub weight: Vec<[f64; 4]>,
}

impl Stencil {
    pub fn new(mask: &GeometryMask) -> Self {
        let n = mask.nx * mask.ny;
        let mut neighbor = vec![[0u32; 4]; n];
        let mut weight = vec![[0.0; 4]; n];
        let mut active_cells = Vec::with_capacity(n);
        for j in 0..mask.ny {
            for i in 0..mask.nx {
                let c = mask.index(i, j);
                for d in 0..4 {
                    neighbor[c][d] = c as u32;
                }
                if !mask.active[c] {
                    continue;
                }
                active_cells.push(c as u32);
                let nb = cell_neighbors(mask, i, j).expect("cell checked active");
                for (d, n) in nb.neighbors.iter().enumerate() {
                    if let Some((ni, nj)) = n.cell {
                        neighbor[c][d] = mask.index(ni, nj) as u32;
                        weight[c][d] = 1.0;
                    }
                }
            }
        }
        Stencil {
            nx: mask.nx,
            ny: mask.ny,
            active_cells,
            neighbor,
            weight,
        }
    }
}

/// Unit magnetization on the active cells of a mesh; inactive cells hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationGrid {
    pub nx: usize,
    pub ny: usize,
    pub m: Vec<Vec3>,
    pub time: f64,
    /// Lab-frame x of the mesh origin, m. Nonzero only for moving-frame runs.
    pub frame_offset: f64,
}

impl MagnetizationGrid {
    pub fn uniform(mask: &GeometryMask, direction: Vec3) -> Self {
        let d = direction.normalized();
        let m = mask
            .active
            .iter()
            .map(|&a| if a { d } else { Vec3::ZERO })
            .collect();
        MagnetizationGrid {
            nx: mask.nx,
            ny: mask.ny,
            m,
            time: 0.0,
            frame_offset: 0.0,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Vec3 {
        self.m[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Vec3) {
        self.m[j * self.nx + i] = v;
    }

    pub fn check_shape(&self, mask: &GeometryMask) -> Result<()> {
        if self.nx != mask.nx || self.ny != mask.ny || self.m.len() != mask.active.len() {
            return Err(Error::ShapeMismatch {
                state_nx: self.nx,
                state_ny: self.ny,
                mesh_nx: mask.nx,
                mesh_ny: mask.ny,
            });
        }
        Ok(())
    }

    /// Largest | |m| - 1 | over active cells.
    pub fn max_norm_deviation(&self, mask: &GeometryMask) -> f64 {
        self.m
            .iter()
            .zip(&mask.active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn normalize(&mut self, mask: &GeometryMask) {
        for (v, &a) in self.m.iter_mut().zip(&mask.active) {
            *v = if a { v.normalized() } else { Vec3::ZERO };
        }
    }

    pub fn mean_mz(&self, mask: &GeometryMask) -> f64 {
        let mut s = 0.0;
        let mut n = 0usize;
        for (v, &a) in self.m.iter().zip(&mask.active) {
            if a {
                s += v.z;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentDirection {
    PlusX,
    MinusX,
}

impl std::str::FromStr for CurrentDirection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+x" | "plus_x" | "+1" => Ok(CurrentDirection::PlusX),
            "-x" | "minus_x" | "-1" => Ok(CurrentDirection::MinusX),
            other => Err(format!("expected `+x` or `-x`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for CurrentDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurrentDirection::PlusX => "+x",
            CurrentDirection::MinusX => "-x",
        })
    }
}

/// Sign linking current direction to spin polarization. With a charge current
/// along +x the polarization is `POLARIZATION_SIGN * y`; the sign is chosen so
/// that positive current pushes Néel textures of positive DMI toward +x.
pub const POLARIZATION_SIGN: f64 = -1.0;

/// Rectangular heavy-metal current pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePulse {
    pub j_hm: f64,
    pub direction: CurrentDirection,
    pub t_on: f64,
    pub t_off: f64,
}

impl DrivePulse {
    pub fn new(j_hm: f64, t_on: f64, t_off: f64) -> Result<Self> {
        let p = DrivePulse {
            j_hm,
            direction: CurrentDirection::PlusX,
            t_on,
            t_off,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn off() -> Self {
        DrivePulse {
            j_hm: 0.0,
            direction: CurrentDirection::PlusX,
            t_on: 0.0,
            t_off: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j_hm.is_finite() && self.j_hm >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "j_hm",
                reason: format!("must be >= 0, got {}", self.j_hm),
            });
        }
        if !(self.t_off > self.t_on) {
            return Err(Error::InvalidParameter {
                field: "t_off",
                reason: format!("t_off ({}) must exceed t_on ({})", self.t_off, self.t_on),
            });
        }
        Ok(())
    }

    /// Spin-polarization unit vector, in-plane and transverse to the current.
    pub fn sigma_hat(&self) -> Vec3 {
        let s = match self.direction {
            CurrentDirection::PlusX => 1.0,
            CurrentDirection::MinusX => -1.0,
        };
        Vec3::Y * (POLARIZATION_SIGN * s)
    }

    pub fn is_on(&self, t: f64) -> bool {
        self.j_hm > 0.0 && t >= self.t_on && t < self.t_off
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_track_matches_device_table() {
        let (p, mask) = build_default_track();
        assert_eq!(p.alpha, 0.3);
        assert_eq!(p.dmi_d, 3.5e-3);
        assert_eq!(p.a_ex, 1.5e-11);
        assert_eq!(p.k_u, 8e5);
        assert_eq!(p.m_s, 5.8e5);
        assert_eq!(p.beta, 0.1);
        assert_eq!(p.theta_sh, 0.3);
        assert_eq!(p.t_film, 0.4e-9);
        assert_eq!((mask.nx, mask.ny), (255, 40));
        assert_eq!((mask.dx, mask.dy, mask.dz), (2e-9, 2e-9, 0.4e-9));
        let n = mask.notch.unwrap();
        assert_eq!((n.length, n.depth), (30e-9, 10e-9));
        p.validate().unwrap();
    }

    #[test]
    fn notch_removes_fifteen_by_five_cells() {
        let (_, mask) = build_default_track();
        assert_eq!(mask.active_count(), 255 * 40 - 15 * 5);
        // Cells 167..=181 in x, 35..=39 in y are cut.
        for j in 0..40 {
            for i in 0..255 {
                let cut = (167..=181).contains(&i) && (35..=39).contains(&j);
                assert_eq!(mask.is_active(i, j), !cut, "cell ({i},{j})");
            }
        }
    }

    #[test]
    fn effective_anisotropy_with_thin_film_demag() {
        let p = MaterialParams::default();
        let expected = 8e5 - MU0 * 5.8e5 * 5.8e5 / 2.0;
        assert!((p.k_eff() - expected).abs() < 1e-9);
        assert!((p.k_eff() - 5.886e5).abs() / 5.886e5 < 1e-3);
        let mut raw = p.clone();
        raw.use_thin_film_demag = false;
        assert_eq!(raw.k_eff(), 8e5);
    }

    #[test]
    fn invalid_alpha_is_rejected() {
        let mut p = MaterialParams::default();
        p.alpha = 1.5;
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("alpha"));
        p.alpha = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn neighbors_of_interior_and_corner_cells() {
        let (_, mask) = build_default_track();
        assert_eq!(cell_neighbors(&mask, 10, 10).unwrap().active_count(), 4);
        let corner = cell_neighbors(&mask, 0, 0).unwrap();
        assert_eq!(corner.active_count(), 2);
        assert!(corner.get(Direction::MinusX).is_boundary());
        assert!(corner.get(Direction::MinusY).is_boundary());
        assert!(cell_neighbors(&mask, 175, 38).is_err());
        assert!(cell_neighbors(&mask, 182, 38).is_ok());
    }

    #[test]
    fn cells_bordering_the_notch_see_a_boundary() {
        let (_, mask) = build_default_track();
        // Enumerate active cells with an inactive in-mesh neighbor. They
        // form the two vertical flanks and the floor of the notch.
        let mut flagged = Vec::new();
        for j in 0..mask.ny {
            for i in 0..mask.nx {
                if !mask.is_active(i, j) {
                    continue;
                }
                let nb = cell_neighbors(&mask, i, j).unwrap();
                let interior_boundary = nb.neighbors.iter().any(|n| {
                    let (di, dj) = n.direction.offset();
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    n.is_boundary()
                        && ni >= 0
                        && nj >= 0
                        && (ni as usize) < mask.nx
                        && (nj as usize) < mask.ny
                });
                if interior_boundary {
                    flagged.push((i, j));
                }
            }
        }
        // Floor: 15 cells at j = 34; flanks: 5 cells each at i = 166 and 182.
        assert_eq!(flagged.len(), 15 + 5 + 5);
        assert!(flagged.contains(&(175, 34)));
        assert!(flagged.contains(&(166, 37)));
        assert!(flagged.contains(&(182, 39)));
        let nb = cell_neighbors(&mask, 175, 34).unwrap();
        assert!(nb.get(Direction::PlusY).is_boundary());
    }

    #[test]
    fn mask_construction_is_deterministic() {
        let (_, a) = build_default_track();
        let (_, b) = build_default_track();
        assert_eq!(a, b);
    }

    #[test]
    fn sigma_hat_is_transverse_and_in_plane() {
        let mut p = DrivePulse::new(5e10, 0.0, 10e-9).unwrap();
        let s = p.sigma_hat();
        assert_eq!(s.z, 0.0);
        assert_eq!(s.x, 0.0);
        assert_eq!(s.norm(), 1.0);
        p.direction = CurrentDirection::MinusX;
        assert_eq!(p.sigma_hat(), -s);
        assert!(DrivePulse::new(-1.0, 0.0, 1.0).is_err());
        assert!(DrivePulse::new(1.0, 1.0, 1.0).is_err());
    }
}
