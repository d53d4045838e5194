//! Analytic initial textures: Néel skyrmions, domain-wall pairs and the
//! skyrmion-row + DWP scenes. Seeded states must be relaxed before use.

use std::f64::consts::FRAC_PI_2;

use crate::analysis::{census, Census};
use crate::dynamics::{RelaxConfig, RelaxReport, Simulation};
use crate::error::{Error, Result};
use crate::model::{GeometryMask, MagnetizationGrid, MaterialParams};
use crate::vec3::Vec3;

/// Beyond this many wall widths from a texture the seed leaves cells untouched.
const REACH_WIDTHS: f64 = 6.0;

/// Sign of the in-plane chirality factor; D = 0 falls back to the D > 0 sense.
fn chirality(p: &MaterialParams) -> f64 {
    if p.dmi_d < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Polar angle profile of a 360° wall of radius `r0` and width `w`, measured
/// from the background direction (0 far away, pi at the core).
pub fn skyrmion_profile(r: f64, r0: f64, w: f64) -> f64 {
    FRAC_PI_2 * (((r + r0) / w).tanh() + ((r0 - r) / w).tanh())
}

/// Writes a Néel skyrmion whose core points along `core_polarity * z` into a
/// background of the opposite sign.
pub fn seed_skyrmion(
    state: &mut MagnetizationGrid,
    g: &GeometryMask,
    p: &MaterialParams,
    center: (f64, f64),
    radius: f64,
    core_polarity: f64,
) -> Result<()> {
    state.check_shape(g)?;
    if !(radius > 0.0) || radius >= 0.5 * g.width() {
        return Err(Error::Seeding(format!(
            "skyrmion radius {:.1} nm must be positive and below the track half-width {:.1} nm",
            radius * 1e9,
            0.5 * g.width() * 1e9
        )));
    }
    if core_polarity.abs() != 1.0 {
        return Err(Error::Seeding(format!("core polarity must be +1 or -1, got {core_polarity}")));
    }
    let (cx, cy) = center;
    if cx - radius < 0.0 || cx + radius > g.length() || cy - radius < 0.0 || cy + radius > g.width() {
        return Err(Error::Seeding(format!(
            "skyrmion at ({:.1}, {:.1}) nm with radius {:.1} nm leaves the mesh",
            cx * 1e9,
            cy * 1e9,
            radius * 1e9
        )));
    }
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = g.center(i, j);
            if !g.is_active(i, j) && (x - cx).hypot(y - cy) <= radius {
                return Err(Error::Seeding(format!(
                    "skyrmion at ({:.1}, {:.1}) nm overlaps inactive cell ({i}, {j})",
                    cx * 1e9,
                    cy * 1e9
                )));
            }
        }
    }
    let w = p.wall_width();
    let reach = radius + REACH_WIDTHS * w;
    // For a core along p z, the in-plane part points along -p sign(D) r_hat.
    let c = -core_polarity * chirality(p);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !g.is_active(i, j) {
                continue;
            }
            let (x, y) = g.center(i, j);
            let (dx, dy) = (x - cx, y - cy);
            let r = dx.hypot(dy);
            if r > reach {
                continue;
            }
            if r == 0.0 {
                state.set(i, j, Vec3::Z * core_polarity);
                continue;
            }
            let phi = skyrmion_profile(r, radius, w);
            let (ux, uy) = (dx / r, dy / r);
            let s = phi.sin();
            state.set(i, j, Vec3::new(c * s * ux, c * s * uy, -core_polarity * phi.cos()));
        }
    }
    Ok(())
}

/// Reversed domain (m_z = -1) between `x_left` and `x_right` in a +z track.
/// Cells outside the walls' reach keep their current value.
pub fn seed_domain_wall_pair(
    state: &mut MagnetizationGrid,
    g: &GeometryMask,
    p: &MaterialParams,
    x_left: f64,
    x_right: f64,
) -> Result<()> {
    state.check_shape(g)?;
    if !(0.0 < x_left && x_left < x_right && x_right < g.length()) {
        return Err(Error::Seeding(format!(
            "need 0 < x_left < x_right < {:.1} nm, got {:.1} / {:.1} nm",
            g.length() * 1e9,
            x_left * 1e9,
            x_right * 1e9
        )));
    }
    if let Some(n) = g.notch {
        let (a, b) = n.x_range();
        let clear = 20e-9;
        for x in [x_left, x_right] {
            if x > a - clear && x < b + clear {
                return Err(Error::Seeding(format!(
                    "domain wall at {:.1} nm is within 20 nm of the notch [{:.1}, {:.1}] nm",
                    x * 1e9,
                    a * 1e9,
                    b * 1e9
                )));
            }
        }
        if x_left < a && x_right > b {
            return Err(Error::Seeding("domain wall pair encloses the notch".into()));
        }
    }
    let w = p.wall_width();
    let mid = 0.5 * (x_left + x_right);
    let c = chirality(p);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if !g.is_active(i, j) {
                continue;
            }
            let (x, _) = g.center(i, j);
            if x < x_left - REACH_WIDTHS * w || x > x_right + REACH_WIDTHS * w {
                continue;
            }
            let th = FRAC_PI_2 * (((x - x_left) / w).tanh() - ((x - x_right) / w).tanh());
            // d(theta)/dx is positive on the left wall and negative on the right.
            let slope = if x < mid { 1.0 } else { -1.0 };
            state.set(i, j, Vec3::new(-c * th.sin() * slope, 0.0, th.cos()));
        }
    }
    Ok(())
}

/// Where the scene seeder puts the DWP and the skyrmion row.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub n_skyrmions: usize,
    /// Center-to-center distance of neighboring skyrmions, m.
    pub skyrmion_spacing: f64,
    /// Distance from the DWP's right wall to the notch center, m.
    pub dwp_offset: f64,
    /// Seeded distance between the two walls, m.
    pub dwp_width: f64,
    /// Distance from the DWP's left wall to the nearest skyrmion center, m.
    pub skyrmion_gap: f64,
    /// Seed radius before relaxation, m.
    pub seed_radius: f64,
}

impl Default for SceneLayout {
    fn default() -> Self {
        SceneLayout {
            n_skyrmions: 0,
            skyrmion_spacing: 45e-9,
            dwp_offset: 40e-9,
            dwp_width: 40e-9,
            skyrmion_gap: 50e-9,
            seed_radius: 10e-9,
        }
    }
}

impl SceneLayout {
    pub fn with_skyrmions(n: usize) -> Self {
        SceneLayout {
            n_skyrmions: n,
            ..Self::default()
        }
    }

    /// (x_left, x_right) of the DWP for a track notched at `notch_x`.
    pub fn dwp_walls(&self, notch_x: f64) -> (f64, f64) {
        let xr = notch_x - self.dwp_offset;
        (xr - self.dwp_width, xr)
    }

    /// Skyrmion centers, nearest to the DWP first.
    pub fn skyrmion_centers(&self, notch_x: f64, y: f64) -> Vec<(f64, f64)> {
        let (xl, _) = self.dwp_walls(notch_x);
        (0..self.n_skyrmions)
            .map(|k| (xl - self.skyrmion_gap - k as f64 * self.skyrmion_spacing, y))
            .collect()
    }
}

/// Census of a relaxed scene.
#[derive(Debug, Clone)]
pub struct SceneReport {
    pub relax: RelaxReport,
    pub census: Census,
}

/// Clearance kept between the left-most skyrmion seed and the track start.
const END_CLEARANCE: f64 = 10e-9;

/// DWP just left of the notch plus a row of `n_skyrmions` core-down
/// skyrmions on the centerline to its left, relaxed with `relax`.
pub fn seed_scene(
    sim: &mut Simulation,
    layout: &SceneLayout,
    relax: &RelaxConfig,
) -> Result<(MagnetizationGrid, SceneReport)> {
    let notch = sim
        .mask
        .notch
        .ok_or_else(|| Error::Seeding("scene seeding needs a notched track".into()))?;
    let centers = layout.skyrmion_centers(notch.center_x, 0.5 * sim.mask.width());
    seed_scene_at(sim, layout, &centers, relax)
}

/// Like [`seed_scene`] with explicit skyrmion centers.
pub fn seed_scene_at(
    sim: &mut Simulation,
    layout: &SceneLayout,
    centers: &[(f64, f64)],
    relax: &RelaxConfig,
) -> Result<(MagnetizationGrid, SceneReport)> {
    let g = sim.mask.clone();
    let notch = g.notch.ok_or_else(|| Error::Seeding("scene seeding needs a notched track".into()))?;
    let mut s = MagnetizationGrid::uniform(&g, Vec3::Z);
    let (xl, xr) = layout.dwp_walls(notch.center_x);
    seed_domain_wall_pair(&mut s, &g, &sim.params, xl, xr)?;
    let need = layout.seed_radius + END_CLEARANCE;
    for &(x, y) in centers {
        if x < need || x + layout.seed_radius > xl {
            return Err(Error::Seeding(format!(
                "{} skyrmions at {:.0} nm spacing do not fit in the {:.1} nm left of the DWP \
                 (skyrmion at {:.1} nm)",
                centers.len(),
                layout.skyrmion_spacing * 1e9,
                xl * 1e9,
                x * 1e9
            )));
        }
        seed_skyrmion(&mut s, &g, &sim.params, (x, y), layout.seed_radius, -1.0)?;
    }
    let relax = sim.relax(&mut s, relax)?;
    let c = census(&s, &g, 0.0);
    if c.dwp.is_none() {
        log::warn!("seed_scene: the domain wall pair did not survive relaxation");
    }
    if c.skyrmions.len() != centers.len() {
        log::warn!(
            "seed_scene: seeded {} skyrmions, {} survived relaxation",
            centers.len(),
            c.skyrmions.len()
        );
    }
    Ok((s, SceneReport { relax, census: c }))
}
