//! Observables extracted from snapshots: topological charge, skyrmion
//! census, domain-wall-pair position, trajectories, and run classification.

use std::f64::consts::PI;


use crate::dynamics::{Observer, Phase};
use crate::error::{Error, Result};
use crate::fields::Hamiltonian;
use crate::model::{GeometryMask, MagnetizationGrid};

/// Signed solid angle of the spherical triangle (a, b, c).
#[inline]
fn solid_angle(a: crate::Vec3, b: crate::Vec3, c: crate::Vec3) -> f64 {
    let num = a.dot(b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Charge of the plaquette whose lower-left cell is (i, j); zero unless all
/// four corners are active.
fn plaquette_charge(m: &MagnetizationGrid, g: &GeometryMask, i: usize, j: usize) -> f64 {
    if !(g.is_active(i, j) && g.is_active(i + 1, j) && g.is_active(i + 1, j + 1) && g.is_active(i, j + 1)) {
        return 0.0;
    }
    let a = m.get(i, j);
    let b = m.get(i + 1, j);
    let c = m.get(i + 1, j + 1);
    let d = m.get(i, j + 1);
    (solid_angle(a, b, c) + solid_angle(a, c, d)) / (4.0 * PI)
}

/// Q = 1/(4 pi) \int m . (dm/dx x dm/dy) dx dy, evaluated as a sum of
/// lattice solid angles (two triangles per plaquette). With this sign an
/// isolated skyrmion whose core points along +z has Q = +1, so the usual
/// core-down skyrmion in an up-magnetized track has Q = -1.
pub fn topological_charge(m: &MagnetizationGrid, g: &GeometryMask) -> f64 {
    let mut q = 0.0;
    for j in 0..g.ny.saturating_sub(1) {
        for i in 0..g.nx.saturating_sub(1) {
            q += plaquette_charge(m, g, i, j);
        }
    }
    q
}

/// Sign of the dominant m_z over active cells (+1 when balanced).
pub fn background_sign(m: &MagnetizationGrid, g: &GeometryMask) -> f64 {
    if m.mean_mz(g) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// A connected region of reversed magnetization.
#[derive(Debug, Clone)]
pub struct Component {
    pub cells: Vec<(usize, usize)>,
    pub centroid: (f64, f64),
    pub touches_x_end: bool,
    pub spans_width: bool,
}

impl Component {
    pub fn area_cells(&self) -> usize {
        self.cells.len()
    }
}

/// 4-connected components of cells with `bg * m_z < -threshold`.
pub fn reversed_components(m: &MagnetizationGrid, g: &GeometryMask, threshold: f64) -> Vec<Component> {
    let bg = background_sign(m, g);
    let n = g.nx * g.ny;
    let reversed: Vec<bool> = (0..n)
        .map(|c| g.active[c] && bg * m.m[c].z < -threshold)
        .collect();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if !reversed[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut cells = Vec::new();
        let (mut sx, mut sy) = (0.0, 0.0);
        let (mut low, mut high, mut end) = (false, false, false);
        while let Some(c) = stack.pop() {
            let (i, j) = g.coords(c);
            cells.push((i, j));
            let (x, y) = g.center(i, j);
            sx += x;
            sy += y;
            if i == 0 || i + 1 == g.nx {
                end = true;
            }
            if j == 0 || !g.is_active(i, j - 1) {
                low = true;
            }
            if j + 1 == g.ny || !g.is_active(i, j + 1) {
                high = true;
            }
            let mut visit = |ni: usize, nj: usize| {
                let nc = g.index(ni, nj);
                if reversed[nc] && !seen[nc] {
                    seen[nc] = true;
                    stack.push(nc);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < g.nx {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < g.ny {
                visit(i, j + 1);
            }
        }
        let a = cells.len() as f64;
        out.push(Component {
            centroid: (sx / a, sy / a),
            cells,
            touches_x_end: end,
            spans_width: low && high,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyrmionInfo {
    /// Lab-frame center, m.
    pub x: f64,
    pub y: f64,
    /// Equivalent-circle diameter of the reversed core, m.
    pub diameter: f64,
    /// Charge of the plaquettes nearest to this skyrmion.
    pub q: f64,
}

/// Everything `locate_skyrmions` and `dwp_position` need, computed once.
#[derive(Debug, Clone)]
pub struct Census {
    pub q_total: f64,
    pub skyrmions: Vec<SkyrmionInfo>,
    pub dwp: Option<(f64, f64)>,
}

pub const MIN_SKYRMION_CELLS: usize = 4;

/// Components are classified exactly once: x-end domains are ignored,
/// width-spanning ones are domain-wall-pair candidates, the rest (with at
/// least `MIN_SKYRMION_CELLS` cells) are skyrmions.
pub fn census(m: &MagnetizationGrid, g: &GeometryMask, mz_threshold: f64) -> Census {
    let comps = reversed_components(m, g, mz_threshold);
    let bg = background_sign(m, g);
    let cell_area = g.dx * g.dy;
    let mut sky: Vec<&Component> = Vec::new();
    let mut dwp: Option<&Component> = None;
    for c in &comps {
        if c.touches_x_end {
            continue;
        }
        if c.spans_width {
            if dwp.map_or(true, |d| d.area_cells() < c.area_cells()) {
                dwp = Some(c);
            }
        } else if c.area_cells() >= MIN_SKYRMION_CELLS {
            sky.push(c);
        }
    }

    // Attribute every plaquette's charge to the nearest skyrmion within
    // reach; what is left over belongs to walls, edges or fragments.
    let mut q_sky = vec![0.0; sky.len()];
    let radii: Vec<f64> = sky
        .iter()
        .map(|c| (c.area_cells() as f64 * cell_area / PI).sqrt())
        .collect();
    let reach = 6.0 * g.dx;
    let mut q_total = 0.0;
    for j in 0..g.ny.saturating_sub(1) {
        for i in 0..g.nx.saturating_sub(1) {
            let q = plaquette_charge(m, g, i, j);
            if q == 0.0 {
                continue;
            }
            q_total += q;
            let (px, py) = ((i as f64 + 1.0) * g.dx, (j as f64 + 1.0) * g.dy);
            let mut best: Option<(usize, f64)> = None;
            for (k, c) in sky.iter().enumerate() {
                let d = ((px - c.centroid.0).powi(2) + (py - c.centroid.1).powi(2)).sqrt() - radii[k];
                if d <= reach && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            if let Some((k, _)) = best {
                q_sky[k] += q;
            }
        }
    }

    let skyrmions = sky
        .iter()
        .zip(&radii)
        .zip(&q_sky)
        .map(|((c, r), &q)| SkyrmionInfo {
            x: c.centroid.0 + m.frame_offset,
            y: c.centroid.1,
            diameter: 2.0 * r,
            q,
        })
        .collect();
    let dwp = dwp.map(|c| {
        let (l, r) = wall_positions(m, g, c, bg);
        (l + m.frame_offset, r + m.frame_offset)
    });
    Census {
        q_total,
        skyrmions,
        dwp,
    }
}

/// Row-averaged m_z zero crossings bounding a width-spanning component.
fn wall_positions(m: &MagnetizationGrid, g: &GeometryMask, c: &Component, bg: f64) -> (f64, f64) {
    let mut lo = vec![usize::MAX; g.ny];
    let mut hi = vec![0usize; g.ny];
    for &(i, j) in &c.cells {
        lo[j] = lo[j].min(i);
        hi[j] = hi[j].max(i);
    }
    let crossing = |j: usize, inside: usize, outside: isize| -> f64 {
        let (xi, _) = g.center(inside, j);
        if outside < 0 || outside as usize >= g.nx || !g.is_active(outside as usize, j) {
            let dir = if outside < inside as isize { -1.0 } else { 1.0 };
            return xi + dir * 0.5 * g.dx;
        }
        let o = outside as usize;
        let (xo, _) = g.center(o, j);
        let vi = bg * m.get(inside, j).z; // < 0
        let vo = bg * m.get(o, j).z; // >= 0
        let t = vo / (vo - vi);
        xo + (xi - xo) * t
    };
    let (mut sl, mut sr, mut n) = (0.0, 0.0, 0usize);
    for j in 0..g.ny {
        if lo[j] == usize::MAX {
            continue;
        }
        sl += crossing(j, lo[j], lo[j] as isize - 1);
        sr += crossing(j, hi[j], hi[j] as isize + 1);
        n += 1;
    }
    (sl / n as f64, sr / n as f64)
}

/// Skyrmion centers and diameters, lab frame.
pub fn locate_skyrmions(m: &MagnetizationGrid, g: &GeometryMask, mz_threshold: f64) -> Vec<SkyrmionInfo> {
    census(m, g, mz_threshold).skyrmions
}

/// (left wall x, right wall x) of the width-spanning reversed domain, if any.
pub fn dwp_position(m: &MagnetizationGrid, g: &GeometryMask) -> Option<(f64, f64)> {
    census(m, g, 0.0).dwp
}

/// Summary of one snapshot.
#[derive(Debug, Clone)]
pub struct Frame {
    pub time: f64,
    pub phase: Phase,
    pub e_total: f64,
    pub q: f64,
    pub skyrmions: Vec<SkyrmionInfo>,
    pub dwp: Option<(f64, f64)>,
}

impl Frame {
    pub fn capture(state: &MagnetizationGrid, g: &GeometryMask, ham: &Hamiltonian, phase: Phase) -> Self {
        let c = census(state, g, 0.0);
        Frame {
            time: state.time,
            phase,
            e_total: ham.energy(&state.m),
            q: c.q_total,
            skyrmions: c.skyrmions,
            dwp: c.dwp,
        }
    }

    pub fn dwp_mid(&self) -> Option<f64> {
        self.dwp.map(|(l, r)| 0.5 * (l + r))
    }

    /// Q not accounted for by the located skyrmions.
    pub fn residual_q(&self) -> f64 {
        self.q - self.skyrmions.iter().map(|s| s.q).sum::<f64>()
    }
}

/// Observer that records a [`Frame`] per observation.
pub struct FrameRecorder {
    mask: GeometryMask,
    pub frames: Vec<Frame>,
    /// When set, the run ends once a DWP present in the first frame has
    /// been missing for this long, s.
    pub stop_after_dwp_loss: Option<f64>,
    dwp_lost_at: Option<f64>,
}

impl FrameRecorder {
    pub fn new(mask: &GeometryMask) -> Self {
        FrameRecorder {
            mask: mask.clone(),
            frames: Vec::new(),
            stop_after_dwp_loss: None,
            dwp_lost_at: None,
        }
    }
}

impl Observer for FrameRecorder {
    fn observe(&mut self, state: &MagnetizationGrid, ham: &Hamiltonian, phase: Phase) -> Result<()> {
        let f = Frame::capture(state, &self.mask, ham, phase);
        let had_dwp = self.frames.first().map_or(f.dwp.is_some(), |f0| f0.dwp.is_some());
        if had_dwp && f.dwp.is_none() {
            self.dwp_lost_at.get_or_insert(f.time);
        } else {
            self.dwp_lost_at = None;
        }
        self.frames.push(f);
        Ok(())
    }

    fn finished(&self) -> bool {
        match (self.stop_after_dwp_loss, self.dwp_lost_at, self.frames.last()) {
            (Some(wait), Some(t0), Some(f)) => f.time - t0 >= wait,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub id: usize,
    /// (t, x, y) samples, s and m.
    pub samples: Vec<(f64, f64, f64)>,
    /// Time of the last frame in which the texture was matched, if it was lost.
    pub lost_at: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, f64, f64) {
        *self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn max_x(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nearest-neighbor frame-to-frame matching of skyrmions. Matches farther
/// than `max_step` (scaled by the frame spacing relative to `per_time`) end
/// the trajectory.
pub fn track_skyrmions(frames: &[Frame], max_step: f64, per_time: f64) -> Vec<Trajectory> {
    let mut done: Vec<Trajectory> = Vec::new();
    let mut live: Vec<Trajectory> = Vec::new();
    let mut next_id = 0;
    let mut prev_t: Option<f64> = None;
    for f in frames {
        let dt = prev_t.map_or(per_time, |p| (f.time - p).abs());
        // Relaxation frames carry the same time as the last dynamic frame.
        let reach = max_step * (dt / per_time).max(1.0);
        let mut claimed = vec![false; f.skyrmions.len()];
        let mut keep = Vec::with_capacity(live.len());
        // Greedy by distance, smallest first.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in live.iter().enumerate() {
            let (_, x, y) = t.last();
            for (si, s) in f.skyrmions.iter().enumerate() {
                let d = ((s.x - x).powi(2) + (s.y - y).powi(2)).sqrt();
                if d <= reach {
                    pairs.push((d, ti, si));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut matched = vec![None; live.len()];
        for (_, ti, si) in pairs {
            if matched[ti].is_none() && !claimed[si] {
                matched[ti] = Some(si);
                claimed[si] = true;
            }
        }
        for (ti, mut t) in live.drain(..).enumerate() {
            match matched[ti] {
                Some(si) => {
                    let s = f.skyrmions[si];
                    t.samples.push((f.time, s.x, s.y));
                    keep.push(t);
                }
                None => {
                    t.lost_at = Some(t.last().0);
                    done.push(t);
                }
            }
        }
        for (si, s) in f.skyrmions.iter().enumerate() {
            if !claimed[si] {
                keep.push(Trajectory {
                    id: next_id,
                    samples: vec![(f.time, s.x, s.y)],
                    lost_at: None,
                });
                next_id += 1;
            }
        }
        live = keep;
        prev_t = Some(f.time);
    }
    done.extend(live);
    done.sort_by_key(|t| t.id);
    done
}

/// Least-squares velocity over `window`; errors if the texture was not
/// tracked across the whole window.
pub fn drift_velocity(traj: &Trajectory, window: (f64, f64)) -> Result<(f64, f64)> {
    let (t0, t1) = window;
    let pts: Vec<_> = traj
        .samples
        .iter()
        .filter(|s| s.0 >= t0 - 1e-15 && s.0 <= t1 + 1e-15)
        .collect();
    let first = traj.samples.first().map(|s| s.0).unwrap_or(f64::INFINITY);
    let last = traj.samples.last().map(|s| s.0).unwrap_or(f64::NEG_INFINITY);
    if pts.len() < 2 || first > t0 + 1e-15 || last < t1 - 1e-15 {
        return Err(Error::TextureLost(format!(
            "trajectory {} covers [{first:.3e}, {last:.3e}] s, window is [{t0:.3e}, {t1:.3e}] s",
            traj.id
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|s| s.0).sum::<f64>() / n;
    let mx = pts.iter().map(|s| s.1).sum::<f64>() / n;
    let my = pts.iter().map(|s| s.2).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|s| (s.0 - mt).powi(2)).sum();
    let sxt: f64 = pts.iter().map(|s| (s.0 - mt) * (s.1 - mx)).sum();
    let syt: f64 = pts.iter().map(|s| (s.0 - mt) * (s.2 - my)).sum();
    Ok((sxt / stt, syt / stt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pinned,
    Depinned,
    Anomalous,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Pinned => "pinned",
            Outcome::Depinned => "depinned",
            Outcome::Anomalous => "anomalous",
        })
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pinned" => Ok(Outcome::Pinned),
            "depinned" => Ok(Outcome::Depinned),
            "anomalous" => Ok(Outcome::Anomalous),
            o => Err(format!("unknown outcome `{o}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwpFate {
    Intact,
    ConvertedToMeron,
    Annihilated,
}

impl std::fmt::Display for DwpFate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DwpFate::Intact => "intact",
            DwpFate::ConvertedToMeron => "converted_to_meron",
            DwpFate::Annihilated => "annihilated",
        })
    }
}

impl std::str::FromStr for DwpFate {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "intact" => Ok(DwpFate::Intact),
            "converted_to_meron" => Ok(DwpFate::ConvertedToMeron),
            "annihilated" => Ok(DwpFate::Annihilated),
            o => Err(format!("unknown DWP fate `{o}`")),
        }
    }
}

/// Frames of one pulse run plus the context needed to classify it.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub j_hm: f64,
    pub n_skyrmions: usize,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub j_hm: f64,
    pub n_skyrmions: usize,
    pub outcome: Outcome,
    pub final_q: f64,
    pub skyrmions_passed: usize,
    pub skyrmions_lost: usize,
    pub skyrmions_remaining: usize,
    pub dwp_fate: DwpFate,
    pub trajectories: Vec<Trajectory>,
    /// Human-readable reason for an anomalous classification.
    pub note: String,
}

/// Half-width of the window around the notch center in which a DWP counts as pinned.
pub const PIN_WINDOW: f64 = 30e-9;
/// Largest center displacement accepted between frames 50 ps apart.
pub const MAX_MATCH_STEP: f64 = 30e-9;
pub const MATCH_INTERVAL: f64 = 50e-12;
/// Unaccounted charge above which a vanished DWP is labelled a meron.
const MERON_RESIDUAL_Q: f64 = 0.3;

pub fn classify_outcome(record: &TrajectoryRecord, g: &GeometryMask) -> Result<OutcomeRecord> {
    let notch = g.notch.ok_or_else(|| Error::InvalidParameter {
        field: "notch_center_x",
        reason: "classification needs a notched track".into(),
    })?;
    let first = record
        .frames
        .first()
        .ok_or_else(|| Error::Anomalous("empty trajectory record".into()))?;
    let last = record.frames.last().expect("non-empty");
    let trajectories = track_skyrmions(&record.frames, MAX_MATCH_STEP, MATCH_INTERVAL);

    let nc = notch.center_x;
    let initial_ids: Vec<usize> = trajectories
        .iter()
        .filter(|t| t.samples[0].0 <= first.time)
        .map(|t| t.id)
        .collect();
    let initial = initial_ids.len();
    let mut passed = 0;
    let mut remaining = 0;
    for t in trajectories.iter().filter(|t| initial_ids.contains(&t.id)) {
        if t.max_x() > nc {
            passed += 1;
        } else if t.lost_at.is_none() {
            remaining += 1;
        }
    }
    let lost = initial - passed - remaining;

    let mut note = String::new();
    let (outcome, fate) = match last.dwp_mid() {
        Some(mid) if (mid - nc).abs() <= PIN_WINDOW => (Outcome::Pinned, DwpFate::Intact),
        Some(mid) => {
            let start = first.dwp_mid();
            if start.map_or(false, |s| (mid - s).abs() <= PIN_WINDOW) {
                (Outcome::Pinned, DwpFate::Intact)
            } else if start.map_or(false, |s| (s - nc).signum() != (mid - nc).signum()) {
                // Crossed the notch and left the pinning window downstream.
                note = format!("DWP passed the notch and survives at x = {:.1} nm", mid * 1e9);
                (Outcome::Depinned, DwpFate::Intact)
            } else {
                note = format!(
                    "DWP intact at x = {:.1} nm, {:.1} nm from the notch center",
                    mid * 1e9,
                    (mid - nc) * 1e9
                );
                (Outcome::Anomalous, DwpFate::Intact)
            }
        }
        None => {
            let gone = record
                .frames
                .iter()
                .rposition(|f| f.dwp.is_some())
                .map(|k| k + 1)
                .unwrap_or(0);
            let meron = record.frames[gone..]
                .iter()
                .any(|f| f.residual_q().abs() > MERON_RESIDUAL_Q);
            let fate = if meron {
                DwpFate::ConvertedToMeron
            } else {
                DwpFate::Annihilated
            };
            (Outcome::Depinned, fate)
        }
    };
    Ok(OutcomeRecord {
        j_hm: record.j_hm,
        n_skyrmions: record.n_skyrmions,
        outcome,
        final_q: last.q,
        skyrmions_passed: passed,
        skyrmions_lost: lost,
        skyrmions_remaining: remaining,
        dwp_fate: fate,
        trajectories,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_default_track, Mesh};
    use crate::Vec3;

    fn hedgehog(g: &GeometryMask, cx: f64, cy: f64, r: f64, core: f64) -> MagnetizationGrid {
        // Analytic Néel profile written directly, independent of textures.rs.
        let mut m = MagnetizationGrid::uniform(g, Vec3::Z * -core);
        let w = 4e-9;
        for j in 0..g.ny {
            for i in 0..g.nx {
                if !g.is_active(i, j) {
                    continue;
                }
                let (x, y) = g.center(i, j);
                let (dx, dy) = (x - cx, y - cy);
                let rr = (dx * dx + dy * dy).sqrt();
                if rr > r + 8.0 * w {
                    continue;
                }
                let th = 2.0 * ((r / w).sinh() / (rr / w).sinh().max(1e-300)).atan();
                let (ux, uy) = if rr > 0.0 { (dx / rr, dy / rr) } else { (0.0, 0.0) };
                m.set(i, j, Vec3::new(th.sin() * ux, th.sin() * uy, -core * th.cos()));
            }
        }
        m
    }

    #[test]
    fn uniform_state_has_exactly_zero_charge() {
        let (_, g) = build_default_track();
        for d in [Vec3::Z, -Vec3::Z, Vec3::new(0.3, 0.1, 0.9)] {
            assert_eq!(topological_charge(&MagnetizationGrid::uniform(&g, d), &g), 0.0);
        }
    }

    #[test]
    fn hedgehog_charge_sign_follows_core() {
        let g = GeometryMask::racetrack(Mesh { nx: 60, ny: 60, ..Mesh::default() }, None).unwrap();
        let down = hedgehog(&g, 60e-9, 60e-9, 12e-9, -1.0);
        let up = hedgehog(&g, 60e-9, 60e-9, 12e-9, 1.0);
        let qd = topological_charge(&down, &g);
        let qu = topological_charge(&up, &g);
        assert!((qd + 1.0).abs() < 0.02, "{qd}");
        assert!((qu - 1.0).abs() < 0.02, "{qu}");
    }

    #[test]
    fn charge_is_translation_invariant() {
        let g = GeometryMask::racetrack(Mesh { nx: 80, ny: 60, ..Mesh::default() }, None).unwrap();
        let a = topological_charge(&hedgehog(&g, 60e-9, 60e-9, 10e-9, -1.0), &g);
        let b = topological_charge(&hedgehog(&g, 97e-9, 55e-9, 10e-9, -1.0), &g);
        assert!((a - b).abs() < 0.01);
    }

    #[test]
    fn census_finds_skyrmions_and_excludes_width_spanning_domain() {
        let (_, g) = build_default_track();
        let mut m = hedgehog(&g, 60e-9, 40e-9, 10e-9, -1.0);
        let other = hedgehog(&g, 130e-9, 40e-9, 10e-9, -1.0);
        for j in 0..g.ny {
            for i in 50..80 {
                m.set(i, j, other.get(i, j));
            }
            for i in 100..125 {
                m.set(i, j, -Vec3::Z);
            }
        }
        let c = census(&m, &g, 0.0);
        assert_eq!(c.skyrmions.len(), 2);
        assert!((c.skyrmions[0].x - 60e-9).abs() < 1e-9 || (c.skyrmions[1].x - 60e-9).abs() < 1e-9);
        let (l, r) = c.dwp.expect("spanning domain");
        assert!((l - 200e-9).abs() < 2e-9 && (r - 250e-9).abs() < 2e-9, "{l} {r}");
        for s in &c.skyrmions {
            assert!((s.q + 1.0).abs() < 0.05, "{}", s.q);
            assert!((s.diameter - 20e-9).abs() < 4e-9);
        }
    }

    #[test]
    fn uniform_state_has_no_textures() {
        let (_, g) = build_default_track();
        let m = MagnetizationGrid::uniform(&g, Vec3::Z);
        assert!(locate_skyrmions(&m, &g, 0.0).is_empty());
        assert!(dwp_position(&m, &g).is_none());
    }

    #[test]
    fn drift_velocity_of_linear_motion() {
        let t = Trajectory {
            id: 0,
            samples: (0..=20).map(|k| {
                let t = k as f64 * 50e-12;
                (t, 10e-9 + 80.0 * t, 40e-9 - 5.0 * t)
            }).collect(),
            lost_at: None,
        };
        let (vx, vy) = drift_velocity(&t, (0.2e-9, 0.8e-9)).unwrap();
        assert!((vx - 80.0).abs() < 1e-6 && (vy + 5.0).abs() < 1e-6);
        let still = Trajectory {
            samples: t.samples.iter().map(|s| (s.0, 1e-8, 2e-8)).collect(),
            ..t.clone()
        };
        let (sx, sy) = drift_velocity(&still, (0.0, 1e-9)).unwrap();
        assert!(sx.abs() < 1e-20 && sy.abs() < 1e-20);
        assert!(drift_velocity(&t, (0.5e-9, 2e-9)).is_err());
    }

    fn frame(t: f64, sk: &[(f64, f64)], dwp: Option<(f64, f64)>, q: f64) -> Frame {
        Frame {
            time: t,
            phase: Phase::Pulse,
            e_total: 0.0,
            q,
            skyrmions: sk.iter().map(|&(x, y)| SkyrmionInfo { x, y, diameter: 2e-8, q: -1.0 }).collect(),
            dwp,
        }
    }

    #[test]
    fn tracker_ends_trajectories_on_large_jumps() {
        let frames = vec![
            frame(0.0, &[(10e-9, 40e-9), (70e-9, 40e-9)], None, -2.0),
            frame(50e-12, &[(14e-9, 40e-9), (74e-9, 40e-9)], None, -2.0),
            frame(100e-12, &[(18e-9, 40e-9)], None, -1.0),
        ];
        let t = track_skyrmions(&frames, 30e-9, 50e-12);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].samples.len(), 3);
        assert_eq!(t[1].lost_at, Some(50e-12));
    }

    #[test]
    fn classification_rules() {
        let (_, g) = build_default_track();
        let nc = g.notch.unwrap().center_x;
        let pinned = TrajectoryRecord {
            j_hm: 5e10,
            n_skyrmions: 1,
            frames: vec![
                frame(0.0, &[(150e-9, 40e-9)], Some((200e-9, 240e-9)), -1.0),
                frame(50e-12, &[(160e-9, 40e-9)], Some((nc - 30e-9, nc)), -1.0),
            ],
        };
        let r = classify_outcome(&pinned, &g).unwrap();
        assert_eq!(r.outcome, Outcome::Pinned);
        assert_eq!(r.dwp_fate, DwpFate::Intact);
        assert_eq!(r.skyrmions_remaining, 1);

        let mut gone = pinned.clone();
        let mut x = 160e-9;
        let mut t = 50e-12;
        while x < nc + 20e-9 {
            x += 25e-9;
            t += 50e-12;
            gone.frames.push(frame(t, &[(x, 38e-9)], None, -1.5));
        }
        gone.frames.push(frame(t + 50e-12, &[(x, 38e-9)], None, -1.0));
        let r = classify_outcome(&gone, &g).unwrap();
        assert_eq!(r.outcome, Outcome::Depinned);
        assert_eq!(r.dwp_fate, DwpFate::ConvertedToMeron);
        assert_eq!(r.skyrmions_passed, 1);
        assert_eq!(r.skyrmions_passed + r.skyrmions_lost + r.skyrmions_remaining, 1);

        let mut past = pinned.clone();
        past.frames.push(frame(100e-12, &[(170e-9, 40e-9)], Some((400e-9, 440e-9)), -1.0));
        let r = classify_outcome(&past, &g).unwrap();
        assert_eq!(r.outcome, Outcome::Depinned);
        assert_eq!(r.dwp_fate, DwpFate::Intact);

        let mut far = pinned.clone();
        far.frames.push(frame(100e-12, &[], Some((120e-9, 160e-9)), 0.0));
        let r = classify_outcome(&far, &g).unwrap();
        assert_eq!(r.outcome, Outcome::Anomalous);
        assert!(!r.note.is_empty());
        assert_eq!(r.skyrmions_lost, 1);
    }
}
