//! Effective field and energy of the film.
//!
//! Every contribution is a [`FieldTerm`]: a discrete energy on the mesh
//! together with its exact gradient, `H = -1/(mu0 Ms V) dE/dm`. Terms are
//! looked up by name in [`FIELD_TERMS`] so a run can select which physics is
//! switched on.
//!
//! Exchange and DMI are written as sums over nearest-neighbor bonds. A bond
//! to an inactive or out-of-mesh cell simply does not exist, which makes the
//! free-surface boundary condition (including the DMI edge tilt
//! `dm/dn = D/(2A) (z x n) x m`) the natural boundary condition of the
//! discrete energy rather than a ghost-cell rule added on top.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{GeometryMask, MagnetizationGrid, MaterialParams, Stencil, MU0};
use crate::vec3::Vec3;

const XM: usize = 0;
const XP: usize = 1;
const YM: usize = 2;
const YP: usize = 3;

pub trait FieldTerm: Send + Sync {
    fn name(&self) -> &'static str;
    /// Adds this term's field (A/m) to `h` on every active cell.
    fn add_field(&self, m: &[Vec3], h: &mut [Vec3]);
    /// Energy of this term, J.
    fn energy(&self, m: &[Vec3]) -> f64;
}

/// Everything a term constructor may need.
pub struct TermContext<'a> {
    pub params: &'a MaterialParams,
    pub mask: &'a GeometryMask,
    pub stencil: Arc<Stencil>,
    pub applied: Vec3,
}

pub type TermBuilder = fn(&TermContext) -> Box<dyn FieldTerm>;

/// Registered field terms, by name.
pub const FIELD_TERMS: &[(&str, TermBuilder)] = &[
    ("exchange", |c| Box::new(Exchange::new(c))),
    ("dmi", |c| Box::new(InterfacialDmi::new(c))),
    ("anisotropy", |c| Box::new(UniaxialAnisotropy::new(c))),
    ("zeeman", |c| Box::new(Zeeman::new(c))),
];

pub const DEFAULT_TERMS: [&str; 4] = ["exchange", "dmi", "anisotropy", "zeeman"];

pub fn build_term(name: &str, ctx: &TermContext) -> Result<Box<dyn FieldTerm>> {
    FIELD_TERMS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, build)| build(ctx))
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "field term",
            name: name.to_string(),
            known: FIELD_TERMS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

pub struct Exchange {
    stencil: Arc<Stencil>,
    /// 2A/(mu0 Ms dx^2), 2A/(mu0 Ms dy^2)
    cx: f64,
    cy: f64,
    /// A V/dx^2, A V/dy^2
    ex: f64,
    ey: f64,
}

impl Exchange {
    pub fn new(c: &TermContext) -> Self {
        let p = c.params;
        let g = c.mask;
        let pre = 2.0 * p.a_ex / (MU0 * p.m_s);
        let v = g.cell_volume();
        Exchange {
            stencil: c.stencil.clone(),
            cx: pre / (g.dx * g.dx),
            cy: pre / (g.dy * g.dy),
            ex: p.a_ex * v / (g.dx * g.dx),
            ey: p.a_ex * v / (g.dy * g.dy),
        }
    }
}

impl FieldTerm for Exchange {
    fn name(&self) -> &'static str {
        "exchange"
    }

    fn add_field(&self, m: &[Vec3], h: &mut [Vec3]) {
        let s = &*self.stencil;
        for &c in &s.active_cells {
            let c = c as usize;
            let nb = s.neighbor[c];
            let w = s.weight[c];
            let mc = m[c];
            let lx = (m[nb[XM] as usize] - mc) * w[XM] + (m[nb[XP] as usize] - mc) * w[XP];
            let ly = (m[nb[YM] as usize] - mc) * w[YM] + (m[nb[YP] as usize] - mc) * w[YP];
            h[c] += lx * self.cx + ly * self.cy;
        }
    }

    fn energy(&self, m: &[Vec3]) -> f64 {
        let s = &*self.stencil;
        let mut e = 0.0;
        for &c in &s.active_cells {
            let c = c as usize;
            let nb = s.neighbor[c];
            let w = s.weight[c];
            let mc = m[c];
            e += self.ex * w[XP] * (m[nb[XP] as usize] - mc).norm2();
            e += self.ey * w[YP] * (m[nb[YP] as usize] - mc).norm2();
        }
        e
    }
}

/// Interfacial DMI, energy density D [m_z div m - (m . grad) m_z].
///
/// Bond form: `D V/dx * y.(m_i x m_{i+x}) - D V/dy * x.(m_i x m_{i+y})`.
pub struct InterfacialDmi {
    stencil: Arc<Stencil>,
    /// D/(mu0 Ms dx), D/(mu0 Ms dy)
    hx: f64,
    hy: f64,
    /// D V/dx, D V/dy
    ex: f64,
    ey: f64,
}

impl InterfacialDmi {
    pub fn new(c: &TermContext) -> Self {
        let p = c.params;
        let g = c.mask;
        let v = g.cell_volume();
        InterfacialDmi {
            stencil: c.stencil.clone(),
            hx: p.dmi_d / (MU0 * p.m_s * g.dx),
            hy: p.dmi_d / (MU0 * p.m_s * g.dy),
            ex: p.dmi_d * v / g.dx,
            ey: p.dmi_d * v / g.dy,
        }
    }
}

impl FieldTerm for InterfacialDmi {
    fn name(&self) -> &'static str {
        "dmi"
    }

    fn add_field(&self, m: &[Vec3], h: &mut [Vec3]) {
        if self.hx == 0.0 && self.hy == 0.0 {
            return;
        }
        let s = &*self.stencil;
        for &c in &s.active_cells {
            let c = c as usize;
            let nb = s.neighbor[c];
            let w = s.weight[c];
            let a = m[nb[XP] as usize] * w[XP] - m[nb[XM] as usize] * w[XM];
            let b = m[nb[YP] as usize] * w[YP] - m[nb[YM] as usize] * w[YM];
            h[c] += Vec3::new(self.hx * a.z, self.hy * b.z, -self.hx * a.x - self.hy * b.y);
        }
    }

    fn energy(&self, m: &[Vec3]) -> f64 {
        let s = &*self.stencil;
        let mut e = 0.0;
        for &c in &s.active_cells {
            let c = c as usize;
            let nb = s.neighbor[c];
            let w = s.weight[c];
            let mc = m[c];
            e += self.ex * w[XP] * mc.cross(m[nb[XP] as usize]).y;
            e -= self.ey * w[YP] * mc.cross(m[nb[YP] as usize]).x;
        }
        e
    }
}

/// Perpendicular anisotropy with the thin-film shape term folded into K_eff.
/// Energy density is K_eff (1 - m_z^2) so the uniform ground state has zero energy.
pub struct UniaxialAnisotropy {
    stencil: Arc<Stencil>,
    hk: f64,
    ek: f64,
}

impl UniaxialAnisotropy {
    pub fn new(c: &TermContext) -> Self {
        let p = c.params;
        let k = p.k_eff();
        UniaxialAnisotropy {
            stencil: c.stencil.clone(),
            hk: 2.0 * k / (MU0 * p.m_s),
            ek: k * c.mask.cell_volume(),
        }
    }
}

impl FieldTerm for UniaxialAnisotropy {
    fn name(&self) -> &'static str {
        "anisotropy"
    }

    fn add_field(&self, m: &[Vec3], h: &mut [Vec3]) {
        for &c in &self.stencil.active_cells {
            let c = c as usize;
            h[c].z += self.hk * m[c].z;
        }
    }

    fn energy(&self, m: &[Vec3]) -> f64 {
        self.stencil
            .active_cells
            .iter()
            .map(|&c| {
                let mz = m[c as usize].z;
                self.ek * (1.0 - mz * mz)
            })
            .sum()
    }
}

/// Uniform applied field.
pub struct Zeeman {
    stencil: Arc<Stencil>,
    field: Vec3,
    e_pre: f64,
}

impl Zeeman {
    pub fn new(c: &TermContext) -> Self {
        Zeeman {
            stencil: c.stencil.clone(),
            field: c.applied,
            e_pre: MU0 * c.params.m_s * c.mask.cell_volume(),
        }
    }
}

impl FieldTerm for Zeeman {
    fn name(&self) -> &'static str {
        "zeeman"
    }

    fn add_field(&self, _m: &[Vec3], h: &mut [Vec3]) {
        if self.field == Vec3::ZERO {
            return;
        }
        for &c in &self.stencil.active_cells {
            h[c as usize] += self.field;
        }
    }

    fn energy(&self, m: &[Vec3]) -> f64 {
        if self.field == Vec3::ZERO {
            return 0.0;
        }
        -self.e_pre
            * self
                .stencil
                .active_cells
                .iter()
                .map(|&c| m[c as usize].dot(self.field))
                .sum::<f64>()
    }
}

/// Single-pass evaluation of the standard term set. Used by
/// [`Hamiltonian::field_into`] when exactly the default terms are selected;
/// must agree with the per-term sum to rounding.
struct FusedKernel {
    cx: f64,
    cy: f64,
    dx: f64,
    dy: f64,
    hk: f64,
    applied: Vec3,
}

impl FusedKernel {
    fn new(p: &MaterialParams, g: &GeometryMask, applied: Vec3) -> Self {
        let pre = 2.0 * p.a_ex / (MU0 * p.m_s);
        FusedKernel {
            cx: pre / (g.dx * g.dx),
            cy: pre / (g.dy * g.dy),
            dx: p.dmi_d / (MU0 * p.m_s * g.dx),
            dy: p.dmi_d / (MU0 * p.m_s * g.dy),
            hk: 2.0 * p.k_eff() / (MU0 * p.m_s),
            applied,
        }
    }

    fn field_into(&self, s: &Stencil, m: &[Vec3], h: &mut [Vec3]) {
        for &c in &s.active_cells {
            let c = c as usize;
            let nb = s.neighbor[c];
            let w = s.weight[c];
            let mc = m[c];
            let xm = m[nb[XM] as usize] * w[XM];
            let xp = m[nb[XP] as usize] * w[XP];
            let ym = m[nb[YM] as usize] * w[YM];
            let yp = m[nb[YP] as usize] * w[YP];
            let lx = xm + xp - mc * (w[XM] + w[XP]);
            let ly = ym + yp - mc * (w[YM] + w[YP]);
            let a = xp - xm;
            let b = yp - ym;
            let mut f = lx * self.cx + ly * self.cy + self.applied;
            f.x += self.dx * a.z;
            f.y += self.dy * b.z;
            f.z += self.hk * mc.z - self.dx * a.x - self.dy * b.y;
            h[c] = f;
        }
    }
}

/// A set of field terms over one mesh.
pub struct Hamiltonian {
    terms: Vec<Box<dyn FieldTerm>>,
    stencil: Arc<Stencil>,
    fused: Option<FusedKernel>,
}

impl Hamiltonian {
    pub fn new(
        params: &MaterialParams,
        mask: &GeometryMask,
        applied: Vec3,
        names: &[&str],
    ) -> Result<Self> {
        let stencil = Arc::new(Stencil::new(mask));
        let ctx = TermContext {
            params,
            mask,
            stencil: stencil.clone(),
            applied,
        };
        let terms = names
            .iter()
            .map(|n| build_term(n, &ctx))
            .collect::<Result<Vec<_>>>()?;
        let standard = names.len() == DEFAULT_TERMS.len() && DEFAULT_TERMS.iter().all(|d| names.contains(d));
        let fused = standard.then(|| FusedKernel::new(params, mask, applied));
        Ok(Hamiltonian {
            terms,
            stencil,
            fused,
        })
    }

    pub fn standard(params: &MaterialParams, mask: &GeometryMask, applied: Vec3) -> Self {
        Self::new(params, mask, applied, &DEFAULT_TERMS).expect("default terms are registered")
    }

    pub fn terms(&self) -> impl Iterator<Item = &dyn FieldTerm> {
        self.terms.iter().map(|t| t.as_ref())
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Overwrites `h` with the total effective field.
    pub fn field_into(&self, m: &[Vec3], h: &mut [Vec3]) {
        if let Some(k) = &self.fused {
            k.field_into(&self.stencil, m, h);
            return;
        }
        h.iter_mut().for_each(|v| *v = Vec3::ZERO);
        for t in &self.terms {
            t.add_field(m, h);
        }
    }

    pub fn energy(&self, m: &[Vec3]) -> f64 {
        self.terms.iter().map(|t| t.energy(m)).sum()
    }

    pub fn effective_field(&self, m: &MagnetizationGrid) -> EffectiveField {
        let n = m.m.len();
        let mut h = vec![Vec3::ZERO; n];
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut part = vec![Vec3::ZERO; n];
            t.add_field(&m.m, &mut part);
            for (acc, p) in h.iter_mut().zip(&part) {
                *acc += *p;
            }
            terms.push((t.name(), part));
        }
        EffectiveField { h, terms }
    }

    pub fn energy_report(&self, m: &MagnetizationGrid) -> EnergyReport {
        let mut r = EnergyReport::default();
        for t in &self.terms {
            let e = t.energy(&m.m);
            match t.name() {
                "exchange" => r.e_exchange += e,
                "dmi" => r.e_dmi += e,
                "anisotropy" => r.e_anisotropy += e,
                "zeeman" => r.e_zeeman += e,
                _ => {}
            }
            r.e_total += e;
        }
        r
    }

    /// Largest |m x H| over active cells, A/m.
    pub fn max_torque(&self, m: &[Vec3], h_scratch: &mut [Vec3]) -> f64 {
        self.field_into(m, h_scratch);
        self.stencil
            .active_cells
            .iter()
            .map(|&c| m[c as usize].cross(h_scratch[c as usize]).norm())
            .fold(0.0, f64::max)
    }
}

/// Total field with the per-term breakdown kept for diagnostics.
#[derive(Debug, Clone)]
pub struct EffectiveField {
    pub h: Vec<Vec3>,
    pub terms: Vec<(&'static str, Vec<Vec3>)>,
}

impl EffectiveField {
    pub fn term(&self, name: &str) -> Option<&[Vec3]> {
        self.terms
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyReport {
    pub e_exchange: f64,
    pub e_dmi: f64,
    pub e_anisotropy: f64,
    pub e_zeeman: f64,
    pub e_total: f64,
}

fn single_term(name: &str, m: &MagnetizationGrid, p: &MaterialParams, g: &GeometryMask) -> Vec<Vec3> {
    let ham = Hamiltonian::new(p, g, Vec3::ZERO, &[name]).expect("registered term");
    let mut h = vec![Vec3::ZERO; m.m.len()];
    ham.field_into(&m.m, &mut h);
    h
}

pub fn exchange_field(m: &MagnetizationGrid, p: &MaterialParams, g: &GeometryMask) -> Vec<Vec3> {
    single_term("exchange", m, p, g)
}

pub fn dmi_field(m: &MagnetizationGrid, p: &MaterialParams, g: &GeometryMask) -> Vec<Vec3> {
    single_term("dmi", m, p, g)
}

pub fn anisotropy_field(m: &MagnetizationGrid, p: &MaterialParams, g: &GeometryMask) -> Vec<Vec3> {
    single_term("anisotropy", m, p, g)
}

pub fn total_field(
    m: &MagnetizationGrid,
    p: &MaterialParams,
    g: &GeometryMask,
    applied: Vec3,
) -> EffectiveField {
    Hamiltonian::standard(p, g, applied).effective_field(m)
}

pub fn total_energy(
    m: &MagnetizationGrid,
    p: &MaterialParams,
    g: &GeometryMask,
    applied: Vec3,
) -> EnergyReport {
    Hamiltonian::standard(p, g, applied).energy_report(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_default_track, Mesh};

    fn small_strip(nx: usize, ny: usize) -> GeometryMask {
        GeometryMask::racetrack(
            Mesh {
                nx,
                ny,
                ..Mesh::default()
            },
            None,
        )
        .unwrap()
    }

    #[test]
    fn fused_kernel_matches_term_sum() {
        let (p, g) = build_default_track();
        let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
        for (k, v) in m.m.iter_mut().enumerate() {
            let t = k as f64;
            *v = Vec3::new((1.3 * t).sin(), (0.7 * t).cos(), (0.1 * t).sin() + 0.2).normalized();
        }
        m.normalize(&g);
        let applied = Vec3::new(1e3, -2e3, 5e4);
        let fused = Hamiltonian::standard(&p, &g, applied);
        let split = Hamiltonian::new(&p, &g, applied, &["zeeman", "dmi", "exchange"]).unwrap();
        let aniso = Hamiltonian::new(&p, &g, applied, &["anisotropy"]).unwrap();
        let n = m.m.len();
        let (mut h1, mut h2, mut h3) = (vec![Vec3::ZERO; n], vec![Vec3::ZERO; n], vec![Vec3::ZERO; n]);
        fused.field_into(&m.m, &mut h1);
        split.field_into(&m.m, &mut h2);
        aniso.field_into(&m.m, &mut h3);
        for c in 0..n {
            let d = h1[c] - h2[c] - h3[c];
            assert!(d.norm() <= 1e-9 * h1[c].norm().max(1.0), "cell {c}: {d:?}");
        }
    }

    #[test]
    fn uniform_state_has_no_exchange_or_dmi_field() {
        let (p, g) = build_default_track();
        for dir in [Vec3::Z, Vec3::X, Vec3::new(1.0, 2.0, -3.0)] {
            let m = MagnetizationGrid::uniform(&g, dir);
            assert!(exchange_field(&m, &p, &g).iter().all(|h| h.norm() < 1e-6));
            // Interior cells only: DMI tilts uniform states at free edges.
            let hd = dmi_field(&m, &p, &g);
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    if cell_neighbors_all_active(&g, i, j) {
                        assert!(hd[g.index(i, j)].norm() < 1e-6);
                    }
                }
            }
        }
    }

    fn cell_neighbors_all_active(g: &GeometryMask, i: usize, j: usize) -> bool {
        crate::model::cell_neighbors(g, i, j)
            .map(|n| n.active_count() == 4)
            .unwrap_or(false)
    }

    #[test]
    fn flipped_cell_exchange_field() {
        let g = small_strip(7, 7);
        let p = MaterialParams::default();
        let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
        m.set(3, 3, -Vec3::Z);
        let h = exchange_field(&m, &p, &g);
        let expected = 2.0 * p.a_ex / (MU0 * p.m_s) * 4.0 * 2.0 / (g.dx * g.dx);
        let got = h[g.index(3, 3)];
        assert!((got.z - expected).abs() / expected < 1e-12);
        assert_eq!((got.x, got.y), (0.0, 0.0));
    }

    #[test]
    fn linear_mz_gives_uniform_dmi_field() {
        let g = small_strip(12, 6);
        let p = MaterialParams::default();
        let slope = 1e7; // per metre
        let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, _) = g.center(i, j);
                m.set(i, j, Vec3::new(0.0, 0.0, slope * x));
            }
        }
        let h = dmi_field(&m, &p, &g);
        let pre = 2.0 * p.dmi_d / (MU0 * p.m_s);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                let v = h[g.index(i, j)];
                assert!((v.x - pre * slope).abs() < 1e-9 * pre * slope);
                assert!(v.y.abs() < 1e-6 && v.z.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn anisotropy_field_values() {
        let (p, g) = build_default_track();
        let up = anisotropy_field(&MagnetizationGrid::uniform(&g, Vec3::Z), &p, &g);
        let hk = 2.0 * p.k_eff() / (MU0 * p.m_s);
        assert!((up[0].z - hk).abs() < 1e-6);
        assert!((hk - 2.0 * 5.886e5 / (MU0 * 5.8e5)).abs() / hk < 1e-3);
        let inplane = anisotropy_field(&MagnetizationGrid::uniform(&g, Vec3::X), &p, &g);
        assert!(inplane.iter().all(|h| h.norm() == 0.0));
        let down = anisotropy_field(&MagnetizationGrid::uniform(&g, -Vec3::Z), &p, &g);
        assert!((down[0].z + hk).abs() < 1e-6);
    }

    #[test]
    fn uniform_up_total_field_is_anisotropy_only() {
        let (p, g) = build_default_track();
        let m = MagnetizationGrid::uniform(&g, Vec3::Z);
        let f = total_field(&m, &p, &g, Vec3::ZERO);
        let hk = 2.0 * p.k_eff() / (MU0 * p.m_s);
        for (c, &a) in g.active.iter().enumerate() {
            if a {
                // DMI edge fields are in-plane; only z is pinned down here.
                assert!((f.h[c].z - hk).abs() < 1e-6);
            }
        }
        let e = total_energy(&m, &p, &g, Vec3::ZERO);
        assert_eq!(e.e_total, 0.0);
    }

    #[test]
    fn breakdown_sums_to_total() {
        let (p, g) = build_default_track();
        let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
        for (k, v) in m.m.iter_mut().enumerate() {
            if *v != Vec3::ZERO {
                let t = k as f64 * 0.37;
                *v = Vec3::new(t.sin(), (1.3 * t).cos(), 0.5).normalized();
            }
        }
        let f = total_field(&m, &p, &g, Vec3::new(1e4, 0.0, 2e4));
        for c in 0..f.h.len() {
            let s = f.terms.iter().fold(Vec3::ZERO, |acc, (_, t)| acc + t[c]);
            assert!((s - f.h[c]).norm() <= 1e-12 * f.h[c].norm().max(1.0));
        }
        let e = total_energy(&m, &p, &g, Vec3::new(1e4, 0.0, 2e4));
        let sum = e.e_exchange + e.e_dmi + e.e_anisotropy + e.e_zeeman;
        assert!((sum - e.e_total).abs() <= 1e-12 * e.e_total.abs());
    }

    #[test]
    fn in_plane_uniform_energy_is_keff_volume() {
        let (p, g) = build_default_track();
        let m = MagnetizationGrid::uniform(&g, Vec3::X);
        let e = total_energy(&m, &p, &g, Vec3::ZERO);
        let expected = p.k_eff() * g.active_volume();
        assert!((e.e_total - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn zero_dmi_constant_gives_zero_dmi_term() {
        let (mut p, g) = build_default_track();
        p.dmi_d = 0.0;
        let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
        m.set(20, 20, Vec3::X);
        assert!(dmi_field(&m, &p, &g).iter().all(|h| *h == Vec3::ZERO));
        assert_eq!(total_energy(&m, &p, &g, Vec3::ZERO).e_dmi, 0.0);
    }

    #[test]
    fn unknown_term_is_reported() {
        let (p, g) = build_default_track();
        let err = Hamiltonian::new(&p, &g, Vec3::ZERO, &["demag"]).err().unwrap();
        assert!(err.to_string().contains("exchange"));
    }

    #[test]
    fn wall_profile_is_near_equilibrium_without_dmi() {
        // m_z = -tanh(x/w), m_x = sech(x/w) solves exchange + anisotropy in
        // the continuum; on the mesh the residual torque is O(dx^2).
        let residual = |dx: f64| {
            let nx = (200e-9 / dx) as usize;
            let g = GeometryMask::racetrack(
                Mesh {
                    nx,
                    ny: 2,
                    dx,
                    dy: 2e-9,
                    dz: 0.4e-9,
                },
                None,
            )
            .unwrap();
            let p = MaterialParams::default();
            let w = p.wall_width();
            let mut m = MagnetizationGrid::uniform(&g, Vec3::Z);
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let x = g.center(i, j).0 - 100e-9;
                    m.set(i, j, Vec3::new(1.0 / (x / w).cosh(), 0.0, -(x / w).tanh()));
                }
            }
            let ham = Hamiltonian::new(&p, &g, Vec3::ZERO, &["exchange", "anisotropy"]).unwrap();
            let mut h = vec![Vec3::ZERO; m.m.len()];
            ham.field_into(&m.m, &mut h);
            let hk = 2.0 * p.k_eff() / (MU0 * p.m_s);
            (g.nx / 4..3 * g.nx / 4)
                .map(|i| m.get(i, 0).cross(h[g.index(i, 0)]).norm() / hk)
                .fold(0.0, f64::max)
        };
        let r2 = residual(2e-9);
        let r1 = residual(1e-9);
        assert!(r2 < 0.05, "residual {r2}");
        let ratio = r2 / r1;
        assert!(ratio > 3.5 && ratio < 4.5, "convergence ratio {ratio}");
    }
}
