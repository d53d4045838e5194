//! Explicit Runge-Kutta schemes for the LLG system, selectable by name.

use crate::error::{Error, Result};
use crate::model::MagnetizationGrid;
use crate::vec3::Vec3;

use super::LlgSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: String,
    pub dt_fixed: f64,
    pub tol_rel: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: "rk45".into(),
            dt_fixed: 20e-15,
            tol_rel: 1e-5,
            dt_min: 1e-15,
            dt_max: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed_rk4(dt: f64) -> Self {
        IntegratorConfig {
            method: "rk4".into(),
            dt_fixed: dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::InvalidParameter {
                field: "dt_min",
                reason: format!("need 0 < dt_min <= dt_max, got {} / {}", self.dt_min, self.dt_max),
            });
        }
        if !(self.tol_rel > 0.0) {
            return Err(Error::InvalidParameter {
                field: "tol_rel",
                reason: format!("must be > 0, got {}", self.tol_rel),
            });
        }
        if !(self.dt_fixed > 0.0) {
            return Err(Error::InvalidParameter {
                field: "dt_fixed",
                reason: format!("must be > 0, got {}", self.dt_fixed),
            });
        }
        if !INTEGRATORS.iter().any(|(n, _)| *n == self.method) {
            return Err(unknown_method(&self.method));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub dt: f64,
    pub rejected: usize,
    /// Error estimate relative to tolerance (0 for fixed-step schemes).
    pub error_ratio: f64,
}

pub trait Integrator: Send {
    fn name(&self) -> &'static str;
    /// Advances `state` by one step no longer than `limit` seconds and
    /// renormalizes every active cell.
    fn step(&mut self, sys: &LlgSystem, state: &mut MagnetizationGrid, limit: f64) -> Result<StepReport>;
    /// Forgets cached derivatives; call after the system or state changed discontinuously.
    fn reset(&mut self);
}

pub type IntegratorBuilder = fn(&IntegratorConfig) -> Box<dyn Integrator>;

pub const INTEGRATORS: &[(&str, IntegratorBuilder)] = &[
    ("rk4", |c| Box::new(Rk4::new(c))),
    ("rk45", |c| Box::new(DormandPrince45::new(c))),
];

fn unknown_method(name: &str) -> Error {
    Error::UnknownStrategy {
        kind: "integrator",
        name: name.to_string(),
        known: INTEGRATORS
            .iter()
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(", "),
    }
}

pub fn build_integrator(cfg: &IntegratorConfig) -> Result<Box<dyn Integrator>> {
    cfg.validate()?;
    INTEGRATORS
        .iter()
        .find(|(n, _)| *n == cfg.method)
        .map(|(_, b)| b(cfg))
        .ok_or_else(|| unknown_method(&cfg.method))
}

fn ensure_len(buf: &mut Vec<Vec3>, n: usize) {
    if buf.len() != n {
        buf.clear();
        buf.resize(n, Vec3::ZERO);
    }
}

fn renormalize(sys: &LlgSystem, m: &mut [Vec3]) {
    for &c in sys.active_cells() {
        let c = c as usize;
        m[c] = m[c].normalized();
    }
}

/// Classic fourth-order Runge-Kutta with a fixed step.
pub struct Rk4 {
    dt: f64,
    k: [Vec<Vec3>; 4],
    tmp: Vec<Vec3>,
    h: Vec<Vec3>,
}

impl Rk4 {
    pub fn new(cfg: &IntegratorConfig) -> Self {
        Rk4 {
            dt: cfg.dt_fixed,
            k: Default::default(),
            tmp: Vec::new(),
            h: Vec::new(),
        }
    }
}

impl Integrator for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn step(&mut self, sys: &LlgSystem, state: &mut MagnetizationGrid, limit: f64) -> Result<StepReport> {
        let n = state.m.len();
        for b in self.k.iter_mut() {
            ensure_len(b, n);
        }
        ensure_len(&mut self.tmp, n);
        ensure_len(&mut self.h, n);
        let dt = self.dt.min(limit);
        let cells = sys.active_cells();
        let [k1, k2, k3, k4] = &mut self.k;
        let m = &mut state.m;

        sys.rhs(m, k1, &mut self.h);
        for &c in cells {
            let c = c as usize;
            self.tmp[c] = m[c] + k1[c] * (0.5 * dt);
        }
        sys.rhs(&self.tmp, k2, &mut self.h);
        for &c in cells {
            let c = c as usize;
            self.tmp[c] = m[c] + k2[c] * (0.5 * dt);
        }
        sys.rhs(&self.tmp, k3, &mut self.h);
        for &c in cells {
            let c = c as usize;
            self.tmp[c] = m[c] + k3[c] * dt;
        }
        sys.rhs(&self.tmp, k4, &mut self.h);
        let s = dt / 6.0;
        for &c in cells {
            let c = c as usize;
            m[c] += (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * s;
        }
        renormalize(sys, m);
        state.time += dt;
        Ok(StepReport {
            dt,
            rejected: 0,
            error_ratio: 0.0,
        })
    }

    fn reset(&mut self) {}
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand-Prince 5(4) with first-same-as-last reuse. The error
/// norm is the largest per-component deviation between the embedded
/// solutions; since |m| = 1 this is also a relative error.
pub struct DormandPrince45 {
    dt: f64,
    tol: f64,
    dt_min: f64,
    dt_max: f64,
    k: [Vec<Vec3>; 7],
    tmp: Vec<Vec3>,
    h: Vec<Vec3>,
    fsal: bool,
}

impl DormandPrince45 {
    pub fn new(cfg: &IntegratorConfig) -> Self {
        DormandPrince45 {
            dt: (cfg.dt_max * 0.1).max(cfg.dt_min),
            tol: cfg.tol_rel,
            dt_min: cfg.dt_min,
            dt_max: cfg.dt_max,
            k: Default::default(),
            tmp: Vec::new(),
            h: Vec::new(),
            fsal: false,
        }
    }

    pub fn current_dt(&self) -> f64 {
        self.dt
    }

    /// Lowers the step ceiling (never below dt_min).
    pub fn cap_dt(&mut self, dt_max: f64) {
        self.dt_max = dt_max.max(self.dt_min);
        self.dt = self.dt.min(self.dt_max);
    }
}

impl Integrator for DormandPrince45 {
    fn name(&self) -> &'static str {
        "rk45"
    }

    fn step(&mut self, sys: &LlgSystem, state: &mut MagnetizationGrid, limit: f64) -> Result<StepReport> {
        let n = state.m.len();
        for b in self.k.iter_mut() {
            ensure_len(b, n);
        }
        ensure_len(&mut self.tmp, n);
        ensure_len(&mut self.h, n);
        let cells = sys.active_cells();
        let mut rejected = 0;
        loop {
            let limited = limit < self.dt;
            let dt = if limited { limit } else { self.dt };
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let m = &state.m;
            let tmp = &mut self.tmp;
            if !self.fsal {
                sys.rhs(m, k1, &mut self.h);
                self.fsal = true;
            }
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c] + k1[c] * (dt * A21);
            }
            sys.rhs(tmp, k2, &mut self.h);
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c] + (k1[c] * A31 + k2[c] * A32) * dt;
            }
            sys.rhs(tmp, k3, &mut self.h);
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c] + (k1[c] * A41 + k2[c] * A42 + k3[c] * A43) * dt;
            }
            sys.rhs(tmp, k4, &mut self.h);
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c] + (k1[c] * A51 + k2[c] * A52 + k3[c] * A53 + k4[c] * A54) * dt;
            }
            sys.rhs(tmp, k5, &mut self.h);
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c]
                    + (k1[c] * A61 + k2[c] * A62 + k3[c] * A63 + k4[c] * A64 + k5[c] * A65) * dt;
            }
            sys.rhs(tmp, k6, &mut self.h);
            for &c in cells {
                let c = c as usize;
                tmp[c] = m[c]
                    + (k1[c] * B1 + k3[c] * B3 + k4[c] * B4 + k5[c] * B5 + k6[c] * B6) * dt;
            }
            sys.rhs(tmp, k7, &mut self.h);
            let mut err: f64 = 0.0;
            for &c in cells {
                let c = c as usize;
                let e = (k1[c] * E1 + k3[c] * E3 + k4[c] * E4 + k5[c] * E5 + k6[c] * E6 + k7[c] * E7)
                    * dt;
                err = err.max(e.max_abs());
            }
            let ratio = err / self.tol;
            let factor = if ratio > 0.0 {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            if ratio <= 1.0 {
                std::mem::swap(&mut state.m, &mut self.tmp);
                renormalize(sys, &mut state.m);
                std::mem::swap(k1, k7);
                state.time += dt;
                if !limited {
                    self.dt = (dt * factor).clamp(self.dt_min, self.dt_max);
                }
                return Ok(StepReport {
                    dt,
                    rejected,
                    error_ratio: ratio,
                });
            }
            if dt <= self.dt_min {
                return Err(Error::Stiffness {
                    time: state.time,
                    dt,
                    dt_min: self.dt_min,
                    error_ratio: ratio,
                });
            }
            rejected += 1;
            self.dt = (dt * factor).max(self.dt_min);
        }
    }

    fn reset(&mut self) {
        self.fsal = false;
    }
}
