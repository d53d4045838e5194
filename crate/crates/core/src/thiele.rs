//! Rigid-texture (Thiele) model of current-driven skyrmion motion.
//!
//! With G = -4 pi Q along z (dimensionless), D the dissipative scalar and
//! F the spin-Hall force, the steady velocity solves
//!
//! ```text
//! G x v - alpha D v + mu F = 0
//! ```
//!
//! where `mu = gamma / (mu0 Ms t_film)` converts the force (J/m) into the
//! velocity units used by the dimensionless G and D.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{DrivePulse, MaterialParams, ELEMENTARY_CHARGE, HBAR, MU0};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThieleParams {
    /// Topological charge.
    pub q: f64,
    /// Dissipative tensor scalar (dimensionless).
    pub d_scalar: f64,
    /// Characteristic length entering the force, m.
    pub b: f64,
    pub alpha: f64,
    /// Force-to-velocity factor gamma/(mu0 Ms t_film), m/(s N) per unit length.
    pub mobility: f64,
}

impl ThieleParams {
    /// Parameters for a skyrmion of diameter `d_length` and charge `q`, with
    /// b taken as the radius.
    pub fn for_skyrmion(p: &MaterialParams, q: f64, d_length: f64) -> Result<Self> {
        let tp = ThieleParams {
            q,
            d_scalar: dissipative_scalar(p, d_length)?,
            b: 0.5 * d_length,
            alpha: p.alpha,
            mobility: mobility(p),
        };
        tp.validate()?;
        Ok(tp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_scalar > 0.0) {
            return Err(Error::InvalidParameter {
                field: "d_scalar",
                reason: format!("must be > 0, got {}", self.d_scalar),
            });
        }
        if !(self.b > 0.0) {
            return Err(Error::InvalidParameter {
                field: "b",
                reason: format!("must be > 0, got {}", self.b),
            });
        }
        Ok(())
    }

    fn gyro(&self) -> f64 {
        -4.0 * PI * self.q
    }
}

pub fn mobility(p: &MaterialParams) -> f64 {
    p.gamma / (MU0 * p.m_s * p.t_film)
}

/// Spin-Hall force on a texture of characteristic length `b` for a +x
/// charge current: |F| = j theta_sh hbar pi b / (2 e), along z x sigma_hat.
pub fn stt_force(j_hm: f64, p: &MaterialParams, b: f64) -> Result<[f64; 2]> {
    if j_hm < 0.0 {
        return Err(Error::InvalidParameter {
            field: "j_hm",
            reason: format!("must be >= 0, got {j_hm}"),
        });
    }
    let mag = j_hm * p.theta_sh * HBAR * PI * b / (2.0 * ELEMENTARY_CHARGE);
    // With the polarization convention a +x current gives z x sigma = +x.
    let dir = Vec3::Z.cross(DrivePulse::off().sigma_hat());
    Ok([mag * dir.x, mag * dir.y])
}

fn length_scale(a_ex: f64, k: f64, field: &'static str) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("must be > 0, got {k}"),
        });
    }
    Ok((a_ex / k).sqrt())
}

/// D = pi^2 d / (8 sqrt(A_ex / K_u)) with the bare anisotropy constant.
pub fn dissipative_scalar(p: &MaterialParams, d_length: f64) -> Result<f64> {
    if !(d_length > 0.0) {
        return Err(Error::InvalidParameter {
            field: "d_length",
            reason: format!("must be > 0, got {d_length}"),
        });
    }
    Ok(PI * PI * d_length / (8.0 * length_scale(p.a_ex, p.k_u, "k_u")?))
}

/// Same formula with K_eff in place of K_u, for sensitivity checks.
pub fn dissipative_scalar_keff(p: &MaterialParams, d_length: f64) -> Result<f64> {
    if !(d_length > 0.0) {
        return Err(Error::InvalidParameter {
            field: "d_length",
            reason: format!("must be > 0, got {d_length}"),
        });
    }
    Ok(PI * PI * d_length / (8.0 * length_scale(p.a_ex, p.k_eff(), "k_eff")?))
}

/// Free-film velocity, m/s: solves
/// `-g vy - a vx + mu Fx = 0`, `g vx - a vy + mu Fy = 0` with g = -4 pi q, a = alpha D.
pub fn predict_velocity(tp: &ThieleParams, f: [f64; 2]) -> Result<(f64, f64)> {
    let g = tp.gyro();
    let a = tp.alpha * tp.d_scalar;
    let det = a * a + g * g;
    if det == 0.0 {
        return Err(Error::SingularThiele);
    }
    let (fx, fy) = (tp.mobility * f[0], tp.mobility * f[1]);
    Ok(((a * fx - g * fy) / det, (g * fx + a * fy) / det))
}

/// Velocity along the track when an edge holds the texture at fixed y: the
/// confining force absorbs the transverse balance and vx = mu Fx / (alpha D).
pub fn predict_guided_velocity(tp: &ThieleParams, f: [f64; 2]) -> Result<f64> {
    let a = tp.alpha * tp.d_scalar;
    if a == 0.0 {
        return Err(Error::SingularThiele);
    }
    Ok(tp.mobility * f[0] / a)
}

/// Deflection angle atan2(vy, vx) for a unit force along +x.
pub fn skyrmion_hall_angle(tp: &ThieleParams) -> Result<f64> {
    let (vx, vy) = predict_velocity(tp, [1.0, 0.0])?;
    Ok(vy.atan2(vx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(q: f64, d: f64) -> ThieleParams {
        ThieleParams {
            q,
            d_scalar: d,
            b: 10e-9,
            alpha: 0.3,
            mobility: 1.0,
        }
    }

    #[test]
    fn force_by_hand() {
        let p = MaterialParams::default();
        assert_eq!(stt_force(0.0, &p, 1e-8).unwrap(), [0.0, 0.0]);
        let f = stt_force(5e10, &p, 13.5e-9).unwrap();
        let hand = 5e10 * 0.3 * 1.054_571_817e-34 * PI * 13.5e-9 / (2.0 * 1.602_176_634e-19);
        assert!((f[0] - hand).abs() < 1e-12 * hand, "{f:?} vs {hand}");
        assert_eq!(f[1], 0.0);
        let f2 = stt_force(10e10, &p, 13.5e-9).unwrap();
        assert!((f2[0] - 2.0 * f[0]).abs() < 1e-12 * f[0]);
        assert!(stt_force(-1.0, &p, 1e-8).is_err());
    }

    #[test]
    fn dissipative_scalar_by_hand() {
        let p = MaterialParams::default();
        let l = (1.5e-11f64 / 8e5).sqrt();
        let unit = 8.0 * l / (PI * PI);
        assert!((dissipative_scalar(&p, unit).unwrap() - 1.0).abs() < 1e-12);
        let d20 = PI * PI * 2e-8 / (8.0 * l);
        assert!((dissipative_scalar(&p, 20e-9).unwrap() - d20).abs() < 1e-12 * d20);
        assert!((dissipative_scalar(&p, 60e-9).unwrap() - 3.0 * d20).abs() < 1e-9 * d20);
        assert!(dissipative_scalar_keff(&p, 20e-9).unwrap() < d20);
        assert!(dissipative_scalar(&p, 0.0).is_err());
    }

    #[test]
    fn no_gyrocoupling_means_velocity_along_force() {
        let t = tp(0.0, 5.0);
        let (vx, vy) = predict_velocity(&t, [3.0, -1.5]).unwrap();
        assert!((vx - 3.0 / 1.5).abs() < 1e-12 && (vy + 1.5 / 1.5).abs() < 1e-12);
        assert_eq!(predict_velocity(&t, [0.0, 0.0]).unwrap(), (0.0, 0.0));
        assert_eq!(skyrmion_hall_angle(&t).unwrap(), 0.0);
    }

    #[test]
    fn singular_system_is_an_error() {
        let t = ThieleParams { alpha: 0.0, ..tp(0.0, 5.0) };
        assert!(matches!(predict_velocity(&t, [1.0, 0.0]), Err(Error::SingularThiele)));
    }

    #[test]
    fn hall_angle_limits_and_sign() {
        let weak = ThieleParams { alpha: 1e-9, ..tp(-1.0, 1.0) };
        assert!((skyrmion_hall_angle(&weak).unwrap() - PI / 2.0).abs() < 1e-6);
        let a = skyrmion_hall_angle(&tp(-1.0, 7.0)).unwrap();
        let b = skyrmion_hall_angle(&tp(1.0, 7.0)).unwrap();
        assert!(a > 0.0 && (a + b).abs() < 1e-12);
    }

    #[test]
    fn guided_velocity_with_table_values() {
        // Edge-guided speed is independent of the size when b = d/2.
        let p = MaterialParams::default();
        let k = HBAR / (2.0 * MU0 * ELEMENTARY_CHARGE) * 5e10 * p.theta_sh / (p.t_film * p.m_s);
        let l = (p.a_ex / p.k_u).sqrt();
        let hand = p.gamma * k * 4.0 * l / (p.alpha * PI);
        for d in [20e-9, 27e-9, 35e-9] {
            let t = ThieleParams::for_skyrmion(&p, -1.0, d).unwrap();
            let f = stt_force(5e10, &p, t.b).unwrap();
            let v = predict_guided_velocity(&t, f).unwrap();
            assert!((v - hand).abs() < 1e-9 * hand, "{v} vs {hand}");
        }
        assert!((hand - 68.8).abs() < 0.5, "{hand}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linear_in_force(q in -2.0f64..2.0, d in 0.5f64..20.0, fx in -5.0f64..5.0, fy in -5.0f64..5.0, s in -4.0f64..4.0) {
                let t = tp(q, d);
                let (vx, vy) = predict_velocity(&t, [fx, fy]).unwrap();
                let (wx, wy) = predict_velocity(&t, [s * fx, s * fy]).unwrap();
                prop_assert!((wx - s * vx).abs() <= 1e-12 * (1.0 + vx.abs() * s.abs()));
                prop_assert!((wy - s * vy).abs() <= 1e-12 * (1.0 + vy.abs() * s.abs()));
            }

            #[test]
            fn angle_independent_of_force_magnitude(q in -2.0f64..2.0, d in 0.5f64..20.0, th in 0.0f64..6.28, m1 in 0.1f64..10.0, m2 in 0.1f64..10.0) {
                let t = tp(q, d);
                let ang = |m: f64| {
                    let f = [m * th.cos(), m * th.sin()];
                    let (vx, vy) = predict_velocity(&t, f).unwrap();
                    let c = (vx * f[0] + vy * f[1]) / ((vx.hypot(vy)) * m);
                    c.clamp(-1.0, 1.0).acos()
                };
                prop_assert!((ang(m1) - ang(m2)).abs() < 1e-9);
                // and it is fixed by 4 pi |q| / (alpha D) alone
                let expected = (4.0 * PI * q.abs() / (t.alpha * d)).atan();
                prop_assert!((ang(m1) - expected).abs() < 1e-7);
            }

            #[test]
            fn speed_monotone(q in -2.0f64..2.0, d in 0.5f64..20.0, f in 0.1f64..5.0, df in 0.01f64..1.0, dd in 0.01f64..5.0) {
                let t = tp(q, d);
                let speed = |t: &ThieleParams, f: f64| {
                    let (vx, vy) = predict_velocity(t, [f, 0.0]).unwrap();
                    vx.hypot(vy)
                };
                prop_assert!(speed(&t, f + df) > speed(&t, f));
                let stiffer = tp(q, d + dd);
                prop_assert!(speed(&stiffer, f) < speed(&t, f));
            }
        }
    }
}
