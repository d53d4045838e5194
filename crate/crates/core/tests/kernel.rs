use proptest::prelude::*;

use racetrack::analysis::topological_charge;
use racetrack::dynamics::{build_integrator, IntegratorConfig, LlgSystem, Mode, Simulation};
use racetrack::fields::Hamiltonian;
use racetrack::io::{read_snapshot, write_snapshot};
use racetrack::model::*;
use racetrack::textures::seed_skyrmion;
use racetrack::Vec3;

fn small_track(nx: usize, ny: usize, notch: bool) -> GeometryMask {
    let mesh = Mesh { nx, ny, ..Mesh::default() };
    let n = notch.then(|| Notch {
        center_x: 0.5 * nx as f64 * mesh.dx,
        length: 6e-9,
        depth: 4e-9,
        side: NotchSide::Upper,
    });
    GeometryMask::racetrack(mesh, n).unwrap()
}

fn unit(v: (f64, f64, f64)) -> Vec3 {
    let u = Vec3::new(v.0, v.1, v.2);
    if u.norm() < 1e-3 {
        Vec3::Z
    } else {
        u.normalized()
    }
}

fn random_state(g: &GeometryMask, dirs: &[(f64, f64, f64)]) -> MagnetizationGrid {
    let mut s = MagnetizationGrid::uniform(g, Vec3::Z);
    for (c, d) in dirs.iter().enumerate().take(s.m.len()) {
        if g.active[c] {
            s.m[c] = unit(*d);
        }
    }
    s
}

fn dirs(n: usize) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn field_is_minus_energy_gradient(d in dirs(12 * 8), notch in any::<bool>(), bz in -2e5..2e5f64) {
        let g = small_track(12, 8, notch);
        let p = MaterialParams::default();
        let ham = Hamiltonian::standard(&p, &g, Vec3::new(0.0, 0.0, bz));
        let s = random_state(&g, &d);
        let h = ham.effective_field(&s).h;
        let scale = MU0 * p.m_s * g.cell_volume();
        let mut m = s.m.clone();
        let eps = 1e-4;
        for c in (0..m.len()).filter(|&c| g.active[c]).step_by(7) {
            for k in 0..3 {
                let orig = m[c];
                *m[c].component_mut(k) += eps;
                let ep = ham.energy(&m);
                m[c] = orig;
                *m[c].component_mut(k) -= eps;
                let em = ham.energy(&m);
                m[c] = orig;
                let fd = -(ep - em) / (2.0 * eps * scale);
                let tol = 1e-6 * h[c].norm().max(1.0);
                prop_assert!((fd - h[c].component(k)).abs() < tol, "cell {c} k {k}: fd {fd} vs {}", h[c].component(k));
            }
        }
    }

    #[test]
    fn steps_keep_unit_length(d in dirs(12 * 8), rk4 in any::<bool>()) {
        let g = small_track(12, 8, true);
        let p = MaterialParams::default();
        let cfg = if rk4 { IntegratorConfig::fixed_rk4(10e-15) } else { IntegratorConfig::default() };
        let mut sim = Simulation::new(p, g.clone(), cfg).unwrap();
        let mut s = random_state(&g, &d);
        let pulse = DrivePulse::new(8e10, 0.0, 1.0).unwrap();
        for _ in 0..30 {
            sim.step(&mut s, &pulse, f64::INFINITY).unwrap();
            prop_assert!(s.max_norm_deviation(&g) < 1e-12);
        }
    }

    #[test]
    fn damping_only_never_raises_energy(d in dirs(10 * 6)) {
        let g = small_track(10, 6, false);
        let p = MaterialParams::default();
        let ham = Hamiltonian::standard(&p, &g, Vec3::ZERO);
        let sys = LlgSystem::new(&ham, &p).with_mode(Mode::DampingOnly);
        let mut integ = build_integrator(&IntegratorConfig::default()).unwrap();
        let mut s = random_state(&g, &d);
        let mut e = ham.energy(&s.m);
        for _ in 0..40 {
            integ.step(&sys, &mut s, f64::INFINITY).unwrap();
            let en = ham.energy(&s.m);
            prop_assert!(en <= e + 1e-12 * e.abs().max(1e-30));
            e = en;
        }
    }

    #[test]
    fn uniform_states_carry_no_charge(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, notch in any::<bool>()) {
        let g = small_track(16, 10, notch);
        let s = MagnetizationGrid::uniform(&g, unit((x, y, z)));
        prop_assert_eq!(topological_charge(&s, &g), 0.0);
    }

    #[test]
    fn snapshots_round_trip_bitwise(d in dirs(9 * 7), t in 0.0..1e-8f64, notch in any::<bool>()) {
        let g = small_track(9, 7, notch);
        let mut s = random_state(&g, &d);
        s.time = t;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ovf");
        write_snapshot(&s, &g, &path).unwrap();
        let back = read_snapshot(&path).unwrap();
        prop_assert_eq!(back.mesh, g.mesh());
        prop_assert_eq!(&back.active, &g.active);
        prop_assert_eq!(back.state.time, t);
        for c in 0..s.m.len() {
            if g.active[c] {
                prop_assert_eq!(back.state.m[c], s.m[c]);
            }
        }
    }
}

#[test]
fn skyrmion_charge_flips_with_polarity() {
    let g = small_track(40, 40, false);
    let p = MaterialParams::default();
    for pol in [-1.0, 1.0] {
        let mut s = MagnetizationGrid::uniform(&g, Vec3::new(0.0, 0.0, -pol));
        seed_skyrmion(&mut s, &g, &p, (40e-9, 40e-9), 12e-9, pol).unwrap();
        let q = topological_charge(&s, &g);
        assert!((q - pol).abs() < 0.1, "polarity {pol}: Q = {q}");
    }
}

#[test]
fn precession_conserves_energy() {
    let g = small_track(30, 20, false);
    let p = MaterialParams::default();
    let ham = Hamiltonian::standard(&p, &g, Vec3::ZERO);
    let mut sys = LlgSystem::new(&ham, &p);
    sys.alpha = 0.0;
    let cfg = IntegratorConfig { tol_rel: 1e-10, ..IntegratorConfig::default() };
    let mut integ = build_integrator(&cfg).unwrap();
    let mut s = MagnetizationGrid::uniform(&g, Vec3::Z);
    seed_skyrmion(&mut s, &g, &p, (30e-9, 20e-9), 8e-9, -1.0).unwrap();
    let e0 = ham.energy(&s.m);
    while s.time < 50e-12 {
        let lim = 50e-12 - s.time;
        integ.step(&sys, &mut s, lim).unwrap();
    }
    let e1 = ham.energy(&s.m);
    assert!(((e1 - e0) / e0).abs() < 1e-7, "{e0} -> {e1}");
}
