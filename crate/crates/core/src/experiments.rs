//! Scenario harnesses: single runs, the (j, n) phase diagram, threshold
//! extraction, velocity sweeps and the three-input majority gate.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::analysis::{
    census, classify_outcome, drift_velocity, track_skyrmions, DwpFate, Frame, FrameRecorder,
    Outcome, OutcomeRecord, Trajectory, TrajectoryRecord, MATCH_INTERVAL, MAX_MATCH_STEP,
};
use crate::dynamics::{
    IntegratorConfig, MovingFrame, Observer, PulseOptions, RelaxConfig, RelaxReport, RunStats,
    Simulation,
};
use crate::error::{Error, Result};
use crate::fields::{Hamiltonian, DEFAULT_TERMS, FIELD_TERMS};
use crate::io::tables;
use crate::model::{
    default_notch, CurrentDirection, DrivePulse, GeometryMask, MagnetizationGrid, MaterialParams,
    Mesh, Notch,
};
use crate::textures::{seed_domain_wall_pair, seed_scene_at, seed_skyrmion, SceneLayout, SceneReport};
use crate::thiele::{predict_guided_velocity, predict_velocity, stt_force, ThieleParams};
use crate::vec3::Vec3;

/// Everything that defines one pulse run apart from the current and the
/// skyrmion count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: MaterialParams,
    pub mesh: Mesh,
    pub notch_enabled: bool,
    pub notch: Notch,
    pub layout: SceneLayout,
    pub integrator: IntegratorConfig,
    /// Used both for seeding and after the post-pulse window.
    pub relax: RelaxConfig,
    pub direction: CurrentDirection,
    pub pulse_length: f64,
    pub post_pulse: f64,
    pub observer_interval: f64,
    pub terms: Vec<String>,
    /// End a run this long after the DWP disappears, s (0 runs the full pulse).
    pub stop_after_dwp_loss: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            params: MaterialParams::default(),
            mesh: Mesh::default(),
            notch_enabled: true,
            notch: default_notch(),
            layout: SceneLayout::default(),
            integrator: IntegratorConfig::default(),
            relax: RelaxConfig::default(),
            direction: CurrentDirection::PlusX,
            pulse_length: 10e-9,
            post_pulse: 2e-9,
            observer_interval: 50e-12,
            terms: DEFAULT_TERMS.iter().map(|s| s.to_string()).collect(),
            stop_after_dwp_loss: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        for (field, v) in [
            ("dx", self.mesh.dx),
            ("dy", self.mesh.dy),
            ("dz", self.mesh.dz),
            ("pulse_length", self.pulse_length),
            ("observer_interval", self.observer_interval),
            ("skyrmion_spacing", self.layout.skyrmion_spacing),
            ("dwp_width", self.layout.dwp_width),
            ("seed_radius", self.layout.seed_radius),
            ("torque_tol", self.relax.torque_tol),
            ("relax_tol_rel", self.relax.tol_rel),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        if !(self.stop_after_dwp_loss >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "stop_after_dwp_loss",
                reason: format!("must be >= 0, got {}", self.stop_after_dwp_loss),
            });
        }
        if self.post_pulse < 0.0 {
            return Err(Error::InvalidParameter {
                field: "post_pulse",
                reason: format!("must be >= 0, got {}", self.post_pulse),
            });
        }
        if self.relax.check_every == 0 {
            return Err(Error::InvalidParameter {
                field: "relax_check_every",
                reason: "must be >= 1".into(),
            });
        }
        if self.terms.is_empty() {
            return Err(Error::InvalidParameter {
                field: "terms",
                reason: "at least one field term is required".into(),
            });
        }
        if let Some(t) = self.terms.iter().find(|t| !FIELD_TERMS.iter().any(|(n, _)| n == t)) {
            return Err(Error::UnknownStrategy {
                kind: "field term",
                name: t.clone(),
                known: FIELD_TERMS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            });
        }
        self.mask(self.notch_enabled).map(|_| ())
    }

    pub fn mask(&self, notched: bool) -> Result<GeometryMask> {
        GeometryMask::racetrack(self.mesh, (notched && self.notch_enabled).then_some(self.notch))
    }

    pub fn simulation(&self, notched: bool) -> Result<Simulation> {
        let mask = self.mask(notched)?;
        let names: Vec<&str> = self.terms.iter().map(String::as_str).collect();
        let ham = Hamiltonian::new(&self.params, &mask, Vec3::ZERO, &names)?;
        Simulation::with_hamiltonian(self.params.clone(), mask, ham, self.integrator.clone())
    }

    pub fn pulse(&self, j_hm: f64) -> Result<DrivePulse> {
        let mut p = DrivePulse::new(j_hm, 0.0, self.pulse_length)?;
        p.direction = self.direction;
        Ok(p)
    }

    pub fn pulse_options(&self) -> PulseOptions {
        PulseOptions {
            post_pulse: self.post_pulse,
            observer_interval: self.observer_interval,
            relax: self.relax,
            moving_frame: None,
        }
    }
}

/// A [`ScenarioConfig`] plus the sweep, velocity and gate settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub j_hm: f64,
    pub j_list: Vec<f64>,
    pub n_list: Vec<usize>,
    /// Currents at or above this value are refused by the phase sweep.
    pub j_limit: f64,
    pub n_max: usize,
    pub workers: usize,
    pub velocity_j_list: Vec<f64>,
    /// Length of the central averaging window of velocity runs, s.
    pub velocity_window: f64,
    /// x of the three gate input lanes (a, b, bias), m. Empty: derived from
    /// the scene layout.
    pub gate_lanes: Vec<f64>,
    pub gate_j: f64,
    /// Snapshot period, s (0 disables snapshots).
    pub snapshot_every: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            j_hm: 5e10,
            j_list: vec![4e10, 5e10, 6e10, 7e10, 8e10, 9e10],
            n_list: vec![0, 1, 2, 3, 4],
            j_limit: 9.5e10,
            n_max: 5,
            workers: 1,
            velocity_j_list: vec![5e10, 6e10, 7e10, 8e10, 9e10],
            velocity_window: 6e-9,
            gate_lanes: Vec::new(),
            gate_j: 8e10,
            snapshot_every: 0.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for (field, list) in [("j_list", &self.j_list), ("velocity_j_list", &self.velocity_j_list)] {
            if let Some(j) = list.iter().find(|j| !(**j >= 0.0)) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("currents must be >= 0, got {j}"),
                });
            }
        }
        for (field, v) in [("j_hm", self.j_hm), ("gate_j", self.gate_j), ("snapshot_every", self.snapshot_every)] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        if !(self.j_limit > 0.0) {
            return Err(Error::InvalidParameter {
                field: "j_limit",
                reason: format!("must be > 0, got {}", self.j_limit),
            });
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter {
                field: "workers",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.velocity_window > 0.0 && self.velocity_window <= self.scenario.pulse_length) {
            return Err(Error::InvalidParameter {
                field: "velocity_window",
                reason: format!(
                    "must lie in (0, pulse_length = {}], got {}",
                    self.scenario.pulse_length, self.velocity_window
                ),
            });
        }
        if !(self.gate_lanes.is_empty() || self.gate_lanes.len() == 3) {
            return Err(Error::InvalidParameter {
                field: "gate_lanes",
                reason: format!("expected three lane positions, got {}", self.gate_lanes.len()),
            });
        }
        Ok(())
    }

    /// Lane x positions for (a, b, bias).
    pub fn lanes(&self) -> [f64; 3] {
        if self.gate_lanes.len() == 3 {
            return [self.gate_lanes[0], self.gate_lanes[1], self.gate_lanes[2]];
        }
        let layout = SceneLayout {
            n_skyrmions: 3,
            ..self.scenario.layout.clone()
        };
        let c = layout.skyrmion_centers(self.scenario.notch.center_x, 0.0);
        // Nearest-first order reversed: a is the left-most lane.
        [c[2].0, c[1].0, c[0].0]
    }
}

/// Relaxed DWP scene with `n` skyrmions at the layout positions.
pub fn prepare_scene(cfg: &ScenarioConfig, n: usize) -> Result<(MagnetizationGrid, SceneReport)> {
    let layout = SceneLayout {
        n_skyrmions: n,
        ..cfg.layout.clone()
    };
    let centers = layout.skyrmion_centers(cfg.notch.center_x, 0.5 * cfg.mesh.width());
    prepare_scene_at(cfg, &centers)
}

pub fn prepare_scene_at(cfg: &ScenarioConfig, centers: &[(f64, f64)]) -> Result<(MagnetizationGrid, SceneReport)> {
    let mut sim = cfg.simulation(true)?;
    seed_scene_at(&mut sim, &cfg.layout, centers, &cfg.relax)
}

/// A finished pulse run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub record: OutcomeRecord,
    pub frames: Vec<Frame>,
    pub stats: RunStats,
    pub relax: RelaxReport,
    pub final_state: MagnetizationGrid,
}

/// Applies the configured pulse at `j_hm` to a relaxed scene and classifies the result.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    initial: &MagnetizationGrid,
    j_hm: f64,
    n_skyrmions: usize,
    extra: &mut [&mut dyn Observer],
) -> Result<ScenarioRun> {
    let mut sim = cfg.simulation(true)?;
    let mut state = initial.clone();
    let mut rec = FrameRecorder::new(&sim.mask);
    rec.stop_after_dwp_loss = (cfg.stop_after_dwp_loss > 0.0).then_some(cfg.stop_after_dwp_loss);
    let pulse = cfg.pulse(j_hm)?;
    let run = {
        let mut obs: Vec<&mut dyn Observer> = Vec::with_capacity(extra.len() + 1);
        obs.push(&mut rec);
        for o in extra.iter_mut() {
            obs.push(&mut **o);
        }
        sim.run_pulse(&mut state, &pulse, &cfg.pulse_options(), &mut obs)?
    };
    let mut record = classify_outcome(
        &TrajectoryRecord {
            j_hm,
            n_skyrmions,
            frames: rec.frames.clone(),
        },
        &sim.mask,
    )?;
    if let Some(t) = run.stats.stopped_at {
        let msg = format!("stopped at {:.2} ns after the DWP vanished", t * 1e9);
        record.note = if record.note.is_empty() { msg } else { format!("{}; {msg}", record.note) };
    }
    Ok(ScenarioRun {
        record,
        frames: rec.frames,
        stats: run.stats,
        relax: run.relax,
        final_state: state,
    })
}

/// One cell of the phase diagram.
#[derive(Debug, Clone)]
pub struct PhaseDiagramEntry {
    pub j_hm: f64,
    pub n_skyrmions: usize,
    pub outcome: Outcome,
    pub final_q: f64,
    pub skyrmions_passed: usize,
    pub skyrmions_lost: usize,
    pub dwp_fate: Option<DwpFate>,
    /// Directory holding this run's files, if the sweep wrote any.
    pub artifacts: Option<PathBuf>,
    pub note: String,
}

impl PhaseDiagramEntry {
    fn from_record(r: &OutcomeRecord, artifacts: Option<PathBuf>) -> Self {
        PhaseDiagramEntry {
            j_hm: r.j_hm,
            n_skyrmions: r.n_skyrmions,
            outcome: r.outcome,
            final_q: r.final_q,
            skyrmions_passed: r.skyrmions_passed,
            skyrmions_lost: r.skyrmions_lost,
            dwp_fate: Some(r.dwp_fate),
            artifacts,
            note: r.note.clone(),
        }
    }

    fn failed(j_hm: f64, n: usize, e: &Error) -> Self {
        PhaseDiagramEntry {
            j_hm,
            n_skyrmions: n,
            outcome: Outcome::Anomalous,
            final_q: f64::NAN,
            skyrmions_passed: 0,
            skyrmions_lost: 0,
            dwp_fate: None,
            artifacts: None,
            note: format!("run failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub workers: usize,
    /// Directory for the incremental CSV and the manifest. `None` keeps
    /// everything in memory.
    pub out_dir: Option<PathBuf>,
    pub j_limit: f64,
}

impl SweepOptions {
    pub fn from_config(cfg: &RunConfig, out_dir: Option<PathBuf>) -> Self {
        SweepOptions {
            workers: cfg.workers,
            out_dir,
            j_limit: cfg.j_limit,
        }
    }
}

/// Runs `jobs` on up to `workers` threads; results come back in job order.
fn fan_out<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let queue = Mutex::new((0..jobs.len()).collect::<VecDeque<_>>());
    let results = Mutex::new((0..jobs.len()).map(|_| None).collect::<Vec<Option<R>>>());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let Some(k) = queue.lock().expect("queue lock").pop_front() else {
                    break;
                };
                let r = f(&jobs[k]);
                results.lock().expect("results lock")[k] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

const PHASE_CSV: &str = "phase.csv";
const MANIFEST: &str = "manifest.txt";

fn key(j: f64, n: usize) -> (u64, usize) {
    (j.to_bits(), n)
}

/// The (j, n) grid without the monotonicity check. Finished rows already
/// in `out_dir` from a run with the same configuration are reused.
pub fn run_phase_grid(cfg: &RunConfig, j_list: &[f64], n_list: &[usize], opts: &SweepOptions) -> Result<Vec<PhaseDiagramEntry>> {
    if j_list.is_empty() || n_list.is_empty() {
        return Err(Error::InvalidParameter {
            field: "j_list",
            reason: "the phase sweep needs at least one current and one skyrmion count".into(),
        });
    }
    if let Some(j) = j_list.iter().find(|j| !(**j >= 0.0) || **j >= opts.j_limit) {
        return Err(Error::InvalidParameter {
            field: "j_list",
            reason: format!(
                "current {j:e} A/m^2 is outside [0, {:e}) (boundary-collision limit)",
                opts.j_limit
            ),
        });
    }
    let sc = &cfg.scenario;
    let hash = format!("{:016x}", cfg.hash());

    let mut done: HashMap<(u64, usize), PhaseDiagramEntry> = HashMap::new();
    let mut csv = None;
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = dir.join(MANIFEST);
        let phase = dir.join(PHASE_CSV);
        let same = fs::read_to_string(&manifest)
            .map(|m| m.lines().any(|l| l == format!("config_hash = {hash}")))
            .unwrap_or(false);
        if same && phase.exists() {
            for e in tables::read_phase_rows(&phase)? {
                done.insert(key(e.j_hm, e.n_skyrmions), e);
            }
        } else {
            tables::write_phase_header(&phase)?;
        }
        let file = OpenOptions::new().append(true).open(&phase).map_err(|e| Error::io(&phase, e))?;
        csv = Some(Mutex::new((phase, file)));
    }

    let mut jobs: Vec<(f64, usize)> = Vec::new();
    for &n in n_list {
        for &j in j_list {
            if !done.contains_key(&key(j, n)) && !jobs.contains(&(j, n)) {
                jobs.push((j, n));
            }
        }
    }
    let status: Mutex<BTreeMap<(u64, usize), String>> = Mutex::new(
        j_list
            .iter()
            .flat_map(|&j| n_list.iter().map(move |&n| (key(j, n), "pending".to_string())))
            .collect(),
    );
    for k in done.keys() {
        status.lock().expect("status").insert(*k, "done".into());
    }
    let write_manifest = |status: &BTreeMap<(u64, usize), String>| -> Result<()> {
        let Some(dir) = &opts.out_dir else { return Ok(()) };
        let mut s = format!("config_hash = {hash}\n");
        s.push_str(&format!("j_list = {}\n", j_list.iter().map(|j| format!("{j:?}")).collect::<Vec<_>>().join(",")));
        s.push_str(&format!("n_list = {}\n", n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")));
        for (&(jb, n), st) in status {
            s.push_str(&format!("entry {:?} {} = {}\n", f64::from_bits(jb), n, st));
        }
        s.push_str("# effective configuration\n");
        s.push_str(&cfg.manifest());
        let path = dir.join(MANIFEST);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    };
    write_manifest(&status.lock().expect("status"))?;

    // Scenes depend on n only; build each once.
    let mut ns: Vec<usize> = jobs.iter().map(|&(_, n)| n).collect();
    ns.sort_unstable();
    ns.dedup();
    let scenes: HashMap<usize, std::result::Result<MagnetizationGrid, String>> = ns
        .iter()
        .copied()
        .zip(fan_out(&ns, opts.workers, |&n| {
            prepare_scene(sc, n).map(|(s, _)| s).map_err(|e| e.to_string())
        }))
        .collect();

    let fresh = fan_out(&jobs, opts.workers, |&(j, n)| {
        let entry = match &scenes[&n] {
            Err(e) => PhaseDiagramEntry::failed(j, n, &Error::Seeding(e.clone())),
            Ok(init) => match run_scenario(sc, init, j, n, &mut []) {
                Ok(run) => PhaseDiagramEntry::from_record(&run.record, opts.out_dir.clone()),
                Err(e) => PhaseDiagramEntry::failed(j, n, &e),
            },
        };
        log::info!("phase: j = {j:e}, n = {n} -> {}", entry.outcome);
        if let Some(lock) = &csv {
            let mut g = lock.lock().expect("csv lock");
            let (path, file) = &mut *g;
            let row = tables::phase_row(&entry);
            if let Err(e) = file.write_all(row.as_bytes()).and_then(|_| file.flush()) {
                log::error!("could not append to {}: {e}", path.display());
            }
        }
        let mut st = status.lock().expect("status");
        st.insert(key(j, n), entry.outcome.to_string());
        if let Err(e) = write_manifest(&st) {
            log::error!("{e}");
        }
        entry
    });

    let mut all: Vec<PhaseDiagramEntry> = done.into_values().chain(fresh).collect();
    all.retain(|e| j_list.iter().any(|j| j.to_bits() == e.j_hm.to_bits()) && n_list.contains(&e.n_skyrmions));
    all.sort_by(|a, b| a.j_hm.total_cmp(&b.j_hm).then(a.n_skyrmions.cmp(&b.n_skyrmions)));
    Ok(all)
}

/// Phase grid followed by the staircase check; a violation fails the sweep
/// (the rows stay on disk).
pub fn sweep_phase(cfg: &RunConfig, j_list: &[f64], n_list: &[usize], opts: &SweepOptions) -> Result<Vec<PhaseDiagramEntry>> {
    let entries = run_phase_grid(cfg, j_list, n_list, opts)?;
    check_monotonicity(&entries)?;
    Ok(entries)
}

/// Depinned at (j, n) must imply Depinned at every larger n (same j) and
/// every larger j (same n) present in the grid. Anomalous cells are skipped.
pub fn check_monotonicity(entries: &[PhaseDiagramEntry]) -> Result<()> {
    let mut bad = Vec::new();
    for a in entries.iter().filter(|e| e.outcome == Outcome::Depinned) {
        for b in entries.iter().filter(|e| e.outcome == Outcome::Pinned) {
            let same_j = a.j_hm == b.j_hm && b.n_skyrmions > a.n_skyrmions;
            let same_n = a.n_skyrmions == b.n_skyrmions && b.j_hm > a.j_hm;
            if same_j || same_n {
                bad.push(format!(
                    "depinned at (j = {:e}, n = {}) but pinned at (j = {:e}, n = {})",
                    a.j_hm, a.n_skyrmions, b.j_hm, b.n_skyrmions
                ));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Monotonicity(bad.join("; ")))
    }
}

/// Smallest n with a Depinned outcome at `j_hm` in a finished grid; an
/// Anomalous cell at or below that n is an error.
pub fn threshold_from_grid(entries: &[PhaseDiagramEntry], j_hm: f64) -> Result<Option<usize>> {
    let mut row: Vec<&PhaseDiagramEntry> = entries.iter().filter(|e| e.j_hm == j_hm).collect();
    row.sort_by_key(|e| e.n_skyrmions);
    for e in row {
        match e.outcome {
            Outcome::Depinned => return Ok(Some(e.n_skyrmions)),
            Outcome::Anomalous => {
                return Err(Error::Anomalous(format!(
                    "j = {j_hm:e}, n = {}: {} (needs manual review)",
                    e.n_skyrmions, e.note
                )))
            }
            Outcome::Pinned => {}
        }
    }
    Ok(None)
}

/// Smallest n in 0..=n_max that depins the DWP at `j_hm`, running
/// scenarios in increasing n until the first Depinned outcome.
pub fn threshold_number(cfg: &RunConfig, j_hm: f64) -> Result<Option<usize>> {
    if j_hm >= cfg.j_limit {
        log::warn!("threshold_number: j = {j_hm:e} is at or above the boundary-collision limit");
    }
    let sc = &cfg.scenario;
    let mut entries = Vec::new();
    for n in 0..=cfg.n_max {
        let (init, _) = prepare_scene(sc, n)?;
        let run = run_scenario(sc, &init, j_hm, n, &mut [])?;
        let e = PhaseDiagramEntry::from_record(&run.record, None);
        let stop = e.outcome != Outcome::Pinned;
        entries.push(e);
        if stop {
            break;
        }
    }
    threshold_from_grid(&entries, j_hm)
}

/// Drift speeds at one current.
#[derive(Debug, Clone)]
pub struct VelocityRow {
    pub j_hm: f64,
    pub v_sk: f64,
    pub vy_sk: f64,
    pub v_dwp: f64,
    /// Thiele speed along the track with the edge carrying the transverse force.
    pub v_thiele: f64,
    /// Thiele velocity in an unbounded film.
    pub v_thiele_free: (f64, f64),
    pub q: f64,
    pub diameter: f64,
    /// Set when a texture was lost; the velocities are then NaN.
    pub flag: Option<String>,
}

/// Relaxed isolated skyrmion at the center of a notch-free track:
/// (state, q, diameter).
pub fn relaxed_free_skyrmion(cfg: &ScenarioConfig, core_polarity: f64) -> Result<(MagnetizationGrid, f64, f64)> {
    let mut sim = cfg.simulation(false)?;
    let g = sim.mask.clone();
    let mut s = MagnetizationGrid::uniform(&g, -Vec3::Z * core_polarity);
    seed_skyrmion(&mut s, &g, &sim.params, (0.5 * g.length(), 0.5 * g.width()), cfg.layout.seed_radius, core_polarity)?;
    sim.relax(&mut s, &cfg.relax)?;
    let c = census(&s, &g, 0.0);
    let sk = c
        .skyrmions
        .first()
        .ok_or_else(|| Error::TextureLost("the seeded skyrmion collapsed during relaxation".into()))?;
    Ok((s, c.q_total, sk.diameter))
}

fn moving_frame(g: &GeometryMask) -> MovingFrame {
    MovingFrame {
        target_x: 0.5 * g.length(),
        margin_cells: 12,
    }
}

fn central_window(cfg: &RunConfig) -> (f64, f64) {
    let mid = 0.5 * cfg.scenario.pulse_length;
    (mid - 0.5 * cfg.velocity_window, mid + 0.5 * cfg.velocity_window)
}

fn velocity_opts(sc: &ScenarioConfig, g: &GeometryMask) -> PulseOptions {
    PulseOptions {
        post_pulse: 0.0,
        observer_interval: sc.observer_interval,
        relax: RelaxConfig {
            max_steps: 0,
            ..sc.relax
        },
        moving_frame: Some(moving_frame(g)),
    }
}

/// Skyrmion drift on a notch-free track in a moving frame: (vx, vy) over
/// the central window.
pub fn skyrmion_drift(cfg: &RunConfig, initial: &MagnetizationGrid, j_hm: f64) -> Result<((f64, f64), Vec<Trajectory>)> {
    let sc = &cfg.scenario;
    let mut sim = sc.simulation(false)?;
    let g = sim.mask.clone();
    let mut s = initial.clone();
    let mut rec = FrameRecorder::new(&g);
    sim.run_pulse(&mut s, &sc.pulse(j_hm)?, &velocity_opts(sc, &g), &mut [&mut rec])?;
    let dynamic: Vec<Frame> = rec.frames.into_iter().filter(|f| f.phase != crate::dynamics::Phase::Relaxed).collect();
    let trajs = track_skyrmions(&dynamic, MAX_MATCH_STEP, MATCH_INTERVAL);
    let first = trajs
        .iter()
        .find(|t| t.samples[0].0 == 0.0)
        .ok_or_else(|| Error::TextureLost("no skyrmion at t = 0".into()))?;
    let v = drift_velocity(first, central_window(cfg))?;
    Ok((v, trajs))
}

/// DWP drift on a notch-free track in a moving frame: vx over the central
/// window, from the wall-pair midpoint.
pub fn dwp_drift(cfg: &RunConfig, j_hm: f64) -> Result<f64> {
    let sc = &cfg.scenario;
    let mut sim = sc.simulation(false)?;
    let g = sim.mask.clone();
    let mut s = MagnetizationGrid::uniform(&g, Vec3::Z);
    let mid = 0.5 * g.length();
    let w = sc.layout.dwp_width;
    seed_domain_wall_pair(&mut s, &g, &sim.params, mid - 0.5 * w, mid + 0.5 * w)?;
    sim.relax(&mut s, &sc.relax)?;
    let mut rec = FrameRecorder::new(&g);
    sim.run_pulse(&mut s, &sc.pulse(j_hm)?, &velocity_opts(sc, &g), &mut [&mut rec])?;
    let mut samples = Vec::new();
    let mut gone = None;
    for f in rec.frames.iter().filter(|f| f.phase != crate::dynamics::Phase::Relaxed) {
        match f.dwp_mid() {
            Some(x) if gone.is_none() => samples.push((f.time, x, 0.5 * g.width())),
            Some(_) => {}
            None => {
                gone.get_or_insert(f.time);
            }
        }
    }
    let traj = Trajectory {
        id: 0,
        samples,
        lost_at: gone,
    };
    Ok(drift_velocity(&traj, central_window(cfg))?.0)
}

/// Simulated skyrmion and DWP speeds with the Thiele predictions, per current.
pub fn sweep_velocity(cfg: &RunConfig, j_list: &[f64]) -> Result<Vec<VelocityRow>> {
    let sc = &cfg.scenario;
    let (init, q, d) = relaxed_free_skyrmion(sc, -1.0)?;
    let tp = ThieleParams::for_skyrmion(&sc.params, q.round(), d)?;
    let rows = fan_out(j_list, cfg.workers, |&j| {
        let mut flag = Vec::new();
        let (vx, vy) = skyrmion_drift(cfg, &init, j).map(|r| r.0).unwrap_or_else(|e| {
            flag.push(format!("skyrmion: {e}"));
            (f64::NAN, f64::NAN)
        });
        let v_dwp = dwp_drift(cfg, j).unwrap_or_else(|e| {
            flag.push(format!("dwp: {e}"));
            f64::NAN
        });
        let f = stt_force(j, &sc.params, tp.b)?;
        Ok(VelocityRow {
            j_hm: j,
            v_sk: vx,
            vy_sk: vy,
            v_dwp,
            v_thiele: predict_guided_velocity(&tp, f)?,
            v_thiele_free: predict_velocity(&tp, f)?,
            q,
            diameter: d,
            flag: (!flag.is_empty()).then(|| flag.join("; ")),
        })
    });
    rows.into_iter().collect()
}

/// x at which the single-skyrmion transit runs start, m.
pub const TRANSIT_START_X: f64 = 60e-9;

/// Result of driving one isolated skyrmion along the notch-free track.
#[derive(Debug, Clone)]
pub struct TransitRun {
    pub j_hm: f64,
    pub survived: bool,
    /// Time the skyrmion disappeared, s.
    pub lost_at: Option<f64>,
    pub final_x: Option<f64>,
    pub frames: Vec<Frame>,
}

/// Drives a skyrmion relaxed at `TRANSIT_START_X` with the configured pulse
/// on the notch-free track. It survives when it is still present after
/// the final relaxation.
pub fn skyrmion_transit(cfg: &ScenarioConfig, initial: &MagnetizationGrid, j_hm: f64) -> Result<TransitRun> {
    let mut sim = cfg.simulation(false)?;
    let g = sim.mask.clone();
    let mut s = initial.clone();
    let mut rec = FrameRecorder::new(&g);
    sim.run_pulse(&mut s, &cfg.pulse(j_hm)?, &cfg.pulse_options(), &mut [&mut rec])?;
    let last = rec.frames.last().expect("the relaxed frame is always recorded");
    let survived = !last.skyrmions.is_empty();
    let lost_at = if survived {
        None
    } else {
        rec.frames.iter().find(|f| f.skyrmions.is_empty()).map(|f| f.time)
    };
    Ok(TransitRun {
        j_hm,
        survived,
        lost_at,
        final_x: last.skyrmions.first().map(|k| k.x),
        frames: rec.frames,
    })
}

/// Relaxed single skyrmion at the transit start position.
pub fn transit_scene(cfg: &ScenarioConfig) -> Result<MagnetizationGrid> {
    let mut sim = cfg.simulation(false)?;
    let g = sim.mask.clone();
    let mut s = MagnetizationGrid::uniform(&g, Vec3::Z);
    seed_skyrmion(&mut s, &g, &sim.params, (TRANSIT_START_X, 0.5 * g.width()), cfg.layout.seed_radius, -1.0)?;
    sim.relax(&mut s, &cfg.relax)?;
    if census(&s, &g, 0.0).skyrmions.is_empty() {
        return Err(Error::Seeding("the transit skyrmion collapsed during relaxation".into()));
    }
    Ok(s)
}

/// Bisects a monotone switch: `switched(lo)` is false and `switched(hi)`
/// true on entry (checked), and the returned bracket keeps that property.
pub fn bracket_switch(
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
    mut switched: impl FnMut(f64) -> Result<bool>,
) -> Result<(f64, f64)> {
    if switched(lo)? || !switched(hi)? {
        return Err(Error::InvalidParameter {
            field: "bracket",
            reason: format!("[{lo:e}, {hi:e}] does not bracket the switch"),
        });
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if switched(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// One row of the gate truth table. The output bit is derived from the DWP
/// state and is not stored separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateResult {
    pub a: bool,
    pub b: bool,
    pub bias: bool,
    pub j_hm: f64,
    pub dwp_state: Outcome,
}

impl GateResult {
    pub fn out(&self) -> bool {
        self.dwp_state == Outcome::Depinned
    }
}

/// Seeds one skyrmion per set input on the (a, b, bias) lanes, applies the
/// pulse and reads the output off the DWP.
pub fn majority_gate(cfg: &RunConfig, a: bool, b: bool, bias: bool, j_hm: f64) -> Result<GateResult> {
    let sc = &cfg.scenario;
    let lanes = cfg.lanes();
    let y = 0.5 * sc.mesh.width();
    let centers: Vec<(f64, f64)> = [a, b, bias]
        .iter()
        .zip(lanes)
        .filter(|(bit, _)| **bit)
        .map(|(_, x)| (x, y))
        .collect();
    let (init, _) = prepare_scene_at(sc, &centers)?;
    let run = run_scenario(sc, &init, j_hm, centers.len(), &mut [])?;
    if run.record.outcome == Outcome::Anomalous {
        return Err(Error::Anomalous(format!(
            "gate inputs ({}, {}, {}) at j = {j_hm:e}: {}",
            a as u8, b as u8, bias as u8, run.record.note
        )));
    }
    Ok(GateResult {
        a,
        b,
        bias,
        j_hm,
        dwp_state: run.record.outcome,
    })
}

/// Output directory helper for CLI runs.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Appends `text` to `path`, creating it if needed.
pub fn append(path: &Path, text: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(j: f64, n: usize, o: Outcome) -> PhaseDiagramEntry {
        PhaseDiagramEntry {
            j_hm: j,
            n_skyrmions: n,
            outcome: o,
            final_q: 0.0,
            skyrmions_passed: 0,
            skyrmions_lost: 0,
            dwp_fate: None,
            artifacts: None,
            note: String::new(),
        }
    }

    #[test]
    fn staircase_passes_and_violations_fail() {
        use Outcome::*;
        let ok = vec![
            entry(5e10, 0, Pinned),
            entry(5e10, 1, Depinned),
            entry(6e10, 0, Depinned),
            entry(6e10, 1, Depinned),
        ];
        check_monotonicity(&ok).unwrap();
        assert_eq!(threshold_from_grid(&ok, 5e10).unwrap(), Some(1));
        assert_eq!(threshold_from_grid(&ok, 6e10).unwrap(), Some(0));
        let mut bad = ok.clone();
        bad[3].outcome = Pinned;
        assert!(matches!(check_monotonicity(&bad), Err(Error::Monotonicity(_))));
        let mut anomalous = ok.clone();
        anomalous[0].outcome = Anomalous;
        assert!(threshold_from_grid(&anomalous, 5e10).is_err());
        let none = vec![entry(5e10, 0, Pinned)];
        assert_eq!(threshold_from_grid(&none, 5e10).unwrap(), None);
    }

    #[test]
    fn gate_output_follows_dwp_state() {
        let g = GateResult {
            a: true,
            b: false,
            bias: false,
            j_hm: 8e10,
            dwp_state: Outcome::Pinned,
        };
        assert!(!g.out());
        assert!(GateResult { dwp_state: Outcome::Depinned, ..g }.out());
    }

    #[test]
    fn fan_out_keeps_job_order() {
        let jobs: Vec<u32> = (0..20).collect();
        let r = fan_out(&jobs, 4, |x| x * 2);
        assert_eq!(r, jobs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn phase_sweep_rejects_empty_or_excessive_currents() {
        let cfg = RunConfig::default();
        let opts = SweepOptions::from_config(&cfg, None);
        assert!(run_phase_grid(&cfg, &[], &[0], &opts).is_err());
        assert!(run_phase_grid(&cfg, &[10e10], &[0], &opts).is_err());
    }

    #[test]
    fn default_lanes_are_left_of_the_dwp() {
        let cfg = RunConfig::default();
        let l = cfg.lanes();
        let (xl, _) = cfg.scenario.layout.dwp_walls(cfg.scenario.notch.center_x);
        assert!(l[0] < l[1] && l[1] < l[2] && l[2] < xl);
    }
}
