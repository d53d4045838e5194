//! CSV outputs. Every writer emits its header even when there are no rows.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{Frame, Outcome, OutcomeRecord};
use crate::dynamics::{Observer, Phase};
use crate::error::{Error, Result};
use crate::experiments::{GateResult, PhaseDiagramEntry, VelocityRow};
use crate::fields::Hamiltonian;
use crate::io::ovf::write_snapshot;
use crate::model::{GeometryMask, MagnetizationGrid};

pub const PHASE_HEADER: [&str; 8] = [
    "j_hm",
    "n_skyrmions",
    "outcome",
    "final_q",
    "skyrmions_passed",
    "skyrmions_lost",
    "dwp_fate",
    "note",
];
pub const VELOCITY_HEADER: [&str; 9] = [
    "j_hm", "v_sk", "vy_sk", "v_dwp", "v_thiele", "v_thiele_free_x", "v_thiele_free_y", "diameter_m", "flag",
];
pub const OUTCOME_HEADER: [&str; 8] = [
    "j_hm",
    "n_skyrmions",
    "outcome",
    "final_q",
    "skyrmions_passed",
    "skyrmions_lost",
    "skyrmions_remaining",
    "dwp_fate",
];
pub const FRAME_HEADER: [&str; 8] = [
    "time_s", "phase", "e_total_J", "Q", "n_skyrmions", "dwp_left_m", "dwp_right_m", "skyrmions_xy_m",
];
pub const GATE_HEADER: [&str; 6] = ["a", "b", "bias", "j_hm", "dwp_state", "out"];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn render<const N: usize>(header: Option<&[&str; N]>, rows: &[[String; N]]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn write_table<const N: usize>(path: &Path, header: &[&str; N], rows: &[[String; N]]) -> Result<()> {
    std::fs::write(path, render(Some(header), rows)).map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn phase_fields(e: &PhaseDiagramEntry) -> [String; 8] {
    [
        num(e.j_hm),
        e.n_skyrmions.to_string(),
        e.outcome.to_string(),
        num(e.final_q),
        e.skyrmions_passed.to_string(),
        e.skyrmions_lost.to_string(),
        e.dwp_fate.map(|f| f.to_string()).unwrap_or_default(),
        e.note.clone(),
    ]
}

/// One CSV line for the incremental phase table.
pub fn phase_row(e: &PhaseDiagramEntry) -> String {
    render(None, &[phase_fields(e)])
}

pub fn write_phase_header(path: &Path) -> Result<()> {
    write_table::<8>(path, &PHASE_HEADER, &[])
}

pub fn write_phase_table(path: &Path, entries: &[PhaseDiagramEntry]) -> Result<()> {
    let rows: Vec<_> = entries.iter().map(phase_fields).collect();
    write_table(path, &PHASE_HEADER, &rows)
}

/// Plot-ready `j_hm,n,outcome` triples.
pub fn write_plotdata(path: &Path, entries: &[PhaseDiagramEntry]) -> Result<()> {
    let rows: Vec<_> = entries
        .iter()
        .map(|e| [num(e.j_hm), e.n_skyrmions.to_string(), e.outcome.to_string()])
        .collect();
    write_table(path, &["j_hm", "n", "outcome"], &rows)
}

/// Reads back a phase table written by [`write_phase_table`] or the
/// incremental sweep writer. Rows from failed runs keep their outcome and note.
pub fn read_phase_rows(path: &Path) -> Result<Vec<PhaseDiagramEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |line: u64, m: String| Error::Csv {
        path: path.to_path_buf(),
        message: format!("record {line}: {m}"),
    };
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = k as u64 + 2;
        if rec.len() != PHASE_HEADER.len() {
            return Err(bad(line, format!("expected {} fields, got {}", PHASE_HEADER.len(), rec.len())));
        }
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(line, format!("bad number `{}`", &rec[i]))) };
        let u = |i: usize| -> Result<usize> { rec[i].parse().map_err(|_| bad(line, format!("bad count `{}`", &rec[i]))) };
        out.push(PhaseDiagramEntry {
            j_hm: f(0)?,
            n_skyrmions: u(1)?,
            outcome: rec[2].parse::<Outcome>().map_err(|m| bad(line, m))?,
            final_q: f(3)?,
            skyrmions_passed: u(4)?,
            skyrmions_lost: u(5)?,
            dwp_fate: if rec[6].is_empty() {
                None
            } else {
                Some(rec[6].parse().map_err(|m| bad(line, m))?)
            },
            artifacts: None,
            note: rec[7].to_string(),
        });
    }
    Ok(out)
}

pub fn write_velocity_table(path: &Path, rows: &[VelocityRow]) -> Result<()> {
    let rows: Vec<_> = rows
        .iter()
        .map(|r| {
            [
                num(r.j_hm),
                num(r.v_sk),
                num(r.vy_sk),
                num(r.v_dwp),
                num(r.v_thiele),
                num(r.v_thiele_free.0),
                num(r.v_thiele_free.1),
                num(r.diameter),
                r.flag.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(path, &VELOCITY_HEADER, &rows)
}

/// Plot-ready `j_hm,v_sk,v_dwp,v_thiele` rows.
pub fn write_velocity_plotdata(path: &Path, rows: &[VelocityRow]) -> Result<()> {
    let rows: Vec<_> = rows
        .iter()
        .map(|r| [num(r.j_hm), num(r.v_sk), num(r.v_dwp), num(r.v_thiele)])
        .collect();
    write_table(path, &["j_hm", "v_sk", "v_dwp", "v_thiele"], &rows)
}

pub fn write_outcomes(path: &Path, records: &[OutcomeRecord]) -> Result<()> {
    let rows: Vec<_> = records
        .iter()
        .map(|r| {
            [
                num(r.j_hm),
                r.n_skyrmions.to_string(),
                r.outcome.to_string(),
                num(r.final_q),
                r.skyrmions_passed.to_string(),
                r.skyrmions_lost.to_string(),
                r.skyrmions_remaining.to_string(),
                r.dwp_fate.to_string(),
            ]
        })
        .collect();
    write_table(path, &OUTCOME_HEADER, &rows)
}

pub fn write_gate_table(path: &Path, rows: &[GateResult]) -> Result<()> {
    let b = |x: bool| (x as u8).to_string();
    let rows: Vec<_> = rows
        .iter()
        .map(|g| [b(g.a), b(g.b), b(g.bias), num(g.j_hm), g.dwp_state.to_string(), b(g.out())])
        .collect();
    write_table(path, &GATE_HEADER, &rows)
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Pulse => "pulse",
        Phase::PostPulse => "post_pulse",
        Phase::Relaxed => "relaxed",
    }
}

fn frame_fields(f: &Frame) -> [String; 8] {
    let xy = f
        .skyrmions
        .iter()
        .map(|s| format!("{:e}:{:e}", s.x, s.y))
        .collect::<Vec<_>>()
        .join(";");
    [
        num(f.time),
        phase_name(f.phase).into(),
        num(f.e_total),
        num(f.q),
        f.skyrmions.len().to_string(),
        opt(f.dwp.map(|d| d.0)),
        opt(f.dwp.map(|d| d.1)),
        xy,
    ]
}

pub fn write_frames(path: &Path, frames: &[Frame]) -> Result<()> {
    let rows: Vec<_> = frames.iter().map(frame_fields).collect();
    write_table(path, &FRAME_HEADER, &rows)
}

/// Streams one CSV row per observed frame.
pub struct CsvObserver {
    mask: GeometryMask,
    path: PathBuf,
    file: File,
}

impl CsvObserver {
    pub fn create(path: &Path, mask: &GeometryMask) -> Result<Self> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(render::<8>(Some(&FRAME_HEADER), &[]).as_bytes())
            .map_err(|e| Error::io(path, e))?;
        Ok(CsvObserver {
            mask: mask.clone(),
            path: path.to_path_buf(),
            file,
        })
    }
}

impl Observer for CsvObserver {
    fn observe(&mut self, state: &MagnetizationGrid, ham: &Hamiltonian, phase: Phase) -> Result<()> {
        let f = Frame::capture(state, &self.mask, ham, phase);
        self.file
            .write_all(render(None, &[frame_fields(&f)]).as_bytes())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes an OVF snapshot every `every` seconds of simulated time and
/// always for the final relaxed state.
pub struct SnapshotObserver {
    mask: GeometryMask,
    dir: PathBuf,
    every: f64,
    next: f64,
    count: usize,
}

impl SnapshotObserver {
    pub fn new(dir: &Path, mask: &GeometryMask, every: f64) -> Result<Self> {
        if !(every > 0.0) {
            return Err(Error::InvalidParameter {
                field: "snapshot_every",
                reason: format!("must be > 0, got {every}"),
            });
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(SnapshotObserver {
            mask: mask.clone(),
            dir: dir.to_path_buf(),
            every,
            next: 0.0,
            count: 0,
        })
    }

    pub fn written(&self) -> usize {
        self.count
    }
}

impl Observer for SnapshotObserver {
    fn observe(&mut self, state: &MagnetizationGrid, _ham: &Hamiltonian, phase: Phase) -> Result<()> {
        let name = if phase == Phase::Relaxed {
            "m_relaxed.ovf".to_string()
        } else if state.time + 1e-15 >= self.next {
            self.next += self.every * ((state.time - self.next) / self.every + 1e-9).floor().max(0.0) + self.every;
            format!("m_{:06}.ovf", self.count)
        } else {
            return Ok(());
        };
        write_snapshot(state, &self.mask, &self.dir.join(name))?;
        self.count += 1;
        Ok(())
    }
}
