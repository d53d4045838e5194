//! OVF 2.0 text snapshots. Values are written with 17 significant digits so
//! that reading a file back reproduces every component bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GeometryMask, MagnetizationGrid, Mesh};
use crate::vec3::Vec3;

/// A snapshot read back from disk. Cells stored as zero vectors are the
/// inactive ones.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub mesh: Mesh,
    pub state: MagnetizationGrid,
    pub active: Vec<bool>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// OVF 2.0 text rendering of `state` on `mask`.
pub fn render_snapshot(state: &MagnetizationGrid, mask: &GeometryMask) -> Result<String> {
    state.check_shape(mask)?;
    let mut s = String::with_capacity(64 * state.m.len() + 1024);
    let (nx, ny) = (mask.nx, mask.ny);
    let header = [
        "# OOMMF OVF 2.0".to_string(),
        "# Segment count: 1".into(),
        "# Begin: Segment".into(),
        "# Begin: Header".into(),
        "# Title: m".into(),
        format!("# Desc: time_s = {}", fmt_f64(state.time)),
        format!("# Desc: frame_offset_m = {}", fmt_f64(state.frame_offset)),
        "# meshtype: rectangular".into(),
        "# meshunit: m".into(),
        "# xmin: 0".into(),
        "# ymin: 0".into(),
        "# zmin: 0".into(),
        format!("# xmax: {}", fmt_f64(nx as f64 * mask.dx)),
        format!("# ymax: {}", fmt_f64(ny as f64 * mask.dy)),
        format!("# zmax: {}", fmt_f64(mask.dz)),
        "# valuedim: 3".into(),
        "# valuelabels: m_x m_y m_z".into(),
        "# valueunits: 1 1 1".into(),
        format!("# xbase: {}", fmt_f64(0.5 * mask.dx)),
        format!("# ybase: {}", fmt_f64(0.5 * mask.dy)),
        format!("# zbase: {}", fmt_f64(0.5 * mask.dz)),
        format!("# xnodes: {nx}"),
        format!("# ynodes: {ny}"),
        "# znodes: 1".into(),
        format!("# xstepsize: {}", fmt_f64(mask.dx)),
        format!("# ystepsize: {}", fmt_f64(mask.dy)),
        format!("# zstepsize: {}", fmt_f64(mask.dz)),
        "# End: Header".into(),
        "# Begin: Data Text".into(),
    ];
    for line in header {
        s.push_str(&line);
        s.push('\n');
    }
    for (c, v) in state.m.iter().enumerate() {
        let v = if mask.active[c] { *v } else { Vec3::ZERO };
        let _ = writeln!(s, "{} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
    }
    s.push_str("# End: Data Text\n# End: Segment\n");
    Ok(s)
}

pub fn write_snapshot(state: &MagnetizationGrid, mask: &GeometryMask, path: &Path) -> Result<()> {
    let text = render_snapshot(state, mask)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text).map_err(|message| Error::Snapshot {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_snapshot(text: &str) -> std::result::Result<Snapshot, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "# OOMMF OVF 2.0" => {}
        _ => return Err("missing `# OOMMF OVF 2.0` signature".into()),
    }
    let mut get = std::collections::HashMap::new();
    let mut time = 0.0;
    let mut offset = 0.0;
    let mut in_data = false;
    let mut values: Vec<Vec3> = Vec::new();
    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if rest.eq_ignore_ascii_case("Begin: Data Text") {
                in_data = true;
                continue;
            }
            if rest.starts_with("Begin: Data") {
                return Err(format!("line {}: only text data blocks are supported", no + 1));
            }
            if rest.eq_ignore_ascii_case("End: Data Text") {
                in_data = false;
                continue;
            }
            if let Some(desc) = rest.strip_prefix("Desc:") {
                if let Some((k, v)) = desc.split_once('=') {
                    let v: f64 = v.trim().parse().map_err(|e| format!("line {}: {e}", no + 1))?;
                    match k.trim() {
                        "time_s" => time = v,
                        "frame_offset_m" => offset = v,
                        _ => {}
                    }
                }
                continue;
            }
            if let Some((k, v)) = rest.split_once(':') {
                get.insert(k.trim().to_ascii_lowercase(), (no + 1, v.trim().to_string()));
            }
            continue;
        }
        if !in_data {
            return Err(format!("line {}: data outside the data block", no + 1));
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        let mut next = || -> std::result::Result<f64, String> {
            it.next()
                .ok_or_else(|| format!("line {}: expected three values", no + 1))?
                .map_err(|e| format!("line {}: {e}", no + 1))
        };
        values.push(Vec3::new(next()?, next()?, next()?));
    }
    let field = |k: &str| -> std::result::Result<&(usize, String), String> {
        get.get(k).ok_or_else(|| format!("header field `{k}` missing"))
    };
    let int = |k: &str| -> std::result::Result<usize, String> {
        let (l, v) = field(k)?;
        v.parse().map_err(|e| format!("line {l}: {k}: {e}"))
    };
    let real = |k: &str| -> std::result::Result<f64, String> {
        let (l, v) = field(k)?;
        v.parse().map_err(|e| format!("line {l}: {k}: {e}"))
    };
    if int("valuedim")? != 3 {
        return Err("valuedim must be 3".into());
    }
    if int("znodes")? != 1 {
        return Err("only single-layer meshes are supported".into());
    }
    let mesh = Mesh {
        nx: int("xnodes")?,
        ny: int("ynodes")?,
        dx: real("xstepsize")?,
        dy: real("ystepsize")?,
        dz: real("zstepsize")?,
    };
    if values.len() != mesh.nx * mesh.ny {
        return Err(format!(
            "expected {} data rows for a {}x{} mesh, found {}",
            mesh.nx * mesh.ny,
            mesh.nx,
            mesh.ny,
            values.len()
        ));
    }
    let active = values.iter().map(|v| *v != Vec3::ZERO).collect();
    Ok(Snapshot {
        mesh,
        state: MagnetizationGrid {
            nx: mesh.nx,
            ny: mesh.ny,
            m: values,
            time,
            frame_offset: offset,
        },
        active,
    })
}
