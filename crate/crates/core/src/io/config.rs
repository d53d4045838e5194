//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Missing keys keep their
//! defaults, unknown keys are errors, and every effective value can be
//! echoed back with [`RunConfig::manifest`] in a form this parser accepts.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::RunConfig;

type Setter = fn(&mut RunConfig, &str) -> std::result::Result<(), String>;
type Getter = fn(&RunConfig) -> String;

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn list<T>(v: &str, f: fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

macro_rules! key {
    ($name:literal, real, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = real(v)?; Ok(()) }) as Setter,
         (|c: &RunConfig| format!("{:?}", c.$($path)+)) as Getter)
    };
    ($name:literal, count, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = count(v)?; Ok(()) }) as Setter,
         (|c: &RunConfig| c.$($path)+.to_string()) as Getter)
    };
    ($name:literal, flag, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = flag(v)?; Ok(()) }) as Setter,
         (|c: &RunConfig| c.$($path)+.to_string()) as Getter)
    };
    ($name:literal, parsed, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = v.parse()?; Ok(()) }) as Setter,
         (|c: &RunConfig| c.$($path)+.to_string()) as Getter)
    };
    ($name:literal, reals, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = list(v, real)?; Ok(()) }) as Setter,
         (|c: &RunConfig| c.$($path)+.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")) as Getter)
    };
    ($name:literal, counts, $($path:tt)+) => {
        ($name, (|c: &mut RunConfig, v: &str| { c.$($path)+ = list(v, count)?; Ok(()) }) as Setter,
         (|c: &RunConfig| join(&c.$($path)+)) as Getter)
    };
}

/// Every accepted key with its parser and printer.
const KEYS: &[(&str, Setter, Getter)] = &[
    key!("a_ex", real, scenario.params.a_ex),
    key!("k_u", real, scenario.params.k_u),
    key!("m_s", real, scenario.params.m_s),
    key!("dmi_d", real, scenario.params.dmi_d),
    key!("alpha", real, scenario.params.alpha),
    key!("beta", real, scenario.params.beta),
    key!("theta_sh", real, scenario.params.theta_sh),
    key!("t_film", real, scenario.params.t_film),
    key!("gamma", real, scenario.params.gamma),
    key!("use_thin_film_demag", flag, scenario.params.use_thin_film_demag),
    key!("nx", count, scenario.mesh.nx),
    key!("ny", count, scenario.mesh.ny),
    key!("dx", real, scenario.mesh.dx),
    key!("dy", real, scenario.mesh.dy),
    key!("dz", real, scenario.mesh.dz),
    key!("notch_enabled", flag, scenario.notch_enabled),
    key!("notch_center_x", real, scenario.notch.center_x),
    key!("notch_length", real, scenario.notch.length),
    key!("notch_depth", real, scenario.notch.depth),
    key!("notch_side", parsed, scenario.notch.side),
    key!("n_skyrmions", count, scenario.layout.n_skyrmions),
    key!("skyrmion_spacing", real, scenario.layout.skyrmion_spacing),
    key!("dwp_offset", real, scenario.layout.dwp_offset),
    key!("dwp_width", real, scenario.layout.dwp_width),
    key!("skyrmion_gap", real, scenario.layout.skyrmion_gap),
    key!("seed_radius", real, scenario.layout.seed_radius),
    key!("j_hm", real, j_hm),
    key!("current_direction", parsed, scenario.direction),
    key!("pulse_length", real, scenario.pulse_length),
    key!("post_pulse", real, scenario.post_pulse),
    key!("observer_interval", real, scenario.observer_interval),
    key!("snapshot_every", real, snapshot_every),
    key!("stop_after_dwp_loss", real, scenario.stop_after_dwp_loss),
    (
        "integrator",
        |c: &mut RunConfig, v: &str| {
            c.scenario.integrator.method = v.to_string();
            Ok(())
        },
        |c: &RunConfig| c.scenario.integrator.method.clone(),
    ),
    key!("dt_fixed", real, scenario.integrator.dt_fixed),
    key!("tol_rel", real, scenario.integrator.tol_rel),
    key!("dt_min", real, scenario.integrator.dt_min),
    key!("dt_max", real, scenario.integrator.dt_max),
    key!("torque_tol", real, scenario.relax.torque_tol),
    key!("relax_max_steps", count, scenario.relax.max_steps),
    key!("relax_tol_rel", real, scenario.relax.tol_rel),
    key!("relax_check_every", count, scenario.relax.check_every),
    key!("j_list", reals, j_list),
    key!("n_list", counts, n_list),
    key!("j_limit", real, j_limit),
    key!("n_max", count, n_max),
    key!("workers", count, workers),
    key!("velocity_j_list", reals, velocity_j_list),
    key!("velocity_window", real, velocity_window),
    key!("gate_lanes", reals, gate_lanes),
    key!("gate_j", real, gate_j),
    (
        "terms",
        |c: &mut RunConfig, v: &str| {
            c.scenario.terms = list(v, |s| Ok(s.to_string()))?;
            Ok(())
        },
        |c: &RunConfig| c.scenario.terms.join(","),
    ),
];

/// Keys whose violation is reported against another key's line.
fn validation_key(field: &str) -> &str {
    match field {
        "notch" => "notch_center_x",
        "method" => "integrator",
        "max_steps" => "relax_max_steps",
        other => other,
    }
}

impl RunConfig {
    /// Parses configuration text. Errors carry the 1-based line number; an
    /// invariant violation is reported at the line that set the field, or
    /// line 0 when the offending value is a default.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut lines: HashMap<&str, usize> = HashMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let (name, set, _) = KEYS.iter().find(|(n, _, _)| *n == k).ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("unknown key `{k}`"),
            })?;
            if let Some(prev) = lines.insert(name, line_no) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("`{k}` already set on line {prev}"),
                });
            }
            set(&mut cfg, v).map_err(|m| Error::Config {
                line: line_no,
                message: format!("{k}: {m}"),
            })?;
        }
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::Config {
                line: lines.get(validation_key(field)).copied().unwrap_or(0),
                message: format!("{field}: {reason}"),
            },
            Error::UnknownStrategy { kind, name, known } => Error::Config {
                line: lines
                    .get(if kind == "integrator" { "integrator" } else { "terms" })
                    .copied()
                    .unwrap_or(0),
                message: format!("unknown {kind} `{name}` (known: {known})"),
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every effective value as `key = value` lines.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        for (k, _, get) in KEYS {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&get(self));
            s.push('\n');
        }
        s
    }

    /// Stable 64-bit FNV-1a digest of the manifest.
    pub fn hash(&self) -> u64 {
        fnv1a(self.manifest().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips() {
        let mut c = RunConfig::default();
        c.scenario.params.dmi_d = 3.1e-3;
        c.j_list = vec![1e10, 2.5e10];
        c.scenario.integrator.method = "rk4".into();
        let back = RunConfig::parse(&c.manifest()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
    }

    #[test]
    fn comments_and_defaults() {
        let c = RunConfig::parse("# header\n\nalpha = 0.2 # inline\n").unwrap();
        assert_eq!(c.scenario.params.alpha, 0.2);
        assert_eq!(c.scenario.params.beta, MaterialDefaults::BETA);
    }

    struct MaterialDefaults;
    impl MaterialDefaults {
        const BETA: f64 = 0.1;
    }

    fn line_of(text: &str) -> usize {
        match RunConfig::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(line_of("alpha = 0.3\nbogus = 1\n"), 2);
        assert_eq!(line_of("alpha = 0.3\n\nalpha = 0.2\n"), 3);
        assert_eq!(line_of("nx = ten\n"), 1);
        assert_eq!(line_of("just words\n"), 1);
        assert_eq!(line_of("# c\nalpha = -1\n"), 2);
        assert_eq!(line_of("integrator = euler\n"), 1);
        assert_eq!(line_of("\nterms = exchange,demag\n"), 2);
        assert_eq!(line_of("t_film = 0\n"), 1);
        assert_eq!(line_of("notch_side = middle\n"), 1);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
