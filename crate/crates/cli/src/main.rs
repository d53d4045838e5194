use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use racetrack::analysis::census;
use racetrack::dynamics::Observer;
use racetrack::experiments::{
    majority_gate, prepare_scene, relaxed_free_skyrmion, run_scenario, sweep_phase, sweep_velocity, RunConfig,
    SweepOptions,
};
use racetrack::io::{tables, write_snapshot, CsvObserver, SnapshotObserver};
use racetrack::thiele::{predict_guided_velocity, predict_velocity, skyrmion_hall_angle, stt_force, ThieleParams};
use racetrack::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "racetrack", version, about = "Skyrmion and domain-wall-pair racetrack simulator")]
struct Cli {
    /// key = value configuration file, or `default` for the built-in values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Heavy-metal current density, A/m^2 (overrides j_hm / gate_j).
    #[arg(long, global = true, value_name = "A_per_m2")]
    current: Option<f64>,
    /// Number of skyrmions in the scene (overrides n_skyrmions).
    #[arg(long, global = true, value_name = "N")]
    skyrmions: Option<usize>,
    /// Snapshot period in picoseconds (overrides snapshot_every).
    #[arg(long, global = true, value_name = "PS")]
    snapshot_every: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seed and relax a scene, write its snapshot.
    Relax,
    /// Run one pulse scenario and classify it.
    Run,
    /// Sweep the (j, n) grid from j_list and n_list.
    SweepPhase,
    /// Skyrmion and DWP drift speeds with the Thiele prediction.
    SweepVelocity,
    /// Majority gate: one row given by --inputs, or the full truth table.
    Gate {
        /// Three bits a, b, bias, e.g. `110`.
        #[arg(long, value_name = "ABbias")]
        inputs: Option<String>,
    },
    /// Print the rigid-texture velocity prediction.
    Thiele {
        /// Skyrmion diameter, m. Measured from a relaxed skyrmion when omitted.
        #[arg(long)]
        diameter: Option<f64>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match cli.config.as_deref() {
        None | Some("default") => RunConfig::default(),
        Some(p) => RunConfig::read(Path::new(p)).map_err(|e| match e {
            Error::Io { .. } => Error::Config {
                line: 0,
                message: format!("cannot read config: {e}"),
            },
            e => e,
        })?,
    };
    if let Some(j) = cli.current {
        cfg.j_hm = j;
        cfg.gate_j = j;
    }
    if let Some(n) = cli.skyrmions {
        cfg.scenario.layout.n_skyrmions = n;
    }
    if let Some(ps) = cli.snapshot_every {
        cfg.snapshot_every = ps * 1e-12;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let path = cli.out.join("config.txt");
    let text = format!("# config_hash = {:016x}\n{}", cfg.hash(), cfg.manifest());
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn parse_bits(s: &str) -> Result<[bool; 3]> {
    let bits: Vec<bool> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(()),
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter {
            field: "inputs",
            reason: format!("expected three bits such as `110`, got `{s}`"),
        })?;
    match bits[..] {
        [a, b, bias] => Ok([a, b, bias]),
        _ => Err(Error::InvalidParameter {
            field: "inputs",
            reason: format!("expected three bits such as `110`, got `{s}`"),
        }),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let sc = &cfg.scenario;
    let out = &cli.out;
    match &cli.command {
        Command::Relax => {
            prepare_out(cli, &cfg)?;
            let n = sc.layout.n_skyrmions;
            let (state, rep) = prepare_scene(sc, n)?;
            write_snapshot(&state, &sc.mask(true)?, &out.join("m_relaxed.ovf"))?;
            println!(
                "converged={} max_torque={:.3e} Q={:.4} skyrmions={} dwp={}",
                rep.relax.converged,
                rep.relax.max_torque,
                rep.census.q_total,
                rep.census.skyrmions.len(),
                rep.census.dwp.is_some()
            );
        }
        Command::Run => {
            prepare_out(cli, &cfg)?;
            let n = sc.layout.n_skyrmions;
            let (state, _) = prepare_scene(sc, n)?;
            let mask = sc.mask(true)?;
            let mut csv = CsvObserver::create(&out.join("frames.csv"), &mask)?;
            let mut snaps = if cfg.snapshot_every > 0.0 {
                Some(SnapshotObserver::new(&out.join("snapshots"), &mask, cfg.snapshot_every)?)
            } else {
                None
            };
            let mut obs: Vec<&mut dyn Observer> = vec![&mut csv];
            if let Some(s) = snaps.as_mut() {
                obs.push(s);
            }
            let run = run_scenario(sc, &state, cfg.j_hm, n, &mut obs)?;
            tables::write_outcomes(&out.join("outcome.csv"), std::slice::from_ref(&run.record))?;
            let r = &run.record;
            println!(
                "outcome={} dwp_fate={} final_q={:.4} passed={} lost={} remaining={}",
                r.outcome, r.dwp_fate, r.final_q, r.skyrmions_passed, r.skyrmions_lost, r.skyrmions_remaining
            );
            if !r.note.is_empty() {
                println!("note: {}", r.note);
            }
        }
        Command::SweepPhase => {
            let opts = SweepOptions::from_config(&cfg, Some(out.clone()));
            prepare_out(cli, &cfg)?;
            let result = sweep_phase(&cfg, &cfg.j_list, &cfg.n_list, &opts);
            let entries = match result {
                Ok(e) => e,
                Err(Error::Monotonicity(m)) => {
                    let rows = tables::read_phase_rows(&out.join("phase.csv"))?;
                    tables::write_plotdata(&out.join("plotdata.csv"), &rows)?;
                    return Err(Error::Monotonicity(m));
                }
                Err(e) => return Err(e),
            };
            tables::write_phase_table(&out.join("phase_sorted.csv"), &entries)?;
            tables::write_plotdata(&out.join("plotdata.csv"), &entries)?;
            for e in &entries {
                println!("j={:e} n={} outcome={}", e.j_hm, e.n_skyrmions, e.outcome);
            }
        }
        Command::SweepVelocity => {
            prepare_out(cli, &cfg)?;
            let rows = sweep_velocity(&cfg, &cfg.velocity_j_list)?;
            tables::write_velocity_table(&out.join("velocity.csv"), &rows)?;
            tables::write_velocity_plotdata(&out.join("velocity_plotdata.csv"), &rows)?;
            for r in &rows {
                println!(
                    "j={:e} v_sk={:.2} v_dwp={:.2} v_thiele={:.2}{}",
                    r.j_hm,
                    r.v_sk,
                    r.v_dwp,
                    r.v_thiele,
                    r.flag.as_deref().map(|f| format!(" flag={f}")).unwrap_or_default()
                );
            }
        }
        Command::Gate { inputs } => {
            let rows: Vec<[bool; 3]> = match inputs {
                Some(s) => vec![parse_bits(s)?],
                None => (0..8u8).map(|k| [k & 4 != 0, k & 2 != 0, k & 1 != 0]).collect(),
            };
            prepare_out(cli, &cfg)?;
            let mut results = Vec::new();
            for [a, b, bias] in rows {
                let g = majority_gate(&cfg, a, b, bias, cfg.gate_j)?;
                println!("a={} b={} bias={} out={}", a as u8, b as u8, bias as u8, g.out() as u8);
                results.push(g);
            }
            tables::write_gate_table(&out.join("gate.csv"), &results)?;
        }
        Command::Thiele { diameter } => {
            let (q, d) = match diameter {
                Some(d) => (-1.0, *d),
                None => {
                    let (s, q, d) = relaxed_free_skyrmion(sc, -1.0)?;
                    let c = census(&s, &sc.mask(false)?, 0.0);
                    let q_sk = c.skyrmions.first().map(|s| s.q).unwrap_or(q);
                    (q_sk.round(), d)
                }
            };
            let tp = ThieleParams::for_skyrmion(&sc.params, q, d)?;
            let f = stt_force(cfg.j_hm, &sc.params, tp.b)?;
            let (vx, vy) = predict_velocity(&tp, f)?;
            println!(
                "q={q} d={d:.4e} D={:.4} j={:e} v_guided={:.3} v_free=({vx:.3}, {vy:.3}) hall_angle_deg={:.2}",
                tp.d_scalar,
                cfg.j_hm,
                predict_guided_velocity(&tp, f)?,
                skyrmion_hall_angle(&tp)?.to_degrees()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
