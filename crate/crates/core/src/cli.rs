//! Command line front end.
//!
//! Every command reads one JSON [`ProtocolConfig`] (defaults when no file is
//! given), writes `manifest.json` and `report.json` plus command-specific
//! CSV files into the output directory, and reports failures as a JSON
//! object on stderr.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::constants::MICRON;
use crate::dynamics::{self, DriveParams, EchoReport, MotionalState, SpinState, TrajectoryPoint};
use crate::pipeline::{self, FidelityReport, PipelineError, ProtocolConfig, TimingBudget, TrapConfig};
use crate::trap_model::{self, Normalized, ShiftMethod, VoltageSolution};
use crate::wire_fields::{self, CircuitGeometry, ImperfectionResult, ImperfectionSpec, WireCircuit};

/// Environment variable that sets the number of worker threads.
pub const THREADS_ENV: &str = "SPINREAD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spinread", version, about = "Trapped-electron spin readout simulator")]
pub struct Cli {
    /// Protocol configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gradients, shielding and the quadratic electric term of the circuit.
    Fields,
    /// Residual field and spurious force for each imperfection.
    Imperfections {
        /// JSON list of {"kind", "magnitude"}; defaults to the config sweep.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Fit and quantize the DC electrode voltages.
    Optimize,
    /// Monte Carlo readout fidelity.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// +1 or -1.
        #[arg(long, allow_negative_numbers = true, value_parser = parse_spin)]
        spin: Option<SpinState>,
        /// Also write every trial to trials.csv.
        #[arg(long)]
        write_trials: bool,
        /// Also write the trajectory of trial 0 to trajectory.csv.
        #[arg(long)]
        trajectory: bool,
    },
    /// Suppression of a spin-independent force by the echo sequence.
    EchoDemo,
}

fn parse_spin(s: &str) -> Result<SpinState, String> {
    match s.trim() {
        "+1" | "1" => Ok(SpinState::UP),
        "-1" => Ok(SpinState::DOWN),
        other => Err(format!("spin must be +1 or -1, got `{other}`")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
        field: Option<String>,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let (kind, extra) = match self {
            CliError::Io { path, .. } => ("io", serde_json::json!({ "path": path })),
            CliError::ConfigParse {
                path,
                line,
                column,
                field,
                ..
            } => (
                "config_parse",
                serde_json::json!({ "path": path, "line": line, "column": column, "field": field }),
            ),
            CliError::Pipeline(e) => (
                match e {
                    PipelineError::Config(_) => "config",
                    PipelineError::Trap(trap_model::TrapError::Infeasible { .. }) => "infeasible",
                    PipelineError::Trap(_) => "trap",
                    PipelineError::Field(_) => "field",
                    PipelineError::Dynamics(_) => "dynamics",
                },
                serde_json::json!({}),
            ),
        };
        let mut obj = serde_json::json!({ "kind": kind, "message": self.to_string() });
        if let (Some(o), Some(x)) = (obj.as_object_mut(), extra.as_object()) {
            for (k, v) in x {
                o.insert(k.clone(), v.clone());
            }
        }
        if let CliError::Pipeline(PipelineError::Trap(trap_model::TrapError::Infeasible {
            electrode, ..
        })) = self
        {
            obj["electrode"] = serde_json::json!(electrode);
        }
        serde_json::json!({ "error": obj })
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Name quoted in a serde message such as "missing field `x`".
fn quoted_name(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

/// Parse a configuration document, attributing errors to `origin`.
pub fn parse_config(text: &str, origin: &str) -> Result<ProtocolConfig, CliError> {
    parse_json(text, origin)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(k) => full[..k].to_string(),
            None => full.clone(),
        };
        CliError::ConfigParse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            field: quoted_name(&message),
            message,
        }
    })
}

pub fn load_config(path: Option<&Path>) -> Result<ProtocolConfig, CliError> {
    match path {
        None => Ok(ProtocolConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

/// Written next to every output so the run can be repeated.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config: ProtocolConfig,
    pub output_dir: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub created_unix: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldReport {
    pub analytic_gradient: f64,
    pub line_gradient: f64,
    pub subdivided_gradient: f64,
    pub shielded_gradient: f64,
    pub shielding_factor: f64,
    pub subdivision: [usize; 2],
    /// `B_x` Taylor coefficients b1..b4 of the subdivided circuit (T/mᵏ).
    pub field_profile: [f64; 4],
    pub b_center: f64,
    pub crossing_voltage: f64,
    pub eta: f64,
}

pub fn cmd_fields(cfg: &ProtocolConfig) -> Result<FieldReport, CliError> {
    let g = cfg.circuit;
    let sub = WireCircuit::new(g).map_err(PipelineError::from)?;
    let line = WireCircuit::new(CircuitGeometry {
        subdivision: [1, 1],
        ..g
    })
    .map_err(PipelineError::from)?;
    let f = |r: Result<f64, wire_fields::FieldError>| r.map_err(PipelineError::from);
    let subdivided = f(wire_fields::field_gradient(&sub))?;
    Ok(FieldReport {
        analytic_gradient: wire_fields::analytic_gradient(&sub),
        line_gradient: f(wire_fields::field_gradient(&line))?,
        subdivided_gradient: subdivided,
        shielded_gradient: subdivided * g.shielding_factor,
        shielding_factor: g.shielding_factor,
        subdivision: g.subdivision,
        field_profile: wire_fields::gradient_profile(&sub).map_err(PipelineError::from)?,
        b_center: f(wire_fields::field_magnitude(&sub, sub.trap_center()))?,
        crossing_voltage: g.crossing_voltage,
        eta: wire_fields::eta_quadratic(&sub, g.crossing_voltage, cfg.omega),
    })
}

pub fn cmd_imperfections(
    cfg: &ProtocolConfig,
    sweep: &[ImperfectionSpec],
) -> Result<Vec<ImperfectionResult>, CliError> {
    let circuit = WireCircuit::new(cfg.circuit).map_err(PipelineError::from)?;
    sweep
        .iter()
        .map(|s| wire_fields::imperfection_analysis(&circuit, s).map_err(|e| PipelineError::from(e).into()))
        .collect()
}

/// Table with columns kind, magnitude, e_ratio, B in μT.
pub fn imperfection_csv(rows: &[ImperfectionResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "magnitude", "e_ratio", "b_center_uT"])
        .expect("in-memory write");
    for r in rows {
        w.write_record(&[
            r.kind.name().to_string(),
            format!("{}", r.magnitude),
            format!("{}", r.e_ratio),
            format!("{}", r.b_center * 1e6),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftSample {
    pub amplitude: f64,
    pub closed_form: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub target_omega: f64,
    pub dac_step: f64,
    pub solution: VoltageSolution,
    pub drive_normalized: Normalized,
    pub amplification_normalized: Normalized,
    /// Δω/ω from 0 to 10 μm in 0.5 μm steps, drive-range coefficients.
    pub frequency_shift: Vec<ShiftSample>,
    /// Largest |Δω/ω| (numeric period) for amplitudes up to 3 μm.
    pub max_shift_below_3um: f64,
}

pub fn cmd_optimize(cfg: &ProtocolConfig) -> Result<OptimizeReport, CliError> {
    let (layout, drive_range, amp_range) = match &cfg.trap {
        TrapConfig::Optimized {
            layout,
            drive_fit_range,
            amplification_fit_range,
        } => (layout.clone(), *drive_fit_range, *amplification_fit_range),
        _ => {
            return Err(PipelineError::Config(
                "optimize needs trap.kind = \"optimized\"".into(),
            )
            .into())
        }
    };
    let sol = trap_model::optimize_voltages(&layout, cfg.omega, (drive_range[0], drive_range[1]))
        .map_err(PipelineError::from)?;
    let amp = trap_model::potential_from_voltages(&layout, &sol.voltages, (amp_range[0], amp_range[1]))
        .map_err(PipelineError::from)?;
    let pot = &sol.resulting_potential;
    let confining = pot.omega > 0.0;
    let frequency_shift = (0..=20)
        .map(|k| {
            let a = 0.5 * MICRON * k as f64;
            ShiftSample {
                amplitude: a,
                closed_form: if confining { trap_model::frequency_shift(pot, a, ShiftMethod::ClosedForm) } else { 0.0 },
                numeric: if confining { trap_model::frequency_shift(pot, a, ShiftMethod::NumericPeriod) } else { 0.0 },
            }
        })
        .collect();
    let max_shift_below_3um = if confining {
        (0..=30)
            .map(|k| trap_model::frequency_shift(pot, 0.1 * MICRON * k as f64, ShiftMethod::NumericPeriod).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(OptimizeReport {
        target_omega: cfg.omega,
        dac_step: layout.dac_step(),
        drive_normalized: pot.normalized(),
        amplification_normalized: amp.normalized(),
        solution: sol,
        frequency_shift,
        max_shift_below_3um,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    #[serde(flatten)]
    pub fidelity: FidelityReport,
    pub drive_normalized: Normalized,
    pub amplification_normalized: Normalized,
    pub gradient: f64,
    pub field_profile: [f64; 3],
    pub sigma_thermal: f64,
}

pub fn cmd_simulate(cfg: &ProtocolConfig) -> Result<(SimulateReport, Vec<pipeline::TrialResult>), CliError> {
    let p = pipeline::resolve(cfg)?;
    let (fidelity, trials) = pipeline::run_resolved(&p, cfg, cfg.n_trials, cfg.master_seed, cfg.spin);
    Ok((
        SimulateReport {
            drive_normalized: p.drive_potential.normalized(),
            amplification_normalized: p.amplification_potential.normalized(),
            gradient: p.drive.gradient,
            field_profile: p.drive.field_profile,
            sigma_thermal: dynamics::thermal_sigma(p.t0, p.omega),
            fidelity,
        },
        trials,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct EchoDemoReport {
    #[serde(flatten)]
    pub echo: EchoReport,
    pub spurious_e_ratio: f64,
    pub echo_rabi: f64,
    pub t_drive: f64,
}

pub fn cmd_echo_demo(cfg: &ProtocolConfig) -> Result<EchoDemoReport, CliError> {
    let drive = DriveParams {
        spurious_e_ratio: cfg.echo_demo.spurious_e_ratio,
        echo_rabi: cfg.echo_demo.echo_rabi,
        ..cfg.drive
    };
    let pot = trap_model::TrapPotential::harmonic(cfg.omega);
    let echo = dynamics::spin_echo_suppression(&drive, &pot).map_err(PipelineError::from)?;
    Ok(EchoDemoReport {
        echo,
        spurious_e_ratio: drive.spurious_e_ratio,
        echo_rabi: drive.echo_rabi,
        t_drive: drive.t_drive,
    })
}

/// Timing of the configured protocol, included in simulate reports.
pub fn cmd_timing(cfg: &ProtocolConfig) -> TimingBudget {
    pipeline::timing_budget(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, contents).map_err(|e| io_err(&p, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    write_file(dir, name, &s)
}

fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "a0", "a90"]).expect("in-memory write");
    for p in points {
        w.write_record(&[format!("{}", p.t), format!("{}", p.a0), format!("{}", p.a90)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn trials_csv(trials: &[pipeline::TrialResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "a0_init", "a90_init", "a0_drive", "a90_drive", "a0_amp", "snr", "p_correct"])
        .expect("in-memory write");
    for t in trials {
        w.write_record(&[
            t.index.to_string(),
            format!("{}", t.initial.a0),
            format!("{}", t.initial.a90),
            format!("{}", t.after_drive.a0),
            format!("{}", t.after_drive.a90),
            format!("{}", t.a0_amp),
            format!("{}", t.snr),
            format!("{}", t.p_correct),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Configure the global worker pool from [`THREADS_ENV`].
pub fn init_threads() {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.clone();
    let name = match &cli.command {
        Command::Fields => "fields",
        Command::Imperfections { .. } => "imperfections",
        Command::Optimize => "optimize",
        Command::Simulate { .. } => "simulate",
        Command::EchoDemo => "echo-demo",
    };
    if let Command::Simulate {
        trials, seed, spin, ..
    } = &cli.command
    {
        if let Some(n) = trials {
            cfg.n_trials = *n;
        }
        if let Some(s) = seed {
            cfg.master_seed = *s;
        }
        if let Some(s) = spin {
            cfg.spin = *s;
        }
    }
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    match &cli.command {
        Command::Fields => write_json(&out, "report.json", &cmd_fields(&cfg)?)?,
        Command::Imperfections { sweep } => {
            if let Some(p) = sweep {
                let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
                cfg.imperfections = parse_json(&text, &p.display().to_string())?;
            }
            let rows = cmd_imperfections(&cfg, &cfg.imperfections)?;
            write_file(&out, "imperfections.csv", &imperfection_csv(&rows))?;
            write_json(&out, "report.json", &rows)?;
        }
        Command::Optimize => {
            let r = cmd_optimize(&cfg)?;
            write_json(&out, "voltages.json", &r.solution)?;
            write_json(&out, "report.json", &r)?;
        }
        Command::Simulate {
            write_trials,
            trajectory,
            ..
        } => {
            let (report, trials) = cmd_simulate(&cfg)?;
            write_json(&out, "report.json", &report)?;
            write_file(&out, "histogram.csv", &pipeline::snr_histogram(&report.fidelity))?;
            if *write_trials {
                write_file(&out, "trials.csv", &trials_csv(&trials))?;
            }
            if *trajectory {
                let p = pipeline::resolve(&cfg)?;
                let initial = trials.first().map(|t| t.initial).unwrap_or(MotionalState::default());
                let (d, a) = pipeline::trial_trajectory(&p, initial, cfg.spin).map_err(PipelineError::from)?;
                let t_drive = d.points.last().map(|p| p.t).unwrap_or(0.0);
                let mut pts = d.points.clone();
                pts.extend(a.points.iter().skip(1).map(|q| TrajectoryPoint { t: q.t + t_drive, ..*q }));
                let tr = dynamics::Trajectory { points: pts }.decimated(dynamics::MAX_TRAJECTORY_ROWS);
                write_file(&out, "trajectory.csv", &trajectory_csv(&tr.points))?;
            }
        }
        Command::EchoDemo => write_json(&out, "report.json", &cmd_echo_demo(&cfg)?)?,
    }

    let manifest = RunManifest {
        command: name.to_string(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        config: cfg.clone(),
        output_dir: out.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.master_seed,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&out, "manifest.json", &manifest)
}
