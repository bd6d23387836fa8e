//! End-to-end Monte Carlo of the readout protocol.
//!
//! A [`ProtocolConfig`] is resolved once into potentials, drive parameters
//! and a detector circuit. Each trial then samples a thermal state, runs the
//! drive and amplification stages and scores the amplified in-phase
//! amplitude with the analytic correct-readout probability.
//!
//! Trial `i` draws from ChaCha8 stream `i` keyed by the master seed, so any
//! trial can be reproduced alone and results do not depend on the number of
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::DEFAULT_OMEGA;
use crate::detection::{self, DetectionCircuit};
use crate::dynamics::{
    self, AmplificationParams, CoolingScheme, DriveParams, DynamicsError, IntegratorOptions,
    MotionalState, SpinState, Trajectory,
};
use crate::trap_model::{self, ElectrodeLayout, TrapError, TrapPotential, VoltageSolution};
use crate::wire_fields::{self, CircuitGeometry, FieldError, ImperfectionKind, ImperfectionSpec, WireCircuit};

/// Version of the configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Trap(#[from] TrapError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn default_drive_range() -> [f64; 2] {
    [-10e-6, 10e-6]
}
fn default_amp_range() -> [f64; 2] {
    [-100e-6, 100e-6]
}

/// Source of the axial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrapConfig {
    /// Fit electrode voltages and expand over separate drive and
    /// amplification ranges.
    Optimized {
        #[serde(default)]
        layout: ElectrodeLayout,
        #[serde(default = "default_drive_range")]
        drive_fit_range: [f64; 2],
        #[serde(default = "default_amp_range")]
        amplification_fit_range: [f64; 2],
    },
    /// Pure quadratic well.
    Harmonic {},
    /// Given normalized coefficients at `c2 = 1 μm⁻²`.
    Normalized { c4: f64, c6: f64 },
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig::Optimized {
            layout: ElectrodeLayout::standard(),
            drive_fit_range: default_drive_range(),
            amplification_fit_range: default_amp_range(),
        }
    }
}

/// Where the spatial shape of `B_x(y)` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldProfileSource {
    /// Taylor coefficients of the configured circuit.
    #[default]
    Circuit,
    /// Strictly linear field, or `drive.field_profile` as given.
    Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    /// Pickup resistance (Ω).
    pub resistance: f64,
    pub d_eff: f64,
    /// Detection time in units of 1/γ.
    pub gamma_t_det: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            resistance: 160e3,
            d_eff: 66e-6,
            gamma_t_det: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoolingConfig {
    /// Cooling mechanism; when absent `t0` must be given.
    pub scheme: Option<CoolingScheme>,
    /// Frequency of the mode the axial motion is cooled against (rad/s).
    pub omega_ref: f64,
    /// Physical duration of the cooling stage (s).
    pub duration: f64,
    /// Initial temperature (K); derived from the scheme when absent.
    pub t0: Option<f64>,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            scheme: Some(CoolingScheme::ParametricSwap),
            omega_ref: 10.0 * DEFAULT_OMEGA,
            duration: 0.5e-6,
            t0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoDemoConfig {
    pub spurious_e_ratio: f64,
    pub echo_rabi: f64,
}

impl Default for EchoDemoConfig {
    fn default() -> Self {
        Self {
            spurious_e_ratio: 1.5,
            echo_rabi: 2.0 * std::f64::consts::PI * 1e6,
        }
    }
}

fn default_sweep() -> Vec<ImperfectionSpec> {
    ImperfectionKind::ALL
        .iter()
        .map(|&kind| ImperfectionSpec {
            kind,
            magnitude: kind.default_magnitude(),
        })
        .collect()
}

/// Every parameter of a run. All fields have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub schema_version: u32,
    /// Target axial angular frequency (rad/s).
    pub omega: f64,
    /// Electronics temperature (K).
    pub t_e: f64,
    pub trap: TrapConfig,
    pub circuit: CircuitGeometry,
    pub field_profile: FieldProfileSource,
    pub drive: DriveParams,
    pub amplification: AmplificationParams,
    pub detection: DetectionConfig,
    pub cooling: CoolingConfig,
    pub integrator: IntegratorOptions,
    pub n_trials: usize,
    pub master_seed: u64,
    pub spin: SpinState,
    /// SNR histogram bin width.
    pub histogram_bin_width: f64,
    /// Spin coherence time the protocol must fit into (s).
    pub coherence_budget: f64,
    /// Imperfection sweep for the `imperfections` command.
    pub imperfections: Vec<ImperfectionSpec>,
    pub echo_demo: EchoDemoConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            omega: DEFAULT_OMEGA,
            t_e: 4.0,
            trap: TrapConfig::default(),
            circuit: CircuitGeometry::default(),
            field_profile: FieldProfileSource::default(),
            drive: DriveParams::default(),
            amplification: AmplificationParams::default(),
            detection: DetectionConfig::default(),
            cooling: CoolingConfig::default(),
            integrator: IntegratorOptions {
                record: false,
                ..Default::default()
            },
            n_trials: 10_000,
            master_seed: 20_240_601,
            spin: SpinState::UP,
            histogram_bin_width: 0.25,
            coherence_budget: 1.0,
            imperfections: default_sweep(),
            echo_demo: EchoDemoConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return bad("omega must be positive");
        }
        if !(self.t_e >= 0.0) {
            return bad("t_e must be non-negative");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if !(self.histogram_bin_width > 0.0) {
            return bad("histogram_bin_width must be positive");
        }
        let d = &self.detection;
        if !(d.resistance > 0.0 && d.d_eff > 0.0 && d.gamma_t_det >= 0.0) {
            return bad("detection resistance and d_eff must be positive");
        }
        if let (Some(scheme), Some(t0)) = (self.cooling.scheme, self.cooling.t0) {
            let derived = dynamics::cooled_temperature(self.t_e, self.omega, self.cooling.omega_ref, scheme)?;
            if (t0 - derived).abs() > 1e-6 * derived.max(1e-300) {
                return Err(PipelineError::Config(format!(
                    "cooling.t0 = {t0} K disagrees with the {scheme:?} scheme ({derived} K); \
                     drop one of them"
                )));
            }
        }
        if self.cooling.scheme.is_none() && self.cooling.t0.is_none() {
            return bad("cooling needs either a scheme or an explicit t0");
        }
        self.circuit.validate()?;
        self.drive.validate()?;
        self.amplification.validate()?;
        Ok(())
    }

    /// Initial temperature implied by the cooling section (K).
    pub fn initial_temperature(&self) -> Result<f64, PipelineError> {
        match (self.cooling.t0, self.cooling.scheme) {
            (Some(t0), _) => Ok(t0),
            (None, Some(s)) => Ok(dynamics::cooled_temperature(
                self.t_e,
                self.omega,
                self.cooling.omega_ref,
                s,
            )?),
            (None, None) => Err(PipelineError::Config(
                "cooling needs either a scheme or an explicit t0".into(),
            )),
        }
    }
}

/// Everything a trial needs, derived once per run.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedProtocol {
    /// Secular frequency of the drive-stage potential, used by every stage.
    pub omega: f64,
    pub drive_potential: TrapPotential,
    pub amplification_potential: TrapPotential,
    pub voltages: Option<VoltageSolution>,
    pub drive: DriveParams,
    pub amplification: AmplificationParams,
    pub detection: DetectionCircuit,
    pub t0: f64,
    pub integrator: IntegratorOptions,
}

pub fn resolve(config: &ProtocolConfig) -> Result<ResolvedProtocol, PipelineError> {
    config.validate()?;
    let (drive_potential, amplification_potential, voltages) = match &config.trap {
        TrapConfig::Optimized {
            layout,
            drive_fit_range,
            amplification_fit_range,
        } => {
            let sol = trap_model::optimize_voltages(
                layout,
                config.omega,
                (drive_fit_range[0], drive_fit_range[1]),
            )?;
            let amp = trap_model::potential_from_voltages(
                layout,
                &sol.voltages,
                (amplification_fit_range[0], amplification_fit_range[1]),
            )?;
            (sol.resulting_potential.clone(), amp, Some(sol))
        }
        TrapConfig::Harmonic {} => {
            let p = TrapPotential::harmonic(config.omega);
            (p.clone(), p, None)
        }
        TrapConfig::Normalized { c4, c6 } => {
            let p = TrapPotential::from_normalized(config.omega, *c4, *c6);
            (p.clone(), p, None)
        }
    };
    let omega = drive_potential.omega;
    if !(omega > 0.0) {
        return Err(PipelineError::Config("trap potential is not confining".into()));
    }

    let mut drive = config.drive;
    if config.field_profile == FieldProfileSource::Circuit {
        let circuit = WireCircuit::new(config.circuit)?;
        let b = wire_fields::gradient_profile(&circuit)?;
        drive.field_profile = if b[0] != 0.0 {
            [b[1] / b[0], b[2] / b[0], b[3] / b[0]]
        } else {
            [0.0; 3]
        };
    }

    let det = &config.detection;
    let circuit = detection::circuit_params(det.resistance, det.d_eff, omega).with_temperature(config.t_e);
    let detection = circuit.with_t_det(det.gamma_t_det / circuit.gamma);

    Ok(ResolvedProtocol {
        omega,
        drive_potential,
        amplification_potential,
        voltages,
        drive,
        amplification: config.amplification,
        detection,
        t0: config.initial_temperature()?,
        integrator: IntegratorOptions {
            frame_omega: Some(omega),
            record: false,
            ..config.integrator
        },
    })
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: u64,
    pub initial: MotionalState,
    pub after_drive: MotionalState,
    /// In-phase amplitude after amplification (m).
    pub a0_amp: f64,
    pub snr: f64,
    pub p_correct: f64,
    /// Outcome of one sampled noise realization.
    pub sampled_correct: bool,
}

fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Run trial `index`.
///
/// The thermal draw is reflected with the spin, so the spin-down trial is
/// the exact mirror image of the spin-up trial with the same index.
pub fn run_trial(
    p: &ResolvedProtocol,
    master_seed: u64,
    index: u64,
    spin: SpinState,
) -> Result<TrialResult, DynamicsError> {
    let mut rng = trial_rng(master_seed, index);
    let s = dynamics::sample_thermal_with(p.t0, p.omega, &mut rng)?;
    let initial = MotionalState::new(spin.sigma() * s.a0, spin.sigma() * s.a90);
    let (after_drive, amplified) = run_stages(p, initial, spin)?;
    let snr = detection::snr(amplified.a0, &p.detection);
    let noise: f64 = StandardNormal.sample(&mut rng);
    Ok(TrialResult {
        index,
        initial,
        after_drive,
        a0_amp: amplified.a0,
        snr,
        p_correct: detection::p_correct(snr, spin),
        sampled_correct: spin.sigma() * (snr + noise) > 0.0,
    })
}

fn run_stages(
    p: &ResolvedProtocol,
    initial: MotionalState,
    spin: SpinState,
) -> Result<(MotionalState, MotionalState), DynamicsError> {
    let d = dynamics::integrate_drive_with(initial, spin, &p.drive_potential, &p.drive, &p.integrator)?;
    let after_drive = d.final_state();
    let a = dynamics::integrate_amplification_with(
        after_drive,
        &p.amplification_potential,
        &p.amplification,
        &p.integrator,
    )?;
    Ok((after_drive, a.final_state()))
}

/// Full drive and amplification trajectory of one initial state.
pub fn trial_trajectory(
    p: &ResolvedProtocol,
    initial: MotionalState,
    spin: SpinState,
) -> Result<(Trajectory, Trajectory), DynamicsError> {
    let opts = IntegratorOptions {
        record: true,
        ..p.integrator
    };
    let d = dynamics::integrate_drive_with(initial, spin, &p.drive_potential, &p.drive, &opts)?;
    let a = dynamics::integrate_amplification_with(
        d.final_state(),
        &p.amplification_potential,
        &p.amplification,
        &opts,
    )?;
    Ok((d, a))
}

/// SNR histogram with bins aligned to multiples of the bin width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(values: &[f64], width: f64) -> Self {
        if values.is_empty() {
            return Self {
                edges: vec![0.0, width],
                counts: vec![0],
            };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = (min / width).floor();
        let hi = (max / width).floor() + 1.0;
        let n = (hi - lo) as usize;
        let edges = (0..=n).map(|k| (lo + k as f64) * width).collect();
        let mut counts = vec![0u64; n];
        for v in values {
            let k = ((v / width).floor() - lo) as usize;
            counts[k.min(n - 1)] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Physical duration of each protocol stage (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub cooling: f64,
    pub drive: f64,
    pub amplification: f64,
    pub detection: f64,
    pub total: f64,
    pub coherence_budget: f64,
    pub exceeds_budget: bool,
}

/// Stage durations implied by `config`.
pub fn timing_budget(config: &ProtocolConfig) -> TimingBudget {
    let det = &config.detection;
    let l_eff = crate::constants::ELECTRON_MASS * det.d_eff * det.d_eff
        / crate::constants::ELEMENTARY_CHARGE.powi(2);
    let gamma = det.resistance / l_eff;
    let detection = if det.gamma_t_det == 0.0 { 0.0 } else { det.gamma_t_det / gamma };
    let cooling = config.cooling.duration;
    let drive = config.drive.t_drive;
    let amplification = config.amplification.t_amp;
    let total = cooling + drive + amplification + detection;
    TimingBudget {
        cooling,
        drive,
        amplification,
        detection,
        total,
        coherence_budget: config.coherence_budget,
        exceeds_budget: total > config.coherence_budget,
    }
}

/// Aggregate outcome of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    /// Fraction of trials read correctly with one sampled noise draw each.
    pub fidelity_sampled: f64,
    /// Histogram of `σ·SNR`, the SNR with the spin-correct sign positive.
    pub histogram: Histogram,
    pub fraction_snr_below_1: f64,
    pub fraction_snr_below_0: f64,
    pub mean_a0_amp: f64,
    pub timing: TimingBudget,
    pub n_trials: usize,
    pub n_failed: usize,
    /// First few failure messages, by trial index.
    pub failures: Vec<String>,
    pub seed: u64,
    pub spin: SpinState,
    pub omega: f64,
    pub t0: f64,
    pub gamma_t_det: f64,
}

/// Resolve `config` and run its Monte Carlo.
pub fn run_protocol(config: &ProtocolConfig) -> Result<FidelityReport, PipelineError> {
    let p = resolve(config)?;
    let (report, _) = run_resolved(&p, config, config.n_trials, config.master_seed, config.spin);
    Ok(report)
}

/// Run `n_trials` trials of an already resolved protocol.
pub fn run_resolved(
    p: &ResolvedProtocol,
    config: &ProtocolConfig,
    n_trials: usize,
    seed: u64,
    spin: SpinState,
) -> (FidelityReport, Vec<TrialResult>) {
    run_range(p, config, 0..n_trials as u64, seed, spin)
}

/// Run the trials with indices in `range`.
pub fn run_range(
    p: &ResolvedProtocol,
    config: &ProtocolConfig,
    range: std::ops::Range<u64>,
    seed: u64,
    spin: SpinState,
) -> (FidelityReport, Vec<TrialResult>) {
    let outcomes: Vec<Result<TrialResult, DynamicsError>> = range
        .clone()
        .into_par_iter()
        .map(|i| run_trial(p, seed, i, spin))
        .collect();
    let mut trials = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut n_failed = 0;
    for (i, o) in range.zip(outcomes) {
        match o {
            Ok(t) => trials.push(t),
            Err(e) => {
                n_failed += 1;
                if failures.len() < 10 {
                    failures.push(format!("trial {i}: {e}"));
                }
            }
        }
    }
    let report = aggregate(p, config, &trials, n_failed, failures, seed, spin);
    (report, trials)
}

fn aggregate(
    p: &ResolvedProtocol,
    config: &ProtocolConfig,
    trials: &[TrialResult],
    n_failed: usize,
    failures: Vec<String>,
    seed: u64,
    spin: SpinState,
) -> FidelityReport {
    let n = trials.len();
    let nf = n.max(1) as f64;
    let mean = trials.iter().map(|t| t.p_correct).sum::<f64>() / nf;
    let var = if n > 1 {
        trials.iter().map(|t| (t.p_correct - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let aligned: Vec<f64> = trials.iter().map(|t| spin.sigma() * t.snr).collect();
    let below = |x: f64| aligned.iter().filter(|s| **s < x).count() as f64 / nf;
    FidelityReport {
        fidelity: mean,
        fidelity_stderr: (var / nf).sqrt(),
        fidelity_sampled: trials.iter().filter(|t| t.sampled_correct).count() as f64 / nf,
        histogram: Histogram::build(&aligned, config.histogram_bin_width),
        fraction_snr_below_1: below(1.0),
        fraction_snr_below_0: below(0.0),
        mean_a0_amp: trials.iter().map(|t| t.a0_amp).sum::<f64>() / nf,
        timing: timing_budget(config),
        n_trials: n,
        n_failed,
        failures,
        seed,
        spin,
        omega: p.omega,
        t0: p.t0,
        gamma_t_det: p.detection.damping_product(),
    }
}

/// CSV table of the SNR histogram with a cumulative fraction column.
///
/// Bin edges sit on multiples of the bin width, so the cumulative fraction
/// at the edges 0 and 1 gives the wrong-sign and below-unity fractions.
pub fn snr_histogram(report: &FidelityReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_lo", "bin_hi", "count", "cumulative_fraction"])
        .expect("in-memory write");
    let total = report.histogram.total().max(1) as f64;
    let mut cum = 0u64;
    for (k, c) in report.histogram.counts.iter().enumerate() {
        cum += c;
        w.write_record(&[
            format!("{}", report.histogram.edges[k]),
            format!("{}", report.histogram.edges[k + 1]),
            c.to_string(),
            format!("{}", cum as f64 / total),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_conserves_counts_and_aligns_edges() {
        let v = [-0.3, 0.0, 0.99, 1.0, 6.1];
        let h = Histogram::build(&v, 0.25);
        assert_eq!(h.total(), 5);
        assert_eq!(h.edges[0], -0.5);
        assert!(h.edges.contains(&0.0) && h.edges.contains(&1.0));
        assert!(*h.edges.last().unwrap() > 6.1);
        let one = Histogram::build(&[2.0], 0.25);
        assert_eq!(one.counts, vec![1]);
    }

    #[test]
    fn trial_rng_streams_differ() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 0).random();
        let b: u64 = trial_rng(1, 1).random();
        let c: u64 = trial_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn inconsistent_cooling_is_rejected() {
        let mut c = ProtocolConfig::default();
        c.cooling.t0 = Some(1.0);
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        c.cooling.t0 = Some(0.4);
        c.validate().unwrap();
    }

    #[test]
    fn default_config_round_trips_through_json() {
        let c = ProtocolConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        let back: ProtocolConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
    }
}
