//! Classical axial dynamics of the electron during readout.
//!
//! Motion is written as `y(t) = a0 cos ωt + a90 sin ωt`, where `a0` is the
//! quadrature in phase with the local oscillator. The spin-dependent force
//! is `-μ_B σ B_x′(y) sin ωt`, which makes `a0` grow for spin up.
//!
//! [`integrate_drive`] and [`integrate_amplification`] evolve the
//! period-averaged equations for the complex amplitude `α = a0 + i a90`.
//! [`lab_frame_oracle`] integrates the unaveraged force law and exists to
//! bound the averaging error.

mod forces;
mod lab;
mod rotating;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BOHR_MAGNETON, BOLTZMANN, ELECTRON_MASS};
use crate::trap_model::TrapPotential;

pub use lab::{lab_frame_oracle, LabFrameResult, LabOptions, LabStage};
pub use rotating::{integrate_amplification, integrate_amplification_with, integrate_drive, integrate_drive_with};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("amplitude {amplitude:.3e} m exceeded the guard at t = {t:.3e} s")]
    Runaway { t: f64, amplitude: f64 },
    #[error("state became non-finite at t = {t:.3e} s")]
    NonFinite { t: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Quadrature amplitudes of the axial mode (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionalState {
    pub a0: f64,
    pub a90: f64,
}

impl MotionalState {
    pub fn new(a0: f64, a90: f64) -> Self {
        Self { a0, a90 }
    }

    pub fn amplitude(&self) -> f64 {
        self.a0.hypot(self.a90)
    }

    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a90.is_finite()
    }
}

impl std::ops::Neg for MotionalState {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a0, -self.a90)
    }
}

/// Spin projection along the gradient field, exactly ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SpinState(i8);

impl SpinState {
    pub const UP: SpinState = SpinState(1);
    pub const DOWN: SpinState = SpinState(-1);

    pub fn sigma(self) -> f64 {
        self.0 as f64
    }

    pub fn flipped(self) -> Self {
        SpinState(-self.0)
    }
}

impl TryFrom<i8> for SpinState {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(Self::UP),
            -1 => Ok(Self::DOWN),
            _ => Err(format!("spin must be +1 or -1, got {v}")),
        }
    }
}

impl From<SpinState> for i8 {
    fn from(s: SpinState) -> i8 {
        s.0
    }
}

fn default_gradient() -> f64 {
    91.0
}
fn default_t_drive() -> f64 {
    20e-6
}

/// Spin-dependent drive stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    /// Shielded field gradient at the trap centre (T/m).
    #[serde(default = "default_gradient")]
    pub gradient: f64,
    #[serde(default = "default_t_drive")]
    pub t_drive: f64,
    /// Spin-independent resonant force relative to the gradient force.
    #[serde(default)]
    pub spurious_e_ratio: f64,
    /// Rabi frequency of the echo sequence (rad/s); 0 disables the echo.
    #[serde(default)]
    pub echo_rabi: f64,
    /// Shape of `B_x(y)`: `[b2/b1, b3/b1, b4/b1]` in m⁻¹, m⁻², m⁻³.
    #[serde(default)]
    pub field_profile: [f64; 3],
    /// Quadratic electric term of the drive wires, modulated with the current.
    #[serde(default)]
    pub eta: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            gradient: default_gradient(),
            t_drive: default_t_drive(),
            spurious_e_ratio: 0.0,
            echo_rabi: 0.0,
            field_profile: [0.0; 3],
            eta: 0.0,
        }
    }
}

impl DriveParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.t_drive > 0.0) || !self.t_drive.is_finite() {
            return Err(DynamicsError::InvalidParameter("t_drive must be positive".into()));
        }
        if !(self.gradient >= 0.0) || !self.gradient.is_finite() {
            return Err(DynamicsError::InvalidParameter("gradient must be non-negative".into()));
        }
        if !(self.echo_rabi >= 0.0) || !self.spurious_e_ratio.is_finite() {
            return Err(DynamicsError::InvalidParameter(
                "echo_rabi must be non-negative and spurious_e_ratio finite".into(),
            ));
        }
        if self.field_profile.iter().any(|c| !c.is_finite()) || !self.eta.is_finite() {
            return Err(DynamicsError::InvalidParameter("non-finite drive parameter".into()));
        }
        Ok(())
    }

    /// Field Taylor coefficients `b1..b4` scaled to `gradient`.
    pub fn field_coefficients(&self) -> [f64; 4] {
        let [s2, s3, s4] = self.field_profile;
        let g = self.gradient;
        [g, g * s2, g * s3, g * s4]
    }
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_t_amp() -> f64 {
    60e-9
}

/// Parametric amplification stage, `V → V(1 + ε sin 2ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplificationParams {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_t_amp")]
    pub t_amp: f64,
}

impl Default for AmplificationParams {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            t_amp: default_t_amp(),
        }
    }
}

impl AmplificationParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(DynamicsError::InvalidParameter("epsilon must be non-negative".into()));
        }
        if !(self.t_amp >= 0.0) || !self.t_amp.is_finite() {
            return Err(DynamicsError::InvalidParameter("t_amp must be non-negative".into()));
        }
        if self.epsilon > 0.3 {
            log::warn!("epsilon = {} is outside the small-modulation regime", self.epsilon);
        }
        Ok(())
    }
}

/// Step control shared by the rotating-frame integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    /// Nominal number of RK4 steps per stage.
    pub steps: usize,
    /// Lower bound on the step size (s).
    pub min_step: f64,
    /// Runaway guard on |α| (m).
    pub amplitude_guard: f64,
    /// Frame frequency; defaults to the potential's ω.
    pub frame_omega: Option<f64>,
    /// Record every step in the returned trajectory.
    pub record: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            steps: 2000,
            min_step: 1e-9,
            amplitude_guard: 1e-3,
            frame_omega: None,
            record: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub a0: f64,
    pub a90: f64,
}

/// Sampled rotating-frame trajectory; the last point is the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

/// Upper bound on rows written for one trajectory.
pub const MAX_TRAJECTORY_ROWS: usize = 10_000;

impl Trajectory {
    pub fn final_state(&self) -> MotionalState {
        let p = self.points.last().expect("trajectory has at least one point");
        MotionalState::new(p.a0, p.a90)
    }

    /// Every k-th point such that at most `max_rows` remain, keeping the end.
    pub fn decimated(&self, max_rows: usize) -> Trajectory {
        let n = self.points.len();
        if n <= max_rows || max_rows < 2 {
            return self.clone();
        }
        let stride = (n - 1).div_ceil(max_rows - 1);
        let mut points: Vec<_> = self.points.iter().step_by(stride).copied().collect();
        if (n - 1) % stride != 0 {
            points.push(self.points[n - 1]);
        }
        Trajectory { points }
    }

    /// Largest fractional drop of `a0` below its running maximum.
    pub fn max_relative_drop(&self) -> f64 {
        let mut peak = f64::NEG_INFINITY;
        let mut worst: f64 = 0.0;
        for p in &self.points {
            peak = peak.max(p.a0);
            if peak > 0.0 {
                worst = worst.max((peak - p.a0) / peak);
            }
        }
        worst
    }
}

/// Cooling mechanism setting the initial temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingScheme {
    /// Mode swap with a mode of frequency `omega_ref`.
    ParametricSwap,
    /// Cool at `omega_ref`, then ramp adiabatically to ω.
    AdiabaticRamp,
}

/// `T0 = T_e ω / ω_ref` (K).
pub fn cooled_temperature(
    t_e: f64,
    omega: f64,
    omega_ref: f64,
    scheme: CoolingScheme,
) -> Result<f64, DynamicsError> {
    let _ = scheme;
    if !(omega > 0.0) {
        return Err(DynamicsError::InvalidParameter("omega must be positive".into()));
    }
    if omega_ref < omega {
        return Err(DynamicsError::InvalidParameter(format!(
            "omega_ref = {omega_ref:.4e} is below omega = {omega:.4e}; this would heat the mode"
        )));
    }
    if !(t_e >= 0.0) {
        return Err(DynamicsError::InvalidParameter("T_e must be non-negative".into()));
    }
    Ok(t_e * omega / omega_ref)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adiabaticity {
    pub adiabatic: bool,
    /// Ramp time over the threshold `0.5 / (2π f)`.
    pub margin: f64,
}

/// Whether a frequency ramp of duration `ramp_time` is slow enough.
pub fn adiabaticity_check(ramp_time: f64, omega: f64) -> Adiabaticity {
    let f = omega / (2.0 * std::f64::consts::PI);
    let threshold = adiabatic_threshold(f);
    let margin = ramp_time / threshold;
    Adiabaticity {
        adiabatic: margin > 1.0,
        margin,
    }
}

/// Minimum ramp time `0.5 / (2π f)` for mode frequency `f` in Hz.
pub fn adiabatic_threshold(f: f64) -> f64 {
    0.5 / (2.0 * std::f64::consts::PI * f)
}

/// Thermal spread `√(k_B T0 / m ω²)` of each quadrature (m).
pub fn thermal_sigma(t0: f64, omega: f64) -> f64 {
    (BOLTZMANN * t0 / (ELECTRON_MASS * omega * omega)).sqrt()
}

/// Thermal state drawn with a ChaCha8 generator seeded from `seed`.
pub fn sample_thermal(t0: f64, omega: f64, seed: u64) -> Result<MotionalState, DynamicsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_thermal_with(t0, omega, &mut rng)
}

/// Thermal state drawn from a caller-supplied generator.
pub fn sample_thermal_with<R: rand::Rng + ?Sized>(
    t0: f64,
    omega: f64,
    rng: &mut R,
) -> Result<MotionalState, DynamicsError> {
    if !(t0 >= 0.0) || !t0.is_finite() {
        return Err(DynamicsError::InvalidParameter("T0 must be non-negative".into()));
    }
    if !(omega > 0.0) {
        return Err(DynamicsError::InvalidParameter("omega must be positive".into()));
    }
    let s = thermal_sigma(t0, omega);
    let a0: f64 = StandardNormal.sample(rng);
    let a90: f64 = StandardNormal.sample(rng);
    Ok(MotionalState::new(s * a0, s * a90))
}

/// Linear growth rate of `a0` under the gradient drive (m/s).
pub fn drive_rate(gradient: f64, omega: f64) -> f64 {
    BOHR_MAGNETON * gradient / (2.0 * ELECTRON_MASS * omega)
}

/// Outcome of [`spin_echo_suppression`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoReport {
    /// Spurious displacement without echo over that with echo.
    pub suppression: f64,
    pub displacement_echo_off: f64,
    pub displacement_echo_on: f64,
    /// `Ω0 t_drive / e_ratio`.
    pub criterion_margin: f64,
    /// Margin at or above [`ECHO_MARGIN_THRESHOLD`].
    pub sufficient: bool,
}

/// Margin taken to mean "much greater than" in the echo criterion.
pub const ECHO_MARGIN_THRESHOLD: f64 = 10.0;

/// How much the echo sequence suppresses the spin-independent force.
///
/// Both runs start from rest with the magnetic term switched off, so only
/// the spurious force moves the electron.
pub fn spin_echo_suppression(drive: &DriveParams, pot: &TrapPotential) -> Result<EchoReport, DynamicsError> {
    drive.validate()?;
    // The response is linear, so large spurious ratios may legitimately
    // push the unechoed run far beyond the usual runaway guard.
    let opts = IntegratorOptions {
        record: false,
        amplitude_guard: f64::INFINITY,
        ..Default::default()
    };
    let off = DriveParams {
        echo_rabi: 0.0,
        ..*drive
    };
    let run = |d: &DriveParams| {
        rotating::drive_final(MotionalState::default(), SpinState::UP, pot, d, &opts, false)
    };
    let x_off = run(&off)?.amplitude();
    let x_on = if drive.echo_rabi > 0.0 { run(drive)?.amplitude() } else { x_off };
    let suppression = if x_on == x_off {
        1.0
    } else if x_on > 0.0 {
        x_off / x_on
    } else {
        f64::INFINITY
    };
    let criterion_margin = if drive.spurious_e_ratio == 0.0 {
        f64::INFINITY
    } else {
        drive.echo_rabi * drive.t_drive / drive.spurious_e_ratio.abs()
    };
    Ok(EchoReport {
        suppression,
        displacement_echo_off: x_off,
        displacement_echo_on: x_on,
        criterion_margin,
        sufficient: criterion_margin >= ECHO_MARGIN_THRESHOLD,
    })
}

/// `s(t) = (-1)^⌊t Ω0 / π⌋`, the sign of spin-independent forces under echo.
pub fn echo_sign(t: f64, echo_rabi: f64) -> f64 {
    if echo_rabi <= 0.0 {
        return 1.0;
    }
    if ((t * echo_rabi / std::f64::consts::PI).floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Echo flip times strictly inside (0, t_end).
pub(crate) fn echo_breakpoints(t_end: f64, echo_rabi: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if echo_rabi > 0.0 {
        let half = std::f64::consts::PI / echo_rabi;
        let mut k = 1;
        while (k as f64) * half < t_end * (1.0 - 1e-12) {
            pts.push(k as f64 * half);
            k += 1;
        }
    }
    pts.push(t_end);
    pts
}
