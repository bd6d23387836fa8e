//! Unaveraged lab-frame integration used as an oracle for the rotating frame.
//!
//! The state is carried as osculating elements `α(t)`, defined so that
//! `y = Re(ᾱ e^{iωt})` and `ẏ = Re(iω ᾱ e^{iωt})` hold exactly. The harmonic
//! part of the motion is then integrated analytically and RK4 only sees the
//! perturbing forces, with their full time dependence.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::forces::ForceModel;
use super::{
    echo_breakpoints, echo_sign, AmplificationParams, DriveParams, DynamicsError, MotionalState,
    SpinState,
};
use crate::constants::ELECTRON_MASS;
use crate::trap_model::TrapPotential;

/// Stage integrated by [`lab_frame_oracle`].
#[derive(Debug, Clone, Copy)]
pub enum LabStage<'a> {
    Drive(&'a DriveParams),
    Amplification(&'a AmplificationParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabOptions {
    /// RK4 steps per oscillation period, at least 50.
    pub steps_per_period: usize,
    pub amplitude_guard: f64,
    pub frame_omega: Option<f64>,
}

impl Default for LabOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 50,
            amplitude_guard: 1e-3,
            frame_omega: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabFrameResult {
    /// Quadratures fitted to `y(t)` over the final period.
    pub state: MotionalState,
    /// Instantaneous osculating quadratures at the end time.
    pub osculating: MotionalState,
    pub y: f64,
    pub v: f64,
    /// `m v²/2 + U(y) - U(0)` at start and end (J).
    pub energy_initial: f64,
    pub energy_final: f64,
    pub steps: usize,
}

/// Integrate a stage in the lab frame from position `y0` and velocity `v0`.
pub fn lab_frame_oracle(
    y0: f64,
    v0: f64,
    spin: SpinState,
    pot: &TrapPotential,
    stage: LabStage<'_>,
    opts: &LabOptions,
) -> Result<LabFrameResult, DynamicsError> {
    if opts.steps_per_period < 50 {
        return Err(DynamicsError::InvalidParameter(
            "lab frame needs at least 50 steps per period".into(),
        ));
    }
    let omega = opts.frame_omega.unwrap_or(pot.omega);
    if !(omega > 0.0) {
        return Err(DynamicsError::InvalidParameter("omega must be positive".into()));
    }
    let (model, t_end, echo_rabi, lambda) = match stage {
        LabStage::Drive(d) => {
            d.validate()?;
            (ForceModel::drive(pot, omega, spin, d, true), d.t_drive, d.echo_rabi, 0.0)
        }
        LabStage::Amplification(a) => {
            a.validate()?;
            (
                ForceModel::amplification(pot, omega, a),
                a.t_amp,
                0.0,
                a.epsilon * omega / 4.0,
            )
        }
    };
    let energy = |y: f64, v: f64| 0.5 * ELECTRON_MASS * v * v + pot.energy(y) - pot.taylor[0];
    let period = 2.0 * std::f64::consts::PI / omega;
    let nominal = period / opts.steps_per_period as f64;
    let inv_mw = 1.0 / (ELECTRON_MASS * omega);

    let mut alpha = Complex64::new(y0, v0 / omega);
    let rhs = |a: Complex64, t: f64, g: f64| -> Complex64 {
        let th = omega * t;
        let (s, c) = th.sin_cos();
        let y = a.re * c + a.im * s;
        let f = model.lab_force(y, th, g) * inv_mw;
        Complex64::new(-f * s, f * c)
    };

    let fit_from = t_end - period;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut steps = 0;
    let record = |t: f64, a: Complex64, out: &mut Vec<(f64, f64)>| {
        if t >= fit_from - 1e-15 * t_end.max(period) {
            let th = omega * t;
            out.push((t, a.re * th.cos() + a.im * th.sin()));
        }
    };
    record(0.0, alpha, &mut samples);
    for w in echo_breakpoints(t_end, echo_rabi).windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let g = echo_sign(0.5 * (ta + tb), echo_rabi);
        let n = (((tb - ta) / nominal) - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / n as f64;
        for i in 0..n {
            let t = ta + h * i as f64;
            let k1 = rhs(alpha, t, g);
            let k2 = rhs(alpha + k1 * (0.5 * h), t + 0.5 * h, g);
            let k3 = rhs(alpha + k2 * (0.5 * h), t + 0.5 * h, g);
            let k4 = rhs(alpha + k3 * h, t + h, g);
            alpha += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            steps += 1;
            let t1 = if i + 1 == n { tb } else { t + h };
            if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                return Err(DynamicsError::NonFinite { t: t1 });
            }
            if alpha.norm() > opts.amplitude_guard {
                return Err(DynamicsError::Runaway {
                    t: t1,
                    amplitude: alpha.norm(),
                });
            }
            record(t1, alpha, &mut samples);
        }
    }

    let th = omega * t_end;
    let (s, c) = th.sin_cos();
    let y = alpha.re * c + alpha.im * s;
    let v = omega * (-alpha.re * s + alpha.im * c);
    let state = project(&samples, omega, t_end, lambda).unwrap_or(MotionalState::new(alpha.re, alpha.im));
    Ok(LabFrameResult {
        state,
        osculating: MotionalState::new(alpha.re, alpha.im),
        y,
        v,
        energy_initial: energy(y0, v0),
        energy_final: energy(y, v),
        steps,
    })
}

/// Least-squares fit `y ≈ a0 e^{λ(t-T)} cos ωt + a90 e^{-λ(t-T)} sin ωt`.
fn project(samples: &[(f64, f64)], omega: f64, t_end: f64, lambda: f64) -> Option<MotionalState> {
    if samples.len() < 8 {
        return None;
    }
    let (mut scc, mut scs, mut sss, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in samples {
        let env = (lambda * (t - t_end)).exp();
        let c = env * (omega * t).cos();
        let s = (omega * t).sin() / env;
        scc += c * c;
        scs += c * s;
        sss += s * s;
        syc += y * c;
        sys += y * s;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-12 * scc * sss {
        return None;
    }
    Some(MotionalState::new(
        (syc * sss - sys * scs) / det,
        (sys * scc - syc * scs) / det,
    ))
}
