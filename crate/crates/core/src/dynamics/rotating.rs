//! Fixed-step RK4 on the period-averaged amplitude equations.

use num_complex::Complex64;

use super::forces::ForceModel;
use super::{
    echo_breakpoints, echo_sign, AmplificationParams, DriveParams, DynamicsError, IntegratorOptions,
    MotionalState, SpinState, Trajectory, TrajectoryPoint,
};
use crate::trap_model::TrapPotential;

/// Drive stage from `state`; returns the sampled trajectory.
pub fn integrate_drive(
    state: MotionalState,
    spin: SpinState,
    pot: &TrapPotential,
    drive: &DriveParams,
) -> Result<Trajectory, DynamicsError> {
    integrate_drive_with(state, spin, pot, drive, &IntegratorOptions::default())
}

pub fn integrate_drive_with(
    state: MotionalState,
    spin: SpinState,
    pot: &TrapPotential,
    drive: &DriveParams,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    drive.validate()?;
    let omega = frame_omega(pot, opts)?;
    let model = ForceModel::drive(pot, omega, spin, drive, true);
    run(state, &model, drive.t_drive, drive.echo_rabi, opts)
}

/// Final state only, optionally without the magnetic term.
pub(crate) fn drive_final(
    state: MotionalState,
    spin: SpinState,
    pot: &TrapPotential,
    drive: &DriveParams,
    opts: &IntegratorOptions,
    magnetic: bool,
) -> Result<MotionalState, DynamicsError> {
    let omega = frame_omega(pot, opts)?;
    let model = ForceModel::drive(pot, omega, spin, drive, magnetic);
    let opts = IntegratorOptions {
        record: false,
        ..*opts
    };
    Ok(run(state, &model, drive.t_drive, drive.echo_rabi, &opts)?.final_state())
}

/// Parametric amplification stage from `state`.
pub fn integrate_amplification(
    state: MotionalState,
    pot: &TrapPotential,
    amp: &AmplificationParams,
) -> Result<Trajectory, DynamicsError> {
    integrate_amplification_with(state, pot, amp, &IntegratorOptions::default())
}

pub fn integrate_amplification_with(
    state: MotionalState,
    pot: &TrapPotential,
    amp: &AmplificationParams,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    amp.validate()?;
    let omega = frame_omega(pot, opts)?;
    let model = ForceModel::amplification(pot, omega, amp);
    run(state, &model, amp.t_amp, 0.0, opts)
}

fn frame_omega(pot: &TrapPotential, opts: &IntegratorOptions) -> Result<f64, DynamicsError> {
    let w = opts.frame_omega.unwrap_or(pot.omega);
    if !(w > 0.0) || !w.is_finite() {
        return Err(DynamicsError::InvalidParameter(
            "frame frequency must be positive".into(),
        ));
    }
    Ok(w)
}

/// Number of RK4 steps for a stage of length `t`.
pub(crate) fn step_count(t: f64, opts: &IntegratorOptions) -> usize {
    let by_min = (t / opts.min_step).ceil() as usize;
    opts.steps.min(by_min).max(1)
}

fn run(
    state: MotionalState,
    model: &ForceModel,
    t_end: f64,
    echo_rabi: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory, DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite { t: 0.0 });
    }
    let mut alpha = Complex64::new(state.a0, state.a90);
    let mut points = vec![TrajectoryPoint {
        t: 0.0,
        a0: state.a0,
        a90: state.a90,
    }];
    if t_end == 0.0 {
        return Ok(Trajectory { points });
    }
    let nominal = t_end / step_count(t_end, opts) as f64;
    let breaks = echo_breakpoints(t_end, echo_rabi);
    for w in breaks.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let g = echo_sign(0.5 * (ta + tb), echo_rabi);
        let n = (((tb - ta) / nominal) - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / n as f64;
        let f = |a: Complex64| model.secular_rhs(a, g);
        for i in 0..n {
            let k1 = f(alpha);
            let k2 = f(alpha + k1 * (0.5 * h));
            let k3 = f(alpha + k2 * (0.5 * h));
            let k4 = f(alpha + k3 * h);
            alpha += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let t = if i + 1 == n { tb } else { ta + h * (i + 1) as f64 };
            if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                return Err(DynamicsError::NonFinite { t });
            }
            if alpha.norm() > opts.amplitude_guard {
                return Err(DynamicsError::Runaway {
                    t,
                    amplitude: alpha.norm(),
                });
            }
            if opts.record {
                points.push(TrajectoryPoint {
                    t,
                    a0: alpha.re,
                    a90: alpha.im,
                });
            }
        }
    }
    if !opts.record {
        points.push(TrajectoryPoint {
            t: t_end,
            a0: alpha.re,
            a90: alpha.im,
        });
    }
    Ok(Trajectory { points })
}
