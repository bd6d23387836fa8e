//! Surface-electrode layout, DC voltage synthesis and the axial Taylor model.
//!
//! Electrodes are gapless rectangles in the `z = 0` plane, everything else in
//! the plane is grounded. The trap axis is `y` at height `trap_height` above
//! the origin. Voltages are fitted so that the electron's potential energy
//! along the axis is as close as possible to `½ m ω² y²`, then rounded to the
//! DAC grid and re-expanded to eighth order.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, MICRON};
use crate::numeric::{self, GaussLegendre};

/// Number of uniformly spaced points used by every axial fit.
pub const FIT_POINTS: usize = 201;

/// Highest Taylor order kept for the axial potential.
pub const TAYLOR_ORDER: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrapError {
    #[error("point must lie above the electrode plane (z = {z})")]
    BelowPlane { z: f64 },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("electrode `{electrode}` needs {voltage:.4} V, beyond the ±{limit} V DAC range")]
    Infeasible {
        electrode: String,
        voltage: f64,
        limit: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Axis-aligned rectangle in the electrode plane (metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            x: [x0.min(x1), x0.max(x1)],
            y: [y0.min(y1), y0.max(y1)],
        }
    }

    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let dx = self.x[1].min(other.x[1]) - self.x[0].max(other.x[0]);
        let dy = self.y[1].min(other.y[1]) - self.y[0].max(other.y[0]);
        if dx > 0.0 && dy > 0.0 {
            dx * dy
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Electrode {
    pub name: String,
    #[serde(flatten)]
    pub rect: Rect,
}

fn default_trap_height() -> f64 {
    33e-6
}
fn default_dac_bits() -> u32 {
    16
}
fn default_dac_range() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}

/// DC electrodes of a surface trap plus the DAC that drives them.
///
/// `groups` lists electrodes that share one voltage. When absent every
/// electrode is driven independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeLayout {
    pub electrodes: Vec<Electrode>,
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_trap_height")]
    pub trap_height: f64,
    #[serde(default = "default_dac_bits")]
    pub dac_bits: u32,
    #[serde(default = "default_dac_range")]
    pub dac_range: f64,
    /// Round the fitted voltages to DAC codes.
    #[serde(default = "default_true")]
    pub quantize: bool,
}

impl Default for ElectrodeLayout {
    fn default() -> Self {
        Self::standard()
    }
}

impl ElectrodeLayout {
    /// Ten DC electrodes, five per side of the RF rails, mirror-paired
    /// across the axis.
    ///
    /// The grounded centre strip spans |x| < 15 μm and the RF rails
    /// 15–72.6 μm, which places the RF null at 33 μm. DC electrodes cover
    /// 72.6–400 μm. Along y the segments are a 70 μm centre electrode flanked
    /// by two 60 μm electrodes and two long end caps reaching ±5 mm.
    pub fn standard() -> Self {
        let um = MICRON;
        let (x_in, x_out) = (72.6 * um, 400.0 * um);
        let (sc, s, end) = (70.0 * um, 60.0 * um, 5000.0 * um);
        let edges = [-end, -sc / 2.0 - s, -sc / 2.0, sc / 2.0, sc / 2.0 + s, end];
        let mut electrodes = Vec::with_capacity(10);
        for (side, (x0, x1)) in [("R", (x_in, x_out)), ("L", (-x_out, -x_in))] {
            for k in 0..5 {
                electrodes.push(Electrode {
                    name: format!("DC{}{}", side, k + 1),
                    rect: Rect::new(x0, x1, edges[k], edges[k + 1]),
                });
            }
        }
        let groups = (0..5).map(|k| vec![k, k + 5]).collect();
        Self {
            electrodes,
            groups: Some(groups),
            trap_height: default_trap_height(),
            dac_bits: default_dac_bits(),
            dac_range: default_dac_range(),
            quantize: true,
        }
    }

    /// Voltage groups, defaulting to one group per electrode.
    pub fn voltage_groups(&self) -> Vec<Vec<usize>> {
        match &self.groups {
            Some(g) => g.clone(),
            None => (0..self.electrodes.len()).map(|i| vec![i]).collect(),
        }
    }

    /// DAC step (V): full span over 2^bits codes.
    pub fn dac_step(&self) -> f64 {
        2.0 * self.dac_range / 2f64.powi(self.dac_bits as i32)
    }

    pub fn validate(&self) -> Result<(), TrapError> {
        if !(self.trap_height > 0.0) {
            return Err(TrapError::InvalidLayout("trap_height must be positive".into()));
        }
        if self.dac_bits < 1 || self.dac_bits > 52 {
            return Err(TrapError::InvalidLayout("dac_bits must be in 1..=52".into()));
        }
        if !(self.dac_range > 0.0) {
            return Err(TrapError::InvalidLayout("dac_range must be positive".into()));
        }
        for e in &self.electrodes {
            if !(e.rect.area() > 0.0) || !e.rect.area().is_finite() {
                return Err(TrapError::InvalidLayout(format!(
                    "electrode `{}` has no area",
                    e.name
                )));
            }
        }
        for (i, a) in self.electrodes.iter().enumerate() {
            for b in &self.electrodes[i + 1..] {
                let ov = a.rect.overlap_area(&b.rect);
                if ov > 1e-9 * a.rect.area().min(b.rect.area()) {
                    return Err(TrapError::InvalidLayout(format!(
                        "electrodes `{}` and `{}` overlap",
                        a.name, b.name
                    )));
                }
            }
        }
        let groups = self.voltage_groups();
        let mut seen = vec![false; self.electrodes.len()];
        for g in &groups {
            if g.is_empty() {
                return Err(TrapError::InvalidLayout("empty voltage group".into()));
            }
            for &i in g {
                if i >= seen.len() || seen[i] {
                    return Err(TrapError::InvalidLayout(format!(
                        "electrode index {i} is out of range or listed twice in groups"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(TrapError::InvalidLayout(
                "every electrode must belong to a voltage group".into(),
            ));
        }
        Ok(())
    }
}

/// Potential at `point` from `rect` held at 1 V in an otherwise grounded
/// plane (dimensionless, in [0, 1]).
///
/// This is the solid angle subtended by the rectangle divided by 2π.
pub fn electrode_basis_potential(rect: &Rect, point: [f64; 3]) -> Result<f64, TrapError> {
    let [x, y, z] = point;
    if !(z > 0.0) {
        return Err(TrapError::BelowPlane { z });
    }
    let f = |a: f64, b: f64| (a * b).atan2(z * (z * z + a * a + b * b).sqrt());
    let (x1, x2) = (rect.x[0] - x, rect.x[1] - x);
    let (y1, y2) = (rect.y[0] - y, rect.y[1] - y);
    Ok((f(x2, y2) - f(x1, y2) - f(x2, y1) + f(x1, y1)) / (2.0 * PI))
}

/// Potential at `point` for arbitrary electrode voltages (superposition).
pub fn layout_potential(
    layout: &ElectrodeLayout,
    voltages: &[f64],
    point: [f64; 3],
) -> Result<f64, TrapError> {
    if voltages.len() != layout.electrodes.len() {
        return Err(TrapError::InvalidArgument(format!(
            "expected {} voltages, got {}",
            layout.electrodes.len(),
            voltages.len()
        )));
    }
    let mut phi = 0.0;
    for (e, v) in layout.electrodes.iter().zip(voltages) {
        phi += v * electrode_basis_potential(&e.rect, point)?;
    }
    Ok(phi)
}

/// Normalized coefficients of `V(y) = V(0)(c2 y² + c4 y⁴ + c6 y⁶)` in μm units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub c2: f64,
    pub c4: f64,
    pub c6: f64,
    pub c8: f64,
}

/// Axial potential energy of the electron as a Taylor series about the trap
/// centre, `U(y) = Σ V_n yⁿ` (J, SI coefficients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapPotential {
    /// Secular angular frequency implied by the quadratic term (rad/s).
    pub omega: f64,
    /// Energy scale such that `c2 = 1 μm⁻²` (J).
    pub v0: f64,
    /// `V_n` for n = 0..=8 in J·m⁻ⁿ.
    pub taylor: [f64; TAYLOR_ORDER + 1],
    /// Axial interval over which the coefficients were fitted (m).
    pub fit_range: (f64, f64),
}

impl TrapPotential {
    /// Purely harmonic potential at angular frequency `omega`.
    pub fn harmonic(omega: f64) -> Self {
        Self::from_normalized(omega, 0.0, 0.0)
    }

    /// Potential from normalized μm coefficients with `c2 = 1 μm⁻²`.
    pub fn from_normalized(omega: f64, c4: f64, c6: f64) -> Self {
        let v0 = 0.5 * ELECTRON_MASS * omega * omega * MICRON * MICRON;
        let mut taylor = [0.0; TAYLOR_ORDER + 1];
        taylor[2] = v0 / MICRON.powi(2);
        taylor[4] = v0 * c4 / MICRON.powi(4);
        taylor[6] = v0 * c6 / MICRON.powi(6);
        Self {
            omega,
            v0,
            taylor,
            fit_range: (-10.0 * MICRON, 10.0 * MICRON),
        }
    }

    /// Potential from raw coefficients; ω and V(0) follow from `taylor[2]`.
    pub fn from_taylor(taylor: [f64; TAYLOR_ORDER + 1], fit_range: (f64, f64)) -> Self {
        let v2 = taylor[2];
        let (omega, v0) = if v2 > 0.0 {
            ((2.0 * v2 / ELECTRON_MASS).sqrt(), v2 * MICRON * MICRON)
        } else {
            (0.0, 0.0)
        };
        Self {
            omega,
            v0,
            taylor,
            fit_range,
        }
    }

    /// Normalized coefficient `c_n` (μm⁻ⁿ); zero for a non-confining fit.
    pub fn c(&self, n: usize) -> f64 {
        if self.v0 <= 0.0 || n > TAYLOR_ORDER {
            return 0.0;
        }
        self.taylor[n] * MICRON.powi(n as i32) / self.v0
    }

    pub fn normalized(&self) -> Normalized {
        Normalized {
            c2: self.c(2),
            c4: self.c(4),
            c6: self.c(6),
            c8: self.c(8),
        }
    }

    /// Potential energy at axial position `y` (J).
    pub fn energy(&self, y: f64) -> f64 {
        numeric::polyval(&self.taylor, y)
    }

    /// Axial force `-dU/dy` (N).
    pub fn force(&self, y: f64) -> f64 {
        let mut f = 0.0;
        for n in (1..=TAYLOR_ORDER).rev() {
            f = f * y + n as f64 * self.taylor[n];
        }
        -f
    }

    /// True when an odd Taylor term contributes more than 1e-6 of the
    /// quadratic energy at the edge of the fit range.
    pub fn odd_terms_significant(&self) -> bool {
        let r = self.fit_range.0.abs().max(self.fit_range.1.abs());
        let quad = self.taylor[2].abs() * r * r;
        [1, 3, 5, 7]
            .iter()
            .any(|&n| self.taylor[n].abs() * r.powi(n as i32) > 1e-6 * quad)
    }

    /// Relative mismatch between ω and the quadratic coefficient.
    pub fn consistency_error(&self) -> f64 {
        let expected = 0.5 * ELECTRON_MASS * self.omega * self.omega;
        if expected == 0.0 {
            return self.taylor[2].abs();
        }
        (self.taylor[2] - expected).abs() / expected
    }
}

/// Quantized electrode voltages and the potential they produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageSolution {
    /// Per-electrode voltage (V) in layout order.
    pub voltages: Vec<f64>,
    /// Names matching `voltages`.
    pub names: Vec<String>,
    /// RMS deviation from the target quadratic over the fit range (V).
    pub residual: f64,
    pub resulting_potential: TrapPotential,
}

/// Fit DC voltages to a harmonic axial well at `target_omega`.
///
/// The target is the electrostatic potential `-m ω² y² / 2e` sampled at
/// [`FIT_POINTS`] points over `fit_range`, with a free constant offset.
/// The minimum-norm least-squares solution is rounded to the DAC grid and
/// the resulting potential is re-expanded to eighth order over the same
/// range.
pub fn optimize_voltages(
    layout: &ElectrodeLayout,
    target_omega: f64,
    fit_range: (f64, f64),
) -> Result<VoltageSolution, TrapError> {
    layout.validate()?;
    if layout.electrodes.len() < 2 {
        return Err(TrapError::InvalidLayout(
            "at least two DC electrodes are required".into(),
        ));
    }
    if !(target_omega >= 0.0) || !target_omega.is_finite() {
        return Err(TrapError::InvalidArgument(
            "target_omega must be non-negative".into(),
        ));
    }
    if !(fit_range.1 > fit_range.0) {
        return Err(TrapError::InvalidArgument("empty fit range".into()));
    }

    let groups = layout.voltage_groups();
    let ys = numeric::linspace(fit_range.0, fit_range.1, FIT_POINTS);
    let basis = axial_basis(layout, &groups, &ys)?;
    let k = -0.5 * ELECTRON_MASS * target_omega * target_omega / ELEMENTARY_CHARGE;
    let target: Vec<f64> = ys.iter().map(|y| k * y * y).collect();

    let design = design_matrix(&basis, ys.len());
    let sol = numeric::lstsq(design, DVector::from_column_slice(&target));
    let mut group_v: Vec<f64> = (0..groups.len()).map(|g| sol[g]).collect();

    for (g, v) in groups.iter().zip(&group_v) {
        if v.abs() > layout.dac_range {
            return Err(TrapError::Infeasible {
                electrode: layout.electrodes[g[0]].name.clone(),
                voltage: *v,
                limit: layout.dac_range,
            });
        }
    }
    if layout.quantize {
        let step = layout.dac_step();
        for v in group_v.iter_mut() {
            *v = quantize(*v, step, layout.dac_range);
        }
    }

    let mut voltages = vec![0.0; layout.electrodes.len()];
    for (g, v) in groups.iter().zip(&group_v) {
        for &i in g {
            voltages[i] = *v;
        }
    }

    let phi: Vec<f64> = (0..ys.len())
        .map(|i| basis.iter().zip(&group_v).map(|(col, v)| col[i] * v).sum())
        .collect();
    let residual = offset_rms(&phi, &target);
    let energy: Vec<f64> = phi.iter().map(|p| -ELEMENTARY_CHARGE * p).collect();
    let resulting_potential = fit_taylor(&ys, &energy, fit_range);

    Ok(VoltageSolution {
        voltages,
        names: layout.electrodes.iter().map(|e| e.name.clone()).collect(),
        residual,
        resulting_potential,
    })
}

/// Re-expand a DC voltage set over a (possibly different) axial range.
pub fn potential_from_voltages(
    layout: &ElectrodeLayout,
    voltages: &[f64],
    fit_range: (f64, f64),
) -> Result<TrapPotential, TrapError> {
    let ys = numeric::linspace(fit_range.0, fit_range.1, FIT_POINTS);
    let mut energy = Vec::with_capacity(ys.len());
    for &y in &ys {
        let phi = layout_potential(layout, voltages, [0.0, y, layout.trap_height])?;
        energy.push(-ELEMENTARY_CHARGE * phi);
    }
    Ok(fit_taylor(&ys, &energy, fit_range))
}

fn axial_basis(
    layout: &ElectrodeLayout,
    groups: &[Vec<usize>],
    ys: &[f64],
) -> Result<Vec<Vec<f64>>, TrapError> {
    let mut cols = Vec::with_capacity(groups.len());
    for g in groups {
        let mut col = Vec::with_capacity(ys.len());
        for &y in ys {
            let mut s = 0.0;
            for &i in g {
                s += electrode_basis_potential(
                    &layout.electrodes[i].rect,
                    [0.0, y, layout.trap_height],
                )?;
            }
            col.push(s);
        }
        cols.push(col);
    }
    Ok(cols)
}

fn design_matrix(basis: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(rows, n + 1, |i, j| if j < n { basis[j][i] } else { 1.0 })
}

/// Round to the nearest DAC code, clamped to the output range.
pub fn quantize(v: f64, step: f64, range: f64) -> f64 {
    let max_code = (range / step).floor();
    let code = (v / step).round().clamp(-max_code, max_code);
    code * step
}

fn offset_rms(phi: &[f64], target: &[f64]) -> f64 {
    let n = phi.len() as f64;
    let mean: f64 = phi.iter().zip(target).map(|(p, t)| p - t).sum::<f64>() / n;
    let ss: f64 = phi
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t - mean).powi(2))
        .sum();
    (ss / n).sqrt()
}

fn fit_taylor(ys: &[f64], energy: &[f64], fit_range: (f64, f64)) -> TrapPotential {
    let scale = fit_range.0.abs().max(fit_range.1.abs());
    let c = numeric::polyfit(ys, energy, TAYLOR_ORDER, scale);
    let mut taylor = [0.0; TAYLOR_ORDER + 1];
    taylor.copy_from_slice(&c);
    TrapPotential::from_taylor(taylor, fit_range)
}

/// How [`frequency_shift`] evaluates the amplitude-dependent shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMethod {
    /// `(3A²c4/4 + 15A⁴c6/16)/c2`.
    ClosedForm,
    /// Oscillation period of the full even potential by quadrature.
    NumericPeriod,
}

/// Relative axial frequency shift `Δω/ω` at oscillation amplitude `amplitude`.
///
/// The numeric mode uses the even part of the Taylor series only; odd terms
/// are tracked by [`TrapPotential::odd_terms_significant`].
pub fn frequency_shift(pot: &TrapPotential, amplitude: f64, method: ShiftMethod) -> f64 {
    let a = amplitude.abs();
    if a == 0.0 {
        return 0.0;
    }
    match method {
        ShiftMethod::ClosedForm => {
            let n = pot.normalized();
            if n.c2 == 0.0 {
                return 0.0;
            }
            let a_um = a / MICRON;
            (0.75 * a_um.powi(2) * n.c4 + 15.0 / 16.0 * a_um.powi(4) * n.c6) / n.c2
        }
        ShiftMethod::NumericPeriod => numeric_period_shift(pot, a),
    }
}

/// Period from `T = 4∫₀^A dy / v(y)` with `y = A sin φ`.
///
/// For each even term the factor `Aⁿ - yⁿ` is divided by `A² - y²`
/// analytically, so the integrand has no endpoint singularity.
fn numeric_period_shift(pot: &TrapPotential, a: f64) -> f64 {
    let gl = GaussLegendre::new(32);
    let q = |y: f64| -> f64 {
        let mut s = 0.0;
        for n in (2..=TAYLOR_ORDER).step_by(2) {
            let mut partial = 0.0;
            for k in 0..n / 2 {
                partial += a.powi(2 * k as i32) * y.powi((n - 2 - 2 * k) as i32);
            }
            s += pot.taylor[n] * partial;
        }
        s
    };
    let integral = gl.integrate(0.0, 0.5 * PI, 4, |phi| {
        let y = a * phi.sin();
        1.0 / (2.0 * q(y) / ELECTRON_MASS).sqrt()
    });
    let period = 4.0 * integral;
    let period0 = 2.0 * PI / (2.0 * pot.taylor[2] / ELECTRON_MASS).sqrt();
    period0 / period - 1.0
}
