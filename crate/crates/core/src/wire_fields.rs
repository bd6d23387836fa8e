//! Fields of the gradient-drive circuits.
//!
//! Two mirror-image circuits sit at `x = ±d` in the electrode plane and carry
//! the drive current along `y` past the trap. Each circuit is a drain wire
//! feeding a junction at `(±d, 0)` where the current splits into two half
//! loops that run along `±y`, out along `x` and back to the drain terminal.
//! Near the trap the source wires carry antiparallel currents, so `B`
//! vanishes on the axis while `∂B_x/∂y` does not.
//!
//! Electric side effects come from the Ohmic voltage profile along the
//! wires, modelled as line charges above a grounded plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BOHR_MAGNETON, ELECTRON_MASS, ELEMENTARY_CHARGE, EPSILON_0, MICRON, MU_0};
use crate::numeric::{self, GaussLegendre};

/// Step for first derivatives at the trap centre.
pub const DERIVATIVE_STEP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field point lies on a current filament")]
    Singular,
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid imperfection: {0}")]
    InvalidImperfection(String),
}

/// Straight current filament.
///
/// `potential` holds the wire potential at the two ends in units of the
/// crossing-point voltage; it is only used by the electric model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub current: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub potential: [f64; 2],
}

impl Segment {
    fn length(&self) -> f64 {
        norm(sub(self.end, self.start))
    }

    fn phasor(&self) -> Complex64 {
        Complex64::from_polar(self.current, self.phase)
    }
}

/// Dimensions of the symmetric circuit pair.
///
/// All fields are required when a geometry is written out explicitly, a
/// partially specified geometry is rejected rather than silently completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitGeometry {
    /// Distance of each source wire from the axis (m).
    pub half_separation: f64,
    /// Height of the trap above the wire plane (m).
    pub trap_height: f64,
    pub wire_width: f64,
    pub wire_height: f64,
    /// Drive current in each circuit (A).
    pub drive_current: f64,
    /// Multiplicative reduction of B by the grounded top-layer electrodes.
    pub shielding_factor: f64,
    /// Length of each half loop along y (m).
    pub loop_extent: f64,
    /// Distance from the junction to the outer return column along x (m).
    pub return_offset: f64,
    /// Filament grid per wire as [height, width]; [1, 1] is a line wire.
    pub subdivision: [usize; 2],
    /// Depth of the grounded plane below the wire centres (m).
    pub ground_plane_depth: f64,
    /// Absolute wire potential at the source/drain crossing (V).
    pub crossing_voltage: f64,
}

impl Default for CircuitGeometry {
    fn default() -> Self {
        Self {
            half_separation: 10e-6,
            trap_height: 33e-6,
            wire_width: 10e-6,
            wire_height: 1e-6,
            drive_current: 1.0,
            shielding_factor: 0.6,
            loop_extent: 100e-6,
            return_offset: 100e-6,
            subdivision: [2, 10],
            ground_plane_depth: 5e-6,
            crossing_voltage: 2e-3,
        }
    }
}

impl CircuitGeometry {
    pub fn validate(&self) -> Result<(), FieldError> {
        let positive = [
            ("half_separation", self.half_separation),
            ("trap_height", self.trap_height),
            ("wire_width", self.wire_width),
            ("wire_height", self.wire_height),
            ("loop_extent", self.loop_extent),
            ("return_offset", self.return_offset),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FieldError::InvalidCircuit(format!("{name} must be positive")));
            }
        }
        if !(self.shielding_factor > 0.0 && self.shielding_factor <= 1.0) {
            return Err(FieldError::InvalidCircuit(
                "shielding_factor must lie in (0, 1]".into(),
            ));
        }
        if self.subdivision.contains(&0) {
            return Err(FieldError::InvalidCircuit("subdivision counts must be ≥ 1".into()));
        }
        if self.ground_plane_depth <= self.effective_radius() {
            return Err(FieldError::InvalidCircuit(
                "ground_plane_depth must exceed the effective wire radius".into(),
            ));
        }
        if !self.drive_current.is_finite() || !self.crossing_voltage.is_finite() {
            return Err(FieldError::InvalidCircuit("non-finite current or voltage".into()));
        }
        Ok(())
    }

    /// Effective radius of the rectangular cross-section for the charge model.
    pub fn effective_radius(&self) -> f64 {
        0.5 * (self.wire_width * self.wire_height).sqrt()
    }

    /// Capacitance per unit length of a wire above the ground plane (F/m).
    pub fn capacitance_per_length(&self) -> f64 {
        2.0 * PI * EPSILON_0 / (self.ground_plane_depth / self.effective_radius()).acosh()
    }
}

/// Segments and dimensions of the circuit pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCircuit {
    pub geometry: CircuitGeometry,
    pub segments: Vec<Segment>,
}

/// Per-side perturbations used to build imperfect circuits.
#[derive(Debug, Clone, Copy)]
struct SideSpec {
    current: f64,
    phase: f64,
    y_offset: f64,
    /// Extra current in the upper half loop (taken from the lower one).
    imbalance: f64,
}

impl SideSpec {
    fn nominal(current: f64) -> Self {
        Self {
            current,
            phase: 0.0,
            y_offset: 0.0,
            imbalance: 0.0,
        }
    }
}

impl WireCircuit {
    /// The ideal mirror-symmetric pair.
    pub fn new(geometry: CircuitGeometry) -> Result<Self, FieldError> {
        geometry.validate()?;
        let i = geometry.drive_current;
        Ok(Self::build(geometry, SideSpec::nominal(i), SideSpec::nominal(i)))
    }

    /// Explicit segment list; Kirchhoff's law is checked at every node.
    pub fn from_segments(geometry: CircuitGeometry, segments: Vec<Segment>) -> Result<Self, FieldError> {
        geometry.validate()?;
        let c = Self { geometry, segments };
        c.check_kirchhoff()?;
        Ok(c)
    }

    fn build(geometry: CircuitGeometry, right: SideSpec, left: SideSpec) -> Self {
        let mut segments = Vec::with_capacity(14);
        side_segments(&geometry, 1.0, right, &mut segments);
        side_segments(&geometry, -1.0, left, &mut segments);
        Self { geometry, segments }
    }

    /// Net phasor current into every node must vanish.
    pub fn check_kirchhoff(&self) -> Result<(), FieldError> {
        let mut nodes: Vec<([f64; 3], Complex64)> = Vec::new();
        let scale = self
            .segments
            .iter()
            .map(|s| s.length())
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut imax: f64 = 0.0;
        for s in &self.segments {
            if !(s.length() > 1e-9 * scale) {
                return Err(FieldError::InvalidCircuit("degenerate segment".into()));
            }
            if !s.current.is_finite() || !s.phase.is_finite() {
                return Err(FieldError::InvalidCircuit("non-finite segment current".into()));
            }
            imax = imax.max(s.current.abs());
            for (p, sign) in [(s.start, -1.0), (s.end, 1.0)] {
                let idx = nodes
                    .iter()
                    .position(|(q, _)| norm(sub(*q, p)) < 1e-9 * scale);
                let entry = match idx {
                    Some(k) => k,
                    None => {
                        nodes.push((p, Complex64::new(0.0, 0.0)));
                        nodes.len() - 1
                    }
                };
                nodes[entry].1 += s.phasor() * sign;
            }
        }
        for (p, net) in &nodes {
            if net.norm() > 1e-9 * imax.max(1e-300) {
                return Err(FieldError::InvalidCircuit(format!(
                    "current not conserved at node ({:.3e}, {:.3e}, {:.3e}) m",
                    p[0], p[1], p[2]
                )));
            }
        }
        Ok(())
    }

    /// Trap centre `(0, 0, h)`.
    pub fn trap_center(&self) -> [f64; 3] {
        [0.0, 0.0, self.geometry.trap_height]
    }

    /// Same circuit with currents scaled by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut c = self.clone();
        for s in &mut c.segments {
            s.current *= k;
        }
        c
    }
}

fn side_segments(g: &CircuitGeometry, sign: f64, spec: SideSpec, out: &mut Vec<Segment>) {
    let d = g.half_separation;
    let l = g.loop_extent;
    let x_ret = d + g.return_offset;
    let p = |x: f64, y: f64| [sign * x, y + spec.y_offset, 0.0];
    let i_ref = g.drive_current;
    // Ohmic profile in units of the crossing voltage: uniform resistance per
    // length chosen so the full drive current drops one unit along the drain.
    // The drain terminal is the ground reference and the potential keeps
    // rising along each half loop.
    let drop = |current: f64, length: f64| {
        if i_ref == 0.0 {
            0.0
        } else {
            current / i_ref * length / g.return_offset
        }
    };
    let v_junction = drop(spec.current, g.return_offset);
    let mk = |a: [f64; 3], b: [f64; 3], i: f64, va: f64, vb: f64| Segment {
        start: a,
        end: b,
        current: i,
        phase: spec.phase,
        potential: [va, vb],
    };
    out.push(mk(p(x_ret, 0.0), p(d, 0.0), spec.current, 0.0, v_junction));
    for (y_end, i_half) in [
        (l, 0.5 * spec.current + spec.imbalance),
        (-l, 0.5 * spec.current - spec.imbalance),
    ] {
        let v1 = v_junction + drop(i_half, l);
        let v2 = v1 + drop(i_half, g.return_offset);
        let v3 = v2 + drop(i_half, l);
        out.push(mk(p(d, 0.0), p(d, y_end), i_half, v_junction, v1));
        out.push(mk(p(d, y_end), p(x_ret, y_end), i_half, v1, v2));
        out.push(mk(p(x_ret, y_end), p(x_ret, 0.0), i_half, v2, v3));
    }
}

/// `μ0 I / 4π · 2 h / (h² + d²)^{3/2}` (T/m), no shielding.
pub fn analytic_gradient(circuit: &WireCircuit) -> f64 {
    let g = &circuit.geometry;
    let (h, d) = (g.trap_height, g.half_separation);
    MU_0 / (4.0 * PI) * 2.0 * g.drive_current * h / (h * h + d * d).powf(1.5)
}

/// Field of one straight filament per unit current.
fn segment_field_unit(a: [f64; 3], b: [f64; 3], p: [f64; 3]) -> Result<[f64; 3], FieldError> {
    let l = sub(b, a);
    let r1 = sub(p, a);
    let r2 = sub(p, b);
    let c = cross(l, r1);
    let cc = dot(c, c);
    let n1 = norm(r1);
    let n2 = norm(r2);
    let ll = dot(l, l);
    // |l × r1|² = |l|² ρ² with ρ the distance to the filament line.
    if cc <= 1e-24 * ll * ll {
        let t = dot(l, r1) / ll;
        if (-1e-12..=1.0 + 1e-12).contains(&t) || n1 == 0.0 || n2 == 0.0 {
            return Err(FieldError::Singular);
        }
        return Ok([0.0; 3]);
    }
    let k = MU_0 / (4.0 * PI) / cc * (dot(l, r1) / n1 - dot(l, r2) / n2);
    Ok([c[0] * k, c[1] * k, c[2] * k])
}

/// Filament offsets across the wire cross-section (width direction, z).
fn filament_offsets(g: &CircuitGeometry) -> Vec<(f64, f64)> {
    let [nh, nw] = g.subdivision;
    let mut out = Vec::with_capacity(nh * nw);
    for j in 0..nh {
        for i in 0..nw {
            let ow = ((i as f64 + 0.5) / nw as f64 - 0.5) * g.wire_width;
            let oh = ((j as f64 + 0.5) / nh as f64 - 0.5) * g.wire_height;
            out.push((ow, oh));
        }
    }
    if nh == 1 && nw == 1 {
        out[0] = (0.0, 0.0);
    }
    out
}

/// Complex field phasor at `point` (T); subdivided per the geometry.
pub fn biot_savart_phasor(circuit: &WireCircuit, point: [f64; 3]) -> Result<[Complex64; 3], FieldError> {
    let offsets = filament_offsets(&circuit.geometry);
    let share = 1.0 / offsets.len() as f64;
    let mut b = [Complex64::new(0.0, 0.0); 3];
    for s in &circuit.segments {
        let l = sub(s.end, s.start);
        let len = norm(l);
        let u = [l[0] / len, l[1] / len, l[2] / len];
        let wdir = cross([0.0, 0.0, 1.0], u);
        let mut acc = [0.0; 3];
        for &(ow, oh) in &offsets {
            let off = [wdir[0] * ow, wdir[1] * ow, wdir[2] * ow + oh];
            let f = segment_field_unit(add(s.start, off), add(s.end, off), point)?;
            for k in 0..3 {
                acc[k] += f[k];
            }
        }
        let i = s.phasor() * share;
        for k in 0..3 {
            b[k] += i * acc[k];
        }
    }
    Ok(b)
}

/// In-phase (real) field at `point` (T).
pub fn biot_savart(circuit: &WireCircuit, point: [f64; 3]) -> Result<[f64; 3], FieldError> {
    let b = biot_savart_phasor(circuit, point)?;
    Ok([b[0].re, b[1].re, b[2].re])
}

/// Field magnitude including out-of-phase components (T peak).
pub fn field_magnitude(circuit: &WireCircuit, point: [f64; 3]) -> Result<f64, FieldError> {
    let b = biot_savart_phasor(circuit, point)?;
    Ok(b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

/// `∂B_x/∂y` at the trap centre by central difference (T/m), unshielded.
pub fn field_gradient(circuit: &WireCircuit) -> Result<f64, FieldError> {
    let [x, _, z] = circuit.trap_center();
    let s = DERIVATIVE_STEP;
    let bp = biot_savart(circuit, [x, s, z])?;
    let bm = biot_savart(circuit, [x, -s, z])?;
    Ok((bp[0] - bm[0]) / (2.0 * s))
}

/// Gradient after the top-layer shielding factor (T/m).
pub fn shielded_gradient(circuit: &WireCircuit) -> Result<f64, FieldError> {
    Ok(field_gradient(circuit)? * circuit.geometry.shielding_factor)
}

/// Taylor coefficients `b1..b4` of `B_x(0, y, h)` on the axis (T/mᵏ).
///
/// Higher derivatives are not resolvable with a nanometre step, so the
/// coefficients come from a sixth-order least-squares fit over ±10 μm.
pub fn gradient_profile(circuit: &WireCircuit) -> Result<[f64; 4], FieldError> {
    let r = 10.0 * MICRON;
    let z = circuit.geometry.trap_height;
    let ys = numeric::linspace(-r, r, 81);
    let mut bx = Vec::with_capacity(ys.len());
    for &y in &ys {
        bx.push(biot_savart(circuit, [0.0, y, z])?[0]);
    }
    let c = numeric::polyfit(&ys, &bx, 6, r);
    Ok([c[1], c[2], c[3], c[4]])
}

/// Potential, field and `∂²φ/∂y²` of the charged wires at `point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectricSample {
    pub potential: f64,
    pub field: [f64; 3],
    pub d2_potential_dy2: f64,
}

/// Electrostatics of the wire charges at crossing voltage `v0`.
///
/// Each segment carries a line charge `λ = C′·V(s)` varying linearly between
/// its end potentials. The grounded plane is represented by image charges.
pub fn wire_electric(circuit: &WireCircuit, v0: f64, point: [f64; 3]) -> ElectricSample {
    let g = &circuit.geometry;
    let cp = g.capacitance_per_length();
    let image_z = -2.0 * g.ground_plane_depth;
    let gl = GaussLegendre::new(16);
    let k = 1.0 / (4.0 * PI * EPSILON_0);
    let mut phi = 0.0;
    let mut e = [0.0; 3];
    let mut d2 = 0.0;
    for s in &circuit.segments {
        let lam0 = cp * v0 * s.potential[0];
        let lam1 = cp * v0 * s.potential[1];
        if lam0 == 0.0 && lam1 == 0.0 {
            continue;
        }
        let len = s.length();
        for (dz, sign) in [(0.0, 1.0), (image_z, -1.0)] {
            let a = [s.start[0], s.start[1], s.start[2] + dz];
            let b = [s.end[0], s.end[1], s.end[2] + dz];
            let mut acc = [0.0; 5];
            for kpanel in 0..16 {
                let t0 = kpanel as f64 / 16.0;
                for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                    let t = t0 + (0.5 * x + 0.5) / 16.0;
                    let wt = 0.5 * w / 16.0;
                    let q = [
                        a[0] + t * (b[0] - a[0]),
                        a[1] + t * (b[1] - a[1]),
                        a[2] + t * (b[2] - a[2]),
                    ];
                    let r = sub(point, q);
                    let rn = norm(r);
                    let lam = lam0 + (lam1 - lam0) * t;
                    let inv3 = 1.0 / (rn * rn * rn);
                    acc[0] += wt * lam / rn;
                    acc[1] += wt * lam * r[0] * inv3;
                    acc[2] += wt * lam * r[1] * inv3;
                    acc[3] += wt * lam * r[2] * inv3;
                    acc[4] += wt * lam * (3.0 * r[1] * r[1] / (rn * rn) - 1.0) * inv3;
                }
            }
            let f = sign * k * len;
            phi += f * acc[0];
            e[0] += f * acc[1];
            e[1] += f * acc[2];
            e[2] += f * acc[3];
            d2 += f * acc[4];
        }
    }
    ElectricSample {
        potential: phi,
        field: e,
        d2_potential_dy2: d2,
    }
}

/// Dimensionless curvature `η` defined by `eΔV = η m ω² y² / 2`.
///
/// The sign follows the electrostatic potential curvature, negative for the
/// default geometry.
pub fn eta_quadratic(circuit: &WireCircuit, v0: f64, omega: f64) -> f64 {
    assert!(omega > 0.0, "omega must be positive");
    let s = wire_electric(circuit, v0, circuit.trap_center());
    ELEMENTARY_CHARGE * s.d2_potential_dy2 / (ELECTRON_MASS * omega * omega)
}

/// Imperfection cases of the circuit pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImperfectionKind {
    /// Trap displaced along the axis (magnitude in m).
    TrapShiftY,
    /// Trap displaced across the axis (m).
    TrapShiftX,
    /// Circuits shifted by ±δ/2 along y (m).
    CircuitMisalignY,
    /// Drive phases ±δψ/2 (rad).
    PhaseDiff,
    /// Currents I(1 ± δ) (fraction of I).
    AmplitudeDiff,
    /// One circuit's half loops carry I/2 ± δ·I (fraction of I).
    BranchImbalance,
}

impl ImperfectionKind {
    pub const ALL: [ImperfectionKind; 6] = [
        ImperfectionKind::TrapShiftY,
        ImperfectionKind::TrapShiftX,
        ImperfectionKind::CircuitMisalignY,
        ImperfectionKind::PhaseDiff,
        ImperfectionKind::AmplitudeDiff,
        ImperfectionKind::BranchImbalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TrapShiftY => "trap_shift_y",
            Self::TrapShiftX => "trap_shift_x",
            Self::CircuitMisalignY => "circuit_misalign_y",
            Self::PhaseDiff => "phase_diff",
            Self::AmplitudeDiff => "amplitude_diff",
            Self::BranchImbalance => "branch_imbalance",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::TrapShiftY | Self::TrapShiftX | Self::CircuitMisalignY => "m",
            Self::PhaseDiff => "rad",
            Self::AmplitudeDiff | Self::BranchImbalance => "fraction",
        }
    }

    /// Reference magnitude: 0.1 μm, 2π/1000 or 1/1000.
    pub fn default_magnitude(self) -> f64 {
        match self {
            Self::TrapShiftY | Self::TrapShiftX | Self::CircuitMisalignY => 0.1 * MICRON,
            Self::PhaseDiff => 2.0 * PI / 1000.0,
            Self::AmplitudeDiff | Self::BranchImbalance => 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionSpec {
    pub kind: ImperfectionKind,
    pub magnitude: f64,
}

impl ImperfectionSpec {
    pub fn new(kind: ImperfectionKind, magnitude: f64) -> Result<Self, FieldError> {
        let s = Self { kind, magnitude };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return Err(FieldError::InvalidImperfection(format!(
                "{} magnitude must be a non-negative number of {}",
                self.kind.name(),
                self.kind.unit()
            )));
        }
        let limit = match self.kind.unit() {
            "m" => 1e-6,
            "rad" => 0.1,
            _ => 0.01,
        };
        if self.magnitude > limit {
            return Err(FieldError::InvalidImperfection(format!(
                "{} magnitude {} {} is outside the small-perturbation model (max {})",
                self.kind.name(),
                self.magnitude,
                self.kind.unit(),
                limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionResult {
    pub kind: ImperfectionKind,
    pub magnitude: f64,
    /// `e|E_y| / (μ_B B′)` with B′ the shielded nominal gradient.
    pub e_ratio: f64,
    /// Residual field magnitude at the electron, unshielded (T).
    pub b_center: f64,
}

/// Residual field and spurious axial force for one imperfection.
pub fn imperfection_analysis(
    circuit: &WireCircuit,
    spec: &ImperfectionSpec,
) -> Result<ImperfectionResult, FieldError> {
    spec.validate()?;
    let g = circuit.geometry;
    let i = g.drive_current;
    let m = spec.magnitude;
    let nominal = SideSpec::nominal(i);
    let mut point = circuit.trap_center();
    let perturbed = match spec.kind {
        ImperfectionKind::TrapShiftY => {
            point[1] += m;
            circuit.clone()
        }
        ImperfectionKind::TrapShiftX => {
            point[0] += m;
            circuit.clone()
        }
        ImperfectionKind::CircuitMisalignY => WireCircuit::build(
            g,
            SideSpec { y_offset: 0.5 * m, ..nominal },
            SideSpec { y_offset: -0.5 * m, ..nominal },
        ),
        ImperfectionKind::PhaseDiff => WireCircuit::build(
            g,
            SideSpec { phase: 0.5 * m, ..nominal },
            SideSpec { phase: -0.5 * m, ..nominal },
        ),
        ImperfectionKind::AmplitudeDiff => WireCircuit::build(
            g,
            SideSpec { current: i * (1.0 + m), ..nominal },
            SideSpec { current: i * (1.0 - m), ..nominal },
        ),
        ImperfectionKind::BranchImbalance => WireCircuit::build(
            g,
            SideSpec { imbalance: m * i, ..nominal },
            nominal,
        ),
    };
    let b_center = field_magnitude(&perturbed, point)?;
    let reference = shielded_gradient(&WireCircuit::new(g)?)?;
    let ey = wire_electric(&perturbed, g.crossing_voltage, point).field[1];
    let e_ratio = if reference == 0.0 {
        0.0
    } else {
        ELEMENTARY_CHARGE * ey.abs() / (BOHR_MAGNETON * reference.abs())
    };
    Ok(ImperfectionResult {
        kind: spec.kind,
        magnitude: m,
        e_ratio,
        b_center,
    })
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
