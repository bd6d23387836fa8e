//! Force law shared by the rotating-frame and lab-frame integrators.
//!
//! Every perturbing force is a sum of terms `g(t) P(y) (a cos pθ + b sin pθ)`
//! with `θ = ω t`, `P` a polynomial and `g` either 1 or the echo sign. The
//! lab frame evaluates this directly. The rotating frame uses the exact
//! period average of each term over the unperturbed orbit
//! `y = (ᾱ e^{iθ} + α e^{-iθ}) / 2`, for which
//! `⟨yᵏ e^{iqθ}⟩ = 2⁻ᵏ C(k, j) αʲ ᾱᵏ⁻ʲ` with `j = (k + q)/2`.

use num_complex::Complex64;

use super::{AmplificationParams, DriveParams, SpinState};
use crate::constants::{BOHR_MAGNETON, ELECTRON_MASS};
use crate::numeric::binomial;
use crate::trap_model::{TrapPotential, TAYLOR_ORDER};

/// Highest power of y appearing in any force term.
const MAX_POWER: usize = TAYLOR_ORDER - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Gate {
    Always,
    Echo,
}

#[derive(Debug, Clone)]
struct Term {
    poly: Vec<f64>,
    p: i32,
    cos: f64,
    sin: f64,
    gate: Gate,
}

/// Perturbing force relative to a harmonic oscillator at `omega`.
#[derive(Debug, Clone)]
pub(crate) struct ForceModel {
    pub omega: f64,
    terms: Vec<Term>,
    binom: [[f64; MAX_POWER + 1]; MAX_POWER + 1],
    /// Averaged force as `Σ c αʲ ᾱˡ`, split by gate: `(j, l, c)`.
    always: Vec<(usize, usize, Complex64)>,
    echo: Vec<(usize, usize, Complex64)>,
}

impl ForceModel {
    fn new(omega: f64) -> Self {
        let mut binom = [[0.0; MAX_POWER + 1]; MAX_POWER + 1];
        for (n, row) in binom.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = binomial(n, k) / 2f64.powi(n as i32);
            }
        }
        Self {
            omega,
            terms: Vec::new(),
            binom,
            always: Vec::new(),
            echo: Vec::new(),
        }
    }

    /// Collect the averaged terms into monomials of α and ᾱ.
    fn compile(mut self) -> Self {
        let n = MAX_POWER + 1;
        let mut acc = [vec![Complex64::new(0.0, 0.0); n * n], vec![Complex64::new(0.0, 0.0); n * n]];
        for t in &self.terms {
            let which = (t.gate == Gate::Echo) as usize;
            let (cp, cm) = if t.p == 0 {
                (Complex64::new(t.cos, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (
                    Complex64::new(0.5 * t.cos, -0.5 * t.sin),
                    Complex64::new(0.5 * t.cos, 0.5 * t.sin),
                )
            };
            for (k, c) in t.poly.iter().enumerate() {
                for (q, w) in [(t.p + 1, cp), (1 - t.p, cm)] {
                    if w == Complex64::new(0.0, 0.0) || (t.p == 0 && q != 1) {
                        continue;
                    }
                    let twice_j = k as i32 + q;
                    if twice_j < 0 || twice_j % 2 != 0 || twice_j / 2 > k as i32 {
                        continue;
                    }
                    let j = (twice_j / 2) as usize;
                    acc[which][j * n + (k - j)] += w * (*c * self.binom[k][j]);
                }
            }
        }
        let scale = Complex64::new(0.0, 1.0 / (ELECTRON_MASS * self.omega));
        let flatten = |v: &[Complex64]| {
            v.iter()
                .enumerate()
                .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
                .map(|(i, c)| (i / n, i % n, c * scale))
                .collect()
        };
        self.always = flatten(&acc[0]);
        self.echo = flatten(&acc[1]);
        self
    }

    fn push(&mut self, poly: Vec<f64>, p: i32, cos: f64, sin: f64, gate: Gate) {
        if poly.iter().any(|c| *c != 0.0) && (cos != 0.0 || sin != 0.0) {
            self.terms.push(Term {
                poly,
                p,
                cos,
                sin,
                gate,
            });
        }
    }

    /// Trap force beyond `-m ω² y`: anharmonic and curvature-mismatch terms.
    fn push_static(&mut self, pot: &TrapPotential) {
        self.push(static_poly(pot, self.omega), 0, 1.0, 0.0, Gate::Always);
    }

    pub fn drive(
        pot: &TrapPotential,
        omega: f64,
        spin: SpinState,
        drive: &DriveParams,
        magnetic: bool,
    ) -> Self {
        let mut m = Self::new(omega);
        m.push_static(pot);
        let b = drive.field_coefficients();
        if magnetic {
            // -μ_B σ B_x'(y) sin θ
            let s = BOHR_MAGNETON * spin.sigma();
            let poly = vec![s * b[0], 2.0 * s * b[1], 3.0 * s * b[2], 4.0 * s * b[3]];
            m.push(poly, 1, 0.0, -1.0, Gate::Always);
        }
        // Spin-independent force in phase with the spin-up drive.
        m.push(
            vec![drive.spurious_e_ratio * BOHR_MAGNETON * b[0]],
            1,
            0.0,
            -1.0,
            Gate::Echo,
        );
        // Quadratic wire potential following the current waveform -sin θ.
        m.push(
            vec![0.0, drive.eta * ELECTRON_MASS * omega * omega],
            1,
            0.0,
            1.0,
            Gate::Echo,
        );
        m.compile()
    }

    pub fn amplification(pot: &TrapPotential, omega: f64, amp: &AmplificationParams) -> Self {
        let mut m = Self::new(omega);
        m.push_static(pot);
        // -ε sin 2θ · dU/dy
        let du: Vec<f64> = (1..=TAYLOR_ORDER)
            .map(|n| n as f64 * pot.taylor[n])
            .collect();
        m.push(du, 2, 0.0, -amp.epsilon, Gate::Always);
        m.compile()
    }

    /// Instantaneous perturbing force (N).
    pub fn lab_force(&self, y: f64, theta: f64, echo: f64) -> f64 {
        let mut f = 0.0;
        for t in &self.terms {
            let g = match t.gate {
                Gate::Always => 1.0,
                Gate::Echo => echo,
            };
            let ph = t.p as f64 * theta;
            let h = t.cos * ph.cos() + t.sin * ph.sin();
            f += g * h * crate::numeric::polyval(&t.poly, y);
        }
        f
    }

    /// Period-averaged `dα/dt` (m/s).
    pub fn secular_rhs(&self, alpha: Complex64, echo: f64) -> Complex64 {
        let conj = alpha.conj();
        let mut pa = [Complex64::new(1.0, 0.0); MAX_POWER + 1];
        let mut pb = [Complex64::new(1.0, 0.0); MAX_POWER + 1];
        for j in 1..=MAX_POWER {
            pa[j] = pa[j - 1] * alpha;
            pb[j] = pb[j - 1] * conj;
        }
        let sum = |v: &[(usize, usize, Complex64)]| {
            v.iter()
                .fold(Complex64::new(0.0, 0.0), |s, &(j, l, c)| s + c * pa[j] * pb[l])
        };
        let mut acc = sum(&self.always);
        if !self.echo.is_empty() {
            acc += sum(&self.echo) * echo;
        }
        acc
    }
}

/// `-(dU/dy) + m ω² y` as polynomial coefficients in y.
fn static_poly(pot: &TrapPotential, omega: f64) -> Vec<f64> {
    let mut poly: Vec<f64> = (1..=TAYLOR_ORDER)
        .map(|n| -(n as f64) * pot.taylor[n])
        .collect();
    poly[1] += ELECTRON_MASS * omega * omega;
    poly
}
