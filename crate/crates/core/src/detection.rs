//! Image-current detection through a resistor at temperature `T_e`.
//!
//! The electron between pickup electrodes behaves as a series LC with
//! `L = m d_eff²/e²`. Its motion rings down at `γ = R/L` into the resistor,
//! and the detector voltage is demodulated at ω against a local oscillator
//! in phase with spin-up motion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::constants::{BOLTZMANN, ELECTRON_MASS, ELEMENTARY_CHARGE};
use crate::dynamics::SpinState;
use crate::numeric::GaussLegendre;

/// Damping-time product assumed by the SNR formula.
pub const FULL_DAMPING: f64 = 4.0;

/// Equivalent circuit of the trapped electron and pickup resistor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCircuit {
    pub r: f64,
    pub d_eff: f64,
    pub t_e: f64,
    pub omega: f64,
    pub l_eff: f64,
    pub c_eff: f64,
    pub gamma: f64,
    pub t_det: f64,
}

/// Circuit with `T_e = 4 K` and `t_det = 4/γ`.
pub fn circuit_params(r: f64, d_eff: f64, omega: f64) -> DetectionCircuit {
    assert!(r > 0.0 && d_eff > 0.0 && omega > 0.0, "circuit parameters must be positive");
    let l_eff = ELECTRON_MASS * d_eff * d_eff / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE);
    let c_eff = 1.0 / (omega * omega * l_eff);
    let gamma = r / l_eff;
    if gamma > omega / 100.0 {
        log::warn!("damping rate {gamma:.3e} s⁻¹ is not small against ω = {omega:.3e}");
    }
    DetectionCircuit {
        r,
        d_eff,
        t_e: 4.0,
        omega,
        l_eff,
        c_eff,
        gamma,
        t_det: FULL_DAMPING / gamma,
    }
}

impl DetectionCircuit {
    pub fn with_temperature(mut self, t_e: f64) -> Self {
        self.t_e = t_e;
        self
    }

    pub fn with_t_det(mut self, t_det: f64) -> Self {
        self.t_det = t_det;
        self
    }

    /// `γ t_det`.
    pub fn damping_product(&self) -> f64 {
        self.gamma * self.t_det
    }

    /// Closed-form demodulated noise variance `k_B T_e R / t_det` (V²).
    pub fn noise_variance(&self) -> f64 {
        BOLTZMANN * self.t_e * self.r / self.t_det
    }

    /// Peak detector voltage `γ m d_eff ω A / e` for amplitude `a` (V).
    pub fn peak_voltage(&self, a: f64) -> f64 {
        self.gamma * ELECTRON_MASS * self.d_eff * self.omega * a / ELEMENTARY_CHARGE
    }

    fn check_damping(&self) {
        if self.damping_product() < FULL_DAMPING * (1.0 - 1e-9) {
            log::warn!(
                "γ t_det = {:.3} is below {FULL_DAMPING}; motion is not fully damped",
                self.damping_product()
            );
        }
    }
}

/// Signed signal-to-noise ratio `√(m ω² A² / (γ t_det k_B T_e))`.
pub fn snr(a0_amp: f64, c: &DetectionCircuit) -> f64 {
    c.check_damping();
    let den = c.gamma * c.t_det * BOLTZMANN * c.t_e;
    a0_amp * (ELECTRON_MASS * c.omega * c.omega / den).sqrt()
}

/// Probability that the sign of signal plus unit Gaussian noise matches `spin`.
pub fn p_correct(snr_signed: f64, spin: SpinState) -> f64 {
    normal_cdf(spin.sigma() * snr_signed)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Demodulated signal `V_0 / (γ t_det)` (V).
pub fn signal_demod(a0_amp: f64, c: &DetectionCircuit) -> f64 {
    c.check_damping();
    c.peak_voltage(a0_amp) / (c.gamma * c.t_det)
}

/// `(1/t_det) ∫₀^{t_det} V_0 e^{-γt/2} cos² ωt dt` by quadrature.
pub fn signal_demod_time_domain(a0_amp: f64, c: &DetectionCircuit) -> f64 {
    let v0 = c.peak_voltage(a0_amp);
    let periods = (c.t_det * c.omega / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let gl = GaussLegendre::new(8);
    let integral = gl.integrate(0.0, c.t_det, periods * 4, |t| {
        let ct = (c.omega * t).cos();
        (-0.5 * c.gamma * t).exp() * ct * ct
    });
    v0 * integral / c.t_det
}

/// Empirical statistics of the demodulated Johnson noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub n_realizations: usize,
    /// Variance of `N` with the electron loading the resistor (V²).
    pub variance: f64,
    pub variance_stderr: f64,
    /// Variance of the demodulated bare resistor noise (V²).
    pub johnson_only_variance: f64,
    /// `k_B T_e R / t_det` (V²).
    pub analytic: f64,
}

/// Samples per oscillation period used by [`noise_demod_sim`].
pub const NOISE_SAMPLES_PER_PERIOD: usize = 20;

/// Monte Carlo of the demodulated noise voltage.
///
/// Each realization draws white resistor noise with variance
/// `2 k_B T_e R / Δt` per sample, drives the damped electron with it through
/// the exact zero-order-hold propagator, forms
/// `V_N = v_N + (R e / d_eff)·ẏ_N` and demodulates against `cos ωt`.
/// Realization `k` uses ChaCha8 stream `k` of `seed`.
pub fn noise_demod_sim(c: &DetectionCircuit, n_realizations: usize, seed: u64) -> NoiseStats {
    noise_demod_sim_with(c, n_realizations, seed, NOISE_SAMPLES_PER_PERIOD)
}

pub fn noise_demod_sim_with(
    c: &DetectionCircuit,
    n_realizations: usize,
    seed: u64,
    samples_per_period: usize,
) -> NoiseStats {
    assert!(samples_per_period >= 20, "need at least 20 samples per period");
    assert!(n_realizations >= 2, "need at least two realizations");
    if n_realizations < 100 {
        log::warn!("{n_realizations} realizations give a poor variance estimate");
    }
    let period = 2.0 * std::f64::consts::PI / c.omega;
    let dt = period / samples_per_period as f64;
    let n_steps = (c.t_det / dt).round().max(1.0) as usize;
    let prop = Propagator::new(c.omega, c.gamma, dt);
    let sigma_v = (2.0 * BOLTZMANN * c.t_e * c.r / dt).sqrt();
    let accel_per_volt = -ELEMENTARY_CHARGE / (ELECTRON_MASS * c.d_eff);
    let back = c.gamma * ELECTRON_MASS * c.d_eff / ELEMENTARY_CHARGE;
    let lo: Vec<f64> = (0..n_steps).map(|k| (c.omega * k as f64 * dt).cos()).collect();
    let t_total = n_steps as f64 * dt;

    let pairs: Vec<(f64, f64)> = (0..n_realizations)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (mut y, mut u) = (0.0, 0.0);
            let (mut full, mut bare) = (0.0, 0.0);
            for l in &lo {
                let z: f64 = StandardNormal.sample(&mut rng);
                let vn = sigma_v * z;
                full += l * (vn + back * u);
                bare += l * vn;
                (y, u) = prop.step(y, u, accel_per_volt * vn);
            }
            (full * dt / t_total, bare * dt / t_total)
        })
        .collect();

    let n = pairs.len() as f64;
    let m2: f64 = pairs.iter().map(|p| p.0 * p.0).sum::<f64>() / n;
    let m4: f64 = pairs.iter().map(|p| p.0.powi(4)).sum::<f64>() / n;
    let bare: f64 = pairs.iter().map(|p| p.1 * p.1).sum::<f64>() / n;
    let analytic = BOLTZMANN * c.t_e * c.r / c.t_det;
    NoiseStats {
        n_realizations,
        variance: m2,
        variance_stderr: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        johnson_only_variance: bare,
        analytic,
    }
}

/// Exact one-step map of `ÿ + γ ẏ + ω² y = a` with `a` held constant.
#[derive(Debug, Clone, Copy)]
struct Propagator {
    m: [[f64; 2]; 2],
    g: [f64; 2],
}

impl Propagator {
    fn new(omega: f64, gamma: f64, dt: f64) -> Self {
        let wd = (omega * omega - 0.25 * gamma * gamma).sqrt();
        let e = (-0.5 * gamma * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let k = 0.5 * gamma / wd;
        let m = [
            [e * (c + k * s), e * s / wd],
            [-e * omega * omega * s / wd, e * (c - k * s)],
        ];
        // steady state a/ω² relaxes through the homogeneous map
        let w2 = omega * omega;
        let g = [(1.0 - m[0][0]) / w2, -m[1][0] / w2];
        Self { m, g }
    }

    fn step(&self, y: f64, u: f64, a: f64) -> (f64, f64) {
        (
            self.m[0][0] * y + self.m[0][1] * u + self.g[0] * a,
            self.m[1][0] * y + self.m[1][1] * u + self.g[1] * a,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::DEFAULT_OMEGA;

    #[test]
    fn propagator_matches_fine_rk4() {
        let (w, g, dt, a) = (2.0, 0.3, 0.7, 1.5);
        let p = Propagator::new(w, g, dt);
        let (mut y, mut u) = (0.2, -0.1);
        let n = 20000;
        let h = dt / n as f64;
        let f = |y: f64, u: f64| (u, a - g * u - w * w * y);
        for _ in 0..n {
            let k1 = f(y, u);
            let k2 = f(y + 0.5 * h * k1.0, u + 0.5 * h * k1.1);
            let k3 = f(y + 0.5 * h * k2.0, u + 0.5 * h * k2.1);
            let k4 = f(y + h * k3.0, u + h * k3.1);
            y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            u += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        let (y1, u1) = p.step(0.2, -0.1, a);
        assert!((y1 - y).abs() < 1e-12 && (u1 - u).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_has_no_noise() {
        let c = circuit_params(160e3, 66e-6, DEFAULT_OMEGA).with_temperature(0.0);
        let s = noise_demod_sim(&c, 100, 1);
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.analytic, 0.0);
    }

    #[test]
    fn normal_cdf_reference_values() {
        // erfc here is good to about 1e-11 relative
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(-2.0) / 0.022_750_131_948_179_2 - 1.0).abs() < 1e-10);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-10);
        assert!(((1.0 - normal_cdf(6.05)) / 7.242_29e-10 - 1.0).abs() < 1e-4);
    }
}
