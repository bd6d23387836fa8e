//! CODATA 2018 physical constants in SI units.

use std::f64::consts::PI;

/// Electron rest mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability (N/A²).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// One micrometre in metres.
pub const MICRON: f64 = 1e-6;

/// Default axial angular frequency, 2π·300 MHz.
pub const DEFAULT_OMEGA: f64 = 2.0 * PI * 300e6;
