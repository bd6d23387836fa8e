//! Simulation toolkit for single-shot spin readout of an electron in a
//! surface Paul trap.
//!
//! The readout runs in four stages: the axial mode is cooled, an
//! oscillating magnetic-field gradient displaces it in a spin-dependent
//! direction, a parametric modulation of the trap curvature amplifies the
//! in-phase quadrature, and the image current is demodulated against the
//! Johnson noise of the pickup resistor.
//!
//! Modules map to those stages:
//! - [`trap_model`]: electrode layout, voltage fit, Taylor coefficients.
//! - [`wire_fields`]: Biot–Savart fields and electric side effects of the
//!   drive circuits.
//! - [`dynamics`]: rotating-frame and lab-frame integrators of the axial
//!   motion.
//! - [`detection`]: detector circuit, noise statistics and SNR.
//! - [`pipeline`]: Monte Carlo over thermal initial states.
//! - [`cli`]: command line front end.

pub mod cli;
pub mod constants;
pub mod detection;
pub mod dynamics;
pub mod numeric;
pub mod pipeline;
pub mod trap_model;
pub mod wire_fields;

pub use dynamics::{MotionalState, SpinState};
