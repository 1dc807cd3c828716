//! Physical constants (CODATA 2018) and ⁴⁰Ca⁺ defaults.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_0783e-24;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// ⁴⁰Ca atomic mass in u.
pub const CA40_MASS_AMU: f64 = 39.962_590_9;

/// S₁/₂–P₁/₂ transition wavelength, m.
pub const LAMBDA_397: f64 = 396.847e-9;

/// D₃/₂–P₁/₂ transition wavelength, m.
pub const LAMBDA_866: f64 = 866.214e-9;

/// Landé g-factor of S₁/₂ (includes the QED correction).
pub const G_S12: f64 = 2.002;

/// Landé g-factor of P₁/₂.
pub const G_P12: f64 = 2.0 / 3.0;

/// Landé g-factor of D₃/₂.
pub const G_D32: f64 = 4.0 / 5.0;

pub const TWO_PI: f64 = std::f64::consts::TAU;
