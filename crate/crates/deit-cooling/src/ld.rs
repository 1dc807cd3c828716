//! Closed-form Lamb-Dicke predictions for EIT and D-EIT cooling, and the
//! analytic bright-state tuner that places the Stark-shifted bright
//! resonances on the motional red sidebands.

use serde::Serialize;

use crate::error::{Error, Result};

/// Warn when R / (ν²/2γ) exceeds this; the closed forms assume the ratio
/// is small.
pub const VALIDITY_WARN_RATIO: f64 = 0.1;

/// A closed-form cooling prediction with its validity diagnostic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LdPrediction {
    /// Cooling rate, 1/s.
    pub rate: f64,
    /// Steady-state occupation.
    pub n_ss: f64,
    /// R / (ν²/2γ); the perturbative result holds only for small values.
    pub validity_ratio: f64,
    pub validity_warning: bool,
}

impl LdPrediction {
    pub fn new(rate: f64, n_ss: f64, nu: f64, gamma: f64) -> Self {
        let validity_ratio = rate / (nu * nu / (2.0 * gamma));
        Self { rate, n_ss, validity_ratio, validity_warning: validity_ratio > VALIDITY_WARN_RATIO }
    }
}

/// Optimal EIT cooling rate η²Ω_π²/(2γ), 1/s if inputs are rad/s.
pub fn eit_rate(eta: f64, omega_pi: f64, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument("gamma must be > 0".into()));
    }
    Ok(eta * eta * omega_pi * omega_pi / (2.0 * gamma))
}

/// Single-EIT steady-state occupation
/// (γ²/(4Δ²+γ²))·(1 + 2Ω_π²/(Ω_π²+Ω_σ²)); the second term is the heating
/// contribution of the spurious π coupling to P₁/₂ m=−1/2.
pub fn eit_nss(delta: f64, gamma: f64, omega_pi: f64, omega_sigma: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    let omega2 = omega_pi * omega_pi + omega_sigma * omega_sigma;
    if omega2 == 0.0 {
        return Err(Error::InvalidArgument(
            "eit_nss undefined when both Rabi frequencies vanish".into(),
        ));
    }
    let base = gamma * gamma / (4.0 * delta * delta + gamma * gamma);
    Ok(base * (1.0 + 2.0 * omega_pi * omega_pi / omega2))
}

/// D-EIT steady-state occupation γ²/(4Δ²+γ²); the spurious-coupling term is
/// eliminated by the second Λ.
pub fn deit_nss(delta: f64, gamma: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    Ok(gamma * gamma / (4.0 * delta * delta + gamma * gamma))
}

/// Dressed-state light shift (√(Δ²+Ω²) − Δ)/2 that places the bright state.
pub fn stark_shift(delta: f64, omega_pump: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    if omega_pump < 0.0 {
        return Err(Error::InvalidArgument("omega_pump must be >= 0".into()));
    }
    Ok(((delta * delta + omega_pump * omega_pump).sqrt() - delta) / 2.0)
}

/// Pump Rabi frequency whose light shift equals `nu_target`:
/// Ω = 2√(ν(ν+Δ)), the exact inverse of [`stark_shift`].
pub fn tune_pump(delta: f64, nu_target: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("delta must be > 0".into()));
    }
    if nu_target < 0.0 {
        return Err(Error::InvalidArgument("nu_target must be >= 0".into()));
    }
    Ok(2.0 * (nu_target * (nu_target + delta)).sqrt())
}

/// D-EIT upper bound on R/ν: 2Δη²/γ.
pub fn max_rate_ratio(delta: f64, gamma: f64, eta: f64) -> Result<f64> {
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidArgument("delta and gamma must be > 0".into()));
    }
    Ok(2.0 * delta * eta * eta / gamma)
}
