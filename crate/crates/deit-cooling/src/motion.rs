//! Motional modes, beam/mode geometry, and Lamb-Dicke parameters.
//!
//! Each mode is simulated as an independent 1-D problem; the geometry only
//! enters through the signed projection of each beam's wave vector onto the
//! mode axis.

use crate::atom::Beam;
use crate::constants::HBAR;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    Axial,
    Radial1,
    Radial2,
}

/// One harmonic motional mode of the trapped ion.
#[derive(Clone, Debug)]
pub struct MotionalMode {
    pub label: ModeLabel,
    /// Trap angular frequency ν, rad/s.
    pub frequency: f64,
    /// Unit mode axis in the lab frame.
    pub axis: [f64; 3],
    /// Fock truncation dimension N.
    pub fock_dim: usize,
    /// Ion mass, kg.
    pub mass: f64,
}

impl MotionalMode {
    pub fn validate(&self) -> Result<()> {
        if self.frequency <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "mode {:?} frequency must be > 0",
                self.label
            )));
        }
        if self.fock_dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "mode {:?} fock_dim must be >= 2",
                self.label
            )));
        }
        let n: f64 = self.axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mode {:?} axis {:?} is not a unit vector",
                self.label, self.axis
            )));
        }
        Ok(())
    }

    /// Ground-state size √(ħ/2mν), m.
    pub fn ground_state_size(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.frequency)).sqrt()
    }
}

/// Trap/beam geometry. The trap axis is z; the two radial mode axes lie in
/// the xy-plane, rotated around z by the configured angles from the
/// xz-plane of the cooling beams.
#[derive(Clone, Debug)]
pub struct GeometryConfig {
    /// Angle of the logic (thermometry) beam from the cooling plane, degrees.
    pub logic_angle_deg: f64,
    /// Angles of the two radial mode axes from the xz-plane, degrees.
    pub radial_mode_angles_deg: [f64; 2],
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { logic_angle_deg: 54.7, radial_mode_angles_deg: [26.0, -64.0] }
    }
}

impl GeometryConfig {
    /// Mode axes (axial, radial1, radial2) in the lab frame.
    pub fn mode_axes(&self) -> [[f64; 3]; 3] {
        let a1 = self.radial_mode_angles_deg[0].to_radians();
        let a2 = self.radial_mode_angles_deg[1].to_radians();
        [
            [0.0, 0.0, 1.0],
            [a1.cos(), a1.sin(), 0.0],
            [a2.cos(), a2.sin(), 0.0],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let axes = self.mode_axes();
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..3 {
            for j in (i + 1)..3 {
                if dot(&axes[i], &axes[j]).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "mode axes {} and {} are not orthogonal (angles {:?})",
                        i, j, self.radial_mode_angles_deg
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Signed Lamb-Dicke parameter of one beam with respect to one mode:
/// η = (2π/λ) (k̂ · â) √(ħ/2mν).
pub fn lamb_dicke(beam: &Beam, mode: &MotionalMode) -> f64 {
    let k = std::f64::consts::TAU / beam.class.wavelength();
    let cosine: f64 = beam
        .direction
        .iter()
        .zip(mode.axis.iter())
        .map(|(b, a)| b * a)
        .sum();
    k * cosine * mode.ground_state_size()
}

/// Per-beam Lamb-Dicke parameters for one mode, in beam order. For two-beam
/// Raman-like couplings each photon kick enters through its own coupling,
/// so the table is per beam rather than per beam pair.
pub fn effective_mode_eta(mode: &MotionalMode, beams: &[Beam]) -> Vec<f64> {
    beams.iter().map(|b| lamb_dicke(b, mode)).collect()
}
