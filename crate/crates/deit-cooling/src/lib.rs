//! Simulation toolkit for single- and double-bright EIT cooling of a trapped
//! ⁴⁰Ca⁺ ion.
//!
//! The crate builds the dissipative atom–laser–motion model (8 Zeeman
//! sublevels of S₁/₂, P₁/₂, D₃/₂ coupled to one harmonic motional mode),
//! evolves it under the Lindblad master equation, and extracts the
//! observables of interest: scattering spectra with their dark and bright
//! (Fano) resonances, cooling trajectories n̄(t), fitted cooling rates,
//! steady-state occupations, and closed-form Lamb-Dicke predictions.
//!
//! Frequencies are angular (rad/s) everywhere in the library; the
//! configuration layer accepts linear frequencies in Hz and converts on
//! load. See the `examples/` directory for runnable entry points covering
//! each capability and the `deit` binary for the batch interface.

pub mod analysis;
pub mod atom;
mod cmat;
pub mod config;
pub mod constants;
pub mod error;
pub mod ld;
pub mod lindblad;
pub mod motion;
pub mod operator;
pub mod report;
pub mod run;

pub use error::{Error, Result};
