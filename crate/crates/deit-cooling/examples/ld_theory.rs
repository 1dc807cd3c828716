//! Closed-form Lamb-Dicke-regime predictions: cooling rates, steady-state
//! occupations, bright-state Stark shifts, and the pump powers that place
//! a bright state on a mode frequency.
//!
//!     cargo run --release --example ld_theory

use deit_cooling::constants::TWO_PI;
use deit_cooling::ld;

fn main() -> deit_cooling::Result<()> {
    let gamma = TWO_PI * 20.7e6;
    let delta = 3.4 * gamma;
    let nu_a = TWO_PI * 904.6e3;
    let nu_r = TWO_PI * 2.552e6;
    let eta = 0.187; // axial probe Lamb-Dicke parameter
    let omega_pi = TWO_PI * 3.1e6; // weak probe

    println!("detuning 3.4 linewidths, weak probe 2pi x 3.1 MHz:");
    println!(
        "  EIT cooling rate       = {:.3e} phonons/s",
        ld::eit_rate(eta, omega_pi, gamma)?
    );
    println!(
        "  single-EIT n_ss        = {:.4}",
        ld::eit_nss(delta, gamma, omega_pi, TWO_PI * 20.0e6)?
    );
    println!(
        "  double-EIT n_ss        = {:.4} (probe-power independent)",
        ld::deit_nss(delta, gamma)?
    );
    println!(
        "  max rate / nu bound    = {:.3}",
        ld::max_rate_ratio(delta, gamma, eta)?
    );

    println!("\npump-power inversion (two-level leg values):");
    for (name, nu) in [("axial", nu_a), ("radial", nu_r)] {
        let omega = ld::tune_pump(delta, nu)?;
        let check = ld::stark_shift(delta, omega)?;
        println!(
            "  {name}: bright state at {:.1} kHz needs leg Rabi \
             2pi x {:.2} MHz (round trip {:.1} kHz)",
            nu / TWO_PI / 1e3,
            omega / TWO_PI / 1e6,
            check / TWO_PI / 1e3
        );
    }
    Ok(())
}
