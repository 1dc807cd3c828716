//! Steady state of the cooled ion: final phonon occupation, photon
//! scattering rate, and electronic populations.
//!
//! A small Fock space keeps the null-space solve direct and fast.
//!
//!     cargo run --release --example steady_state

use deit_cooling::atom::NUM_SUBLEVELS;
use deit_cooling::config::{apply_set, RunConfig};
use deit_cooling::lindblad::{self, Liouvillian};
use deit_cooling::run;

fn main() -> deit_cooling::Result<()> {
    let mut cfg = RunConfig::default();
    apply_set(&mut cfg, "simulation.fock_dim=6")?;

    let sys = run::tuned_system(&cfg, "axial")?;
    let lv = Liouvillian::build(&sys)?;
    let rho = lv.steady_state()?;

    println!("axial steady state:");
    println!("  n_ss             = {:.4}", lindblad::nbar(&rho));
    println!("  scattering rate  = {:.3e}/s", lv.scattering_rate(&rho));

    let names = [
        "S(-1/2)", "S(+1/2)", "P(-1/2)", "P(+1/2)", "D(-3/2)", "D(-1/2)",
        "D(+1/2)", "D(+3/2)",
    ];
    let fock = sys.mode.fock_dim;
    let m = rho.matrix();
    println!("  electronic populations:");
    for s in 0..NUM_SUBLEVELS {
        let p: f64 =
            (0..fock).map(|n| m[[s * fock + n, s * fock + n]].re).sum();
        println!("    {:<8} {p:.5}", names[s]);
    }
    Ok(())
}
