//! Detuning scan: cooling rate and steady-state occupation versus the
//! common detuning, with the pump powers re-solved at every point.
//!
//! Larger detunings give both a colder steady state and faster cooling.
//! Reduced Fock space and a short window keep the total runtime a few
//! minutes; `deit scan` runs the full-size version in parallel.
//!
//!     cargo run --release --example detuning_scan

use deit_cooling::analysis;
use deit_cooling::config::{apply_set, RunConfig};
use deit_cooling::lindblad::Liouvillian;
use deit_cooling::run;

fn main() -> deit_cooling::Result<()> {
    println!("delta/linewidth   rate (1/s)   fitted n_ss");
    for delta in [1.5, 2.5, 3.5] {
        let mut cfg = RunConfig::default();
        apply_set(&mut cfg, &format!("simulation.delta_linewidths={delta}"))?;
        apply_set(&mut cfg, "simulation.fock_dim=6")?;
        apply_set(&mut cfg, "simulation.nbar0=1.0")?;
        apply_set(&mut cfg, "simulation.t_final_s=60e-6")?;

        let sys = run::tuned_system(&cfg, "axial")?;
        let lv = Liouvillian::build(&sys)?;
        let rho0 = run::initial_state(&cfg, &sys)?;
        let traj = lv.evolve(
            &rho0,
            cfg.simulation.t_final_s,
            5e-6,
            &Default::default(),
        )?;
        let fit = analysis::fit_rate(&traj.times, &traj.nbar)?;
        println!(
            "  {delta:10.1}   {:11.3e}   {:.4}",
            fit.rate,
            fit.n_ss.max(0.0)
        );
    }
    Ok(())
}
