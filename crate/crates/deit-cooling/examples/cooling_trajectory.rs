//! Cooling trajectory n̄(t) of the axial mode under double-bright EIT
//! cooling, with an exponential rate fit.
//!
//! Uses a reduced Fock space and a short window so the run finishes in
//! about a minute; the `deit cool` subcommand runs the full-size version.
//!
//!     cargo run --release --example cooling_trajectory

use deit_cooling::analysis;
use deit_cooling::config::{apply_set, RunConfig};
use deit_cooling::lindblad::Liouvillian;
use deit_cooling::run;

fn main() -> deit_cooling::Result<()> {
    let mut cfg = RunConfig::default();
    apply_set(&mut cfg, "simulation.fock_dim=8")?;
    apply_set(&mut cfg, "simulation.nbar0=1.0")?;
    apply_set(&mut cfg, "simulation.t_final_s=100e-6")?;
    apply_set(&mut cfg, "simulation.sample_dt_s=5e-6")?;

    let sys = run::tuned_system(&cfg, "axial")?;
    let lv = Liouvillian::build(&sys)?;
    let rho0 = run::initial_state(&cfg, &sys)?;
    let traj = lv.evolve(
        &rho0,
        cfg.simulation.t_final_s,
        cfg.simulation.sample_dt_s,
        &Default::default(),
    )?;

    println!("time vs mean phonon number:");
    for (t, n) in traj.times.iter().zip(&traj.nbar) {
        let bar = "#".repeat((n * 40.0) as usize);
        println!("  {:6.1} us  n = {n:.4}  {bar}", t * 1e6);
    }

    let fit = analysis::fit_rate(&traj.times, &traj.nbar)?;
    println!(
        "\nexponential fit: rate = {:.3e}/s, n_ss = {:.4}, \
         initial n = {:.3}, rms residual {:.1e}",
        fit.rate, fit.n_ss, fit.n0, fit.rms_residual
    );
    println!(
        "conservation: trace deviation {:.1e}, min eigenvalue {:.1e}",
        traj.conservation.max_trace_deviation,
        traj.conservation.min_eigenvalue
    );
    Ok(())
}
