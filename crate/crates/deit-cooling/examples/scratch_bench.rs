// temporary: RHS micro-benchmark at full size
use deit_cooling::config::RunConfig;
use deit_cooling::lindblad::Liouvillian;
use deit_cooling::run;

fn main() {
    let cfg = RunConfig::default();
    let sys = run::tuned_system(&cfg, "axial").unwrap();
    let lv = Liouvillian::build(&sys).unwrap();
    let rho0 = run::initial_state(&cfg, &sys).unwrap();
    println!("jumps: {}", lv.jumps().len());
    let t0 = std::time::Instant::now();
    let traj = lv.evolve(&rho0, 5e-6, 5e-6, &Default::default()).unwrap();
    println!(
        "5us evolve: {:?}, accepted {} steps",
        t0.elapsed(),
        traj.conservation.accepted_steps
    );
}
