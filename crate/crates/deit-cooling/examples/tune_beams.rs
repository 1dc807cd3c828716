//! Pump-power solving: place both bright states on their target mode
//! frequencies.
//!
//! Shows the analytic seed (two-level bright-state inversion per pump
//! leg), the refined powers after closing the loop on the full
//! dressed-state model with cross Stark shifts, and the resonance
//! positions actually achieved.
//!
//!     cargo run --release --example tune_beams

use deit_cooling::analysis;
use deit_cooling::config::RunConfig;
use deit_cooling::constants::TWO_PI;
use deit_cooling::run;

fn main() -> deit_cooling::Result<()> {
    let cfg = RunConfig::default();

    let seeded = cfg.build_system("axial")?;
    println!("analytic seeds:");
    for b in &seeded.beams {
        println!("  {:>8}: 2pi x {:7.3} MHz", b.name, b.rabi / TWO_PI / 1e6);
    }

    let sys = run::tuned_system(&cfg, "axial")?;
    println!("\nrefined on the dressed-state model:");
    for b in &sys.beams {
        println!("  {:>8}: 2pi x {:7.3} MHz", b.name, b.rabi / TWO_PI / 1e6);
    }

    println!("\nachieved bright-state positions:");
    for (name, target) in cfg.tune_targets()? {
        let idx = sys.beams.iter().position(|b| b.name == name).unwrap();
        let at = analysis::controlled_resonance(&sys, idx)?;
        println!(
            "  {name}: {:.1} kHz (target {:.1} kHz, error {:+.2}%)",
            at / TWO_PI / 1e3,
            target / TWO_PI / 1e3,
            100.0 * (at - target) / target
        );
    }
    Ok(())
}
