//! Probe scattering spectrum of the tuned double-bright configuration.
//!
//! Scans the probe detuning across the dark resonance and both bright
//! states and prints the scattering rate, the dark point, and the visible
//! bright peaks. The electronic-only spectrum needs no motional
//! Hilbert space, so this runs in well under a second.
//!
//!     cargo run --release --example spectrum

use deit_cooling::analysis;
use deit_cooling::config::RunConfig;
use deit_cooling::constants::TWO_PI;
use deit_cooling::run;

fn main() -> deit_cooling::Result<()> {
    let cfg = RunConfig::default();
    let sys = run::tuned_system(&cfg, "axial")?;

    println!("tuned pump powers:");
    for b in &sys.beams {
        println!("  {:>8}: 2pi x {:7.3} MHz", b.name, b.rabi / TWO_PI / 1e6);
    }

    let n = 161;
    let (lo, hi) = (-0.5e6, 3.5e6);
    let offsets: Vec<f64> = (0..n)
        .map(|i| TWO_PI * (lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect();
    let spectrum = analysis::scattering_spectrum(&sys, &offsets)?;

    println!("\nprobe offset vs scattering rate:");
    for p in spectrum.points.iter().step_by(8) {
        let khz = p.offset / TWO_PI / 1e3;
        let bar = "#".repeat((p.rate / 3e4).min(60.0) as usize);
        println!("  {khz:8.1} kHz  {:10.3e}/s  {bar}", p.rate);
    }

    if let Some(dark) = spectrum.dark_point() {
        println!(
            "\ndark resonance at {:+.1} kHz, rate {:.2e}/s",
            dark.offset / TWO_PI / 1e3,
            dark.rate
        );
    }
    for peak in spectrum.bright_peaks() {
        println!(
            "bright peak at {:+.1} kHz, rate {:.3e}/s",
            peak.offset / TWO_PI / 1e3,
            peak.rate
        );
    }

    println!("\nnarrow dressed states (the tuned bright resonances):");
    for r in analysis::dressed_resonances(&sys)? {
        if r.offset > 0.0 && r.width < 0.5 * sys.gamma_total {
            println!(
                "  offset {:+9.1} kHz, width {:6.1} kHz, \
                 S/P/D parentage {:.2}/{:.2}/{:.2}",
                r.offset / TWO_PI / 1e3,
                r.width / TWO_PI / 1e3,
                r.s_weight,
                r.p_weight,
                r.d_weight
            );
        }
    }
    Ok(())
}
