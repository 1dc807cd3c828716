//! Subcommand orchestration: turn a validated [`RunConfig`] into model
//! runs and emitted data files.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, RateFit, Resonance};
use crate::atom::{IDX_S_PLUS, NUM_SUBLEVELS};
use crate::config::{self, RunConfig};
use crate::constants::TWO_PI;
use crate::error::{Error, Result};
use crate::ld;
use crate::lindblad::{
    nbar, CoolingTrajectory, EvolveOptions, Liouvillian, SystemConfig,
};
use crate::motion;
use crate::operator::{DensityState, HilbertSpace};
use crate::report::{Column, Report};

/// The batch subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Probe scattering spectrum of the tuned configuration.
    Spectrum,
    /// Cooling trajectory n̄(t) of the selected mode, with a rate fit.
    Cool,
    /// Steady state of the selected mode.
    Steady,
    /// Sweep the common detuning, retuning the pumps at every point.
    Scan,
    /// Solve the pump powers for the configured targets.
    Tune,
    /// Closed-form Lamb-Dicke predictions for all modes.
    LdTheory,
}

/// Run one subcommand; returns the paths of the emitted files.
pub fn execute(
    cmd: Command,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let resolved = config::serialize_config(cfg)?;
    let report = Report::create(out_dir, &resolved)?;
    match cmd {
        Command::Spectrum => run_spectrum(cfg, &report),
        Command::Cool => run_cool(cfg, &report),
        Command::Steady => run_steady(cfg, &report),
        Command::Scan => run_scan(cfg, &report),
        Command::Tune => run_tune(cfg, &report),
        Command::LdTheory => run_ldtheory(cfg, &report),
    }
}

/// Build the simulation for `mode_name` and, if enabled, refine the pump
/// powers so the bright states sit on their target mode frequencies.
pub fn tuned_system(cfg: &RunConfig, mode_name: &str) -> Result<SystemConfig> {
    let mut sys = cfg.build_system(mode_name)?;
    if cfg.tune.refine {
        let targets = cfg.tune_targets()?;
        let pumps: Vec<(&str, f64)> =
            targets.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        analysis::tune_pumps(&mut sys, &pumps, cfg.tune.rel_tol)?;
    }
    Ok(sys)
}

/// Initial state: the optically pumped S(+1/2) electronic state with a
/// thermal motional distribution at the configured n̄₀.
pub fn initial_state(cfg: &RunConfig, sys: &SystemConfig) -> Result<DensityState> {
    let mut psi = Array1::<C64>::zeros(NUM_SUBLEVELS);
    psi[IDX_S_PLUS] = C64::new(1.0, 0.0);
    let electronic =
        DensityState::pure(HilbertSpace::single(NUM_SUBLEVELS), &psi)?;
    let motional =
        DensityState::thermal(cfg.simulation.nbar0, sys.mode.fock_dim)?;
    DensityState::product(&electronic, &motional)
}

fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions { abs_tol: cfg.simulation.abs_tol, ..EvolveOptions::default() }
}

#[derive(Serialize)]
struct SpectrumSummary {
    dark_offset_hz: Option<f64>,
    dark_rate_per_s: Option<f64>,
    bright_peaks_hz: Vec<f64>,
    bright_rates_per_s: Vec<f64>,
    resonances: Vec<ResonanceOut>,
}

#[derive(Serialize)]
struct ResonanceOut {
    offset_hz: f64,
    width_hz: f64,
    s_weight: f64,
    p_weight: f64,
    d_weight: f64,
}

impl From<&Resonance> for ResonanceOut {
    fn from(r: &Resonance) -> Self {
        Self {
            offset_hz: r.offset / TWO_PI,
            width_hz: r.width / TWO_PI,
            s_weight: r.s_weight,
            p_weight: r.p_weight,
            d_weight: r.d_weight,
        }
    }
}

fn run_spectrum(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let sys = tuned_system(cfg, &cfg.simulation.mode)?;
    let sp = &cfg.spectrum;
    if sp.points < 2 {
        return Err(Error::Config("spectrum.points must be >= 2".into()));
    }
    let offsets: Vec<f64> = (0..sp.points)
        .map(|i| {
            TWO_PI
                * (sp.offset_min_hz
                    + (sp.offset_max_hz - sp.offset_min_hz) * i as f64
                        / (sp.points - 1) as f64)
        })
        .collect();
    let spectrum = analysis::scattering_spectrum(&sys, &offsets)?;
    let csv = report.write_csv(
        "spectrum.csv",
        &[
            Column::new(
                "probe_offset_hz",
                spectrum.points.iter().map(|p| p.offset / TWO_PI).collect(),
            ),
            Column::new(
                "scatter_rate_per_s",
                spectrum.points.iter().map(|p| p.rate).collect(),
            ),
        ],
    )?;
    let peaks = spectrum.bright_peaks();
    let dark = spectrum.dark_point();
    let resonances = analysis::dressed_resonances(&sys)?;
    let summary = SpectrumSummary {
        dark_offset_hz: dark.map(|p| p.offset / TWO_PI),
        dark_rate_per_s: dark.map(|p| p.rate),
        bright_peaks_hz: peaks.iter().map(|p| p.offset / TWO_PI).collect(),
        bright_rates_per_s: peaks.iter().map(|p| p.rate).collect(),
        resonances: resonances.iter().map(ResonanceOut::from).collect(),
    };
    let json = report.write_json("spectrum.json", &summary)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct CoolSummary {
    mode: String,
    fit: Option<RateFit>,
    final_nbar: f64,
    beam_rabi_hz: Vec<(String, f64)>,
    conservation: ConservationOut,
}

#[derive(Serialize)]
struct ConservationOut {
    max_trace_deviation: f64,
    max_hermiticity_deviation: f64,
    min_eigenvalue: f64,
    max_population_sum_deviation: f64,
}

fn trajectory_files(
    name: &str,
    mode: &str,
    traj: &CoolingTrajectory,
    fit: Option<RateFit>,
    sys: &SystemConfig,
    report: &Report,
) -> Result<Vec<PathBuf>> {
    let mut columns = vec![
        Column::new("time_s", traj.times.clone()),
        Column::new("nbar", traj.nbar.clone()),
        Column::new("scatter_rate_per_s", traj.scatter_rate.clone()),
    ];
    for (i, lv) in sys.sublevels.iter().enumerate() {
        let header = format!(
            "pop_{:?}_mj{}{}",
            lv.term,
            if lv.mj2 < 0 { "m" } else { "p" },
            lv.mj2.abs()
        )
        .to_lowercase();
        columns.push(Column::new(
            &header,
            traj.populations.iter().map(|p| p[i]).collect(),
        ));
    }
    let csv = report.write_csv(&format!("{name}.csv"), &columns)?;
    let summary = CoolSummary {
        mode: mode.to_string(),
        fit,
        final_nbar: *traj.nbar.last().unwrap(),
        beam_rabi_hz: sys
            .beams
            .iter()
            .map(|b| (b.name.clone(), b.rabi / TWO_PI))
            .collect(),
        conservation: ConservationOut {
            max_trace_deviation: traj.conservation.max_trace_deviation,
            max_hermiticity_deviation: traj
                .conservation
                .max_hermiticity_deviation,
            min_eigenvalue: traj.conservation.min_eigenvalue,
            max_population_sum_deviation: traj
                .conservation
                .max_population_sum_deviation,
        },
    };
    let json = report.write_json(&format!("{name}.json"), &summary)?;
    Ok(vec![csv, json])
}

fn run_cool(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let mode = cfg.simulation.mode.clone();
    let sys = tuned_system(cfg, &mode)?;
    let lv = Liouvillian::build(&sys)?;
    let rho0 = initial_state(cfg, &sys)?;
    let traj = lv.evolve(
        &rho0,
        cfg.simulation.t_final_s,
        cfg.simulation.sample_dt_s,
        &evolve_options(cfg),
    )?;
    let fit = analysis::fit_rate(&traj.times, &traj.nbar).ok();
    trajectory_files("cool", &mode, &traj, fit, &sys, report)
}

#[derive(Serialize)]
struct SteadySummary {
    mode: String,
    n_ss: f64,
    scatter_rate_per_s: f64,
    populations: Vec<f64>,
}

fn run_steady(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let mode = cfg.simulation.mode.clone();
    let sys = tuned_system(cfg, &mode)?;
    let lv = Liouvillian::build(&sys)?;
    let rho = lv.steady_state()?;
    let populations = electronic_populations(&rho, sys.mode.fock_dim);
    let summary = SteadySummary {
        mode,
        n_ss: nbar(&rho),
        scatter_rate_per_s: lv.scattering_rate(&rho),
        populations,
    };
    Ok(vec![report.write_json("steady.json", &summary)?])
}

fn electronic_populations(rho: &DensityState, fock_dim: usize) -> Vec<f64> {
    let m = rho.matrix();
    (0..NUM_SUBLEVELS)
        .map(|s| {
            (0..fock_dim)
                .map(|n| m[[s * fock_dim + n, s * fock_dim + n]].re)
                .sum()
        })
        .collect()
}

#[derive(Serialize)]
struct ScanPoint {
    delta_linewidths: f64,
    rate_per_s: f64,
    n_ss: f64,
    final_nbar: f64,
    ld_rate_per_s: f64,
    ld_n_ss: f64,
    beam_rabi_hz: Vec<(String, f64)>,
}

fn run_scan(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let scan = cfg.scan.as_ref().ok_or_else(|| {
        Error::Config("scan subcommand requires a [scan] block".into())
    })?;
    let points: Vec<Result<ScanPoint>> = scan
        .values
        .par_iter()
        .map(|&value| scan_point(cfg, value))
        .collect();
    let points: Vec<ScanPoint> =
        points.into_iter().collect::<Result<Vec<_>>>()?;
    let csv = report.write_csv(
        "scan.csv",
        &[
            Column::new(
                "delta_linewidths",
                points.iter().map(|p| p.delta_linewidths).collect(),
            ),
            Column::new(
                "rate_per_s",
                points.iter().map(|p| p.rate_per_s).collect(),
            ),
            Column::new("n_ss", points.iter().map(|p| p.n_ss).collect()),
            Column::new(
                "final_nbar",
                points.iter().map(|p| p.final_nbar).collect(),
            ),
            Column::new(
                "ld_rate_per_s",
                points.iter().map(|p| p.ld_rate_per_s).collect(),
            ),
            Column::new("ld_n_ss", points.iter().map(|p| p.ld_n_ss).collect()),
        ],
    )?;
    let json = report.write_json("scan.json", &points)?;
    Ok(vec![csv, json])
}

fn scan_point(cfg: &RunConfig, delta_linewidths: f64) -> Result<ScanPoint> {
    let mut point_cfg = cfg.clone();
    point_cfg.simulation.delta_linewidths = delta_linewidths;
    let mode = point_cfg.simulation.mode.clone();
    let sys = tuned_system(&point_cfg, &mode)?;
    let lv = Liouvillian::build(&sys)?;
    let rho0 = initial_state(&point_cfg, &sys)?;
    let traj = lv.evolve(
        &rho0,
        point_cfg.simulation.t_final_s,
        point_cfg.simulation.sample_dt_s,
        &evolve_options(&point_cfg),
    )?;
    let fit = analysis::fit_rate(&traj.times, &traj.nbar)?;
    let gamma = TWO_PI * point_cfg.atom.linewidth_hz;
    let delta = point_cfg.delta();
    let probe = sys
        .beams
        .iter()
        .position(|b| b.probe)
        .ok_or_else(|| Error::Config("no probe beam".into()))?;
    let eta_probe = sys.etas[probe].abs();
    let ld_rate = ld::eit_rate(eta_probe, sys.beams[probe].rabi, gamma)?;
    let ld_n_ss = ld::deit_nss(delta, gamma)?;
    Ok(ScanPoint {
        delta_linewidths,
        rate_per_s: fit.rate,
        n_ss: fit.n_ss,
        final_nbar: *traj.nbar.last().unwrap(),
        ld_rate_per_s: ld_rate,
        ld_n_ss,
        beam_rabi_hz: sys
            .beams
            .iter()
            .map(|b| (b.name.clone(), b.rabi / TWO_PI))
            .collect(),
    })
}

#[derive(Serialize)]
struct TunedBeam {
    beam: String,
    target_mode: String,
    target_hz: f64,
    /// Two-level bright-state inversion for the driven leg alone.
    analytic_leg_rabi_hz: f64,
    /// Analytic seed scaled to the full beam amplitude.
    seed_rabi_hz: f64,
    /// Power after refinement on the dressed-state model (equals the seed
    /// when refinement is disabled).
    tuned_rabi_hz: f64,
    /// Bright-state position actually achieved.
    resonance_hz: f64,
}

fn run_tune(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let seeded = cfg.build_system(&cfg.simulation.mode)?;
    let sys = tuned_system(cfg, &cfg.simulation.mode)?;
    let mut out = Vec::new();
    for (i, bc) in cfg.beams.iter().enumerate() {
        let Some(target_mode) = bc.tune_to.clone() else {
            continue;
        };
        let nu = cfg.mode_frequency(&target_mode)?;
        let seed = seeded.beams[i].rabi;
        let tuned = sys.beams[i].rabi;
        // the leg-level value scales with the full beam amplitude
        let leg = ld::tune_pump(seeded.beams[i].detuning, nu)?;
        out.push(TunedBeam {
            beam: bc.name.clone(),
            target_mode,
            target_hz: nu / TWO_PI,
            analytic_leg_rabi_hz: leg / TWO_PI,
            seed_rabi_hz: seed / TWO_PI,
            tuned_rabi_hz: tuned / TWO_PI,
            resonance_hz: analysis::controlled_resonance(&sys, i)? / TWO_PI,
        });
    }
    Ok(vec![report.write_json("tune.json", &out)?])
}

#[derive(Serialize)]
struct LdModePrediction {
    mode: String,
    nu_hz: f64,
    eta_probe: f64,
    rate_per_s: f64,
    n_ss_single_eit: f64,
    n_ss_double_eit: f64,
    max_rate_ratio: f64,
    validity_ratio: f64,
    validity_warning: bool,
}

fn run_ldtheory(cfg: &RunConfig, report: &Report) -> Result<Vec<PathBuf>> {
    let beams = cfg.resolve_beams()?;
    let gamma = TWO_PI * cfg.atom.linewidth_hz;
    let delta = cfg.delta();
    let probe_idx = beams
        .iter()
        .position(|b| b.probe)
        .ok_or_else(|| Error::Config("no probe beam".into()))?;
    let sigma = beams
        .iter()
        .find(|b| !b.probe && b.class == crate::atom::TransitionClass::Sp397)
        .map(|b| b.rabi)
        .unwrap_or(0.0);
    let mut out = Vec::new();
    for mode_name in ["axial", "radial1", "radial2"] {
        let mut mode = cfg.motional_mode(mode_name)?;
        mode.fock_dim = 1; // geometry only; no motional space involved
        let etas = motion::effective_mode_eta(&mode, &beams);
        // the largest beam projection drives the sideband in the
        // closed-form rate
        let eta = etas.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
        let rate = ld::eit_rate(eta, beams[probe_idx].rabi, gamma)?;
        let pred = ld::LdPrediction::new(
            rate,
            ld::deit_nss(delta, gamma)?,
            mode.frequency,
            gamma,
        );
        out.push(LdModePrediction {
            mode: mode_name.to_string(),
            nu_hz: mode.frequency / TWO_PI,
            eta_probe: eta,
            rate_per_s: rate,
            n_ss_single_eit: if sigma > 0.0 {
                ld::eit_nss(delta, gamma, beams[probe_idx].rabi, sigma)?
            } else {
                f64::NAN
            },
            n_ss_double_eit: pred.n_ss,
            max_rate_ratio: ld::max_rate_ratio(delta, gamma, eta)?,
            validity_ratio: pred.validity_ratio,
            validity_warning: pred.validity_warning,
        });
    }
    Ok(vec![report.write_json("ldtheory.json", &out)?])
}

/// Machine-readable error document, written next to the other outputs when
/// a run fails so batch drivers can inspect failures programmatically.
#[derive(Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub command: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(dir: &str) -> (RunConfig, PathBuf) {
        let mut cfg = RunConfig::default();
        cfg.simulation.fock_dim = 3;
        cfg.simulation.nbar0 = 0.5;
        cfg.simulation.t_final_s = 4e-6;
        cfg.simulation.sample_dt_s = 1e-6;
        cfg.tune.refine = false;
        cfg.spectrum.points = 5;
        cfg.spectrum.offset_min_hz = 0.5e6;
        cfg.spectrum.offset_max_hz = 1.5e6;
        let out = std::env::temp_dir().join(dir);
        (cfg, out)
    }

    #[test]
    fn spectrum_emits_csv_and_json() {
        let (cfg, out) = tiny_cfg("deit-run-test-spectrum");
        let files = execute(Command::Spectrum, &cfg, &out).unwrap();
        assert_eq!(files.len(), 2);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert!(text.contains("probe_offset_hz,scatter_rate_per_s"));
        // header + 2 provenance lines + 5 data rows
        assert_eq!(text.lines().count(), 8);
    }

    #[test]
    fn cool_with_zero_rabi_beams_stays_flat() {
        let (mut cfg, out) = tiny_cfg("deit-run-test-flat");
        for b in &mut cfg.beams {
            b.rabi_hz = crate::config::Setting::Hz(0.0);
        }
        let files = execute(Command::Cool, &cfg, &out).unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let nbars: Vec<f64> = text
            .lines()
            .skip(3)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        for v in &nbars {
            assert!((v - nbars[0]).abs() < 1e-6, "nbar drifted: {nbars:?}");
        }
    }

    #[test]
    fn ldtheory_reports_all_modes() {
        let (cfg, out) = tiny_cfg("deit-run-test-ld");
        let files = execute(Command::LdTheory, &cfg, &out).unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["data"].as_array().unwrap().len(), 3);
        assert_eq!(v["data"][0]["mode"], "axial");
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let (cfg, out_a) = tiny_cfg("deit-run-test-det-a");
        let out_b = std::env::temp_dir().join("deit-run-test-det-b");
        let a = execute(Command::Spectrum, &cfg, &out_a).unwrap();
        let b = execute(Command::Spectrum, &cfg, &out_b).unwrap();
        assert_eq!(
            std::fs::read(&a[0]).unwrap(),
            std::fs::read(&b[0]).unwrap()
        );
    }
}
