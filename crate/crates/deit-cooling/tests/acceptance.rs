//! End-to-end acceptance checks.
//!
//! Each test prints exactly one `criterion N (...): PASS/FAIL` line with the
//! measured numbers, then asserts. Heavy propagation runs are computed once
//! and shared between criteria through `OnceLock` caches, so the wall-clock
//! cost of the suite is dominated by the four full-size cooling runs plus the
//! small-coupling oracle runs.

use std::path::PathBuf;
use std::sync::OnceLock;

use deit_cooling::analysis::{self, RateFit, Sideband};
use deit_cooling::config::{self, RunConfig};
use deit_cooling::lindblad::{self, ConservationReport, EvolveOptions, Liouvillian};
use deit_cooling::{ld, run};

const TWO_PI: f64 = std::f64::consts::TAU;
/// Convention factor relating a pi-polarized 397 beam Rabi frequency to the
/// effective two-level coupling that enters the closed-form cooling rate
/// eta^2 Omega^2 / (2 gamma): Omega_eff = sqrt(2) x (Clebsch-Gordan 1/sqrt(3))
/// x beam Rabi. With this choice the bright-state reduction A- =
/// (eta Omega_leg / 2)^2 x 4 / gamma_B collapses to the closed form exactly.
const PROBE_EFF: f64 = 0.816496580927726; // sqrt(2/3)

fn check(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} - {detail}");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn deit_cfg() -> RunConfig {
    config::parse_config(include_str!("../../../configs/deit.toml")).unwrap()
}

fn seit_cfg() -> RunConfig {
    config::parse_config(include_str!("../../../configs/single_eit.toml")).unwrap()
}

fn apply(cfg: &mut RunConfig, sets: &[&str]) {
    for s in sets {
        config::apply_set(cfg, s).unwrap();
    }
}

/// One full cooling propagation with its fit and numerical-health report.
struct CoolRun {
    times: Vec<f64>,
    nbar: Vec<f64>,
    fit: RateFit,
    cons: ConservationReport,
    gamma: f64,
    t_final: f64,
    wall_s: f64,
}

fn cool_run(base: &RunConfig, sets: &[&str]) -> CoolRun {
    let mut cfg = base.clone();
    apply(&mut cfg, sets);
    let sys = run::tuned_system(&cfg, &cfg.simulation.mode).unwrap();
    let lv = Liouvillian::build(&sys).unwrap();
    let rho0 = run::initial_state(&cfg, &sys).unwrap();
    let opts = EvolveOptions { abs_tol: cfg.simulation.abs_tol, ..EvolveOptions::default() };
    let t0 = std::time::Instant::now();
    let traj = lv
        .evolve(&rho0, cfg.simulation.t_final_s, cfg.simulation.sample_dt_s, &opts)
        .unwrap();
    let fit = analysis::fit_rate(&traj.times, &traj.nbar).unwrap();
    CoolRun {
        times: traj.times,
        nbar: traj.nbar,
        fit,
        cons: traj.conservation,
        gamma: sys.gamma_total,
        t_final: cfg.simulation.t_final_s,
        wall_s: t0.elapsed().as_secs_f64(),
    }
}

static AXIAL17: OnceLock<CoolRun> = OnceLock::new();
static RADIAL17: OnceLock<CoolRun> = OnceLock::new();
static AXIAL25: OnceLock<CoolRun> = OnceLock::new();
static RADIAL25: OnceLock<CoolRun> = OnceLock::new();

fn axial17() -> &'static CoolRun {
    AXIAL17.get_or_init(|| cool_run(&deit_cfg(), &[]))
}
fn radial17() -> &'static CoolRun {
    RADIAL17.get_or_init(|| {
        cool_run(&deit_cfg(), &["simulation.mode=radial1", "simulation.nbar0=3.6"])
    })
}
fn axial25() -> &'static CoolRun {
    AXIAL25.get_or_init(|| cool_run(&deit_cfg(), &["simulation.fock_dim=25"]))
}
fn radial25() -> &'static CoolRun {
    RADIAL25.get_or_init(|| {
        cool_run(
            &deit_cfg(),
            &["simulation.mode=radial1", "simulation.nbar0=3.6", "simulation.fock_dim=25"],
        )
    })
}

/// Single-bright runs for the beyond-Lamb-Dicke criterion: probe power is
/// solved so the closed-form prediction is exactly 5e4 /s for the axial mode.
struct BeyondLd {
    ld_rate: f64,
    runs: Vec<(f64, CoolRun)>, // (nbar0, run)
}

static BEYOND: OnceLock<BeyondLd> = OnceLock::new();

fn beyond_ld() -> &'static BeyondLd {
    BEYOND.get_or_init(|| {
        let target = 5.0e4;
        let base = seit_cfg();
        let probe = base.beams.iter().position(|b| b.probe).unwrap();
        let sys0 = base.build_system("axial").unwrap();
        let eta = sys0.etas[probe].abs();
        let gamma = sys0.gamma_total;
        let omega = (2.0 * gamma * target / (eta * eta)).sqrt() / PROBE_EFF;
        let rabi_set = format!("beams.{probe}.rabi_hz={}", omega / TWO_PI);
        let mut runs = Vec::new();
        for (nbar0, fock, t_final) in
            [(1.0, 8, 120e-6), (5.0, 14, 250e-6), (11.0, 17, 120e-6)]
        {
            runs.push((
                nbar0,
                cool_run(
                    &base,
                    &[
                        rabi_set.as_str(),
                        &format!("simulation.nbar0={nbar0}"),
                        &format!("simulation.fock_dim={fock}"),
                        &format!("simulation.t_final_s={t_final}"),
                        "simulation.sample_dt_s=4e-6",
                    ],
                ),
            ));
        }
        BeyondLd { ld_rate: target, runs }
    })
}

#[test]
fn criterion_01_dark_state_suppression() {
    let sys = run::tuned_system(&deit_cfg(), "axial").unwrap();
    // 155 points from -0.55 MHz to +3.3 MHz in 25 kHz steps; the grid
    // contains the two-photon resonance (offset 0) exactly and spans both
    // bright peaks.
    let offsets: Vec<f64> =
        (0..155).map(|i| TWO_PI * (-0.55e6 + 0.025e6 * i as f64)).collect();
    let spec = analysis::scattering_spectrum(&sys, &offsets).unwrap();
    let dark = spec
        .points
        .iter()
        .min_by(|a, b| a.offset.abs().total_cmp(&b.offset.abs()))
        .unwrap();
    let max = spec.points.iter().map(|p| p.rate).fold(0.0_f64, f64::max);
    let ratio = dark.rate / max;
    check(
        "1 (dark-state suppression)",
        ratio < 1e-3,
        &format!(
            "scatter at two-photon resonance / bright max = {ratio:.3e} (< 1e-3), {} points",
            spec.points.len()
        ),
    );
}

#[test]
fn criterion_02_bright_peak_placement() {
    let cfg = deit_cfg();
    let sys = run::tuned_system(&cfg, "axial").unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (beam, target_hz) in [("pump866", 904.6e3), ("pump397", 2.552e6)] {
        let idx = sys.beams.iter().position(|b| b.name == beam).unwrap();
        let found = analysis::controlled_resonance(&sys, idx).unwrap() / TWO_PI;
        let rel = (found - target_hz).abs() / target_hz;
        pass &= rel < 0.02;
        details.push(format!("{beam}: {:.1} kHz vs {:.1} kHz ({:.2}%)", found / 1e3, target_hz / 1e3, rel * 100.0));
    }
    check("2 (bright-peak placement)", pass, &details.join("; "));
}

/// Rescale the ion mass so that every beam coupling and the emission recoil
/// shrink together, producing a physically consistent system with the probe
/// coupling at `eta_t`.
fn mass_scaled(base: &RunConfig, eta_t: f64) -> RunConfig {
    let probe = base.beams.iter().position(|b| b.probe).unwrap();
    let eta0 = base.build_system("axial").unwrap().etas[probe].abs();
    let mut cfg = base.clone();
    let mass = cfg.trap.mass_amu * (eta0 / eta_t).powi(2);
    apply(&mut cfg, &[&format!("trap.mass_amu={mass}"), "simulation.fock_dim=5"]);
    cfg
}

/// Cooling rate from a trajectory with an independently known steady state:
/// median of the local decay rate -d(nbar)/dt / (nbar - nss).
fn median_rate(times: &[f64], nbar: &[f64], n_ss: f64) -> f64 {
    let mut rates: Vec<f64> =
        analysis::time_dependent_rate(times, nbar, n_ss, 1e-4).into_iter().map(|(_, r)| r).collect();
    rates.sort_by(f64::total_cmp);
    rates[rates.len() / 2]
}

#[test]
fn criterion_03_ld_regime_oracle() {
    let mut details = Vec::new();
    let mut pass = true;
    for eta_t in [0.02, 0.05] {
        // Single-bright scheme: rate and steady state against the closed forms.
        let cfg = mass_scaled(&seit_cfg(), eta_t);
        let sys = run::tuned_system(&cfg, "axial").unwrap();
        let lv = Liouvillian::build(&sys).unwrap();
        let nss = lindblad::nbar(&lv.steady_state().unwrap());
        let probe = sys.beams.iter().position(|b| b.name == "probe").unwrap();
        let pump = sys.beams.iter().position(|b| b.name == "pump397").unwrap();
        let ld_rate =
            ld::eit_rate(eta_t, PROBE_EFF * sys.beams[probe].rabi, sys.gamma_total).unwrap();
        let ld_nss = ld::eit_nss(
            cfg.delta(),
            sys.gamma_total,
            sys.beams[probe].rabi / 3.0_f64.sqrt(),
            PROBE_EFF * sys.beams[pump].rabi,
        )
        .unwrap();
        let mut evo = cfg.clone();
        apply(&mut evo, &["simulation.nbar0=0.5", "simulation.t_final_s=1.2e-3", "simulation.sample_dt_s=25e-6"]);
        let rho0 = run::initial_state(&evo, &sys).unwrap();
        let traj = lv.evolve(&rho0, 1.2e-3, 25e-6, &EvolveOptions::default()).unwrap();
        let rate = median_rate(&traj.times, &traj.nbar, nss);
        let rate_rel = (rate / ld_rate - 1.0).abs();
        let nss_rel = (nss / ld_nss - 1.0).abs();
        pass &= rate_rel < 0.10 && nss_rel < 0.20;
        details.push(format!(
            "eta={eta_t}: rate {rate:.3e}/s vs {ld_rate:.3e}/s ({:.0}%), nss {nss:.4} vs {ld_nss:.4} ({:.0}%)",
            rate_rel * 100.0,
            nss_rel * 100.0
        ));
        // Double-bright scheme at weak probe: steady state against deit_nss.
        let mut dcfg = mass_scaled(&deit_cfg(), eta_t);
        apply(&mut dcfg, &["simulation.probe_ratio=0.044"]);
        let dsys = run::tuned_system(&dcfg, "axial").unwrap();
        let dnss = lindblad::nbar(&Liouvillian::build(&dsys).unwrap().steady_state().unwrap());
        let dth = ld::deit_nss(dcfg.delta(), dsys.gamma_total).unwrap();
        let drel = (dnss / dth - 1.0).abs();
        pass &= drel < 0.20;
        details.push(format!("deit eta={eta_t}: nss {dnss:.4} vs {dth:.4} ({:.0}%)", drel * 100.0));
    }
    check("3 (LD-regime oracle)", pass, &details.join("; "));
}

#[test]
fn criterion_04_paper_value_reproduction() {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, run, reference) in
        [("axial", axial17(), 0.11), ("radial", radial17(), 0.14)]
    {
        let reached = run.nbar.iter().any(|&n| n < 0.3);
        let nss = run.fit.n_ss;
        let factor = (nss / reference).max(reference / nss);
        let in_budget = run.wall_s <= 600.0;
        pass &= reached && factor < 2.0 && in_budget;
        details.push(format!(
            "{name}: final nbar {:.3} (<0.3: {reached}), nss {nss:.3} vs {reference} (x{factor:.2}), {:.0}s wall",
            run.nbar.last().unwrap(),
            run.wall_s
        ));
    }
    check("4 (paper-value reproduction)", pass, &details.join("; "));
}

#[test]
fn criterion_05_beyond_ld_rate_suppression() {
    let b = beyond_ld();
    // Rate evaluated where the trajectory passes nbar = 1 (from the
    // nbar0 = 5 run) must lie below the Lamb-Dicke prediction.
    let (_, run5) = &b.runs[1];
    let rates = analysis::time_dependent_rate(&run5.times, &run5.nbar, run5.fit.n_ss, 1e-3);
    let near_one = rates
        .iter()
        .zip(run5.nbar.iter().skip(1))
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .unwrap();
    let (at_nbar, rate_at_one) = (*near_one.1, near_one.0 .1);
    let below = rate_at_one < b.ld_rate;
    // Initial rate must be monotonically non-increasing in nbar0.
    let r0: Vec<f64> = b
        .runs
        .iter()
        .map(|(_, r)| analysis::time_dependent_rate(&r.times, &r.nbar, r.fit.n_ss, 1e-3)[0].1)
        .collect();
    let monotone = r0[0] >= r0[1] && r0[1] >= r0[2];
    check(
        "5 (beyond-LD rate suppression)",
        below && monotone,
        &format!(
            "R(nbar={at_nbar:.2}) = {rate_at_one:.3e}/s < LD {:.1e}/s: {below}; R(t=0) at nbar0 1/5/11 = {:.3e}/{:.3e}/{:.3e}/s non-increasing: {monotone}",
            b.ld_rate, r0[0], r0[1], r0[2]
        ),
    );
}

#[test]
fn criterion_06_detuning_scan_trends() {
    let deltas = [1.0, 1.6, 2.2, 2.8, 3.4, 4.0];
    let mut details = Vec::new();
    let mut pass = true;
    for mode in ["axial", "radial1"] {
        let mut nss = Vec::new();
        let mut rates = Vec::new();
        for d in deltas {
            let mut cfg = deit_cfg();
            apply(
                &mut cfg,
                &[
                    &format!("simulation.mode={mode}"),
                    &format!("simulation.delta_linewidths={d}"),
                    // Weak probe: at the strong default ratio the probe's own
                    // carrier heating grows with the detuning and masks the
                    // dressed-state trends the criterion is about.
                    "simulation.probe_ratio=0.1",
                    "simulation.fock_dim=6",
                    "simulation.nbar0=1.0",
                    "simulation.t_final_s=80e-6",
                    "simulation.sample_dt_s=4e-6",
                ],
            );
            let sys = run::tuned_system(&cfg, mode).unwrap();
            let lv = Liouvillian::build(&sys).unwrap();
            nss.push(lindblad::nbar(&lv.steady_state().unwrap()));
            let rho0 = run::initial_state(&cfg, &sys).unwrap();
            let traj = lv.evolve(&rho0, 80e-6, 4e-6, &EvolveOptions::default()).unwrap();
            rates.push(analysis::fit_rate(&traj.times, &traj.nbar).unwrap().rate);
        }
        let nss_dec = nss.windows(2).all(|w| w[1] < w[0]);
        let rate_inc = rates.windows(2).all(|w| w[1] > w[0]);
        pass &= nss_dec && rate_inc;
        details.push(format!(
            "{mode}: nss {:?} decreasing: {nss_dec}; rates {:?}/s increasing: {rate_inc}",
            nss.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            rates.iter().map(|v| v.round()).collect::<Vec<_>>()
        ));
    }
    check("6 (detuning-scan trends)", pass, &details.join("; "));
}

#[test]
fn criterion_07_conservation_suite() {
    let runs: Vec<(&str, &CoolRun)> = vec![
        ("axial17", axial17()),
        ("radial17", radial17()),
        ("axial25", axial25()),
        ("radial25", radial25()),
        ("beyond-1", &beyond_ld().runs[0].1),
        ("beyond-5", &beyond_ld().runs[1].1),
        ("beyond-11", &beyond_ld().runs[2].1),
    ];
    let mut pass = true;
    let mut worst = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (_, r) in &runs {
        let trace_per_gammat = r.cons.max_trace_deviation / (r.gamma * r.t_final);
        worst.0 = worst.0.max(trace_per_gammat);
        worst.1 = worst.1.max(r.cons.max_hermiticity_deviation);
        worst.2 = worst.2.min(r.cons.min_eigenvalue);
        worst.3 = worst.3.max(r.cons.max_population_sum_deviation);
        pass &= trace_per_gammat < 1e-9
            && r.cons.max_hermiticity_deviation < 1e-10
            && r.cons.min_eigenvalue > -1e-8
            && r.cons.max_population_sum_deviation < 1e-8;
    }
    check(
        "7 (conservation suite)",
        pass,
        &format!(
            "{} runs audited; worst trace drift {:.2e}/linewidth-time, hermiticity {:.2e}, min eigenvalue {:.2e}, population sum {:.2e}",
            runs.len(),
            worst.0,
            worst.1,
            worst.2,
            worst.3
        ),
    );
}

#[test]
fn criterion_08_truncation_convergence() {
    let mut details = Vec::new();
    let mut pass = true;
    for (name, lo, hi) in [("axial", axial17(), axial25()), ("radial", radial17(), radial25())] {
        let rel = (hi.fit.n_ss - lo.fit.n_ss).abs() / lo.fit.n_ss;
        pass &= rel < 0.05;
        details.push(format!("{name}: nss {:.4} (N=17) vs {:.4} (N=25), {:.1}%", lo.fit.n_ss, hi.fit.n_ss, rel * 100.0));
    }
    let rate_dec = axial25().fit.rate <= axial17().fit.rate;
    pass &= rate_dec;
    details.push(format!(
        "axial rate {:.3e} (N=17) -> {:.3e}/s (N=25) non-increasing: {rate_dec}",
        axial17().fit.rate,
        axial25().fit.rate
    ));
    check("8 (truncation convergence)", pass, &details.join("; "));
}

#[test]
fn criterion_09_thermometry_estimator() {
    let mut pass = true;
    let mut details = Vec::new();
    let (eta, omega) = (0.1, TWO_PI * 50e3);
    let t = 0.05 / (eta * omega); // weak pulse: eta*omega*t = 0.05 rad
    for nbar in [0.1, 1.0, 5.0] {
        let rsb = analysis::sideband_excitation(nbar, eta, omega, t, Sideband::Red, 400).unwrap();
        let bsb = analysis::sideband_excitation(nbar, eta, omega, t, Sideband::Blue, 400).unwrap();
        let est = analysis::thermometry_estimate(rsb, bsb).unwrap();
        let rel = (est / nbar - 1.0).abs();
        pass &= rel < 0.02;
        // Exactness of the estimator on the thermal identity r = n/(n+1).
        let exact = analysis::thermometry_estimate(nbar / (nbar + 1.0), 1.0).unwrap();
        let ierr = (exact - nbar).abs() / nbar.max(1.0);
        pass &= ierr < 1e-12;
        details.push(format!("nbar {nbar}: pulse estimate {est:.4} ({:.2}%), identity error {ierr:.1e}", rel * 100.0));
    }
    check("9 (thermometry estimator)", pass, &details.join("; "));
}

#[test]
fn criterion_10_determinism() {
    let base = std::env::temp_dir().join(format!("deit-acceptance-{}", std::process::id()));
    let mut cfg = deit_cfg();
    apply(&mut cfg, &["spectrum.points=101"]);
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for sub in ["a", "b"] {
        let dir: PathBuf = base.join(sub);
        std::fs::create_dir_all(&dir).unwrap();
        let files = run::execute(run::Command::Spectrum, &cfg, &dir).unwrap();
        let csv = files.iter().find(|p| p.extension().is_some_and(|e| e == "csv")).unwrap();
        outputs.push(std::fs::read(csv).unwrap());
    }
    let identical = outputs[0] == outputs[1];
    check(
        "10 (determinism)",
        identical,
        &format!("two spectrum runs, {} bytes each, byte-identical: {identical}", outputs[0].len()),
    );
    let _ = std::fs::remove_dir_all(&base);
}
