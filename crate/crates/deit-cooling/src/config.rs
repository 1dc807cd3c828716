//! Run configuration: TOML parsing, validation, defaults, `--set`
//! overrides, and construction of the simulation [`SystemConfig`].
//!
//! All frequencies in the configuration file are linear (Hz); the builder
//! multiplies by 2π when assembling the angular-frequency model. Detunings
//! and Rabi frequencies may be given as numbers or as the string `"auto"`,
//! in which case they are derived from the common detuning `delta` (see
//! [`BeamConfig`]).

use serde::{Deserialize, Serialize};

use crate::atom::{
    self, Beam, GFactors, Polarization, Sublevel, TransitionClass, IDX_D_P12,
    IDX_P_MINUS, IDX_P_PLUS, IDX_S_MINUS, IDX_S_PLUS,
};
use crate::constants::{AMU, CA40_MASS_AMU, TWO_PI};
use crate::error::{Error, Result};
use crate::ld;
use crate::lindblad::SystemConfig;
use crate::motion::{self, GeometryConfig, ModeLabel, MotionalMode};

/// A value that is either given explicitly (Hz) or derived from the common
/// detuning (`"auto"`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setting {
    Auto,
    Hz(f64),
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(
        &self,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => s.serialize_str("auto"),
            Setting::Hz(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Setting::Hz(v)),
            Raw::Str(s) if s == "auto" => Ok(Setting::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a frequency in Hz or \"auto\", got \"{s}\""
            ))),
        }
    }
}

/// Trap frequencies and field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    /// Axial mode frequency, Hz.
    pub nu_axial_hz: f64,
    /// First radial mode frequency, Hz.
    pub nu_radial1_hz: f64,
    /// Second radial mode frequency, Hz.
    pub nu_radial2_hz: f64,
    /// Angles of the radial mode axes from the plane of the cooling beams,
    /// degrees.
    pub radial_mode_angles_deg: [f64; 2],
    /// Angle of the logic (thermometry) beam from the cooling plane,
    /// degrees.
    pub logic_angle_deg: f64,
    /// Ion mass, atomic mass units.
    pub mass_amu: f64,
    /// Quantization magnetic field, tesla.
    pub b_field_tesla: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self {
            nu_axial_hz: 904.6e3,
            nu_radial1_hz: 2.552e6,
            nu_radial2_hz: 2.540e6,
            radial_mode_angles_deg: [26.0, -64.0],
            logic_angle_deg: 54.7,
            mass_amu: CA40_MASS_AMU,
            b_field_tesla: 416e-6,
        }
    }
}

/// Atomic structure parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomConfig {
    /// P₁/₂ linewidth Γ/2π, Hz.
    pub linewidth_hz: f64,
    /// Branching fraction of P₁/₂ decay into D₃/₂.
    pub branching_sd: f64,
    /// Landé g-factors.
    pub g_s: f64,
    pub g_p: f64,
    pub g_d: f64,
}

impl Default for AtomConfig {
    fn default() -> Self {
        let g = GFactors::default();
        Self {
            linewidth_hz: 20.7e6,
            branching_sd: 0.064,
            g_s: g.g_s,
            g_p: g.g_p,
            g_d: g.g_d,
        }
    }
}

/// One laser beam.
///
/// `detuning_hz = "auto"` places the beam on the common virtual level:
/// * 397 nm π — `delta` blue of S(+1/2)→P₁/₂ (the prepared state);
/// * 397 nm σ — `delta` blue of S(−1/2)→P₁/₂;
/// * 866 nm — two-photon resonant with the π beam on the
///   D(+1/2)→P(−1/2) leg.
///
/// Zeeman shifts of the named lower levels are compensated so that the
/// dark resonance sits exactly at zero probe offset.
///
/// `rabi_hz = "auto"` gives the probe a fixed ratio `probe_ratio · delta`
/// and gives a pump the analytic power that Stark-shifts its bright state
/// onto the target mode frequency (`tune_to`), divided by the relevant
/// line-strength weight. `tune.refine` then closes the loop on the full
/// dressed-state model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub name: String,
    /// `"397"` or `"866"`.
    pub class: String,
    /// `"pi"`, `"sigma_plus"`, `"sigma_minus"`, or `"sigma_both"`.
    pub polarization: String,
    /// Unit propagation direction; z is the trap axis.
    pub direction: [f64; 3],
    pub detuning_hz: Setting,
    pub rabi_hz: Setting,
    /// Marks the beam whose detuning a spectrum scan varies.
    #[serde(default)]
    pub probe: bool,
    /// Mode whose frequency this pump's bright state is tuned to:
    /// `"axial"`, `"radial1"`, or `"radial2"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune_to: Option<String>,
}

/// Simulation controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Common (single-photon) detuning in units of the linewidth Γ.
    pub delta_linewidths: f64,
    /// Probe Rabi frequency as a fraction of the detuning, used when the
    /// probe beam's `rabi_hz` is `"auto"`. The double-bright scheme
    /// tolerates a strong probe (the default ≈ 0.31 Δ); single-bright
    /// configurations need a much weaker one (≈ 0.04 Δ) to keep the
    /// steady state cold.
    pub probe_ratio: f64,
    /// Mode simulated by `cool`/`steady`: `"axial"`, `"radial1"`,
    /// `"radial2"`.
    pub mode: String,
    /// Motional Hilbert-space dimension.
    pub fock_dim: usize,
    /// Lamb-Dicke expansion order of the beam couplings (0, 1, or 2).
    pub ld_order: u8,
    /// Fraction of the emission recoil that couples to the mode.
    pub alpha_recoil: f64,
    /// Initial thermal occupation.
    pub nbar0: f64,
    /// Cooling duration, s.
    pub t_final_s: f64,
    /// Observable sampling interval, s.
    pub sample_dt_s: f64,
    /// Integrator local error tolerance per step.
    pub abs_tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            delta_linewidths: 3.4,
            probe_ratio: 0.3126,
            mode: "axial".into(),
            fock_dim: 17,
            ld_order: 2,
            alpha_recoil: 0.4,
            nbar0: 11.1,
            t_final_s: 670e-6,
            sample_dt_s: 10e-6,
            abs_tol: 1e-8,
        }
    }
}

/// Pump-tuning controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    /// Refine pump powers on the full dressed-state model after the
    /// analytic seed.
    pub refine: bool,
    /// Relative tolerance on the bright-state positions.
    pub rel_tol: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self { refine: true, rel_tol: 0.005 }
    }
}

/// Probe-scan window for the `spectrum` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Lowest probe offset, Hz.
    pub offset_min_hz: f64,
    /// Highest probe offset, Hz.
    pub offset_max_hz: f64,
    /// Number of scan points.
    pub points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { offset_min_hz: -1.0e6, offset_max_hz: 4.0e6, points: 200 }
    }
}

/// Parameter sweep for the `scan` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Swept parameter; currently `"delta_linewidths"`.
    pub parameter: String,
    /// Grid values, strictly monotone.
    pub values: Vec<f64>,
}

/// Output controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; overridden by `--out`.
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Complete run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trap: TrapConfig,
    pub atom: AtomConfig,
    pub beams: Vec<BeamConfig>,
    pub simulation: SimulationConfig,
    pub tune: TuneConfig,
    pub spectrum: SpectrumConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    /// The double-bright cooling setup: π probe along the trap axis, σ⁺
    /// pump in the radial plane, 866 nm pump counter-propagating the
    /// probe, all pump powers tuned automatically.
    fn default() -> Self {
        Self {
            trap: TrapConfig::default(),
            atom: AtomConfig::default(),
            beams: vec![
                BeamConfig {
                    name: "probe".into(),
                    class: "397".into(),
                    polarization: "pi".into(),
                    direction: [0.0, 0.0, 1.0],
                    detuning_hz: Setting::Auto,
                    rabi_hz: Setting::Auto,
                    probe: true,
                    tune_to: None,
                },
                BeamConfig {
                    name: "pump397".into(),
                    class: "397".into(),
                    polarization: "sigma_plus".into(),
                    direction: [1.0, 0.0, 0.0],
                    detuning_hz: Setting::Auto,
                    rabi_hz: Setting::Auto,
                    probe: false,
                    tune_to: Some("radial1".into()),
                },
                BeamConfig {
                    name: "pump866".into(),
                    class: "866".into(),
                    polarization: "sigma_both".into(),
                    direction: [0.0, 0.0, -1.0],
                    detuning_hz: Setting::Auto,
                    rabi_hz: Setting::Auto,
                    probe: false,
                    tune_to: Some("axial".into()),
                },
            ],
            simulation: SimulationConfig::default(),
            tune: TuneConfig::default(),
            spectrum: SpectrumConfig::default(),
            scan: None,
            output: OutputConfig::default(),
        }
    }
}

/// Parse and validate a TOML configuration. Unknown keys are rejected;
/// omitted keys take the documented defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serialize a configuration back to TOML (defaults filled in), so every
/// run can echo the exact parameter set it used.
pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))
}

/// Apply one `key.path=value` override. The value is parsed as TOML, so
/// strings need no quotes unless they contain spaces.
pub fn apply_set(cfg: &mut RunConfig, assignment: &str) -> Result<()> {
    let (path, raw_value) = assignment.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{assignment}' is not key=value"))
    })?;
    let mut doc = toml::Value::try_from(cfg.clone())
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut node = &mut doc;
    for key in path.split('.') {
        node = match node {
            toml::Value::Table(t) => t.get_mut(key).ok_or_else(|| {
                Error::Config(format!("unknown config key '{path}'"))
            })?,
            toml::Value::Array(a) => {
                let i: usize = key.parse().map_err(|_| {
                    Error::Config(format!(
                        "'{key}' in '{path}' is not an array index"
                    ))
                })?;
                a.get_mut(i).ok_or_else(|| {
                    Error::Config(format!("index {i} out of range in '{path}'"))
                })?
            }
            _ => {
                return Err(Error::Config(format!(
                    "'{path}' does not address a settable value"
                )))
            }
        };
    }
    *node = raw_value
        .parse::<toml::Value>()
        .unwrap_or_else(|_| toml::Value::String(raw_value.to_string()));
    let updated: RunConfig =
        doc.try_into().map_err(|e| Error::Config(e.to_string()))?;
    updated.validate()?;
    *cfg = updated;
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.trap;
        for (name, v) in [
            ("trap.nu_axial_hz", t.nu_axial_hz),
            ("trap.nu_radial1_hz", t.nu_radial1_hz),
            ("trap.nu_radial2_hz", t.nu_radial2_hz),
            ("trap.mass_amu", t.mass_amu),
            ("atom.linewidth_hz", self.atom.linewidth_hz),
            ("simulation.delta_linewidths", self.simulation.delta_linewidths),
            ("simulation.t_final_s", self.simulation.t_final_s),
            ("simulation.sample_dt_s", self.simulation.sample_dt_s),
            ("simulation.abs_tol", self.simulation.abs_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.trap.b_field_tesla < 0.0 {
            return Err(Error::Config("trap.b_field_tesla must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.atom.branching_sd) {
            return Err(Error::Config(
                "atom.branching_sd must lie in [0, 1]".into(),
            ));
        }
        if self.beams.is_empty() {
            return Err(Error::Config("beams list must not be empty".into()));
        }
        if self.simulation.fock_dim == 0 {
            return Err(Error::Config("simulation.fock_dim must be >= 1".into()));
        }
        if self.simulation.ld_order > 2 {
            return Err(Error::Config("simulation.ld_order must be <= 2".into()));
        }
        self.geometry().validate()?;
        self.mode_index(&self.simulation.mode)?;
        for b in &self.beams {
            parse_class(&b.class)?;
            parse_polarization(&b.polarization)?;
            if let Some(m) = &b.tune_to {
                self.mode_index(m)?;
            }
            if let Setting::Hz(v) = b.rabi_hz {
                if v < 0.0 {
                    return Err(Error::Config(format!(
                        "beam '{}' rabi_hz must be >= 0",
                        b.name
                    )));
                }
            }
        }
        let probes = self.beams.iter().filter(|b| b.probe).count();
        if probes != 1 {
            return Err(Error::Config(format!(
                "exactly one beam must have probe = true, found {probes}"
            )));
        }
        if let Some(scan) = &self.scan {
            if scan.parameter != "delta_linewidths" {
                return Err(Error::Config(format!(
                    "unsupported scan parameter '{}'",
                    scan.parameter
                )));
            }
            if scan.values.is_empty() {
                return Err(Error::Config("scan.values must not be empty".into()));
            }
            let inc = scan.values.windows(2).all(|w| w[1] > w[0]);
            let dec = scan.values.windows(2).all(|w| w[1] < w[0]);
            if scan.values.len() > 1 && !inc && !dec {
                return Err(Error::Config(
                    "scan.values must be strictly monotone".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            logic_angle_deg: self.trap.logic_angle_deg,
            radial_mode_angles_deg: self.trap.radial_mode_angles_deg,
        }
    }

    fn mode_index(&self, name: &str) -> Result<usize> {
        match name {
            "axial" => Ok(0),
            "radial1" => Ok(1),
            "radial2" => Ok(2),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected axial, radial1, radial2)"
            ))),
        }
    }

    /// Common detuning Δ, rad/s.
    pub fn delta(&self) -> f64 {
        self.simulation.delta_linewidths * TWO_PI * self.atom.linewidth_hz
    }

    /// Mode frequency by name, rad/s.
    pub fn mode_frequency(&self, name: &str) -> Result<f64> {
        let nu = [
            self.trap.nu_axial_hz,
            self.trap.nu_radial1_hz,
            self.trap.nu_radial2_hz,
        ][self.mode_index(name)?];
        Ok(TWO_PI * nu)
    }

    /// The named motional mode with the configured Fock dimension.
    pub fn motional_mode(&self, name: &str) -> Result<MotionalMode> {
        let i = self.mode_index(name)?;
        let axes = self.geometry().mode_axes();
        Ok(MotionalMode {
            label: match i {
                0 => ModeLabel::Axial,
                1 => ModeLabel::Radial1,
                _ => ModeLabel::Radial2,
            },
            frequency: self.mode_frequency(name)?,
            axis: axes[i],
            fock_dim: self.simulation.fock_dim,
            mass: self.trap.mass_amu * AMU,
        })
    }

    /// Resolve the beam list: `"auto"` detunings from the common detuning
    /// with Zeeman compensation, `"auto"` pump powers from the analytic
    /// bright-state-shift inversion, `"auto"` probe power from
    /// `probe_ratio`.
    pub fn resolve_beams(&self) -> Result<Vec<Beam>> {
        let levels = self.sublevels()?;
        let z = |i: usize| levels[i].zeeman_shift;
        let delta = self.delta();
        let mut out = Vec::with_capacity(self.beams.len());
        for b in &self.beams {
            let class = parse_class(&b.class)?;
            let polarization = parse_polarization(&b.polarization)?;
            let detuning = match b.detuning_hz {
                Setting::Hz(v) => TWO_PI * v,
                Setting::Auto => match (class, polarization) {
                    (TransitionClass::Sp397, Polarization::SigmaPlus) => {
                        delta - z(IDX_S_MINUS)
                    }
                    (TransitionClass::Sp397, _) => delta - z(IDX_S_PLUS),
                    (TransitionClass::Dp866, _) => {
                        delta - z(IDX_S_PLUS) + z(IDX_S_MINUS) - z(IDX_D_P12)
                    }
                },
            };
            let rabi = match b.rabi_hz {
                Setting::Hz(v) => TWO_PI * v,
                Setting::Auto if b.probe => {
                    self.simulation.probe_ratio * delta
                }
                Setting::Auto => {
                    let target_mode = b.tune_to.as_deref().ok_or_else(|| {
                        Error::Config(format!(
                            "beam '{}': rabi_hz = \"auto\" on a pump \
                             requires tune_to",
                            b.name
                        ))
                    })?;
                    let nu = self.mode_frequency(target_mode)?;
                    let (dleg, weight) =
                        pump_leg(class, polarization, &levels, detuning)?;
                    ld::tune_pump(dleg, nu)? / weight
                }
            };
            out.push(Beam {
                name: b.name.clone(),
                class,
                polarization,
                detuning,
                rabi,
                direction: b.direction,
                probe: b.probe,
            });
        }
        Ok(out)
    }

    /// Zeeman sublevels at the configured field and g-factors.
    pub fn sublevels(&self) -> Result<Vec<Sublevel>> {
        atom::build_sublevels(
            self.trap.b_field_tesla,
            &GFactors {
                g_s: self.atom.g_s,
                g_p: self.atom.g_p,
                g_d: self.atom.g_d,
            },
        )
    }

    /// Assemble the full simulation configuration for the named mode.
    /// Pump powers come from the analytic seeds; callers wanting the
    /// refined (dressed-state) powers run `analysis::tune_pumps` with
    /// [`RunConfig::tune_targets`] afterwards.
    pub fn build_system(&self, mode_name: &str) -> Result<SystemConfig> {
        let beams = self.resolve_beams()?;
        let mode = self.motional_mode(mode_name)?;
        let etas = motion::effective_mode_eta(&mode, &beams);
        let cfg = SystemConfig {
            sublevels: self.sublevels()?,
            beams,
            gamma_total: TWO_PI * self.atom.linewidth_hz,
            branching_sd: self.atom.branching_sd,
            mode,
            etas,
            ld_order: self.simulation.ld_order,
            alpha_recoil: self.simulation.alpha_recoil,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// (beam name, target offset rad/s) pairs for `analysis::tune_pumps`,
    /// in config order.
    pub fn tune_targets(&self) -> Result<Vec<(String, f64)>> {
        self.beams
            .iter()
            .filter_map(|b| {
                b.tune_to.as_ref().map(|m| {
                    self.mode_frequency(m).map(|nu| (b.name.clone(), nu))
                })
            })
            .collect()
    }
}

/// Effective detuning and line-strength weight of the pump leg a tuned
/// beam drives: the σ⁺ 397 leg S(−1/2)→P(+1/2), or the σ⁻ 866 leg
/// D(+1/2)→P(−1/2). The weight converts between the full beam Rabi
/// frequency and the two-level leg Rabi frequency of the analytic
/// bright-state formulas.
fn pump_leg(
    class: TransitionClass,
    pol: Polarization,
    levels: &[Sublevel],
    detuning: f64,
) -> Result<(f64, f64)> {
    let (lower, upper, dm) = match class {
        TransitionClass::Sp397 => (IDX_S_MINUS, IDX_P_PLUS, 1),
        TransitionClass::Dp866 => (IDX_D_P12, IDX_P_MINUS, -1),
    };
    let amp = pol
        .components()
        .iter()
        .find(|(q, _)| *q == dm)
        .map(|(_, a)| *a)
        .ok_or_else(|| {
            Error::Config(format!(
                "polarization {pol:?} does not drive the tuned leg of {class:?}"
            ))
        })?;
    let lo = &levels[lower];
    let up = &levels[upper];
    let cg = atom::clebsch_gordan(
        lo.term.j2(),
        lo.mj2,
        2,
        2 * dm,
        up.term.j2(),
        up.mj2,
    );
    let weight = (amp * cg).abs();
    if weight < 1e-12 {
        return Err(Error::Config(format!(
            "tuned leg of {class:?} has zero line strength"
        )));
    }
    let dleg = detuning - (up.zeeman_shift - lo.zeeman_shift);
    Ok((dleg, weight))
}

fn parse_class(s: &str) -> Result<TransitionClass> {
    match s {
        "397" => Ok(TransitionClass::Sp397),
        "866" => Ok(TransitionClass::Dp866),
        other => Err(Error::Config(format!(
            "unknown transition class '{other}' (expected \"397\" or \"866\")"
        ))),
    }
}

fn parse_polarization(s: &str) -> Result<Polarization> {
    match s {
        "pi" => Ok(Polarization::Pi),
        "sigma_plus" => Ok(Polarization::SigmaPlus),
        "sigma_minus" => Ok(Polarization::SigmaMinus),
        "sigma_both" => Ok(Polarization::SigmaBoth),
        other => Err(Error::Config(format!(
            "unknown polarization '{other}' (expected pi, sigma_plus, \
             sigma_minus, sigma_both)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serialize_config(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_beam_list_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.beams.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config("[trap]\nnu_axial_hz = 1e6\nbogus = 3\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn set_override_updates_nested_value() {
        let mut cfg = RunConfig::default();
        apply_set(&mut cfg, "simulation.fock_dim=25").unwrap();
        assert_eq!(cfg.simulation.fock_dim, 25);
        apply_set(&mut cfg, "beams.0.rabi_hz=2.0e6").unwrap();
        assert_eq!(cfg.beams[0].rabi_hz, Setting::Hz(2.0e6));
        apply_set(&mut cfg, "beams.0.rabi_hz=auto").unwrap();
        assert_eq!(cfg.beams[0].rabi_hz, Setting::Auto);
    }

    #[test]
    fn set_override_rejects_unknown_key() {
        let mut cfg = RunConfig::default();
        assert!(apply_set(&mut cfg, "simulation.nope=1").is_err());
        assert!(apply_set(&mut cfg, "simulation.fock_dim=0").is_err());
    }

    #[test]
    fn auto_detunings_compensate_zeeman_shifts() {
        let cfg = RunConfig::default();
        let beams = cfg.resolve_beams().unwrap();
        let levels = cfg.sublevels().unwrap();
        let delta = cfg.delta();
        // two-photon (Raman) resonance of each pump leg with the probe:
        // equal virtual-level energy above the respective lower states
        let probe = &beams[0];
        let p397 = &beams[1];
        let p866 = &beams[2];
        let e_probe = probe.detuning + levels[IDX_S_PLUS].zeeman_shift;
        let e_397 = p397.detuning + levels[IDX_S_MINUS].zeeman_shift;
        let e_866 = p866.detuning + levels[IDX_D_P12].zeeman_shift
            - levels[IDX_S_MINUS].zeeman_shift
            + levels[IDX_S_PLUS].zeeman_shift;
        assert!((e_probe - delta).abs() < 1e-9);
        assert!((e_397 - delta).abs() < 1e-9);
        assert!((e_866 - e_probe).abs() < 1e-9);
    }

    #[test]
    fn auto_pump_power_matches_analytic_inversion() {
        let cfg = RunConfig::default();
        let beams = cfg.resolve_beams().unwrap();
        let levels = cfg.sublevels().unwrap();
        let nu_r = TWO_PI * cfg.trap.nu_radial1_hz;
        let (dleg, weight) = pump_leg(
            TransitionClass::Sp397,
            Polarization::SigmaPlus,
            &levels,
            beams[1].detuning,
        )
        .unwrap();
        let expect = ld::tune_pump(dleg, nu_r).unwrap() / weight;
        assert!((beams[1].rabi - expect).abs() < 1e-6 * expect);
        // the leg weight of the sigma+ 397 transition is the S(-1/2)
        // Clebsch-Gordan factor sqrt(2/3)
        assert!((weight - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn build_system_produces_valid_model() {
        let mut cfg = RunConfig::default();
        cfg.simulation.fock_dim = 4;
        let sys = cfg.build_system("axial").unwrap();
        assert_eq!(sys.beams.len(), 3);
        // axial mode: probe and 866 beams project fully, radial pump not
        assert!(sys.etas[0].abs() > 0.05);
        assert!(sys.etas[1].abs() < 1e-12);
        assert!(sys.etas[2].abs() > 0.02);
        let targets = cfg.tune_targets().unwrap();
        assert_eq!(targets.len(), 2);
        assert_eq!(targets[0].0, "pump397");
        assert!((targets[0].1 - TWO_PI * 2.552e6).abs() < 1.0);
    }
}
