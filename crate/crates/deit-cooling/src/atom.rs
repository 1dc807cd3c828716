//! ⁴⁰Ca⁺ electronic structure: the 8 Zeeman sublevels of S₁/₂, P₁/₂ and
//! D₃/₂, their magnetic-field shifts, laser coupling matrix elements, and
//! spontaneous-decay channels.
//!
//! Angular momentum quantum numbers are stored as twice their value
//! (`mj2 = 2 mJ`) so that half-integers stay exact.

use num_complex::Complex64 as C64;

use crate::constants::{G_D32, G_P12, G_S12, HBAR, LAMBDA_397, LAMBDA_866, MU_B};
use crate::error::{Error, Result};

/// Fine-structure terms of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Term {
    #[serde(rename = "s1/2")]
    S12,
    #[serde(rename = "p1/2")]
    P12,
    #[serde(rename = "d3/2")]
    D32,
}

impl Term {
    /// 2J of the term.
    pub fn j2(self) -> i32 {
        match self {
            Term::S12 | Term::P12 => 1,
            Term::D32 => 3,
        }
    }
}

/// Landé g-factors, configurable to allow exact-symmetry tests.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct GFactors {
    pub g_s: f64,
    pub g_p: f64,
    pub g_d: f64,
}

impl Default for GFactors {
    fn default() -> Self {
        Self { g_s: G_S12, g_p: G_P12, g_d: G_D32 }
    }
}

impl GFactors {
    fn for_term(&self, term: Term) -> f64 {
        match term {
            Term::S12 => self.g_s,
            Term::P12 => self.g_p,
            Term::D32 => self.g_d,
        }
    }
}

/// One Zeeman sublevel with its magnetic shift (rad/s).
#[derive(Clone, Copy, Debug)]
pub struct Sublevel {
    pub term: Term,
    /// Twice the magnetic quantum number.
    pub mj2: i32,
    /// g_J · mJ · μ_B · B / ħ, rad/s.
    pub zeeman_shift: f64,
}

/// Canonical sublevel ordering used for all matrix indices:
/// S(−1/2), S(+1/2), P(−1/2), P(+1/2), D(−3/2), D(−1/2), D(+1/2), D(+3/2).
pub const NUM_SUBLEVELS: usize = 8;

pub const IDX_S_MINUS: usize = 0;
pub const IDX_S_PLUS: usize = 1;
pub const IDX_P_MINUS: usize = 2;
pub const IDX_P_PLUS: usize = 3;
pub const IDX_D_M32: usize = 4;
pub const IDX_D_M12: usize = 5;
pub const IDX_D_P12: usize = 6;
pub const IDX_D_P32: usize = 7;

/// Index of (term, 2mJ) in the canonical ordering.
pub fn sublevel_index(term: Term, mj2: i32) -> Option<usize> {
    match (term, mj2) {
        (Term::S12, -1) => Some(IDX_S_MINUS),
        (Term::S12, 1) => Some(IDX_S_PLUS),
        (Term::P12, -1) => Some(IDX_P_MINUS),
        (Term::P12, 1) => Some(IDX_P_PLUS),
        (Term::D32, -3) => Some(IDX_D_M32),
        (Term::D32, -1) => Some(IDX_D_M12),
        (Term::D32, 1) => Some(IDX_D_P12),
        (Term::D32, 3) => Some(IDX_D_P32),
        _ => None,
    }
}

/// All 8 Zeeman sublevels at magnetic field `b_tesla`, canonical order.
pub fn build_sublevels(b_tesla: f64, g: &GFactors) -> Result<Vec<Sublevel>> {
    if b_tesla < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "magnetic field {} T < 0",
            b_tesla
        )));
    }
    let unit = MU_B * b_tesla / HBAR;
    let mut levels = Vec::with_capacity(NUM_SUBLEVELS);
    for (term, mj2) in [
        (Term::S12, -1),
        (Term::S12, 1),
        (Term::P12, -1),
        (Term::P12, 1),
        (Term::D32, -3),
        (Term::D32, -1),
        (Term::D32, 1),
        (Term::D32, 3),
    ] {
        let zeeman_shift = g.for_term(term) * (mj2 as f64 / 2.0) * unit;
        levels.push(Sublevel { term, mj2, zeeman_shift });
    }
    Ok(levels)
}

/// Laser transition class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TransitionClass {
    /// S₁/₂ ↔ P₁/₂ at 397 nm.
    #[serde(rename = "397")]
    Sp397,
    /// D₃/₂ ↔ P₁/₂ at 866 nm.
    #[serde(rename = "866")]
    Dp866,
}

impl TransitionClass {
    pub fn wavelength(self) -> f64 {
        match self {
            TransitionClass::Sp397 => LAMBDA_397,
            TransitionClass::Dp866 => LAMBDA_866,
        }
    }

    pub fn lower_term(self) -> Term {
        match self {
            TransitionClass::Sp397 => Term::S12,
            TransitionClass::Dp866 => Term::D32,
        }
    }
}

/// Beam polarization. `SigmaBoth` models a linearly polarized beam
/// propagating perpendicular to the quantization axis, which drives σ⁺ and
/// σ⁻ with amplitude Ω/√2 each (the 866 nm repump geometry).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Pi,
    SigmaPlus,
    SigmaMinus,
    SigmaBoth,
}

impl Polarization {
    /// (Δm in units of 1, amplitude weight) per spherical component.
    pub fn components(self) -> &'static [(i32, f64)] {
        const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Polarization::Pi => &[(0, 1.0)],
            Polarization::SigmaPlus => &[(1, 1.0)],
            Polarization::SigmaMinus => &[(-1, 1.0)],
            Polarization::SigmaBoth => &[(1, INV_SQRT2), (-1, INV_SQRT2)],
        }
    }
}

/// A laser coupling.
#[derive(Clone, Debug)]
pub struct Beam {
    pub name: String,
    pub class: TransitionClass,
    pub polarization: Polarization,
    /// rad/s, relative to the unperturbed upper term.
    pub detuning: f64,
    /// Peak Rabi angular frequency, rad/s.
    pub rabi: f64,
    /// Unit propagation direction in the lab frame.
    pub direction: [f64; 3],
    /// Marks the beam whose detuning a spectrum scan varies.
    pub probe: bool,
}

impl Beam {
    pub fn validate(&self) -> Result<()> {
        let n2: f64 = self.direction.iter().map(|x| x * x).sum();
        if (n2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "beam '{}' direction {:?} is not a unit vector",
                self.name, self.direction
            )));
        }
        if self.rabi < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "beam '{}' has negative Rabi frequency",
                self.name
            )));
        }
        Ok(())
    }
}

/// Clebsch-Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩ in the Condon-Shortley
/// convention. All arguments are twice the quantum numbers.
pub fn clebsch_gordan(j1_2: i32, m1_2: i32, j2_2: i32, m2_2: i32, j_2: i32, m_2: i32) -> f64 {
    if m1_2 + m2_2 != m_2 {
        return 0.0;
    }
    if m1_2.abs() > j1_2 || m2_2.abs() > j2_2 || m_2.abs() > j_2 {
        return 0.0;
    }
    // Triangle rule, and j1+j2+J must be an integer.
    if j_2 < (j1_2 - j2_2).abs() || j_2 > j1_2 + j2_2 || (j1_2 + j2_2 + j_2) % 2 != 0 {
        return 0.0;
    }

    // Integer arguments of every factorial, as plain (not doubled) values.
    let f = |x2: i32| -> f64 {
        debug_assert!(x2 % 2 == 0 && x2 >= 0);
        factorial((x2 / 2) as u32)
    };

    let prefactor = ((j_2 + 1) as f64 * f(j1_2 + j2_2 - j_2) * f(j1_2 - j2_2 + j_2)
        * f(-j1_2 + j2_2 + j_2)
        / f(j1_2 + j2_2 + j_2 + 2))
        .sqrt()
        * (f(j_2 + m_2) * f(j_2 - m_2) * f(j1_2 - m1_2) * f(j1_2 + m1_2) * f(j2_2 - m2_2)
            * f(j2_2 + m2_2))
        .sqrt();

    let mut sum = 0.0;
    // k ranges over all integers keeping every factorial argument >= 0.
    let kmin = 0.max((j2_2 - j_2 - m1_2) / 2).max((j1_2 + m2_2 - j_2) / 2);
    let kmax = ((j1_2 + j2_2 - j_2) / 2)
        .min((j1_2 - m1_2) / 2)
        .min((j2_2 + m2_2) / 2);
    for k in kmin..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let denom = factorial(k as u32)
            * f(j1_2 + j2_2 - j_2 - 2 * k)
            * f(j1_2 - m1_2 - 2 * k)
            * f(j2_2 + m2_2 - 2 * k)
            * f(j_2 - j2_2 + m1_2 + 2 * k)
            * f(j_2 - j1_2 - m2_2 + 2 * k);
        sum += sign / denom;
    }
    prefactor * sum
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Complex Rabi amplitude Ω × CG for a beam driving lower → upper.
/// Zero when the polarization's selection rule is violated.
pub fn coupling_element(beam: &Beam, lower: &Sublevel, upper: &Sublevel) -> Result<C64> {
    if lower.term != beam.class.lower_term() || upper.term != Term::P12 {
        return Err(Error::InvalidArgument(format!(
            "beam '{}' ({:?}) cannot couple {:?} to {:?}",
            beam.name, beam.class, lower.term, upper.term
        )));
    }
    let mut amp = 0.0;
    for &(q, weight) in beam.polarization.components() {
        if upper.mj2 == lower.mj2 + 2 * q {
            amp += weight
                * clebsch_gordan(lower.term.j2(), lower.mj2, 2, 2 * q, upper.term.j2(), upper.mj2);
        }
    }
    Ok(C64::new(beam.rabi * amp, 0.0))
}

/// One spontaneous-decay channel P₁/₂ → S₁/₂ or D₃/₂.
#[derive(Clone, Copy, Debug)]
pub struct DecayChannel {
    /// Canonical sublevel index of the upper (P₁/₂) state.
    pub upper: usize,
    /// Canonical sublevel index of the lower state.
    pub lower: usize,
    /// Partial decay rate, rad/s.
    pub rate: f64,
    /// Wavelength of the emitted photon, m.
    pub wavelength: f64,
}

/// All dipole-allowed decay channels out of the two P₁/₂ sublevels.
/// Per upper sublevel the S-branch rates sum to (1−branching_sd)·Γ and the
/// D-branch rates to branching_sd·Γ.
pub fn decay_channels(
    gamma_total: f64,
    branching_sd: f64,
    sublevels: &[Sublevel],
) -> Result<Vec<DecayChannel>> {
    if !(0.0..1.0).contains(&branching_sd) {
        return Err(Error::InvalidArgument(format!(
            "branching_sd = {} outside [0, 1)",
            branching_sd
        )));
    }
    if gamma_total <= 0.0 {
        return Err(Error::InvalidArgument("gamma_total must be > 0".into()));
    }
    let mut channels = Vec::new();
    for (ui, upper) in sublevels.iter().enumerate() {
        if upper.term != Term::P12 {
            continue;
        }
        for (branch_term, branch_frac, wavelength) in [
            (Term::S12, 1.0 - branching_sd, LAMBDA_397),
            (Term::D32, branching_sd, LAMBDA_866),
        ] {
            if branch_frac == 0.0 {
                continue;
            }
            // CG² weights over all (m_lower, q) pairs sum to 1 within a branch;
            // normalize anyway to pin the per-level outflow exactly.
            let mut weights: Vec<(usize, f64)> = Vec::new();
            for (li, lower) in sublevels.iter().enumerate() {
                if lower.term != branch_term {
                    continue;
                }
                // photon spherical component: m_lower + q = m_upper
                let q2 = upper.mj2 - lower.mj2;
                if q2.abs() > 2 {
                    continue;
                }
                let cg = clebsch_gordan(branch_term.j2(), lower.mj2, 2, q2, 1, upper.mj2);
                if cg != 0.0 {
                    weights.push((li, cg * cg));
                }
            }
            let norm: f64 = weights.iter().map(|(_, w)| w).sum();
            for (li, w) in weights {
                channels.push(DecayChannel {
                    upper: ui,
                    lower: li,
                    rate: gamma_total * branch_frac * w / norm,
                    wavelength,
                });
            }
        }
    }
    Ok(channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::constants::TWO_PI;

    fn beam(class: TransitionClass, pol: Polarization) -> Beam {
        Beam {
            name: "test".into(),
            class,
            polarization: pol,
            detuning: 0.0,
            rabi: 1.0,
            direction: [0.0, 0.0, 1.0],
            probe: false,
        }
    }

    #[test]
    fn zero_field_gives_zero_shifts() {
        let levels = build_sublevels(0.0, &GFactors::default()).unwrap();
        assert_eq!(levels.len(), 8);
        assert!(levels.iter().all(|l| l.zeeman_shift == 0.0));
    }

    #[test]
    fn zeeman_shift_at_paper_field() {
        // Oracle: g mJ μ_B B / ħ with CODATA μ_B; ≈ 2π × 5.83 MHz for
        // S₁/₂ m = +1/2 at 416 µT.
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let s_plus = levels[IDX_S_PLUS];
        let expected = 2.002 * 0.5 * MU_B * 416e-6 / HBAR;
        assert_abs_diff_eq!(s_plus.zeeman_shift, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(s_plus.zeeman_shift / TWO_PI / 1e6, 5.83, epsilon = 0.01);
    }

    #[test]
    fn shifts_are_odd_in_mj() {
        let levels = build_sublevels(3.2e-4, &GFactors::default()).unwrap();
        for l in &levels {
            let partner = levels
                .iter()
                .find(|p| p.term == l.term && p.mj2 == -l.mj2)
                .unwrap();
            assert_abs_diff_eq!(l.zeeman_shift, -partner.zeeman_shift, epsilon = 1e-12);
        }
    }

    #[test]
    fn cg_against_standard_table() {
        // Condon-Shortley values from the standard 1/2 ⊗ 1 and 3/2 ⊗ 1
        // tables (atom first, photon second).
        let cases = [
            ((1, -1, 2, 2, 1, 1), -(2.0f64 / 3.0).sqrt()),
            ((1, 1, 2, 0, 1, 1), (1.0f64 / 3.0).sqrt()),
            ((1, -1, 2, 0, 1, -1), -(1.0f64 / 3.0).sqrt()),
            ((1, 1, 2, -2, 1, -1), (2.0f64 / 3.0).sqrt()),
            ((3, 3, 2, -2, 1, 1), (1.0f64 / 2.0).sqrt()),
            ((3, 1, 2, 0, 1, 1), -(1.0f64 / 3.0).sqrt()),
            ((3, -1, 2, 2, 1, 1), (1.0f64 / 6.0).sqrt()),
            ((3, 1, 2, -2, 1, -1), (1.0f64 / 6.0).sqrt()),
            ((3, -1, 2, 0, 1, -1), -(1.0f64 / 3.0).sqrt()),
            ((3, -3, 2, 2, 1, -1), (1.0f64 / 2.0).sqrt()),
        ];
        for ((j1, m1, j2, m2, j, m), expected) in cases {
            let got = clebsch_gordan(j1, m1, j2, m2, j, m);
            assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn cg_sum_rule() {
        // Σ_{q, m_u} CG² = (2J_u + 1)/(2J_l + 1) for each fixed lower level.
        for (jl2, expected) in [(1, 1.0), (3, 0.5)] {
            let mut ml2 = -jl2;
            while ml2 <= jl2 {
                let mut sum = 0.0;
                for q in [-1i32, 0, 1] {
                    let mu2 = ml2 + 2 * q;
                    if mu2.abs() <= 1 {
                        let cg = clebsch_gordan(jl2, ml2, 2, 2 * q, 1, mu2);
                        sum += cg * cg;
                    }
                }
                assert_abs_diff_eq!(sum, expected, epsilon = 1e-13);
                ml2 += 2;
            }
        }
    }

    #[test]
    fn sigma_plus_selection_rule() {
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let b = beam(TransitionClass::Sp397, Polarization::SigmaPlus);
        // S m=+1/2 has no σ⁺ partner in P₁/₂ (needs m=3/2).
        let blocked =
            coupling_element(&b, &levels[IDX_S_PLUS], &levels[IDX_P_PLUS]).unwrap();
        assert_eq!(blocked.norm(), 0.0);
        // S m=−1/2 → P m=+1/2 is the pump coupling.
        let open = coupling_element(&b, &levels[IDX_S_MINUS], &levels[IDX_P_PLUS]).unwrap();
        assert_abs_diff_eq!(open.re.abs(), (2.0f64 / 3.0).sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn pi_probe_coupling_nonzero() {
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let b = beam(TransitionClass::Sp397, Polarization::Pi);
        let probe = coupling_element(&b, &levels[IDX_S_MINUS], &levels[IDX_P_MINUS]).unwrap();
        assert!(probe.norm() > 0.0);
        // π elements vanish for Δm ≠ 0.
        let blocked =
            coupling_element(&b, &levels[IDX_S_MINUS], &levels[IDX_P_PLUS]).unwrap();
        assert_eq!(blocked.norm(), 0.0);
    }

    #[test]
    fn coupling_rejects_wrong_class() {
        let levels = build_sublevels(0.0, &GFactors::default()).unwrap();
        let b = beam(TransitionClass::Sp397, Polarization::Pi);
        assert!(coupling_element(&b, &levels[IDX_D_P12], &levels[IDX_P_PLUS]).is_err());
    }

    #[test]
    fn decay_channels_pure_s_branch() {
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let gamma = TWO_PI * 20.7e6;
        let chans = decay_channels(gamma, 0.0, &levels).unwrap();
        assert_eq!(chans.len(), 4);
        for ui in [IDX_P_MINUS, IDX_P_PLUS] {
            let total: f64 = chans.iter().filter(|c| c.upper == ui).map(|c| c.rate).sum();
            assert_abs_diff_eq!(total, gamma, epsilon = gamma * 1e-12);
        }
    }

    #[test]
    fn decay_channels_default_branching() {
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let gamma = TWO_PI * 20.7e6;
        let chans = decay_channels(gamma, 0.064, &levels).unwrap();
        for ui in [IDX_P_MINUS, IDX_P_PLUS] {
            let to_s = chans
                .iter()
                .filter(|c| c.upper == ui && c.lower <= IDX_S_PLUS)
                .count();
            let to_d = chans
                .iter()
                .filter(|c| c.upper == ui && c.lower >= IDX_D_M32)
                .count();
            assert_eq!(to_s, 2);
            assert_eq!(to_d, 3);
            let total: f64 = chans.iter().filter(|c| c.upper == ui).map(|c| c.rate).sum();
            assert_abs_diff_eq!(total, gamma, epsilon = gamma * 1e-12);
        }
    }

    #[test]
    fn decay_conserves_rate_for_any_branching() {
        let levels = build_sublevels(1e-4, &GFactors::default()).unwrap();
        let gamma = 1.0;
        for b in [0.0, 0.01, 0.064, 0.3, 0.9] {
            let chans = decay_channels(gamma, b, &levels).unwrap();
            for ui in [IDX_P_MINUS, IDX_P_PLUS] {
                let total: f64 =
                    chans.iter().filter(|c| c.upper == ui).map(|c| c.rate).sum();
                assert_abs_diff_eq!(total, gamma, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sigma_both_splits_amplitude() {
        let levels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let b_both = beam(TransitionClass::Dp866, Polarization::SigmaBoth);
        let b_minus = beam(TransitionClass::Dp866, Polarization::SigmaMinus);
        let both = coupling_element(&b_both, &levels[IDX_D_P12], &levels[IDX_P_MINUS]).unwrap();
        let minus =
            coupling_element(&b_minus, &levels[IDX_D_P12], &levels[IDX_P_MINUS]).unwrap();
        assert_abs_diff_eq!(
            both.re,
            minus.re / std::f64::consts::SQRT_2,
            epsilon = 1e-14
        );
    }
}
