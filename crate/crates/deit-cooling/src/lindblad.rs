//! Open-system evolution: Lindblad generator assembly, time propagation,
//! and steady-state solving.
//!
//! The generator is built in a rotating frame chosen per laser so that the
//! Hamiltonian is time independent. That frame exists whenever the
//! beam-coupling graph contains no inconsistent loops; the builder checks
//! this and reports a conflict otherwise.
//!
//! All frequencies are angular (rad/s).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::atom::{self, Beam, Sublevel, Term};
use crate::cmat::{CMat, Csr};
use crate::error::{Error, Result};
use crate::motion::MotionalMode;
use crate::operator::{self, DensityState, HilbertSpace, LinearOperator};

/// Full description of the driven ion + one motional mode.
#[derive(Clone, Debug)]
pub struct SystemConfig {
    /// Electronic sublevels in canonical order (see [`crate::atom`]).
    pub sublevels: Vec<Sublevel>,
    /// Active laser beams.
    pub beams: Vec<Beam>,
    /// Total decay rate of the upper level (rad/s).
    pub gamma_total: f64,
    /// Branching fraction of upper-level decay into the metastable manifold.
    pub branching_sd: f64,
    /// The motional mode carried explicitly in the state. `fock_dim == 1`
    /// reduces to electronic-only dynamics.
    pub mode: MotionalMode,
    /// Signed Lamb-Dicke parameter of each beam along `mode` (same order
    /// as `beams`).
    pub etas: Vec<f64>,
    /// Expansion order in the Lamb-Dicke parameters: 0, 1 or 2.
    pub ld_order: u8,
    /// Fraction of emission events treated as momentum kicks along the
    /// mode axis (geometric average of the emission pattern).
    pub alpha_recoil: f64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sublevels.len() != atom::NUM_SUBLEVELS {
            return Err(Error::InvalidArgument(format!(
                "expected {} sublevels, got {}",
                atom::NUM_SUBLEVELS,
                self.sublevels.len()
            )));
        }
        for beam in &self.beams {
            beam.validate()?;
        }
        if self.gamma_total <= 0.0 {
            return Err(Error::InvalidArgument(
                "gamma_total must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.branching_sd) {
            return Err(Error::InvalidArgument(
                "branching_sd must lie in [0, 1)".into(),
            ));
        }
        if self.mode.fock_dim == 0 {
            return Err(Error::InvalidArgument("fock_dim must be >= 1".into()));
        }
        if self.mode.fock_dim > 1 {
            self.mode.validate()?;
        }
        if self.etas.len() != self.beams.len() {
            return Err(Error::DimensionMismatch(format!(
                "etas has {} entries for {} beams",
                self.etas.len(),
                self.beams.len()
            )));
        }
        if self.ld_order > 2 {
            return Err(Error::InvalidArgument(
                "ld_order must be 0, 1 or 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha_recoil) {
            return Err(Error::InvalidArgument(
                "alpha_recoil must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Tolerance (rad/s) for rotating-frame consistency around coupling loops.
const FRAME_TOL: f64 = 1e-6;

/// Rotating-frame energy offsets for each sublevel.
///
/// Returns `delta` such that the frame Hamiltonian diagonal is `delta[i]`
/// for sublevel `i`. Within each connected component of the beam-coupling
/// graph the offsets are fixed relative to each other; the anchor
/// (lowest-index node) of each component is placed at zero. A beam drives
/// a pair resonantly exactly when the two offsets coincide.
pub fn rotating_frame(sublevels: &[Sublevel], beams: &[Beam]) -> Result<Vec<f64>> {
    let n = sublevels.len();
    // chi[i] is the frame frequency minus the unperturbed term energy;
    // delta[i] = zeeman[i] - chi[i].
    let mut chi = vec![f64::NAN; n];
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for beam in beams {
        let lower_term = beam.class.lower_term();
        for (li, lower) in sublevels.iter().enumerate() {
            if lower.term != lower_term {
                continue;
            }
            for (ui, upper) in sublevels.iter().enumerate() {
                if upper.term != Term::P12 {
                    continue;
                }
                let g = atom::coupling_element(beam, lower, upper)?;
                if g.norm() > 0.0 {
                    edges.push((li, ui, beam.detuning));
                }
            }
        }
    }
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if !chi[start].is_nan() {
            continue;
        }
        chi[start] = sublevels[start].zeeman_shift;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            for &(l, u, det) in &edges {
                let (to, implied) = if l == node {
                    (u, chi[node] + det)
                } else if u == node {
                    (l, chi[node] - det)
                } else {
                    continue;
                };
                if chi[to].is_nan() {
                    chi[to] = implied;
                    queue.push_back(to);
                } else if (chi[to] - implied).abs() > FRAME_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "beam detunings close an inconsistent loop at sublevel {to}: \
                         frame offset {:.6e} vs {:.6e} rad/s",
                        chi[to], implied
                    )));
                }
            }
        }
    }
    Ok(sublevels
        .iter()
        .zip(chi.iter())
        .map(|(s, c)| s.zeeman_shift - c)
        .collect())
}

/// Lamb-Dicke expansion of exp(i η (a + a†)) to the requested order.
fn displacement_expansion(eta: f64, order: u8, fock_dim: usize) -> Array2<C64> {
    let mut e = Array2::<C64>::eye(fock_dim);
    if order == 0 || fock_dim == 1 || eta == 0.0 {
        return e;
    }
    let a = operator::destroy(fock_dim).expect("fock_dim >= 2");
    let x = a.matrix() + &a.dagger().into_matrix();
    e = e + x.mapv(|v| C64::new(0.0, eta) * v);
    if order >= 2 {
        let x2 = x.dot(&x);
        e = e + x2.mapv(|v| C64::new(-0.5 * eta * eta, 0.0) * v);
    }
    e
}

/// Assembled Lindblad generator.
pub struct Liouvillian {
    space: HilbertSpace,
    hamiltonian: LinearOperator,
    /// Jump operators with their rates; the full collapse operator for
    /// entry `(c, r)` is `sqrt(r) * c`.
    jumps: Vec<(LinearOperator, f64)>,
    /// Electronic-diagonal weights for the photon scattering rate.
    scatter_weights: Vec<f64>,
    el_dim: usize,
    /// K = H − (i/2)·Σ rate·c†c; the commutator and anticommutator parts
    /// of the generator collapse into −i(Kρ − ρK†).
    keff_csr: Csr,
    jump_csr: Vec<Csr>,
}

impl Liouvillian {
    /// Assemble a generator from explicit operators. `jumps` carries
    /// `(operator, rate)` pairs; `scatter_weights` gives the per-level
    /// contribution of the first tensor factor's populations to the
    /// photon scattering rate (pass zeros if not meaningful).
    pub fn new(
        space: HilbertSpace,
        hamiltonian: LinearOperator,
        jumps: Vec<(LinearOperator, f64)>,
        scatter_weights: Vec<f64>,
    ) -> Result<Self> {
        let d = space.total_dim();
        if hamiltonian.matrix().nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "hamiltonian is {}x{} on a dim-{} space",
                hamiltonian.matrix().nrows(),
                hamiltonian.matrix().ncols(),
                d
            )));
        }
        let h_scale = hamiltonian
            .matrix()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if !hamiltonian.is_hermitian(1e-9 * (1.0 + h_scale)) {
            return Err(Error::InvalidArgument(
                "hamiltonian is not hermitian".into(),
            ));
        }
        let el_dim = space.factor(0);
        if scatter_weights.len() != el_dim {
            return Err(Error::DimensionMismatch(format!(
                "scatter_weights has {} entries for first factor dim {}",
                scatter_weights.len(),
                el_dim
            )));
        }
        let mut gsum = Array2::<C64>::zeros((d, d));
        let mut jump_csr = Vec::new();
        for (c, rate) in &jumps {
            if c.matrix().nrows() != d {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator is {}x{} on a dim-{} space",
                    c.matrix().nrows(),
                    c.matrix().ncols(),
                    d
                )));
            }
            if *rate < 0.0 {
                return Err(Error::InvalidArgument("jump rate must be >= 0".into()));
            }
            let scaled = c.matrix().mapv(|v| v * rate.sqrt());
            let cdag = scaled.t().mapv(|v: C64| v.conj());
            gsum = gsum + cdag.dot(&scaled);
            jump_csr.push(Csr::from_ndarray(&scaled, 0.0));
        }
        let keff = hamiltonian.matrix() - gsum.mapv(|g| C64::new(0.0, 0.5) * g);
        let keff_csr = Csr::from_ndarray(&keff, 0.0);
        Ok(Self {
            space,
            hamiltonian,
            jumps,
            scatter_weights,
            el_dim,
            keff_csr,
            jump_csr,
        })
    }

    /// Build the generator for a configured ion + mode system.
    pub fn build(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let fock = cfg.mode.fock_dim;
        let space = HilbertSpace::composite(atom::NUM_SUBLEVELS, fock);
        let d = space.total_dim();
        let delta = rotating_frame(&cfg.sublevels, &cfg.beams)?;

        let mut h = Array2::<C64>::zeros((d, d));
        for (i, &di) in delta.iter().enumerate() {
            for k in 0..fock {
                let idx = i * fock + k;
                h[[idx, idx]] += C64::new(di, 0.0);
            }
        }
        if fock > 1 {
            for i in 0..atom::NUM_SUBLEVELS {
                for k in 0..fock {
                    let idx = i * fock + k;
                    h[[idx, idx]] += C64::new(cfg.mode.frequency * k as f64, 0.0);
                }
            }
        }
        for (b, beam) in cfg.beams.iter().enumerate() {
            let order = if fock > 1 { cfg.ld_order } else { 0 };
            let disp = displacement_expansion(cfg.etas[b], order, fock);
            let lower_term = beam.class.lower_term();
            for (li, lower) in cfg.sublevels.iter().enumerate() {
                if lower.term != lower_term {
                    continue;
                }
                for (ui, upper) in cfg.sublevels.iter().enumerate() {
                    if upper.term != Term::P12 {
                        continue;
                    }
                    let g = atom::coupling_element(beam, lower, upper)?;
                    if g.norm() == 0.0 {
                        continue;
                    }
                    let half = 0.5 * g;
                    for m in 0..fock {
                        for mp in 0..fock {
                            let e = disp[[m, mp]];
                            if e.norm() == 0.0 {
                                continue;
                            }
                            h[[ui * fock + m, li * fock + mp]] += half * e;
                            h[[li * fock + mp, ui * fock + m]] += (half * e).conj();
                        }
                    }
                }
            }
        }
        let hamiltonian = LinearOperator::from_matrix(space.clone(), h)?;

        let channels =
            atom::decay_channels(cfg.gamma_total, cfg.branching_sd, &cfg.sublevels)?;
        let x0 = cfg.mode.ground_state_size();
        let mut jumps: Vec<(LinearOperator, f64)> = Vec::new();
        let push_jump = |li: usize,
                             ui: usize,
                             motional: Option<&Array2<C64>>,
                             rate: f64,
                             jumps: &mut Vec<(LinearOperator, f64)>|
         -> Result<()> {
            if rate <= 0.0 {
                return Ok(());
            }
            let mut full = Array2::<C64>::zeros((d, d));
            match motional {
                None => {
                    for k in 0..fock {
                        full[[li * fock + k, ui * fock + k]] = C64::new(1.0, 0.0);
                    }
                }
                Some(m) => {
                    for ((km, kn), w) in m.indexed_iter() {
                        if w.norm() > 0.0 {
                            full[[li * fock + km, ui * fock + kn]] = *w;
                        }
                    }
                }
            }
            jumps.push((LinearOperator::from_matrix(space.clone(), full)?, rate));
            Ok(())
        };
        let a_op = if fock > 1 {
            Some(operator::destroy(fock)?.into_matrix())
        } else {
            None
        };
        for ch in &channels {
            let kick_fraction = if fock > 1 && cfg.ld_order >= 1 {
                let eta_em = crate::constants::TWO_PI / ch.wavelength * x0;
                (cfg.alpha_recoil * eta_em * eta_em).min(1.0)
            } else {
                0.0
            };
            push_jump(
                ch.lower,
                ch.upper,
                None,
                ch.rate * (1.0 - kick_fraction),
                &mut jumps,
            )?;
            if kick_fraction > 0.0 {
                let a = a_op.as_ref().unwrap();
                let adag = a.t().mapv(|v: C64| v.conj());
                push_jump(
                    ch.lower,
                    ch.upper,
                    Some(a),
                    ch.rate * kick_fraction / 2.0,
                    &mut jumps,
                )?;
                push_jump(
                    ch.lower,
                    ch.upper,
                    Some(&adag),
                    ch.rate * kick_fraction / 2.0,
                    &mut jumps,
                )?;
            }
        }

        let mut scatter_weights = vec![0.0; atom::NUM_SUBLEVELS];
        for ch in &channels {
            scatter_weights[ch.upper] += ch.rate;
        }

        Self::new(space, hamiltonian, jumps, scatter_weights)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn hamiltonian(&self) -> &LinearOperator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[(LinearOperator, f64)] {
        &self.jumps
    }

    /// Photon scattering rate (events/s) in state `rho`.
    pub fn scattering_rate(&self, rho: &DensityState) -> f64 {
        rho.factor_populations(0)
            .iter()
            .zip(self.scatter_weights.iter())
            .map(|(p, w)| p * w)
            .sum()
    }

    fn scattering_rate_cmat(&self, rho: &CMat) -> f64 {
        rho.factor0_populations(self.el_dim)
            .iter()
            .zip(self.scatter_weights.iter())
            .map(|(p, w)| p * w)
            .sum()
    }

    /// dρ/dt for a dense state. Convenience wrapper used by tests and the
    /// steady-state residual check; the propagator uses the same kernels
    /// through preallocated buffers.
    pub fn apply(&self, rho: &Array2<C64>) -> Result<Array2<C64>> {
        let d = self.space.total_dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{} on a dim-{} space",
                rho.nrows(),
                rho.ncols(),
                d
            )));
        }
        let x = CMat::from_ndarray(rho);
        let mut out = CMat::zeros(d);
        let mut scratch = CMat::zeros(d);
        self.rhs(&x, &mut out, &mut scratch);
        Ok(out.to_ndarray())
    }

    /// out = −i[H,ρ] + Σ_c ( cρc† − ½{c†c, ρ} ). The commutator and the
    /// anticommutator are evaluated together as −i(Mρ − (Mρ)†-mirror) with
    /// M = H − (i/2)·Σ rate·c†c, so one spmm and one dense pass cover both;
    /// the cρc† terms are added by the fused sparse sandwich.
    fn rhs(&self, rho: &CMat, out: &mut CMat, scratch: &mut CMat) {
        let n = rho.n;
        self.keff_csr.spmm(rho, scratch);
        // −i(W − W‡) with W = Kρ and W‡ the conjugate transpose; for
        // Hermitian ρ this equals −iKρ + iρK†.
        for i in 0..n {
            for j in 0..n {
                let (ij, ji) = (i * n + j, j * n + i);
                out.re[ij] = scratch.im[ij] + scratch.im[ji];
                out.im[ij] = scratch.re[ji] - scratch.re[ij];
            }
        }
        for c in &self.jump_csr {
            c.sandwich(rho, out);
        }
    }
}

/// Dormand–Prince 5(4) coefficients.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Controls for the adaptive propagator.
#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Per-step absolute tolerance on density-matrix elements.
    pub abs_tol: f64,
    /// Per-step relative tolerance on density-matrix elements.
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Compute the minimum eigenvalue at every k-th sample (0 = never,
    /// final state is always checked).
    pub eigencheck_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 0.0,
            max_steps: 50_000_000,
            eigencheck_stride: 1,
        }
    }
}

/// Numerical-health summary of a propagation run.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConservationReport {
    /// Largest |tr ρ − 1| observed before per-step renormalization.
    pub max_trace_deviation: f64,
    /// Largest Hermiticity deviation observed before symmetrization.
    pub max_hermiticity_deviation: f64,
    /// Smallest eigenvalue seen across eigen-checked samples.
    pub min_eigenvalue: f64,
    /// Largest |Σ populations − 1| across samples.
    pub max_population_sum_deviation: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Sampled propagation output.
pub struct CoolingTrajectory {
    pub times: Vec<f64>,
    pub nbar: Vec<f64>,
    /// Populations of the first tensor factor at each sample.
    pub populations: Vec<Vec<f64>>,
    /// Photon scattering rate (events/s) at each sample.
    pub scatter_rate: Vec<f64>,
    pub final_state: DensityState,
    pub conservation: ConservationReport,
}

impl Liouvillian {
    /// Propagate `rho0` to `t_final`, sampling every `sample_dt`.
    pub fn evolve(
        &self,
        rho0: &DensityState,
        t_final: f64,
        sample_dt: f64,
        opts: &EvolveOptions,
    ) -> Result<CoolingTrajectory> {
        if t_final <= 0.0 || sample_dt <= 0.0 {
            return Err(Error::InvalidArgument(
                "t_final and sample_dt must be positive".into(),
            ));
        }
        let d = self.space.total_dim();
        if rho0.matrix().nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "initial state is {}x{} on a dim-{} space",
                rho0.matrix().nrows(),
                rho0.matrix().ncols(),
                d
            )));
        }
        let mut y = CMat::from_ndarray(rho0.matrix());
        let mut k: Vec<CMat> = (0..7).map(|_| CMat::zeros(d)).collect();
        let mut ytmp = CMat::zeros(d);
        let mut scratch = CMat::zeros(d);

        let mut report = ConservationReport {
            max_trace_deviation: 0.0,
            max_hermiticity_deviation: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_population_sum_deviation: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
        };

        let mut times = Vec::new();
        let mut nbars = Vec::new();
        let mut pops = Vec::new();
        let mut rates = Vec::new();
        let mut sample_counter = 0usize;
        let mut record = |t: f64,
                          y: &CMat,
                          report: &mut ConservationReport,
                          counter: &mut usize|
         -> Result<()> {
            times.push(t);
            nbars.push(y.nbar(self.el_dim));
            let p = y.factor0_populations(self.el_dim);
            let psum: f64 = p.iter().sum();
            let dev = (psum - 1.0).abs();
            if dev > report.max_population_sum_deviation {
                report.max_population_sum_deviation = dev;
            }
            pops.push(p);
            rates.push(self.scattering_rate_cmat(y));
            let stride = opts.eigencheck_stride;
            if stride > 0 && *counter % stride == 0 {
                let state = DensityState::from_matrix_unchecked(
                    self.space.clone(),
                    y.to_ndarray(),
                );
                let ev = state.min_eigenvalue()?;
                if ev < report.min_eigenvalue {
                    report.min_eigenvalue = ev;
                }
            }
            *counter += 1;
            Ok(())
        };

        // initial step size from the first derivative scale
        self.rhs(&y, &mut k[0], &mut scratch);
        let f0 = k[0]
            .re
            .iter()
            .zip(k[0].im.iter())
            .map(|(r, i)| (r * r + i * i).sqrt())
            .fold(0.0f64, f64::max);
        let mut h = if f0 > 0.0 {
            (0.01 / f0).min(sample_dt).min(t_final)
        } else {
            sample_dt.min(t_final)
        };
        let h_min = t_final * 1e-14;

        record(0.0, &y, &mut report, &mut sample_counter)?;
        let mut t = 0.0f64;
        let mut next_sample = sample_dt.min(t_final);
        let mut fsal_valid = true;

        while t < t_final - h_min {
            if report.accepted_steps + report.rejected_steps >= opts.max_steps {
                return Err(Error::Integration(format!(
                    "step budget exhausted at t = {t:.6e} s (h = {h:.3e})"
                )));
            }
            let clipped = h.min(next_sample - t).max(h_min);
            if !fsal_valid {
                self.rhs(&y, &mut k[0], &mut scratch);
                fsal_valid = true;
            }
            // stages 2..7
            for s in 0..6 {
                ytmp.copy_from(&y);
                for (j, a_row) in DP_A[s].iter().enumerate().take(s + 1) {
                    if *a_row != 0.0 {
                        ytmp.axpy(clipped * a_row, &k[j]);
                    }
                }
                let (_, tail) = k.split_at_mut(s + 1);
                self.rhs(&ytmp, &mut tail[0], &mut scratch);
            }
            // elementwise embedded error estimate
            let mut ratio_max = 0.0f64;
            {
                let n2 = d * d;
                for idx in 0..n2 {
                    let mut er = 0.0;
                    let mut ei = 0.0;
                    for (s, e) in DP_E.iter().enumerate() {
                        if *e != 0.0 {
                            er += e * k[s].re[idx];
                            ei += e * k[s].im[idx];
                        }
                    }
                    let err = clipped * (er * er + ei * ei).sqrt();
                    let ymag =
                        (y.re[idx] * y.re[idx] + y.im[idx] * y.im[idx]).sqrt();
                    let tol = opts.abs_tol + opts.rel_tol * ymag;
                    let r = err / tol;
                    if r > ratio_max {
                        ratio_max = r;
                    }
                }
            }
            if ratio_max <= 1.0 {
                // accept: y += h Σ b_s k_s (the b row equals DP_A[5])
                for (j, b) in DP_A[5].iter().enumerate() {
                    if *b != 0.0 {
                        y.axpy(clipped * b, &k[j]);
                    }
                }
                t += clipped;
                report.accepted_steps += 1;
                let herm = y.hermiticity_deviation();
                if herm > report.max_hermiticity_deviation {
                    report.max_hermiticity_deviation = herm;
                }
                let trdev = y.symmetrize_renormalize();
                if trdev > report.max_trace_deviation {
                    report.max_trace_deviation = trdev;
                }
                fsal_valid = false;
                if t >= next_sample - h_min {
                    record(t, &y, &mut report, &mut sample_counter)?;
                    next_sample = (next_sample + sample_dt).min(t_final);
                    if t >= t_final - h_min {
                        break;
                    }
                }
            } else {
                report.rejected_steps += 1;
            }
            let fac = if ratio_max > 0.0 {
                0.9 * ratio_max.powf(-0.2)
            } else {
                5.0
            };
            h = (h * fac.clamp(0.2, 5.0)).max(h_min);
            if h <= h_min && ratio_max > 1.0 {
                return Err(Error::Integration(format!(
                    "step size underflow at t = {t:.6e} s"
                )));
            }
        }

        let final_state =
            DensityState::from_matrix_unchecked(self.space.clone(), y.to_ndarray());
        let ev = final_state.min_eigenvalue()?;
        if ev < report.min_eigenvalue {
            report.min_eigenvalue = ev;
        }
        Ok(CoolingTrajectory {
            times,
            nbar: nbars,
            populations: pops,
            scatter_rate: rates,
            final_state,
            conservation: report,
        })
    }
}

/// Mean occupation of the motional factor (the last tensor factor; for a
/// single-factor space the whole space is treated as the oscillator).
pub fn nbar(rho: &DensityState) -> f64 {
    let el_dim = if rho.space().factors().len() >= 2 {
        rho.space().factor(0)
    } else {
        1
    };
    CMat::from_ndarray(rho.matrix()).nbar(el_dim)
}

/// Controls for the steady-state solver.
#[derive(Clone, Debug)]
pub struct SteadyStateOptions {
    /// Use the direct vectorized solve when total_dim ≤ this.
    pub dense_dim_limit: usize,
    /// Residual bound: ‖L[ρ]‖_F ≤ residual_tol · ‖L‖_F · ‖ρ‖_F.
    pub residual_tol: f64,
    /// Agreement bound between the two independently pinned solves; a
    /// larger discrepancy means the stationary state is not unique. A true
    /// second stationary state shows up as an O(1) disagreement; weak
    /// relaxation (a tiny but nonzero Liouvillian gap) amplifies roundoff
    /// into the 1e-5…1e-3 range, which is why the default is not tighter.
    pub uniqueness_tol: f64,
    /// Relaxation horizon (s) for the long-time fallback on large spaces.
    pub evolve_t_max: f64,
    /// Fallback convergence: max |dρ/dt| element ≤ this × the largest
    /// jump rate.
    pub evolve_rel_tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            dense_dim_limit: 64,
            residual_tol: 1e-10,
            uniqueness_tol: 0.05,
            evolve_t_max: 0.05,
            evolve_rel_tol: 1e-9,
        }
    }
}

impl Liouvillian {
    pub fn steady_state(&self) -> Result<DensityState> {
        self.steady_state_with(&SteadyStateOptions::default())
    }

    pub fn steady_state_with(&self, opts: &SteadyStateOptions) -> Result<DensityState> {
        if self.space.total_dim() <= opts.dense_dim_limit {
            self.steady_state_dense(opts)
        } else {
            self.steady_state_relax(opts)
        }
    }

    /// Dense vectorized solve: vec(L[ρ]) = M vec(ρ) with one row replaced
    /// by the trace constraint. Solved twice with different pinned rows to
    /// expose non-uniqueness.
    fn steady_state_dense(&self, opts: &SteadyStateOptions) -> Result<DensityState> {
        use ndarray_linalg::Solve;
        let d = self.space.total_dim();
        let n2 = d * d;
        let h = self.hamiltonian.matrix();
        let mut m = Array2::<C64>::zeros((n2, n2));
        // row-major vec: (AρB)_vec = (A ⊗ Bᵀ) vec(ρ)
        let kron_add = |m: &mut Array2<C64>, a: &Array2<C64>, b: &Array2<C64>, s: C64| {
            for ((i, j), av) in a.indexed_iter() {
                if av.norm() == 0.0 {
                    continue;
                }
                for ((p, q), bv) in b.indexed_iter() {
                    if bv.norm() == 0.0 {
                        continue;
                    }
                    m[[i * d + p, j * d + q]] += s * av * bv;
                }
            }
        };
        let eye = Array2::<C64>::eye(d);
        let minus_i = C64::new(0.0, -1.0);
        kron_add(&mut m, h, &eye, minus_i);
        kron_add(&mut m, &eye, &h.t().to_owned(), -minus_i);
        let one = C64::new(1.0, 0.0);
        for (c, rate) in &self.jumps {
            let cm = c.matrix().mapv(|v| v * rate.sqrt());
            let cconj = cm.mapv(|v| v.conj());
            let cdag = cm.t().mapv(|v: C64| v.conj());
            let cdc = cdag.dot(&cm);
            kron_add(&mut m, &cm, &cconj, one);
            kron_add(&mut m, &cdc, &eye, C64::new(-0.5, 0.0));
            kron_add(&mut m, &eye, &cdc.t().to_owned(), C64::new(-0.5, 0.0));
        }
        let m_fro = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

        let solve_pinned = |pin_row: usize| -> Result<Array1<C64>> {
            let mut mp = m.clone();
            for j in 0..n2 {
                mp[[pin_row, j]] = C64::new(0.0, 0.0);
            }
            // scale the trace row to the generator's magnitude so the pin
            // does not wreck the conditioning
            let scale = C64::new(m_fro / (n2 as f64).sqrt() + 1.0, 0.0);
            for i in 0..d {
                mp[[pin_row, i * d + i]] = scale;
            }
            let mut rhs = Array1::<C64>::zeros(n2);
            rhs[pin_row] = scale;
            mp.solve_into(rhs).map_err(|e| {
                // a singular pinned system means the kernel of the generator
                // has dimension > 1, i.e. the stationary state is not unique
                let msg = format!("{e}");
                if msg.contains("return_code") {
                    Error::DegenerateSteadyState(format!(
                        "pinned steady-state system is singular ({msg}); \
                         the stationary state is not unique"
                    ))
                } else {
                    Error::Linalg(format!("steady-state solve failed: {msg}"))
                }
            })
        };

        let x1 = solve_pinned(0)?;
        let x2 = solve_pinned(n2 - 1)?;
        let diff = x1
            .iter()
            .zip(x2.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        if diff > opts.uniqueness_tol {
            return Err(Error::DegenerateSteadyState(format!(
                "independent pinned solves disagree by {diff:.3e}; \
                 the stationary state is not unique"
            )));
        }
        let mut rho = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho[[i, j]] = x1[i * d + j];
            }
        }
        let mut state = DensityState::from_matrix_unchecked(self.space.clone(), rho);
        state.enforce_invariants();
        let resid = self.apply(state.matrix())?;
        let resid_norm = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rho_norm = state
            .matrix()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid_norm > opts.residual_tol * m_fro * rho_norm {
            return Err(Error::DegenerateSteadyState(format!(
                "stationary-state residual {resid_norm:.3e} exceeds \
                 {:.3e} (generator norm {m_fro:.3e})",
                opts.residual_tol * m_fro * rho_norm
            )));
        }
        Ok(state)
    }

    /// Long-time relaxation fallback for spaces too large for the dense
    /// solve. Converges to the stationary state when it is unique and the
    /// relaxation rates fit within the horizon.
    fn steady_state_relax(&self, opts: &SteadyStateOptions) -> Result<DensityState> {
        let el_dim = self.space.factor(0);
        let d = self.space.total_dim();
        let fock = d / el_dim;
        let mut state = if fock > 1 {
            let el = DensityState::from_matrix_unchecked(
                HilbertSpace::single(el_dim),
                Array2::<C64>::eye(el_dim).mapv(|v| v / el_dim as f64),
            );
            let th = DensityState::thermal(0.5, fock)?;
            DensityState::product(&el, &th)?
        } else {
            DensityState::from_matrix_unchecked(
                self.space.clone(),
                Array2::<C64>::eye(d).mapv(|v| v / d as f64),
            )
        };
        let rate_scale = self
            .jumps
            .iter()
            .map(|(_, r)| *r)
            .fold(0.0f64, f64::max)
            .max(1.0);
        let chunks = 25usize;
        let chunk_t = opts.evolve_t_max / chunks as f64;
        let eopts = EvolveOptions {
            eigencheck_stride: 0,
            ..EvolveOptions::default()
        };
        let mut deriv_max = f64::INFINITY;
        for _ in 0..chunks {
            let traj = self.evolve(&state, chunk_t, chunk_t, &eopts)?;
            state = traj.final_state;
            let deriv = self.apply(state.matrix())?;
            deriv_max = deriv.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            if deriv_max <= opts.evolve_rel_tol * rate_scale {
                state.enforce_invariants();
                return Ok(state);
            }
        }
        Err(Error::Integration(format!(
            "relaxation did not reach stationarity within {:.3e} s \
             (max |dρ/dt| = {deriv_max:.3e}, target {:.3e})",
            opts.evolve_t_max,
            opts.evolve_rel_tol * rate_scale
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{build_sublevels, GFactors, Polarization, TransitionClass};
    use crate::constants::TWO_PI;
    use crate::motion::ModeLabel;
    use approx::assert_relative_eq;

    fn basis(space: HilbertSpace, idx: usize) -> DensityState {
        let mut psi = Array1::<C64>::zeros(space.total_dim());
        psi[idx] = C64::new(1.0, 0.0);
        DensityState::pure(space, &psi).unwrap()
    }

    fn two_level_decay(gamma: f64) -> Liouvillian {
        let space = HilbertSpace::single(2);
        let h = LinearOperator::zero(space.clone());
        let mut c = Array2::<C64>::zeros((2, 2));
        c[[0, 1]] = C64::new(1.0, 0.0);
        let cop = LinearOperator::from_matrix(space.clone(), c).unwrap();
        Liouvillian::new(space, h, vec![(cop, gamma)], vec![0.0, gamma]).unwrap()
    }

    #[test]
    fn spontaneous_decay_is_exponential() {
        let gamma = TWO_PI * 20.7e6;
        let lv = two_level_decay(gamma);
        let excited = basis(HilbertSpace::single(2), 1);
        let t = 1.0 / gamma;
        let traj = lv
            .evolve(&excited, t, t, &EvolveOptions::default())
            .unwrap();
        let p_e = traj.populations.last().unwrap()[1];
        assert_relative_eq!(p_e, (-1.0f64).exp(), max_relative = 1e-6);
        assert!(traj.conservation.max_trace_deviation < 1e-7);
        assert!(traj.conservation.min_eigenvalue > -1e-8);
    }

    #[test]
    fn generator_is_trace_free() {
        let gamma = 1.0e7;
        let lv = two_level_decay(gamma);
        // deterministic pseudo-random valid state
        let raw = Array2::from_shape_fn((2, 2), |(i, j)| {
            let s = ((i * 7 + j * 13 + 3) as f64).sin();
            C64::new(0.3 + 0.1 * s, 0.05 * ((i + 2 * j) as f64).cos())
        });
        let dag = raw.t().mapv(|z: C64| z.conj());
        let mut rho = raw.dot(&dag);
        let tr: C64 = (0..2).map(|i| rho[[i, i]]).sum();
        rho.mapv_inplace(|z| z / tr);
        let deriv = lv.apply(&rho).unwrap();
        let trace: C64 = (0..2).map(|i| deriv[[i, i]]).sum();
        assert!(trace.norm() < 1e-10 * gamma);
    }

    #[test]
    fn rhs_is_linear() {
        let lv = two_level_decay(5.0e6);
        let rho = Array2::from_shape_fn((2, 2), |(i, j)| {
            C64::new(0.25 + (i as f64) * 0.1, (j as f64 - i as f64) * 0.02)
        });
        let d1 = lv.apply(&rho).unwrap();
        let d2 = lv.apply(&rho.mapv(|z| z * 2.0)).unwrap();
        let diff = (&d2 - &d1.mapv(|z| z * 2.0))
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-6);
    }

    #[test]
    fn hamiltonian_eigenstate_is_stationary() {
        let space = HilbertSpace::single(3);
        let mut h = Array2::<C64>::zeros((3, 3));
        for i in 0..3 {
            h[[i, i]] = C64::new(1.0e6 * i as f64, 0.0);
        }
        let lv = Liouvillian::new(
            space.clone(),
            LinearOperator::from_matrix(space.clone(), h).unwrap(),
            vec![],
            vec![0.0; 3],
        )
        .unwrap();
        let e1 = basis(space, 1);
        let traj = lv
            .evolve(&e1, 1e-5, 1e-5, &EvolveOptions::default())
            .unwrap();
        assert!(
            traj.final_state.max_abs_diff(&e1) < 1e-8,
            "eigenstate moved"
        );
    }

    #[test]
    fn thermal_state_is_fixed_point_of_thermal_bath() {
        let dim = 20;
        let nbar_bath = 0.2;
        let gamma = 1.0e5;
        let space = HilbertSpace::single(dim);
        let a = operator::destroy(dim).unwrap();
        let adag = a.dagger();
        let lv = Liouvillian::new(
            space,
            LinearOperator::zero(HilbertSpace::single(dim)),
            vec![
                (a, gamma * (nbar_bath + 1.0)),
                (adag, gamma * nbar_bath),
            ],
            vec![0.0; dim],
        )
        .unwrap();
        let th = DensityState::thermal(nbar_bath, dim).unwrap();
        let deriv = lv.apply(th.matrix()).unwrap();
        let max = deriv.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        assert!(max < 1e-8 * gamma, "thermal state drifts: {max:.3e}");
        // and the dense solver recovers it
        let ss = lv.steady_state().unwrap();
        assert!(ss.max_abs_diff(&th) < 1e-6);
        assert_relative_eq!(nbar(&ss), nbar_bath, max_relative = 1e-4);
    }

    #[test]
    fn degenerate_stationary_state_is_reported() {
        // two decoupled decay ladders -> every mixture of the two ground
        // states is stationary
        let space = HilbertSpace::single(4);
        let h = LinearOperator::zero(space.clone());
        let mut c1 = Array2::<C64>::zeros((4, 4));
        c1[[0, 1]] = C64::new(1.0, 0.0);
        let mut c2 = Array2::<C64>::zeros((4, 4));
        c2[[2, 3]] = C64::new(1.0, 0.0);
        let lv = Liouvillian::new(
            space.clone(),
            h,
            vec![
                (LinearOperator::from_matrix(space.clone(), c1).unwrap(), 1e6),
                (LinearOperator::from_matrix(space, c2).unwrap(), 1e6),
            ],
            vec![0.0; 4],
        )
        .unwrap();
        match lv.steady_state() {
            Err(Error::DegenerateSteadyState(_)) | Err(Error::Linalg(_)) => {}
            other => panic!(
                "expected degeneracy report, got {:?}",
                other.map(|s| s.matrix().clone())
            ),
        }
    }

    fn ion_config(fock_dim: usize, ld_order: u8) -> SystemConfig {
        let gamma = TWO_PI * 20.7e6;
        let delta = 3.4 * gamma;
        let sublevels = build_sublevels(416e-6, &GFactors::default()).unwrap();
        let beams = vec![
            Beam {
                name: "probe-pi".into(),
                class: TransitionClass::Sp397,
                polarization: Polarization::Pi,
                detuning: delta,
                rabi: TWO_PI * 3.0e6,
                direction: [0.0, 0.0, 1.0],
                probe: true,
            },
            Beam {
                name: "pump-sigma".into(),
                class: TransitionClass::Sp397,
                polarization: Polarization::SigmaPlus,
                detuning: delta,
                rabi: TWO_PI * 40.0e6,
                direction: [1.0, 0.0, 0.0],
                probe: false,
            },
            Beam {
                name: "pump-866".into(),
                class: TransitionClass::Dp866,
                polarization: Polarization::SigmaBoth,
                detuning: delta,
                rabi: TWO_PI * 30.0e6,
                direction: [0.0, 0.0, -1.0],
                probe: false,
            },
        ];
        let mode = MotionalMode {
            label: ModeLabel::Axial,
            frequency: TWO_PI * 904.6e3,
            axis: [0.0, 0.0, 1.0],
            fock_dim,
            mass: crate::constants::CA40_MASS_AMU * crate::constants::AMU,
        };
        let etas = vec![0.19, 0.0, -0.086];
        SystemConfig {
            sublevels,
            beams,
            gamma_total: gamma,
            branching_sd: 0.064,
            mode,
            etas,
            ld_order,
            alpha_recoil: 0.4,
        }
    }

    #[test]
    fn frame_offsets_vanish_on_two_photon_resonance() {
        let cfg = ion_config(1, 0);
        let delta = rotating_frame(&cfg.sublevels, &cfg.beams).unwrap();
        // the dressed ground sublevels share one frame energy when every
        // beam carries the same detuning from its own resonance
        assert!(delta[atom::IDX_S_MINUS].abs() < 1e-6);
        // both P offsets sit near -Δ, displaced only by Zeeman terms
        let big = 3.4 * TWO_PI * 20.7e6;
        assert!((delta[atom::IDX_P_MINUS] + big).abs() < TWO_PI * 10e6);
        assert!((delta[atom::IDX_P_PLUS] + big).abs() < TWO_PI * 10e6);
    }

    #[test]
    fn inconsistent_beam_loop_is_rejected() {
        let mut cfg = ion_config(1, 0);
        // a second pi beam at a different detuning revisits the same pair
        let mut extra = cfg.beams[0].clone();
        extra.name = "probe-duplicate".into();
        extra.detuning += TWO_PI * 1.0e6;
        cfg.beams.push(extra);
        cfg.etas.push(0.0);
        assert!(rotating_frame(&cfg.sublevels, &cfg.beams).is_err());
    }

    #[test]
    fn order_zero_coupling_free_mode_keeps_nbar() {
        let mut cfg = ion_config(4, 0);
        for e in cfg.etas.iter_mut() {
            *e = 0.0;
        }
        let lv = Liouvillian::build(&cfg).unwrap();
        let el = basis(HilbertSpace::single(8), 0);
        let th = DensityState::thermal(0.5, 4).unwrap();
        let rho0 = DensityState::product(&el, &th).unwrap();
        let n0 = nbar(&rho0);
        let traj = lv
            .evolve(&rho0, 2e-6, 1e-6, &EvolveOptions::default())
            .unwrap();
        let nf = traj.nbar.last().unwrap();
        assert!((nf - n0).abs() < 1e-9, "nbar moved: {n0} -> {nf}");
    }

    #[test]
    fn repumper_off_with_closed_upper_level_matches_pure_lambda() {
        // with no branching to the metastable manifold and the repumper
        // dark, the 866 beam is irrelevant: trajectories must agree
        let mut with_dead_repump = ion_config(3, 2);
        with_dead_repump.branching_sd = 0.0;
        with_dead_repump.beams[2].rabi = 0.0;
        let mut without = with_dead_repump.clone();
        without.beams.truncate(2);
        without.etas.truncate(2);

        let la = Liouvillian::build(&with_dead_repump).unwrap();
        let lb = Liouvillian::build(&without).unwrap();
        let el = basis(HilbertSpace::single(8), 0);
        let th = DensityState::thermal(0.3, 3).unwrap();
        let rho0 = DensityState::product(&el, &th).unwrap();
        let opts = EvolveOptions::default();
        let ta = la.evolve(&rho0, 1e-6, 1e-6, &opts).unwrap();
        let tb = lb.evolve(&rho0, 1e-6, 1e-6, &opts).unwrap();
        let diff = ta.final_state.max_abs_diff(&tb.final_state);
        assert!(diff < 1e-6, "trajectories diverge by {diff:.3e}");
    }

    #[test]
    fn short_time_dynamics_converge_in_fock_dimension() {
        let l5 = Liouvillian::build(&ion_config(6, 2)).unwrap();
        let l7 = Liouvillian::build(&ion_config(8, 2)).unwrap();
        let el = basis(HilbertSpace::single(8), 0);
        let opts = EvolveOptions {
            eigencheck_stride: 0,
            ..EvolveOptions::default()
        };
        let r5 = DensityState::product(&el, &DensityState::thermal(0.1, 6).unwrap())
            .unwrap();
        let r7 = DensityState::product(&el, &DensityState::thermal(0.1, 8).unwrap())
            .unwrap();
        let t5 = l5.evolve(&r5, 2e-6, 2e-6, &opts).unwrap();
        let t7 = l7.evolve(&r7, 2e-6, 2e-6, &opts).unwrap();
        let d = (t5.nbar.last().unwrap() - t7.nbar.last().unwrap()).abs();
        assert!(d < 5e-4, "truncation error too large: {d:.3e}");
    }

    #[test]
    fn scattering_rate_tracks_upper_population() {
        let gamma = TWO_PI * 20.7e6;
        let lv = two_level_decay(gamma);
        let excited = basis(HilbertSpace::single(2), 1);
        assert_relative_eq!(
            lv.scattering_rate(&excited),
            gamma,
            max_relative = 1e-12
        );
    }
}
