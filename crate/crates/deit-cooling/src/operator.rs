//! Complex linear-operator algebra on finite composite Hilbert spaces.
//!
//! The composite spaces in this crate are always ordered (electronic,
//! motional); `embed` places a single-factor operator into the composite
//! space with identities on the remaining factors. Matrices are dense
//! `ndarray` arrays of `Complex64`; at the sizes involved (136×136 for the
//! full model) this is cheap. The evolution engine keeps its own sparse
//! copies internally.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Hermiticity tolerance for density matrices, max |ρ − ρ†| elementwise.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace-normalization tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative admissible eigenvalue of a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-8;

/// An ordered tensor product of finite-dimensional factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    factors: Vec<usize>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("empty factor list".into()));
        }
        if factors.iter().any(|&d| d < 1) {
            return Err(Error::InvalidArgument(format!(
                "factor dimensions must be >= 1, got {:?}",
                factors
            )));
        }
        let total_dim = factors.iter().product();
        Ok(Self { factors, total_dim })
    }

    /// The (electronic, motional) composite used throughout the simulation.
    pub fn composite(electronic: usize, motional: usize) -> Self {
        Self::new(vec![electronic, motional]).expect("positive dims")
    }

    /// Single-factor space.
    pub fn single(dim: usize) -> Self {
        Self::new(vec![dim]).expect("positive dim")
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn factor(&self, idx: usize) -> usize {
        self.factors[idx]
    }
}

/// A complex matrix acting on a [`HilbertSpace`].
#[derive(Clone, Debug)]
pub struct LinearOperator {
    space: HilbertSpace,
    mat: Array2<C64>,
}

impl LinearOperator {
    pub fn from_matrix(space: HilbertSpace, mat: Array2<C64>) -> Result<Self> {
        let d = space.total_dim();
        if mat.shape() != [d, d] {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix is {:?}, space has total_dim {}",
                mat.shape(),
                d
            )));
        }
        Ok(Self { space, mat })
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space, mat: Array2::eye(d) }
    }

    pub fn zero(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self { space, mat: Array2::zeros((d, d)) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), mat: self.mat.t().mapv(|z| z.conj()) }
    }

    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), mat: self.mat.dot(&other.mat) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), mat: &self.mat + &other.mat })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { space: self.space.clone(), mat: self.mat.mapv(|m| m * z) }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch(format!(
                "operators act on different spaces: {:?} vs {:?}",
                self.space.factors(),
                other.space.factors()
            )));
        }
        Ok(())
    }
}

/// Embed a single-factor operator into a composite space as
/// I ⊗ … ⊗ op ⊗ … ⊗ I with the factor order preserved.
pub fn embed(op: &LinearOperator, which_factor: usize, space: &HilbertSpace) -> Result<LinearOperator> {
    if which_factor >= space.factors().len() {
        return Err(Error::InvalidArgument(format!(
            "factor index {} out of range for {} factors",
            which_factor,
            space.factors().len()
        )));
    }
    let fdim = space.factor(which_factor);
    if op.space().total_dim() != fdim {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} does not match factor {} dim {}",
            op.space().total_dim(),
            which_factor,
            fdim
        )));
    }
    let mut mat = Array2::eye(1);
    for (i, &d) in space.factors().iter().enumerate() {
        if i == which_factor {
            mat = kron(&mat, op.matrix());
        } else {
            mat = kron(&mat, &Array2::eye(d));
        }
    }
    LinearOperator::from_matrix(space.clone(), mat)
}

/// Fock-space lowering operator: a[k−1, k] = √k.
pub fn destroy(n: usize) -> Result<LinearOperator> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "Fock dimension must be >= 2, got {}",
            n
        )));
    }
    let mut mat = Array2::zeros((n, n));
    for k in 1..n {
        mat[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    LinearOperator::from_matrix(HilbertSpace::single(n), mat)
}

/// Fock-space raising operator.
pub fn create(n: usize) -> Result<LinearOperator> {
    Ok(destroy(n)?.dagger())
}

/// Number operator a†a.
pub fn number(n: usize) -> Result<LinearOperator> {
    let a = destroy(n)?;
    a.dagger().dot(&a)
}

/// trace(op · ρ).
pub fn expect(op: &LinearOperator, rho: &DensityState) -> Result<C64> {
    if op.space() != rho.space() {
        return Err(Error::DimensionMismatch(format!(
            "operator on {:?} but state on {:?}",
            op.space().factors(),
            rho.space().factors()
        )));
    }
    // tr(A ρ) = Σ_ij A_ij ρ_ji
    let a = op.matrix();
    let r = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[[i, j]] * r[[j, i]];
        }
    }
    Ok(acc)
}

/// A density matrix on a composite space. Construction validates
/// Hermiticity, unit trace, and positivity within numerical tolerances.
#[derive(Clone, Debug)]
pub struct DensityState {
    space: HilbertSpace,
    mat: Array2<C64>,
}

impl DensityState {
    pub fn from_matrix(space: HilbertSpace, mat: Array2<C64>) -> Result<Self> {
        let d = space.total_dim();
        if mat.shape() != [d, d] {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {:?}, space has total_dim {}",
                mat.shape(),
                d
            )));
        }
        let state = Self { space, mat };
        state.validate()?;
        Ok(state)
    }

    /// Construct without the (eigenvalue-decomposition) validity checks.
    /// Used by the evolution engine, which enforces the invariants itself.
    pub(crate) fn from_matrix_unchecked(space: HilbertSpace, mat: Array2<C64>) -> Self {
        Self { space, mat }
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_deviation();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian: max |rho - rho^dag| = {:.3e}",
                herm
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {} not 1",
                tr
            )));
        }
        let emin = self.min_eigenvalue()?;
        if emin < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {:.3e} below tolerance",
                emin
            )));
        }
        Ok(())
    }

    /// ρ = |ψ⟩⟨ψ| from a normalized (or normalizable) vector.
    pub fn pure(space: HilbertSpace, psi: &Array1<C64>) -> Result<Self> {
        if psi.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "state vector length {} vs total_dim {}",
                psi.len(),
                space.total_dim()
            )));
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let d = psi.len();
        let mut mat = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Ok(Self { space, mat })
    }

    /// Fock state |n⟩⟨n| on a single-factor space.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidArgument(format!(
                "Fock index {} outside dimension {}",
                n, dim
            )));
        }
        let mut psi = Array1::zeros(dim);
        psi[n] = C64::new(1.0, 0.0);
        Self::pure(HilbertSpace::single(dim), &psi)
    }

    /// Thermal state of mean occupation n̄ truncated to `dim` Fock states and
    /// renormalized.
    pub fn thermal(nbar: f64, dim: usize) -> Result<Self> {
        if nbar < 0.0 {
            return Err(Error::InvalidArgument(format!("nbar = {} < 0", nbar)));
        }
        let mut weights = Array1::zeros(dim);
        if nbar == 0.0 {
            weights[0] = 1.0;
        } else {
            let q = nbar / (nbar + 1.0);
            let mut w = 1.0;
            for k in 0..dim {
                weights[k] = w;
                w *= q;
            }
        }
        let norm: f64 = weights.sum();
        let mut mat = Array2::zeros((dim, dim));
        for k in 0..dim {
            mat[[k, k]] = C64::new(weights[k] / norm, 0.0);
        }
        Ok(Self { space: HilbertSpace::single(dim), mat })
    }

    /// Product state ρ_a ⊗ ρ_b on the concatenated space.
    pub fn product(a: &Self, b: &Self) -> Result<Self> {
        let mut factors = a.space.factors().to_vec();
        factors.extend_from_slice(b.space.factors());
        let space = HilbertSpace::new(factors)?;
        let mat = kron(&a.mat, &b.mat);
        Ok(Self { space, mat })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().iter().sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.mat.nrows();
        let mut max = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let dev = (self.mat[[i, j]] - self.mat[[j, i]].conj()).norm();
                if dev > max {
                    max = dev;
                }
            }
        }
        max
    }

    /// Largest elementwise |ρ_ij − σ_ij|. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        // Symmetrize first so Eigh sees an exactly Hermitian input.
        let sym = self.symmetrized();
        let (evals, _) = sym
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Linalg(format!("eigh failed: {}", e)))?;
        Ok(evals.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    fn symmetrized(&self) -> Array2<C64> {
        let dag = self.mat.t().mapv(|z| z.conj());
        (&self.mat + &dag) * C64::new(0.5, 0.0)
    }

    /// ρ ← (ρ + ρ†)/2, then trace-renormalize. Returns the trace deviation
    /// |tr ρ − 1| that was removed.
    pub(crate) fn enforce_invariants(&mut self) -> f64 {
        self.mat = self.symmetrized();
        let tr: C64 = self.mat.diag().iter().sum();
        let dev = (tr.re - 1.0).abs();
        if tr.re != 0.0 {
            let scale = C64::new(1.0 / tr.re, 0.0);
            self.mat.mapv_inplace(|z| z * scale);
        }
        dev
    }

    /// Populations of the first (electronic) factor, traced over the rest.
    pub fn factor_populations(&self, which_factor: usize) -> Vec<f64> {
        let factors = self.space.factors();
        let fdim = factors[which_factor];
        let before: usize = factors[..which_factor].iter().product();
        let after: usize = factors[which_factor + 1..].iter().product();
        let mut pops = vec![0.0; fdim];
        for b in 0..before {
            for k in 0..fdim {
                for a in 0..after {
                    let idx = (b * fdim + k) * after + a;
                    pops[k] += self.mat[[idx, idx]].re;
                }
            }
        }
        pops
    }
}
