//! Internal dense/sparse complex kernels for the evolution hot path.
//!
//! Real and imaginary parts are stored as separate f64 slabs so the
//! per-step products auto-vectorize. Everything here is crate-private;
//! the public API speaks `ndarray` + `Complex64`.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Dense row-major n×n complex matrix, split storage.
#[derive(Clone, Debug)]
pub(crate) struct CMat {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, re: vec![0.0; n * n], im: vec![0.0; n * n] }
    }

    pub fn from_ndarray(a: &Array2<C64>) -> Self {
        let n = a.nrows();
        let mut m = Self::zeros(n);
        for (idx, z) in a.iter().enumerate() {
            m.re[idx] = z.re;
            m.im[idx] = z.im;
        }
        m
    }

    pub fn to_ndarray(&self) -> Array2<C64> {
        let n = self.n;
        Array2::from_shape_fn((n, n), |(i, j)| {
            C64::new(self.re[i * n + j], self.im[i * n + j])
        })
    }

    pub fn fill_zero(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }

    pub fn trace_re(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| self.re[i * n + i]).sum()
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.re.iter_mut().zip(other.re.iter()) {
            *a += s * b;
        }
        for (a, b) in self.im.iter_mut().zip(other.im.iter()) {
            *a += s * b;
        }
    }

    pub fn copy_from(&mut self, other: &Self) {
        self.re.copy_from_slice(&other.re);
        self.im.copy_from_slice(&other.im);
    }

    /// Max elementwise |self_ij − other_ij|.
    #[cfg(test)]
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut max = 0.0f64;
        for k in 0..self.re.len() {
            let dr = self.re[k] - other.re[k];
            let di = self.im[k] - other.im[k];
            let d = (dr * dr + di * di).sqrt();
            if d > max {
                max = d;
            }
        }
        max
    }

    /// Max |A_ij − conj(A_ji)|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.n;
        let mut max = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let dr = self.re[i * n + j] - self.re[j * n + i];
                let di = self.im[i * n + j] + self.im[j * n + i];
                let d = (dr * dr + di * di).sqrt();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }

    /// A ← (A + A†)/2, then divide by the (real) trace. Returns |tr − 1|
    /// before renormalization.
    pub fn symmetrize_renormalize(&mut self) -> f64 {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ij, ji) = (i * n + j, j * n + i);
                let hr = 0.5 * (self.re[ij] + self.re[ji]);
                let hi = 0.5 * (self.im[ij] - self.im[ji]);
                self.re[ij] = hr;
                self.im[ij] = hi;
                self.re[ji] = hr;
                self.im[ji] = -hi;
            }
            self.im[i * n + i] = 0.0;
        }
        let tr = self.trace_re();
        let dev = (tr - 1.0).abs();
        if tr != 0.0 {
            let s = 1.0 / tr;
            self.re.iter_mut().for_each(|x| *x *= s);
            self.im.iter_mut().for_each(|x| *x *= s);
        }
        dev
    }

    /// Electronic populations: partial trace over the second factor of an
    /// (el ⊗ fock) composite.
    pub fn factor0_populations(&self, el_dim: usize) -> Vec<f64> {
        let n = self.n;
        let fock = n / el_dim;
        let mut pops = vec![0.0; el_dim];
        for e in 0..el_dim {
            for k in 0..fock {
                let idx = e * fock + k;
                pops[e] += self.re[idx * n + idx];
            }
        }
        pops
    }

    /// ⟨a†a⟩ of the second factor of an (el ⊗ fock) composite.
    pub fn nbar(&self, el_dim: usize) -> f64 {
        let n = self.n;
        let fock = n / el_dim;
        let mut acc = 0.0;
        for e in 0..el_dim {
            for k in 0..fock {
                let idx = e * fock + k;
                acc += k as f64 * self.re[idx * n + idx];
            }
        }
        acc
    }
}

/// CSR sparse complex matrix.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    pub n: usize,
    pub indptr: Vec<u32>,
    pub col: Vec<u32>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Csr {
    pub fn from_ndarray(a: &Array2<C64>, drop_tol: f64) -> Self {
        let n = a.nrows();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut re = Vec::new();
        let mut im = Vec::new();
        indptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let z = a[[i, j]];
                if z.norm() > drop_tol {
                    col.push(j as u32);
                    re.push(z.re);
                    im.push(z.im);
                }
            }
            indptr.push(col.len() as u32);
        }
        Self { n, indptr, col, re, im }
    }

    /// out = A · B (dense B), overwriting out.
    pub fn spmm(&self, b: &CMat, out: &mut CMat) {
        let n = self.n;
        debug_assert_eq!(b.n, n);
        out.fill_zero();
        for i in 0..n {
            let row_out_r = i * n;
            for idx in self.indptr[i] as usize..self.indptr[i + 1] as usize {
                let k = self.col[idx] as usize;
                let (ar, ai) = (self.re[idx], self.im[idx]);
                let row_b = k * n;
                let (br, bi) = (&b.re[row_b..row_b + n], &b.im[row_b..row_b + n]);
                let (or_, oi) = (
                    &mut out.re[row_out_r..row_out_r + n],
                    &mut out.im[row_out_r..row_out_r + n],
                );
                for j in 0..n {
                    or_[j] += ar * br[j] - ai * bi[j];
                    oi[j] += ar * bi[j] + ai * br[j];
                }
            }
        }
    }

    /// out += A ρ A† computed directly from the sparsity pattern: only the
    /// (nonempty-row × nonempty-row) block of the output is touched and no
    /// scratch matrix is needed, so a jump operator that moves population
    /// between two electronic levels costs O(nnz²) instead of O(nnz·n)
    /// plus two full-matrix sweeps.
    pub fn sandwich(&self, rho: &CMat, out: &mut CMat) {
        let n = self.n;
        for r in 0..n {
            let (a, b) =
                (self.indptr[r] as usize, self.indptr[r + 1] as usize);
            if a == b {
                continue;
            }
            for r2 in 0..n {
                let (a2, b2) =
                    (self.indptr[r2] as usize, self.indptr[r2 + 1] as usize);
                if a2 == b2 {
                    continue;
                }
                let (mut sr, mut si) = (0.0, 0.0);
                for idx in a..b {
                    let k = self.col[idx] as usize;
                    let (cr, ci) = (self.re[idx], self.im[idx]);
                    let row = k * n;
                    // t = Σ_{k'} ρ_{k k'} · conj(A_{r2 k'})
                    let (mut tr, mut ti) = (0.0, 0.0);
                    for idx2 in a2..b2 {
                        let k2 = self.col[idx2] as usize;
                        let (dr, di) = (self.re[idx2], -self.im[idx2]);
                        let (pr, pi) = (rho.re[row + k2], rho.im[row + k2]);
                        tr += pr * dr - pi * di;
                        ti += pr * di + pi * dr;
                    }
                    sr += cr * tr - ci * ti;
                    si += cr * ti + ci * tr;
                }
                out.re[r * n + r2] += sr;
                out.im[r * n + r2] += si;
            }
        }
    }

}
