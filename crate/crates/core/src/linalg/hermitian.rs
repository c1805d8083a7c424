use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Entrywise tolerance on `A[i][j] - conj(A[j][i])` accepted at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues below this fraction of the largest one are treated as kernel.
pub const KERNEL_CUTOFF: f64 = 1e-14;

/// Tolerance on negative eigenvalues when a PSD input is required.
pub const PSD_TOL: f64 = 1e-10;

/// Complex Hermitian operator on a finite-dimensional space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseMatrix", into = "DenseMatrix")]
pub struct HermitianMatrix {
    m: CMatrix,
}

/// Spectral decomposition `A = V diag(values) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// Rebuilds `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        HermitianMatrix::from_raw(&scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.reconstruct_with(|v| v)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

fn max_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = m[(i, j)] - m[(j, i)].conj();
            dev = dev.max(d.norm());
        }
    }
    dev
}

impl HermitianMatrix {
    /// Validates squareness and Hermiticity, then symmetrizes away round-off.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let dev = max_hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::from_raw(m))
    }

    /// Takes the Hermitian part without validation. Callers guarantee the
    /// input is Hermitian up to round-off.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let adj = m.adjoint();
        Self {
            m: (m + adj).scale(0.5),
        }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self {
            m: CMatrix::from_diagonal(&v),
        }
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` (not normalized).
    pub fn outer(psi: &DVector<Complex64>) -> Self {
        Self::from_raw(psi * psi.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Real Hilbert–Schmidt inner product `tr(A B)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim());
        // tr(AB) = Σ_ij A_ij B_ji = Σ_ij A_ij conj(B_ij)
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: self.m.scale(c) }
    }

    pub fn eigh(&self) -> Eigh {
        eigh(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(self).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigh(self).min()
    }

    pub fn trace_norm(&self) -> f64 {
        eigh(self).values.iter().map(|v| v.abs()).sum()
    }

    /// `X A X†` for a (possibly rectangular) matrix `X`.
    pub fn conjugate_by(&self, x: &CMatrix) -> HermitianMatrix {
        assert_eq!(x.ncols(), self.dim());
        HermitianMatrix::from_raw(x * &self.m * x.adjoint())
    }
}

impl TryFrom<DenseMatrix> for HermitianMatrix {
    type Error = Error;

    fn try_from(d: DenseMatrix) -> Result<Self> {
        Self::new(d.to_complex()?)
    }
}

impl From<HermitianMatrix> for DenseMatrix {
    fn from(h: HermitianMatrix) -> Self {
        DenseMatrix::from_complex(&h.m)
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { m: -&self.m }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, c: f64) -> HermitianMatrix {
        self.scale(c)
    }
}

/// Eigendecomposition with eigenvalues sorted ascending.
pub fn eigh(a: &HermitianMatrix) -> Eigh {
    let n = a.dim();
    if n == 1 {
        return Eigh {
            values: vec![a.m[(0, 0)].re],
            vectors: CMatrix::identity(1, 1),
        };
    }
    let se = nalgebra::SymmetricEigen::new(a.m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    Eigh { values, vectors }
}

/// Sum of the positive eigenvalues, `tr(A⁺)`.
pub fn trace_plus(a: &HermitianMatrix) -> f64 {
    eigh(a).values.iter().map(|&v| v.max(0.0)).sum()
}

/// Positive part `A⁺` of the orthogonal decomposition `A = A⁺ − A⁻`.
pub fn positive_part(a: &HermitianMatrix) -> HermitianMatrix {
    eigh(a).reconstruct_with(|v| v.max(0.0))
}

/// Matrix logarithm applied on the support; kernel directions map to zero.
pub fn matrix_log_on_support(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = eigh(a);
    let min = e.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    let cutoff = KERNEL_CUTOFF * e.max().max(0.0);
    Ok(e.reconstruct_with(|v| if v > cutoff { v.ln() } else { 0.0 }))
}

/// Matrix exponential of a Hermitian matrix.
pub fn matrix_exp(a: &HermitianMatrix) -> HermitianMatrix {
    eigh(a).reconstruct_with(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_hermitian, random_psd, rng_from_seed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_diagonal_sorted() {
        let a = HermitianMatrix::from_diagonal(&[3.0, 1.0]);
        let e = eigh(&a);
        assert_eq!(e.values, vec![1.0, 3.0]);
        // permutation of identity
        for i in 0..2 {
            let col_norm: f64 = (0..2).map(|r| e.vectors[(r, i)].norm()).fold(0.0, f64::max);
            assert!((col_norm - 1.0).abs() < 1e-15);
        }
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigh_pauli_x() {
        let x = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let e = eigh(&x);
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_random() {
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let a = random_hermitian(6, &mut rng);
            let e = eigh(&a);
            let diff = (&e.reconstruct() - &a).frobenius_norm();
            assert!(diff < 1e-9, "residual {diff}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let vv = e.vectors.adjoint() * &e.vectors;
            assert!((vv - CMatrix::identity(6, 6)).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian(_))));
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotSquare(2, 3))));
    }

    #[test]
    fn trace_plus_examples() {
        assert_eq!(trace_plus(&HermitianMatrix::from_diagonal(&[1.0, -2.0])), 1.0);
        assert_eq!(trace_plus(&HermitianMatrix::zeros(3)), 0.0);
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let a = random_hermitian(5, &mut rng);
            // independent route: ½(‖A‖₁ + tr A)
            let expected = 0.5 * (a.trace_norm() + a.trace());
            assert!((trace_plus(&a) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn positive_part_examples() {
        let p = positive_part(&HermitianMatrix::from_diagonal(&[1.0, -2.0]));
        assert!((&p - &HermitianMatrix::from_diagonal(&[1.0, 0.0])).frobenius_norm() < 1e-15);

        let mut rng = rng_from_seed(3);
        let psd = random_psd(4, &mut rng);
        assert!((&positive_part(&psd) - &psd).frobenius_norm() < 1e-12);

        for _ in 0..50 {
            let a = random_hermitian(5, &mut rng);
            let ap = positive_part(&a);
            assert!((ap.trace() - trace_plus(&a)).abs() < 1e-10);
            assert!(ap.min_eigenvalue() > -1e-10);
            let am = &ap - &a;
            assert!(am.min_eigenvalue() > -1e-10);
            let prod = ap.as_matrix() * am.as_matrix();
            assert!(prod.norm() < 1e-8);
        }
    }

    #[test]
    fn log_examples() {
        let l = matrix_log_on_support(&HermitianMatrix::identity(3)).unwrap();
        assert!(l.frobenius_norm() < 1e-15);
        let l = matrix_log_on_support(&HermitianMatrix::from_diagonal(&[std::f64::consts::E, 1.0])).unwrap();
        assert!((&l - &HermitianMatrix::from_diagonal(&[1.0, 0.0])).frobenius_norm() < 1e-14);
        assert!(matches!(
            matrix_log_on_support(&HermitianMatrix::from_diagonal(&[1.0, -1e-6])),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn log_round_trip_on_support() {
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let a = random_psd(4, &mut rng);
            let back = matrix_exp(&matrix_log_on_support(&a).unwrap());
            assert!((&back - &a).frobenius_norm() < 1e-8);
        }
        // rank-deficient: kernel maps to 0, exp(0)=1 on kernel, so compare on support
        let a = HermitianMatrix::from_diagonal(&[0.5, 0.0]);
        let l = matrix_log_on_support(&a).unwrap();
        assert!((l.as_matrix()[(0, 0)].re - 0.5f64.ln()).abs() < 1e-14);
        assert_eq!(l.as_matrix()[(1, 1)].re, 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = rng_from_seed(1);
        let a = random_hermitian(3, &mut rng);
        let s = serde_json::to_string(&a).unwrap();
        let b: HermitianMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
