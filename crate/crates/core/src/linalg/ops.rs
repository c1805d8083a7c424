//! Bipartite operations: tensor products, partial traces, partial transposes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hermitian::{CMatrix, HermitianMatrix};
use crate::error::{Error, Result};

/// One factor of a bipartite space `H_A ⊗ H_B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

fn check_dims(n: usize, dims: (usize, usize)) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.0 * dims.1 != n {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {n} does not factor as {}x{}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix::from_raw(kron(a.as_matrix(), b.as_matrix()))
}

pub(crate) fn partial_trace_c(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> CMatrix {
    let (da, db) = dims;
    match keep {
        Subsystem::A => CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| m[(i * db + k, j * db + k)]).sum::<Complex64>()
        }),
        Subsystem::B => CMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| m[(k * db + i, k * db + j)]).sum::<Complex64>()
        }),
    }
}

/// Traces out the subsystem not named by `keep`.
pub fn partial_trace(a: &HermitianMatrix, dims: (usize, usize), keep: Subsystem) -> Result<HermitianMatrix> {
    check_dims(a.dim(), dims)?;
    Ok(HermitianMatrix::from_raw(partial_trace_c(a.as_matrix(), dims, keep)))
}

pub(crate) fn partial_transpose_c(m: &CMatrix, dims: (usize, usize), sys: Subsystem) -> CMatrix {
    let (da, db) = dims;
    let n = da * db;
    CMatrix::from_fn(n, n, |r, c| {
        let (i, k) = (r / db, r % db);
        let (j, l) = (c / db, c % db);
        match sys {
            Subsystem::A => m[(j * db + k, i * db + l)],
            Subsystem::B => m[(i * db + l, j * db + k)],
        }
    })
}

/// Transposes the named factor in the computational basis.
pub fn partial_transpose(a: &HermitianMatrix, dims: (usize, usize), sys: Subsystem) -> Result<HermitianMatrix> {
    check_dims(a.dim(), dims)?;
    Ok(HermitianMatrix::from_raw(partial_transpose_c(a.as_matrix(), dims, sys)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_density, random_hermitian, rng_from_seed};
    use crate::linalg::DensityMatrix;
    use nalgebra::DVector;

    fn bell(d: usize) -> HermitianMatrix {
        let mut v = DVector::from_element(d * d, Complex64::new(0.0, 0.0));
        for i in 0..d {
            v[i * d + i] = Complex64::new(1.0, 0.0);
        }
        DensityMatrix::pure(&v).unwrap().into_hermitian()
    }

    #[test]
    fn tensor_examples() {
        let i2 = HermitianMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), HermitianMatrix::identity(4));
        let t = tensor(
            &HermitianMatrix::from_diagonal(&[1.0, 0.0]),
            &HermitianMatrix::from_diagonal(&[0.0, 1.0]),
        );
        assert_eq!(t, HermitianMatrix::from_diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_spectrum_is_pairwise_products() {
        let mut rng = rng_from_seed(21);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(2, &mut rng);
        let mut expected: Vec<f64> = a
            .eigenvalues()
            .iter()
            .flat_map(|x| b.eigenvalues().into_iter().map(move |y| x * y))
            .collect();
        expected.sort_by(f64::total_cmp);
        let got = tensor(&a, &b).eigenvalues();
        for (x, y) in got.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((tensor(&a, &b).trace() - a.trace() * b.trace()).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let zero = HermitianMatrix::from_diagonal(&[1.0, 0.0]);
        let x = tensor(&zero, &HermitianMatrix::identity(2).scale(0.5));
        let pa = partial_trace(&x, (2, 2), Subsystem::A).unwrap();
        assert!((&pa - &zero).frobenius_norm() < 1e-15);

        for d in 2..5 {
            let w = bell(d);
            for keep in [Subsystem::A, Subsystem::B] {
                let m = partial_trace(&w, (d, d), keep).unwrap();
                let expected = HermitianMatrix::identity(d).scale(1.0 / d as f64);
                assert!((&m - &expected).frobenius_norm() < 1e-14);
            }
        }

        let mut rng = rng_from_seed(2);
        for _ in 0..10 {
            let r = random_density(6, &mut rng);
            for keep in [Subsystem::A, Subsystem::B] {
                let m = partial_trace(&r, (2, 3), keep).unwrap();
                assert!((m.trace() - 1.0).abs() < 1e-12);
            }
        }
        assert!(partial_trace(&HermitianMatrix::identity(5), (2, 2), Subsystem::A).is_err());
    }

    #[test]
    fn partial_trace_factors_products() {
        let mut rng = rng_from_seed(8);
        let x = random_hermitian(2, &mut rng);
        let y = random_hermitian(3, &mut rng);
        let xy = tensor(&x, &y);
        let a = partial_trace(&xy, (2, 3), Subsystem::A).unwrap();
        assert!((&a - &x.scale(y.trace())).frobenius_norm() < 1e-12);
        let b = partial_trace(&xy, (2, 3), Subsystem::B).unwrap();
        assert!((&b - &y.scale(x.trace())).frobenius_norm() < 1e-12);
    }

    #[test]
    fn partial_transpose_examples() {
        let w = bell(2);
        let pt = partial_transpose(&w, (2, 2), Subsystem::B).unwrap();
        assert!((pt.min_eigenvalue() + 0.5).abs() < 1e-12);

        let mut rng = rng_from_seed(4);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = tensor(&a, &b);
        let pt = partial_transpose(&ab, (2, 3), Subsystem::B).unwrap();
        let bt = HermitianMatrix::new(b.as_matrix().transpose()).unwrap();
        assert!((&pt - &tensor(&a, &bt)).frobenius_norm() < 1e-14);
        let (s1, s2) = (pt.eigenvalues(), ab.eigenvalues());
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-10);
        }

        for _ in 0..10 {
            let x = random_hermitian(6, &mut rng);
            for sys in [Subsystem::A, Subsystem::B] {
                let once = partial_transpose(&x, (3, 2), sys).unwrap();
                let twice = partial_transpose(&once, (3, 2), sys).unwrap();
                assert!((&twice - &x).frobenius_norm() < 1e-15);
                assert!((once.trace() - x.trace()).abs() < 1e-12);
            }
            // transposing both factors is the full transpose
            let both = partial_transpose(
                &partial_transpose(&x, (3, 2), Subsystem::A).unwrap(),
                (3, 2),
                Subsystem::B,
            )
            .unwrap();
            assert!((both.as_matrix() - x.as_matrix().transpose()).norm() < 1e-15);
        }
    }
}
