//! Seeded random matrices and states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::channel::KrausChannel;
use super::density::DensityMatrix;
use super::hermitian::{CMatrix, HermitianMatrix};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianMatrix {
    HermitianMatrix::from_raw(ginibre(dim, dim, rng))
}

/// `G G†` for a square Ginibre matrix; full rank almost surely.
pub fn random_psd(dim: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let g = ginibre(dim, dim, rng);
    HermitianMatrix::from_raw(&g * g.adjoint())
}

/// Density matrix of rank at most `rank` from the induced measure.
pub fn random_density_rank(dim: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let h = HermitianMatrix::from_raw(&g * g.adjoint());
    let tr = h.trace();
    DensityMatrix::from_raw(h.scale(1.0 / tr))
}

/// Full-rank density matrix (Hilbert–Schmidt measure).
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    random_density_rank(dim, dim, rng)
}

/// Orthonormalizes the columns of a tall Ginibre matrix.
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    assert!(rows >= cols);
    let qr = ginibre(rows, cols, rng).qr();
    let q = qr.q();
    let r = qr.r();
    // Fix column phases so the distribution is Haar.
    let mut q = q;
    for j in 0..cols {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            for i in 0..rows {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    random_isometry(dim, dim, rng)
}

/// Channel with `n_kraus` Kraus operators cut from a Haar isometry.
/// Needs `output_dim · n_kraus ≥ input_dim`.
pub fn random_channel(input_dim: usize, output_dim: usize, n_kraus: usize, rng: &mut impl Rng) -> KrausChannel {
    let v = random_isometry(output_dim * n_kraus, input_dim, rng);
    let ops = (0..n_kraus)
        .map(|k| v.rows(k * output_dim, output_dim).into_owned())
        .collect();
    KrausChannel::new(ops).expect("isometry blocks form a channel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_reproducible() {
        let a = random_density(3, &mut rng_from_seed(9));
        let b = random_density(3, &mut rng_from_seed(9));
        assert_eq!(a, b);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(5, &mut rng_from_seed(1));
        assert!((u.adjoint() * &u - CMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn low_rank_state() {
        let r = random_density_rank(4, 2, &mut rng_from_seed(2));
        let ev = r.eigenvalues();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
        assert!((r.trace() - 1.0).abs() < 1e-12);
    }
}
