use std::ops::Deref;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::hermitian::{HermitianMatrix, PSD_TOL};
use crate::error::{Error, Result};

/// Tolerance on `|tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-10;

/// Positive semidefinite Hermitian operator with unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseMatrix", into = "DenseMatrix")]
pub struct DensityMatrix {
    h: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = h.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { h })
    }

    /// Rescales a nonzero PSD matrix to unit trace.
    pub fn normalized(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidTrace(tr));
        }
        Self::new(h.scale(1.0 / tr))
    }

    pub(crate) fn from_raw(h: HermitianMatrix) -> Self {
        Self { h }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            h: HermitianMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `ψ`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        Ok(Self {
            h: HermitianMatrix::outer(&psi.unscale(n)),
        })
    }

    /// Computational basis projector `|i⟩⟨i|`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut diag = vec![0.0; dim];
        diag[i] = 1.0;
        Self {
            h: HermitianMatrix::from_diagonal(&diag),
        }
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.h
    }

    /// Convex combination `(1−p)·self + p·other`.
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("mixing weight {p} outside [0, 1]")));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot mix states of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            h: &self.h.scale(1.0 - p) + &other.h.scale(p),
        })
    }

    pub fn purity(&self) -> f64 {
        self.h.inner(&self.h)
    }

    /// von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.h
            .eigenvalues()
            .into_iter()
            .filter(|&v| v > 0.0)
            .map(|v| -v * v.ln())
            .sum()
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianMatrix;
    fn deref(&self) -> &HermitianMatrix {
        &self.h
    }
}

impl TryFrom<HermitianMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(h: HermitianMatrix) -> Result<Self> {
        Self::new(h)
    }
}

impl TryFrom<DenseMatrix> for DensityMatrix {
    type Error = Error;
    fn try_from(d: DenseMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::try_from(d)?)
    }
}

impl From<DensityMatrix> for DenseMatrix {
    fn from(d: DensityMatrix) -> Self {
        d.h.into()
    }
}

impl From<DensityMatrix> for HermitianMatrix {
    fn from(d: DensityMatrix) -> Self {
        d.h
    }
}
