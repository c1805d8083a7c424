//! Constructors for the standard application problems and their ingredient
//! states, bases and channels.

mod capacity;
mod entropy;
mod generic;
mod qkd;
mod ree;

pub use capacity::{amplitude_damping_capacity_oracle, amplitude_damping_instance, ea_mutual_information, CAPACITY_OFFSET};
pub use entropy::{cond_entropy_instance, entropy_max_instance, StateConstraints};
pub use generic::{generic_instance, GenericInstance, GENERIC_LAMBDA, GENERIC_MU};
pub use qkd::{qkd_instance, QkdSetup, QkdTable};
pub use ree::{isotropic_ree_oracle, ree_instance, DEFAULT_REE_LAMBDA};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridding::{adaptive_grid, AdaptiveFactor, Grid};
use crate::linalg::{CMatrix, DensityMatrix, HermitianMatrix};

/// ε of the adaptive grids the constructors start from; refinement takes it from there.
pub const INITIAL_EPS: f64 = 0.05;

pub(crate) fn initial_grid(mu: f64, lambda: f64) -> Result<Grid> {
    adaptive_grid(mu, lambda, INITIAL_EPS, AdaptiveFactor::Eight)
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("local dimension must be at least 2, got {d}")));
    }
    Ok(())
}

/// `|Ω⁺⟩ = Σ_i |ii⟩/√d`.
pub fn max_entangled_vector(d: usize) -> Result<DVector<Complex64>> {
    check_dim(d)?;
    let mut v = DVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    Ok(v)
}

pub fn max_entangled(d: usize) -> Result<DensityMatrix> {
    DensityMatrix::pure(&max_entangled_vector(d)?)
}

/// `(1 − α) Ω⁺ + α 1/d²`.
pub fn isotropic(alpha: f64, d: usize) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("α must lie in [0, 1], got {alpha}")));
    }
    max_entangled(d)?.mix(&DensityMatrix::maximally_mixed(d * d), alpha)
}

/// Discrete Fourier matrix `F_jk = ω^{jk}/√d`; its columns form a basis
/// unbiased to the computational one.
pub fn fourier_basis(d: usize) -> CMatrix {
    let s = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(d, d, |j, k| {
        let phase = 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64;
        Complex64::from_polar(s, phase)
    })
}

/// Computational and Fourier bases (as matrix columns).
pub fn mub_pair(d: usize) -> Result<(CMatrix, CMatrix)> {
    check_dim(d)?;
    Ok((CMatrix::identity(d, d), fourier_basis(d)))
}

/// Expectation constraints `tr(C ρ) = v` with linearly dependent rows
/// removed. The unit trace of a state counts as an existing row. A dependent
/// row whose value disagrees with the implied one is kept, so that
/// inconsistent data still shows up as infeasibility.
pub(crate) fn independent_rows(rows: Vec<(HermitianMatrix, f64)>) -> Vec<(HermitianMatrix, f64)> {
    let flat = |h: &HermitianMatrix| -> Vec<f64> { h.as_matrix().iter().flat_map(|z| [z.re, z.im]).collect() };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
    if let Some((c, _)) = rows.first() {
        let id = flat(&HermitianMatrix::identity(c.dim()));
        let n = dot(&id, &id).sqrt();
        basis.push((id.iter().map(|x| x / n).collect(), 1.0 / n));
    }
    let mut out = Vec::new();
    for (c, v) in rows {
        let mut r = flat(&c);
        let norm = dot(&r, &r).sqrt();
        let mut implied = 0.0;
        for (q, qv) in &basis {
            let k = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= k * y);
            implied += k * qv;
        }
        let rest = dot(&r, &r).sqrt();
        if rest <= 1e-9 * norm.max(1.0) {
            if (implied - v).abs() > 1e-9 {
                out.push((c, v));
            }
            continue;
        }
        basis.push((r.iter().map(|x| x / rest).collect(), (v - implied) / rest));
        out.push((c, v));
    }
    out
}

/// One-parameter sweep over `α` (QKD, REE) or `p` (capacity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
    pub target_eps: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("sweep has no values".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("sweep value {v} outside [0, 1]")));
        }
        if !(self.target_eps > 0.0) {
            return Err(Error::InvalidArgument(format!("target ε must be positive, got {}", self.target_eps)));
        }
        Ok(())
    }

    /// Values in ascending order.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}
