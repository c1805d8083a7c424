use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use super::density::DensityMatrix;
use super::hermitian::{CMatrix, HermitianMatrix};
use crate::error::{Error, Result};

/// Tolerance on `‖Σ K_i† K_i − I‖_max`.
pub const TP_TOL: f64 = 1e-10;

/// Completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KrausRepr", into = "KrausRepr")]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    input_dim: usize,
    output_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KrausRepr {
    kraus: Vec<DenseMatrix>,
}

impl TryFrom<KrausRepr> for KrausChannel {
    type Error = Error;
    fn try_from(r: KrausRepr) -> Result<Self> {
        let ops = r
            .kraus
            .iter()
            .map(DenseMatrix::to_complex)
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

impl From<KrausChannel> for KrausRepr {
    fn from(c: KrausChannel) -> Self {
        Self {
            kraus: c.ops.iter().map(DenseMatrix::from_complex).collect(),
        }
    }
}

/// Maximum entrywise deviation of `Σ K_i† K_i` from the identity.
pub(crate) fn tp_deviation(ops: &[CMatrix]) -> f64 {
    let n = ops[0].ncols();
    let mut acc = CMatrix::zeros(n, n);
    for k in ops {
        acc += k.adjoint() * k;
    }
    acc -= CMatrix::identity(n, n);
    acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let (output_dim, input_dim) = check_kraus_shapes(&ops)?;
        let dev = tp_deviation(&ops);
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self {
            ops,
            input_dim,
            output_dim,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ops: vec![CMatrix::identity(dim, dim)],
            input_dim: dim,
            output_dim: dim,
        }
    }

    /// Qubit amplitude damping with decay probability `p`.
    pub fn amplitude_damping(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("damping probability {p} outside [0, 1]")));
        }
        let c = |x: f64| Complex64::new(x, 0.0);
        let k1 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - p).sqrt())]);
        let k2 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(p.sqrt()), c(0.0), c(0.0)]);
        Self::new(vec![k1, k2])
    }

    /// Dephasing onto the orthonormal basis given by the columns of `basis`.
    pub fn pinching(basis: &CMatrix) -> Result<Self> {
        if basis.nrows() != basis.ncols() {
            return Err(Error::NotSquare(basis.nrows(), basis.ncols()));
        }
        let ops = (0..basis.ncols())
            .map(|j| {
                let v = basis.column(j);
                v * v.adjoint()
            })
            .collect();
        Self::new(ops)
    }

    /// Dephasing in the computational basis.
    pub fn computational_pinching(dim: usize) -> Self {
        Self::pinching(&CMatrix::identity(dim, dim)).expect("identity basis is orthonormal")
    }

    /// Extends the channel to act on one factor of a bipartite space,
    /// leaving a `other_dim`-dimensional factor untouched.
    pub fn lift(&self, other_dim: usize, position: super::Subsystem) -> Self {
        let id = CMatrix::identity(other_dim, other_dim);
        let ops = self
            .ops
            .iter()
            .map(|k| match position {
                super::Subsystem::A => k.kronecker(&id),
                super::Subsystem::B => id.kronecker(k),
            })
            .collect();
        Self {
            ops,
            input_dim: self.input_dim * other_dim,
            output_dim: self.output_dim * other_dim,
        }
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// `Σ K_i X K_i†` on an arbitrary Hermitian input.
    pub fn apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        if x.dim() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "channel expects input dimension {}, got {}",
                self.input_dim,
                x.dim()
            )));
        }
        Ok(HermitianMatrix::from_raw(kraus_apply(&self.ops, x.as_matrix())))
    }

    /// Heisenberg-picture map `Σ K_i† Y K_i`.
    pub fn adjoint_apply(&self, y: &HermitianMatrix) -> Result<HermitianMatrix> {
        if y.dim() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "channel adjoint expects dimension {}, got {}",
                self.output_dim,
                y.dim()
            )));
        }
        let mut acc = CMatrix::zeros(self.input_dim, self.input_dim);
        for k in &self.ops {
            acc += k.adjoint() * y.as_matrix() * k;
        }
        Ok(HermitianMatrix::from_raw(acc))
    }

    /// Stinespring isometry `V|ψ⟩ = Σ_i K_i|ψ⟩ ⊗ |i⟩_E`.
    pub fn stinespring(&self) -> CMatrix {
        let ne = self.ops.len();
        let mut v = CMatrix::zeros(self.output_dim * ne, self.input_dim);
        for (i, k) in self.ops.iter().enumerate() {
            for r in 0..self.output_dim {
                for c in 0..self.input_dim {
                    v[(r * ne + i, c)] = k[(r, c)];
                }
            }
        }
        v
    }
}

pub(crate) fn check_kraus_shapes(ops: &[CMatrix]) -> Result<(usize, usize)> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let shape = first.shape();
    if shape.0 == 0 || shape.1 == 0 {
        return Err(Error::InvalidArgument("empty Kraus operator".into()));
    }
    if let Some(bad) = ops.iter().find(|k| k.shape() != shape) {
        return Err(Error::DimensionMismatch(format!(
            "Kraus operators of shapes {:?} and {:?}",
            shape,
            bad.shape()
        )));
    }
    Ok(shape)
}

pub(crate) fn kraus_apply(ops: &[CMatrix], x: &CMatrix) -> CMatrix {
    let n = ops[0].nrows();
    let mut acc = CMatrix::zeros(n, n);
    for k in ops {
        acc += k * x * k.adjoint();
    }
    acc
}

/// Applies a channel to a state.
pub fn apply_channel(channel: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_raw(channel.apply(rho)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_channel, random_density, rng_from_seed};

    #[test]
    fn rejects_non_tp() {
        let k = CMatrix::identity(2, 2).scale(0.9);
        assert!(matches!(KrausChannel::new(vec![k]), Err(Error::NotTracePreserving(_))));
        assert!(KrausChannel::new(vec![]).is_err());
    }

    #[test]
    fn identity_channel() {
        let mut rng = rng_from_seed(1);
        let rho = random_density(3, &mut rng);
        let out = apply_channel(&KrausChannel::identity(3), &rho).unwrap();
        assert!((&*out - &*rho).frobenius_norm() < 1e-15);
    }

    #[test]
    fn full_damping_resets() {
        let mut rng = rng_from_seed(2);
        let ch = KrausChannel::amplitude_damping(1.0).unwrap();
        for _ in 0..5 {
            let rho = random_density(2, &mut rng);
            let out = apply_channel(&ch, &rho).unwrap();
            assert!((&*out - &*DensityMatrix::basis(2, 0)).frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn pinching_keeps_diagonal() {
        let mut rng = rng_from_seed(3);
        let rho = random_density(4, &mut rng);
        let out = apply_channel(&KrausChannel::computational_pinching(4), &rho).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { rho.as_matrix()[(i, i)] } else { Complex64::new(0.0, 0.0) };
                assert!((out.as_matrix()[(i, j)] - expected).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoint_is_dual() {
        let mut rng = rng_from_seed(4);
        let ch = random_channel(3, 2, 3, &mut rng);
        let x = random_density(3, &mut rng);
        let y = random_density(2, &mut rng);
        let lhs = ch.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&ch.adjoint_apply(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
        let unit = ch.adjoint_apply(&HermitianMatrix::identity(2)).unwrap();
        assert!((&unit - &HermitianMatrix::identity(3)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn stinespring_reproduces_channel() {
        let mut rng = rng_from_seed(5);
        let ch = KrausChannel::amplitude_damping(0.3).unwrap();
        let v = ch.stinespring();
        assert!((v.adjoint() * &v - CMatrix::identity(2, 2)).norm() < 1e-14);
        let rho = random_density(2, &mut rng);
        let joint = rho.conjugate_by(&v);
        let out = crate::linalg::partial_trace(&joint, (2, 2), crate::linalg::Subsystem::A).unwrap();
        assert!((&out - &ch.apply(&rho).unwrap()).frobenius_norm() < 1e-14);
    }

    #[test]
    fn lift_acts_locally() {
        let mut rng = rng_from_seed(6);
        let ch = random_channel(2, 2, 2, &mut rng);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let lifted = ch.lift(3, crate::linalg::Subsystem::A);
        let out = lifted.apply(&crate::linalg::tensor(&a, &b)).unwrap();
        let expected = crate::linalg::tensor(&ch.apply(&a).unwrap(), &b);
        assert!((&out - &expected).frobenius_norm() < 1e-13);
    }
}
