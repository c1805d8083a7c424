//! Hermiticity-preserving linear maps used to tie states to SDP variables.

use serde::{Deserialize, Serialize};

use super::channel::{check_kraus_shapes, kraus_apply};
use super::hermitian::{CMatrix, HermitianMatrix};
use super::ops::{partial_trace_c, partial_transpose_c, Subsystem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearMap {
    Identity {
        dim: usize,
    },
    /// `X ↦ Σ K_i X K_i†`; need not be trace preserving.
    Kraus {
        #[serde(with = "super::dense::vec_serde")]
        ops: Vec<CMatrix>,
    },
    PartialTrace {
        dims: (usize, usize),
        keep: Subsystem,
    },
    PartialTranspose {
        dims: (usize, usize),
        sys: Subsystem,
    },
    /// `X ↦ F ⊗ X`.
    TensorLeft {
        fixed: HermitianMatrix,
    },
    /// `X ↦ X ⊗ F`.
    TensorRight {
        fixed: HermitianMatrix,
    },
    /// Applies the maps in order, first element first.
    Compose {
        maps: Vec<LinearMap>,
    },
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        Self::Identity { dim }
    }

    pub fn kraus(ops: Vec<CMatrix>) -> Result<Self> {
        check_kraus_shapes(&ops)?;
        Ok(Self::Kraus { ops })
    }

    /// Conjugation `X ↦ V X V†`.
    pub fn conjugation(v: CMatrix) -> Self {
        Self::Kraus { ops: vec![v] }
    }

    pub fn then(self, next: LinearMap) -> Self {
        match self {
            Self::Compose { mut maps } => {
                maps.push(next);
                Self::Compose { maps }
            }
            first => Self::Compose {
                maps: vec![first, next],
            },
        }
    }

    /// Output dimension for the given input dimension, validating shapes.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize> {
        let mismatch = |what: &str, expected: usize| {
            Err(Error::DimensionMismatch(format!(
                "{what} expects input dimension {expected}, got {input_dim}"
            )))
        };
        match self {
            Self::Identity { dim } => {
                if *dim != input_dim {
                    return mismatch("identity map", *dim);
                }
                Ok(input_dim)
            }
            Self::Kraus { ops } => {
                let (out, inp) = check_kraus_shapes(ops)?;
                if inp != input_dim {
                    return mismatch("Kraus map", inp);
                }
                Ok(out)
            }
            Self::PartialTrace { dims, keep } => {
                if dims.0 * dims.1 != input_dim {
                    return mismatch("partial trace", dims.0 * dims.1);
                }
                Ok(match keep {
                    Subsystem::A => dims.0,
                    Subsystem::B => dims.1,
                })
            }
            Self::PartialTranspose { dims, .. } => {
                if dims.0 * dims.1 != input_dim {
                    return mismatch("partial transpose", dims.0 * dims.1);
                }
                Ok(input_dim)
            }
            Self::TensorLeft { fixed } | Self::TensorRight { fixed } => Ok(fixed.dim() * input_dim),
            Self::Compose { maps } => maps.iter().try_fold(input_dim, |d, m| m.output_dim(d)),
        }
    }

    /// Applies the map to an arbitrary complex matrix; shapes must already be validated.
    pub(crate) fn apply_c(&self, x: &CMatrix) -> CMatrix {
        match self {
            Self::Identity { .. } => x.clone(),
            Self::Kraus { ops } => kraus_apply(ops, x),
            Self::PartialTrace { dims, keep } => partial_trace_c(x, *dims, *keep),
            Self::PartialTranspose { dims, sys } => partial_transpose_c(x, *dims, *sys),
            Self::TensorLeft { fixed } => fixed.as_matrix().kronecker(x),
            Self::TensorRight { fixed } => x.kronecker(fixed.as_matrix()),
            Self::Compose { maps } => {
                let mut cur = x.clone();
                for m in maps {
                    cur = m.apply_c(&cur);
                }
                cur
            }
        }
    }

    /// Applies the adjoint map (with respect to `⟨A, B⟩ = tr A†B`); `input_dim`
    /// is the input dimension of the forward map.
    pub(crate) fn adjoint_apply_c(&self, y: &CMatrix, input_dim: usize) -> CMatrix {
        match self {
            Self::Identity { .. } => y.clone(),
            Self::Kraus { ops } => {
                let mut acc = CMatrix::zeros(input_dim, input_dim);
                for k in ops {
                    acc += k.adjoint() * y * k;
                }
                acc
            }
            Self::PartialTrace { dims, keep } => match keep {
                Subsystem::A => y.kronecker(&CMatrix::identity(dims.1, dims.1)),
                Subsystem::B => CMatrix::identity(dims.0, dims.0).kronecker(y),
            },
            Self::PartialTranspose { dims, sys } => partial_transpose_c(y, *dims, *sys),
            Self::TensorLeft { fixed } => {
                let (f, n) = (fixed.as_matrix(), input_dim);
                CMatrix::from_fn(n, n, |i, j| {
                    let mut acc = num_complex::Complex64::new(0.0, 0.0);
                    for a in 0..f.nrows() {
                        for b in 0..f.nrows() {
                            acc += f[(a, b)].conj() * y[(a * n + i, b * n + j)];
                        }
                    }
                    acc
                })
            }
            Self::TensorRight { fixed } => {
                let (f, m) = (fixed.as_matrix(), fixed.dim());
                CMatrix::from_fn(input_dim, input_dim, |i, j| {
                    let mut acc = num_complex::Complex64::new(0.0, 0.0);
                    for a in 0..m {
                        for b in 0..m {
                            acc += f[(a, b)].conj() * y[(i * m + a, j * m + b)];
                        }
                    }
                    acc
                })
            }
            Self::Compose { maps } => {
                let mut dims = vec![input_dim];
                for m in maps {
                    let d = *dims.last().unwrap();
                    dims.push(m.output_dim(d).expect("validated shapes"));
                }
                let mut cur = y.clone();
                for (m, &d) in maps.iter().zip(&dims).rev() {
                    cur = m.adjoint_apply_c(&cur, d);
                }
                cur
            }
        }
    }

    /// `L†(I)`, so that `tr L(X) = tr(L†(I) X)`.
    pub fn trace_functional(&self, input_dim: usize) -> Result<HermitianMatrix> {
        let out = self.output_dim(input_dim)?;
        Ok(HermitianMatrix::from_raw(self.adjoint_apply_c(&CMatrix::identity(out, out), input_dim)))
    }

    pub fn apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.output_dim(x.dim())?;
        Ok(HermitianMatrix::from_raw(self.apply_c(x.as_matrix())))
    }

    /// Upper bound on the induced trace norm `sup ‖L(X)‖₁ / ‖X‖₁` over Hermitian `X`.
    pub fn trace_norm_gain(&self) -> f64 {
        match self {
            Self::Identity { .. } | Self::PartialTrace { .. } => 1.0,
            // Russo–Dye: for CP maps the 1→1 norm is ‖Σ K†K‖_∞.
            Self::Kraus { ops } => {
                let n = ops[0].ncols();
                let mut acc = CMatrix::zeros(n, n);
                for k in ops {
                    acc += k.adjoint() * k;
                }
                HermitianMatrix::from_raw(acc).eigh().max()
            }
            Self::PartialTranspose { dims, sys } => match sys {
                Subsystem::A => dims.0 as f64,
                Subsystem::B => dims.1 as f64,
            },
            Self::TensorLeft { fixed } | Self::TensorRight { fixed } => fixed.trace_norm(),
            Self::Compose { maps } => maps.iter().map(Self::trace_norm_gain).product(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_channel, random_density, random_hermitian, rng_from_seed};
    use crate::linalg::{partial_trace, tensor};

    #[test]
    fn compose_matches_direct() {
        let mut rng = rng_from_seed(3);
        let ch = random_channel(2, 4, 2, &mut rng);
        let half = HermitianMatrix::identity(2).scale(0.5);
        let map = LinearMap::kraus(ch.operators().to_vec())
            .unwrap()
            .then(LinearMap::PartialTrace {
                dims: (2, 2),
                keep: Subsystem::B,
            })
            .then(LinearMap::TensorLeft { fixed: half.clone() });
        assert_eq!(map.output_dim(2).unwrap(), 4);
        assert!(map.output_dim(3).is_err());
        let rho = random_density(2, &mut rng);
        let direct = tensor(
            &half,
            &partial_trace(&ch.apply(&rho).unwrap(), (2, 2), Subsystem::B).unwrap(),
        );
        assert!((&map.apply(&rho).unwrap() - &direct).frobenius_norm() < 1e-14);
    }

    #[test]
    fn gains_bound_trace_norm() {
        let mut rng = rng_from_seed(5);
        let maps = vec![
            LinearMap::identity(4),
            LinearMap::PartialTrace {
                dims: (2, 2),
                keep: Subsystem::A,
            },
            LinearMap::PartialTranspose {
                dims: (2, 2),
                sys: Subsystem::B,
            },
            LinearMap::kraus(vec![random_hermitian(4, &mut rng).into_matrix()]).unwrap(),
        ];
        for m in &maps {
            for _ in 0..50 {
                let x = random_hermitian(4, &mut rng);
                let y = m.apply(&x).unwrap();
                assert!(y.trace_norm() <= m.trace_norm_gain() * x.trace_norm() + 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let mut rng = rng_from_seed(11);
        let ch = random_channel(2, 4, 3, &mut rng);
        let f = random_hermitian(3, &mut rng);
        let maps = vec![
            (LinearMap::identity(4), 4),
            (LinearMap::PartialTrace { dims: (2, 3), keep: Subsystem::A }, 6),
            (LinearMap::PartialTrace { dims: (2, 3), keep: Subsystem::B }, 6),
            (LinearMap::PartialTranspose { dims: (2, 2), sys: Subsystem::A }, 4),
            (LinearMap::TensorLeft { fixed: f.clone() }, 2),
            (LinearMap::TensorRight { fixed: f.clone() }, 2),
            (
                LinearMap::kraus(ch.operators().to_vec())
                    .unwrap()
                    .then(LinearMap::PartialTrace { dims: (2, 2), keep: Subsystem::B })
                    .then(LinearMap::TensorRight { fixed: f }),
                2,
            ),
        ];
        for (m, d) in &maps {
            let x = random_hermitian(*d, &mut rng);
            let y = random_hermitian(m.output_dim(*d).unwrap(), &mut rng);
            let lhs = y.inner(&m.apply(&x).unwrap());
            let rhs = HermitianMatrix::from_raw(m.adjoint_apply_c(y.as_matrix(), *d)).inner(&x);
            assert!((lhs - rhs).abs() < 1e-12, "{m:?}: {lhs} vs {rhs}");
            let t = m.trace_functional(*d).unwrap();
            assert!((t.inner(&x) - m.apply(&x).unwrap().trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let map = LinearMap::conjugation(CMatrix::identity(2, 2)).then(LinearMap::PartialTranspose {
            dims: (1, 2),
            sys: Subsystem::B,
        });
        let s = serde_json::to_string(&map).unwrap();
        let back: LinearMap = serde_json::from_str(&s).unwrap();
        assert_eq!(map, back);
        assert!(serde_json::from_str::<LinearMap>(r#"{"type":"identity","dim":2,"extra":1}"#).is_err());
    }
}
