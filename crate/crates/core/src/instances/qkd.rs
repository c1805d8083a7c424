//! Key-rate problems: `min D(ρ_AB ‖ Φ_0^A[ρ_AB])` subject to observed
//! measurement statistics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{independent_rows, initial_grid, isotropic, mub_pair};
use crate::bounds::{RelEntProblem, RelEntTerm, StateBlock, StateMap};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DenseMatrix, DensityMatrix, HermitianMatrix, KrausChannel, LinearMap, Subsystem};
use crate::sdp::{BlockStructure, ScalarConstraint, ScalarFunctional, ScalarRelation};

const TABLE_TOL: f64 = 1e-9;
const BASIS_TOL: f64 = 1e-9;

/// Joint outcome probabilities `p[i][j]` for measuring A in `bases_a[basis_a]`
/// and B in `bases_b[basis_b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdTable {
    pub basis_a: usize,
    pub basis_b: usize,
    pub probs: Vec<Vec<f64>>,
}

/// Measurement setup and statistics. Bases are given as unitary matrices
/// whose columns are the basis vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdSetup {
    pub d_a: usize,
    pub d_b: usize,
    pub bases_a: Vec<DenseMatrix>,
    pub bases_b: Vec<DenseMatrix>,
    /// Index into `bases_a` of the key measurement.
    #[serde(default)]
    pub key_basis: usize,
    pub tables: Vec<QkdTable>,
    /// Upper sandwich constant; `√(d_A d_B)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Restrict to Bell-diagonal states. `None` uses the reduction whenever
    /// the setup is covariant under the Weyl group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell_diagonal: Option<bool>,
}

fn projector(basis: &CMatrix, i: usize) -> CMatrix {
    let v = basis.column(i);
    v * v.adjoint()
}

fn is_unitary(u: &CMatrix) -> bool {
    u.is_square() && (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm() < BASIS_TOL
}

/// `X^a Z^b` with `X|j⟩ = |j+1⟩`, `Z|j⟩ = ω^j |j⟩`.
fn weyl(d: usize, a: usize, b: usize) -> CMatrix {
    let mut w = CMatrix::zeros(d, d);
    for j in 0..d {
        let phase = 2.0 * std::f64::consts::PI * (b * j) as f64 / d as f64;
        w[((j + a) % d, j)] = Complex64::from_polar(1.0, phase);
    }
    w
}

/// Unitary whose column `a d + b` is `(X^a Z^b ⊗ 1)|Ω⁺⟩`.
pub(crate) fn bell_basis(d: usize) -> CMatrix {
    let s = 1.0 / (d as f64).sqrt();
    let mut v = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let w = weyl(d, a, b);
            for j in 0..d {
                v[(((j + a) % d) * d + j, a * d + b)] = w[((j + a) % d, j)] * s;
            }
        }
    }
    v
}

/// Index `k` with `U P_i U† = P_k`, if the conjugation permutes the basis.
fn permuted_index(u: &CMatrix, basis: &CMatrix, i: usize) -> Option<usize> {
    let m = u * projector(basis, i) * u.adjoint();
    (0..basis.ncols()).find(|&k| (&m - projector(basis, k)).norm() < BASIS_TOL)
}

impl QkdSetup {
    /// Two mutually unbiased bases per side (computational and Fourier on A,
    /// computational and conjugate Fourier on B) with all four joint tables
    /// generated by the isotropic state of noise weight `alpha`.
    pub fn isotropic_mub(d: usize, alpha: f64) -> Result<Self> {
        let (e, f) = mub_pair(d)?;
        let bases_a = vec![e.clone(), f.clone()];
        let bases_b = vec![e, f.conjugate()];
        let rho = isotropic(alpha, d)?;
        let mut tables = Vec::new();
        for ia in 0..2 {
            for ib in 0..2 {
                tables.push(QkdTable {
                    basis_a: ia,
                    basis_b: ib,
                    probs: table_from_state(&rho, &bases_a[ia], &bases_b[ib]),
                });
            }
        }
        Ok(Self {
            d_a: d,
            d_b: d,
            bases_a: bases_a.iter().map(DenseMatrix::from_complex).collect(),
            bases_b: bases_b.iter().map(DenseMatrix::from_complex).collect(),
            key_basis: 0,
            tables,
            lambda: None,
            bell_diagonal: None,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(((self.d_a * self.d_b) as f64).sqrt())
    }

    fn complex_bases(&self) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
        let conv = |v: &[DenseMatrix]| v.iter().map(DenseMatrix::to_complex).collect::<Result<Vec<_>>>();
        Ok((conv(&self.bases_a)?, conv(&self.bases_b)?))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d_a < 2 || self.d_b < 2 {
            return bad(format!("local dimensions must be at least 2, got {}x{}", self.d_a, self.d_b));
        }
        let (ba, bb) = self.complex_bases()?;
        for (side, bases, d) in [("A", &ba, self.d_a), ("B", &bb, self.d_b)] {
            if bases.is_empty() {
                return bad(format!("no measurement bases for {side}"));
            }
            if let Some(i) = bases.iter().position(|u| u.nrows() != d || !is_unitary(u)) {
                return bad(format!("basis {i} of {side} is not a unitary {d}x{d} matrix"));
            }
        }
        if self.key_basis >= ba.len() {
            return bad(format!("key basis {} does not exist", self.key_basis));
        }
        if self.tables.is_empty() {
            return bad("no statistics tables".into());
        }
        for (k, t) in self.tables.iter().enumerate() {
            if t.basis_a >= ba.len() || t.basis_b >= bb.len() {
                return bad(format!("table {k} references a missing basis"));
            }
            if t.probs.len() != self.d_a || t.probs.iter().any(|r| r.len() != self.d_b) {
                return bad(format!("table {k} must be {}x{}", self.d_a, self.d_b));
            }
            if t.probs.iter().flatten().any(|p| !(*p >= 0.0)) {
                return bad(format!("table {k} has negative or non-finite entries"));
            }
            let sum: f64 = t.probs.iter().flatten().sum();
            if (sum - 1.0).abs() > TABLE_TOL {
                return bad(format!("table {k} sums to {sum}"));
            }
        }
        let l = self.lambda();
        if !(l >= 1.0 && l.is_finite()) {
            return bad(format!("λ must be finite and at least 1, got {l}"));
        }
        Ok(())
    }

    /// True if the key basis, the measured bases and the tables are invariant
    /// under `U ⊗ Ū` for every Weyl operator `U`. Then the optimum can be
    /// taken Bell-diagonal.
    pub fn weyl_covariant(&self) -> Result<bool> {
        self.validate()?;
        if self.d_a != self.d_b {
            return Ok(false);
        }
        let d = self.d_a;
        let (ba, bb) = self.complex_bases()?;
        for u in [weyl(d, 1, 0), weyl(d, 0, 1)] {
            let ub = u.conjugate();
            if (0..d).any(|i| permuted_index(&u, &ba[self.key_basis], i).is_none()) {
                return Ok(false);
            }
            for t in &self.tables {
                let pa: Option<Vec<usize>> = (0..d).map(|i| permuted_index(&u, &ba[t.basis_a], i)).collect();
                let pb: Option<Vec<usize>> = (0..d).map(|j| permuted_index(&ub, &bb[t.basis_b], j)).collect();
                let (Some(pa), Some(pb)) = (pa, pb) else {
                    return Ok(false);
                };
                for i in 0..d {
                    for j in 0..d {
                        if (t.probs[i][j] - t.probs[pa[i]][pb[j]]).abs() > TABLE_TOL {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Whether [`qkd_instance`] uses the Bell-diagonal reduction.
    pub fn uses_bell_diagonal(&self) -> Result<bool> {
        let cov = self.weyl_covariant()?;
        match self.bell_diagonal {
            Some(true) if !cov => Err(Error::InvalidArgument(
                "Bell-diagonal reduction requested but the setup is not Weyl covariant".into(),
            )),
            Some(b) => Ok(b),
            None => Ok(cov),
        }
    }

    /// Value of the state variable of [`qkd_instance`] representing `rho`.
    pub fn encode_state(&self, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
        if !self.uses_bell_diagonal()? {
            return Ok(rho.clone());
        }
        let v = bell_basis(self.d_a);
        let m = rho.conjugate_by(&v.adjoint());
        let diag: Vec<f64> = (0..m.dim()).map(|i| m.as_matrix()[(i, i)].re).collect();
        Ok(HermitianMatrix::from_diagonal(&diag))
    }
}

fn table_from_state(rho: &DensityMatrix, basis_a: &CMatrix, basis_b: &CMatrix) -> Vec<Vec<f64>> {
    let (da, db) = (basis_a.ncols(), basis_b.ncols());
    (0..da)
        .map(|i| {
            (0..db)
                .map(|j| {
                    let v = basis_a.column(i).kronecker(&basis_b.column(j));
                    (v.adjoint() * rho.as_hermitian().as_matrix() * &v)[(0, 0)].re.max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Single-term problem `min D(ρ‖Φ_0^A(ρ))` with the statistics as equality
/// constraints. The sandwich `ρ ⪯ d_A Φ_0^A(ρ)` always holds, so the
/// constraint `ρ ⪯ λ Φ_0^A(ρ)` is only added when `λ < d_A`.
pub fn qkd_instance(setup: &QkdSetup) -> Result<RelEntProblem> {
    setup.validate()?;
    let bell = setup.uses_bell_diagonal()?;
    let (ba, bb) = setup.complex_bases()?;
    let n = setup.d_a * setup.d_b;
    let lambda = setup.lambda();
    let key = KrausChannel::pinching(&ba[setup.key_basis])?.lift(setup.d_b, Subsystem::A);

    let v = if bell { bell_basis(setup.d_a) } else { CMatrix::identity(n, n) };
    let reduce = |m: CMatrix| -> CMatrix { v.adjoint() * m * &v };
    let key_ops: Vec<CMatrix> = key.operators().iter().map(|k| reduce(k.clone())).collect();

    let mut rows = Vec::new();
    for t in &setup.tables {
        for i in 0..setup.d_a {
            for j in 0..setup.d_b {
                let m = reduce(projector(&ba[t.basis_a], i).kronecker(&projector(&bb[t.basis_b], j)));
                let c = if bell {
                    HermitianMatrix::from_diagonal(&(0..n).map(|k| m[(k, k)].re).collect::<Vec<_>>())
                } else {
                    HermitianMatrix::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0))?
                };
                rows.push((c, t.probs[i][j]));
            }
        }
    }
    let constraints = independent_rows(rows)
        .into_iter()
        .map(|(c, p)| ScalarConstraint {
            func: ScalarFunctional::default().inner(0, c).plus(-p),
            relation: ScalarRelation::Zero,
        })
        .collect();

    let structure = if bell { BlockStructure::Diagonal } else { BlockStructure::Full };
    let mut state = StateBlock::new("rho_ab", n);
    state.structure = structure;
    let problem = RelEntProblem {
        states: vec![state],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::free(0),
            sigma: StateMap::affine(0, LinearMap::kraus(key_ops)?),
            mu: 0.0,
            lambda,
            grid: initial_grid(0.0, lambda)?,
            enforce_sandwich: lambda < setup.d_a as f64,
        }],
        constraints,
        matrix_constraints: vec![],
        aux_structure: structure,
    };
    problem.validate()?;
    Ok(problem)
}
