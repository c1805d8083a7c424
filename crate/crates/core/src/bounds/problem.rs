//! Constrained relative entropy minimization problems.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridding::Grid;
use crate::linalg::{DensityMatrix, HermitianMatrix, LinearMap};
use crate::sdp::{BlockStructure, MatrixRelation, ScalarConstraint, ScalarRelation, ScalarTerm};

/// How one argument of a relative entropy depends on the state variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateMap {
    /// A free state block.
    Free { block: usize },
    Fixed { state: DensityMatrix },
    /// A linear map applied to a free state block.
    Affine { block: usize, map: LinearMap },
}

impl StateMap {
    pub fn free(block: usize) -> Self {
        Self::Free { block }
    }

    pub fn fixed(state: DensityMatrix) -> Self {
        Self::Fixed { state }
    }

    pub fn affine(block: usize, map: LinearMap) -> Self {
        Self::Affine { block, map }
    }

    pub fn block(&self) -> Option<usize> {
        match self {
            Self::Free { block } | Self::Affine { block, .. } => Some(*block),
            Self::Fixed { .. } => None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Self::Fixed { .. })
    }

    pub fn dim(&self, states: &[StateBlock]) -> Result<usize> {
        let block_dim = |b: usize| {
            states
                .get(b)
                .map(|s| s.dim)
                .ok_or_else(|| Error::InvalidProblem(format!("reference to missing state block {b}")))
        };
        match self {
            Self::Free { block } => block_dim(*block),
            Self::Fixed { state } => Ok(state.dim()),
            Self::Affine { block, map } => map.output_dim(block_dim(*block)?),
        }
    }

    /// Bound on `‖L(X)‖₁` for density matrices `X`.
    pub fn trace_norm_gain(&self) -> f64 {
        match self {
            Self::Free { .. } | Self::Fixed { .. } => 1.0,
            Self::Affine { map, .. } => map.trace_norm_gain(),
        }
    }

    /// Value at the given state-block values.
    pub fn evaluate(&self, states: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        match self {
            Self::Free { block } => Ok(states[*block].clone()),
            Self::Fixed { state } => Ok(state.as_hermitian().clone()),
            Self::Affine { block, map } => map.apply(&states[*block]),
        }
    }
}

/// A density-matrix variable: PSD with unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBlock {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub structure: BlockStructure,
}

impl StateBlock {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            structure: BlockStructure::Full,
        }
    }
}

fn yes() -> bool {
    true
}

/// `weight · D(ρ‖σ)` with sandwich `μσ ⪯ ρ ⪯ λσ` and a discretization grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelEntTerm {
    pub weight: f64,
    pub rho: StateMap,
    pub sigma: StateMap,
    pub mu: f64,
    pub lambda: f64,
    pub grid: Grid,
    /// Add the sandwich inequalities as constraints. Disable only when they
    /// are implied by the structure of the maps.
    #[serde(default = "yes")]
    pub enforce_sandwich: bool,
}

/// `coeff · L(X_block)` inside a matrix constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateOperatorTerm {
    pub block: usize,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<LinearMap>,
}

/// `Σ coeff · L(X_block) + constant` related to zero (`⪰` or `=`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMatrixConstraint {
    pub dim: usize,
    pub terms: Vec<StateOperatorTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<HermitianMatrix>,
    pub relation: MatrixRelation,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

/// `min Σ ζ_i D(ρ_i‖σ_i)` over state blocks subject to affine constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelEntProblem {
    pub states: Vec<StateBlock>,
    pub terms: Vec<RelEntTerm>,
    /// Scalar constraints; block indices refer to `states`.
    #[serde(default)]
    pub constraints: Vec<ScalarConstraint>,
    #[serde(default)]
    pub matrix_constraints: Vec<StateMatrixConstraint>,
    /// Structure of the auxiliary SDP blocks. `Diagonal` is valid only when
    /// every term maps diagonal states to diagonal operators.
    #[serde(default)]
    pub aux_structure: BlockStructure,
}

impl RelEntProblem {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProblem(m));
        if self.terms.is_empty() {
            return bad("at least one relative entropy term is required".into());
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.dim == 0 {
                return bad(format!("state '{}' has dimension 0", s.name));
            }
            if self.states[..i].iter().any(|o| o.name == s.name) {
                return bad(format!("duplicate state name '{}'", s.name));
            }
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return bad(format!("term {i}: weight {} must be finite and nonnegative", t.weight));
            }
            let dr = t.rho.dim(&self.states)?;
            let ds = t.sigma.dim(&self.states)?;
            if dr != ds {
                return Err(Error::DimensionMismatch(format!("term {i}: ρ has dimension {dr}, σ has dimension {ds}")));
            }
            if !(t.mu >= 0.0 && t.mu <= t.lambda && t.lambda.is_finite()) {
                return bad(format!("term {i}: invalid sandwich ({}, {})", t.mu, t.lambda));
            }
            if t.grid.mu() != t.mu || t.grid.lambda() != t.lambda {
                return Err(Error::InvalidGrid(format!(
                    "term {i}: grid covers [{}, {}] but the sandwich is ({}, {})",
                    t.grid.mu(),
                    t.grid.lambda(),
                    t.mu,
                    t.lambda
                )));
            }
            if !t.grid.is_degenerate() && !(t.grid.first() > 0.0) {
                return Err(Error::InvalidGrid(format!("term {i}: grid needs t_1 > 0")));
            }
        }
        for c in &self.constraints {
            for term in &c.func.terms {
                let b = term.block();
                let Some(s) = self.states.get(b) else {
                    return bad(format!("scalar constraint references missing state {b}"));
                };
                if let ScalarTerm::Inner { matrix, .. } = term {
                    if matrix.dim() != s.dim {
                        return Err(Error::DimensionMismatch(format!(
                            "scalar constraint coefficient has dimension {}, state '{}' has {}",
                            matrix.dim(),
                            s.name,
                            s.dim
                        )));
                    }
                }
            }
        }
        for (ci, c) in self.matrix_constraints.iter().enumerate() {
            for t in &c.terms {
                let Some(s) = self.states.get(t.block) else {
                    return bad(format!("matrix constraint {ci} references missing state {}", t.block));
                };
                let out = match &t.map {
                    None => s.dim,
                    Some(m) => m.output_dim(s.dim)?,
                };
                if out != c.dim {
                    return Err(Error::DimensionMismatch(format!("matrix constraint {ci}: term has dimension {out}, expected {}", c.dim)));
                }
            }
            if let Some(k) = &c.constant {
                if k.dim() != c.dim {
                    return Err(Error::DimensionMismatch(format!("matrix constraint {ci}: constant has dimension {}", k.dim())));
                }
            }
        }
        if self.aux_structure == BlockStructure::Diagonal {
            self.check_diagonal()?;
        }
        Ok(())
    }

    fn check_diagonal(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidProblem(format!("diagonal auxiliary blocks need diagonal operators: {m}")));
        if let Some(s) = self.states.iter().find(|s| s.structure != BlockStructure::Diagonal) {
            return fail(format!("state '{}' is not diagonal", s.name));
        }
        for (i, t) in self.terms.iter().enumerate() {
            for sm in [&t.rho, &t.sigma] {
                let outputs: Vec<HermitianMatrix> = match sm {
                    StateMap::Free { .. } => continue,
                    StateMap::Fixed { state } => vec![state.as_hermitian().clone()],
                    StateMap::Affine { block, map } => {
                        let d = self.states[*block].dim;
                        (0..d)
                            .map(|k| {
                                let mut e = vec![0.0; d];
                                e[k] = 1.0;
                                map.apply(&HermitianMatrix::from_diagonal(&e))
                            })
                            .collect::<Result<_>>()?
                    }
                };
                for o in outputs {
                    let m = o.as_matrix();
                    let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
                    let off = (0..o.dim())
                        .flat_map(|i| (0..o.dim()).map(move |j| (i, j)))
                        .filter(|(i, j)| i != j)
                        .fold(0.0f64, |a, (i, j)| a.max(m[(i, j)].norm()));
                    if off > 1e-12 * scale {
                        return fail(format!("term {i} produces off-diagonal entries of size {off:.2e}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest violation of the state, scalar, matrix and enforced sandwich
    /// constraints at the given state values.
    pub fn max_violation(&self, states: &[HermitianMatrix]) -> Result<f64> {
        if states.len() != self.states.len() {
            return Err(Error::InvalidArgument(format!("{} values for {} state blocks", states.len(), self.states.len())));
        }
        let mut worst = 0.0f64;
        for (s, x) in self.states.iter().zip(states) {
            if x.dim() != s.dim {
                return Err(Error::DimensionMismatch(format!("state '{}' has dimension {}, got {}", s.name, s.dim, x.dim())));
            }
            worst = worst.max((x.trace() - 1.0).abs()).max(-x.min_eigenvalue());
        }
        for c in &self.constraints {
            let v = c.func.evaluate(states);
            worst = worst.max(match c.relation {
                ScalarRelation::Zero => v.abs(),
                ScalarRelation::Nonneg => -v,
            });
        }
        for c in &self.matrix_constraints {
            let mut e = c.constant.clone().unwrap_or_else(|| HermitianMatrix::zeros(c.dim));
            for t in &c.terms {
                let x = match &t.map {
                    None => states[t.block].clone(),
                    Some(m) => m.apply(&states[t.block])?,
                };
                e = &e + &x.scale(t.coeff);
            }
            worst = worst.max(match c.relation {
                MatrixRelation::Zero => e.frobenius_norm(),
                MatrixRelation::Psd => -e.min_eigenvalue(),
            });
        }
        for (t, (r, s)) in self.terms.iter().zip(self.evaluate_pairs(states)?) {
            if t.enforce_sandwich {
                worst = worst.max(-(&s.scale(t.lambda) - &r).min_eigenvalue());
                worst = worst.max(-(&r - &s.scale(t.mu)).min_eigenvalue());
            }
        }
        Ok(worst)
    }

    pub fn grids(&self) -> Vec<Grid> {
        self.terms.iter().map(|t| t.grid.clone()).collect()
    }

    pub fn with_grids(&self, grids: &[Grid]) -> Result<Self> {
        if grids.len() != self.terms.len() {
            return Err(Error::InvalidArgument(format!("{} grids for {} terms", grids.len(), self.terms.len())));
        }
        let mut p = self.clone();
        for (t, g) in p.terms.iter_mut().zip(grids) {
            t.grid = g.clone();
        }
        p.validate()?;
        Ok(p)
    }

    /// `(ρ_i, σ_i)` of every term at the given state values.
    pub fn evaluate_pairs(&self, states: &[HermitianMatrix]) -> Result<Vec<(HermitianMatrix, HermitianMatrix)>> {
        self.terms
            .iter()
            .map(|t| Ok((t.rho.evaluate(states)?, t.sigma.evaluate(states)?)))
            .collect()
    }

    /// Hash of the problem with grids removed; equal for problems that differ
    /// only in their discretization.
    pub fn fingerprint(&self) -> u64 {
        let mut p = self.clone();
        for t in &mut p.terms {
            t.grid = Grid::degenerate(1.0).expect("valid degenerate grid");
        }
        let s = serde_json::to_string(&p).unwrap_or_default();
        let mut h = DefaultHasher::new();
        s.hash(&mut h);
        h.finish()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}
