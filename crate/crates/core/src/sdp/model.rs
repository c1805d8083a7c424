//! Block-structured semidefinite programs over complex Hermitian variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, LinearMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// The block itself is constrained to be positive semidefinite.
    Psd,
    /// Unconstrained Hermitian block; other constraints must bound it.
    Free,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStructure {
    #[default]
    Full,
    /// Only real diagonal entries are variables.
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpVariableBlock {
    pub name: String,
    pub dim: usize,
    pub kind: BlockKind,
    #[serde(default)]
    pub structure: BlockStructure,
    /// Bound on the Frobenius norm of this block at some optimal solution.
    /// Used to turn dual residuals into a rigorous certification slack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_bound: Option<f64>,
}

/// `coeff · L(X_block)`; `map = None` means the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorTerm {
    pub block: usize,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<usize>,
}

/// `Σ coeff · L(X_block) + constant`, a Hermitian matrix of order `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineOperatorExpr {
    pub dim: usize,
    pub terms: Vec<OperatorTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<HermitianMatrix>,
}

impl AffineOperatorExpr {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            constant: None,
        }
    }

    pub fn term(mut self, block: usize, coeff: f64, map: Option<usize>) -> Self {
        self.terms.push(OperatorTerm { block, coeff, map });
        self
    }

    pub fn with_constant(mut self, c: HermitianMatrix) -> Self {
        self.constant = Some(match self.constant.take() {
            Some(old) => &old + &c,
            None => c,
        });
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarTerm {
    /// `scale · tr X_block`.
    Trace { block: usize, scale: f64 },
    /// `tr(C X_block)`.
    Inner { block: usize, matrix: HermitianMatrix },
}

impl ScalarTerm {
    pub fn block(&self) -> usize {
        match self {
            Self::Trace { block, .. } | Self::Inner { block, .. } => *block,
        }
    }
}

/// Real affine functional `Σ terms + constant`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarFunctional {
    pub terms: Vec<ScalarTerm>,
    #[serde(default)]
    pub constant: f64,
}

impl ScalarFunctional {
    pub fn trace(mut self, block: usize, scale: f64) -> Self {
        self.terms.push(ScalarTerm::Trace { block, scale });
        self
    }

    pub fn inner(mut self, block: usize, matrix: HermitianMatrix) -> Self {
        self.terms.push(ScalarTerm::Inner { block, matrix });
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Evaluates the functional at the given block values.
    pub fn evaluate(&self, blocks: &[HermitianMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                ScalarTerm::Trace { block, scale } => scale * blocks[*block].trace(),
                ScalarTerm::Inner { block, matrix } => matrix.inner(&blocks[*block]),
            })
            .sum::<f64>()
            + self.constant
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixRelation {
    /// Expression ⪰ 0.
    Psd,
    /// Expression = 0.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarRelation {
    /// Functional ≥ 0.
    Nonneg,
    /// Functional = 0.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConstraint {
    pub expr: AffineOperatorExpr,
    pub relation: MatrixRelation,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarConstraint {
    pub func: ScalarFunctional,
    pub relation: ScalarRelation,
}

/// `minimize objective` subject to matrix and scalar constraints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpProblem {
    pub blocks: Vec<SdpVariableBlock>,
    /// Linear maps referenced by index from operator terms.
    #[serde(default)]
    pub maps: Vec<LinearMap>,
    pub objective: ScalarFunctional,
    #[serde(default)]
    pub constraints: Vec<MatrixConstraint>,
    #[serde(default)]
    pub scalar_constraints: Vec<ScalarConstraint>,
}

impl SdpProblem {
    pub fn add_block(&mut self, name: impl Into<String>, dim: usize, kind: BlockKind) -> usize {
        self.blocks.push(SdpVariableBlock {
            name: name.into(),
            dim,
            kind,
            structure: BlockStructure::Full,
            norm_bound: None,
        });
        self.blocks.len() - 1
    }

    pub fn add_map(&mut self, map: LinearMap) -> usize {
        self.maps.push(map);
        self.maps.len() - 1
    }

    pub fn add_constraint(&mut self, expr: AffineOperatorExpr, relation: MatrixRelation, label: impl Into<String>) {
        self.constraints.push(MatrixConstraint {
            expr,
            relation,
            label: label.into(),
        });
    }

    pub fn add_scalar_constraint(&mut self, func: ScalarFunctional, relation: ScalarRelation) {
        self.scalar_constraints.push(ScalarConstraint { func, relation });
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProblem(m));
        for (i, b) in self.blocks.iter().enumerate() {
            if b.dim == 0 {
                return bad(format!("block '{}' has dimension 0", b.name));
            }
            if self.blocks[..i].iter().any(|o| o.name == b.name) {
                return bad(format!("duplicate block name '{}'", b.name));
            }
            if let Some(nb) = b.norm_bound {
                if !(nb >= 0.0) || !nb.is_finite() {
                    return bad(format!("block '{}' has invalid norm bound {nb}", b.name));
                }
            }
        }
        let check_block = |blk: usize| -> Result<()> {
            if blk >= self.blocks.len() {
                return Err(Error::InvalidProblem(format!("reference to missing block {blk}")));
            }
            Ok(())
        };
        for t in &self.objective.terms {
            check_block(t.block())?;
        }
        for sc in &self.scalar_constraints {
            for t in &sc.func.terms {
                check_block(t.block())?;
            }
        }
        for (ci, c) in self.constraints.iter().enumerate() {
            let e = &c.expr;
            if let Some(k) = &e.constant {
                if k.dim() != e.dim {
                    return bad(format!("constraint {ci}: constant has dimension {}, expected {}", k.dim(), e.dim));
                }
            }
            for t in &e.terms {
                check_block(t.block)?;
                if !t.coeff.is_finite() {
                    return bad(format!("constraint {ci}: non-finite coefficient"));
                }
                let input = self.blocks[t.block].dim;
                let out = match t.map {
                    None => input,
                    Some(m) => self
                        .maps
                        .get(m)
                        .ok_or_else(|| Error::InvalidProblem(format!("constraint {ci}: missing map {m}")))?
                        .output_dim(input)?,
                };
                if out != e.dim {
                    return bad(format!("constraint {ci}: term maps block '{}' to dimension {out}, expected {}", self.blocks[t.block].name, e.dim));
                }
            }
        }
        let check_scalar = |f: &ScalarFunctional| -> Result<()> {
            for t in &f.terms {
                if let ScalarTerm::Inner { block, matrix } = t {
                    if matrix.dim() != self.blocks[*block].dim {
                        return Err(Error::InvalidProblem(format!(
                            "inner-product coefficient of dimension {} for block '{}' of dimension {}",
                            matrix.dim(),
                            self.blocks[*block].name,
                            self.blocks[*block].dim
                        )));
                    }
                }
            }
            Ok(())
        };
        check_scalar(&self.objective)?;
        for sc in &self.scalar_constraints {
            check_scalar(&sc.func)?;
        }
        Ok(())
    }

    /// Evaluates a matrix expression at the given block values.
    pub fn evaluate_expr(&self, expr: &AffineOperatorExpr, blocks: &[HermitianMatrix]) -> Result<HermitianMatrix> {
        let mut acc = expr.constant.clone().unwrap_or_else(|| HermitianMatrix::zeros(expr.dim));
        for t in &expr.terms {
            let v = match t.map {
                None => blocks[t.block].clone(),
                Some(m) => self.maps[m].apply(&blocks[t.block])?,
            };
            acc = &acc + &v.scale(t.coeff);
        }
        Ok(acc)
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
