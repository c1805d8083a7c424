//! Entropy maximization: `H(ρ) = log d − D(ρ ‖ 1/d)` and
//! `H(A|B) = log d_A − D(ρ_AB ‖ 1_A/d_A ⊗ ρ_B)` under affine constraints.

use serde::{Deserialize, Serialize};

use super::initial_grid;
use crate::bounds::{RelEntProblem, RelEntTerm, StateBlock, StateMap, StateMatrixConstraint, StateOperatorTerm};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, HermitianMatrix, LinearMap, Subsystem};
use crate::sdp::{MatrixRelation, ScalarConstraint, ScalarFunctional, ScalarRelation};

/// Affine constraints on the single state block `ρ` (block index 0).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConstraints {
    #[serde(default)]
    pub scalar: Vec<ScalarConstraint>,
    #[serde(default)]
    pub matrix: Vec<StateMatrixConstraint>,
}

impl StateConstraints {
    /// Adds `tr(op ρ) = value`.
    pub fn expectation(mut self, op: HermitianMatrix, value: f64) -> Self {
        self.scalar.push(ScalarConstraint {
            func: ScalarFunctional::default().inner(0, op).plus(-value),
            relation: ScalarRelation::Zero,
        });
        self
    }

    /// Adds `ρ = state`.
    pub fn fix_state(mut self, state: &DensityMatrix) -> Self {
        self.matrix.push(StateMatrixConstraint {
            dim: state.dim(),
            terms: vec![StateOperatorTerm {
                block: 0,
                coeff: 1.0,
                map: None,
            }],
            constant: Some(-state.as_hermitian()),
            relation: MatrixRelation::Zero,
            label: "rho fixed".into(),
        });
        self
    }
}

fn single_state(dim: usize, sigma: StateMap, lambda: f64, constraints: &StateConstraints) -> Result<RelEntProblem> {
    let problem = RelEntProblem {
        states: vec![StateBlock::new("rho", dim)],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::free(0),
            sigma,
            mu: 0.0,
            lambda,
            grid: initial_grid(0.0, lambda)?,
            enforce_sandwich: false,
        }],
        constraints: constraints.scalar.clone(),
        matrix_constraints: constraints.matrix.clone(),
        aux_structure: Default::default(),
    };
    problem.validate()?;
    Ok(problem)
}

/// `min D(ρ ‖ 1/d)`; the entropy is `log d` minus the minimum. `ρ ⪯ d · 1/d`
/// holds for every state, so the sandwich is not enforced.
pub fn entropy_max_instance(d: usize, constraints: &StateConstraints) -> Result<RelEntProblem> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
    }
    single_state(d, StateMap::fixed(DensityMatrix::maximally_mixed(d)), d as f64, constraints)
}

/// `min D(ρ_AB ‖ 1_A/d_A ⊗ ρ_B)`; the conditional entropy is `log d_A` minus
/// the minimum. The sandwich constant `d_A²` always holds.
pub fn cond_entropy_instance(dims: (usize, usize), constraints: &StateConstraints) -> Result<RelEntProblem> {
    let (da, db) = dims;
    if da < 2 || db < 1 {
        return Err(Error::InvalidArgument(format!("invalid local dimensions {da}x{db}")));
    }
    let map = LinearMap::PartialTrace { dims, keep: Subsystem::B }.then(LinearMap::TensorLeft {
        fixed: HermitianMatrix::identity(da).scale(1.0 / da as f64),
    });
    single_state(da * db, StateMap::affine(0, map), (da * da) as f64, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{refine_until, solve_lower, solve_upper, RefineOptions};
    use crate::gridding::RefineStrategy;
    use crate::instances::max_entangled;
    use crate::sdp::SolverSettings;

    fn opts(eps: f64) -> RefineOptions {
        RefineOptions {
            target_eps: eps,
            strategy: RefineStrategy::AdaptiveTighten,
            budget: 10,
            factor: Default::default(),
        }
    }

    #[test]
    fn unconstrained_entropy_is_maximal() {
        let p = entropy_max_instance(3, &StateConstraints::default()).unwrap();
        let s = SolverSettings::default();
        let (lo, up) = (solve_lower(&p, &s).unwrap(), solve_upper(&p, &s).unwrap());
        assert!(lo.value.abs() < 1e-6 && up.value.abs() < 1e-6, "{} {}", lo.value, up.value);
    }

    #[test]
    fn pinned_qubit_has_zero_entropy() {
        let c = StateConstraints::default().expectation(HermitianMatrix::from_diagonal(&[1.0, -1.0]), 1.0);
        let p = entropy_max_instance(2, &c).unwrap();
        let witness = DensityMatrix::basis(2, 0);
        assert!(p.max_violation(&[witness.as_hermitian().clone()]).unwrap() < 1e-8);
        let r = refine_until(&p, &opts(1e-3), &SolverSettings::default()).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(r.best_lower.value <= ln2 + 1e-7 && ln2 <= r.best_upper.value + 1e-7);
        assert!(r.final_gap <= 1e-3);
    }

    #[test]
    fn maximally_entangled_conditional_entropy() {
        let d = 2;
        let w = max_entangled(d).unwrap();
        let c = StateConstraints::default().fix_state(&w);
        let p = cond_entropy_instance((d, d), &c).unwrap();
        assert!(p.max_violation(&[w.as_hermitian().clone()]).unwrap() < 1e-8);
        let r = refine_until(&p, &opts(1e-3), &SolverSettings::default()).unwrap();
        // H(A|B) = −log d, so the minimum is 2 log d.
        let min = 2.0 * (d as f64).ln();
        assert!(r.best_lower.value <= min + 1e-7 && min <= r.best_upper.value + 1e-7, "{} {}", r.best_lower.value, r.best_upper.value);
        assert!(r.final_gap <= 1e-3);
    }

    #[test]
    fn constraints_round_trip() {
        let c = StateConstraints::default()
            .expectation(HermitianMatrix::identity(2), 1.0)
            .fix_state(&DensityMatrix::maximally_mixed(2));
        let back: StateConstraints = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
