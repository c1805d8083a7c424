//! Randomly generated constrained instance: two free states separated by a
//! linear witness.

use serde::{Deserialize, Serialize};

use super::initial_grid;
use crate::bounds::{RelEntProblem, RelEntTerm, StateBlock, StateMap};
use crate::error::{Error, Result};
use crate::linalg::random::{random_density, rng_from_seed};
use crate::linalg::{DensityMatrix, HermitianMatrix};
use crate::sdp::{ScalarConstraint, ScalarFunctional, ScalarRelation};

pub const GENERIC_MU: f64 = 0.05;
pub const GENERIC_LAMBDA: f64 = 20.0;

/// Problem together with the pair it was generated from, which is feasible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericInstance {
    pub problem: RelEntProblem,
    pub witness_rho: DensityMatrix,
    pub witness_sigma: DensityMatrix,
}

/// `min D(ρ‖σ)` over `d`-dimensional states with `tr(Wρ) − tr(Wσ) ≥ δ` and
/// sandwich `(0.05, 20)`. A random pair `(ρ₀, σ₀)`, mixed halfway with
/// `1/d`, sets `W = ρ₀ − σ₀` and `δ = ‖ρ₀ − σ₀‖₂²/2`. Its eigenvalues lie in
/// `[1/(2d), 1/2 + 1/(2d)]`, so it sits strictly inside the sandwich for `d ≤ 9`.
pub fn generic_instance(d: usize, seed: u64) -> Result<GenericInstance> {
    if !(2..=9).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension must lie in 2..=9, got {d}")));
    }
    let mut rng = rng_from_seed(seed);
    let mm = DensityMatrix::maximally_mixed(d);
    let rho = random_density(d, &mut rng).mix(&mm, 0.5)?;
    let sigma = random_density(d, &mut rng).mix(&mm, 0.5)?;
    let w: HermitianMatrix = rho.as_hermitian() - sigma.as_hermitian();
    let delta = 0.5 * w.inner(&w);
    let problem = RelEntProblem {
        states: vec![StateBlock::new("rho", d), StateBlock::new("sigma", d)],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::free(0),
            sigma: StateMap::free(1),
            mu: GENERIC_MU,
            lambda: GENERIC_LAMBDA,
            grid: initial_grid(GENERIC_MU, GENERIC_LAMBDA)?,
            enforce_sandwich: true,
        }],
        constraints: vec![ScalarConstraint {
            func: ScalarFunctional::default().inner(0, w.clone()).inner(1, -&w).plus(-delta),
            relation: ScalarRelation::Nonneg,
        }],
        matrix_constraints: vec![],
        aux_structure: Default::default(),
    };
    problem.validate()?;
    Ok(GenericInstance {
        problem,
        witness_rho: rho,
        witness_sigma: sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{solve_lower, solve_upper, validate_interior};
    use crate::divergence::{relative_entropy_exact, sandwich_constants, StatePair};
    use crate::sdp::SolverSettings;

    #[test]
    fn witness_is_feasible_and_strictly_inside() {
        let g = generic_instance(3, 7).unwrap();
        let x = [g.witness_rho.as_hermitian().clone(), g.witness_sigma.as_hermitian().clone()];
        assert!(g.problem.max_violation(&x).unwrap() < 1e-8);
        let sc = sandwich_constants(&StatePair::new(g.witness_rho.clone(), g.witness_sigma.clone()).unwrap());
        assert!(sc.mu > GENERIC_MU && sc.lambda < GENERIC_LAMBDA);
    }

    #[test]
    fn bounds_bracket_the_witness_value() {
        let g = generic_instance(3, 7).unwrap();
        let s = SolverSettings::default();
        let lo = solve_lower(&g.problem, &s).unwrap();
        let up = solve_upper(&g.problem, &s).unwrap();
        let at_witness = relative_entropy_exact(&StatePair::new(g.witness_rho, g.witness_sigma).unwrap()).unwrap();
        assert!(lo.value <= up.value && lo.value <= at_witness);
        assert!(lo.value > 0.0, "the witness excludes ρ = σ");
        assert!(validate_interior(&g.problem, &up));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generic_instance(3, 1).unwrap(), generic_instance(3, 1).unwrap());
        assert_ne!(generic_instance(3, 1).unwrap(), generic_instance(3, 2).unwrap());
        assert!(generic_instance(1, 0).is_err());
    }
}
