//! Lower and upper SDP relaxations of constrained relative entropy
//! minimization, certification of the gap, and grid refinement.

mod build;
mod problem;
mod refine;
mod solve;

pub use build::{build_lower, build_upper, effective_grid, lower_objective_at, upper_objective_at, Side};
pub use problem::{RelEntProblem, RelEntTerm, StateBlock, StateMap, StateMatrixConstraint, StateOperatorTerm};
pub use refine::{refine_until, IterationRecord, RefineOptions, RefineStatus, RefinementReport};
pub use solve::{gap, solve_lower, solve_upper, validate_interior, BoundResult};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{eta_lower_fixed, relative_entropy_exact, sandwich_constants, upper_fixed, StatePair};
    use crate::gridding::{uniform_grid, Grid, RefineStrategy};
    use crate::linalg::random::{random_density, rng_from_seed};
    use crate::linalg::{DensityMatrix, HermitianMatrix};
    use crate::sdp::{MatrixRelation, ScalarConstraint, ScalarFunctional, ScalarRelation, SolverSettings};

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    fn fixed_problem(pair: &StatePair, grid: Grid) -> RelEntProblem {
        RelEntProblem {
            states: vec![],
            terms: vec![RelEntTerm {
                weight: 1.0,
                rho: StateMap::fixed(pair.rho.clone()),
                sigma: StateMap::fixed(pair.sigma.clone()),
                mu: grid.mu(),
                lambda: grid.lambda(),
                grid,
                enforce_sandwich: true,
            }],
            constraints: vec![],
            matrix_constraints: vec![],
            aux_structure: Default::default(),
        }
    }

    fn free_problem(d: usize, mu: f64, lambda: f64) -> RelEntProblem {
        RelEntProblem {
            states: vec![StateBlock::new("rho", d), StateBlock::new("sigma", d)],
            terms: vec![RelEntTerm {
                weight: 1.0,
                rho: StateMap::free(0),
                sigma: StateMap::free(1),
                mu,
                lambda,
                grid: uniform_grid(mu, lambda, 6, 1e-4).unwrap(),
                enforce_sandwich: true,
            }],
            constraints: vec![],
            matrix_constraints: vec![],
            aux_structure: Default::default(),
        }
    }

    fn random_pair(d: usize, seed: u64) -> StatePair {
        let mut rng = rng_from_seed(seed);
        let rho = random_density(d, &mut rng);
        let sigma = random_density(d, &mut rng);
        StatePair::new(rho, sigma).unwrap()
    }

    fn grid_for(pair: &StatePair, n: usize) -> Grid {
        let sc = sandwich_constants(pair);
        uniform_grid(sc.mu, sc.lambda, n, 0.0).unwrap()
    }

    #[test]
    fn fixed_pair_matches_closed_forms() {
        for (d, seed) in [(2, 1), (3, 2), (4, 3)] {
            let pair = random_pair(d, seed);
            let grid = effective_grid(&grid_for(&pair, 8)).unwrap();
            let p = fixed_problem(&pair, grid.clone());
            let lo = solve_lower(&p, &settings()).unwrap();
            let up = solve_upper(&p, &settings()).unwrap();
            let el = eta_lower_fixed(&pair, &grid).unwrap();
            let eu = upper_fixed(&pair, &grid).unwrap();
            assert!((lo.raw_value - el).abs() < 1e-7, "d={d}: {} vs {el}", lo.raw_value);
            assert!(lo.value <= el + 1e-12 && lo.value > el - 1e-7, "d={d}: certified {}", lo.value);
            assert!((up.raw_value - eu).abs() < 1e-7, "d={d}: {} vs {eu}", up.raw_value);
            assert!((up.value - eu).abs() < 1e-9);
            let exact = relative_entropy_exact(&pair).unwrap();
            assert!(lo.value <= exact && exact <= up.value);
            assert!(gap(&lo, &up).unwrap() >= 0.0);
            assert!(!validate_interior(&p, &lo), "fixed pair binds its own constants");
        }
    }

    #[test]
    fn objective_constant_reproduces_closed_form() {
        let pair = random_pair(3, 9);
        let grid = effective_grid(&grid_for(&pair, 7)).unwrap();
        let p = fixed_problem(&pair, grid.clone());
        let l = lower_objective_at(&p, &[]).unwrap();
        assert!((l - eta_lower_fixed(&pair, &grid).unwrap()).abs() < 1e-12);
        let u = upper_objective_at(&p, &[]).unwrap();
        assert!((u - upper_fixed(&pair, &grid).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_free_states_give_zero() {
        for mu in [0.0, 0.2] {
            let p = free_problem(2, mu, 3.0);
            let lo = solve_lower(&p, &settings()).unwrap();
            let up = solve_upper(&p, &settings()).unwrap();
            assert!(lo.value.abs() < 1e-6 && lo.value <= 1e-12, "{}", lo.value);
            assert!(up.value.abs() < 1e-6, "{}", up.value);
        }
    }

    #[test]
    fn forced_equal_states_give_zero() {
        let mut p = free_problem(2, 0.0, 2.0);
        p.matrix_constraints.push(StateMatrixConstraint {
            dim: 2,
            terms: vec![
                StateOperatorTerm { block: 0, coeff: 1.0, map: None },
                StateOperatorTerm { block: 1, coeff: -1.0, map: None },
            ],
            constant: None,
            relation: MatrixRelation::Zero,
            label: "rho = sigma".into(),
        });
        let z = HermitianMatrix::from_diagonal(&[1.0, -1.0]);
        p.constraints.push(ScalarConstraint {
            func: ScalarFunctional::default().inner(0, z).plus(-0.4),
            relation: ScalarRelation::Zero,
        });
        let lo = solve_lower(&p, &settings()).unwrap();
        let up = solve_upper(&p, &settings()).unwrap();
        assert!(lo.value.abs() < 1e-6 && up.value.abs() < 1e-6, "{} {}", lo.value, up.value);
    }

    #[test]
    fn infeasible_constraints_are_reported() {
        let mut p = free_problem(2, 0.0, 2.0);
        p.constraints.push(ScalarConstraint {
            func: ScalarFunctional::default().trace(0, 1.0).plus(-2.0),
            relation: ScalarRelation::Zero,
        });
        assert!(matches!(solve_lower(&p, &settings()), Err(crate::Error::Infeasible(_))));
    }

    #[test]
    fn witness_instance_brackets_oracle() {
        // ρ pinned to a fixed state by its diagonal and coherence, σ diagonal and free:
        // the minimum is D(ρ‖diag ρ) at σ = diag ρ.
        let rho = DensityMatrix::pure(&nalgebra::DVector::from_vec(vec![
            num_complex::Complex64::new(0.8f64.sqrt(), 0.0),
            num_complex::Complex64::new(0.2f64.sqrt(), 0.0),
        ]))
        .unwrap()
        .mix(&DensityMatrix::maximally_mixed(2), 0.3)
        .unwrap();
        let mut p = free_problem(2, 0.0, 4.0);
        p.terms[0].rho = StateMap::fixed(rho.clone());
        p.states.remove(0);
        p.terms[0].sigma = StateMap::free(0);
        let pinch = crate::linalg::LinearMap::kraus(crate::linalg::KrausChannel::computational_pinching(2).operators().to_vec()).unwrap();
        p.matrix_constraints.push(StateMatrixConstraint {
            dim: 2,
            terms: vec![
                StateOperatorTerm { block: 0, coeff: 1.0, map: None },
                StateOperatorTerm { block: 0, coeff: -1.0, map: Some(pinch) },
            ],
            constant: None,
            relation: MatrixRelation::Zero,
            label: "sigma diagonal".into(),
        });
        let report = refine_until(
            &p,
            &RefineOptions {
                target_eps: 1e-4,
                strategy: RefineStrategy::AdaptiveTighten,
                budget: 12,
                factor: Default::default(),
            },
            &settings(),
        )
        .unwrap();
        let diag = DensityMatrix::normalized(HermitianMatrix::from_diagonal(&[
            rho.as_hermitian().as_matrix()[(0, 0)].re,
            rho.as_hermitian().as_matrix()[(1, 1)].re,
        ]))
        .unwrap();
        let exact = relative_entropy_exact(&StatePair::new(rho, diag).unwrap()).unwrap();
        assert_eq!(report.status, RefineStatus::GapMet, "{:?}", report.iterations);
        assert!(report.best_lower.value <= exact + 1e-9 && exact <= report.best_upper.value + 1e-7);
        for w in report.iterations.windows(2) {
            assert!(w[1].lower >= w[0].lower - 2e-8);
        }
        for r in &report.iterations {
            assert_eq!(r.gap, r.upper - r.lower);
        }
    }

    #[test]
    fn trivial_problem_terminates_immediately() {
        let p = free_problem(2, 0.0, 2.0);
        let opts = RefineOptions {
            target_eps: 1e-4,
            strategy: RefineStrategy::UniformHalve,
            budget: 5,
            factor: Default::default(),
        };
        let r = refine_until(&p, &opts, &settings()).unwrap();
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.status, RefineStatus::GapMet);
        assert!(r.plot_rows().starts_with("# iteration c_l c_u gap\n"));
    }

    #[test]
    fn validation_errors() {
        let mut p = free_problem(2, 0.0, 2.0);
        p.terms[0].weight = -1.0;
        assert!(p.validate().is_err());
        let mut p = free_problem(2, 0.0, 2.0);
        p.terms[0].sigma = StateMap::free(5);
        assert!(p.validate().is_err());
        let mut p = free_problem(2, 0.0, 2.0);
        p.states[1].dim = 3;
        assert!(build_lower(&p).is_err());
        let mut p = free_problem(2, 0.0, 2.0);
        p.terms[0].lambda = 3.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn gap_rejects_mismatched_problems() {
        let a = random_pair(2, 4);
        let b = random_pair(2, 5);
        let pa = fixed_problem(&a, grid_for(&a, 4));
        let pb = fixed_problem(&b, grid_for(&b, 4));
        let lo = solve_lower(&pa, &settings()).unwrap();
        let up = solve_upper(&pb, &settings()).unwrap();
        assert!(gap(&lo, &up).is_err());
        assert!(gap(&up, &lo).is_err());
        let pa2 = pa.with_grids(&[grid_for(&a, 9)]).unwrap();
        assert!(gap(&lo, &solve_upper(&pa2, &settings()).unwrap()).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let p = free_problem(2, 0.1, 2.0);
        let s = p.to_json().unwrap();
        assert_eq!(RelEntProblem::from_json(&s).unwrap(), p);
        assert!(RelEntProblem::from_json(&s.replacen("\"terms\"", "\"extra\": 0, \"terms\"", 1)).is_err());
    }
}
