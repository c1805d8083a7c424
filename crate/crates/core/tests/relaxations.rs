use proptest::prelude::*;
use relent::bounds::{
    build_lower, effective_grid, lower_objective_at, solve_lower, solve_upper, upper_objective_at, RelEntProblem, RelEntTerm, StateBlock,
    StateMap,
};
use relent::divergence::{eta_lower_fixed, relative_entropy_exact, sandwich_constants, upper_fixed, StatePair};
use relent::gridding::{adaptive_grid, AdaptiveFactor};
use relent::instances::{generic_instance, isotropic, ree_instance, DEFAULT_REE_LAMBDA};
use relent::linalg::random::{random_density, rng_from_seed};
use relent::sdp::{solve, ScalarFunctional, ScalarTerm, SolverSettings};

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn free_pair_problem(d: usize, eps: f64) -> RelEntProblem {
    let (mu, lambda) = (0.05, 20.0);
    RelEntProblem {
        states: vec![StateBlock::new("rho", d), StateBlock::new("sigma", d)],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::free(0),
            sigma: StateMap::free(1),
            mu,
            lambda,
            grid: adaptive_grid(mu, lambda, eps, AdaptiveFactor::Eight).unwrap(),
            enforce_sandwich: true,
        }],
        constraints: vec![],
        matrix_constraints: vec![],
        aux_structure: Default::default(),
    }
}

fn scaled(f: &ScalarFunctional, c: f64) -> ScalarFunctional {
    ScalarFunctional {
        terms: f
            .terms
            .iter()
            .map(|t| match t {
                ScalarTerm::Trace { block, scale } => ScalarTerm::Trace { block: *block, scale: c * scale },
                ScalarTerm::Inner { block, matrix } => ScalarTerm::Inner {
                    block: *block,
                    matrix: matrix.scale(c),
                },
            })
            .collect(),
        constant: c * f.constant,
    }
}

#[test]
fn generic_bounds_bracket_the_witness() {
    let s = settings();
    for (d, seed) in [(2, 1), (2, 2), (3, 3), (3, 4)] {
        let g = generic_instance(d, seed).unwrap();
        let witness = relative_entropy_exact(&StatePair::new(g.witness_rho.clone(), g.witness_sigma.clone()).unwrap()).unwrap();
        let lo = solve_lower(&g.problem, &s).unwrap();
        let up = solve_upper(&g.problem, &s).unwrap();
        assert!(lo.value <= witness, "d={d} seed={seed}: {} > {witness}", lo.value);
        assert!(up.value >= lo.value - 2.0 * s.eps_gap, "d={d} seed={seed}: {} < {}", up.value, lo.value);
        assert!(g.problem.max_violation(&up.states).unwrap() < 1e-6);
    }
}

#[test]
fn ree_lower_bound_is_below_the_closest_separable_state() {
    let rho = isotropic(0.3, 2).unwrap();
    let sigma = isotropic(2.0 / 3.0, 2).unwrap();
    let p = ree_instance(&rho, DEFAULT_REE_LAMBDA).unwrap();
    assert!(p.max_violation(&[sigma.as_hermitian().clone()]).unwrap() < 1e-8);
    let witness = relative_entropy_exact(&StatePair::new(rho, sigma).unwrap()).unwrap();
    assert!(solve_lower(&p, &settings()).unwrap().value <= witness);
}

#[test]
fn finer_grids_never_lower_the_certified_bound() {
    let s = settings();
    let g = generic_instance(2, 11).unwrap();
    let coarse = g.problem.grids()[0].clone();
    let mut prev = solve_lower(&g.problem, &s).unwrap().value;
    let mut grid = coarse;
    for extra in [[0.3, 2.5], [0.7, 9.0], [0.09, 1.6]] {
        grid = grid.with_points(&extra).unwrap();
        let v = solve_lower(&g.problem.with_grids(std::slice::from_ref(&grid)).unwrap(), &s).unwrap().value;
        assert!(prev <= v + 2.0 * s.eps_gap, "{prev} > {v}");
        prev = v;
    }
}

#[test]
fn weak_duality_holds() {
    let s = settings();
    let problems = [
        generic_instance(2, 5).unwrap().problem,
        generic_instance(3, 6).unwrap().problem,
        ree_instance(&isotropic(0.1, 2).unwrap(), DEFAULT_REE_LAMBDA).unwrap(),
    ];
    for p in &problems {
        let sdp = build_lower(p).unwrap();
        let sol = solve(&sdp, &s).unwrap();
        assert!(sol.status.is_solved(), "{:?}: {}", sol.status, sol.message);
        assert!(sol.dual_value <= sol.primal_value + s.eps_gap, "{} > {}", sol.dual_value, sol.primal_value);
    }
}

#[test]
fn scaling_the_objective_scales_the_value() {
    let s = settings();
    let sdp = build_lower(&generic_instance(2, 8).unwrap().problem).unwrap();
    let base = solve(&sdp, &s).unwrap();
    for c in [0.5, 4.0] {
        let mut q = sdp.clone();
        q.objective = scaled(&sdp.objective, c);
        let sol = solve(&q, &s).unwrap();
        assert!((sol.primal_value - c * base.primal_value).abs() <= 1e-6 * c.max(1.0), "c={c}");
        for k in 0..2 {
            assert!((&sol.blocks[k] - &base.blocks[k]).frobenius_norm() <= 1e-6, "c={c} block {k}");
        }
    }
}

#[test]
fn solves_are_deterministic_across_serialization() {
    let s = settings();
    let p = generic_instance(3, 9).unwrap().problem;
    let q = RelEntProblem::from_json(&p.to_json().unwrap()).unwrap();
    let a = solve_lower(&p, &s).unwrap();
    let b = solve_lower(&q, &s).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    let a = solve_upper(&p, &s).unwrap();
    let b = solve_upper(&q, &s).unwrap();
    assert!((a.value - b.value).abs() <= 1e-12);
}

#[test]
fn unconstrained_free_pair_has_zero_minimum() {
    let s = settings();
    let p = free_pair_problem(2, 0.05);
    let lo = solve_lower(&p, &s).unwrap();
    let up = solve_upper(&p, &s).unwrap();
    assert!(lo.value <= 1e-7 && lo.value > -1e-6, "{}", lo.value);
    assert!(up.value >= lo.value && up.value < 1e-6, "{}", up.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn objective_at_a_pair_matches_the_closed_forms(d in 2usize..5, seed in any::<u64>(), eps in 0.005f64..0.2) {
        let mut rng = rng_from_seed(seed);
        let pair = StatePair::new(random_density(d, &mut rng), random_density(d, &mut rng)).unwrap();
        let sc = sandwich_constants(&pair);
        let mu = sc.mu * 0.9;
        let lambda = sc.lambda * 1.1;
        let grid = effective_grid(&adaptive_grid(mu, lambda, eps, AdaptiveFactor::Eight).unwrap()).unwrap();
        let mut p = free_pair_problem(d, eps);
        p.terms[0].mu = mu;
        p.terms[0].lambda = lambda;
        p.terms[0].grid = grid.clone();
        let x = [pair.rho.as_hermitian().clone(), pair.sigma.as_hermitian().clone()];
        let lo = lower_objective_at(&p, &x).unwrap();
        let up = upper_objective_at(&p, &x).unwrap();
        prop_assert!((lo - eta_lower_fixed(&pair, &grid).unwrap()).abs() <= 1e-10, "{lo}");
        prop_assert!((up - upper_fixed(&pair, &grid).unwrap()).abs() <= 1e-10, "{up}");
    }
}
