//! Semidefinite programming: problem model, real embedding, interior-point
//! solver and dual certification.

mod certify;
mod cone;
mod embed;
mod kkt;
mod model;
mod solver;

pub use certify::{certify_lower, Certificate};
pub use embed::{embed_hermitian, unembed_hermitian};
pub use model::{
    AffineOperatorExpr, BlockKind, BlockStructure, MatrixConstraint, MatrixRelation, OperatorTerm, ScalarConstraint, ScalarFunctional,
    ScalarRelation, ScalarTerm, SdpProblem, SdpVariableBlock,
};
pub use solver::{solve, SdpSolution, SolveStatus, SolverSettings};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_hermitian, rng_from_seed};
    use crate::linalg::{HermitianMatrix, LinearMap, Subsystem};

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn trace_above_identity() {
        let mut p = SdpProblem::default();
        let x = p.add_block("X", 2, BlockKind::Free);
        p.objective = ScalarFunctional::default().trace(x, 1.0);
        p.add_constraint(
            AffineOperatorExpr::new(2).term(x, 1.0, None).with_constant(HermitianMatrix::identity(2).scale(-1.0)),
            MatrixRelation::Psd,
            "X ⪰ I",
        );
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 2.0).abs() < 1e-7, "{}", sol.primal_value);
        assert!((&sol.blocks[x] - &HermitianMatrix::identity(2)).frobenius_norm() < 1e-6);
    }

    #[test]
    fn min_eigenvalue_by_sdp() {
        let mut rng = rng_from_seed(21);
        for d in [2, 3, 5] {
            let c = random_hermitian(d, &mut rng);
            let mut p = SdpProblem::default();
            let x = p.add_block("X", d, BlockKind::Psd);
            p.blocks[x].norm_bound = Some(1.0);
            p.objective = ScalarFunctional::default().inner(x, c.clone());
            p.add_scalar_constraint(ScalarFunctional::default().trace(x, 1.0).plus(-1.0), ScalarRelation::Zero);
            let sol = solve(&p, &settings()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            let lmin = c.min_eigenvalue();
            assert!((sol.primal_value - lmin).abs() < 1e-7, "d={d}: {} vs {lmin}", sol.primal_value);
            let cert = certify_lower(&p, &sol).unwrap();
            assert!(cert.rigorous);
            assert!(cert.value <= lmin + 1e-12 && cert.value > lmin - 1e-6, "{cert:?} vs {lmin}");
        }
    }

    #[test]
    fn complex_coupling_through_maps() {
        // min tr(C ρ_A) over states ρ_AB with ρ_AB ⪰ 0 reduces to λ_min(C).
        let mut rng = rng_from_seed(8);
        let c = random_hermitian(2, &mut rng);
        let mut p = SdpProblem::default();
        let rho = p.add_block("rho", 4, BlockKind::Psd);
        let a = p.add_block("a", 2, BlockKind::Free);
        let tr_b = p.add_map(LinearMap::PartialTrace {
            dims: (2, 2),
            keep: Subsystem::A,
        });
        p.add_constraint(AffineOperatorExpr::new(2).term(rho, 1.0, Some(tr_b)).term(a, -1.0, None), MatrixRelation::Zero, "");
        p.add_scalar_constraint(ScalarFunctional::default().trace(rho, 1.0).plus(-1.0), ScalarRelation::Zero);
        p.objective = ScalarFunctional::default().inner(a, c.clone());
        let sol = solve(&p, &settings()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - c.min_eigenvalue()).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = SdpProblem::default();
        let x = p.add_block("X", 2, BlockKind::Psd);
        p.objective = ScalarFunctional::default().trace(x, 1.0);
        p.add_scalar_constraint(ScalarFunctional::default().trace(x, 1.0).plus(1.0), ScalarRelation::Zero);
        assert_eq!(solve(&p, &settings()).unwrap().status, SolveStatus::Infeasible);

        let mut q = SdpProblem::default();
        let x = q.add_block("X", 2, BlockKind::Psd);
        q.objective = ScalarFunctional::default().trace(x, -1.0);
        assert_eq!(solve(&q, &settings()).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn deterministic_and_scale_covariant() {
        let mut rng = rng_from_seed(2);
        let c = random_hermitian(3, &mut rng);
        let build = |scale: f64| {
            let mut p = SdpProblem::default();
            let x = p.add_block("X", 3, BlockKind::Psd);
            p.objective = ScalarFunctional::default().inner(x, c.scale(scale));
            p.add_scalar_constraint(ScalarFunctional::default().trace(x, 1.0).plus(-1.0), ScalarRelation::Zero);
            p
        };
        let a = solve(&build(1.0), &settings()).unwrap();
        let b = solve(&build(1.0), &settings()).unwrap();
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_eq!(a.blocks, b.blocks);
        let s = solve(&build(10.0), &settings()).unwrap();
        assert!((s.primal_value - 10.0 * a.primal_value).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let mut p = SdpProblem::default();
        let x = p.add_block("X", 2, BlockKind::Psd);
        let m = p.add_map(LinearMap::PartialTranspose {
            dims: (1, 2),
            sys: Subsystem::B,
        });
        p.add_constraint(AffineOperatorExpr::new(2).term(x, 1.0, Some(m)), MatrixRelation::Psd, "ppt");
        p.objective = ScalarFunctional::default().trace(x, 1.0);
        let s = p.to_json().unwrap();
        assert_eq!(SdpProblem::from_json(&s).unwrap(), p);
        assert!(SdpProblem::from_json(&s.replace("\"blocks\"", "\"bogus\": 1, \"blocks\"")).is_err());
    }
}
