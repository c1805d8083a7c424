//! Relative entropy of entanglement of a two-qubit state, where the PPT
//! states coincide with the separable ones.

use super::initial_grid;
use crate::bounds::{RelEntProblem, RelEntTerm, StateBlock, StateMap, StateMatrixConstraint, StateOperatorTerm};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, LinearMap, Subsystem};
use crate::sdp::MatrixRelation;

/// Default upper sandwich constant `λ` for `ρ ⪯ λσ`.
pub const DEFAULT_REE_LAMBDA: f64 = 50.0;

/// `min_σ D(ρ‖σ)` over two-qubit states `σ` with PPT. The sandwich
/// `ρ ⪯ λ_cap σ` is a genuine restriction and is enforced; check the
/// optimizer against it with `validate_interior`.
pub fn ree_instance(rho: &DensityMatrix, lambda_cap: f64) -> Result<RelEntProblem> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch(format!("expected a two-qubit state, got dimension {}", rho.dim())));
    }
    if !(lambda_cap > 1.0 && lambda_cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ cap must be finite and above 1, got {lambda_cap}")));
    }
    let problem = RelEntProblem {
        states: vec![StateBlock::new("sigma", 4)],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::fixed(rho.clone()),
            sigma: StateMap::free(0),
            mu: 0.0,
            lambda: lambda_cap,
            grid: initial_grid(0.0, lambda_cap)?,
            enforce_sandwich: true,
        }],
        constraints: vec![],
        matrix_constraints: vec![StateMatrixConstraint {
            dim: 4,
            terms: vec![StateOperatorTerm {
                block: 0,
                coeff: 1.0,
                map: Some(LinearMap::PartialTranspose {
                    dims: (2, 2),
                    sys: Subsystem::B,
                }),
            }],
            constant: None,
            relation: MatrixRelation::Psd,
            label: "sigma PPT".into(),
        }],
        aux_structure: Default::default(),
    };
    problem.validate()?;
    Ok(problem)
}

/// Relative entropy of entanglement (nats) of the two-qubit isotropic state
/// `(1 − α) Ω⁺ + α 1/4`: `log 2 + F log F + (1 − F) log(1 − F)` with
/// singlet fraction `F = 1 − 3α/4`, and zero once `F ≤ 1/2`.
pub fn isotropic_ree_oracle(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("α must lie in [0, 1], got {alpha}")));
    }
    let f = 1.0 - 0.75 * alpha;
    if f <= 0.5 {
        return Ok(0.0);
    }
    let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    Ok(std::f64::consts::LN_2 + xlx(f) + xlx(1.0 - f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{refine_until, solve_lower, solve_upper, RefineOptions};
    use crate::gridding::RefineStrategy;
    use crate::instances::isotropic;
    use crate::linalg::partial_transpose;
    use crate::sdp::SolverSettings;

    #[test]
    fn oracle_threshold_and_endpoints() {
        assert!((isotropic_ree_oracle(0.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(isotropic_ree_oracle(2.0 / 3.0).unwrap(), 0.0);
        assert_eq!(isotropic_ree_oracle(1.0).unwrap(), 0.0);
        assert!(isotropic_ree_oracle(0.6).unwrap() > 0.0);
        // The oracle threshold is where the partial transpose stops being PSD.
        for (alpha, ppt) in [(0.6, false), (0.7, true)] {
            let pt = partial_transpose(isotropic(alpha, 2).unwrap().as_hermitian(), (2, 2), Subsystem::B).unwrap();
            assert_eq!(pt.min_eigenvalue() >= 0.0, ppt);
        }
    }

    #[test]
    fn separable_input_gives_zero() {
        let rho = DensityMatrix::maximally_mixed(4);
        let p = ree_instance(&rho, DEFAULT_REE_LAMBDA).unwrap();
        assert!(p.max_violation(&[rho.as_hermitian().clone()]).unwrap() < 1e-8);
        let settings = SolverSettings::default();
        let lo = solve_lower(&p, &settings).unwrap();
        let up = solve_upper(&p, &settings).unwrap();
        assert!(lo.value.abs() < 1e-5 && up.value.abs() < 1e-5, "{} {}", lo.value, up.value);
    }

    #[test]
    fn noisy_bell_state_brackets_oracle() {
        let alpha = 0.2;
        let p = ree_instance(&isotropic(alpha, 2).unwrap(), DEFAULT_REE_LAMBDA).unwrap();
        let r = refine_until(
            &p,
            &RefineOptions {
                target_eps: 2e-3,
                strategy: RefineStrategy::AdaptiveTighten,
                budget: 10,
                factor: Default::default(),
            },
            &SolverSettings::default(),
        )
        .unwrap();
        let exact = isotropic_ree_oracle(alpha).unwrap();
        assert!(r.best_lower.value <= exact + 1e-7 && exact <= r.best_upper.value + 1e-7, "{} {exact} {}", r.best_lower.value, r.best_upper.value);
        assert!(crate::bounds::validate_interior(&p, &r.best_upper));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ree_instance(&DensityMatrix::maximally_mixed(3), 50.0).is_err());
        assert!(ree_instance(&DensityMatrix::maximally_mixed(4), 0.5).is_err());
    }
}
