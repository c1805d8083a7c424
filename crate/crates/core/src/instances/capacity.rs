//! Entanglement-assisted classical capacity of the qubit amplitude-damping
//! channel, written as `2 log 2 − min_σ [D(ρ_BE ‖ 1/2 ⊗ ρ_E) + D(ρ_B ‖ 1/2)]`
//! with `ρ_BE = V σ V†` for a Stinespring isometry `V`.

use super::initial_grid;
use crate::bounds::{RelEntProblem, RelEntTerm, StateBlock, StateMap};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, HermitianMatrix, KrausChannel, LinearMap, Subsystem};

/// `2 log d_B` for the qubit output: the capacity is this minus the minimum.
pub const CAPACITY_OFFSET: f64 = 2.0 * std::f64::consts::LN_2;

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("damping probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Two-term problem over the channel input. Both sandwiches hold for every
/// input (`ρ_BE ⪯ d_B 1 ⊗ ρ_E` and `ρ_B ⪯ 1`), so neither is enforced.
pub fn amplitude_damping_instance(p: f64) -> Result<RelEntProblem> {
    check_p(p)?;
    let v = KrausChannel::amplitude_damping(p)?.stinespring();
    let dilate = LinearMap::conjugation(v);
    let half = HermitianMatrix::identity(2).scale(0.5);
    let product = dilate.clone().then(LinearMap::PartialTrace {
        dims: (2, 2),
        keep: Subsystem::B,
    });
    let product = product.then(LinearMap::TensorLeft { fixed: half });
    let marginal = dilate.clone().then(LinearMap::PartialTrace {
        dims: (2, 2),
        keep: Subsystem::A,
    });
    let term = |rho, sigma, lambda: f64| -> Result<RelEntTerm> {
        Ok(RelEntTerm {
            weight: 1.0,
            rho,
            sigma,
            mu: 0.0,
            lambda,
            grid: initial_grid(0.0, lambda)?,
            enforce_sandwich: false,
        })
    };
    let problem = RelEntProblem {
        states: vec![StateBlock::new("input", 2)],
        terms: vec![
            term(StateMap::affine(0, dilate), StateMap::affine(0, product), 4.0)?,
            term(StateMap::affine(0, marginal), StateMap::fixed(DensityMatrix::maximally_mixed(2)), 2.0)?,
        ],
        constraints: vec![],
        matrix_constraints: vec![],
        aux_structure: Default::default(),
    };
    problem.validate()?;
    Ok(problem)
}

/// `I(A:B) = S(σ) + S(ρ_B) − S(ρ_E)` of the amplitude-damping channel for the
/// input `σ`, from the spectra of the dilated state.
pub fn ea_mutual_information(p: f64, input: &DensityMatrix) -> Result<f64> {
    check_p(p)?;
    let v = KrausChannel::amplitude_damping(p)?.stinespring();
    let be = input.as_hermitian().conjugate_by(&v);
    let entropy = |h: HermitianMatrix| -> Result<f64> { Ok(DensityMatrix::normalized(h)?.entropy()) };
    let sb = entropy(crate::linalg::partial_trace(&be, (2, 2), Subsystem::A)?)?;
    let se = entropy(crate::linalg::partial_trace(&be, (2, 2), Subsystem::B)?)?;
    Ok(input.entropy() + sb - se)
}

/// Capacity in nats by maximizing the mutual information over diagonal
/// inputs `diag(1 − q, q)`; the channel is phase covariant, so these suffice.
/// A coarse scan brackets the maximum of the concave function, golden-section
/// search refines it.
pub fn amplitude_damping_capacity_oracle(p: f64) -> Result<f64> {
    check_p(p)?;
    let f = |q: f64| -> Result<f64> {
        ea_mutual_information(p, &DensityMatrix::normalized(HermitianMatrix::from_diagonal(&[1.0 - q, q]))?)
    };
    let n = 200;
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..=n {
        let v = f(k as f64 / n as f64)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let (mut a, mut b) = ((best.0.max(1) - 1) as f64 / n as f64, ((best.0 + 1).min(n)) as f64 / n as f64);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-12 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(best.1.max(f1).max(f2))
}
