//! Rigorous lower bounds from approximate dual solutions.
//!
//! For any dual pair `(y, z)` with `z` in the cone and residual
//! `r = c + Aᵀy + Gᵀz`, every feasible `x` satisfies
//! `cᵀx ≥ −bᵀy − hᵀz + rᵀx`. Bounding `‖x_b‖` per variable block turns this
//! into a certified lower bound on the optimum.

use serde::{Deserialize, Serialize};

use super::cone::{at_mul_add, gt_mul_add, ConeVec};
use super::embed::StandardForm;
use super::model::SdpProblem;
use super::solver::{SdpSolution, SolveStatus};
use crate::error::{Error, Result};

/// Fallback norm bound factor for blocks without an a-priori bound.
const HEURISTIC_FACTOR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Certified lower bound on the optimal value.
    pub value: f64,
    /// Dual objective at the projected dual point.
    pub dual_objective: f64,
    /// `Σ_b ‖r_b‖ · B_b`, subtracted from the dual objective.
    pub residual_slack: f64,
    /// False if some block lacked an a-priori norm bound.
    pub rigorous: bool,
}

/// Certified lower bound on the optimum of a minimization problem.
pub fn certify_lower(problem: &SdpProblem, solution: &SdpSolution) -> Result<Certificate> {
    if matches!(solution.status, SolveStatus::Infeasible | SolveStatus::Unbounded) {
        return Err(Error::CertificationUnavailable(format!("solver status {:?}", solution.status)));
    }
    let dual = solution
        .dual
        .as_ref()
        .ok_or_else(|| Error::CertificationUnavailable("solution carries no dual point".into()))?;
    let form = StandardForm::from_problem(problem)?;
    if form.m() != dual.y.len() || form.cones.len() != dual.z.0.len() {
        return Err(Error::CertificationUnavailable("dual point does not match the problem".into()));
    }
    Ok(certify_form(&form, &dual.y, &dual.z, &solution.blocks))
}

pub(crate) fn certify_form(form: &StandardForm, y: &[f64], z: &ConeVec, blocks: &[crate::linalg::HermitianMatrix]) -> Certificate {
    let zp = z.project();
    let mut r = form.c.clone();
    at_mul_add(form, y, &mut r);
    gt_mul_add(form, &zp, &mut r);
    let hz = ConeVec::h(form).dot(&zp);
    let by: f64 = form.b.iter().zip(y).map(|(a, b)| a * b).sum();
    let dual_objective = form.c0 - by - hz;
    let mut slack = 0.0;
    let mut rigorous = true;
    for (bi, vb) in form.vars.iter().enumerate() {
        let rn = r[vb.offset..vb.offset + vb.len()].iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn == 0.0 {
            continue;
        }
        let bound = match vb.norm_bound {
            Some(b) => b,
            None => {
                log::debug!("block '{}' has no norm bound; certification is heuristic", vb.name);
                rigorous = false;
                let xn = blocks.get(bi).map(|b| b.frobenius_norm()).unwrap_or(0.0);
                HEURISTIC_FACTOR * xn.max(1.0)
            }
        };
        slack += rn * bound;
    }
    Certificate {
        value: dual_objective - slack,
        dual_objective,
        residual_slack: slack,
        rigorous,
    }
}
