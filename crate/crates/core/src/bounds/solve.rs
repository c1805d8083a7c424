//! Solving the relaxations and reporting certified values.

use serde::{Deserialize, Serialize};

use super::build::{assemble, log_constant, Side};
use super::problem::RelEntProblem;
use crate::divergence::{g_value, generalized_eigenvalues, sandwich_constants, StatePair};
use crate::error::{Error, Result};
use crate::gridding::{head_weight, upper_coefficients, Grid};
use crate::linalg::{positive_part, DensityMatrix, HermitianMatrix};
use crate::sdp::{certify_lower, solve, SdpProblem, SolveStatus, SolverSettings};

/// Relative slack used by [`validate_interior`].
const INTERIOR_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundResult {
    pub side: Side,
    /// Certified lower bound (lower side) or the upper objective evaluated
    /// exactly at the optimizer states (upper side).
    pub value: f64,
    /// Primal objective reported by the solver.
    pub raw_value: f64,
    pub status: SolveStatus,
    /// False if the certificate relied on heuristic norm bounds.
    pub rigorous: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Optimizer values of the state blocks.
    pub states: Vec<HermitianMatrix>,
    /// Grids actually used, per term.
    pub grids: Vec<Grid>,
    /// Per term, grid nodes bracketing a generalized eigenvalue of the
    /// optimizer pair (upper side only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active: Vec<Vec<usize>>,
    pub fingerprint: u64,
}

/// Normalized PSD projection; the solver returns states up to its tolerance.
fn to_density(h: &HermitianMatrix) -> Result<DensityMatrix> {
    let p = positive_part(h);
    if !(p.trace() > 0.0) {
        return Err(Error::Solver("optimizer state has no positive part".into()));
    }
    DensityMatrix::normalized(p)
}

fn pairs_at(problem: &RelEntProblem, states: &[HermitianMatrix]) -> Result<Vec<StatePair>> {
    let fixed: Vec<HermitianMatrix> = states
        .iter()
        .map(|s| to_density(s).map(DensityMatrix::into_hermitian))
        .collect::<Result<_>>()?;
    problem
        .evaluate_pairs(&fixed)?
        .into_iter()
        .map(|(r, s)| StatePair::new(to_density(&r)?, to_density(&s)?))
        .collect()
}

/// Upper objective of one term on a pair, with `s = 1` inserted as in the SDP.
fn upper_term(pair: &StatePair, grid: &Grid) -> Result<f64> {
    if grid.is_degenerate() {
        return Ok(log_constant(grid.lambda()));
    }
    let c = upper_coefficients(grid)?;
    let sum: f64 = c.weights.iter().zip(grid.points()).map(|(&w, &t)| w * g_value(pair, t)).sum();
    Ok(sum + head_weight(grid) * g_value(pair, grid.first()) + log_constant(grid.lambda()))
}

fn active_nodes(pair: &StatePair, grid: &Grid) -> Vec<usize> {
    let t = grid.points();
    let mut out = Vec::new();
    for e in generalized_eigenvalues(pair) {
        if let Some(k) = t.windows(2).position(|w| w[0] <= e && e < w[1]) {
            out.extend([k, k + 1]);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn run(problem: &RelEntProblem, side: Side, settings: &SolverSettings) -> Result<BoundResult> {
    let (sdp, layout) = assemble(problem, side)?;
    let n_states = problem.states.len();
    let fingerprint = problem.fingerprint();
    if sdp.blocks.is_empty() {
        // Every term is degenerate with fixed states: the objective is a constant.
        let v = sdp.objective.evaluate(&[]);
        return Ok(BoundResult {
            side,
            value: v,
            raw_value: v,
            status: SolveStatus::Optimal,
            rigorous: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            states: Vec::new(),
            grids: layout.grids,
            active: Vec::new(),
            fingerprint,
        });
    }
    let sol = solve(&sdp, settings)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible(sol.message.clone())),
        SolveStatus::Unbounded => return Err(Error::Solver("relaxation reported unbounded".into())),
        SolveStatus::NumericalFailure => log::warn!("{side:?} relaxation: {}", sol.message),
        _ => {}
    }
    let states: Vec<HermitianMatrix> = sol.blocks[..n_states].to_vec();
    let (value, rigorous, active) = match side {
        Side::Lower => {
            let cert = certify_lower(&sdp, &sol)?;
            log::debug!("lower: primal {:.10} certified {:.10} slack {:.2e}", sol.primal_value, cert.value, cert.residual_slack);
            (cert.value, cert.rigorous, Vec::new())
        }
        Side::Upper => upper_value(problem, &sdp, &states, &layout.grids, &sol.blocks)?,
    };
    Ok(BoundResult {
        side,
        value,
        raw_value: sol.primal_value,
        status: sol.status,
        rigorous,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        states,
        grids: layout.grids,
        active,
        fingerprint,
    })
}

fn upper_value(
    problem: &RelEntProblem,
    sdp: &SdpProblem,
    states: &[HermitianMatrix],
    grids: &[Grid],
    blocks: &[HermitianMatrix],
) -> Result<(f64, bool, Vec<Vec<usize>>)> {
    let pairs = match pairs_at(problem, states) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("upper: cannot evaluate optimizer states ({e}); reporting the SDP objective");
            return Ok((sdp.objective.evaluate(blocks), false, Vec::new()));
        }
    };
    let mut value = 0.0;
    let mut active = Vec::with_capacity(pairs.len());
    for ((term, pair), grid) in problem.terms.iter().zip(&pairs).zip(grids) {
        value += term.weight * upper_term(pair, grid)?;
        active.push(active_nodes(pair, grid));
    }
    Ok((value, true, active))
}

/// Certified lower bound `c_l(t)` for the grids stored in the problem.
pub fn solve_lower(problem: &RelEntProblem, settings: &SolverSettings) -> Result<BoundResult> {
    run(problem, Side::Lower, settings)
}

/// Upper bound `c_u(t)`: the upper objective at the optimizer of the upper
/// relaxation, which is a feasible point of the original problem.
pub fn solve_upper(problem: &RelEntProblem, settings: &SolverSettings) -> Result<BoundResult> {
    run(problem, Side::Upper, settings)
}

/// `c_u − c_l` for results of the same problem.
pub fn gap(lower: &BoundResult, upper: &BoundResult) -> Result<f64> {
    if lower.side != Side::Lower || upper.side != Side::Upper {
        return Err(Error::Mismatch("expected a lower and an upper result".into()));
    }
    if lower.fingerprint != upper.fingerprint {
        return Err(Error::Mismatch("results belong to different problems".into()));
    }
    Ok(upper.value - lower.value)
}

/// True if no sandwich constraint binds at the optimizer: the optimizer pair
/// of every term satisfies `μ_opt > μ(1 + 1e-6)` (when `μ > 0`) and
/// `λ_opt < λ(1 − 1e-6)`.
pub fn validate_interior(problem: &RelEntProblem, result: &BoundResult) -> bool {
    let Ok(pairs) = pairs_at(problem, &result.states) else {
        return false;
    };
    problem.terms.iter().zip(&pairs).all(|(term, pair)| {
        let sc = sandwich_constants(pair);
        sc.support_ok
            && sc.lambda < term.lambda * (1.0 - INTERIOR_SLACK)
            && (term.mu == 0.0 || sc.mu > term.mu * (1.0 + INTERIOR_SLACK))
    })
}
