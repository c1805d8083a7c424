//! Assembly of the lower and upper relaxations as SDPs.

use serde::{Deserialize, Serialize};

use super::problem::{RelEntProblem, RelEntTerm, StateBlock, StateMap};
use crate::error::{Error, Result};
use crate::gridding::{head_weight, lower_coefficients, upper_coefficients, Grid};
use crate::linalg::{positive_part, HermitianMatrix, LinearMap};
use crate::sdp::{AffineOperatorExpr, BlockKind, MatrixRelation, ScalarConstraint, ScalarFunctional, ScalarRelation, SdpProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Lower,
    Upper,
}

/// Grid actually used for a term: `s = 1` is inserted when it lies strictly
/// inside the sandwich range, so that `ρ = σ` is resolved exactly.
pub fn effective_grid(grid: &Grid) -> Result<Grid> {
    if !grid.is_degenerate() && grid.mu() < 1.0 && 1.0 < grid.lambda() && !grid.contains(1.0) {
        grid.with_points(&[1.0])
    } else {
        Ok(grid.clone())
    }
}

/// `log λ + 1 − λ`.
pub(crate) fn log_constant(lambda: f64) -> f64 {
    lambda.ln() + 1.0 - lambda
}

/// Positions of the auxiliary blocks in an assembled SDP.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub grids: Vec<Grid>,
    /// Per term, one block index per interval (lower) or node (upper).
    pub aux: Vec<Vec<usize>>,
}

pub fn build_lower(problem: &RelEntProblem) -> Result<SdpProblem> {
    Ok(assemble(problem, Side::Lower)?.0)
}

pub fn build_upper(problem: &RelEntProblem) -> Result<SdpProblem> {
    Ok(assemble(problem, Side::Upper)?.0)
}

fn map_index(sdp: &mut SdpProblem, map: &LinearMap) -> usize {
    match sdp.maps.iter().position(|m| m == map) {
        Some(i) => i,
        None => sdp.add_map(map.clone()),
    }
}

/// Adds `coeff · sm` to `expr`.
fn add_state(sdp: &mut SdpProblem, mut expr: AffineOperatorExpr, sm: &StateMap, coeff: f64) -> AffineOperatorExpr {
    if coeff == 0.0 {
        return expr;
    }
    match sm {
        StateMap::Free { block } => expr.term(*block, coeff, None),
        StateMap::Affine { block, map } => {
            let m = map_index(sdp, map);
            expr.term(*block, coeff, Some(m))
        }
        StateMap::Fixed { state } => {
            let c = state.as_hermitian().scale(coeff);
            expr.constant = Some(match expr.constant.take() {
                Some(k) => &k + &c,
                None => c,
            });
            expr
        }
    }
}

fn pair_expr(sdp: &mut SdpProblem, term: &RelEntTerm, dim: usize, a: f64, b: f64) -> AffineOperatorExpr {
    let e = add_state(sdp, AffineOperatorExpr::new(dim), &term.rho, a);
    add_state(sdp, e, &term.sigma, b)
}

/// Adds `coeff · tr(sm)` to the objective.
fn trace_of(f: ScalarFunctional, sm: &StateMap, coeff: f64, states: &[StateBlock]) -> Result<ScalarFunctional> {
    if coeff == 0.0 {
        return Ok(f);
    }
    Ok(match sm {
        StateMap::Free { block } => f.trace(*block, coeff),
        StateMap::Fixed { state } => f.plus(coeff * state.as_hermitian().trace()),
        StateMap::Affine { block, map } => f.inner(*block, map.trace_functional(states[*block].dim)?.scale(coeff)),
    })
}

pub(crate) fn assemble(problem: &RelEntProblem, side: Side) -> Result<(SdpProblem, Layout)> {
    problem.validate()?;
    let mut sdp = SdpProblem::default();
    for s in &problem.states {
        let b = sdp.add_block(s.name.clone(), s.dim, BlockKind::Psd);
        sdp.blocks[b].structure = s.structure;
        sdp.blocks[b].norm_bound = Some(1.0);
        sdp.add_scalar_constraint(ScalarFunctional::default().trace(b, 1.0).plus(-1.0), ScalarRelation::Zero);
    }
    for c in &problem.constraints {
        sdp.scalar_constraints.push(ScalarConstraint {
            func: c.func.clone(),
            relation: c.relation,
        });
    }
    for c in &problem.matrix_constraints {
        let mut e = AffineOperatorExpr::new(c.dim);
        for t in &c.terms {
            let m = t.map.as_ref().map(|m| map_index(&mut sdp, m));
            e = e.term(t.block, t.coeff, m);
        }
        if let Some(k) = &c.constant {
            e = e.with_constant(k.clone());
        }
        sdp.add_constraint(e, c.relation, c.label.clone());
    }

    let mut objective = ScalarFunctional::default();
    let mut layout = Layout {
        grids: Vec::with_capacity(problem.terms.len()),
        aux: Vec::with_capacity(problem.terms.len()),
    };
    for (ti, term) in problem.terms.iter().enumerate() {
        let dim = term.rho.dim(&problem.states)?;
        let grid = effective_grid(&term.grid)?;
        if term.enforce_sandwich && !(term.rho.is_fixed() && term.sigma.is_fixed()) {
            let upper = pair_expr(&mut sdp, term, dim, -1.0, term.lambda);
            sdp.add_constraint(upper, MatrixRelation::Psd, format!("term {ti}: ρ ⪯ λσ"));
            if term.mu > 0.0 {
                let lower = pair_expr(&mut sdp, term, dim, 1.0, -term.mu);
                sdp.add_constraint(lower, MatrixRelation::Psd, format!("term {ti}: μσ ⪯ ρ"));
            }
        }
        objective = objective.plus(term.weight * log_constant(term.lambda));

        let (gr, gs) = (term.rho.trace_norm_gain(), term.sigma.trace_norm_gain());
        let coeffs: Vec<(f64, f64)> = if grid.is_degenerate() {
            Vec::new()
        } else {
            match side {
                Side::Lower => {
                    let c = lower_coefficients(&grid)?;
                    c.alpha.into_iter().zip(c.beta).collect()
                }
                Side::Upper => {
                    let c = upper_coefficients(&grid)?;
                    let mut v: Vec<(f64, f64)> = c.gamma.into_iter().zip(c.delta).collect();
                    let h = head_weight(&grid);
                    v[0].0 -= h;
                    v[0].1 += h * grid.first();
                    v
                }
            }
        };
        let tag = match side {
            Side::Lower => "mu",
            Side::Upper => "nu",
        };
        let mut aux = Vec::with_capacity(coeffs.len());
        if term.weight > 0.0 {
            for (k, (a, b)) in coeffs.into_iter().enumerate() {
                let blk = sdp.add_block(format!("{tag}[{ti}][{k}]"), dim, BlockKind::Psd);
                sdp.blocks[blk].structure = problem.aux_structure;
                sdp.blocks[blk].norm_bound = Some(a.abs() * gr + b.abs() * gs);
                // Above s = 1 the operator a ρ + b σ is mostly positive. Writing
                // X₊ = X + (−X)₊ keeps the block small and moves tr X into the
                // objective, which avoids cancellation against log λ + 1 − λ.
                let flip = grid.points()[k] >= 1.0 && !(side == Side::Upper && grid.points()[k] == 1.0);
                let e = if flip {
                    objective = trace_of(objective, &term.rho, term.weight * a, &problem.states)?;
                    objective = trace_of(objective, &term.sigma, term.weight * b, &problem.states)?;
                    pair_expr(&mut sdp, term, dim, a, b)
                } else {
                    pair_expr(&mut sdp, term, dim, -a, -b)
                };
                sdp.add_constraint(e.term(blk, 1.0, None), MatrixRelation::Psd, format!("term {ti}: {tag}_{k}"));
                objective = objective.trace(blk, term.weight);
                aux.push(blk);
            }
        }
        layout.grids.push(grid);
        layout.aux.push(aux);
    }
    sdp.objective = objective;
    sdp.validate().map_err(|e| Error::InvalidProblem(format!("assembled SDP is invalid: {e}")))?;
    Ok((sdp, layout))
}

/// Lower objective evaluated at given state values with the optimal choice
/// `μ_k = (α_k ρ + β_k σ)₊`.
pub fn lower_objective_at(problem: &RelEntProblem, states: &[HermitianMatrix]) -> Result<f64> {
    objective_at(problem, states, Side::Lower)
}

/// Upper objective evaluated at given state values with `ν_k = (γ_k ρ + δ_k σ)₊`.
pub fn upper_objective_at(problem: &RelEntProblem, states: &[HermitianMatrix]) -> Result<f64> {
    objective_at(problem, states, Side::Upper)
}

fn objective_at(problem: &RelEntProblem, states: &[HermitianMatrix], side: Side) -> Result<f64> {
    let (sdp, layout) = assemble(problem, side)?;
    let mut blocks: Vec<HermitianMatrix> = states.to_vec();
    blocks.resize(sdp.blocks.len(), HermitianMatrix::zeros(1));
    for aux in &layout.aux {
        for &blk in aux {
            let c = sdp
                .constraints
                .iter()
                .find(|c| c.expr.terms.iter().any(|t| t.block == blk))
                .expect("every auxiliary block has its constraint");
            // The constraint reads ν − a ρ − b σ ⪰ 0; recover a, b by evaluation.
            let mut probe = blocks.clone();
            probe[blk] = HermitianMatrix::zeros(sdp.blocks[blk].dim);
            let x = sdp.evaluate_expr(&c.expr, &probe)?.scale(-1.0);
            blocks[blk] = positive_part(&x);
        }
    }
    Ok(sdp.objective.evaluate(&blocks))
}
