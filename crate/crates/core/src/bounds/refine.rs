//! Alternating solve-and-refine loop closing the gap between the bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::build::effective_grid;
use super::problem::RelEntProblem;
use super::solve::{solve_lower, solve_upper, BoundResult};
use crate::error::{Error, Result};
use crate::gridding::{mu_floor, refine, AdaptiveFactor, Grid, RefineContext, RefineStrategy};
use crate::sdp::SolverSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineStatus {
    GapMet,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_points: Vec<usize>,
    pub upper_points: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
    /// `upper − lower` of this iteration.
    pub gap: f64,
    /// Excluded from serialized output to keep records reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementReport {
    pub status: RefineStatus,
    pub target_eps: f64,
    pub iterations: Vec<IterationRecord>,
    /// Best lower bound over all iterations.
    pub best_lower: BoundResult,
    /// Best upper bound over all iterations.
    pub best_upper: BoundResult,
    /// `best_upper.value − best_lower.value`.
    pub final_gap: f64,
}

impl RefinementReport {
    /// Whitespace-separated `iteration c_l c_u gap` rows with a `#` header.
    pub fn plot_rows(&self) -> String {
        let mut s = String::from("# iteration c_l c_u gap\n");
        for r in &self.iterations {
            s.push_str(&format!("{} {:.12e} {:.12e} {:.12e}\n", r.iteration, r.lower, r.upper, r.gap));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineOptions {
    pub target_eps: f64,
    pub strategy: RefineStrategy,
    /// Maximum number of solve iterations.
    pub budget: usize,
    #[serde(default)]
    pub factor: AdaptiveFactor,
}

/// ε an adaptive grid would need to be at least as fine as `grid`.
fn grid_eps(grid: &Grid, factor: AdaptiveFactor) -> f64 {
    grid.points()
        .windows(2)
        .map(|w| (w[1] - w[0]).powi(2) / (factor.value() * w[0]))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
}

/// For `μ = 0`, moves the first point down to the floor matching `eps`.
fn lower_floor(grid: Grid, eps: f64) -> Result<Grid> {
    let floor = mu_floor(eps);
    if grid.mu() > 0.0 || grid.is_degenerate() || floor >= grid.first() {
        return Ok(grid);
    }
    let mut pts = grid.points().to_vec();
    pts.push(floor);
    Grid::new(pts, grid.mu(), grid.lambda())
}

/// Solves both relaxations, refining the grids until `c_u − c_l ≤ target_eps`
/// or the budget runs out. Lower grids only gain points, so the certified
/// lower values are monotone; upper grids follow the chosen strategy.
pub fn refine_until(problem: &RelEntProblem, options: &RefineOptions, settings: &SolverSettings) -> Result<RefinementReport> {
    if options.budget == 0 {
        return Err(Error::InvalidArgument("refinement budget must be at least 1".into()));
    }
    if !(options.target_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("target ε must be positive, got {}", options.target_eps)));
    }
    problem.validate()?;
    let mut lower_grids: Vec<Grid> = problem.grids().iter().map(effective_grid).collect::<Result<_>>()?;
    let mut upper_grids = lower_grids.clone();
    let mut iterations = Vec::new();
    let mut best: Option<(BoundResult, BoundResult)> = None;
    let mut status = RefineStatus::BudgetExhausted;
    // Per-term ε driving the adaptive strategies, set after the first solve.
    let mut eps: Vec<f64> = Vec::new();

    for it in 0..options.budget {
        let start = Instant::now();
        let lo = solve_lower(&problem.with_grids(&lower_grids)?, settings)?;
        let up = solve_upper(&problem.with_grids(&upper_grids)?, settings)?;
        let rec = IterationRecord {
            iteration: it,
            lower_points: lo.grids.iter().map(Grid::len).collect(),
            upper_points: up.grids.iter().map(Grid::len).collect(),
            lower: lo.value,
            upper: up.value,
            gap: up.value - lo.value,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        log::info!("iteration {it}: c_l = {:.9}, c_u = {:.9}, gap = {:.3e}", rec.lower, rec.upper, rec.gap);
        iterations.push(rec);

        let (bl, bu) = match best.take() {
            None => (lo.clone(), up.clone()),
            Some((l, u)) => (
                if lo.value > l.value { lo.clone() } else { l },
                if up.value < u.value { up.clone() } else { u },
            ),
        };
        let done = bu.value - bl.value <= options.target_eps;
        best = Some((bl, bu));
        if done {
            status = RefineStatus::GapMet;
            break;
        }
        if it + 1 == options.budget {
            break;
        }

        if eps.is_empty() {
            let g = (up.value - lo.value).max(options.target_eps);
            eps = lo.grids.iter().map(|grid| grid_eps(grid, options.factor).min(g)).collect();
        }
        let lower_strategy = match options.strategy {
            RefineStrategy::UpperAnchor => RefineStrategy::AdaptiveTighten,
            s => s,
        };
        lower_grids = lo
            .grids
            .iter()
            .zip(&eps)
            .map(|(g, &e)| {
                let ctx = RefineContext {
                    eps: e,
                    factor: options.factor,
                    active: Vec::new(),
                };
                lower_floor(refine(g, lower_strategy, &ctx)?.union(g)?, ctx.eps / 4.0)
            })
            .collect::<Result<_>>()?;
        upper_grids = up
            .grids
            .iter()
            .enumerate()
            .map(|(ti, g)| {
                let ctx = RefineContext {
                    eps: eps[ti],
                    factor: options.factor,
                    active: up.active.get(ti).cloned().unwrap_or_default(),
                };
                lower_floor(refine(g, options.strategy, &ctx)?, ctx.eps / 4.0)
            })
            .collect::<Result<_>>()?;
        eps.iter_mut().for_each(|e| *e /= 4.0);
    }

    let (best_lower, best_upper) = best.expect("at least one iteration ran");
    Ok(RefinementReport {
        status,
        target_eps: options.target_eps,
        final_gap: best_upper.value - best_lower.value,
        iterations,
        best_lower,
        best_upper,
    })
}
