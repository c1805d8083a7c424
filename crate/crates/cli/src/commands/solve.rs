//! Refinement of a single problem to a target gap.

use std::path::Path;

use relent::bounds::{refine_until, RefineStatus, RefinementReport, RelEntProblem};
use relent::instances::generic_instance;
use serde::Serialize;

use crate::config::{load, ProblemSource, SolveConfig, SOLVE_SCHEMA};
use crate::output::{write_json, PlotWriter};
use crate::{CliError, CommonArgs, Units};

#[derive(Serialize)]
struct SolveRecord<'a> {
    units: Units,
    status: RefineStatus,
    lower: f64,
    upper: f64,
    gap: f64,
    /// Bounds and iterations in nats.
    report: &'a RefinementReport,
}

fn load_problem(source: &ProblemSource, config_path: &Path, seed: u64) -> Result<RelEntProblem, CliError> {
    match source {
        ProblemSource::Inline { problem } => {
            problem.validate().map_err(|e| CliError::Config(format!("problem.problem: {e}")))?;
            Ok((**problem).clone())
        }
        ProblemSource::File { path } => {
            let full = config_path.parent().unwrap_or(Path::new(".")).join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| CliError::Config(format!("problem.path: {}: {e}", full.display())))?;
            RelEntProblem::from_json(&text).map_err(|e| CliError::Config(format!("problem.path: {}: {e}", full.display())))
        }
        ProblemSource::Generic { dim } => Ok(generic_instance(*dim, seed)
            .map_err(|e| CliError::Config(format!("problem.dim: {e}")))?
            .problem),
    }
}

pub fn solve(path: &Path, common: &CommonArgs) -> Result<i32, CliError> {
    let cfg: SolveConfig = load(path, SOLVE_SCHEMA)?;
    cfg.validate()?;
    let units = common.units.or(cfg.units).unwrap_or_default();
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let problem = load_problem(&cfg.problem, path, seed)?;
    let report = refine_until(&problem, &cfg.refine.options(cfg.target_eps), &cfg.refine.solver)?;

    let mut plot = PlotWriter::create(&common.out.join("solve.dat"), &["iteration", "c_l", "c_u", "gap"])?;
    println!("{:>4} {:>8} {:>8} {:>18} {:>18} {:>12}", "iter", "pts_l", "pts_u", "c_l", "c_u", "gap");
    for r in &report.iterations {
        let (l, u) = (units.convert(r.lower), units.convert(r.upper));
        plot.row(r.iteration, &[l, u, u - l])?;
        println!(
            "{:>4} {:>8} {:>8} {:>18.12} {:>18.12} {:>12.3e}",
            r.iteration,
            r.lower_points.iter().sum::<usize>(),
            r.upper_points.iter().sum::<usize>(),
            l,
            u,
            u - l
        );
    }
    let (lower, upper) = (units.convert(report.best_lower.value), units.convert(report.best_upper.value));
    println!("c_l = {lower:.12} {units}");
    println!("c_u = {upper:.12} {units}");
    println!("gap = {:.3e}", upper - lower);
    if report.status == RefineStatus::BudgetExhausted {
        println!("status: budget-exhausted (target {:.3e} not reached)", cfg.target_eps);
    } else {
        println!("status: gap-met");
    }
    write_json(
        &common.out.join("solve_report.json"),
        &SolveRecord {
            units,
            status: report.status,
            lower,
            upper,
            gap: upper - lower,
            report: &report,
        },
    )?;
    Ok(0)
}
