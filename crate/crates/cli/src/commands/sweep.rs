//! Parameter sweeps over the built-in instances. Points run in parallel;
//! results are written in ascending parameter order.

use std::path::Path;

use rayon::prelude::*;
use relent::bounds::{refine_until, validate_interior, RefineStatus, RefinementReport, RelEntProblem};
use relent::instances::{amplitude_damping_instance, isotropic, qkd_instance, ree_instance, QkdSetup, CAPACITY_OFFSET};
use serde::{Deserialize, Serialize};

use crate::config::{
    load, CapacitySweepConfig, QkdSweepConfig, RefineConfig, ReeSweepConfig, CAPACITY_SWEEP_SCHEMA, QKD_SWEEP_SCHEMA,
    REE_SWEEP_SCHEMA,
};
use crate::output::{write_json, PlotWriter};
use crate::{CliError, CommonArgs, Units};

/// Result for one parameter value. `y` and `error` are in the sweep units,
/// `lower`, `upper` and the report in nats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<RefineStatus>,
    /// Whether the optimizer kept clear of the sandwich constraints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RefinementReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRecord {
    pub command: String,
    pub units: Units,
    pub parameter: String,
    pub target_eps: f64,
    /// Upper sandwich constant used for every point.
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bell_diagonal: Option<bool>,
    pub points: Vec<PointRecord>,
}

/// Bounds on the reported quantity in nats.
struct Outcome {
    y: f64,
    error: f64,
    interior: Option<bool>,
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}

/// Refines the problem of every value and collects records in input order.
fn run_points<B, F>(values: &[f64], target_eps: f64, refine: &RefineConfig, units: Units, jobs: Option<usize>, build: B, finish: F) -> Result<Vec<PointRecord>, CliError>
where
    B: Fn(f64) -> relent::Result<RelEntProblem> + Sync,
    F: Fn(&RelEntProblem, &RefinementReport) -> Outcome + Sync,
{
    let opts = refine.options(target_eps);
    let one = |x: f64| -> PointRecord {
        let res = build(x).and_then(|p| refine_until(&p, &opts, &refine.solver).map(|r| (p, r)));
        match res {
            Ok((p, r)) => {
                let o = finish(&p, &r);
                log::info!("x = {x}: y = {:.9} ± {:.3e} nats ({:?})", o.y, o.error, r.status);
                PointRecord {
                    x,
                    y: Some(units.convert(o.y)),
                    error: Some(units.convert(o.error)),
                    lower: Some(r.best_lower.value),
                    upper: Some(r.best_upper.value),
                    status: Some(r.status),
                    interior: o.interior,
                    failure: None,
                    report: Some(r),
                }
            }
            Err(e) => {
                log::warn!("x = {x}: {e}");
                PointRecord {
                    x,
                    y: None,
                    error: None,
                    lower: None,
                    upper: None,
                    status: None,
                    interior: None,
                    failure: Some(e.to_string()),
                    report: None,
                }
            }
        }
    };
    Ok(pool(jobs)?.install(|| values.par_iter().map(|&x| one(x)).collect()))
}

/// Writes `<stem>.dat` and `<stem>.json`; returns 1 if any point failed.
fn emit(out: &Path, stem: &str, record: &SweepRecord) -> Result<i32, CliError> {
    let mut plot = PlotWriter::create(&out.join(format!("{stem}.dat")), &[&record.parameter, "y", "error"])?;
    let mut failed = 0;
    for p in &record.points {
        plot.row(p.x, &[p.y.unwrap_or(f64::NAN), p.error.unwrap_or(f64::NAN)])?;
        match (&p.failure, p.y) {
            (Some(f), _) => {
                failed += 1;
                println!("{} = {}: FAILED ({f})", record.parameter, p.x);
            }
            (None, Some(y)) => println!("{} = {}: {y:.9} ± {:.3e} {}", record.parameter, p.x, p.error.unwrap_or(0.0), record.units),
            _ => {}
        }
    }
    write_json(&out.join(format!("{stem}.json")), record)?;
    if failed > 0 {
        eprintln!("relent: {failed} of {} points failed", record.points.len());
        return Ok(1);
    }
    Ok(0)
}

/// Problem of one QKD sweep point.
pub fn qkd_problem(cfg: &QkdSweepConfig, alpha: f64) -> relent::Result<RelEntProblem> {
    let mut setup = QkdSetup::isotropic_mub(cfg.local_dim, alpha)?;
    setup.lambda = cfg.lambda;
    setup.bell_diagonal = cfg.bell_diagonal;
    qkd_instance(&setup)
}

/// Certified lower bounds on `min D(ρ‖Φ_0(ρ))`; the error column is the gap.
pub fn qkd_sweep(path: &Path, common: &CommonArgs) -> Result<i32, CliError> {
    let cfg: QkdSweepConfig = load(path, QKD_SWEEP_SCHEMA)?;
    cfg.validate()?;
    let units = common.units.or(cfg.units).unwrap_or_default();
    let probe = QkdSetup::isotropic_mub(cfg.local_dim, 0.0).map(|mut s| {
        s.lambda = cfg.lambda;
        s.bell_diagonal = cfg.bell_diagonal;
        s
    })?;
    let bell = probe.uses_bell_diagonal().map_err(|e| CliError::Config(format!("bell_diagonal: {e}")))?;
    let values = cfg.sweep.sorted_values();
    let points = run_points(
        &values,
        cfg.sweep.target_eps,
        &cfg.refine,
        units,
        common.jobs,
        |a| qkd_problem(&cfg, a),
        |_, r| Outcome {
            y: r.best_lower.value,
            error: r.final_gap,
            interior: None,
        },
    )?;
    let record = SweepRecord {
        command: "qkd-sweep".into(),
        units,
        parameter: cfg.sweep.parameter.clone(),
        target_eps: cfg.sweep.target_eps,
        lambda: probe.lambda(),
        bell_diagonal: Some(bell),
        points,
    };
    emit(&common.out, "qkd_sweep", &record)
}

/// Capacity `2 log 2 − min`: midpoint of the bracket with half-gap errors.
pub fn capacity_sweep(path: &Path, common: &CommonArgs) -> Result<i32, CliError> {
    let cfg: CapacitySweepConfig = load(path, CAPACITY_SWEEP_SCHEMA)?;
    cfg.validate()?;
    let units = common.units.or(cfg.units).unwrap_or_default();
    let points = run_points(
        &cfg.sweep.sorted_values(),
        cfg.sweep.target_eps,
        &cfg.refine,
        units,
        common.jobs,
        amplitude_damping_instance,
        |_, r| {
            let (hi, lo) = (CAPACITY_OFFSET - r.best_lower.value, CAPACITY_OFFSET - r.best_upper.value);
            Outcome {
                y: 0.5 * (hi + lo),
                error: 0.5 * (hi - lo),
                interior: None,
            }
        },
    )?;
    let record = SweepRecord {
        command: "capacity-sweep".into(),
        units,
        parameter: cfg.sweep.parameter.clone(),
        target_eps: cfg.sweep.target_eps,
        lambda: 4.0,
        bell_diagonal: None,
        points,
    };
    emit(&common.out, "capacity_sweep", &record)
}

/// Relative entropy of entanglement of isotropic two-qubit states: midpoint
/// of the bracket with half-gap errors.
pub fn ree_sweep(path: &Path, common: &CommonArgs) -> Result<i32, CliError> {
    let cfg: ReeSweepConfig = load(path, REE_SWEEP_SCHEMA)?;
    cfg.validate()?;
    let units = common.units.or(cfg.units).unwrap_or_default();
    let points = run_points(
        &cfg.sweep.sorted_values(),
        cfg.sweep.target_eps,
        &cfg.refine,
        units,
        common.jobs,
        |a| ree_instance(&isotropic(a, 2)?, cfg.lambda_cap),
        |p, r| Outcome {
            y: 0.5 * (r.best_lower.value + r.best_upper.value),
            error: 0.5 * r.final_gap,
            interior: Some(validate_interior(p, &r.best_upper)),
        },
    )?;
    if points.iter().any(|p| p.interior == Some(false)) {
        log::warn!("some optimizers touch ρ ⪯ λσ; increase lambda_cap");
    }
    let record = SweepRecord {
        command: "ree-sweep".into(),
        units,
        parameter: cfg.sweep.parameter.clone(),
        target_eps: cfg.sweep.target_eps,
        lambda: cfg.lambda_cap,
        bell_diagonal: None,
        points,
    };
    emit(&common.out, "ree_sweep", &record)
}
