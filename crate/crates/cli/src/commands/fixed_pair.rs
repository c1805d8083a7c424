//! Convergence of the fixed-pair bounds with the number of grid points.

use std::path::Path;

use relent::bounds::{effective_grid, solve_lower, solve_upper, RelEntProblem, RelEntTerm, StateMap};
use relent::divergence::{eta_lower_fixed, relative_entropy_exact, sandwich_constants, upper_fixed, StatePair};
use relent::gridding::{adaptive_grid, mu_floor, uniform_grid, Grid};
use relent::linalg::random::{random_density, rng_from_seed};
use relent::linalg::DensityMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{load, FixedPairConfig, Method, PairSource, Schedule, FIXED_PAIR_SCHEMA};
use crate::output::{write_json, PlotWriter};
use crate::{CliError, CommonArgs};

/// Fit of `gap ≈ c/n²` in log space, plus the free log-log slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub c: f64,
    /// Coefficient of determination of `log gap` under the fixed exponent −2.
    pub r_squared: f64,
    /// Least-squares slope of `log gap` against `log n`.
    pub slope: f64,
}

/// Fits `log gap = log c − 2 log n` to the rows with positive gap, so that
/// coarse and fine grids weigh equally. `None` if fewer than two such rows
/// or the gaps do not vary.
pub fn fit_inverse_square(rows: &[(usize, f64)]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > 0.0)
        .map(|&(n, g)| ((n as f64).ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let log_c = pts.iter().map(|(x, y)| y + 2.0 * x).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(ss_tot > 0.0 && sxx > 0.0) {
        return None;
    }
    let ss_res: f64 = pts.iter().map(|(x, y)| (y - (log_c - 2.0 * x)).powi(2)).sum();
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    Some(Fit {
        c: log_c.exp(),
        r_squared: 1.0 - ss_res / ss_tot,
        slope,
    })
}

#[derive(Serialize)]
struct Row {
    n: usize,
    error_lower: f64,
    error_upper: f64,
}

#[derive(Serialize)]
struct Summary {
    units: crate::Units,
    exact: f64,
    mu: f64,
    lambda: f64,
    rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<Fit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    notice: Option<String>,
}

fn load_pair(source: &PairSource, seed: u64) -> Result<StatePair, CliError> {
    match source {
        PairSource::Random { dim } => {
            let mut rng = rng_from_seed(seed);
            let rho = random_density(*dim, &mut rng);
            let sigma = random_density(*dim, &mut rng);
            Ok(StatePair::new(rho, sigma)?)
        }
        PairSource::Inline { rho, sigma } => {
            let r = DensityMatrix::new(rho.clone()).map_err(|e| CliError::Config(format!("pair.rho: {e}")))?;
            let s = DensityMatrix::new(sigma.clone()).map_err(|e| CliError::Config(format!("pair.sigma: {e}")))?;
            StatePair::new(r, s).map_err(|e| CliError::Config(format!("pair: {e}")))
        }
    }
}

fn fixed_problem(pair: &StatePair, grid: Grid) -> RelEntProblem {
    RelEntProblem {
        states: vec![],
        terms: vec![RelEntTerm {
            weight: 1.0,
            rho: StateMap::fixed(pair.rho.clone()),
            sigma: StateMap::fixed(pair.sigma.clone()),
            mu: grid.mu(),
            lambda: grid.lambda(),
            grid,
            enforce_sandwich: true,
        }],
        constraints: vec![],
        matrix_constraints: vec![],
        aux_structure: Default::default(),
    }
}

pub fn fixed_pair(path: &Path, common: &CommonArgs) -> Result<i32, CliError> {
    let cfg: FixedPairConfig = load(path, FIXED_PAIR_SCHEMA)?;
    cfg.validate()?;
    let units = common.units.or(cfg.units).unwrap_or_default();
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let pair = load_pair(&cfg.pair, seed)?;
    let exact = relative_entropy_exact(&pair).map_err(|e| CliError::Config(format!("pair: {e}")))?;
    let sc = sandwich_constants(&pair);
    let equal = (pair.rho.as_hermitian() - pair.sigma.as_hermitian()).frobenius_norm() < 1e-12;

    let grids: Vec<Grid> = if equal {
        vec![Grid::degenerate(1.0)?]
    } else {
        match &cfg.schedule {
            Schedule::Adaptive { eps, factor } => eps
                .iter()
                .map(|&e| adaptive_grid(sc.mu, sc.lambda, e, *factor))
                .collect::<relent::Result<_>>()?,
            Schedule::Uniform { points } => points
                .iter()
                .map(|&n| {
                    let floor = if sc.mu > 0.0 { 0.0 } else { mu_floor(sc.lambda / (n * n) as f64) };
                    uniform_grid(sc.mu, sc.lambda, n, floor)
                })
                .collect::<relent::Result<_>>()?,
        }
    };

    let mut plot = PlotWriter::create(&common.out.join("fixed_pair.dat"), &["n", "error_lower", "error_upper"])?;
    let mut rows = Vec::new();
    for g in grids {
        let g = effective_grid(&g)?;
        let (lower, upper) = match cfg.method {
            Method::ClosedForm => (eta_lower_fixed(&pair, &g)?, upper_fixed(&pair, &g)?),
            Method::Sdp => {
                let p = fixed_problem(&pair, g.clone());
                (solve_lower(&p, &cfg.solver)?.value, solve_upper(&p, &cfg.solver)?.value)
            }
        };
        let row = Row {
            n: g.len(),
            error_lower: units.convert(exact - lower),
            error_upper: units.convert(upper - exact),
        };
        log::info!("n = {}: error_lower {:.3e}, error_upper {:.3e}", row.n, row.error_lower, row.error_upper);
        plot.row(row.n, &[row.error_lower, row.error_upper])?;
        rows.push(row);
    }

    let gaps: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.error_lower + r.error_upper)).collect();
    let (fit, notice) = if gaps.iter().all(|g| g.1.abs() < 1e-12) {
        (None, Some("all errors vanish; regression skipped".to_string()))
    } else {
        match fit_inverse_square(&gaps) {
            Some(f) => (Some(f), None),
            None => (None, Some("too few distinct rows; regression skipped".to_string())),
        }
    };
    println!("exact D = {:.12} {units}", units.convert(exact));
    println!("sandwich ({:.6}, {:.6})", sc.mu, sc.lambda);
    match (&fit, &notice) {
        (Some(f), _) => println!("fit gap ≈ c/n²: c = {:.6}, R² = {:.6} (free slope {:.3})", f.c, f.r_squared, f.slope),
        (None, Some(n)) => println!("{n}"),
        _ => {}
    }
    write_json(
        &common.out.join("fixed_pair_summary.json"),
        &Summary {
            units,
            exact: units.convert(exact),
            mu: sc.mu,
            lambda: sc.lambda,
            rows,
            fit,
            notice,
        },
    )?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse_square_fits_perfectly() {
        let rows: Vec<(usize, f64)> = [4, 8, 16, 32].iter().map(|&n| (n, 3.0 / (n * n) as f64)).collect();
        let f = fit_inverse_square(&rows).unwrap();
        assert!((f.c - 3.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12 && (f.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_skipped() {
        assert!(fit_inverse_square(&[(4, 1.0)]).is_none());
        assert!(fit_inverse_square(&[(4, 1.0), (4, 1.0)]).is_none());
        assert!(fit_inverse_square(&[(4, 1.0), (8, 0.0)]).is_none());
    }

    #[test]
    fn inverse_linear_data_fits_worse() {
        let rows: Vec<(usize, f64)> = [2, 4, 8, 16, 32].iter().map(|&n| (n, 1.0 / n as f64)).collect();
        let f = fit_inverse_square(&rows).unwrap();
        assert!(f.r_squared < 0.95 && (f.slope + 1.0).abs() < 1e-12);
    }
}
