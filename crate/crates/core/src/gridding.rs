//! Discretization grids for the integral representation and their coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this (relative to `max(1, |t|)`) are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Smallest first grid point used when `μ = 0`.
pub const MIN_FLOOR: f64 = 1e-6;

/// First grid point used in place of `μ = 0` for a target accuracy `eps`.
pub fn mu_floor(eps: f64) -> f64 {
    MIN_FLOOR.max(eps / 10.0)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Ascending points `μ ≤ t_1 < … < t_r = λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    points: Vec<f64>,
    mu: f64,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    points: Vec<f64>,
    mu: f64,
    lambda: f64,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.points, r.mu, r.lambda)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        Self {
            points: g.points,
            mu: g.mu,
            lambda: g.lambda,
        }
    }
}

impl Grid {
    /// Sorts, merges near-duplicates, snaps the endpoints and validates.
    pub fn new(mut points: Vec<f64>, mu: f64, lambda: f64) -> Result<Self> {
        if !mu.is_finite() || !lambda.is_finite() || mu < 0.0 || lambda < mu {
            return Err(Error::InvalidGrid(format!("need 0 ≤ μ ≤ λ < ∞, got μ={mu}, λ={lambda}")));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid point".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        points.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(points.len());
        for t in points {
            match merged.last() {
                Some(&last) if close(last, t) => {}
                _ => merged.push(t),
            }
        }
        let last = *merged.last().unwrap();
        if !close(last, lambda) {
            return Err(Error::InvalidGrid(format!("last point {last} differs from λ = {lambda}")));
        }
        *merged.last_mut().unwrap() = lambda;
        if merged[0] < mu {
            if close(merged[0], mu) {
                merged[0] = mu;
            } else {
                return Err(Error::InvalidGrid(format!("first point {} below μ = {mu}", merged[0])));
            }
        }
        if lambda > mu && merged.len() < 2 && !close(mu, lambda) {
            return Err(Error::InvalidGrid("a grid over a proper interval needs at least 2 points".into()));
        }
        Ok(Self {
            points: merged,
            mu,
            lambda,
        })
    }

    /// The single-point grid for `μ = λ`.
    pub fn degenerate(value: f64) -> Result<Self> {
        Self::new(vec![value], value, value)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.points.len() == 1
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    /// Largest spacing between adjacent points.
    pub fn max_spacing(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.points.iter().any(|&p| close(p, t))
    }

    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend(extra.iter().copied().filter(|&t| t >= self.points[0] && t <= self.lambda));
        Self::new(pts, self.mu, self.lambda)
    }

    /// Union of two grids over the same range.
    pub fn union(&self, other: &Grid) -> Result<Self> {
        if !close(self.lambda, other.lambda) || !close(self.mu, other.mu) {
            return Err(Error::InvalidGrid("union of grids over different ranges".into()));
        }
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(pts, self.mu.min(other.mu), self.lambda)
    }
}

/// Equally spaced grid; for `μ = 0` the first point is lifted to `floor`.
pub fn uniform_grid(mu: f64, lambda: f64, r: usize, floor: f64) -> Result<Grid> {
    if r < 2 {
        return Err(Error::InvalidGrid(format!("uniform grid needs r ≥ 2, got {r}")));
    }
    if !(lambda > mu) || mu < 0.0 {
        return Err(Error::InvalidGrid(format!("need λ > μ ≥ 0, got μ={mu}, λ={lambda}")));
    }
    let start = if mu > 0.0 { mu } else { floor };
    if !(start > 0.0 && start < lambda) {
        return Err(Error::InvalidGrid(format!("floor {floor} must lie in (0, λ)")));
    }
    let h = (lambda - start) / (r - 1) as f64;
    let mut pts: Vec<f64> = (0..r).map(|k| start + h * k as f64).collect();
    pts[r - 1] = lambda;
    Grid::new(pts, mu, lambda)
}

/// Constant in the adaptive recursion `t_k = t_{k−1} + √(c·ε·t_{k−1})`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveFactor {
    /// `c = 1`.
    One,
    /// `c = 8`, the constant for which the ε guarantee is proven.
    #[default]
    Eight,
}

impl AdaptiveFactor {
    pub fn value(self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Eight => 8.0,
        }
    }
}

/// Grid with spacing growing like `√t`, followed by `λ`.
pub fn adaptive_grid(mu: f64, lambda: f64, eps: f64, factor: AdaptiveFactor) -> Result<Grid> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    if !(lambda > mu) || mu < 0.0 {
        return Err(Error::InvalidGrid(format!("need λ > μ ≥ 0, got μ={mu}, λ={lambda}")));
    }
    let start = if mu > 0.0 { mu } else { mu_floor(eps).min(0.5 * lambda) };
    let c = factor.value() * eps;
    let mut pts = vec![start];
    let mut t = start;
    loop {
        t += (c * t).sqrt();
        if t >= lambda || close(t, lambda) {
            break;
        }
        pts.push(t);
    }
    pts.push(lambda);
    Grid::new(pts, mu, lambda)
}

/// Per-interval coefficients of the lower bound, `α_k = log(t_k/t_{k+1})`, `β_k = t_{k+1} − t_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn lower_coefficients(grid: &Grid) -> Result<LowerCoefficients> {
    if !(grid.first() > 0.0) {
        return Err(Error::InvalidGrid("lower coefficients need t_1 > 0".into()));
    }
    let (alpha, beta) = grid
        .points
        .windows(2)
        .map(|w| ((w[0] / w[1]).ln(), w[1] - w[0]))
        .unzip();
    Ok(LowerCoefficients { alpha, beta })
}

/// Per-node coefficients of the upper bound with `γ_k = −w_k`, `δ_k = w_k t_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperCoefficients {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `(1 + 1/x) log(1 + x) − 1`.
pub(crate) fn phi(x: f64) -> f64 {
    if x < 1e-3 {
        // Σ (−1)^{n+1} xⁿ / (n(n+1))
        let mut sum = 0.0;
        let mut p = x;
        for n in 1..8 {
            let nf = n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * p / (nf * (nf + 1.0));
            p *= x;
        }
        sum
    } else {
        (1.0 + 1.0 / x) * x.ln_1p() - 1.0
    }
}

/// `1 − log(1 + x)/x`.
pub(crate) fn psi(x: f64) -> f64 {
    if x < 1e-3 {
        // Σ (−1)^{n+1} xⁿ / (n+1)
        let mut sum = 0.0;
        let mut p = x;
        for n in 1..8 {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * p / (n as f64 + 1.0);
            p *= x;
        }
        sum
    } else {
        1.0 - x.ln_1p() / x
    }
}

pub fn upper_coefficients(grid: &Grid) -> Result<UpperCoefficients> {
    if !(grid.first() > 0.0) {
        return Err(Error::InvalidGrid("upper coefficients need t_1 > 0".into()));
    }
    let t = &grid.points;
    let r = t.len();
    if r == 1 {
        return Ok(UpperCoefficients {
            gamma: vec![],
            delta: vec![],
            weights: vec![],
        });
    }
    let x: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    let weights: Vec<f64> = (0..r)
        .map(|k| {
            let left = if k > 0 { psi(x[k - 1]) } else { 0.0 };
            let right = if k + 1 < r { phi(x[k]) } else { 0.0 };
            left + right
        })
        .collect();
    let gamma = weights.iter().map(|w| -w).collect();
    let delta = weights.iter().zip(t).map(|(w, tk)| w * tk).collect();
    Ok(UpperCoefficients { gamma, delta, weights })
}

/// Weight `h` with `∫_μ^{t_1} g(s)/s ds ≤ h · g(t_1)`.
///
/// `g` is convex with `g(μ) = 0` when `ρ ⪰ μσ`, so `g(s) ≤ g(t_1)(s − μ)/(t_1 − μ)`
/// on `[μ, t_1]`; for `μ = 0` this gives `h = 1`.
pub fn head_weight(grid: &Grid) -> f64 {
    let (mu, t1) = (grid.mu, grid.first());
    if t1 <= mu {
        0.0
    } else if mu == 0.0 {
        1.0
    } else {
        psi((t1 - mu) / mu)
    }
}

/// A-priori bound `2δ²d/μ` on the gap between the two bounds.
pub fn worst_case_gap(grid: &Grid, dim: usize, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::NoAPrioriBound("the worst-case gap needs μ > 0".into()));
    }
    let delta = grid.max_spacing();
    Ok(2.0 * delta * delta * dim as f64 / mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRule {
    Uniform,
    Adaptive,
}

/// Predicted number of grid points for an ε-accurate bound.
pub fn predicted_points(rule: PointRule, mu: f64, lambda: f64, eps: f64, dim: usize) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    match rule {
        PointRule::Uniform => {
            if !(mu > 0.0) {
                return Err(Error::NoAPrioriBound("the uniform rule needs μ > 0".into()));
            }
            Ok(((lambda - mu) * (dim as f64 / (mu * eps)).sqrt() - 1e-9).ceil().max(0.0) as usize)
        }
        PointRule::Adaptive => Ok(((2.0 * lambda / eps).sqrt() - 1e-9).ceil().max(0.0) as usize),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineStrategy {
    /// Insert the midpoint of every interval.
    UniformHalve,
    /// Rebuild the adaptive grid with `ε/4`.
    AdaptiveTighten,
    /// Keep the active nodes and their neighbours, then reseed adaptively with `ε/4`.
    UpperAnchor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineContext {
    /// ε used to build the current grid.
    pub eps: f64,
    pub factor: AdaptiveFactor,
    /// Indices of nodes to retain under [`RefineStrategy::UpperAnchor`].
    pub active: Vec<usize>,
}

pub fn refine(grid: &Grid, strategy: RefineStrategy, ctx: &RefineContext) -> Result<Grid> {
    if grid.is_degenerate() {
        return Ok(grid.clone());
    }
    match strategy {
        RefineStrategy::UniformHalve => {
            let mids: Vec<f64> = grid.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            grid.with_points(&mids)
        }
        RefineStrategy::AdaptiveTighten => adaptive_from(grid, ctx.eps / 4.0, ctx.factor),
        RefineStrategy::UpperAnchor => {
            let fresh = adaptive_from(grid, ctx.eps / 4.0, ctx.factor)?;
            let r = grid.len();
            let mut keep = Vec::new();
            for &a in &ctx.active {
                if a >= r {
                    return Err(Error::InvalidArgument(format!("active node {a} outside grid of {r} points")));
                }
                keep.extend(grid.points[a.saturating_sub(1)..(a + 2).min(r)].iter().copied());
            }
            fresh.with_points(&keep)
        }
    }
}

/// Adaptive grid over the same range, starting from the grid's first point.
fn adaptive_from(grid: &Grid, eps: f64, factor: AdaptiveFactor) -> Result<Grid> {
    let g = adaptive_grid(grid.first(), grid.lambda, eps, factor)?;
    Grid::new(g.points, grid.mu, grid.lambda)
}
