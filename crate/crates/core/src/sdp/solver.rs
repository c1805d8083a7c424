//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov–Todd scaling and Mehrotra correction.

use serde::{Deserialize, Serialize};

use super::cone::{a_mul, at_mul_add, g_mul, gt_mul_add, ConeVec, Scaling};
use super::embed::{Part, StandardForm};
use super::kkt::KktSolver;
use super::model::SdpProblem;
use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

const STEP_FRACTION: f64 = 0.99;
/// Tolerance multiplier under which a stalled run still counts as near-optimal.
const NEAR_FACTOR: f64 = 1e3;
const MIN_STEP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub eps_gap: f64,
    pub eps_feas: f64,
    pub max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_gap: 1e-8,
            eps_feas: 1e-8,
            max_iters: 100,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_gap > 0.0 && self.eps_feas > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, Self::Optimal | Self::NearOptimal)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct DualPoint {
    pub y: Vec<f64>,
    pub z: ConeVec,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Relative primal and dual residuals and absolute gap at termination.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Optimal values of the variable blocks, in problem order.
    pub blocks: Vec<HermitianMatrix>,
    pub message: String,
    pub(crate) dual: Option<DualPoint>,
}

impl SdpSolution {
    fn failed(status: SolveStatus, message: String) -> Self {
        Self {
            status,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations: 0,
            blocks: Vec::new(),
            message,
            dual: None,
        }
    }

    pub fn block(&self, i: usize) -> &HermitianMatrix {
        &self.blocks[i]
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: ConeVec,
    z: ConeVec,
    tau: f64,
    kappa: f64,
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap_abs: f64,
    gap_ok: bool,
    /// `max(1, |objective|)` used for the relative gap.
    scale: f64,
    pcost: f64,
    dcost: f64,
    pinf: f64,
    dinf: f64,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: ConeVec,
    f4: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Ctx<'a> {
    form: &'a StandardForm,
    h: ConeVec,
    settings: SolverSettings,
    resx0: f64,
    resy0: f64,
    resz0: f64,
}

impl Ctx<'_> {
    fn metrics(&self, it: &Iterate) -> Metrics {
        let f = self.form;
        let mut hrx = vec![0.0; f.n];
        at_mul_add(f, &it.y, &mut hrx);
        gt_mul_add(f, &it.z, &mut hrx);
        let f1: Vec<f64> = hrx.iter().zip(&f.c).map(|(a, c)| a + c * it.tau).collect();
        let hry = a_mul(f, &it.x);
        let f2: Vec<f64> = hry.iter().zip(&f.b).map(|(a, b)| a - b * it.tau).collect();
        let mut hrz = g_mul(f, &it.x);
        hrz.axpy(1.0, &it.s);
        let mut f3 = hrz.clone();
        f3.axpy(-it.tau, &self.h);
        let cx = dot(&f.c, &it.x);
        let by = dot(&f.b, &it.y);
        let hz = self.h.dot(&it.z);
        let f4 = it.kappa + cx + by + hz;
        let sz = it.s.dot(&it.z);
        let pcost = cx / it.tau;
        let dcost = -(by + hz) / it.tau;
        let pres = (norm(&f2) / self.resy0).max(f3.norm() / self.resz0) / it.tau;
        let dres = norm(&f1) / self.resx0 / it.tau;
        let gap_abs = (sz / (it.tau * it.tau)).max((pcost - dcost).abs());
        let scale = (pcost + f.c0).abs().min((dcost + f.c0).abs()).max(1.0);
        let gap_ok = gap_abs <= self.settings.eps_gap * scale;
        let pinf = if hz + by < 0.0 { norm(&hrx) / self.resx0 / (-(hz + by)) } else { f64::INFINITY };
        let dinf = if cx < 0.0 {
            (norm(&hry) / self.resy0).max(hrz.norm() / self.resz0) / (-cx)
        } else {
            f64::INFINITY
        };
        Metrics {
            pres,
            dres,
            gap_abs,
            gap_ok,
            scale,
            pcost,
            dcost,
            pinf,
            dinf,
            f1,
            f2,
            f3,
            f4,
        }
    }
}

/// Solves the problem to the requested tolerances.
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    settings.validate()?;
    let form = StandardForm::from_problem(problem)?;
    if let Some(msg) = &form.infeasible {
        return Ok(SdpSolution::failed(SolveStatus::Infeasible, msg.clone()));
    }
    if form.cones.is_empty() {
        return Err(Error::InvalidProblem("problem has no conic constraints".into()));
    }
    Ok(solve_form(&form, settings))
}

pub(crate) fn solve_form(form: &StandardForm, settings: &SolverSettings) -> SdpSolution {
    let n = form.n;
    let m = form.m();
    let nu = form.degree() as f64;
    let h = ConeVec::h(form);
    let ctx = Ctx {
        form,
        resx0: norm(&form.c).max(1.0),
        resy0: norm(&form.b).max(1.0),
        resz0: h.norm().max(1.0),
        h,
        settings: *settings,
    };
    let mut kkt = KktSolver::new(form);
    for cone in &form.cones {
        log::trace!("cone {:?}: {}", cone.kind, cone.label);
    }

    // Initial point from two least-squares problems at W = I.
    let e = ConeVec::identity(form);
    let mut w: Vec<Scaling> = e.0.iter().map(|p| Scaling::compute(p, p).expect("identity is interior")).collect();
    if !kkt.factor(form, &w) {
        return SdpSolution::failed(SolveStatus::NumericalFailure, "initial KKT factorization failed".into());
    }
    let zero_n = vec![0.0; n];
    let zero_cone = ConeVec::zeros(form);
    let (x0, _, zt) = kkt.solve(form, &w, &zero_n, &form.b, &ctx.h);
    let mut s0 = zt.scaled(-1.0);
    let neg_c: Vec<f64> = form.c.iter().map(|v| -v).collect();
    let (_, y0, mut z0) = kkt.solve(form, &w, &neg_c, &vec![0.0; m], &zero_cone);
    for v in [&mut s0, &mut z0] {
        let shortfall = -v.min_eig();
        if shortfall >= -1e-8 * v.norm().max(1.0) {
            v.axpy(1.0 + shortfall, &e);
        }
    }
    let mut it = Iterate {
        x: x0,
        y: y0,
        s: s0,
        z: z0,
        tau: 1.0,
        kappa: 1.0,
    };
    match it.s.0.iter().zip(&it.z.0).map(|(s, z)| Scaling::compute(s, z)).collect::<Option<Vec<_>>>() {
        Some(ws) => w = ws,
        None => return SdpSolution::failed(SolveStatus::NumericalFailure, "initial scaling failed".into()),
    }

    let mut best: Option<(f64, Iterate, usize)> = None;
    let mut status = SolveStatus::NumericalFailure;
    let mut message = String::from("iteration limit reached");
    let mut iters = 0;
    loop {
        let mt = ctx.metrics(&it);
        log::trace!(
            "iter {iters}: pcost {:.10e} dcost {:.10e} gap {:.2e} pres {:.2e} dres {:.2e} tau {:.2e} kappa {:.2e}",
            mt.pcost,
            mt.dcost,
            mt.gap_abs,
            mt.pres,
            mt.dres,
            it.tau,
            it.kappa
        );
        if !(mt.pcost.is_finite() && mt.dcost.is_finite() && mt.pres.is_finite() && mt.dres.is_finite()) {
            message = "non-finite iterate".into();
            break;
        }
        let score = (mt.pres / settings.eps_feas).max(mt.dres / settings.eps_feas).max(mt.gap_abs / (settings.eps_gap * mt.scale));
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, it.clone(), iters));
        }
        if mt.pres <= settings.eps_feas && mt.dres <= settings.eps_feas && mt.gap_ok {
            status = SolveStatus::Optimal;
            message = "converged".into();
            break;
        }
        if mt.pinf <= settings.eps_feas {
            status = SolveStatus::Infeasible;
            message = "primal infeasibility certificate found".into();
            break;
        }
        if mt.dinf <= settings.eps_feas {
            status = SolveStatus::Unbounded;
            message = "dual infeasibility certificate found".into();
            break;
        }
        if iters >= settings.max_iters {
            break;
        }
        iters += 1;

        if !kkt.factor(form, &w) {
            message = "KKT factorization failed".into();
            break;
        }
        let neg_c: Vec<f64> = form.c.iter().map(|v| -v).collect();
        let (x1, y1, z1) = kkt.solve(form, &w, &neg_c, &form.b, &ctx.h);
        let denom_base = dot(&form.c, &x1) + dot(&form.b, &y1) + ctx.h.dot(&z1);
        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (nu + 1.0);
        let lambda: Vec<Part> = w.iter().map(Scaling::lambda_part).collect();

        let step = |sigma: f64, ds: &[Part], dk: f64| -> Step {
            let r1: Vec<f64> = mt.f1.iter().map(|v| -(1.0 - sigma) * v).collect();
            let r2: Vec<f64> = mt.f2.iter().map(|v| -(1.0 - sigma) * v).collect();
            let mut r3 = mt.f3.scaled(-(1.0 - sigma));
            let corr = ConeVec(w.iter().zip(ds).map(|(wk, d)| wk.apply_wt(&wk.lambda_div(d))).collect());
            r3.axpy(1.0, &corr);
            let (x2, y2, z2) = kkt.solve(form, &w, &r1, &r2, &r3);
            let dtau = (-(1.0 - sigma) * mt.f4 + dk / it.tau - (dot(&form.c, &x2) + dot(&form.b, &y2) + ctx.h.dot(&z2)))
                / (denom_base - it.kappa / it.tau);
            let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
            let dy: Vec<f64> = y2.iter().zip(&y1).map(|(a, b)| a + dtau * b).collect();
            let mut dz = z2;
            dz.axpy(dtau, &z1);
            let wdz: Vec<Part> = w.iter().zip(&dz.0).map(|(wk, p)| wk.apply_w(p)).collect();
            let ws_ds: Vec<Part> = w
                .iter()
                .zip(ds)
                .zip(&wdz)
                .map(|((wk, d), wz)| {
                    let mut v = wk.lambda_div(d);
                    v.axpy(1.0, wz);
                    v.scale(-1.0);
                    v
                })
                .collect();
            let dkappa = -(dk + it.kappa * dtau) / it.tau;
            let mut amax = f64::INFINITY;
            for (k, wk) in w.iter().enumerate() {
                amax = amax.min(wk.max_step(&ws_ds[k])).min(wk.max_step(&wdz[k]));
            }
            if dtau < 0.0 {
                amax = amax.min(-it.tau / dtau);
            }
            if dkappa < 0.0 {
                amax = amax.min(-it.kappa / dkappa);
            }
            Step {
                dx,
                dy,
                dtau,
                dkappa,
                ws_ds,
                wdz,
                amax,
            }
        };

        // Predictor.
        let ds_aff: Vec<Part> = w.iter().zip(&lambda).map(|(wk, l)| wk.lambda_prod(l)).collect();
        let aff = step(0.0, &ds_aff, it.kappa * it.tau);
        let sigma = (1.0 - aff.amax.min(1.0)).powi(3);

        // Corrector.
        let ds_cc: Vec<Part> = ds_aff
            .iter()
            .zip(aff.ws_ds.iter().zip(&aff.wdz))
            .zip(w.iter())
            .map(|((d, (a, b)), wk)| {
                let mut v = d.clone();
                v.axpy(1.0, &a.jordan(b));
                v.axpy(-sigma * mu, &wk.lambda_part().identity_like());
                v
            })
            .collect();
        let dk_cc = it.kappa * it.tau + aff.dkappa * aff.dtau - sigma * mu;
        let st = step(sigma, &ds_cc, dk_cc);
        let mut alpha = (STEP_FRACTION * st.amax).min(1.0);

        let mut updated = None;
        for _ in 0..8 {
            let new_w: Option<Vec<Scaling>> = w
                .iter()
                .zip(lambda.iter())
                .zip(st.ws_ds.iter().zip(&st.wdz))
                .map(|((wk, l), (us, uz))| {
                    let mut stl = l.clone();
                    stl.axpy(alpha, us);
                    let mut ztl = l.clone();
                    ztl.axpy(alpha, uz);
                    wk.update(&stl, &ztl)
                })
                .collect();
            if let Some(nw) = new_w {
                updated = Some(nw);
                break;
            }
            alpha *= 0.5;
        }
        let Some(nw) = updated else {
            message = "scaling update failed".into();
            break;
        };
        if alpha < MIN_STEP {
            message = "step size became too small".into();
            break;
        }
        w = nw;
        for (xi, d) in it.x.iter_mut().zip(&st.dx) {
            *xi += alpha * d;
        }
        for (yi, d) in it.y.iter_mut().zip(&st.dy) {
            *yi += alpha * d;
        }
        it.tau += alpha * st.dtau;
        it.kappa += alpha * st.dkappa;
        let (s, z): (Vec<Part>, Vec<Part>) = w.iter().map(Scaling::primal_dual).unzip();
        it.s = ConeVec(s);
        it.z = ConeVec(z);
    }

    if !matches!(status, SolveStatus::Optimal | SolveStatus::Infeasible | SolveStatus::Unbounded) {
        if let Some((score, b, _)) = best {
            it = b;
            if score <= NEAR_FACTOR {
                status = SolveStatus::NearOptimal;
            }
        }
    }
    let mt = ctx.metrics(&it);
    let x: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
    let mut sol = SdpSolution {
        status,
        primal_value: mt.pcost + form.c0,
        dual_value: mt.dcost + form.c0,
        primal_residual: mt.pres,
        dual_residual: mt.dres,
        gap: mt.gap_abs,
        iterations: iters,
        blocks: form.blocks(&x),
        message,
        dual: None,
    };
    match status {
        SolveStatus::Infeasible => {
            // Certificate rays are not scaled by τ.
            sol.dual = Some(DualPoint { y: it.y, z: it.z });
            sol.primal_value = f64::INFINITY;
            sol.dual_value = f64::INFINITY;
        }
        SolveStatus::Unbounded => {
            sol.primal_value = f64::NEG_INFINITY;
            sol.dual_value = f64::NEG_INFINITY;
        }
        _ => {
            sol.dual = Some(DualPoint {
                y: it.y.iter().map(|v| v / it.tau).collect(),
                z: it.z.scaled(1.0 / it.tau),
            });
        }
    }
    log::debug!("solver finished: {:?} after {} iterations ({})", sol.status, sol.iterations, sol.message);
    sol
}

struct Step {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
    /// `W⁻ᵀΔs` and `WΔz`.
    ws_ds: Vec<Part>,
    wdz: Vec<Part>,
    amax: f64,
}
