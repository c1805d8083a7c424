//! Cone vectors and Nesterov–Todd scalings for the orthant and the real PSD cone.

use nalgebra::{DMatrix, DVector};

use super::embed::{ConeBlock, ConeKind, Part, StandardForm};

/// Element of the product cone space.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ConeVec(pub Vec<Part>);

impl Part {
    fn dot(&self, other: &Part) -> f64 {
        match (self, other) {
            (Part::Lin(a), Part::Lin(b)) => a.dot(b),
            (Part::Sym(a), Part::Sym(b)) => a.dot(b),
            _ => unreachable!("mismatched cone parts"),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Part) {
        match (self, other) {
            (Part::Lin(x), Part::Lin(y)) => x.axpy(a, y, 1.0),
            (Part::Sym(x), Part::Sym(y)) => *x += y * a,
            _ => unreachable!("mismatched cone parts"),
        }
    }

    pub fn scale(&mut self, a: f64) {
        match self {
            Part::Lin(x) => *x *= a,
            Part::Sym(x) => *x *= a,
        }
    }

    pub fn zeros(kind: ConeKind) -> Part {
        match kind {
            ConeKind::Nonneg(n) => Part::Lin(DVector::zeros(n)),
            ConeKind::Psd(n) => Part::Sym(DMatrix::zeros(n, n)),
        }
    }

    pub fn identity(kind: ConeKind) -> Part {
        match kind {
            ConeKind::Nonneg(n) => Part::Lin(DVector::from_element(n, 1.0)),
            ConeKind::Psd(n) => Part::Sym(DMatrix::identity(n, n)),
        }
    }

    pub fn identity_like(&self) -> Part {
        match self {
            Part::Lin(v) => Part::Lin(DVector::from_element(v.len(), 1.0)),
            Part::Sym(m) => Part::Sym(DMatrix::identity(m.nrows(), m.nrows())),
        }
    }

    /// Smallest eigenvalue (orthant: smallest entry).
    pub fn min_eig(&self) -> f64 {
        match self {
            Part::Lin(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            Part::Sym(m) => sym_eigen(m).0.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Jordan product `(uv + vu)/2` (orthant: componentwise).
    pub fn jordan(&self, other: &Part) -> Part {
        match (self, other) {
            (Part::Lin(a), Part::Lin(b)) => Part::Lin(a.component_mul(b)),
            (Part::Sym(a), Part::Sym(b)) => {
                let p = a * b;
                Part::Sym((&p + p.transpose()) * 0.5)
            }
            _ => unreachable!("mismatched cone parts"),
        }
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self) -> Part {
        match self {
            Part::Lin(v) => Part::Lin(v.map(|x| x.max(0.0))),
            Part::Sym(m) => {
                let (vals, vecs) = sym_eigen(m);
                let d = DMatrix::from_diagonal(&vals.map(|x| x.max(0.0)));
                Part::Sym(&vecs * d * vecs.transpose())
            }
        }
    }
}

/// Symmetric eigendecomposition of the symmetrized input.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s = (m + m.transpose()) * 0.5;
    let e = s.symmetric_eigen();
    (e.eigenvalues, e.eigenvectors)
}

impl ConeVec {
    pub fn zeros(form: &StandardForm) -> Self {
        Self(form.cones.iter().map(|c| Part::zeros(c.kind)).collect())
    }

    pub fn identity(form: &StandardForm) -> Self {
        Self(form.cones.iter().map(|c| Part::identity(c.kind)).collect())
    }

    pub fn h(form: &StandardForm) -> Self {
        Self(form.cones.iter().map(|c| c.h.clone()).collect())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            x.axpy(a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.0 {
            x.scale(a);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut c = self.clone();
        c.scale(a);
        c
    }

    pub fn min_eig(&self) -> f64 {
        self.0.iter().map(Part::min_eig).fold(f64::INFINITY, f64::min)
    }

    pub fn project(&self) -> Self {
        Self(self.0.iter().map(Part::project).collect())
    }
}

/// `G x` restricted to one cone.
pub(crate) fn cone_gx(cone: &ConeBlock, x: &[f64]) -> Part {
    let mut out = Part::zeros(cone.kind);
    match &mut out {
        Part::Lin(v) => {
            for col in &cone.cols {
                let xv = x[col.var];
                if xv != 0.0 {
                    for &(i, _, g) in &col.entries {
                        v[i as usize] += g * xv;
                    }
                }
            }
        }
        Part::Sym(m) => {
            for col in &cone.cols {
                let xv = x[col.var];
                if xv != 0.0 {
                    for &(i, j, g) in &col.entries {
                        m[(i as usize, j as usize)] += g * xv;
                    }
                }
            }
            let n = m.nrows();
            for j in 0..n {
                for i in 0..j {
                    let v = m[(i, j)] + m[(j, i)];
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
    }
    out
}

pub(crate) fn g_mul(form: &StandardForm, x: &[f64]) -> ConeVec {
    ConeVec(form.cones.iter().map(|c| cone_gx(c, x)).collect())
}

/// Accumulates `Gᵀ z` into `out`.
pub(crate) fn gt_mul_add(form: &StandardForm, z: &ConeVec, out: &mut [f64]) {
    for (cone, part) in form.cones.iter().zip(&z.0) {
        match part {
            Part::Lin(v) => {
                for col in &cone.cols {
                    out[col.var] += col.entries.iter().map(|&(i, _, g)| g * v[i as usize]).sum::<f64>();
                }
            }
            Part::Sym(m) => {
                for col in &cone.cols {
                    out[col.var] += col
                        .entries
                        .iter()
                        .map(|&(i, j, g)| {
                            let (i, j) = (i as usize, j as usize);
                            if i == j {
                                g * m[(i, i)]
                            } else {
                                g * (m[(i, j)] + m[(j, i)])
                            }
                        })
                        .sum::<f64>();
                }
            }
        }
    }
}

pub(crate) fn a_mul(form: &StandardForm, x: &[f64]) -> Vec<f64> {
    form.a.iter().map(|r| r.idx.iter().zip(&r.val).map(|(&i, v)| v * x[i]).sum()).collect()
}

pub(crate) fn at_mul_add(form: &StandardForm, y: &[f64], out: &mut [f64]) {
    for (r, yv) in form.a.iter().zip(y) {
        for (&i, v) in r.idx.iter().zip(&r.val) {
            out[i] += v * yv;
        }
    }
}

/// Nesterov–Todd scaling of one cone.
///
/// Orthant: `W = diag(d)`, `d = √(s/z)`. PSD: `W(u) = rᵀ u r` with
/// `rᵀ z r = r⁻¹ s r⁻ᵀ = diag(λ)`.
#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    Lin { d: DVector<f64>, lambda: DVector<f64> },
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64>, lambda: DVector<f64> },
}

/// `(L_s, L_z) ↦ (U, Λ, V)` with `L_zᵀ L_s = U Λ Vᵀ`.
fn nt_factor(ls: &DMatrix<f64>, lz: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    // nalgebra's SVD loses accuracy on nearly diagonal inputs with paired
    // singular values, which the complex embedding produces routinely.
    let m = lz.transpose() * ls;
    let n = m.nrows();
    let svd = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]).svd().expect("SVD of a finite matrix");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    (
        DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
        DVector::from_fn(n, |i, _| s[i]),
        DMatrix::from_fn(n, n, |i, j| v[(i, j)]),
    )
}

fn chol(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let s = (m + m.transpose()) * 0.5;
    s.cholesky().map(|c| c.l())
}

impl Scaling {
    /// Scaling at a strictly interior pair `(s, z)`.
    pub fn compute(s: &Part, z: &Part) -> Option<Scaling> {
        match (s, z) {
            (Part::Lin(s), Part::Lin(z)) => {
                if s.iter().chain(z.iter()).any(|v| !(*v > 0.0)) {
                    return None;
                }
                Some(Scaling::Lin {
                    d: s.zip_map(z, |a, b| (a / b).sqrt()),
                    lambda: s.zip_map(z, |a, b| (a * b).sqrt()),
                })
            }
            (Part::Sym(s), Part::Sym(z)) => {
                let ls = chol(s)?;
                let lz = chol(z)?;
                let (u, lam, v) = nt_factor(&ls, &lz);
                if lam.iter().any(|l| !(*l > 0.0)) {
                    return None;
                }
                let isq = lam.map(|l| 1.0 / l.sqrt());
                let r = &ls * &v * DMatrix::from_diagonal(&isq);
                let rinv = DMatrix::from_diagonal(&isq) * u.transpose() * lz.transpose();
                Some(Scaling::Psd { r, rinv, lambda: lam })
            }
            _ => unreachable!("mismatched cone parts"),
        }
    }

    #[cfg(test)]
    pub fn lambda(&self) -> &DVector<f64> {
        match self {
            Scaling::Lin { lambda, .. } | Scaling::Psd { lambda, .. } => lambda,
        }
    }

    /// `λ` as a cone vector.
    pub fn lambda_part(&self) -> Part {
        match self {
            Scaling::Lin { lambda, .. } => Part::Lin(lambda.clone()),
            Scaling::Psd { lambda, .. } => Part::Sym(DMatrix::from_diagonal(lambda)),
        }
    }

    /// `W z`.
    pub fn apply_w(&self, z: &Part) -> Part {
        match (self, z) {
            (Scaling::Lin { d, .. }, Part::Lin(z)) => Part::Lin(d.component_mul(z)),
            (Scaling::Psd { r, .. }, Part::Sym(z)) => Part::Sym(r.transpose() * z * r),
            _ => unreachable!(),
        }
    }

    /// `W⁻ᵀ s`.
    pub fn apply_winv_t(&self, s: &Part) -> Part {
        match (self, s) {
            (Scaling::Lin { d, .. }, Part::Lin(s)) => Part::Lin(s.component_div(d)),
            (Scaling::Psd { rinv, .. }, Part::Sym(s)) => Part::Sym(rinv * s * rinv.transpose()),
            _ => unreachable!(),
        }
    }

    /// `Wᵀ u`.
    pub fn apply_wt(&self, u: &Part) -> Part {
        match (self, u) {
            (Scaling::Lin { d, .. }, Part::Lin(u)) => Part::Lin(d.component_mul(u)),
            (Scaling::Psd { r, .. }, Part::Sym(u)) => Part::Sym(r * u * r.transpose()),
            _ => unreachable!(),
        }
    }

    /// `(WᵀW)⁻¹ u`.
    pub fn apply_wtw_inv(&self, u: &Part) -> Part {
        match (self, u) {
            (Scaling::Lin { d, .. }, Part::Lin(u)) => Part::Lin(u.zip_map(d, |a, b| a / (b * b))),
            (Scaling::Psd { rinv, .. }, Part::Sym(u)) => {
                let q = rinv.transpose() * rinv;
                Part::Sym(&q * u * &q)
            }
            _ => unreachable!(),
        }
    }

    /// `WᵀW u`.
    pub fn apply_wtw(&self, u: &Part) -> Part {
        match (self, u) {
            (Scaling::Lin { d, .. }, Part::Lin(u)) => Part::Lin(u.zip_map(d, |a, b| a * b * b)),
            (Scaling::Psd { r, .. }, Part::Sym(u)) => {
                let p = r * r.transpose();
                Part::Sym(&p * u * &p)
            }
            _ => unreachable!(),
        }
    }

    /// `Q` with `(WᵀW)⁻¹ u = Q u Q` (orthant: the diagonal of `Q²`).
    pub fn q(&self) -> Part {
        match self {
            Scaling::Lin { d, .. } => Part::Lin(d.map(|x| 1.0 / (x * x))),
            Scaling::Psd { rinv, .. } => Part::Sym(rinv.transpose() * rinv),
        }
    }

    /// `λ ∘ u`.
    pub fn lambda_prod(&self, u: &Part) -> Part {
        match (self, u) {
            (Scaling::Lin { lambda, .. }, Part::Lin(u)) => Part::Lin(lambda.component_mul(u)),
            (Scaling::Psd { lambda, .. }, Part::Sym(u)) => {
                Part::Sym(DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| 0.5 * (lambda[i] + lambda[j]) * u[(i, j)]))
            }
            _ => unreachable!(),
        }
    }

    /// `λ \ u`, the inverse of `u ↦ λ ∘ u`.
    pub fn lambda_div(&self, u: &Part) -> Part {
        match (self, u) {
            (Scaling::Lin { lambda, .. }, Part::Lin(u)) => Part::Lin(u.component_div(lambda)),
            (Scaling::Psd { lambda, .. }, Part::Sym(u)) => {
                Part::Sym(DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| 2.0 * u[(i, j)] / (lambda[i] + lambda[j])))
            }
            _ => unreachable!(),
        }
    }

    /// Largest `α` with `λ + α u` in the cone (may be infinite).
    pub fn max_step(&self, u: &Part) -> f64 {
        let min = match (self, u) {
            (Scaling::Lin { lambda, .. }, Part::Lin(u)) => {
                u.iter().zip(lambda.iter()).map(|(a, l)| a / l).fold(f64::INFINITY, f64::min)
            }
            (Scaling::Psd { lambda, .. }, Part::Sym(u)) => {
                let isq = lambda.map(|l| 1.0 / l.sqrt());
                let m = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| isq[i] * u[(i, j)] * isq[j]);
                sym_eigen(&m).0.iter().copied().fold(f64::INFINITY, f64::min)
            }
            _ => unreachable!(),
        };
        if min >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / min
        }
    }

    /// `s` and `z` represented by this scaling.
    pub fn primal_dual(&self) -> (Part, Part) {
        match self {
            Scaling::Lin { d, lambda } => (Part::Lin(lambda.component_mul(d)), Part::Lin(lambda.component_div(d))),
            Scaling::Psd { r, rinv, lambda } => {
                let l = DMatrix::from_diagonal(lambda);
                (Part::Sym(r * &l * r.transpose()), Part::Sym(rinv.transpose() * l * rinv))
            }
        }
    }

    /// New scaling after the step, given the scaled iterates
    /// `s̃ = λ + α W⁻ᵀΔs` and `z̃ = λ + α WΔz`.
    pub fn update(&self, s_tilde: &Part, z_tilde: &Part) -> Option<Scaling> {
        match (self, s_tilde, z_tilde) {
            (Scaling::Lin { d, .. }, Part::Lin(st), Part::Lin(zt)) => {
                let s = st.component_mul(d);
                let z = zt.component_div(d);
                Scaling::compute(&Part::Lin(s), &Part::Lin(z))
            }
            (Scaling::Psd { r, rinv, .. }, Part::Sym(st), Part::Sym(zt)) => {
                let l1 = chol(st)?;
                let l2 = chol(zt)?;
                let (u, lam, v) = nt_factor(&l1, &l2);
                if lam.iter().any(|l| !(*l > 0.0)) {
                    return None;
                }
                let isq = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
                let r_new = r * l1 * v * &isq;
                let rinv_new = isq * u.transpose() * l2.transpose() * rinv;
                Some(Scaling::Psd {
                    r: r_new,
                    rinv: rinv_new,
                    lambda: lam,
                })
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{ginibre, rng_from_seed};

    fn random_pd(n: usize, seed: u64) -> DMatrix<f64> {
        let g = ginibre(n, n, &mut rng_from_seed(seed)).map(|z| z.re);
        &g * g.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn psd_scaling_identities() {
        let s = random_pd(4, 1);
        let z = random_pd(4, 2);
        let w = Scaling::compute(&Part::Sym(s.clone()), &Part::Sym(z.clone())).unwrap();
        let lam = w.lambda_part();
        let Part::Sym(wz) = w.apply_w(&Part::Sym(z.clone())) else { panic!() };
        let Part::Sym(ws) = w.apply_winv_t(&Part::Sym(s.clone())) else { panic!() };
        let Part::Sym(l) = &lam else { panic!() };
        assert!((&wz - l).norm() < 1e-10);
        assert!((&ws - l).norm() < 1e-10);
        let (s2, z2) = w.primal_dual();
        assert!(s2.min_eig() > 0.0);
        let Part::Sym(s2) = s2 else { panic!() };
        let Part::Sym(z2) = z2 else { panic!() };
        assert!((s2 - &s).norm() < 1e-10 && (z2 - &z).norm() < 1e-10);
        // At the NT point s = WᵀW z.
        let Part::Sym(back) = w.apply_wtw_inv(&Part::Sym(s.clone())) else { panic!() };
        assert!((back - &z).norm() < 1e-9 * z.norm().max(1.0));
        let u = Part::Sym(random_pd(4, 3));
        let Part::Sym(round) = w.lambda_prod(&w.lambda_div(&u)) else { panic!() };
        let Part::Sym(u) = u else { panic!() };
        assert!((round - u).norm() < 1e-10);
    }

    #[test]
    fn update_matches_fresh_scaling() {
        let s = random_pd(3, 4);
        let z = random_pd(3, 5);
        let w = Scaling::compute(&Part::Sym(s.clone()), &Part::Sym(z.clone())).unwrap();
        let ds = random_pd(3, 6) * 0.1;
        let dz = random_pd(3, 7) * -0.05;
        let st = {
            let mut p = w.lambda_part();
            p.axpy(1.0, &w.apply_winv_t(&Part::Sym(ds.clone())));
            p
        };
        let zt = {
            let mut p = w.lambda_part();
            p.axpy(1.0, &w.apply_w(&Part::Sym(dz.clone())));
            p
        };
        let updated = w.update(&st, &zt).unwrap();
        let fresh = Scaling::compute(&Part::Sym(&s + &ds), &Part::Sym(&z + &dz)).unwrap();
        let mut a: Vec<f64> = updated.lambda().iter().copied().collect();
        let mut b: Vec<f64> = fresh.lambda().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        let (s_new, _) = updated.primal_dual();
        let Part::Sym(s_new) = s_new else { panic!() };
        assert!((s_new - (&s + &ds)).norm() < 1e-10);
    }

    #[test]
    fn max_step_hits_boundary() {
        let w = Scaling::compute(&Part::Lin(DVector::from_vec(vec![1.0, 4.0])), &Part::Lin(DVector::from_vec(vec![1.0, 1.0]))).unwrap();
        // λ = (1, 2); u = (-2, 1) reaches the boundary at α = 1/2.
        let a = w.max_step(&Part::Lin(DVector::from_vec(vec![-2.0, 1.0])));
        assert!((a - 0.5).abs() < 1e-14);
        assert!(w.max_step(&Part::Lin(DVector::from_vec(vec![1.0, 1.0]))).is_infinite());
    }
}
