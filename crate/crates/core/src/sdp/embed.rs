//! Lowering of a Hermitian SDP to a real conic program
//! `min cᵀx  s.t.  Gx + s = h,  Ax = b,  s ∈ K`.
//!
//! Hermitian variables are expanded in an orthonormal basis; complex PSD
//! constraints become real PSD constraints of twice the order through
//! `M ↦ [[Re M, −Im M], [Im M, Re M]]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::model::{BlockKind, BlockStructure, MatrixRelation, ScalarFunctional, ScalarRelation, ScalarTerm, SdpProblem};
use crate::error::Result;
use crate::linalg::{CMatrix, HermitianMatrix};

const DROP_REL: f64 = 1e-15;
const DIAGONAL_REL: f64 = 1e-13;
const CONSTANT_PSD_TOL: f64 = 1e-12;
const DEPENDENT_ROW_TOL: f64 = 1e-10;

/// Real symmetric embedding of a Hermitian matrix.
pub fn embed_hermitian(m: &HermitianMatrix) -> DMatrix<f64> {
    embed_complex(m.as_matrix())
}

pub(crate) fn embed_complex(m: &CMatrix) -> DMatrix<f64> {
    let d = m.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for j in 0..d {
        for i in 0..d {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i + d, j)] = z.im;
            out[(i, j + d)] = -z.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`] after symmetrizing the real matrix.
pub fn unembed_hermitian(r: &DMatrix<f64>) -> HermitianMatrix {
    let d = r.nrows() / 2;
    let m = CMatrix::from_fn(d, d, |i, j| {
        let re = 0.25 * (r[(i, j)] + r[(j, i)] + r[(i + d, j + d)] + r[(j + d, i + d)]);
        let im = 0.25 * (r[(i + d, j)] + r[(j, i + d)] - r[(i, j + d)] - r[(j + d, i)]);
        Complex64::new(re, im)
    });
    HermitianMatrix::from_raw(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

pub(crate) fn coords(dim: usize, structure: BlockStructure) -> Vec<Coord> {
    match structure {
        BlockStructure::Diagonal => (0..dim).map(Coord::Diag).collect(),
        BlockStructure::Full => {
            let mut v = Vec::with_capacity(dim * dim);
            for i in 0..dim {
                v.push(Coord::Diag(i));
                for j in i + 1..dim {
                    v.push(Coord::Re(i, j));
                    v.push(Coord::Im(i, j));
                }
            }
            v
        }
    }
}

fn basis_element(dim: usize, c: Coord) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match c {
        Coord::Diag(i) => m[(i, i)] = Complex64::new(1.0, 0.0),
        Coord::Re(i, j) => {
            m[(i, j)] = Complex64::new(r, 0.0);
            m[(j, i)] = Complex64::new(r, 0.0);
        }
        Coord::Im(i, j) => {
            m[(i, j)] = Complex64::new(0.0, r);
            m[(j, i)] = Complex64::new(0.0, -r);
        }
    }
    m
}

fn coord_value(m: &CMatrix, c: Coord) -> f64 {
    let s = std::f64::consts::SQRT_2;
    match c {
        Coord::Diag(i) => m[(i, i)].re,
        Coord::Re(i, j) => s * 0.5 * (m[(i, j)].re + m[(j, i)].re),
        Coord::Im(i, j) => s * 0.5 * (m[(i, j)].im - m[(j, i)].im),
    }
}

#[derive(Clone, Debug)]
pub(crate) struct VarBlock {
    pub name: String,
    pub offset: usize,
    pub dim: usize,
    pub coords: Vec<Coord>,
    pub norm_bound: Option<f64>,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn matrix(&self, x: &[f64]) -> HermitianMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (k, c) in self.coords.iter().enumerate() {
            let v = x[self.offset + k];
            match *c {
                Coord::Diag(i) => m[(i, i)].re += v,
                Coord::Re(i, j) => {
                    m[(i, j)].re += r * v;
                    m[(j, i)].re += r * v;
                }
                Coord::Im(i, j) => {
                    m[(i, j)].im += r * v;
                    m[(j, i)].im -= r * v;
                }
            }
        }
        HermitianMatrix::from_raw(m)
    }

    pub fn coordinates(&self, m: &HermitianMatrix) -> Vec<f64> {
        self.coords.iter().map(|c| coord_value(m.as_matrix(), *c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ConeKind {
    Nonneg(usize),
    /// Real PSD cone of the given order.
    Psd(usize),
}

impl ConeKind {
    pub fn degree(&self) -> usize {
        match *self {
            Self::Nonneg(n) | Self::Psd(n) => n,
        }
    }
}

/// One column of `G` restricted to a cone: upper-triangle entries of a
/// symmetric matrix (for the orthant, `(i, i, v)`).
#[derive(Clone, Debug)]
pub(crate) struct ConeCol {
    pub var: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct ConeBlock {
    pub kind: ConeKind,
    pub h: Part,
    pub cols: Vec<ConeCol>,
    pub label: String,
}

/// Component of a cone vector.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Part {
    Lin(DVector<f64>),
    Sym(DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub(crate) struct SparseRow {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub vars: Vec<VarBlock>,
    pub c: Vec<f64>,
    pub c0: f64,
    pub a: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    /// Set when a constraint without variables is violated, or the
    /// equality system is inconsistent.
    pub infeasible: Option<String>,
}

type SparseImage = Vec<(usize, usize, Complex64)>;

fn sparse_of(m: &CMatrix) -> SparseImage {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((i, j, z));
            }
        }
    }
    out
}

fn clean(entries: &mut Vec<(u32, u32, f64)>) {
    entries.sort_by_key(|a| (a.1, a.0));
    let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
    for &(i, j, v) in entries.iter() {
        match merged.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += v,
            _ => merged.push((i, j, v)),
        }
    }
    let scale = merged.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
    merged.retain(|e| e.2.abs() > DROP_REL * scale);
    *entries = merged;
}

/// Upper-triangle entries of `coeff · embed(M)` for a sparse Hermitian `M`.
fn push_embedded(out: &mut Vec<(u32, u32, f64)>, img: &SparseImage, d: usize, coeff: f64) {
    for &(i, j, z) in img {
        if i <= j {
            let (iu, ju, du) = (i as u32, j as u32, d as u32);
            if z.re != 0.0 {
                out.push((iu, ju, coeff * z.re));
                out.push((iu + du, ju + du, coeff * z.re));
            }
            if z.im != 0.0 {
                // Lower-left block holds Im M; entry (i + d, j) sits at (j, i + d).
                out.push((ju, iu + du, coeff * z.im));
                if i != j {
                    out.push((iu, ju + du, -coeff * z.im));
                }
            }
        }
    }
}

struct ImageCache<'a> {
    problem: &'a SdpProblem,
    vars: &'a [VarBlock],
    cache: BTreeMap<(usize, Option<usize>), Vec<SparseImage>>,
}

impl<'a> ImageCache<'a> {
    fn images(&mut self, block: usize, map: Option<usize>) -> &Vec<SparseImage> {
        let (problem, vars) = (self.problem, self.vars);
        self.cache.entry((block, map)).or_insert_with(|| {
            let vb = &vars[block];
            vb.coords
                .iter()
                .map(|&c| {
                    let e = basis_element(vb.dim, c);
                    match map {
                        None => sparse_of(&e),
                        Some(m) => sparse_of(&problem.maps[m].apply_c(&e)),
                    }
                })
                .collect()
        })
    }
}

impl StandardForm {
    pub fn from_problem(problem: &SdpProblem) -> Result<Self> {
        problem.validate()?;
        let mut vars = Vec::with_capacity(problem.blocks.len());
        let mut n = 0;
        for b in &problem.blocks {
            let coords = coords(b.dim, b.structure);
            let len = coords.len();
            vars.push(VarBlock {
                name: b.name.clone(),
                offset: n,
                dim: b.dim,
                coords,
                norm_bound: b.norm_bound,
            });
            n += len;
        }
        let mut form = StandardForm {
            n,
            vars,
            c: vec![0.0; n],
            c0: 0.0,
            a: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
            infeasible: None,
        };
        let (c, c0) = form.functional_row(&problem.objective);
        form.c = c;
        form.c0 = c0;

        for (bi, b) in problem.blocks.iter().enumerate() {
            if b.kind != BlockKind::Psd {
                continue;
            }
            let vb = &form.vars[bi];
            let cone = match b.structure {
                BlockStructure::Diagonal => ConeBlock {
                    kind: ConeKind::Nonneg(b.dim),
                    h: Part::Lin(DVector::zeros(b.dim)),
                    cols: (0..b.dim)
                        .map(|k| ConeCol {
                            var: vb.offset + k,
                            entries: vec![(k as u32, k as u32, -1.0)],
                        })
                        .collect(),
                    label: format!("{} ⪰ 0", b.name),
                },
                BlockStructure::Full => {
                    let cols = vb
                        .coords
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| {
                            let mut entries = Vec::new();
                            push_embedded(&mut entries, &sparse_of(&basis_element(b.dim, c)), b.dim, -1.0);
                            clean(&mut entries);
                            ConeCol {
                                var: vb.offset + k,
                                entries,
                            }
                        })
                        .collect();
                    ConeBlock {
                        kind: ConeKind::Psd(2 * b.dim),
                        h: Part::Sym(DMatrix::zeros(2 * b.dim, 2 * b.dim)),
                        cols,
                        label: format!("{} ⪰ 0", b.name),
                    }
                }
            };
            form.cones.push(cone);
        }

        let mut cache = ImageCache {
            problem,
            vars: &form.vars.clone(),
            cache: BTreeMap::new(),
        };
        for (ci, con) in problem.constraints.iter().enumerate() {
            let e = &con.expr;
            let d = e.dim;
            let label = if con.label.is_empty() {
                format!("constraint {ci}")
            } else {
                con.label.clone()
            };
            let constant = e.constant.clone().unwrap_or_else(|| HermitianMatrix::zeros(d));
            if e.terms.is_empty() {
                let violated = match con.relation {
                    MatrixRelation::Psd => constant.min_eigenvalue() < -CONSTANT_PSD_TOL,
                    MatrixRelation::Zero => constant.frobenius_norm() > CONSTANT_PSD_TOL,
                };
                if violated && form.infeasible.is_none() {
                    form.infeasible = Some(format!("{label} has no variables and is violated"));
                }
                continue;
            }
            // Column images per variable, as (var, coeff, image) contributions.
            let mut contributions: BTreeMap<usize, Vec<(f64, SparseImage)>> = BTreeMap::new();
            for t in &e.terms {
                let offset = form.vars[t.block].offset;
                let imgs = cache.images(t.block, t.map);
                for (k, img) in imgs.iter().enumerate() {
                    if !img.is_empty() && t.coeff != 0.0 {
                        contributions.entry(offset + k).or_default().push((t.coeff, img.clone()));
                    }
                }
            }
            match con.relation {
                MatrixRelation::Psd => {
                    let cmat = constant.as_matrix();
                    let scale = contributions
                        .values()
                        .flatten()
                        .flat_map(|(c, img)| img.iter().map(move |e| (c * e.2).norm()))
                        .fold(cmat.iter().fold(0.0f64, |m, z| m.max(z.norm())), f64::max);
                    let thr = DIAGONAL_REL * scale;
                    let diagonal = contributions
                        .values()
                        .flatten()
                        .all(|(c, img)| img.iter().all(|&(i, j, z)| (i == j && (c * z.im).abs() <= thr) || (c * z).norm() <= thr))
                        && (0..d).all(|j| (0..d).all(|i| i == j || cmat[(i, j)].norm() <= thr));
                    if diagonal {
                        let cols = contributions
                            .iter()
                            .map(|(&var, terms)| {
                                let mut entries = Vec::new();
                                for (coeff, img) in terms {
                                    for &(i, j, z) in img {
                                        if i == j {
                                            entries.push((i as u32, i as u32, -coeff * z.re));
                                        }
                                    }
                                }
                                clean(&mut entries);
                                ConeCol { var, entries }
                            })
                            .collect();
                        form.cones.push(ConeBlock {
                            kind: ConeKind::Nonneg(d),
                            h: Part::Lin(DVector::from_fn(d, |i, _| cmat[(i, i)].re)),
                            cols,
                            label,
                        });
                    } else {
                        let cols = contributions
                            .iter()
                            .map(|(&var, terms)| {
                                let mut entries = Vec::new();
                                for (coeff, img) in terms {
                                    push_embedded(&mut entries, img, d, -coeff);
                                }
                                clean(&mut entries);
                                ConeCol { var, entries }
                            })
                            .collect();
                        form.cones.push(ConeBlock {
                            kind: ConeKind::Psd(2 * d),
                            h: Part::Sym(embed_hermitian(&constant)),
                            cols,
                            label,
                        });
                    }
                }
                MatrixRelation::Zero => {
                    let out_coords = coords(d, BlockStructure::Full);
                    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); out_coords.len()];
                    for (&var, terms) in &contributions {
                        let mut m = CMatrix::zeros(d, d);
                        for (coeff, img) in terms {
                            for &(i, j, z) in img {
                                m[(i, j)] += z * *coeff;
                            }
                        }
                        for (q, &oc) in out_coords.iter().enumerate() {
                            let v = coord_value(&m, oc);
                            if v != 0.0 {
                                *rows[q].entry(var).or_insert(0.0) += v;
                            }
                        }
                    }
                    for (q, &oc) in out_coords.iter().enumerate() {
                        let row = std::mem::take(&mut rows[q]);
                        form.push_row(row, -coord_value(constant.as_matrix(), oc));
                    }
                }
            }
        }

        for (si, sc) in problem.scalar_constraints.iter().enumerate() {
            let (row, c0) = form.functional_row(&sc.func);
            match sc.relation {
                ScalarRelation::Nonneg => {
                    let cols: Vec<ConeCol> = row
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(var, v)| ConeCol {
                            var,
                            entries: vec![(0, 0, -v)],
                        })
                        .collect();
                    if cols.is_empty() {
                        if c0 < -CONSTANT_PSD_TOL && form.infeasible.is_none() {
                            form.infeasible = Some(format!("scalar constraint {si} has no variables and is violated"));
                        }
                        continue;
                    }
                    form.cones.push(ConeBlock {
                        kind: ConeKind::Nonneg(1),
                        h: Part::Lin(DVector::from_element(1, c0)),
                        cols,
                        label: format!("scalar constraint {si}"),
                    });
                }
                ScalarRelation::Zero => {
                    let map: BTreeMap<usize, f64> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect();
                    form.push_row(map, -c0);
                }
            }
        }
        form.presolve();
        Ok(form)
    }

    fn functional_row(&self, f: &ScalarFunctional) -> (Vec<f64>, f64) {
        let mut row = vec![0.0; self.n];
        for t in &f.terms {
            let vb = &self.vars[t.block()];
            match t {
                ScalarTerm::Trace { scale, .. } => {
                    for (k, c) in vb.coords.iter().enumerate() {
                        if matches!(c, Coord::Diag(_)) {
                            row[vb.offset + k] += scale;
                        }
                    }
                }
                ScalarTerm::Inner { matrix, .. } => {
                    for (k, v) in vb.coordinates(matrix).into_iter().enumerate() {
                        row[vb.offset + k] += v;
                    }
                }
            }
        }
        (row, f.constant)
    }

    fn push_row(&mut self, row: BTreeMap<usize, f64>, rhs: f64) {
        let scale = row.values().fold(0.0f64, |m, v| m.max(v.abs()));
        let (idx, val): (Vec<usize>, Vec<f64>) = row.into_iter().filter(|(_, v)| v.abs() > DROP_REL * scale).unzip();
        if idx.is_empty() {
            if rhs.abs() > CONSTANT_PSD_TOL && self.infeasible.is_none() {
                self.infeasible = Some("equality constraint without variables is violated".into());
            }
            return;
        }
        self.a.push(SparseRow { idx, val });
        self.b.push(rhs);
    }

    /// Removes linearly dependent equality rows by modified Gram–Schmidt.
    fn presolve(&mut self) {
        if self.a.is_empty() {
            return;
        }
        let mut basis: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut keep = Vec::new();
        for (r, row) in self.a.iter().enumerate() {
            let mut v = vec![0.0; self.n];
            for (&i, &x) in row.idx.iter().zip(&row.val) {
                v[i] = x;
            }
            let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut rhs = self.b[r];
            for (q, qb) in &basis {
                let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
                rhs -= p * qb;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= DEPENDENT_ROW_TOL * norm0 {
                let scale = norm0.max(1.0) * (1.0 + self.b[r].abs());
                if rhs.abs() > 1e-8 * scale && self.infeasible.is_none() {
                    self.infeasible = Some(format!("equality row {r} is inconsistent with earlier rows"));
                }
                continue;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push((v, rhs / norm));
            keep.push(r);
        }
        if keep.len() < self.a.len() {
            log::debug!("presolve removed {} dependent equality rows", self.a.len() - keep.len());
            self.a = keep.iter().map(|&r| self.a[r].clone()).collect();
            self.b = keep.iter().map(|&r| self.b[r]).collect();
        }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn degree(&self) -> usize {
        self.cones.iter().map(|c| c.kind.degree()).sum()
    }

    pub fn blocks(&self, x: &[f64]) -> Vec<HermitianMatrix> {
        self.vars.iter().map(|v| v.matrix(x)).collect()
    }

    /// Variable block owning each coordinate.
    pub fn var_owner(&self) -> Vec<usize> {
        let mut owner = vec![0; self.n];
        for (b, v) in self.vars.iter().enumerate() {
            for k in 0..v.len() {
                owner[v.offset + k] = b;
            }
        }
        owner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{random_hermitian, rng_from_seed};
    use crate::sdp::model::{AffineOperatorExpr, BlockKind};

    #[test]
    fn embedding_preserves_spectrum_and_inner_products() {
        let mut rng = rng_from_seed(11);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let ea = embed_hermitian(&a);
        let eb = embed_hermitian(&b);
        assert!((ea.dot(&eb) - 2.0 * a.inner(&b)).abs() < 1e-12);
        let mut ev: Vec<f64> = ea.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let base = a.eigenvalues();
        for (k, v) in ev.iter().enumerate() {
            assert!((v - base[k / 2]).abs() < 1e-12);
        }
        assert!((&unembed_hermitian(&ea) - &a).frobenius_norm() < 1e-14);
    }

    #[test]
    fn basis_is_orthonormal_and_round_trips() {
        let d = 3;
        let cs = coords(d, BlockStructure::Full);
        assert_eq!(cs.len(), d * d);
        for (p, &cp) in cs.iter().enumerate() {
            let ep = HermitianMatrix::new(basis_element(d, cp)).unwrap();
            for (q, &cq) in cs.iter().enumerate() {
                let eq = HermitianMatrix::new(basis_element(d, cq)).unwrap();
                let expected = if p == q { 1.0 } else { 0.0 };
                assert!((ep.inner(&eq) - expected).abs() < 1e-15);
            }
        }
        let h = random_hermitian(d, &mut rng_from_seed(2));
        let vb = VarBlock {
            name: "x".into(),
            offset: 0,
            dim: d,
            coords: cs,
            norm_bound: None,
        };
        let x = vb.coordinates(&h);
        assert!((&vb.matrix(&x) - &h).frobenius_norm() < 1e-14);
    }

    #[test]
    fn gx_reproduces_embedded_expression() {
        let mut rng = rng_from_seed(4);
        let mut p = SdpProblem::default();
        let x = p.add_block("x", 2, BlockKind::Free);
        let c = random_hermitian(2, &mut rng);
        p.add_constraint(AffineOperatorExpr::new(2).term(x, 1.5, None).with_constant(c.clone()), MatrixRelation::Psd, "");
        let f = StandardForm::from_problem(&p).unwrap();
        let xv = random_hermitian(2, &mut rng);
        let coords = f.vars[0].coordinates(&xv);
        let cone = &f.cones[0];
        let Part::Sym(h) = &cone.h else { panic!() };
        let mut s = h.clone();
        for col in &cone.cols {
            for &(i, j, v) in &col.entries {
                let (i, j) = (i as usize, j as usize);
                s[(i, j)] -= v * coords[col.var];
                if i != j {
                    s[(j, i)] -= v * coords[col.var];
                }
            }
        }
        let expected = embed_hermitian(&(&xv.scale(1.5) + &c));
        assert!((s - expected).norm() < 1e-13);
    }

    #[test]
    fn diagonal_constraints_become_orthant() {
        let mut p = SdpProblem::default();
        let x = p.add_block("x", 3, BlockKind::Free);
        p.blocks[x].structure = BlockStructure::Diagonal;
        p.add_constraint(AffineOperatorExpr::new(3).term(x, 1.0, None), MatrixRelation::Psd, "");
        let f = StandardForm::from_problem(&p).unwrap();
        assert_eq!(f.cones[0].kind, ConeKind::Nonneg(3));
    }

    #[test]
    fn dependent_equalities_are_removed() {
        let mut p = SdpProblem::default();
        let x = p.add_block("x", 2, BlockKind::Psd);
        let e = AffineOperatorExpr::new(2).term(x, 1.0, None).with_constant(HermitianMatrix::identity(2).scale(-1.0));
        p.add_constraint(e.clone(), MatrixRelation::Zero, "");
        p.add_constraint(e, MatrixRelation::Zero, "");
        let f = StandardForm::from_problem(&p).unwrap();
        assert_eq!(f.m(), 4);
        assert!(f.infeasible.is_none());
        let mut q = p.clone();
        q.constraints[1].expr.constant = Some(HermitianMatrix::identity(2).scale(-2.0));
        assert!(StandardForm::from_problem(&q).unwrap().infeasible.is_some());
    }
}
