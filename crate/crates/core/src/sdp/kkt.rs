//! Reduced KKT systems of the interior-point method.
//!
//! `[0 Aᵀ Gᵀ; A 0 0; G 0 −WᵀW]` is solved through the positive definite
//! matrix `H = Gᵀ(WᵀW)⁻¹G + AᵀA`, factored by a block-sparse Cholesky over
//! the variable blocks, plus a dense Schur complement for the equalities.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::cone::{a_mul, at_mul_add, g_mul, gt_mul_add, ConeVec, Scaling};
use super::embed::{ConeKind, Part, StandardForm};

const REFINE_STEPS: usize = 3;

#[derive(Debug)]
pub(crate) struct KktSolver {
    /// Elimination position of each variable block.
    pos: Vec<usize>,
    /// Variable block at each position.
    order: Vec<usize>,
    /// Coordinate range of each position.
    ranges: Vec<Range<usize>>,
    /// For each position, later positions coupled to it (including fill).
    adj: Vec<Vec<usize>>,
    /// Per cone: (variable block, column range) groups.
    groups: Vec<Vec<(usize, Range<usize>)>>,
    factor: BTreeMap<(usize, usize), DMatrix<f64>>,
    /// `H⁻¹ Aᵀ` and the Cholesky factor of `A H⁻¹ Aᵀ`.
    hinv_at: DMatrix<f64>,
    schur: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl KktSolver {
    pub fn new(form: &StandardForm) -> Self {
        let nb = form.vars.len();
        let owner = form.var_owner();
        let mut groups = Vec::with_capacity(form.cones.len());
        let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nb];
        let link = |blocks: &BTreeSet<usize>, edges: &mut Vec<BTreeSet<usize>>| {
            for &a in blocks {
                for &b in blocks {
                    if a != b {
                        edges[a].insert(b);
                    }
                }
            }
        };
        for cone in &form.cones {
            let mut g: Vec<(usize, Range<usize>)> = Vec::new();
            for (k, col) in cone.cols.iter().enumerate() {
                let b = owner[col.var];
                match g.last_mut() {
                    Some((lb, r)) if *lb == b => r.end = k + 1,
                    _ => g.push((b, k..k + 1)),
                }
            }
            let set: BTreeSet<usize> = g.iter().map(|x| x.0).collect();
            debug_assert_eq!(set.len(), g.len(), "cone columns must be sorted by variable");
            link(&set, &mut edges);
            groups.push(g);
        }
        for row in &form.a {
            let set: BTreeSet<usize> = row.idx.iter().map(|&i| owner[i]).collect();
            link(&set, &mut edges);
        }

        // Minimum-degree ordering on the block graph, weighted by block sizes.
        let sizes: Vec<usize> = form.vars.iter().map(|v| v.len()).collect();
        let mut alive: BTreeSet<usize> = (0..nb).collect();
        let mut order = Vec::with_capacity(nb);
        let mut elim_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nb];
        while let Some(&best) = alive
            .iter()
            .min_by_key(|&&b| (edges[b].iter().map(|&o| sizes[o]).sum::<usize>(), b))
        {
            alive.remove(&best);
            let nbrs: Vec<usize> = edges[best].iter().copied().collect();
            for &a in &nbrs {
                edges[a].remove(&best);
                for &c in &nbrs {
                    if a != c {
                        edges[a].insert(c);
                    }
                }
            }
            elim_adj[best] = edges[best].clone();
            edges[best].clear();
            order.push(best);
        }
        let mut pos = vec![0; nb];
        for (p, &b) in order.iter().enumerate() {
            pos[b] = p;
        }
        let adj: Vec<Vec<usize>> = order
            .iter()
            .map(|&b| {
                let mut v: Vec<usize> = elim_adj[b].iter().map(|&o| pos[o]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let ranges = order
            .iter()
            .map(|&b| form.vars[b].offset..form.vars[b].offset + form.vars[b].len())
            .collect();
        Self {
            pos,
            order,
            ranges,
            adj,
            groups,
            factor: BTreeMap::new(),
            hinv_at: DMatrix::zeros(0, 0),
            schur: None,
        }
    }

    fn zero_blocks(&self) -> BTreeMap<(usize, usize), DMatrix<f64>> {
        let mut m = BTreeMap::new();
        for p in 0..self.order.len() {
            let np = self.ranges[p].len();
            m.insert((p, p), DMatrix::zeros(np, np));
            for &q in &self.adj[p] {
                m.insert((p, q), DMatrix::zeros(np, self.ranges[q].len()));
            }
        }
        m
    }

    fn add_entry(&self, h: &mut BTreeMap<(usize, usize), DMatrix<f64>>, form: &StandardForm, va: usize, vb: usize, ba: usize, bb: usize, val: f64) {
        let (pa, pb) = (self.pos[ba], self.pos[bb]);
        let ia = va - form.vars[ba].offset;
        let ib = vb - form.vars[bb].offset;
        if pa < pb {
            h.get_mut(&(pa, pb)).expect("symbolic block")[(ia, ib)] += val;
        } else if pb < pa {
            h.get_mut(&(pb, pa)).expect("symbolic block")[(ib, ia)] += val;
        } else {
            let blk = h.get_mut(&(pa, pa)).expect("diagonal block");
            blk[(ia, ib)] += val;
            if ia != ib {
                blk[(ib, ia)] += val;
            }
        }
    }

    fn assemble(&self, form: &StandardForm, scalings: &[Scaling]) -> BTreeMap<(usize, usize), DMatrix<f64>> {
        let mut h = self.zero_blocks();
        let owner_of = |g: &Vec<(usize, Range<usize>)>, k: usize| g.iter().find(|(_, r)| r.contains(&k)).map(|x| x.0).unwrap();
        for ((cone, w), groups) in form.cones.iter().zip(scalings).zip(&self.groups) {
            let owners: Vec<usize> = (0..cone.cols.len()).map(|k| owner_of(groups, k)).collect();
            match (cone.kind, w.q()) {
                (ConeKind::Nonneg(n), Part::Lin(q)) => {
                    // Row-wise: H_ab += Σ_i g_ia q_i g_ib.
                    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                    for (k, col) in cone.cols.iter().enumerate() {
                        for &(i, _, g) in &col.entries {
                            rows[i as usize].push((k, g));
                        }
                    }
                    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                    for (i, row) in rows.iter().enumerate() {
                        for (x, &(ka, ga)) in row.iter().enumerate() {
                            for &(kb, gb) in &row[x..] {
                                *acc.entry((ka.min(kb), ka.max(kb))).or_insert(0.0) += ga * q[i] * gb;
                            }
                        }
                    }
                    for ((ka, kb), v) in acc {
                        self.add_entry(&mut h, form, cone.cols[ka].var, cone.cols[kb].var, owners[ka], owners[kb], v);
                    }
                }
                (ConeKind::Psd(n), Part::Sym(q)) => {
                    for (kb, colb) in cone.cols.iter().enumerate() {
                        let y = if colb.entries.len() > 2 * n {
                            let mut m = DMatrix::zeros(n, n);
                            for &(i, j, v) in &colb.entries {
                                m[(i as usize, j as usize)] += v;
                                if i != j {
                                    m[(j as usize, i as usize)] += v;
                                }
                            }
                            &q * m * &q
                        } else {
                            let mut y = DMatrix::zeros(n, n);
                            for &(i, j, v) in &colb.entries {
                                let (i, j) = (i as usize, j as usize);
                                let qi = q.column(i);
                                let qj = q.column(j);
                                y.ger(v, &qi, &qj, 1.0);
                                if i != j {
                                    y.ger(v, &qj, &qi, 1.0);
                                }
                            }
                            y
                        };
                        for ka in 0..=kb {
                            let cola = &cone.cols[ka];
                            let v: f64 = cola
                                .entries
                                .iter()
                                .map(|&(i, j, g)| {
                                    let (i, j) = (i as usize, j as usize);
                                    if i == j {
                                        g * y[(i, i)]
                                    } else {
                                        g * (y[(i, j)] + y[(j, i)])
                                    }
                                })
                                .sum();
                            if v != 0.0 {
                                self.add_entry(&mut h, form, cola.var, colb.var, owners[ka], owners[kb], v);
                            }
                        }
                    }
                }
                _ => unreachable!("scaling does not match cone"),
            }
        }
        let owner = form.var_owner();
        for row in &form.a {
            for (x, (&ia, &va)) in row.idx.iter().zip(&row.val).enumerate() {
                for (&ib, &vb) in row.idx[x..].iter().zip(&row.val[x..]) {
                    self.add_entry(&mut h, form, ia, ib, owner[ia], owner[ib], va * vb);
                }
            }
        }
        h
    }

    /// Factors `UᵀU = H` in place; returns false if a pivot block is not positive definite.
    fn cholesky(&self, h: &mut BTreeMap<(usize, usize), DMatrix<f64>>) -> bool {
        for k in 0..self.order.len() {
            let hkk = h.remove(&(k, k)).expect("diagonal block");
            let Some(ch) = hkk.cholesky() else {
                return false;
            };
            let l = ch.l();
            for &q in &self.adj[k] {
                let hkq = h.get_mut(&(k, q)).expect("symbolic block");
                if !l.solve_lower_triangular_mut(hkq) {
                    return false;
                }
            }
            for (x, &p) in self.adj[k].iter().enumerate() {
                for &q in &self.adj[k][x..] {
                    let upd = h[&(k, p)].tr_mul(&h[&(k, q)]);
                    let target = h.get_mut(&(p, q)).expect("fill block");
                    *target -= upd;
                }
            }
            h.insert((k, k), l.transpose());
        }
        true
    }

    /// Assembles and factors the system at the given scalings.
    pub fn factor(&mut self, form: &StandardForm, scalings: &[Scaling]) -> bool {
        let base = self.assemble(form, scalings);
        let max_diag = (0..self.order.len())
            .map(|p| base[&(p, p)].diagonal().amax())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut ok = false;
        for reg in [0.0, 1e-13, 1e-10, 1e-7] {
            let mut h = base.clone();
            if reg > 0.0 {
                log::debug!("regularizing KKT matrix with {reg:e}");
                for p in 0..self.order.len() {
                    let blk = h.get_mut(&(p, p)).unwrap();
                    for i in 0..blk.nrows() {
                        blk[(i, i)] += reg * max_diag;
                    }
                }
            }
            if self.cholesky(&mut h) {
                self.factor = h;
                ok = true;
                break;
            }
        }
        if !ok {
            return false;
        }
        let m = form.m();
        self.schur = None;
        if m > 0 {
            let mut z = DMatrix::zeros(form.n, m);
            for (r, row) in form.a.iter().enumerate() {
                let mut col = vec![0.0; form.n];
                for (&i, &v) in row.idx.iter().zip(&row.val) {
                    col[i] = v;
                }
                self.solve_h(&mut col);
                z.column_mut(r).copy_from_slice(&col);
            }
            let mut s = DMatrix::zeros(m, m);
            for (r, row) in form.a.iter().enumerate() {
                for c in 0..m {
                    s[(r, c)] = row.idx.iter().zip(&row.val).map(|(&i, v)| v * z[(i, c)]).sum();
                }
            }
            let s = (&s + s.transpose()) * 0.5;
            self.schur = match s.clone().cholesky() {
                Some(c) => Some(c),
                None => {
                    let d = s.diagonal().amax().max(f64::MIN_POSITIVE);
                    let mut reg = s;
                    for i in 0..m {
                        reg[(i, i)] += 1e-12 * d;
                    }
                    match reg.cholesky() {
                        Some(c) => Some(c),
                        None => return false,
                    }
                }
            };
            self.hinv_at = z;
        }
        true
    }

    /// Solves `H x = r` in place with the current factor.
    fn solve_h(&self, r: &mut [f64]) {
        let np = self.order.len();
        let mut parts: Vec<DVector<f64>> = self.ranges.iter().map(|rg| DVector::from_column_slice(&r[rg.clone()])).collect();
        for k in 0..np {
            let u = &self.factor[&(k, k)];
            u.tr_solve_upper_triangular_mut(&mut parts[k]);
            let wk = parts[k].clone();
            for &q in &self.adj[k] {
                let ukq = &self.factor[&(k, q)];
                parts[q].gemv_tr(-1.0, ukq, &wk, 1.0);
            }
        }
        for k in (0..np).rev() {
            let mut acc = parts[k].clone();
            for &q in &self.adj[k] {
                let ukq = &self.factor[&(k, q)];
                acc.gemv(-1.0, ukq, &parts[q], 1.0);
            }
            self.factor[&(k, k)].solve_upper_triangular_mut(&mut acc);
            parts[k] = acc;
        }
        for (rg, p) in self.ranges.iter().zip(&parts) {
            r[rg.clone()].copy_from_slice(p.as_slice());
        }
    }

    fn solve_once(&self, form: &StandardForm, w: &[Scaling], r1: &[f64], r2: &[f64], r3: &ConeVec) -> (Vec<f64>, Vec<f64>, ConeVec) {
        let q_r3 = ConeVec(w.iter().zip(&r3.0).map(|(s, p)| s.apply_wtw_inv(p)).collect());
        let mut rt = r1.to_vec();
        gt_mul_add(form, &q_r3, &mut rt);
        at_mul_add(form, r2, &mut rt);
        let mut u = rt;
        self.solve_h(&mut u);
        let m = form.m();
        let y = if m > 0 {
            let au = a_mul(form, &u);
            let rhs = DVector::from_iterator(m, au.iter().zip(r2).map(|(a, b)| a - b));
            let y = self.schur.as_ref().expect("schur factor").solve(&rhs);
            let zy = &self.hinv_at * &y;
            for (ui, v) in u.iter_mut().zip(zy.iter()) {
                *ui -= v;
            }
            y.as_slice().to_vec()
        } else {
            Vec::new()
        };
        let x = u;
        let mut gx = g_mul(form, &x);
        gx.axpy(-1.0, r3);
        let z = ConeVec(w.iter().zip(&gx.0).map(|(s, p)| s.apply_wtw_inv(p)).collect());
        (x, y, z)
    }

    fn residual(form: &StandardForm, w: &[Scaling], r1: &[f64], r2: &[f64], r3: &ConeVec, x: &[f64], y: &[f64], z: &ConeVec) -> (Vec<f64>, Vec<f64>, ConeVec, f64) {
        let mut lhs1 = vec![0.0; form.n];
        at_mul_add(form, y, &mut lhs1);
        gt_mul_add(form, z, &mut lhs1);
        let e1: Vec<f64> = r1.iter().zip(&lhs1).map(|(a, b)| a - b).collect();
        let ax = a_mul(form, x);
        let e2: Vec<f64> = r2.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let mut e3 = r3.clone();
        let gx = g_mul(form, x);
        e3.axpy(-1.0, &gx);
        let wz = ConeVec(w.iter().zip(&z.0).map(|(s, p)| s.apply_wtw(p)).collect());
        e3.axpy(1.0, &wz);
        // Measured in the scaled variables, where the blocks are balanced.
        let se3 = ConeVec(w.iter().zip(&e3.0).map(|(s, p)| s.apply_winv_t(p)).collect());
        let norm = (e1.iter().chain(&e2).map(|v| v * v).sum::<f64>() + se3.dot(&se3)).sqrt();
        (e1, e2, e3, norm)
    }

    /// Solves the full KKT system with iterative refinement.
    pub fn solve(&self, form: &StandardForm, w: &[Scaling], r1: &[f64], r2: &[f64], r3: &ConeVec) -> (Vec<f64>, Vec<f64>, ConeVec) {
        let (mut x, mut y, mut z) = self.solve_once(form, w, r1, r2, r3);
        let rhs_norm = (r1.iter().chain(r2).map(|v| v * v).sum::<f64>() + r3.dot(r3)).sqrt().max(1e-300);
        let (mut e1, mut e2, mut e3, mut err) = Self::residual(form, w, r1, r2, r3, &x, &y, &z);
        for _ in 0..REFINE_STEPS {
            if err <= 1e-14 * rhs_norm {
                break;
            }
            let (dx, dy, dz) = self.solve_once(form, w, &e1, &e2, &e3);
            let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let yn: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
            let mut zn = z.clone();
            zn.axpy(1.0, &dz);
            let (f1, f2, f3, errn) = Self::residual(form, w, r1, r2, r3, &xn, &yn, &zn);
            if !(errn < err) {
                break;
            }
            (x, y, z) = (xn, yn, zn);
            (e1, e2, e3, err) = (f1, f2, f3, errn);
        }
        log::trace!("kkt residual {:.2e} (rhs {:.2e})", err, rhs_norm);
        (x, y, z)
    }
}
