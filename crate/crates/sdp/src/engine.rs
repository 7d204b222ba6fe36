//! Primal log-barrier path following with damped Newton centering.
//!
//! Each LMI block `F(x) ⪰ 0` contributes `-log det F(x)` to the barrier.
//! With `F = L Lᵀ`, the block Hessian `A_bᵀ (F⁻¹ ⊗ₛ F⁻¹) A_b` factors as
//! `Ãᵀ Ã` with `Ã = (L⁻¹ ⊗ₛ L⁻¹) A_b`, so the full Hessian is `ÃᵀÃ + D`
//! where `D` is the diagonal barrier of the scalar lower bounds. Bounded
//! coordinates (typically many multipliers) are eliminated through
//! `I + Ã_v D_v⁻¹ Ã_vᵀ`, whose size is the total `svec` length of the
//! blocks, leaving a small system in the unbounded coordinates. The cost of
//! a Newton step is therefore linear in the number of bounded coordinates.

use crate::layout::{smat, svec, svec_index, svec_len};
use crate::problem::ConicProblem;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::f64::consts::SQRT_2;

pub(crate) struct EBlock {
    dim: usize,
    /// `svec(F0)`.
    c: DVector<f64>,
    /// Column `k` is `svec(F_k)`; the margin column, if any, is `-svec(I)`.
    a: DMatrix<f64>,
}

impl EBlock {
    fn slack(&self, x: &DVector<f64>) -> DMatrix<f64> {
        smat(&(&self.c + &self.a * x), self.dim)
    }
}

pub(crate) enum Goal {
    /// Maximize the margin coordinate (the last one).
    Margin,
    /// Maximize `log det` of the affine matrix `G(x)`.
    LogDet(EBlock),
}

pub(crate) struct Engine {
    pub nv: usize,
    blocks: Vec<EBlock>,
    goal: Goal,
    /// Lower bound per coordinate, if any.
    lower: Vec<Option<f64>>,
    u_idx: Vec<usize>,
    v_idx: Vec<usize>,
    /// Barrier parameter count: sum of block dimensions plus bounds.
    pub degree: f64,
}

pub(crate) struct Newton {
    pub step: DVector<f64>,
    pub decrement_sq: f64,
}

fn block_columns(dim: usize, nv: usize, c0: &DMatrix<f64>, terms: &[(usize, DMatrix<f64>)], margin: Option<usize>) -> EBlock {
    let s = svec_len(dim);
    let mut a = DMatrix::zeros(s, nv);
    for (k, f) in terms {
        a.set_column(*k, &svec(f));
    }
    if let Some(m) = margin {
        a.set_column(m, &(-svec(&DMatrix::identity(dim, dim))));
    }
    EBlock { dim, c: svec(c0), a }
}

impl Engine {
    /// Margin formulation: maximize `s` subject to `F_b(x) - s I ⪰ 0`.
    /// `extra_psd` lists symmetric variables that must additionally be
    /// kept positive definite (the log-det target during phase one).
    pub fn margin(p: &ConicProblem, extra_psd: Option<crate::layout::VarId>) -> Self {
        let n = p.n_coords();
        let nv = n + 1;
        let mut blocks: Vec<EBlock> = p
            .blocks
            .iter()
            .map(|b| {
                let (c0, terms) = b.as_psd();
                block_columns(b.dim, nv, &c0, &terms, Some(n))
            })
            .collect();
        if let Some(v) = extra_psd {
            let (c0, terms, dim) = target_terms(p, v);
            blocks.push(block_columns(dim, nv, &c0, &terms, Some(n)));
        }
        let mut lower = vec![None; nv];
        for &(k, l) in &p.lower_bounds {
            lower[k] = Some(l);
        }
        Self::assemble(nv, blocks, Goal::Margin, lower)
    }

    /// Log-det formulation over the original coordinates.
    pub fn logdet(p: &ConicProblem, target: crate::layout::VarId) -> Self {
        let nv = p.n_coords();
        let blocks: Vec<EBlock> = p
            .blocks
            .iter()
            .map(|b| {
                let (c0, terms) = b.as_psd();
                block_columns(b.dim, nv, &c0, &terms, None)
            })
            .collect();
        let (c0, terms, dim) = target_terms(p, target);
        let goal = Goal::LogDet(block_columns(dim, nv, &c0, &terms, None));
        let mut lower = vec![None; nv];
        for &(k, l) in &p.lower_bounds {
            lower[k] = Some(l);
        }
        Self::assemble(nv, blocks, goal, lower)
    }

    fn assemble(nv: usize, blocks: Vec<EBlock>, goal: Goal, lower: Vec<Option<f64>>) -> Self {
        let u_idx = (0..nv).filter(|&k| lower[k].is_none()).collect();
        let v_idx: Vec<usize> = (0..nv).filter(|&k| lower[k].is_some()).collect();
        let degree = blocks.iter().map(|b| b.dim as f64).sum::<f64>() + v_idx.len() as f64;
        Self {
            nv,
            blocks,
            goal,
            lower,
            u_idx,
            v_idx,
            degree,
        }
    }

    pub fn min_block_eigenvalue(&self, x: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.slack(x).symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Pushes bounded coordinates strictly inside their bounds.
    pub fn interiorize(&self, x: &mut DVector<f64>) {
        for k in 0..self.nv {
            if let Some(l) = self.lower[k] {
                let floor = l + 1e-3 * l.abs().max(1.0);
                if !(x[k] > floor) {
                    x[k] = l + l.abs().max(1.0);
                }
            }
        }
    }

    /// `t * f0(x) + barrier(x)`, or `None` outside the domain.
    pub fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = 0.0;
        for (k, l) in self.lower.iter().enumerate() {
            if let Some(l) = l {
                let s = x[k] - l;
                if !(s > 0.0) {
                    return None;
                }
                v -= s.ln();
            }
        }
        for b in &self.blocks {
            v -= log_det(b.slack(x))?;
        }
        match &self.goal {
            Goal::Margin => v -= t * x[self.nv - 1],
            Goal::LogDet(g) => v -= t * log_det(g.slack(x))?,
        }
        Some(v)
    }

    pub fn objective(&self, x: &DVector<f64>) -> Option<f64> {
        match &self.goal {
            Goal::Margin => Some(x[self.nv - 1]),
            Goal::LogDet(g) => log_det(g.slack(x)),
        }
    }

    /// Scaled coefficient rows `Ã` of all blocks (and of the log-det goal,
    /// weighted by `sqrt(t)`) together with the gradient.
    fn scaled_system(&self, x: &DVector<f64>, t: f64) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let total: usize = self.blocks.iter().map(|b| b.a.nrows()).sum::<usize>()
            + match &self.goal {
                Goal::LogDet(g) => g.a.nrows(),
                Goal::Margin => 0,
            };
        let mut at = DMatrix::zeros(total, self.nv);
        let mut grad = DVector::zeros(self.nv);
        let mut row = 0;
        let mut push = |b: &EBlock, weight: f64, at: &mut DMatrix<f64>, grad: &mut DVector<f64>| -> Option<()> {
            let op = congruence_operator(&b.slack(x))?;
            let scaled = (op * &b.a) * weight;
            let id = svec(&DMatrix::identity(b.dim, b.dim));
            // -weight * tr(L⁻¹ F_k L⁻ᵀ) per coordinate
            grad.gemv_tr(-weight, &scaled, &id, 1.0);
            at.rows_mut(row, b.a.nrows()).copy_from(&scaled);
            row += b.a.nrows();
            Some(())
        };
        for b in &self.blocks {
            push(b, 1.0, &mut at, &mut grad)?;
        }
        match &self.goal {
            Goal::Margin => grad[self.nv - 1] -= t,
            Goal::LogDet(g) => push(g, t.sqrt(), &mut at, &mut grad)?,
        }
        for (k, l) in self.lower.iter().enumerate() {
            if let Some(l) = l {
                grad[k] -= 1.0 / (x[k] - l);
            }
        }
        Some((at, grad))
    }

    /// Newton direction for `t f0 + barrier` at a strictly feasible `x`.
    pub fn newton(&self, x: &DVector<f64>, t: f64) -> Option<Newton> {
        let (at, grad) = self.scaled_system(x, t)?;
        let r = -&grad;
        let sdim = at.nrows();
        let nu = self.u_idx.len();
        let nvb = self.v_idx.len();

        let au = at.select_columns(&self.u_idx);
        let av = at.select_columns(&self.v_idx);
        // D_v⁻¹ = sigma²
        let sig: DVector<f64> = DVector::from_iterator(
            nvb,
            self.v_idx.iter().map(|&k| x[k] - self.lower[k].unwrap()),
        );
        let sig2 = sig.component_mul(&sig);
        let mut av_scaled = av.clone();
        for (j, mut col) in av_scaled.column_iter_mut().enumerate() {
            col *= sig[j];
        }
        let mut g = DMatrix::identity(sdim, sdim);
        g.gemm(1.0, &av_scaled, &av_scaled.transpose(), 1.0);
        let g = robust_cholesky(g)?;

        let rv = DVector::from_iterator(nvb, self.v_idx.iter().map(|&k| r[k]));
        let ru = DVector::from_iterator(nu, self.u_idx.iter().map(|&k| r[k]));
        let w = &av * rv.component_mul(&sig2);
        let gi_w = g.solve(&w);

        let (du, z) = if nu > 0 {
            let gi_au = g.solve(&au);
            let k = au.transpose() * &gi_au;
            let rhs = &ru - au.transpose() * &gi_w;
            let du = solve_spd(k, &rhs)?;
            let z = &gi_au * &du + &gi_w;
            (du, z)
        } else {
            (DVector::zeros(0), gi_w)
        };
        let dv = (&rv - av.transpose() * &z).component_mul(&sig2);

        let mut step = DVector::zeros(self.nv);
        for (j, &k) in self.u_idx.iter().enumerate() {
            step[k] = du[j];
        }
        for (j, &k) in self.v_idx.iter().enumerate() {
            step[k] = dv[j];
        }
        let decrement_sq = r.dot(&step);
        if !decrement_sq.is_finite() {
            return None;
        }
        Some(Newton { step, decrement_sq })
    }

    /// Largest step keeping every bounded coordinate strictly inside.
    pub fn max_bound_step(&self, x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
        let mut a = f64::INFINITY;
        for &k in &self.v_idx {
            if dx[k] < 0.0 {
                let l = self.lower[k].unwrap();
                a = a.min(-(x[k] - l) / dx[k]);
            }
        }
        a
    }

    /// Dense Hessian and gradient, for cross-checking the structured solve.
    #[cfg(test)]
    pub fn dense_system(&self, x: &DVector<f64>, t: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (at, grad) = self.scaled_system(x, t).unwrap();
        let mut h = at.transpose() * &at;
        for (k, l) in self.lower.iter().enumerate() {
            if let Some(l) = l {
                h[(k, k)] += 1.0 / (x[k] - l).powi(2);
            }
        }
        (h, grad)
    }
}

fn target_terms(p: &ConicProblem, v: crate::layout::VarId) -> (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>, usize) {
    let crate::layout::VarKind::Symmetric(d) = p.layout.var(v).kind else {
        unreachable!("validated")
    };
    let mut terms = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            let mut f = DMatrix::zeros(d, d);
            if i == j {
                f[(i, i)] = 1.0;
            } else {
                f[(i, j)] = 1.0 / SQRT_2;
                f[(j, i)] = 1.0 / SQRT_2;
            }
            terms.push((p.layout.symmetric_coord(v, i, j), f));
        }
    }
    (DMatrix::zeros(d, d), terms, d)
}

pub(crate) fn log_det(m: DMatrix<f64>) -> Option<f64> {
    let ch = m.cholesky()?;
    let l = ch.l_dirty();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        s += d.ln();
    }
    Some(2.0 * s)
}

/// Matrix of `X ↦ L⁻¹ X L⁻ᵀ` in `svec` coordinates, where `F = L Lᵀ`.
fn congruence_operator(f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = f.nrows();
    let ch = f.clone().cholesky()?;
    let li = ch.l().solve_lower_triangular(&DMatrix::identity(d, d))?;
    let s = svec_len(d);
    let mut op = DMatrix::zeros(s, s);
    for q in 0..d {
        for p in 0..=q {
            let col = svec_index(p, q);
            for j in 0..d {
                for i in 0..=j {
                    let v = if p == q {
                        li[(i, p)] * li[(j, p)]
                    } else {
                        (li[(i, p)] * li[(j, q)] + li[(i, q)] * li[(j, p)]) / SQRT_2
                    };
                    op[(svec_index(i, j), col)] = if i == j { v } else { v * SQRT_2 };
                }
            }
        }
    }
    Some(op)
}

fn robust_cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1.0);
    let mut reg = 1e-14 * scale;
    while reg < 1e-6 * scale {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(c) = mm.cholesky() {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

fn solve_spd(k: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let k = (&k + k.transpose()) * 0.5;
    if let Some(c) = robust_cholesky(k.clone()) {
        let x = c.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    k.lu().solve(rhs)
}
