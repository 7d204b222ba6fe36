//! Affine symmetric matrix expressions `F0 + sum_k x_k F_k`.

use crate::layout::{DecisionLayout, VarId, VarKind};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `F(x) ⪰ 0`
    Psd,
    /// `F(x) ⪯ 0`
    Nsd,
}

#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub name: String,
    pub dim: usize,
    pub sense: Sense,
    pub constant: DMatrix<f64>,
    /// Coefficient matrix per coordinate; coordinates absent here do not
    /// enter the block.
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl LmiBlock {
    pub fn new(name: &str, dim: usize, sense: Sense) -> Self {
        assert!(dim >= 1);
        Self {
            name: name.to_owned(),
            dim,
            sense,
            constant: DMatrix::zeros(dim, dim),
            terms: BTreeMap::new(),
        }
    }

    fn coeff(&mut self, coord: usize) -> &mut DMatrix<f64> {
        let d = self.dim;
        self.terms.entry(coord).or_insert_with(|| DMatrix::zeros(d, d))
    }

    /// Adds `value` at `(i, j)` and `(j, i)` of the coefficient of `coord`.
    fn add_sym_entry(target: &mut DMatrix<f64>, i: usize, j: usize, value: f64) {
        target[(i, j)] += value;
        if i != j {
            target[(j, i)] += value;
        }
    }

    /// Adds a constant sub-block at `(row, col)`. Off-diagonal placements
    /// also receive the transpose at `(col, row)`; diagonal placements must
    /// be symmetric and are symmetrized.
    pub fn add_constant(&mut self, row: usize, col: usize, m: &DMatrix<f64>) {
        place(&mut self.constant, row, col, m, 1.0);
    }

    /// Adds `scale * m` at `(row, col)` (with transpose completion) as the
    /// coefficient of a scalar variable.
    pub fn add_scalar_times(
        &mut self,
        layout: &DecisionLayout,
        var: VarId,
        row: usize,
        col: usize,
        m: &DMatrix<f64>,
        scale: f64,
    ) {
        let k = layout.scalar_coord(var);
        let target = self.coeff(k);
        place(target, row, col, m, scale);
    }

    /// Adds `scale * v * I_size` on the diagonal starting at `at`.
    pub fn add_scalar_identity(
        &mut self,
        layout: &DecisionLayout,
        var: VarId,
        at: usize,
        size: usize,
        scale: f64,
    ) {
        let k = layout.scalar_coord(var);
        let target = self.coeff(k);
        for i in at..at + size {
            target[(i, i)] += scale;
        }
    }

    /// Places `scale * V` at `(row, col)`; `V` is a symmetric or dense
    /// matrix variable. A symmetric variable may sit on a diagonal block;
    /// a dense variable placed off the diagonal gets its transpose mirrored.
    pub fn add_matrix_var(
        &mut self,
        layout: &DecisionLayout,
        var: VarId,
        row: usize,
        col: usize,
        scale: f64,
    ) {
        let v = layout.var(var).clone();
        match v.kind {
            VarKind::Scalar => {
                let k = v.offset;
                Self::add_sym_entry(self.coeff(k), row, col, scale);
            }
            VarKind::Symmetric(k) => {
                assert!(row + k <= self.dim && col + k <= self.dim);
                for j in 0..k {
                    for i in 0..=j {
                        let c = layout.symmetric_coord(var, i, j);
                        let target = self.coeff(c);
                        if i == j {
                            Self::add_sym_entry(target, row + i, col + i, scale);
                        } else {
                            let w = scale * FRAC_1_SQRT_2;
                            if row == col {
                                Self::add_sym_entry(target, row + i, col + j, w);
                            } else {
                                Self::add_sym_entry(target, row + i, col + j, w);
                                Self::add_sym_entry(target, row + j, col + i, w);
                            }
                        }
                    }
                }
            }
            VarKind::Dense(r, c) => {
                assert!(row + r <= self.dim && col + c <= self.dim);
                assert!(
                    row + r <= col || col + c <= row,
                    "dense variable {} must be placed off the diagonal",
                    v.name
                );
                for j in 0..c {
                    for i in 0..r {
                        let coord = layout.dense_coord(var, i, j);
                        Self::add_sym_entry(self.coeff(coord), row + i, col + j, scale);
                    }
                }
            }
        }
    }

    /// Adds `scale * m` as coefficient of an arbitrary coordinate.
    pub fn add_coordinate_term(&mut self, coord: usize, row: usize, col: usize, m: &DMatrix<f64>, scale: f64) {
        let target = self.coeff(coord);
        place(target, row, col, m, scale);
    }

    /// Dense evaluation `F0 + sum_k x_k F_k`.
    pub fn evaluate(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (&k, f) in &self.terms {
            if x[k] != 0.0 {
                out += f * x[k];
            }
        }
        out
    }

    /// The same block with the sign folded in so that it reads `G(x) ⪰ 0`.
    pub(crate) fn as_psd(&self) -> (DMatrix<f64>, Vec<(usize, DMatrix<f64>)>) {
        let sign = match self.sense {
            Sense::Psd => 1.0,
            Sense::Nsd => -1.0,
        };
        let c = &self.constant * sign;
        let terms = self.terms.iter().map(|(&k, f)| (k, f * sign)).collect();
        (c, terms)
    }

    /// Multiplies every term by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.constant *= factor;
        for f in out.terms.values_mut() {
            *f *= factor;
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let asym = |m: &DMatrix<f64>| (m - m.transpose()).abs().max();
        self.terms
            .values()
            .map(asym)
            .fold(asym(&self.constant), f64::max)
    }
}

fn place(target: &mut DMatrix<f64>, row: usize, col: usize, m: &DMatrix<f64>, scale: f64) {
    let (r, c) = m.shape();
    assert!(row + r <= target.nrows() && col + c <= target.ncols());
    if row == col {
        assert_eq!(r, c, "diagonal placement needs a square block");
        for j in 0..c {
            for i in 0..r {
                target[(row + i, col + j)] += 0.5 * scale * (m[(i, j)] + m[(j, i)]);
            }
        }
    } else {
        assert!(
            row + r <= col || col + c <= row,
            "off-diagonal placement overlaps the diagonal"
        );
        for j in 0..c {
            for i in 0..r {
                target[(row + i, col + j)] += scale * m[(i, j)];
                target[(col + j, row + i)] += scale * m[(i, j)];
            }
        }
    }
}
