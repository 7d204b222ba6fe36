//! Decision-vector layout.
//!
//! Every decision variable owns a contiguous range of a flat coordinate
//! vector. Symmetric matrix variables are stored as scaled upper triangles
//! (`svec`): diagonal entries as-is, off-diagonal entries multiplied by
//! `sqrt(2)`, so the Euclidean inner product of coordinates equals the
//! Frobenius inner product of the matrices.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::SQRT_2;

/// Handle to a variable registered in a [`DecisionLayout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    /// Symmetric `k x k` matrix.
    Symmetric(usize),
    /// General `rows x cols` matrix.
    Dense(usize, usize),
}

impl VarKind {
    pub fn len(&self) -> usize {
        match *self {
            VarKind::Scalar => 1,
            VarKind::Symmetric(k) => k * (k + 1) / 2,
            VarKind::Dense(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

#[derive(Clone, Debug, Default)]
pub struct DecisionLayout {
    vars: Vec<Variable>,
    len: usize,
}

impl DecisionLayout {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: VarKind) -> VarId {
        assert!(
            self.vars.iter().all(|v| v.name != name),
            "duplicate variable name {name:?}"
        );
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name: name.to_owned(),
            kind,
            offset: self.len,
        });
        self.len += kind.len();
        id
    }

    pub fn scalar(&mut self, name: &str) -> VarId {
        self.push(name, VarKind::Scalar)
    }

    pub fn symmetric(&mut self, name: &str, k: usize) -> VarId {
        assert!(k >= 1);
        self.push(name, VarKind::Symmetric(k))
    }

    pub fn dense(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        assert!(rows >= 1 && cols >= 1);
        self.push(name, VarKind::Dense(rows, cols))
    }

    /// Total number of coordinates.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Coordinate of a scalar variable.
    pub fn scalar_coord(&self, id: VarId) -> usize {
        let v = self.var(id);
        assert_eq!(v.kind, VarKind::Scalar, "{} is not a scalar", v.name);
        v.offset
    }

    /// Coordinate of entry `(i, j)` of a symmetric variable (either triangle).
    pub fn symmetric_coord(&self, id: VarId, i: usize, j: usize) -> usize {
        let v = self.var(id);
        let VarKind::Symmetric(k) = v.kind else {
            panic!("{} is not symmetric", v.name)
        };
        assert!(i < k && j < k);
        v.offset + svec_index(i, j)
    }

    /// Coordinate of entry `(i, j)` of a dense variable (column-major).
    pub fn dense_coord(&self, id: VarId, i: usize, j: usize) -> usize {
        let v = self.var(id);
        let VarKind::Dense(r, c) = v.kind else {
            panic!("{} is not a dense matrix", v.name)
        };
        assert!(i < r && j < c);
        v.offset + j * r + i
    }

    pub fn extract_scalar(&self, id: VarId, x: &DVector<f64>) -> f64 {
        x[self.scalar_coord(id)]
    }

    pub fn extract_symmetric(&self, id: VarId, x: &DVector<f64>) -> DMatrix<f64> {
        let v = self.var(id);
        let VarKind::Symmetric(k) = v.kind else {
            panic!("{} is not symmetric", v.name)
        };
        smat(&x.rows(v.offset, v.kind.len()).into_owned(), k)
    }

    pub fn extract_dense(&self, id: VarId, x: &DVector<f64>) -> DMatrix<f64> {
        let v = self.var(id);
        let VarKind::Dense(r, c) = v.kind else {
            panic!("{} is not a dense matrix", v.name)
        };
        DMatrix::from_column_slice(r, c, x.rows(v.offset, r * c).as_slice())
    }

    /// Writes a symmetric matrix into the coordinates of `id`.
    pub fn insert_symmetric(&self, id: VarId, m: &DMatrix<f64>, x: &mut DVector<f64>) {
        let v = self.var(id);
        let VarKind::Symmetric(k) = v.kind else {
            panic!("{} is not symmetric", v.name)
        };
        assert_eq!(m.shape(), (k, k));
        let s = svec(m);
        x.rows_mut(v.offset, s.len()).copy_from(&s);
    }

    pub fn insert_dense(&self, id: VarId, m: &DMatrix<f64>, x: &mut DVector<f64>) {
        let v = self.var(id);
        let VarKind::Dense(r, c) = v.kind else {
            panic!("{} is not a dense matrix", v.name)
        };
        assert_eq!(m.shape(), (r, c));
        x.rows_mut(v.offset, r * c).copy_from_slice(m.as_slice());
    }

    pub fn insert_scalar(&self, id: VarId, value: f64, x: &mut DVector<f64>) {
        x[self.scalar_coord(id)] = value;
    }
}

/// Position of `(i, j)` in the column-major upper triangle.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Scaled upper-triangular vectorization of the symmetric part of `m`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    debug_assert_eq!(m.ncols(), d);
    let mut out = DVector::zeros(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * SQRT_2
            };
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(d));
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x / SQRT_2;
                m[(j, i)] = x / SQRT_2;
            }
        }
    }
    m
}
