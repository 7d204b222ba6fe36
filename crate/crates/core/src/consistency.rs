//! Quadrics describing the models `(A, B)` consistent with the data, in the
//! variable `Z = [A B]'` of shape `(n+m) x n`.
//!
//! Per sample: `A_i = z z'`, `B_i = -z x+'`, `C_i = -eps I + x+ x+'` with
//! `z = [x(i); u(i)]`. Aggregate (energy bound `eps T`):
//! `A = W W'`, `B = -W X1'`, `C = -T eps I + X1 X1'` with `W = [X0; U0]`.

use crate::datagen::DataSet;
use crate::ellipsoid::{CenterForm, QuadraticForm};
use crate::linalg::eigen_range;
use crate::scalar::{Real, Ring};
use crate::{check_shape, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative rank tolerance of [`ConsistencySets::is_bounded`].
pub const BOUNDED_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleQuadric<T: Ring> {
    pub index: usize,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateQuadric<T: Ring> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct ConsistencySets<T: Ring> {
    pub data: DataSet<T>,
    pub samples: Vec<SampleQuadric<T>>,
    pub aggregate: AggregateQuadric<T>,
}

fn scaled_identity<T: Ring>(n: usize, v: T) -> DMatrix<T> {
    DMatrix::from_diagonal_element(n, n, v)
}

pub fn build<T: Ring>(ds: &DataSet<T>) -> ConsistencySets<T> {
    let n = ds.n();
    let samples = (0..ds.len())
        .map(|i| {
            let z = ds.regressor(i);
            let xp = ds.x1.column(i).into_owned();
            SampleQuadric {
                index: i,
                a: &z * z.transpose(),
                b: -(&z * xp.transpose()),
                c: &xp * xp.transpose() - scaled_identity(n, ds.epsilon),
            }
        })
        .collect();
    let w = ds.stacked_regressors();
    let aggregate = AggregateQuadric {
        a: &w * w.transpose(),
        b: -(&w * ds.x1.transpose()),
        c: &ds.x1 * ds.x1.transpose() - scaled_identity(n, ds.energy_bound()),
    };
    ConsistencySets { data: ds.clone(), samples, aggregate }
}

impl<T: Ring> ConsistencySets<T> {
    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn m(&self) -> usize {
        self.data.m()
    }

    /// Sum of the per-sample quadrics.
    pub fn summed_samples(&self) -> AggregateQuadric<T> {
        let p = self.n() + self.m();
        let mut s = AggregateQuadric {
            a: DMatrix::zeros(p, p),
            b: DMatrix::zeros(p, self.n()),
            c: DMatrix::zeros(self.n(), self.n()),
        };
        for q in &self.samples {
            s.a += &q.a;
            s.b += &q.b;
            s.c += &q.c;
        }
        s
    }

    /// Coefficients of the aggregate inequality for scalar data, written in
    /// coordinates shifted by `(a0, b0)` with the set on the nonnegative side.
    pub fn shifted_conic(&self, a0: T, b0: T) -> Result<ShiftedConic<T>> {
        if self.n() != 1 || self.m() != 1 {
            return Err(Error::InvalidInput("conic coefficients need n = m = 1".into()));
        }
        let g = &self.aggregate;
        let two = T::one() + T::one();
        let (a11, a12, a22) = (g.a[(0, 0)], g.a[(0, 1)], g.a[(1, 1)]);
        let (b1, b2) = (g.b[(0, 0)], g.b[(1, 0)]);
        let l1 = a11 * a0 + a12 * b0 + b1;
        let l2 = a12 * a0 + a22 * b0 + b2;
        let k = a11 * a0 * a0 + two * a12 * a0 * b0 + a22 * b0 * b0 + two * (b1 * a0 + b2 * b0) + g.c[(0, 0)];
        Ok(ShiftedConic {
            aa: -a11,
            ab: -(two * a12),
            bb: -a22,
            a: -(two * l1),
            b: -(two * l2),
            c: -k,
        })
    }
}

/// `{ aa x^2 + ab x y + bb y^2 + a x + b y + c >= 0 }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedConic<T> {
    pub aa: T,
    pub ab: T,
    pub bb: T,
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Ring> ShiftedConic<T> {
    pub fn eval(&self, x: T, y: T) -> T {
        self.aa * x * x + self.ab * x * y + self.bb * y * y + self.a * x + self.b * y + self.c
    }
}

impl<T: Real> ConsistencySets<T> {
    /// `Z = [A B]'`.
    pub fn stack(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
        let (n, m) = (self.n(), self.m());
        check_shape(a, n, n)?;
        check_shape(b, n, m)?;
        let mut z = DMatrix::zeros(n + m, n);
        z.rows_mut(0, n).copy_from(&a.transpose());
        z.rows_mut(n, m).copy_from(&b.transpose());
        Ok(z)
    }

    /// Inverse of [`Self::stack`].
    pub fn unstack(&self, z: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
        let (n, m) = (self.n(), self.m());
        (z.rows(0, n).transpose(), z.rows(n, m).transpose())
    }

    pub fn aggregate_ellipsoid(&self) -> Result<QuadraticForm<T>> {
        let g = &self.aggregate;
        QuadraticForm::new(g.a.clone(), g.b.clone(), g.c.clone())
    }

    pub fn aggregate_center_form(&self) -> Result<CenterForm<T>> {
        if !self.is_bounded(T::lit(BOUNDED_REL_TOL)) {
            return Err(Error::UnboundedSet);
        }
        self.aggregate_ellipsoid()?.to_center()
    }

    pub fn sample_ellipsoid(&self, i: usize) -> Result<QuadraticForm<T>> {
        let q = self
            .samples
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("no sample {i}")))?;
        QuadraticForm::new(q.a.clone(), q.b.clone(), q.c.clone())
    }

    pub fn member_c(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
        self.member_c_stacked(&self.stack(a, b)?)
    }

    pub fn member_c_stacked(&self, z: &DMatrix<T>) -> Result<T> {
        self.aggregate_ellipsoid()?.membership(z)
    }

    /// Slacks of all per-sample inequalities: `eps - |x(i+1) - A x(i) - B u(i)|^2`,
    /// which equals the negated largest eigenvalue of the sample quadric.
    pub fn sample_slacks(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
        let z = self.stack(a, b)?;
        let r = &self.data.x1 - z.transpose() * self.data.stacked_regressors();
        Ok(DVector::from_fn(self.data.len(), |i, _| self.data.epsilon - r.column(i).norm_squared()))
    }

    pub fn member_i(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
        Ok(self.sample_slacks(a, b)?.min())
    }

    pub fn member_i_stacked(&self, z: &DMatrix<T>) -> Result<T> {
        let (a, b) = self.unstack(z);
        self.member_i(&a, &b)
    }

    /// Full row rank of `[X0; U0]` up to the relative tolerance `tol`.
    pub fn is_bounded(&self, tol: T) -> bool {
        let (lo, hi) = eigen_range(&self.aggregate.a);
        hi > T::zero() && lo > tol * hi
    }

    /// Boundary of the aggregate set for scalar data as `(A, B)` pairs.
    pub fn boundary_polyline(&self, points: usize) -> Result<Vec<(T, T)>> {
        if self.n() != 1 || self.m() != 1 {
            return Err(Error::InvalidInput("boundary export needs n = m = 1".into()));
        }
        ellipse_polyline(&self.aggregate_center_form()?, points)
    }

    /// Per-sample membership over a rectangle, row-major in `b` then `a`.
    pub fn membership_grid(&self, a_range: (T, T), b_range: (T, T), steps: usize) -> Result<Vec<GridPoint<T>>> {
        if self.n() != 1 || self.m() != 1 || steps < 2 {
            return Err(Error::InvalidInput("grid export needs n = m = 1 and at least 2 steps".into()));
        }
        let at = |r: (T, T), k: usize| r.0 + (r.1 - r.0) * T::lit(k as f64 / (steps - 1) as f64);
        let mut out = Vec::with_capacity(steps * steps);
        for j in 0..steps {
            for i in 0..steps {
                let (a, b) = (at(a_range, i), at(b_range, j));
                let slack = self.member_i(&DMatrix::from_element(1, 1, a), &DMatrix::from_element(1, 1, b))?;
                out.push(GridPoint { a, b, slack });
            }
        }
        Ok(out)
    }
}

impl ConsistencySets<f64> {
    /// Hit-and-run walk inside the per-sample intersection, started at a
    /// member `start` (stacked). Each step moves along a random direction to
    /// a uniform point of the feasible chord, so the walk stays in the set
    /// and mixes towards its uniform law. Returns every visited point.
    pub fn intersection_walk<R: Rng + ?Sized>(
        &self,
        start: &DMatrix<f64>,
        steps: usize,
        rng: &mut R,
    ) -> Result<Vec<DMatrix<f64>>> {
        check_shape(start, self.n() + self.m(), self.n())?;
        if self.member_i_stacked(start)? < 0.0 {
            return Err(Error::InvalidInput("walk must start inside the intersection".into()));
        }
        let regs = self.data.stacked_regressors();
        let mut z = start.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut d = DMatrix::<f64>::from_fn(z.nrows(), z.ncols(), |_, _| rng.sample(StandardNormal));
            d /= d.norm();
            let r0 = &self.data.x1 - z.transpose() * &regs;
            let w = d.transpose() * &regs;
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..self.data.len() {
                // |r0 - s w|^2 <= eps as a quadratic in s
                let (a, b) = (w.column(i).norm_squared(), -2.0 * r0.column(i).dot(&w.column(i)));
                if a == 0.0 {
                    continue;
                }
                let c = r0.column(i).norm_squared() - self.data.epsilon;
                let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
                lo = lo.max((-b - disc) / (2.0 * a));
                hi = hi.min((-b + disc) / (2.0 * a));
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::UnboundedSet);
            }
            if lo < hi {
                z += d * rng.random_range(lo..hi);
            }
            out.push(z.clone());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<T> {
    pub a: T,
    pub b: T,
    pub slack: T,
}

/// Closed polyline around a `2 x 1` center-form ellipsoid.
pub fn ellipse_polyline<T: Real>(e: &CenterForm<T>, points: usize) -> Result<Vec<(T, T)>> {
    if e.shape().p != 2 || e.shape().q != 1 || points < 3 {
        return Err(Error::InvalidInput("polyline needs a 2x1 ellipsoid and 3 points".into()));
    }
    Ok((0..=points)
        .map(|k| {
            let th = T::two_pi() * T::lit(k as f64 / points as f64);
            let z = e.point(&DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()]));
            (z[0], z[1])
        })
        .collect())
}
