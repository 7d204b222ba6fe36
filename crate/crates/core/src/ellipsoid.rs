//! Matrix ellipsoids in center form `(Zc, P, Q)`:
//! `(Z - Zc)' P^-2 (Z - Zc) <= Q`, and quadratic form `(A, B, C)`:
//! `Z'AZ + Z'B + B'Z + C <= 0`, for `Z` of shape `p x q`.

use crate::linalg::{asymmetry, is_well_posed_pd, lambda_max, log_det_pd, sym_map, sym_sqrt, symmetrize};
use crate::scalar::Real;
use crate::{check_shape, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const DEGENERACY_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixShape {
    pub p: usize,
    pub q: usize,
}

impl MatrixShape {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidInput(format!("empty matrix shape {p}x{q}")));
        }
        Ok(Self { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p * self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definiteness {
    StrictlyBounded,
    Degenerate,
}

fn ingest_symmetric<T: Real>(name: &str, m: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!("{name} is not square")));
    }
    if asymmetry(m) > T::symmetry_tol() {
        return Err(Error::InvalidInput(format!("{name} is not symmetric")));
    }
    Ok(symmetrize(m))
}

#[derive(Debug, Clone)]
pub struct CenterForm<T: Real> {
    shape: MatrixShape,
    zc: DMatrix<T>,
    p: DMatrix<T>,
    q: DMatrix<T>,
    q_sqrt: DMatrix<T>,
}

impl<T: Real> CenterForm<T> {
    pub fn new(zc: DMatrix<T>, p: DMatrix<T>, q: DMatrix<T>) -> Result<Self> {
        let shape = MatrixShape::new(zc.nrows(), zc.ncols())?;
        check_shape(&p, shape.p, shape.p)?;
        check_shape(&q, shape.q, shape.q)?;
        let p = ingest_symmetric("P", &p)?;
        let q = ingest_symmetric("Q", &q)?;
        let rel = T::lit(DEGENERACY_REL_TOL);
        if !is_well_posed_pd(&p, rel) || !is_well_posed_pd(&q, rel) {
            return Err(Error::Degenerate("P and Q must be positive definite".into()));
        }
        let q_sqrt = sym_sqrt(&q);
        Ok(Self { shape, zc, p, q, q_sqrt })
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn center(&self) -> &DMatrix<T> {
        &self.zc
    }

    pub fn p(&self) -> &DMatrix<T> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn to_quadratic(&self) -> QuadraticForm<T> {
        let pinv = self.p.clone().try_inverse().expect("P positive definite");
        let a = symmetrize(&(&pinv * &pinv));
        let b = -(&a * &self.zc);
        let c = symmetrize(&(self.zc.transpose() * &a * &self.zc - &self.q));
        QuadraticForm {
            shape: self.shape,
            a,
            b,
            c,
            definiteness: Definiteness::StrictlyBounded,
        }
    }

    /// `(p/2) log det Q + q log det P`.
    pub fn log_size(&self) -> T {
        let ld_q = log_det_pd(&self.q).expect("Q positive definite");
        let ld_p = log_det_pd(&self.p).expect("P positive definite");
        T::lit(self.shape.p as f64 / 2.0) * ld_q + T::lit(self.shape.q as f64) * ld_p
    }

    pub fn size(&self) -> T {
        self.log_size().exp()
    }

    /// `Zc + P Y Q^(1/2)`; lies on the boundary when `|Y| = 1`.
    pub fn point(&self, y: &DMatrix<T>) -> DMatrix<T> {
        &self.zc + &self.p * y * &self.q_sqrt
    }

    /// Uniform draw from the set.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<T> {
        self.point(&sample_unit_operator_ball(self.shape, rng))
    }

    /// Half-widths of the axis-aligned box enclosing the set.
    pub fn box_radii(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.shape.p, self.shape.q, |i, j| self.p.row(i).norm() * self.q[(j, j)].sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticForm<T: Real> {
    shape: MatrixShape,
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    definiteness: Definiteness,
}

impl<T: Real> QuadraticForm<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self> {
        let shape = MatrixShape::new(b.nrows(), b.ncols())?;
        check_shape(&a, shape.p, shape.p)?;
        check_shape(&c, shape.q, shape.q)?;
        let a = ingest_symmetric("A", &a)?;
        let c = ingest_symmetric("C", &c)?;
        let definiteness = match Self::completed_square(&a, &b, &c) {
            Some(_) => Definiteness::StrictlyBounded,
            None => Definiteness::Degenerate,
        };
        Ok(Self { shape, a, b, c, definiteness })
    }

    /// `(A^-1, B'A^-1 B - C)` when both are well posed positive definite.
    fn completed_square(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>) -> Option<(DMatrix<T>, DMatrix<T>)> {
        let rel = T::lit(DEGENERACY_REL_TOL);
        if !is_well_posed_pd(a, rel) {
            return None;
        }
        let ainv = symmetrize(&a.clone().try_inverse()?);
        let q = symmetrize(&(b.transpose() * &ainv * b - c));
        if !is_well_posed_pd(&q, rel) {
            return None;
        }
        Some((ainv, q))
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn to_center(&self) -> Result<CenterForm<T>> {
        let (ainv, q) = Self::completed_square(&self.a, &self.b, &self.c)
            .ok_or_else(|| Error::Degenerate("A or B'A^-1B - C is not positive definite".into()))?;
        let zc = -(&ainv * &self.b);
        let p = sym_map(&self.a, |v| T::one() / v.sqrt());
        CenterForm::new(zc, p, q)
    }

    /// `Z'AZ + Z'B + B'Z + C`.
    pub fn evaluate(&self, z: &DMatrix<T>) -> Result<DMatrix<T>> {
        check_shape(z, self.shape.p, self.shape.q)?;
        let zb = z.transpose() * &self.b;
        Ok(symmetrize(&(z.transpose() * &self.a * z + &zb + zb.transpose() + &self.c)))
    }

    /// Negated largest eigenvalue of [`Self::evaluate`]; nonnegative for members.
    pub fn membership(&self, z: &DMatrix<T>) -> Result<T> {
        Ok(-lambda_max(&self.evaluate(z)?))
    }

    /// `(q/2) log det A^-1 + (p/2) log det(B'A^-1 B - C)`.
    pub fn log_size(&self) -> Result<T> {
        let (ainv, q) = Self::completed_square(&self.a, &self.b, &self.c)
            .ok_or_else(|| Error::Degenerate("size of a degenerate ellipsoid".into()))?;
        let ld_q = log_det_pd(&q).ok_or_else(|| Error::Degenerate("B'A^-1B - C".into()))?;
        let ld_ainv = log_det_pd(&ainv).ok_or_else(|| Error::Degenerate("A".into()))?;
        Ok(T::lit(self.shape.p as f64 / 2.0) * ld_q + T::lit(self.shape.q as f64 / 2.0) * ld_ainv)
    }

    pub fn size(&self) -> Result<T> {
        Ok(self.log_size()?.exp())
    }
}

/// Uniform draw from `{Y : |Y|_2 <= 1}` as `G (G'G + H'H)^-1/2` with `G`
/// (`p x q`) and `H` (`(q+1) x q`) standard normal, for `p >= q`; the
/// singular values then follow the uniform law and the orthogonal frames
/// are Haar. Wide shapes are drawn transposed.
pub fn sample_unit_operator_ball<T: Real, R: Rng + ?Sized>(shape: MatrixShape, rng: &mut R) -> DMatrix<T> {
    let (p, q) = if shape.p >= shape.q { (shape.p, shape.q) } else { (shape.q, shape.p) };
    let g = DMatrix::<f64>::from_fn(p, q, |_, _| rng.sample(StandardNormal));
    let h = DMatrix::<f64>::from_fn(q + 1, q, |_, _| rng.sample(StandardNormal));
    let s = g.transpose() * &g + h.transpose() * &h;
    let y = &g * sym_map(&s, |v| 1.0 / v.sqrt());
    let y = if shape.p >= shape.q { y } else { y.transpose() };
    y.map(T::lit)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VolumeEstimate {
    pub ratio: f64,
    pub std_error: f64,
    pub hits: (usize, usize),
    pub draws: usize,
}

struct HitCounter<T: Real> {
    e: CenterForm<T>,
    a: DMatrix<T>,
    radii: DMatrix<f64>,
}

impl<T: Real> HitCounter<T> {
    fn new(e: &CenterForm<T>) -> Self {
        Self {
            e: e.clone(),
            a: e.to_quadratic().a,
            radii: e.box_radii().map(|v| v.as_f64()),
        }
    }

    fn log_box_volume(&self) -> f64 {
        self.radii.iter().map(|r| (2.0 * r).ln()).sum()
    }

    fn count<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> usize {
        let (p, q) = (self.e.shape.p, self.e.shape.q);
        let mut hits = 0;
        for _ in 0..n {
            let d = DMatrix::from_fn(p, q, |i, j| {
                let r = self.radii[(i, j)];
                T::lit(rng.random_range(-r..=r))
            });
            let w = &self.e.q - d.transpose() * &self.a * &d;
            if w.cholesky().is_some() {
                hits += 1;
            }
        }
        hits
    }
}

/// Hit-and-miss estimate of `vol(e1) / vol(e2)` with a delta-method
/// standard error, `n` draws per set.
pub fn monte_carlo_volume_ratio<T: Real, R: Rng + ?Sized>(
    e1: &CenterForm<T>,
    e2: &CenterForm<T>,
    n: usize,
    rng: &mut R,
) -> Result<VolumeEstimate> {
    if e1.shape != e2.shape {
        return Err(Error::ShapeMismatch {
            expected: (e1.shape.p, e1.shape.q),
            found: (e2.shape.p, e2.shape.q),
        });
    }
    let c1 = HitCounter::new(e1);
    let c2 = HitCounter::new(e2);
    let h1 = c1.count(n, rng);
    let h2 = c2.count(n, rng);
    if h1 == 0 || h2 == 0 {
        return Err(Error::InvalidInput("no hits, increase the draw count".into()));
    }
    let f1 = h1 as f64 / n as f64;
    let f2 = h2 as f64 / n as f64;
    let ratio = (c1.log_box_volume() - c2.log_box_volume()).exp() * f1 / f2;
    let rel_var = (1.0 - f1) / (n as f64 * f1) + (1.0 - f2) / (n as f64 * f2);
    Ok(VolumeEstimate {
        ratio,
        std_error: ratio * rel_var.sqrt(),
        hits: (h1, h2),
        draws: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn identity_case_converts() {
        let e = QuadraticForm::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), m(1, 1, &[-1.0])).unwrap();
        let c = e.to_center().unwrap();
        assert!(c.center().amax() < 1e-15);
        assert!((c.p() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!((c.q()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_center_to_quadratic() {
        let c = CenterForm::new(m(1, 1, &[3.0]), m(1, 1, &[2.0]), m(1, 1, &[1.0])).unwrap();
        let q = c.to_quadratic();
        assert!((q.a()[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((q.b()[(0, 0)] + 0.75).abs() < 1e-15);
        assert!((q.c()[(0, 0)] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn interval_size_is_half_width() {
        let c = CenterForm::new(m(1, 1, &[0.3]), m(1, 1, &[1.0]), m(1, 1, &[6.25])).unwrap();
        assert!((c.size() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rank_one_quadric_is_degenerate() {
        let z = m(2, 1, &[1.0, 1.0]);
        let e = QuadraticForm::new(&z * z.transpose(), -&z, m(1, 1, &[0.0])).unwrap();
        assert_eq!(e.definiteness(), Definiteness::Degenerate);
        assert!(matches!(e.to_center(), Err(Error::Degenerate(_))));
        assert!(e.log_size().is_err());
    }

    #[test]
    fn unit_ball_membership() {
        let e = QuadraticForm::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 1), m(1, 1, &[-1.0])).unwrap();
        assert!((e.membership(&m(2, 1, &[2.0, 0.0])).unwrap() + 3.0).abs() < 1e-15);
        assert!(e.membership(&m(3, 1, &[0.0; 3])).is_err());
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = m(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QuadraticForm::new(a, DMatrix::zeros(2, 1), m(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn boundary_points_have_zero_slack() {
        let c = CenterForm::new(
            m(2, 2, &[1.0, -1.0, 0.5, 2.0]),
            m(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            m(2, 2, &[1.5, 0.2, 0.2, 0.7]),
        )
        .unwrap();
        let q = c.to_quadratic();
        let y = m(2, 2, &[0.6, 0.0, 0.8, 0.0]);
        assert!(q.membership(&c.point(&y)).unwrap().abs() < 1e-9);
        assert!(q.membership(c.center()).unwrap() > 0.0);
    }

    #[test]
    fn operator_ball_draws_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (p, q) in [(5, 3), (2, 4), (1, 1)] {
            let shape = MatrixShape::new(p, q).unwrap();
            for _ in 0..200 {
                let y: DMatrix<f64> = sample_unit_operator_ball(shape, &mut rng);
                assert_eq!(y.shape(), (p, q));
                assert!(y.svd(false, false).singular_values.max() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let e = QuadraticForm::<f32>::new(
            DMatrix::identity(2, 2) * 2.0,
            m(2, 1, &[-1.0, -1.0]).map(|v| v as f32),
            DMatrix::from_element(1, 1, -1.0),
        )
        .unwrap();
        let c = e.to_center().unwrap();
        assert!((c.center()[(0, 0)] - 0.5).abs() < 1e-6);
        assert!((e.size().unwrap() - 1.0).abs() < 1e-5);
    }
}
