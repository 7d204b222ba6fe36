//! Dense symmetric helpers shared by the set computations.

use crate::scalar::Real;
use nalgebra::DMatrix;

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Relative Frobenius asymmetry `|M - M'| / |M|`.
pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let scale = m.norm();
    if scale == T::zero() {
        return T::zero();
    }
    (m - m.transpose()).norm() / scale
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_map<T: Real>(m: &DMatrix<T>, f: impl Fn(T) -> T) -> DMatrix<T> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    symmetrize(&(&e.eigenvectors * d * e.eigenvectors.transpose()))
}

pub fn sym_sqrt<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    sym_map(m, |v| if v > T::zero() { v.sqrt() } else { T::zero() })
}

pub fn eigen_range<T: Real>(m: &DMatrix<T>) -> (T, T) {
    let e = m.clone().symmetric_eigenvalues();
    (e.min(), e.max())
}

pub fn lambda_max<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    eigen_range(m).1
}

/// Log-determinant of a positive definite matrix, `None` when Cholesky fails.
pub fn log_det_pd<T: Real>(m: &DMatrix<T>) -> Option<T> {
    let l = m.clone().cholesky()?;
    let mut s = T::zero();
    for i in 0..m.nrows() {
        s += l.l_dirty()[(i, i)].ln();
    }
    Some(s * T::lit(2.0))
}

/// True when every eigenvalue exceeds `rel` times the largest one.
pub fn is_well_posed_pd<T: Real>(m: &DMatrix<T>, rel: T) -> bool {
    let (lo, hi) = eigen_range(m);
    hi > T::zero() && lo > rel * hi
}

pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re * z.re + z.im * z.im).sqrt())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = sym_sqrt(&m);
        assert!((&r * &r - &m).amax() < 1e-12);
    }

    #[test]
    fn rotation_has_unit_radius() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&m) - 1.0f64).abs() < 1e-12);
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0f32, 3.0]));
        assert!((log_det_pd(&m).unwrap() - 6.0f32.ln()).abs() < 1e-6);
        assert!(log_det_pd(&(-m)).is_none());
    }
}
