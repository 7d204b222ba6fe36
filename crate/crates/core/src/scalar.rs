//! Scalar traits the library is generic over.

use nalgebra::{ClosedAddAssign, ClosedMulAssign, ClosedSubAssign, RealField, Scalar};
use num_traits::{FromPrimitive, Num, ToPrimitive};
use std::ops::Neg;

/// Exact or floating arithmetic sufficient to assemble quadrics from data.
pub trait Ring:
    Scalar + Copy + Num + PartialOrd + Neg<Output = Self> + ClosedAddAssign + ClosedSubAssign + ClosedMulAssign
{
}

impl<T> Ring for T where
    T: Scalar + Copy + Num + PartialOrd + Neg<Output = Self> + ClosedAddAssign + ClosedSubAssign + ClosedMulAssign
{
}

/// Floating point scalars used for eigenvalues, square roots and sampling.
pub trait Real: Ring + RealField + FromPrimitive + ToPrimitive {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite value")
    }

    /// Relative tolerance for symmetry checks, never tighter than the precision allows.
    fn symmetry_tol() -> Self {
        let floor = Self::default_epsilon() * Self::lit(100.0);
        let t = Self::lit(1e-12);
        if t > floor {
            t
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
