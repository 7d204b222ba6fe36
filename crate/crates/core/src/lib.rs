//! Sets of linear models consistent with noisy state/input data, matrix
//! ellipsoids, and robust state-feedback synthesis over those sets.
//!
//! The data-side code (ellipsoids, simulation, quadric assembly) is generic
//! over the scalar; quadrics can be assembled exactly with rationals. The
//! optimization layers run in `f64`.

pub mod consistency;
pub mod datagen;
pub mod ellipsoid;
pub mod linalg;
pub mod overapprox;
pub mod scalar;
pub mod synthesis;

pub use noisyctl_sdp as sdp;
pub use scalar::{Real, Ring};

use num_rational::Ratio;

pub type Ellipsoid = ellipsoid::QuadraticForm<f64>;
pub type CenteredEllipsoid = ellipsoid::CenterForm<f64>;
pub type DataSet = datagen::DataSet<f64>;
pub type ConsistencySets = consistency::ConsistencySets<f64>;
pub type LtiSystem = datagen::LtiSystem<f64>;
/// Exact rationals for hand-checkable data.
pub type Exact = Ratio<i64>;
pub type ExactDataSet = datagen::DataSet<Exact>;
pub type ExactConsistencySets = consistency::ConsistencySets<Exact>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate ellipsoid: {0}")]
    Degenerate(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("consistency set is unbounded (data not persistently exciting)")]
    UnboundedSet,
    #[error("containment program infeasible")]
    InfeasibleContainment,
    #[error(transparent)]
    Solver(#[from] noisyctl_sdp::SdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_shape<T>(m: &nalgebra::DMatrix<T>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch { expected: (rows, cols), found: m.shape() });
    }
    Ok(())
}
