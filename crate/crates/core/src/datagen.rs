//! Simulation of `x(i+1) = A x(i) + B u(i) + d(i)` and the measured data
//! matrices `X0`, `X1`, `U0`.

use crate::scalar::{Real, Ring};
use crate::{check_shape, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem<T: Ring> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
}

impl<T: Ring> LtiSystem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        check_shape(&a, n, n)?;
        if b.nrows() != n || n == 0 || b.ncols() == 0 {
            return Err(Error::ShapeMismatch { expected: (n, b.ncols()), found: b.shape() });
        }
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Scalar system `x+ = x/2 + u/2 + d`.
    pub fn example1() -> Self {
        let half = T::one() / (T::one() + T::one());
        Self {
            a: DMatrix::from_element(1, 1, half),
            b: DMatrix::from_element(1, 1, half),
        }
    }
}

impl LtiSystem<f64> {
    /// Open-loop unstable third-order system with two inputs.
    pub fn third_order() -> Self {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(3, 3, &[
            0.1274, 0.1431, 0.1974,
            0.3619, 0.6292, 0.4153,
            0.6972, 0.1574, 0.4111,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(3, 2, &[
            0.6901, 0.9047,
            0.4809, 0.6030,
            0.8913, 0.1478,
        ]);
        Self { a, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputKind<T: Ring> {
    /// Exactly `T` columns.
    Explicit(DMatrix<T>),
    Uniform { low: T, high: T },
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputModel<T: Ring> {
    /// Leading columns used verbatim before `kind` takes over.
    pub prefix: Option<DMatrix<T>>,
    pub kind: InputKind<T>,
}

impl<T: Ring> InputModel<T> {
    pub fn new(kind: InputKind<T>) -> Self {
        Self { prefix: None, kind }
    }

    pub fn with_prefix(mut self, prefix: DMatrix<T>) -> Self {
        self.prefix = Some(prefix);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceKind {
    Zero,
    /// Each coordinate uniform on `[-sqrt(eps/n), sqrt(eps/n)]`.
    UniformInterval,
    /// Uniform on the Euclidean ball of radius `sqrt(eps)`.
    UniformBall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel<T: Ring> {
    pub kind: DisturbanceKind,
    pub epsilon: T,
    pub prefix: Option<DMatrix<T>>,
}

impl<T: Ring> DisturbanceModel<T> {
    pub fn new(kind: DisturbanceKind, epsilon: T) -> Self {
        Self { kind, epsilon, prefix: None }
    }

    pub fn with_prefix(mut self, prefix: DMatrix<T>) -> Self {
        self.prefix = Some(prefix);
        self
    }
}

/// Measured data: column `i` of `x1` is the successor of column `i` of `x0`
/// under input column `i` of `u0`. `epsilon` bounds `|d(i)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet<T: Ring> {
    pub x0: DMatrix<T>,
    pub x1: DMatrix<T>,
    pub u0: DMatrix<T>,
    pub epsilon: T,
}

impl<T: Ring> DataSet<T> {
    pub fn new(x0: DMatrix<T>, x1: DMatrix<T>, u0: DMatrix<T>, epsilon: T) -> Result<Self> {
        let (n, t) = x0.shape();
        if n == 0 || t == 0 || u0.nrows() == 0 {
            return Err(Error::InvalidInput("empty data".into()));
        }
        check_shape(&x1, n, t)?;
        check_shape(&u0, u0.nrows(), t)?;
        if epsilon < T::zero() {
            return Err(Error::InvalidInput("negative noise bound".into()));
        }
        Ok(Self { x0, x1, u0, epsilon })
    }

    pub fn n(&self) -> usize {
        self.x0.nrows()
    }

    pub fn m(&self) -> usize {
        self.u0.nrows()
    }

    pub fn len(&self) -> usize {
        self.x0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total energy bound `eps * T` implied by the per-sample bound.
    pub fn energy_bound(&self) -> T {
        let mut s = T::zero();
        for _ in 0..self.len() {
            s += self.epsilon;
        }
        s
    }

    /// `[x(i); u(i)]`.
    pub fn regressor(&self, i: usize) -> DVector<T> {
        let mut z = DVector::zeros(self.n() + self.m());
        z.rows_mut(0, self.n()).copy_from(&self.x0.column(i));
        z.rows_mut(self.n(), self.m()).copy_from(&self.u0.column(i));
        z
    }

    /// `[X0; U0]`.
    pub fn stacked_regressors(&self) -> DMatrix<T> {
        let mut w = DMatrix::zeros(self.n() + self.m(), self.len());
        w.rows_mut(0, self.n()).copy_from(&self.x0);
        w.rows_mut(self.n(), self.m()).copy_from(&self.u0);
        w
    }

    /// First `t` samples.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.len() {
            return Err(Error::InvalidInput(format!("prefix length {t} of {}", self.len())));
        }
        Ok(Self {
            x0: self.x0.columns(0, t).into_owned(),
            x1: self.x1.columns(0, t).into_owned(),
            u0: self.u0.columns(0, t).into_owned(),
            epsilon: self.epsilon,
        })
    }

    /// Samples reordered so that new column `k` is old column `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&k| k >= seen.len() || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidInput("not a permutation".into()));
        }
        let pick = |m: &DMatrix<T>| DMatrix::from_fn(m.nrows(), perm.len(), |i, k| m[(i, perm[k])]);
        Ok(Self {
            x0: pick(&self.x0),
            x1: pick(&self.x1),
            u0: pick(&self.u0),
            epsilon: self.epsilon,
        })
    }
}

/// Example-1 data: `x(0) = 1`, `u = (1, -1, 0)`, no disturbance, `eps = 1`.
pub fn example1_dataset<T: Ring>(t: usize) -> Result<DataSet<T>> {
    if !(1..=3).contains(&t) {
        return Err(Error::InvalidInput(format!("example data has T in 1..=3, got {t}")));
    }
    let (o, z) = (T::one(), T::zero());
    let x = [o, o, z, z];
    let u = [o, -o, z];
    DataSet::new(
        DMatrix::from_row_slice(1, t, &x[..t]),
        DMatrix::from_row_slice(1, t, &x[1..=t]),
        DMatrix::from_row_slice(1, t, &u[..t]),
        o,
    )
}

/// Inputs and disturbances of the example prefix, for prolonged runs.
pub fn example1_prefix<T: Ring>() -> (DMatrix<T>, DMatrix<T>) {
    let o = T::one();
    (DMatrix::from_row_slice(1, 3, &[o, -o, T::zero()]), DMatrix::zeros(1, 3))
}

/// Uniform draw from `{d : |d|^2 <= eps}`.
pub fn sample_uniform_ball<T: Real, R: Rng + ?Sized>(dim: usize, epsilon: T, rng: &mut R) -> DVector<T> {
    let eps = epsilon.as_f64();
    if eps <= 0.0 || dim == 0 {
        return DVector::zeros(dim);
    }
    let g = loop {
        let g = DVector::<f64>::from_fn(dim, |_, _| rng.sample(StandardNormal));
        if g.norm() > 0.0 {
            break g;
        }
    };
    let r = eps.sqrt() * rng.random::<f64>().powf(1.0 / dim as f64);
    let d = (g.normalize() * r).map(T::lit);
    // rounding guard: the bound is a hard invariant
    let excess = d.norm_squared() / epsilon;
    if excess > T::one() {
        d / excess.sqrt()
    } else {
        d
    }
}

/// Raw sequences behind a [`DataSet`].
#[derive(Debug, Clone)]
pub struct Trajectory<T: Ring> {
    pub data: DataSet<T>,
    /// `n x (T+1)` states `x(0) .. x(T)`.
    pub states: DMatrix<T>,
    pub disturbances: DMatrix<T>,
}

fn checked_prefix<T: Ring>(p: &Option<DMatrix<T>>, rows: usize) -> Result<usize> {
    match p {
        Some(m) if m.nrows() != rows => Err(Error::ShapeMismatch { expected: (rows, m.ncols()), found: m.shape() }),
        Some(m) => Ok(m.ncols()),
        None => Ok(0),
    }
}

pub fn simulate<T: Real, R: Rng + ?Sized>(
    sys: &LtiSystem<T>,
    x0: &DVector<T>,
    inputs: &InputModel<T>,
    disturbances: &DisturbanceModel<T>,
    t: usize,
    rng: &mut R,
) -> Result<Trajectory<T>> {
    let (n, m) = (sys.n(), sys.m());
    if t == 0 {
        return Err(Error::InvalidInput("T must be positive".into()));
    }
    if x0.len() != n {
        return Err(Error::ShapeMismatch { expected: (n, 1), found: (x0.len(), 1) });
    }
    let eps = disturbances.epsilon;
    if eps < T::zero() {
        return Err(Error::InvalidInput("negative noise bound".into()));
    }
    let u_pre = checked_prefix(&inputs.prefix, m)?;
    let d_pre = checked_prefix(&disturbances.prefix, n)?;
    if let InputKind::Explicit(u) = &inputs.kind {
        check_shape(u, m, t.saturating_sub(u_pre))?;
    }
    let mut u0 = DMatrix::zeros(m, t);
    let mut d = DMatrix::zeros(n, t);
    for i in 0..t {
        let u = match (&inputs.prefix, &inputs.kind) {
            (Some(p), _) if i < u_pre => p.column(i).into_owned(),
            (_, InputKind::Explicit(seq)) => seq.column(i - u_pre.min(i)).into_owned(),
            (_, InputKind::Uniform { low, high }) => {
                let (lo, hi) = (low.as_f64(), high.as_f64());
                DVector::from_fn(m, |_, _| T::lit(rng.random_range(lo..=hi)))
            }
            (_, InputKind::StandardNormal) => DVector::from_fn(m, |_, _| T::lit(rng.sample(StandardNormal))),
        };
        u0.set_column(i, &u);
        let di = match (&disturbances.prefix, disturbances.kind) {
            (Some(p), _) if i < d_pre => p.column(i).into_owned(),
            (_, DisturbanceKind::Zero) => DVector::zeros(n),
            (_, DisturbanceKind::UniformInterval) => {
                let h = (eps.as_f64() / n as f64).sqrt();
                DVector::from_fn(n, |_, _| T::lit(if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 }))
            }
            (_, DisturbanceKind::UniformBall) => sample_uniform_ball(n, eps, rng),
        };
        if di.norm_squared() > eps * (T::one() + T::default_epsilon() * T::lit(8.0)) {
            return Err(Error::InvalidInput(format!("disturbance {i} violates the noise bound")));
        }
        d.set_column(i, &di);
    }
    let mut states = DMatrix::zeros(n, t + 1);
    states.set_column(0, x0);
    for i in 0..t {
        let next = &sys.a * states.column(i) + &sys.b * u0.column(i) + d.column(i);
        states.set_column(i + 1, &next);
    }
    let data = DataSet::new(
        states.columns(0, t).into_owned(),
        states.columns(1, t).into_owned(),
        u0,
        eps,
    )?;
    Ok(Trajectory { data, states, disturbances: d })
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDataSet {
    n: usize,
    m: usize,
    t: usize,
    epsilon: f64,
    x0: Vec<Vec<f64>>,
    x1: Vec<Vec<f64>>,
    u0: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if r.len() != nrows || r.iter().any(|row| row.len() != ncols) {
        return Err(Error::InvalidInput("ragged data matrix".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| r[i][j]))
}

impl DataSet<f64> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&JsonDataSet {
            n: self.n(),
            m: self.m(),
            t: self.len(),
            epsilon: self.epsilon,
            x0: rows(&self.x0),
            x1: rows(&self.x1),
            u0: rows(&self.u0),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: JsonDataSet = serde_json::from_str(s)?;
        DataSet::new(
            from_rows(&j.x0, j.n, j.t)?,
            from_rows(&j.x1, j.n, j.t)?,
            from_rows(&j.u0, j.m, j.t)?,
            j.epsilon,
        )
    }

    /// One row per sample: `x(i)`, `u(i)`, `x(i+1)`. `epsilon` is not part
    /// of the table and is passed separately on reading.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let (n, m) = (self.n(), self.m());
        let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
        header.extend((0..m).map(|k| format!("u{k}")));
        header.extend((0..n).map(|k| format!("xnext{k}")));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self
                .x0
                .column(i)
                .iter()
                .chain(self.u0.column(i).iter())
                .chain(self.x1.column(i).iter())
                .map(|v| format!("{v:e}"))
                .collect();
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, epsilon: f64) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header = rd.headers()?.clone();
        let n = header.iter().filter(|h| h.starts_with("xnext")).count();
        let m = header.len().saturating_sub(2 * n);
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("CSV header must name x, u and xnext columns".into()));
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            cols.push(vals);
        }
        let t = cols.len();
        let get = |off: usize, rows: usize| DMatrix::from_fn(rows, t, |i, k| cols[k][off + i]);
        DataSet::new(get(0, n), get(n + m, n), get(n, m), epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_prefixes() {
        let d3: DataSet<Exact> = example1_dataset(3).unwrap();
        let o = Exact::from_integer(1);
        let z = Exact::from_integer(0);
        assert_eq!(d3.x0.as_slice(), &[o, o, z]);
        assert_eq!(d3.u0.as_slice(), &[o, -o, z]);
        assert_eq!(d3.x1.as_slice(), &[o, z, z]);
        let d1: DataSet<f64> = example1_dataset(1).unwrap();
        assert_eq!((d1.x0[(0, 0)], d1.u0[(0, 0)], d1.x1[(0, 0)]), (1.0, 1.0, 1.0));
        assert!(example1_dataset::<f64>(4).is_err());
    }

    #[test]
    fn simulation_reproduces_the_example() {
        let (u, d) = example1_prefix::<f64>();
        let tr = simulate(
            &LtiSystem::example1(),
            &DVector::from_element(1, 1.0),
            &InputModel::new(InputKind::Explicit(u)),
            &DisturbanceModel::new(DisturbanceKind::Zero, 1.0).with_prefix(d),
            3,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(tr.data.x1.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(tr.data, example1_dataset(3).unwrap());
    }

    #[test]
    fn zero_everything_gives_zero_data() {
        let sys = LtiSystem::third_order();
        let tr = simulate(
            &sys,
            &DVector::zeros(3),
            &InputModel::new(InputKind::Explicit(DMatrix::zeros(2, 5))),
            &DisturbanceModel::new(DisturbanceKind::Zero, 0.0),
            5,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(tr.data.x0.amax() == 0.0 && tr.data.x1.amax() == 0.0 && tr.data.u0.amax() == 0.0);
    }

    #[test]
    fn explicit_prefix_violating_bound_is_rejected() {
        let r = simulate(
            &LtiSystem::<f64>::example1(),
            &DVector::from_element(1, 1.0),
            &InputModel::new(InputKind::StandardNormal),
            &DisturbanceModel::new(DisturbanceKind::Zero, 0.25).with_prefix(DMatrix::from_element(1, 1, 0.6)),
            3,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn ball_sample_with_zero_radius() {
        let d: DVector<f64> = sample_uniform_ball(4, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(d, DVector::zeros(4));
    }

    #[test]
    fn energy_bound_is_eps_times_length() {
        let d: DataSet<Exact> = example1_dataset(3).unwrap();
        assert_eq!(d.energy_bound(), Exact::from_integer(3));
    }

    #[test]
    fn permutation_must_be_bijective() {
        let d: DataSet<f64> = example1_dataset(3).unwrap();
        assert!(d.permuted(&[0, 0, 1]).is_err());
        assert_eq!(d.permuted(&[2, 0, 1]).unwrap().x0.as_slice(), &[0.0, 1.0, 1.0]);
    }
}
