//! State-feedback synthesis over the consistency sets.
//!
//! Both programs search for `P`, `Y`, `beta` and nonnegative multipliers
//! such that, with row blocks of sizes `(n, n, m, n)`,
//!
//! ```text
//! [ P - beta I   0    0   0 ]
//! [ 0           -P   -Y'  0 ]  -  S  >= 0
//! [ 0           -Y    0   Y ]
//! [ 0            0    Y'  P ]
//! ```
//!
//! where `S = alpha (T eps E - V V')` for the energy bound and
//! `S = sum_i tau_i (eps E - v_i v_i')` for the instantaneous bound, with
//! `E` the identity on the first block, `V = [X1; -X0; -U0; 0]` and `v_i`
//! its columns. The gain is `K = Y P^-1`. `tr P <= n` removes the scaling
//! freedom of the homogeneous inequality.

use crate::consistency::{ConsistencySets, BOUNDED_REL_TOL};
use crate::datagen::DataSet;
use crate::linalg::{eigen_range, lambda_max, spectral_radius};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use noisyctl_sdp::{
    solve_feasibility, verify, ConicProblem, DecisionLayout, LmiBlock, Sense, SolveStatus, SolverSettings, VarId,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approach {
    Energy,
    Instantaneous,
}

impl Approach {
    pub fn name(&self) -> &'static str {
        match self {
            Approach::Energy => "energy",
            Approach::Instantaneous => "instantaneous",
        }
    }
}

/// Strictness margin `1e-6 * max(1, |X1|_2)`.
pub fn default_delta(ds: &DataSet<f64>) -> f64 {
    let g = &ds.x1 * ds.x1.transpose();
    let norm = eigen_range(&g).1.max(0.0).sqrt();
    1e-6 * norm.max(1.0)
}

#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub approach: Approach,
    pub problem: ConicProblem,
    pub p: VarId,
    pub y: VarId,
    pub beta: VarId,
    /// `alpha` alone, or `tau_0 .. tau_{T-1}`.
    pub multipliers: Vec<VarId>,
    pub delta: f64,
}

impl DesignProblem {
    pub fn main_block(&self) -> &LmiBlock {
        &self.problem.blocks[0]
    }

    /// Decision vector for given values.
    pub fn point(&self, p: &DMatrix<f64>, y: &DMatrix<f64>, beta: f64, multipliers: &[f64]) -> DVector<f64> {
        let l = &self.problem.layout;
        let mut x = DVector::zeros(l.len());
        l.insert_symmetric(self.p, p, &mut x);
        l.insert_dense(self.y, y, &mut x);
        l.insert_scalar(self.beta, beta, &mut x);
        for (v, &m) in self.multipliers.iter().zip(multipliers) {
            l.insert_scalar(*v, m, &mut x);
        }
        x
    }
}

/// Column `i` of `[X1; -X0; -U0; 0]`.
fn data_column(ds: &DataSet<f64>, i: usize) -> DVector<f64> {
    let (n, m) = (ds.n(), ds.m());
    let mut v = DVector::zeros(3 * n + m);
    v.rows_mut(0, n).copy_from(&ds.x1.column(i));
    v.rows_mut(n, n).copy_from(&(-ds.x0.column(i)));
    v.rows_mut(2 * n, m).copy_from(&(-ds.u0.column(i)));
    v
}

fn data_matrix(ds: &DataSet<f64>) -> DMatrix<f64> {
    let (n, m) = (ds.n(), ds.m());
    let mut v = DMatrix::zeros(3 * n + m, ds.len());
    v.rows_mut(0, n).copy_from(&ds.x1);
    v.rows_mut(n, n).copy_from(&(-&ds.x0));
    v.rows_mut(2 * n, m).copy_from(&(-&ds.u0));
    v
}

fn first_block(dim: usize, n: usize, v: f64) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(dim, dim);
    e.view_mut((0, 0), (n, n)).fill_diagonal(v);
    e
}

fn skeleton(ds: &DataSet<f64>, delta: f64, approach: Approach) -> (DesignProblem, LmiBlock, Vec<LmiBlock>) {
    let (n, m) = (ds.n(), ds.m());
    let mut l = DecisionLayout::new();
    let p = l.symmetric("P", n);
    let y = l.dense("Y", m, n);
    let beta = l.scalar("beta");
    let multipliers = match approach {
        Approach::Energy => vec![l.scalar("alpha")],
        Approach::Instantaneous => (0..ds.len()).map(|i| l.scalar(&format!("tau{i}"))).collect(),
    };
    let dim = 3 * n + m;
    let (o2, o3, o4) = (n, 2 * n, 2 * n + m);
    let mut main = LmiBlock::new("main", dim, Sense::Psd);
    main.add_matrix_var(&l, p, 0, 0, 1.0);
    main.add_scalar_identity(&l, beta, 0, n, -1.0);
    main.add_matrix_var(&l, p, o2, o2, -1.0);
    main.add_matrix_var(&l, y, o3, o2, -1.0);
    main.add_matrix_var(&l, y, o3, o4, 1.0);
    main.add_matrix_var(&l, p, o4, o4, 1.0);

    let mut problem = ConicProblem::new(l.clone());
    let mut strict = LmiBlock::new("P>=delta", n, Sense::Psd);
    strict.add_matrix_var(&l, p, 0, 0, 1.0);
    strict.add_constant(0, 0, &(DMatrix::identity(n, n) * -delta));
    let mut norm = LmiBlock::new("trace", 1, Sense::Psd);
    norm.add_constant(0, 0, &DMatrix::from_element(1, 1, n as f64));
    for i in 0..n {
        norm.add_coordinate_term(l.symmetric_coord(p, i, i), 0, 0, &DMatrix::from_element(1, 1, -1.0), 1.0);
    }
    problem.add_lower_bound(beta, delta);
    for &v in &multipliers {
        problem.add_lower_bound(v, 0.0);
    }
    let d = DesignProblem { approach, problem, p, y, beta, multipliers, delta };
    (d, main, vec![strict, norm])
}

fn finish(mut d: DesignProblem, main: LmiBlock, rest: Vec<LmiBlock>) -> DesignProblem {
    d.problem.add_block(main);
    for b in rest {
        d.problem.add_block(b);
    }
    d
}

pub fn assemble_energy(ds: &DataSet<f64>, delta: f64) -> DesignProblem {
    let (d, mut main, rest) = skeleton(ds, delta, Approach::Energy);
    let v = data_matrix(ds);
    let s = &v * v.transpose() - first_block(main.dim, ds.n(), ds.energy_bound());
    main.add_scalar_times(&d.problem.layout, d.multipliers[0], 0, 0, &s, 1.0);
    finish(d, main, rest)
}

pub fn assemble_instantaneous(ds: &DataSet<f64>, delta: f64) -> DesignProblem {
    let (d, mut main, rest) = skeleton(ds, delta, Approach::Instantaneous);
    let e = first_block(main.dim, ds.n(), ds.epsilon);
    for (i, &tau) in d.multipliers.iter().enumerate() {
        let v = data_column(ds, i);
        let s = &v * v.transpose() - &e;
        main.add_scalar_times(&d.problem.layout, tau, 0, 0, &s, 1.0);
    }
    finish(d, main, rest)
}

pub fn assemble(ds: &DataSet<f64>, approach: Approach, delta: f64) -> DesignProblem {
    match approach {
        Approach::Energy => assemble_energy(ds, delta),
        Approach::Instantaneous => assemble_instantaneous(ds, delta),
    }
}

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct SynthesisSettings {
    pub solver: SolverSettings,
    /// `None` uses [`default_delta`].
    pub delta: Option<f64>,
}


#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub approach: Approach,
    pub status: SolveStatus,
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub beta: f64,
    pub multipliers: Vec<f64>,
    /// `Y P^-1`, present when solved.
    pub k: Option<DMatrix<f64>>,
    pub delta: f64,
    pub worst_residual: f64,
    pub margin: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

pub fn design(ds: &DataSet<f64>, approach: Approach, settings: &SynthesisSettings) -> Result<SynthesisResult> {
    let start = Instant::now();
    let delta = settings.delta.unwrap_or_else(|| default_delta(ds));
    let d = assemble(ds, approach, delta);
    let mut s = settings.solver.clone();
    s.infeasible_margin = delta / 2.0;
    let r = solve_feasibility(&d.problem, &s)?;
    let l = &d.problem.layout;
    let p = l.extract_symmetric(d.p, &r.x);
    let y = l.extract_dense(d.y, &r.x);
    let k = match r.status {
        SolveStatus::Solved => Some(
            p.clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidInput("solved P is not positive definite".into()))?
                .solve(&y.transpose())
                .transpose(),
        ),
        _ => None,
    };
    Ok(SynthesisResult {
        approach,
        status: r.status,
        beta: l.extract_scalar(d.beta, &r.x),
        multipliers: d.multipliers.iter().map(|&v| l.extract_scalar(v, &r.x)).collect(),
        p,
        y,
        k,
        delta,
        worst_residual: r.worst_residual,
        margin: r.margin,
        iterations: r.iterations,
        seconds: start.elapsed().as_secs_f64(),
    })
}

impl SynthesisResult {
    pub fn is_solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }

    /// Largest eigenvalue of `(A+BK) P (A+BK)' - P`.
    pub fn lyapunov_decrease(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
        let k = self.k.as_ref()?;
        let acl = a + b * k;
        Some(lambda_max(&(&acl * &self.p * acl.transpose() - &self.p)))
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = ResultRecord {
            approach: self.approach,
            status: status_name(self.status),
            k: self.k.as_ref().map(|k| k.row_iter().map(|r| r.iter().copied().collect()).collect()),
            beta: self.beta,
            delta: self.delta,
            worst_residual: self.worst_residual,
            margin: self.margin,
            multipliers: self.multipliers.len(),
            max_multiplier: self.multipliers.iter().copied().fold(0.0, f64::max),
            iterations: self.iterations,
            seconds: self.seconds,
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Solved => "solved",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NumericalFailure => "numerical-failure",
    }
}

#[derive(Serialize)]
struct ResultRecord {
    approach: Approach,
    status: &'static str,
    #[serde(rename = "K")]
    k: Option<Vec<Vec<f64>>>,
    beta: f64,
    delta: f64,
    worst_residual: f64,
    margin: Option<f64>,
    multipliers: usize,
    max_multiplier: f64,
    iterations: usize,
    seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferReport {
    pub worst_residual: f64,
    pub passes: bool,
}

/// Evaluates the instantaneous program at the energy solution with every
/// `tau_i = alpha`.
pub fn certificate_transfer(r: &SynthesisResult, ds: &DataSet<f64>, feas_tol: f64) -> Result<TransferReport> {
    if r.approach != Approach::Energy || !r.is_solved() {
        return Err(Error::InvalidInput("transfer needs a solved energy design".into()));
    }
    let d = assemble_instantaneous(ds, r.delta);
    let taus = vec![r.multipliers[0]; ds.len()];
    let x = d.point(&r.p, &r.y, r.beta, &taus);
    let worst = verify(&d.problem, &x);
    Ok(TransferReport { worst_residual: worst, passes: worst >= -10.0 * feas_tol })
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationSettings {
    /// Target number of samples from each set.
    pub samples: usize,
    /// Proposal budget for rejection sampling of the per-sample intersection.
    pub max_proposals: usize,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self { samples: 10_000, max_proposals: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainValidation {
    pub max_rho_c: f64,
    pub c_samples: usize,
    pub max_rho_i: Option<f64>,
    pub i_samples: usize,
    pub proposals: usize,
}

impl GainValidation {
    pub fn stable_on_c(&self) -> bool {
        self.c_samples > 0 && self.max_rho_c < 1.0
    }

    pub fn stable_on_i(&self) -> bool {
        self.max_rho_i.is_some_and(|r| r < 1.0)
    }
}

/// Largest closed-loop spectral radius of `A + B K` over uniform draws from
/// the aggregate set and over the draws that also satisfy every per-sample
/// bound.
pub fn validate_gain<R: Rng + ?Sized>(
    k: &DMatrix<f64>,
    cs: &ConsistencySets<f64>,
    settings: ValidationSettings,
    rng: &mut R,
) -> Result<GainValidation> {
    if !cs.is_bounded(BOUNDED_REL_TOL) {
        return Err(Error::UnboundedSet);
    }
    crate::check_shape(k, cs.m(), cs.n())?;
    let e = cs.aggregate_center_form()?;
    let rho = |z: &DMatrix<f64>| {
        let (a, b) = cs.unstack(z);
        spectral_radius(&(a + b * k))
    };
    let mut out = GainValidation { max_rho_c: 0.0, c_samples: 0, max_rho_i: None, i_samples: 0, proposals: 0 };
    while out.c_samples < settings.samples || (out.i_samples < settings.samples && out.proposals < settings.max_proposals)
    {
        let z = e.sample_member(rng);
        out.proposals += 1;
        let mut r = None;
        if out.c_samples < settings.samples {
            let v = rho(&z);
            out.max_rho_c = out.max_rho_c.max(v);
            out.c_samples += 1;
            r = Some(v);
        }
        if out.i_samples < settings.samples && cs.member_i_stacked(&z)? >= 0.0 {
            let v = r.unwrap_or_else(|| rho(&z));
            out.max_rho_i = Some(out.max_rho_i.map_or(v, |m: f64| m.max(v)));
            out.i_samples += 1;
        }
    }
    Ok(out)
}
