//! Smallest matrix ellipsoid `Z'AZ + Z'B + B'Z + C <= 0`, with the
//! normalization `C = B'A^-1 B - I`, that provably contains every model
//! satisfying all per-sample bounds. Containment is certified by
//! multipliers `tau_i >= 0` through
//!
//! ```text
//! [ -I - sum tau_i C_i    B' - sum tau_i B_i'   B' ]
//! [  B - sum tau_i B_i    A  - sum tau_i A_i    0  ]  <= 0
//! [  B                    0                    -A ]
//! ```
//!
//! and `log det A` is maximized. The size is `det(A)^(-n/2)`.

use crate::consistency::{ConsistencySets, BOUNDED_REL_TOL};
use crate::ellipsoid::QuadraticForm;
use crate::{Error, Result};
use nalgebra::DMatrix;
use noisyctl_sdp::{solve_maxdet, ConicProblem, DecisionLayout, LmiBlock, Sense, SolveStatus, SolverSettings, VarId};
use rand::Rng;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct OverapproxProblem {
    pub problem: ConicProblem,
    pub abar: VarId,
    pub bbar: VarId,
    pub tau: Vec<VarId>,
    pub delta: f64,
}

/// `1e-8` times the scale of the aggregate regressor Gram matrix per unit bound.
pub fn default_delta(cs: &ConsistencySets<f64>) -> f64 {
    let p = (cs.n() + cs.m()) as f64;
    let t = cs.data.len() as f64;
    let eps = cs.data.epsilon.max(f64::MIN_POSITIVE);
    1e-8 * (cs.aggregate.a.trace() / (p * t * eps)).max(1.0)
}

pub fn assemble(cs: &ConsistencySets<f64>, delta: f64) -> OverapproxProblem {
    let (n, m) = (cs.n(), cs.m());
    let p = n + m;
    let mut l = DecisionLayout::new();
    let abar = l.symmetric("Abar", p);
    let bbar = l.dense("Bbar", p, n);
    let tau: Vec<VarId> = (0..cs.samples.len()).map(|i| l.scalar(&format!("tau{i}"))).collect();
    let (r2, r3) = (n, n + p);
    let mut main = LmiBlock::new("containment", n + 2 * p, Sense::Nsd);
    main.add_constant(0, 0, &(-DMatrix::identity(n, n)));
    main.add_matrix_var(&l, bbar, r2, 0, 1.0);
    main.add_matrix_var(&l, bbar, r3, 0, 1.0);
    main.add_matrix_var(&l, abar, r2, r2, 1.0);
    main.add_matrix_var(&l, abar, r3, r3, -1.0);
    for (q, &t) in cs.samples.iter().zip(&tau) {
        let mut theta = DMatrix::zeros(n + 2 * p, n + 2 * p);
        theta.view_mut((0, 0), (n, n)).copy_from(&q.c);
        theta.view_mut((r2, 0), (p, n)).copy_from(&q.b);
        theta.view_mut((0, r2), (n, p)).copy_from(&q.b.transpose());
        theta.view_mut((r2, r2), (p, p)).copy_from(&q.a);
        main.add_scalar_times(&l, t, 0, 0, &theta, -1.0);
    }
    let mut strict = LmiBlock::new("Abar>=delta", p, Sense::Psd);
    strict.add_matrix_var(&l, abar, 0, 0, 1.0);
    strict.add_constant(0, 0, &(DMatrix::identity(p, p) * -delta));
    let mut problem = ConicProblem::new(l);
    problem.add_block(main);
    problem.add_block(strict);
    for &t in &tau {
        problem.add_lower_bound(t, 0.0);
    }
    OverapproxProblem { problem, abar, bbar, tau, delta }
}

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct OverapproxSettings {
    pub solver: SolverSettings,
    /// `None` uses [`default_delta`].
    pub delta: Option<f64>,
}


#[derive(Debug, Clone)]
pub struct OverapproxResult {
    pub status: SolveStatus,
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub tau: Vec<f64>,
    /// `-(n/2) log det Abar`.
    pub log_size: f64,
    pub size: f64,
    pub delta: f64,
    pub worst_residual: f64,
    pub iterations: usize,
    pub seconds: f64,
}

impl OverapproxResult {
    pub fn cbar(&self) -> DMatrix<f64> {
        let ainv = self.abar.clone().try_inverse().expect("Abar positive definite");
        let c = self.bbar.transpose() * ainv * &self.bbar - DMatrix::identity(self.bbar.ncols(), self.bbar.ncols());
        (&c + c.transpose()) * 0.5
    }

    pub fn ellipsoid(&self) -> Result<QuadraticForm<f64>> {
        QuadraticForm::new(self.abar.clone(), self.bbar.clone(), self.cbar())
    }

    pub fn is_solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Rec<'a> {
            status: &'a str,
            abar: Vec<Vec<f64>>,
            bbar: Vec<Vec<f64>>,
            tau_sum: f64,
            size: f64,
            log_size: f64,
            delta: f64,
            worst_residual: f64,
            iterations: usize,
            seconds: f64,
        }
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(serde_json::to_string_pretty(&Rec {
            status: crate::synthesis::status_name(self.status),
            abar: rows(&self.abar),
            bbar: rows(&self.bbar),
            tau_sum: self.tau.iter().sum(),
            size: self.size,
            log_size: self.log_size,
            delta: self.delta,
            worst_residual: self.worst_residual,
            iterations: self.iterations,
            seconds: self.seconds,
        })?)
    }
}

/// Refuses data that is not persistently exciting and reports a proven
/// infeasible containment program as [`Error::InfeasibleContainment`].
pub fn compute_overapprox(cs: &ConsistencySets<f64>, settings: &OverapproxSettings) -> Result<OverapproxResult> {
    let start = Instant::now();
    if !cs.is_bounded(BOUNDED_REL_TOL) {
        return Err(Error::InfeasibleContainment);
    }
    let delta = settings.delta.unwrap_or_else(|| default_delta(cs));
    let op = assemble(cs, delta);
    let r = solve_maxdet(&op.problem, op.abar, &settings.solver)?;
    if r.status == SolveStatus::Infeasible {
        return Err(Error::InfeasibleContainment);
    }
    let l = &op.problem.layout;
    let abar = l.extract_symmetric(op.abar, &r.x);
    let log_size = match crate::linalg::log_det_pd(&abar) {
        Some(ld) => -(cs.n() as f64) / 2.0 * ld,
        None => f64::NAN,
    };
    Ok(OverapproxResult {
        status: r.status,
        bbar: l.extract_dense(op.bbar, &r.x),
        tau: op.tau.iter().map(|&t| l.extract_scalar(t, &r.x)).collect(),
        abar,
        log_size,
        size: log_size.exp(),
        delta,
        worst_residual: r.worst_residual,
        iterations: r.iterations,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContainmentCheck {
    pub proposals: usize,
    pub in_i: usize,
    pub violations: usize,
}

/// Draws `n` points from the aggregate set, keeps those satisfying every
/// per-sample bound and counts those outside the over-approximation by
/// more than `1e-7`.
pub fn containment_check<R: Rng + ?Sized>(
    r: &OverapproxResult,
    cs: &ConsistencySets<f64>,
    n: usize,
    rng: &mut R,
) -> Result<ContainmentCheck> {
    let mut out = ContainmentCheck { proposals: n, in_i: 0, violations: 0 };
    if n == 0 {
        return Ok(out);
    }
    let bar = r.ellipsoid()?;
    let c = cs.aggregate_center_form()?;
    for _ in 0..n {
        let z = c.sample_member(rng);
        if cs.member_i_stacked(&z)? >= 0.0 {
            out.in_i += 1;
            if bar.membership(&z)? < -1e-7 {
                out.violations += 1;
            }
        }
    }
    Ok(out)
}

/// `size(aggregate set) / size(over-approximation)`.
pub fn size_ratio(cs: &ConsistencySets<f64>, r: &OverapproxResult) -> Result<f64> {
    let c = cs.aggregate_ellipsoid()?.log_size()?;
    Ok((c - r.log_size).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::build;
    use crate::datagen::example1_dataset;

    #[test]
    fn example_unit_disk() {
        let cs = build(&example1_dataset::<f64>(2).unwrap());
        let r = compute_overapprox(&cs, &OverapproxSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Solved);
        assert!((&r.abar - DMatrix::identity(2, 2)).amax() < 1e-5, "{}", r.abar);
        assert!((r.size - 1.0).abs() < 1e-5);
        let c = r.ellipsoid().unwrap().to_center().unwrap();
        assert!((c.center()[0] - 0.5).abs() < 1e-5 && (c.center()[1] - 0.5).abs() < 1e-5);
        assert!((size_ratio(&cs, &r).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rank_deficient_data_is_refused() {
        let cs = build(&example1_dataset::<f64>(1).unwrap());
        assert!(matches!(
            compute_overapprox(&cs, &OverapproxSettings::default()),
            Err(Error::InfeasibleContainment)
        ));
    }
}
