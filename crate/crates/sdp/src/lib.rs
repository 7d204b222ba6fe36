//! Small dense semidefinite programs: LMI feasibility (as margin
//! maximization) and log-det maximization, solved by a barrier method.
//!
//! Problems are written against a [`DecisionLayout`] of scalar, symmetric
//! and dense matrix variables and a list of [`LmiBlock`]s. Every returned
//! point is re-checked by [`verify`], which evaluates the blocks densely and
//! takes eigenvalues, independent of the solver's internal representation.

mod block;
mod engine;
mod layout;
mod problem;

pub use block::{LmiBlock, Sense};
pub use layout::{smat, svec, svec_index, svec_len, DecisionLayout, VarId, VarKind, Variable};
pub use problem::{ConicProblem, Objective};

use engine::Engine;
use nalgebra::DVector;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("objective appears unbounded (coordinates exceeded {0:e})")]
    Unbounded(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// A solved point may violate a block by at most this much.
    pub feas_tol: f64,
    /// Declare infeasibility once the maximal margin is certified below
    /// `-infeasible_margin`.
    pub infeasible_margin: f64,
    /// Relative and absolute stopping gaps for margin maximization.
    pub gap_rel: f64,
    pub gap_abs: f64,
    /// Absolute stopping gap on `log det` for log-det problems.
    pub logdet_gap: f64,
    /// Larger gap accepted once centring can make no further progress.
    pub logdet_stall_gap: f64,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    /// Newton steps allowed per phase.
    pub max_newton: usize,
    pub newton_tol: f64,
    /// Coordinates beyond this magnitude signal an unbounded problem.
    pub max_coordinate: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            infeasible_margin: 1e-7,
            gap_rel: 1e-3,
            gap_abs: 1e-10,
            logdet_gap: 1e-8,
            logdet_stall_gap: 1e-4,
            mu: 3.0,
            max_newton: 200,
            newton_tol: 1e-8,
            max_coordinate: 1e12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Coordinate values (original layout, margin dropped).
    pub x: DVector<f64>,
    /// Smallest eigenvalue over all blocks (sense-adjusted) and bound slacks,
    /// recomputed densely at `x`.
    pub worst_residual: f64,
    /// Maximal feasibility margin reached (margin phase).
    pub margin: Option<f64>,
    /// `log det` of the target at `x` for log-det problems.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

/// Smallest eigenvalue of every block at `x`, with `⪯ 0` blocks negated,
/// together with every lower-bound slack. Independent of the engine.
pub fn verify(p: &ConicProblem, x: &DVector<f64>) -> f64 {
    let mut worst = f64::INFINITY;
    for b in &p.blocks {
        let mut f = b.evaluate(x);
        if b.sense == Sense::Nsd {
            f.neg_mut();
        }
        let f = (&f + f.transpose()) * 0.5;
        worst = worst.min(f.symmetric_eigenvalues().min());
    }
    for &(k, l) in &p.lower_bounds {
        worst = worst.min(x[k] - l);
    }
    worst
}

enum Centering {
    Done,
    /// The margin coordinate passed the requested level before centring.
    Ahead,
    Exhausted,
    Stalled,
    Diverged,
}

struct PathState {
    x: DVector<f64>,
    newton_steps: usize,
    /// Coordinate and level ending a centring early once exceeded.
    ahead: Option<(usize, f64)>,
}

impl PathState {
    /// Keeps doubling along a Newton direction whose full step was accepted
    /// while the barrier value keeps falling.
    fn extrapolate(&mut self, eng: &Engine, t: f64, dx: &DVector<f64>, mut f: f64) {
        let bound = 0.99 * eng.max_bound_step(&self.x, dx);
        let mut extra = 1.0;
        while extra <= bound.min(64.0) {
            let trial = &self.x + dx * extra;
            match eng.value(&trial, t) {
                Some(f1) if f1 < f => {
                    self.x = trial;
                    f = f1;
                    extra *= 2.0;
                }
                _ => break,
            }
        }
    }

    fn center(&mut self, eng: &Engine, t: f64, s: &SolverSettings, budget: usize) -> Centering {
        let mut previous = f64::INFINITY;
        loop {
            if self.newton_steps >= budget {
                return Centering::Exhausted;
            }
            let Some(nt) = eng.newton(&self.x, t) else {
                return Centering::Stalled;
            };
            if nt.decrement_sq / 2.0 <= s.newton_tol {
                return Centering::Done;
            }
            // close to the centre the decrement must shrink quadratically;
            // when it does not, rounding noise dominates the direction
            if nt.decrement_sq < 1e-4 && nt.decrement_sq > 0.25 * previous {
                return Centering::Done;
            }
            previous = nt.decrement_sq;
            self.newton_steps += 1;
            let f0 = eng.value(&self.x, t).expect("iterate stays interior");
            let mut step = (0.99 * eng.max_bound_step(&self.x, &nt.step)).min(1.0);
            let mut accepted = false;
            while step > 1e-8 {
                let trial = &self.x + &nt.step * step;
                if let Some(f1) = eng.value(&trial, t) {
                    // inside the quadratic convergence region a feasible full
                    // step is taken even when rounding hides the decrease
                    let quadratic = step == 1.0 && nt.decrement_sq < 0.0625;
                    if quadratic || f1 <= f0 - 0.25 * step * nt.decrement_sq {
                        self.x = trial;
                        accepted = true;
                        if step == 1.0 && !quadratic {
                            self.extrapolate(eng, t, &nt.step, f1);
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                // no progress possible at this accuracy; treat as centred if
                // the decrement is already small
                return if nt.decrement_sq < 1e-6 { Centering::Done } else { Centering::Stalled };
            }
            if self.x.amax() > s.max_coordinate {
                return Centering::Diverged;
            }
            if let Some((k, level)) = self.ahead {
                if self.x[k] > level {
                    return Centering::Ahead;
                }
            }
        }
    }
}

struct MarginOutcome {
    x: DVector<f64>,
    margin: f64,
    certified_below: bool,
    converged: bool,
    newton_steps: usize,
}

/// Maximizes the common margin `s` of all blocks. Stops early when
/// `stop_when_positive` and a strictly positive margin has been reached.
fn maximize_margin(
    p: &ConicProblem,
    extra_psd: Option<VarId>,
    s: &SolverSettings,
    stop_when_positive: bool,
) -> Result<MarginOutcome, SdpError> {
    let n = p.n_coords();
    let eng = Engine::margin(p, extra_psd);
    let mut x = DVector::zeros(n + 1);
    if let Some(x0) = &p.initial {
        x.rows_mut(0, n).copy_from(x0);
    }
    eng.interiorize(&mut x);
    x[n] = 0.0;
    let lam = eng.min_block_eigenvalue(&x);
    x[n] = lam - 1.0 - 1e-3 * lam.abs();

    let mut st = PathState { x, newton_steps: 0, ahead: None };
    let mut t = eng.degree / (1.0 + lam.abs());
    loop {
        st.ahead = Some((n, eng.degree / t));
        let c = st.center(&eng, t, s, s.max_newton);
        let margin = st.x[n];
        log::trace!("margin t={t:e} newton={} margin={margin:e}", st.newton_steps);
        if matches!(c, Centering::Diverged) {
            // the margin grows without bound: feasible, keep the point
            if margin > 0.0 {
                return Ok(MarginOutcome {
                    margin,
                    x: st.x.rows(0, n).into_owned(),
                    certified_below: false,
                    converged: true,
                    newton_steps: st.newton_steps,
                });
            }
            return Err(SdpError::Unbounded(s.max_coordinate));
        }
        let gap = eng.degree / t;
        if margin + gap < -s.infeasible_margin {
            return Ok(MarginOutcome {
                margin,
                x: st.x.rows(0, n).into_owned(),
                certified_below: true,
                converged: true,
                newton_steps: st.newton_steps,
            });
        }
        let ahead = matches!(c, Centering::Ahead);
        let converged =
            ahead || gap <= s.gap_abs.max(s.gap_rel * margin.abs()) || (stop_when_positive && margin > 0.0);
        if converged || !matches!(c, Centering::Done) {
            return Ok(MarginOutcome {
                margin,
                x: st.x.rows(0, n).into_owned(),
                certified_below: false,
                converged: converged && matches!(c, Centering::Done | Centering::Ahead),
                newton_steps: st.newton_steps,
            });
        }
        t *= s.mu;
    }
}

/// Decides feasibility of all blocks and bounds by maximizing their
/// common margin. The feasible region must be bounded (add a
/// normalization block for homogeneous LMIs).
pub fn solve_feasibility(p: &ConicProblem, s: &SolverSettings) -> Result<SolveReport, SdpError> {
    p.validate()?;
    let clock = Instant::now();
    if p.blocks.is_empty() {
        let eng = Engine::margin(p, None);
        let mut x = DVector::zeros(p.n_coords() + 1);
        eng.interiorize(&mut x);
        let x = x.rows(0, p.n_coords()).into_owned();
        return Ok(SolveReport {
            status: SolveStatus::Solved,
            worst_residual: verify(p, &x),
            x,
            margin: None,
            objective: None,
            iterations: 0,
            seconds: clock.elapsed().as_secs_f64(),
        });
    }
    let out = maximize_margin(p, None, s, false)?;
    let status = if out.certified_below || out.margin < -s.infeasible_margin {
        SolveStatus::Infeasible
    } else if out.margin >= -s.feas_tol && (out.converged || out.margin > 0.0) {
        SolveStatus::Solved
    } else {
        SolveStatus::NumericalFailure
    };
    let worst = verify(p, &out.x);
    let status = if status == SolveStatus::Solved && worst < -s.feas_tol {
        log::warn!("margin {:e} but dense re-check found {:e}", out.margin, worst);
        SolveStatus::NumericalFailure
    } else {
        status
    };
    log::debug!(
        "feasibility: {:?} margin={:e} newton={} t={:.3}s",
        status,
        out.margin,
        out.newton_steps,
        clock.elapsed().as_secs_f64()
    );
    Ok(SolveReport {
        status,
        x: out.x,
        worst_residual: worst,
        margin: Some(out.margin),
        objective: None,
        iterations: out.newton_steps,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Maximizes `log det` of the symmetric variable `target` subject to the
/// blocks and bounds of `p` (its own objective field is ignored).
pub fn solve_maxdet(p: &ConicProblem, target: VarId, s: &SolverSettings) -> Result<SolveReport, SdpError> {
    let mut q = p.clone();
    q.objective = Objective::MaximizeLogDet(target);
    q.validate()?;
    let clock = Instant::now();

    // phase one: a strictly feasible point with the target positive definite
    let start = maximize_margin(&q, Some(target), s, true)?;
    if !(start.margin > 0.0) {
        let status = if start.certified_below || start.converged {
            SolveStatus::Infeasible
        } else {
            SolveStatus::NumericalFailure
        };
        return Ok(SolveReport {
            status,
            worst_residual: verify(&q, &start.x),
            x: start.x,
            margin: Some(start.margin),
            objective: None,
            iterations: start.newton_steps,
            seconds: clock.elapsed().as_secs_f64(),
        });
    }

    let eng = Engine::logdet(&q, target);
    let mut st = PathState {
        x: start.x,
        newton_steps: 0,
        ahead: None,
    };
    let mut t = 1.0;
    let status = loop {
        let c = st.center(&eng, t, s, s.max_newton);
        log::trace!("maxdet t={t:e} newton={} objective={:?}", st.newton_steps, eng.objective(&st.x));
        match c {
            Centering::Done | Centering::Ahead => {}
            Centering::Diverged => return Err(SdpError::Unbounded(s.max_coordinate)),
            Centering::Exhausted | Centering::Stalled => {
                // accept a nearly converged path point
                break if eng.degree / t <= s.logdet_stall_gap {
                    SolveStatus::Solved
                } else {
                    SolveStatus::NumericalFailure
                };
            }
        }
        if eng.degree / t <= s.logdet_gap {
            break SolveStatus::Solved;
        }
        t *= s.mu;
    };
    let worst = verify(&q, &st.x);
    let status = if status == SolveStatus::Solved && worst < -s.feas_tol {
        SolveStatus::NumericalFailure
    } else {
        status
    };
    log::debug!(
        "maxdet: {:?} newton={}+{} t={:.3}s",
        status,
        start.newton_steps,
        st.newton_steps,
        clock.elapsed().as_secs_f64()
    );
    Ok(SolveReport {
        status,
        objective: eng.objective(&st.x),
        worst_residual: worst,
        x: st.x,
        margin: Some(start.margin),
        iterations: start.newton_steps + st.newton_steps,
        seconds: clock.elapsed().as_secs_f64(),
    })
}
