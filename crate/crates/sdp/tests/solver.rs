use nalgebra::{DMatrix, DVector};
use noisyctl_sdp::*;

fn one_by_one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn scalar_lower_bound_is_met() {
    let mut l = DecisionLayout::new();
    let x = l.scalar("x");
    let mut p = ConicProblem::new(l.clone());
    let mut b = LmiBlock::new("x-1", 1, Sense::Psd);
    b.add_scalar_identity(&l, x, 0, 1, 1.0);
    b.add_constant(0, 0, &one_by_one(-1.0));
    p.add_block(b);
    let r = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
    assert!(r.x[0] >= 1.0);
    assert!(r.worst_residual >= 0.0);
}

#[test]
fn negative_constant_block_is_infeasible() {
    let l = DecisionLayout::new();
    let mut p = ConicProblem::new(l);
    let mut b = LmiBlock::new("neg", 1, Sense::Psd);
    b.add_constant(0, 0, &one_by_one(-1.0));
    p.add_block(b);
    let r = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
    // reached margin never exceeds the true maximum of -1
    assert!(r.margin.unwrap() <= -1.0 + 1e-9);
}

/// Bounded 2x2 problem: find P with I/2 ⪯ P ⪯ I and P[0,1] >= 0.3 (feasible),
/// or >= 0.6 (infeasible: needs |p01| <= 1/2 at best).
fn box_problem(offdiag_min: f64) -> ConicProblem {
    let mut l = DecisionLayout::new();
    let pv = l.symmetric("P", 2);
    let mut p = ConicProblem::new(l.clone());
    let mut lo = LmiBlock::new("lower", 2, Sense::Psd);
    lo.add_matrix_var(&l, pv, 0, 0, 1.0);
    lo.add_constant(0, 0, &(DMatrix::identity(2, 2) * -0.5));
    let mut hi = LmiBlock::new("upper", 2, Sense::Nsd);
    hi.add_matrix_var(&l, pv, 0, 0, 1.0);
    hi.add_constant(0, 0, &(DMatrix::identity(2, 2) * -1.0));
    let mut off = LmiBlock::new("off", 1, Sense::Psd);
    let c = l.symmetric_coord(pv, 0, 1);
    off.add_coordinate_term(c, 0, 0, &one_by_one(std::f64::consts::FRAC_1_SQRT_2), 1.0);
    off.add_constant(0, 0, &one_by_one(-offdiag_min));
    p.add_block(lo);
    p.add_block(hi);
    p.add_block(off);
    p
}

#[test]
fn feasible_box_and_self_verification() {
    let p = box_problem(0.1);
    let r = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
    let pm = p.layout.extract_symmetric(p.layout.find("P").unwrap(), &r.x);
    let e = pm.clone().symmetric_eigenvalues();
    assert!(e.min() >= 0.5 - 1e-8 && e.max() <= 1.0 + 1e-8);
    assert!(pm[(0, 1)] >= 0.1 - 1e-8);
    // independent re-check agrees with the reported residual
    assert!((verify(&p, &r.x) - r.worst_residual).abs() < 1e-12);
    assert!(r.worst_residual >= -10.0 * SolverSettings::default().feas_tol);
}

#[test]
fn infeasible_box() {
    let r = solve_feasibility(&box_problem(0.3), &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn solves_are_deterministic() {
    let p = box_problem(0.2);
    let a = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    let b = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn scaling_a_block_keeps_the_status() {
    for (offdiag, expect) in [(0.1, SolveStatus::Solved), (0.3, SolveStatus::Infeasible)] {
        let mut p = box_problem(offdiag);
        for b in p.blocks.iter_mut() {
            *b = b.scaled(1e3);
        }
        let s = SolverSettings {
            feas_tol: 1e-5,
            infeasible_margin: 1e-4,
            ..SolverSettings::default()
        };
        assert_eq!(solve_feasibility(&p, &s).unwrap().status, expect);
    }
}

#[test]
fn maxdet_with_trace_budget() {
    // maximize log det M subject to tr M <= 2, M ⪰ 0  =>  M = I
    let mut l = DecisionLayout::new();
    let m = l.symmetric("M", 2);
    let mut p = ConicProblem::new(l.clone());
    let mut budget = LmiBlock::new("trace", 1, Sense::Psd);
    budget.add_constant(0, 0, &one_by_one(2.0));
    for i in 0..2 {
        budget.add_coordinate_term(l.symmetric_coord(m, i, i), 0, 0, &one_by_one(-1.0), 1.0);
    }
    let mut psd = LmiBlock::new("psd", 2, Sense::Psd);
    psd.add_matrix_var(&l, m, 0, 0, 1.0);
    p.add_block(budget);
    p.add_block(psd);
    let r = solve_maxdet(&p, m, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
    let mm = l.extract_symmetric(m, &r.x);
    assert!((mm - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
    assert!(r.objective.unwrap().abs() < 1e-7);
}

#[test]
fn maxdet_diagonal_with_nonnegative_scalars() {
    // maximize log det diag(x, y) with x + y <= 2, x, y >= 0: the scalars
    // are tied to a symmetric target through equality-free coupling
    // D - diag(x, y) = 0 expressed as two opposite blocks.
    let mut l = DecisionLayout::new();
    let d = l.symmetric("D", 2);
    let x = l.scalar("x");
    let y = l.scalar("y");
    let mut p = ConicProblem::new(l.clone());
    let mut sum = LmiBlock::new("sum", 1, Sense::Psd);
    sum.add_constant(0, 0, &one_by_one(2.0));
    sum.add_scalar_identity(&l, x, 0, 1, -1.0);
    sum.add_scalar_identity(&l, y, 0, 1, -1.0);
    p.add_block(sum);
    // D ⪯ diag(x, y)
    let mut dom = LmiBlock::new("dominance", 2, Sense::Psd);
    dom.add_scalar_identity(&l, x, 0, 1, 1.0);
    dom.add_scalar_identity(&l, y, 1, 1, 1.0);
    dom.add_matrix_var(&l, d, 0, 0, -1.0);
    p.add_block(dom);
    p.add_lower_bound(x, 0.0);
    p.add_lower_bound(y, 0.0);
    let r = solve_maxdet(&p, d, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
    assert!((r.x[l.scalar_coord(x)] - 1.0).abs() < 1e-6);
    assert!((r.x[l.scalar_coord(y)] - 1.0).abs() < 1e-6);
    assert!(r.objective.unwrap().abs() < 1e-6);
}

#[test]
fn maxdet_below_identity() {
    let mut l = DecisionLayout::new();
    let m = l.symmetric("M", 2);
    let mut p = ConicProblem::new(l.clone());
    let mut b = LmiBlock::new("M<=I", 2, Sense::Nsd);
    b.add_matrix_var(&l, m, 0, 0, 1.0);
    b.add_constant(0, 0, &(-DMatrix::<f64>::identity(2, 2)));
    p.add_block(b);
    let r = solve_maxdet(&p, m, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
    let mm = l.extract_symmetric(m, &r.x);
    assert!((mm - DMatrix::<f64>::identity(2, 2)).amax() < 1e-6);
}

#[test]
fn maxdet_detects_unbounded_objective() {
    let mut l = DecisionLayout::new();
    let m = l.symmetric("M", 1);
    let mut p = ConicProblem::new(l.clone());
    let mut b = LmiBlock::new("M>=1", 1, Sense::Psd);
    b.add_matrix_var(&l, m, 0, 0, 1.0);
    b.add_constant(0, 0, &one_by_one(-1.0));
    p.add_block(b);
    assert!(matches!(solve_maxdet(&p, m, &SolverSettings::default()), Err(SdpError::Unbounded(_))));
}

#[test]
fn malformed_problems_are_rejected() {
    let mut l = DecisionLayout::new();
    let x = l.scalar("x");
    let mut p = ConicProblem::new(l.clone());
    let mut b = LmiBlock::new("bad", 2, Sense::Psd);
    b.terms.insert(7, DMatrix::identity(2, 2));
    p.add_block(b);
    assert!(matches!(solve_feasibility(&p, &SolverSettings::default()), Err(SdpError::Malformed(_))));
    let mut p = ConicProblem::new(l);
    p.add_lower_bound(x, 0.0);
    p.add_lower_bound(x, 1.0);
    assert!(p.validate().is_err());
}

#[test]
fn dump_lists_every_block() {
    let p = box_problem(0.1);
    let mut out = Vec::new();
    p.write_dump(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("conic-problem coords=3 blocks=3"));
    assert_eq!(text.matches("\nblock ").count(), 3);
    assert!(text.contains("block upper <=0 dim=2"));
}

#[test]
fn initial_point_is_respected_when_interior() {
    let mut p = box_problem(0.1);
    p.initial = Some(DVector::from_vec(vec![0.75, 0.2, 0.75]));
    let r = solve_feasibility(&p, &SolverSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Solved);
}
