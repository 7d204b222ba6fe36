use nalgebra::{DMatrix, DVector};
use noisyctl_core::consistency::build;
use noisyctl_core::datagen::{example1_dataset, simulate, DisturbanceKind, DisturbanceModel, InputKind, InputModel};
use noisyctl_core::{ConsistencySets, DataSet, Exact, LtiSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn example_closed_forms_are_exact() {
    let start = Instant::now();
    let half = Exact::new(1, 2);
    let expected = [[-1, -2, -1, 0, 0, 1], [-2, 0, -2, 0, 0, 2], [-2, 0, -2, 0, 0, 3]];
    for (t, row) in (1..=3).zip(expected) {
        let q = build(&example1_dataset::<Exact>(t).unwrap()).shifted_conic(half, half).unwrap();
        let got = [q.aa, q.ab, q.bb, q.a, q.b, q.c];
        assert_eq!(got, row.map(Exact::from_integer), "T={t}");
        let qf = build(&example1_dataset::<f64>(t).unwrap()).shifted_conic(0.5, 0.5).unwrap();
        let gotf = [qf.aa, qf.ab, qf.bb, qf.a, qf.b, qf.c];
        for (g, e) in gotf.iter().zip(row) {
            assert!((g - e as f64).abs() <= 1e-12);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn example_aggregate_matrices() {
    let cs = build(&example1_dataset::<Exact>(1).unwrap());
    let one = Exact::from_integer(1);
    assert_eq!(cs.aggregate.a, DMatrix::from_element(2, 2, one));
    assert_eq!(cs.aggregate.b, DMatrix::from_element(2, 1, -one));
    assert_eq!(cs.aggregate.c, DMatrix::from_element(1, 1, Exact::from_integer(0)));
    let cs = build(&example1_dataset::<Exact>(2).unwrap());
    assert_eq!(cs.aggregate.a, DMatrix::identity(2, 2) * Exact::from_integer(2));
    assert_eq!(cs.aggregate.c, DMatrix::from_element(1, 1, -one));
}

#[test]
fn example_memberships() {
    let c1 = build(&example1_dataset::<f64>(1).unwrap());
    let c2 = build(&example1_dataset::<f64>(2).unwrap());
    let c3 = build(&example1_dataset::<f64>(3).unwrap());
    assert!((c1.member_c(&m1(0.5), &m1(0.5)).unwrap() - 1.0).abs() < 1e-12);
    assert!((c2.member_c(&m1(0.5), &m1(0.5)).unwrap() - 2.0).abs() < 1e-12);
    assert!(c2.member_c(&m1(1.5), &m1(0.5)).unwrap().abs() < 1e-12);
    let w = 0.5 + 0.6f64.sqrt();
    let in3 = c3.member_c(&m1(w), &m1(w)).unwrap();
    let in2 = c2.member_c(&m1(w), &m1(w)).unwrap();
    assert!((in3 - 0.6).abs() < 1e-12 && in3 > 0.0);
    assert!((in2 + 0.4).abs() < 1e-12 && in2 < 0.0);
    assert!(c2.member_i(&m1(1.5), &m1(0.5)).unwrap().abs() < 1e-12);
    assert!(!c1.is_bounded(1e-8) && c2.is_bounded(1e-8));
}

#[test]
fn zero_data_has_no_information() {
    let z = DMatrix::zeros(1, 2);
    let cs = build(&DataSet::new(z.clone(), z.clone(), z, 1.0).unwrap());
    assert_eq!(cs.aggregate.a, DMatrix::zeros(2, 2));
    assert_eq!(cs.aggregate.c, DMatrix::from_element(1, 1, -2.0));
    assert!(!cs.is_bounded(1e-8));
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, t: usize) -> DataSet {
    let mut g = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-3.0..3.0));
    let (x0, x1, u0) = (g(n, t), g(n, t), g(m, t));
    DataSet::new(x0, x1, u0, rng.random_range(0.01..2.0)).unwrap()
}

#[test]
fn aggregate_equals_sum_of_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (n, m, t) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=50));
        let cs = build(&random_dataset(&mut rng, n, m, t));
        let s = cs.summed_samples();
        let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() / (1.0 + b.amax());
        assert!(rel(&s.a, &cs.aggregate.a) <= 1e-12);
        assert!(rel(&s.b, &cs.aggregate.b) <= 1e-12);
        assert!(rel(&s.c, &cs.aggregate.c) <= 1e-12);
    }
}

fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LtiSystem {
    let mut g = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    LtiSystem::new(g(n, n) * 0.6, g(n, m)).unwrap()
}

fn simulated(rng: &mut ChaCha8Rng, sys: &LtiSystem, eps: f64, t: usize) -> DataSet {
    let x0 = DVector::zeros(sys.n());
    let inputs = InputModel::new(InputKind::StandardNormal);
    let dist = DisturbanceModel::new(DisturbanceKind::UniformBall, eps);
    simulate(sys, &x0, &inputs, &dist, t, rng).unwrap().data
}

/// Uniform draw from the aggregate set, dilated about its centre.
fn probe(cs: &ConsistencySets, rng: &mut ChaCha8Rng, dilation: f64) -> DMatrix<f64> {
    let e = cs.aggregate_center_form().unwrap();
    let z = e.sample_member(rng);
    e.center() + (z - e.center()) * dilation
}

#[test]
fn intersection_lies_inside_the_aggregate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut in_i, mut violations) = (0, 0);
    for k in 0..20 {
        let (n, m) = (1 + k % 3, 1 + k % 2);
        let sys = random_system(&mut rng, n, m);
        let cs = build(&simulated(&mut rng, &sys, 0.2, 10 + 5 * k));
        for _ in 0..10_000 {
            let z = probe(&cs, &mut rng, if k % 2 == 0 { 0.3 } else { 1.5 });
            if cs.member_i_stacked(&z).unwrap() >= 0.0 {
                in_i += 1;
                if cs.member_c_stacked(&z).unwrap() < -1e-9 {
                    violations += 1;
                }
            }
        }
    }
    assert_eq!(violations, 0);
    assert!(in_i > 1000, "only {in_i} points reached the intersection");
}

#[test]
fn intersection_shrinks_with_more_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for k in 0..20 {
        let sys = random_system(&mut rng, 2, 1);
        let ds = simulated(&mut rng, &sys, 0.3, 12 + k);
        let long = build(&ds);
        let short = build(&ds.prefix(ds.len() - 1).unwrap());
        for _ in 0..2000 {
            let z = probe(&long, &mut rng, 0.5);
            if long.member_i_stacked(&z).unwrap() >= 0.0 {
                checked += 1;
                assert!(short.member_i_stacked(&z).unwrap() >= 0.0);
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn true_system_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..30 {
        let sys = random_system(&mut rng, 1 + k % 3, 1 + k % 2);
        let cs = build(&simulated(&mut rng, &sys, 0.5, 5 + k));
        assert!(cs.member_c(&sys.a, &sys.b).unwrap() >= -1e-9);
        assert!(cs.member_i(&sys.a, &sys.b).unwrap() >= -1e-9);
    }
}

#[test]
fn walk_stays_inside_and_centres_on_the_example_diamond() {
    let cs = build(&example1_dataset::<f64>(2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let start = DMatrix::from_column_slice(2, 1, &[0.5, 0.5]);
    let points = cs.intersection_walk(&start, 100_000, &mut rng).unwrap();
    let mut mean = DMatrix::zeros(2, 1);
    for z in &points {
        assert!(cs.member_i_stacked(z).unwrap() >= -1e-12);
        mean += z;
    }
    mean /= points.len() as f64;
    assert!((mean[0] - 0.5).abs() < 0.02 && (mean[1] - 0.5).abs() < 0.02, "{mean}");
    let outside = DMatrix::from_column_slice(2, 1, &[3.0, 3.0]);
    assert!(matches!(cs.intersection_walk(&outside, 1, &mut rng), Err(noisyctl_core::Error::InvalidInput(_))));
}

#[test]
fn walk_from_the_true_system() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let sys = random_system(&mut rng, 3, 2);
    let cs = build(&simulated(&mut rng, &sys, 0.1, 80));
    let start = cs.stack(&sys.a, &sys.b).unwrap();
    let points = cs.intersection_walk(&start, 5_000, &mut rng).unwrap();
    assert!(points.iter().all(|z| cs.member_i_stacked(z).unwrap() >= -1e-9));
    assert!(points.iter().all(|z| cs.member_c_stacked(z).unwrap() >= -1e-9));
    assert!((points.last().unwrap() - &start).amax() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sample_slack_matches_its_quadric(seed in any::<u64>(), i in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, 2, 1, 6);
        let cs = build(&ds);
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
        let b = DMatrix::from_fn(2, 1, |_, _| rng.random_range(-2.0..2.0));
        let fast = cs.sample_slacks(&a, &b).unwrap()[i];
        let slow = cs.sample_ellipsoid(i);
        // per-sample quadrics are rank deficient, so evaluate the form directly
        let z = cs.stack(&a, &b).unwrap();
        let q = &cs.samples[i];
        let v = z.transpose() * &q.a * &z + z.transpose() * &q.b + q.b.transpose() * &z + &q.c;
        let lmax = v.symmetric_eigenvalues().max();
        prop_assert!((fast + lmax).abs() < 1e-9 * (1.0 + lmax.abs()));
        prop_assert!(slow.is_ok());
    }
}
