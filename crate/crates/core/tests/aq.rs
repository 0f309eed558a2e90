use std::sync::Arc;

use proptest::prelude::*;
use qvalued::harmonic::{BranchPower, Components};
use qvalued::*;

fn point(q: usize, m: usize) -> impl Strategy<Value = AqPoint> {
    prop::collection::vec(-10.0f64..10.0, q * m).prop_map(move |d| AqPoint::new(q, m, d).unwrap())
}

fn triple() -> impl Strategy<Value = (AqPoint, AqPoint, AqPoint)> {
    (1usize..=6, 1usize..=3).prop_flat_map(|(q, m)| (point(q, m), point(q, m), point(q, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn assignment_agrees_with_enumeration((s, t, _) in triple()) {
        let a = metric_g(&s, &t).unwrap();
        let b = brute_force_metric(&s, &t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn metric_axioms((s, t, r) in triple()) {
        let st = metric_g(&s, &t).unwrap();
        prop_assert!((st - metric_g(&t, &s).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(metric_g(&s, &s).unwrap(), 0.0);
        prop_assert!(st <= metric_g(&s, &r).unwrap() + metric_g(&r, &t).unwrap() + 1e-12);
        if s != t {
            prop_assert!(st > 0.0);
        }
    }

    #[test]
    fn branch_order_is_irrelevant(d in prop::collection::vec(-5.0f64..5.0, 8), rot in 0usize..4) {
        let branches: Vec<Vec<f64>> = d.chunks(2).map(<[f64]>::to_vec).collect();
        let mut shuffled = branches.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 3);
        let a = AqPoint::from_branches(&branches).unwrap();
        let b = AqPoint::from_branches(&shuffled).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(metric_g(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn norm_splits_into_average_and_symmetric_parts(p in (1usize..=5, 1usize..=3).prop_flat_map(|(q, m)| point(q, m))) {
        let avg = p.average();
        let avg2: f64 = avg.iter().map(|a| a * a).sum();
        let lhs = p.norm().powi(2);
        let rhs = p.symmetric_part().norm().powi(2) + p.q() as f64 * avg2;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
    }
}

#[test]
fn single_branch_distance_is_euclidean() {
    let s = AqPoint::new(1, 2, vec![0.0, 0.0]).unwrap();
    let t = AqPoint::new(1, 2, vec![3.0, 4.0]).unwrap();
    assert_eq!(metric_g(&s, &t).unwrap(), 5.0);
}

#[test]
fn identity_matching_wins_for_nearby_pairs() {
    let s = AqPoint::new(2, 1, vec![0.0, 1.0]).unwrap();
    let t = AqPoint::new(2, 1, vec![0.4, 0.5]).unwrap();
    let d = metric_g(&s, &t).unwrap();
    assert!((d - 0.41f64.sqrt()).abs() <= 1e-15);
    assert!(d < 0.61f64.sqrt());
}

#[test]
fn three_valued_planar_instance_matches_enumeration() {
    let s = AqPoint::from_branches(&[vec![0.3, -1.2], vec![2.5, 0.7], vec![-0.4, 0.9]]).unwrap();
    let t = AqPoint::from_branches(&[vec![1.1, 0.2], vec![-2.0, 1.5], vec![0.6, -0.8]]).unwrap();
    // All six permutations written out.
    let sb: Vec<&[f64]> = s.branches().collect();
    let tb: Vec<&[f64]> = t.branches().collect();
    let d2 = |a: &[f64], b: &[f64]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = perms
        .iter()
        .map(|p| (0..3).map(|i| d2(sb[i], tb[p[i]])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    assert!((metric_g(&s, &t).unwrap() - best).abs() <= 1e-12);
}

#[test]
fn enumeration_refuses_large_q() {
    let s = AqPoint::zero(9, 1).unwrap();
    assert!(matches!(brute_force_metric(&s, &s), Err(Error::OracleLimit(_))));
}

#[test]
fn mismatched_shapes_are_rejected() {
    let s = AqPoint::zero(2, 1).unwrap();
    let t = AqPoint::zero(3, 1).unwrap();
    assert!(metric_g(&s, &t).is_err());
}

fn grid() -> QuadratureGrid {
    Domain::unit_ball(2).sample(1.0 / 16.0).unwrap()
}

fn symmetric_pair(a: f64) -> SampledQFunction {
    let g = grid();
    let vals = (0..g.len()).flat_map(|_| [-a, a]).collect();
    SampledQFunction::new(g, 2, 1, vals).unwrap()
}

#[test]
fn zero_translation_is_identity() {
    let g = symmetric_pair(0.7);
    let t = translate_add(|_| vec![0.0], &g).unwrap();
    assert_eq!(t.raw_values(), g.raw_values());
}

#[test]
fn constant_translation_moves_the_average() {
    let g = symmetric_pair(0.7);
    let t = translate_add(|_| vec![2.0], &g).unwrap();
    for i in 0..t.len() {
        let v = t.value(i);
        assert_eq!(v, AqPoint::new(2, 1, vec![1.3, 2.7]).unwrap());
        assert!((v.average()[0] - 2.0).abs() <= 1e-15);
    }
}

#[test]
fn linear_translation_of_polynomial_data_shifts_coefficients() {
    let mut p = QPolynomial::zero(2, 1, 2, 1, vec![0.0, 0.0]).unwrap();
    let e1 = MultiIndex::unit(2, 0);
    let e2 = MultiIndex::unit(2, 1);
    p.set_coeff(0, 0, &e1, 1.0).unwrap();
    p.set_coeff(1, 0, &e1, -1.0).unwrap();
    p.set_coeff(1, 0, &MultiIndex::zero(2), 0.5).unwrap();
    let g = grid();
    let vals = g.points().flat_map(|x| p.evaluate(x).unwrap().as_slice().to_vec()).collect();
    let u = SampledQFunction::new(g, 2, 1, vals).unwrap();
    let shifted = translate_add(|x| vec![3.0 * x[1] - 1.0], &u).unwrap();

    let mut q = p.clone();
    for i in 0..2 {
        let c0 = q.coeff(i, 0, &MultiIndex::zero(2));
        q.set_coeff(i, 0, &MultiIndex::zero(2), c0 - 1.0).unwrap();
        q.set_coeff(i, 0, &e2, 3.0).unwrap();
    }
    for i in 0..shifted.len() {
        let want = q.evaluate(shifted.grid().point(i)).unwrap();
        assert!(metric_g(&shifted.value(i), &want).unwrap() <= 1e-14);
    }
}

#[test]
fn ordering_sorts_each_sample_descending() {
    let g = Domain::cube(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap().sample(0.5).unwrap();
    let vals = (0..g.len()).flat_map(|_| [3.0, -1.0, 2.0]).collect();
    let u = SampledQFunction::new(g, 3, 1, vals).unwrap();
    let o = order_branches(&u).unwrap();
    for i in 0..o.len() {
        assert_eq!(o.raw(i), &[3.0, 2.0, -1.0]);
        assert_eq!(o.value(i), u.value(i));
    }
    assert_eq!(order_branches(&o).unwrap().raw_values(), o.raw_values());
    let ties = SampledQFunction::new(o.grid().clone(), 2, 1, vec![1.0; 2 * o.len()]).unwrap();
    assert_eq!(order_branches(&ties).unwrap().raw(0), &[1.0, 1.0]);
}

#[test]
fn ordering_needs_scalar_branches() {
    let g = grid();
    let u = SampledQFunction::new(g.clone(), 1, 2, vec![0.0; 2 * g.len()]).unwrap();
    assert!(order_branches(&u).is_err());
}

#[test]
fn derivative_of_linear_data_is_exact() {
    let f = ClosureField::new(2, 1, 1, |x: &[f64], o: &mut [f64]| o[0] = 2.0 * x[0] - 3.0 * x[1] + 1.0);
    let d = numeric_derivative(&f, &[0.3, -0.2], 1e-3, None).unwrap();
    assert!((d.as_slice()[0] - 2.0).abs() <= 1e-10);
    assert!((d.as_slice()[1] + 3.0).abs() <= 1e-10);
}

#[test]
fn derivative_of_opposite_linear_pair() {
    let f = ClosureField::new(2, 2, 1, |x: &[f64], o: &mut [f64]| {
        o[0] = x[0];
        o[1] = -x[0];
    });
    let d = numeric_derivative(&f, &[0.5, 0.25], 1e-3, None).unwrap();
    let want = AqPoint::from_branches(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
    assert!(metric_g(&d, &want).unwrap() <= 1e-10);
}

#[test]
fn derivative_of_real_three_halves_branches() {
    let f = BranchPower::new(2, 2, 3, Components::Re).unwrap();
    let d = numeric_derivative(&f, &[1.0, 0.0], 1e-4, None).unwrap();
    // At z = 1 the branches of z^{3/2} are ±1 with complex derivative ±3/2,
    // so the real part has gradient (±3/2, 0).
    let want = AqPoint::from_branches(&[vec![1.5, 0.0], vec![-1.5, 0.0]]).unwrap();
    assert!(metric_g(&d, &want).unwrap() <= 1e-6);
}

#[test]
fn derivative_at_a_branch_point_is_ambiguous() {
    let f = BranchPower::new(2, 2, 3, Components::Re).unwrap();
    let r = numeric_derivative(&f, &[0.0, 0.0], 1e-4, None);
    assert!(matches!(r, Err(Error::BranchAmbiguity { .. })));
}

#[test]
fn lebesgue_profile_of_constant_vanishes() {
    let u = symmetric_pair(0.4);
    let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &[0.5, 0.25, 0.2]).unwrap();
    assert!(p.values.iter().all(|&v| v == 0.0));
    assert!(!p.truncated);
}

#[test]
fn lebesgue_profile_respects_the_lipschitz_bound() {
    let g = Domain::unit_ball(2).sample(1.0 / 128.0).unwrap();
    let l = 3.0;
    let f = ClosureField::new(2, 1, 1, move |x: &[f64], o: &mut [f64]| o[0] = l * (x[0] * 0.6 + x[1] * 0.8).sin());
    let u = SampledQFunction::from_field(g, Arc::new(f)).unwrap();
    let radii = [0.5, 0.25, 0.125, 0.0625];
    let p = lebesgue_point_profile(&u, &[0.1, 0.1], 2.0, &radii).unwrap();
    for (r, v) in p.radii.iter().zip(&p.values) {
        assert!(*v <= 1.05 * l * l * r * r, "rho {r}: {v}");
    }
}

#[test]
fn lebesgue_profile_at_the_branch_point_has_slope_three() {
    let g = Domain::unit_ball(2).sample(1.0 / 256.0).unwrap();
    let u = SampledQFunction::from_field(g, Arc::new(BranchPower::three_halves(2))).unwrap();
    let radii = [0.5, 0.25, 0.125, 0.0625];
    let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &radii).unwrap();
    for w in p.values.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((slope - 3.0).abs() < 0.1, "{slope}");
    }
}

#[test]
fn lebesgue_profile_drops_rungs_below_resolution() {
    let u = symmetric_pair(0.4);
    let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &[0.5, 0.01]).unwrap();
    assert!(p.truncated);
    assert_eq!(p.radii, vec![0.5]);
}
