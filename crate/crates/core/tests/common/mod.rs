#![allow(dead_code)]

use std::sync::Arc;

use qvalued::{ClosureField, Domain, QField, QPolynomial, SampledQFunction};
use rand::Rng;

/// Polynomial in the plane with coefficients uniform in [-1, 1].
pub fn random_poly(rng: &mut impl Rng, q: usize, k: u32) -> QPolynomial {
    let mut p = QPolynomial::zero(2, 1, q, k, vec![0.0, 0.0]).unwrap();
    let basis = p.basis().to_vec();
    for i in 0..q {
        for b in &basis {
            p.set_coeff(i, 0, b, rng.gen_range(-1.0..1.0)).unwrap();
        }
    }
    p
}

/// Exact samples of `p` on the unit disk.
pub fn sample_poly(p: &QPolynomial, h: f64) -> SampledQFunction {
    let grid = Domain::unit_ball(2).sample(h).unwrap();
    let vals = grid.points().flat_map(|x| p.evaluate(x).unwrap().as_slice().to_vec()).collect();
    SampledQFunction::new(grid, p.q(), p.m(), vals).unwrap()
}

pub fn sample_scalar(h: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> SampledQFunction {
    let grid = Domain::unit_ball(2).sample(h).unwrap();
    let field = ClosureField::new(2, 1, 1, move |x: &[f64], o: &mut [f64]| o[0] = f(x));
    SampledQFunction::from_field(grid, Arc::new(field)).unwrap()
}

pub fn sample_field(h: f64, f: Arc<dyn QField>) -> SampledQFunction {
    SampledQFunction::from_field(Domain::unit_ball(2).sample(h).unwrap(), f).unwrap()
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(q - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, q - 1);
            out.push(p);
        }
    }
    out
}

/// Largest coefficient difference under the best branch relabelling.
pub fn coeff_gap_up_to_permutation(a: &QPolynomial, b: &QPolynomial) -> f64 {
    assert_eq!((a.q(), a.m(), a.n()), (b.q(), b.m(), b.n()));
    let w = a.m() * a.basis().len();
    let b = b.with_degree(a.k());
    let ra: Vec<&[f64]> = a.coeffs().chunks_exact(w).collect();
    let rb: Vec<&[f64]> = b.coeffs().chunks_exact(w).collect();
    permutations(a.q())
        .iter()
        .map(|p| {
            (0..a.q())
                .flat_map(|i| ra[i].iter().zip(rb[p[i]]).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}
