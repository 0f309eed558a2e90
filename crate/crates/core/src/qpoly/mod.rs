//! Q-valued polynomials: evaluation, recentering, rescaling, coefficient
//! metrics and the assignment-coupled best fit.

mod estimate;
mod fit;
mod multi_index;

use serde::{Deserialize, Serialize};

pub use estimate::{poly_estimate_constant, PolyEstimateConfig, PolyEstimateReport};
pub use fit::{best_fit, best_fit_with_starts, local_excess, FitConfig, FitResult, Region};
pub use multi_index::{basis_size, multi_indices, MultiIndex};

pub(crate) use multi_index::scaled_monomials;

use crate::aq::{lex_cmp, metric_g, AqPoint, QField};
use crate::error::{Error, Result};

/// `P = Σᵢ ⟦Pᵢ⟧` with `Pᵢʲ(x) = Σ_{|p|≤k} aᵢʲ_p/p! · (x − x0)^p`.
///
/// The stored coefficient `aᵢʲ_p` equals `D^p Pᵢʲ(x0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolynomial {
    n: usize,
    m: usize,
    q: usize,
    k: u32,
    center: Vec<f64>,
    basis: Vec<MultiIndex>,
    /// Index `(i·m + j)·D + p`, D = number of multi-indices.
    coeffs: Vec<f64>,
}

impl QPolynomial {
    pub fn zero(n: usize, m: usize, q: usize, k: u32, center: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 || q == 0 {
            return Err(Error::InvalidParameter(format!(
                "n, m, Q must be positive (n = {n}, m = {m}, Q = {q})"
            )));
        }
        if center.len() != n {
            return Err(Error::dims(n, center.len()));
        }
        let basis = multi_indices(n, k);
        let coeffs = vec![0.0; q * m * basis.len()];
        Ok(QPolynomial {
            n,
            m,
            q,
            k,
            center,
            basis,
            coeffs,
        })
    }

    /// Builds from the flat coefficient layout `(i·m + j)·D + p` with the
    /// multi-index order of [`multi_indices`].
    pub fn from_coeffs(
        n: usize,
        m: usize,
        q: usize,
        k: u32,
        center: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let mut p = Self::zero(n, m, q, k, center)?;
        if coeffs.len() != p.coeffs.len() {
            return Err(Error::dims(p.coeffs.len(), coeffs.len()));
        }
        p.coeffs = coeffs;
        Ok(p)
    }

    /// A polynomial whose every branch is constant.
    pub fn constant(n: usize, value: &AqPoint, center: Vec<f64>) -> Result<Self> {
        let mut p = Self::zero(n, value.m(), value.q(), 0, center)?;
        p.coeffs = value.as_slice().to_vec();
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn q(&self) -> usize {
        self.q
    }
    /// Declared degree bound k.
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn center(&self) -> &[f64] {
        &self.center
    }
    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn slot(&self, i: usize, j: usize, p: usize) -> usize {
        (i * self.m + j) * self.basis.len() + p
    }

    pub fn index_of(&self, p: &MultiIndex) -> Option<usize> {
        self.basis.iter().position(|b| b == p)
    }

    pub fn coeff(&self, i: usize, j: usize, p: &MultiIndex) -> f64 {
        self.index_of(p)
            .map_or(0.0, |idx| self.coeffs[self.slot(i, j, idx)])
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, p: &MultiIndex, a: f64) -> Result<()> {
        let idx = self
            .index_of(p)
            .ok_or_else(|| Error::InvalidParameter(format!("multi-index {:?} exceeds degree", p.0)))?;
        let s = self.slot(i, j, idx);
        self.coeffs[s] = a;
        Ok(())
    }

    /// Actual degree: the largest |p| with a nonzero coefficient (0 for the
    /// zero polynomial).
    pub fn degree(&self) -> u32 {
        let d = self.basis.len();
        (0..d)
            .filter(|&p| (0..self.q * self.m).any(|r| self.coeffs[r * d + p] != 0.0))
            .map(|p| self.basis[p].order())
            .max()
            .unwrap_or(0)
    }

    /// Branch values at `x`, in storage order.
    pub fn eval_flat(&self, x: &[f64], out: &mut [f64]) {
        let d = self.basis.len();
        let t: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut mono = vec![0.0; d];
        scaled_monomials(&t, &self.basis, self.k, &mut mono);
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = self.coeffs[r * d..(r + 1) * d]
                .iter()
                .zip(&mono)
                .map(|(a, v)| a * v)
                .sum();
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<AqPoint> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let mut out = vec![0.0; self.q * self.m];
        self.eval_flat(x, &mut out);
        AqPoint::new(self.q, self.m, out)
    }

    /// Same polynomial expressed around `x0`: `a'_p = Σ_{r ≥ p} a_r d^{r−p}/(r−p)!`
    /// with `d = x0 − center`.
    pub fn recenter(&self, x0: &[f64]) -> Result<QPolynomial> {
        if x0.len() != self.n {
            return Err(Error::dims(self.n, x0.len()));
        }
        let d: Vec<f64> = x0.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let nb = self.basis.len();
        let mut out = self.clone();
        out.center = x0.to_vec();
        for (pi, p) in self.basis.iter().enumerate() {
            // Shift weights for every r ≥ p.
            let weights: Vec<(usize, f64)> = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, r)| p.le(r))
                .map(|(ri, r)| {
                    let g = p.gap_to(r);
                    let w = g
                        .0
                        .iter()
                        .zip(&d)
                        .map(|(&e, dv)| dv.powi(e as i32))
                        .product::<f64>()
                        / g.factorial();
                    (ri, w)
                })
                .collect();
            for row in 0..self.q * self.m {
                out.coeffs[row * nb + pi] = weights
                    .iter()
                    .map(|&(ri, w)| self.coeffs[row * nb + ri] * w)
                    .sum();
            }
        }
        Ok(out)
    }

    /// `P̃(x) = P(x0 + ρx)`: coefficients `ρ^{|p|}·a_p` about `x0`, new
    /// center 0. The polynomial is recentered to `x0` first when needed.
    pub fn rescale(&self, x0: &[f64], rho: f64) -> Result<QPolynomial> {
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rescale factor {rho} must be positive")));
        }
        let mut out = if x0 == self.center.as_slice() {
            self.clone()
        } else {
            self.recenter(x0)?
        };
        let nb = self.basis.len();
        let scales: Vec<f64> = self.basis.iter().map(|p| rho.powi(p.order() as i32)).collect();
        for row in 0..self.q * self.m {
            for (p, s) in scales.iter().enumerate() {
                out.coeffs[row * nb + p] *= s;
            }
        }
        out.center = vec![0.0; self.n];
        Ok(out)
    }

    /// `∂P/∂x_j`, degree bound lowered by one (`a'_p = a_{p+e_j}`).
    pub fn partial(&self, j: usize) -> Result<QPolynomial> {
        if j >= self.n {
            return Err(Error::dims(format!("axis < {}", self.n), j));
        }
        let k = self.k.saturating_sub(1);
        let mut out = QPolynomial::zero(self.n, self.m, self.q, k, self.center.clone())?;
        if self.k == 0 {
            return Ok(out);
        }
        let e = MultiIndex::unit(self.n, j);
        let nb = out.basis.len();
        for (pi, p) in out.basis.clone().iter().enumerate() {
            let src = self.index_of(&p.plus(&e)).expect("p + e_j within degree");
            for row in 0..self.q * self.m {
                out.coeffs[row * nb + pi] = self.coeffs[row * self.basis.len() + src];
            }
        }
        Ok(out)
    }

    /// Same polynomial with a larger degree bound (or truncated to a smaller one).
    pub fn with_degree(&self, k: u32) -> QPolynomial {
        let mut out = QPolynomial::zero(self.n, self.m, self.q, k, self.center.clone())
            .expect("valid shape");
        let nb = out.basis.len();
        for (pi, p) in out.basis.clone().iter().enumerate() {
            if let Some(src) = self.index_of(p) {
                for row in 0..self.q * self.m {
                    out.coeffs[row * nb + pi] = self.coeffs[row * self.basis.len() + src];
                }
            }
        }
        out
    }

    /// Branch `i` as the vector `(aᵢʲ_p · ρ^{|p|})_{j, |p| ≤ r}`.
    fn branch_tuple(&self, i: usize, r: u32, rho: f64) -> Vec<f64> {
        let nb = self.basis.len();
        let mut v = Vec::new();
        for j in 0..self.m {
            for (pi, p) in self.basis.iter().enumerate() {
                if p.order() <= r {
                    v.push(self.coeffs[(i * self.m + j) * nb + pi] * rho.powi(p.order() as i32));
                }
            }
        }
        v
    }

    /// The coefficient tuple a_(r) scaled by `ρ^{|p|}`, as a point of
    /// A_Q(R^M) with M = m·#{|p| ≤ r}. All slots of a branch move together.
    pub fn coefficient_tuple(&self, r: u32, rho: f64) -> AqPoint {
        let data: Vec<f64> = (0..self.q).flat_map(|i| self.branch_tuple(i, r, rho)).collect();
        let width = data.len() / self.q;
        AqPoint::new(self.q, width, data).expect("valid tuple shape")
    }

    /// Sorts branches lexicographically by their coefficient vectors.
    pub fn canonicalize(&mut self) {
        let w = self.m * self.basis.len();
        let mut rows: Vec<Vec<f64>> = self.coeffs.chunks_exact(w).map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        self.coeffs = rows.concat();
    }

    pub fn to_json(&self) -> PolyJson {
        let nb = self.basis.len();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for i in 0..self.q {
            for j in 0..self.m {
                for (pi, p) in self.basis.iter().enumerate() {
                    coeffs.push(CoeffJson {
                        i,
                        j,
                        p: p.0.clone(),
                        a: self.coeffs[(i * self.m + j) * nb + pi],
                    });
                }
            }
        }
        PolyJson {
            n: self.n,
            m: self.m,
            q: self.q,
            k: self.k,
            center: self.center.clone(),
            coeffs,
        }
    }

    pub fn from_json(j: &PolyJson) -> Result<Self> {
        let mut p = QPolynomial::zero(j.n, j.m, j.q, j.k, j.center.clone())?;
        for c in &j.coeffs {
            if c.i >= j.q || c.j >= j.m || c.p.len() != j.n {
                return Err(Error::Parse(format!(
                    "coefficient entry (i = {}, j = {}, p = {:?}) out of range",
                    c.i, c.j, c.p
                )));
            }
            p.set_coeff(c.i, c.j, &MultiIndex(c.p.clone()), c.a)
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(p)
    }
}

impl QField for QPolynomial {
    fn dim(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.m
    }
    fn q(&self) -> usize {
        self.q
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.eval_flat(x, out)
    }
    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        self.eval_flat(x, values);
        let n = self.n;
        let mut buf = vec![0.0; self.q * self.m];
        for a in 0..n {
            self.partial(a).expect("axis in range").eval_flat(x, &mut buf);
            for (r, v) in buf.iter().enumerate() {
                jac[r * n + a] = *v;
            }
        }
        true
    }
}

/// JSON layout `{n, m, Q, k, center, coeffs: [{i, j, p, a}]}`; `i` and `j`
/// are 0-based branch and component indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub k: u32,
    pub center: Vec<f64>,
    pub coeffs: Vec<CoeffJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub i: usize,
    pub j: usize,
    pub p: Vec<u32>,
    pub a: f64,
}

/// G(a_ρ, b_ρ) between the order-r coefficient tuples of two polynomials
/// with a common center, using one joint permutation of all slots.
pub fn coefficient_metric(f: &QPolynomial, g: &QPolynomial, r: u32, rho: f64) -> Result<f64> {
    if f.n != g.n || f.m != g.m || f.q != g.q {
        return Err(Error::dims(
            format!("(n, m, Q) = ({}, {}, {})", f.n, f.m, f.q),
            format!("({}, {}, {})", g.n, g.m, g.q),
        ));
    }
    if f.center != g.center {
        return Err(Error::RecenterFirst);
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {rho}")));
    }
    let k = f.k.max(g.k);
    let (f, g) = (f.with_degree(k), g.with_degree(k));
    metric_g(&f.coefficient_tuple(r, rho), &g.coefficient_tuple(r, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aq::brute_force_metric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poly(rng: &mut ChaCha8Rng, n: usize, m: usize, q: usize, k: u32) -> QPolynomial {
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let d = basis_size(n, k);
        let coeffs = (0..q * m * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        QPolynomial::from_coeffs(n, m, q, k, center, coeffs).unwrap()
    }

    /// Independent evaluation: nested Horner in x then y for n = 2, m = 1.
    fn horner_2d(p: &QPolynomial, i: usize, x: &[f64]) -> f64 {
        let k = p.k() as i32;
        let (dx, dy) = (x[0] - p.center()[0], x[1] - p.center()[1]);
        let mut outer = 0.0;
        for b in (0..=k).rev() {
            let mut inner = 0.0;
            for a in (0..=(k - b)).rev() {
                let idx = MultiIndex(vec![a as u32, b as u32]);
                inner = inner * dx + p.coeff(i, 0, &idx) / idx.factorial();
            }
            outer = outer * dy + inner;
        }
        outer
    }

    #[test]
    fn constant_evaluates_everywhere() {
        let v = AqPoint::new(2, 1, vec![1.0, -3.0]).unwrap();
        let p = QPolynomial::constant(2, &v, vec![0.0, 0.0]).unwrap();
        assert_eq!(p.evaluate(&[5.0, -7.0]).unwrap(), v);
    }

    #[test]
    fn linear_pair_evaluation() {
        let mut p = QPolynomial::zero(2, 1, 2, 1, vec![0.0, 0.0]).unwrap();
        let e1 = MultiIndex::unit(2, 0);
        p.set_coeff(0, 0, &e1, 1.0).unwrap();
        p.set_coeff(1, 0, &e1, -1.0).unwrap();
        let v = p.evaluate(&[2.0, 0.0]).unwrap();
        assert_eq!(v, AqPoint::new(2, 1, vec![2.0, -2.0]).unwrap());
    }

    #[test]
    fn matches_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_poly(&mut rng, 2, 1, 2, 2);
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let mut out = [0.0; 2];
            p.eval_flat(&x, &mut out);
            for i in 0..2 {
                assert!((out[i] - horner_2d(&p, i, &x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn center_value_is_constant_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_poly(&mut rng, 2, 2, 3, 3);
        let v = p.evaluate(p.center()).unwrap();
        let consts: Vec<f64> = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| p.coeff(i, j, &MultiIndex::zero(2)))
            .collect();
        assert_eq!(v, AqPoint::new(3, 2, consts).unwrap());
    }

    #[test]
    fn rescale_identity_and_linear_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_poly(&mut rng, 2, 1, 2, 1);
        let same = p.rescale(p.center(), 1.0).unwrap();
        assert_eq!(same.coeffs(), p.coeffs());
        let doubled = p.rescale(p.center(), 2.0).unwrap();
        for (pi, b) in p.basis().iter().enumerate() {
            for row in 0..2 {
                let f = if b.order() == 1 { 2.0 } else { 1.0 };
                assert_eq!(doubled.coeffs()[row * 3 + pi], f * p.coeffs()[row * 3 + pi]);
            }
        }
    }

    #[test]
    fn rescale_evaluation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_poly(&mut rng, 2, 1, 2, 3);
        let x0 = [0.2, -0.1];
        let s = p.rescale(&x0, 0.7).unwrap();
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = s.evaluate(&x).unwrap();
            let b = p.evaluate(&[x0[0] + 0.7 * x[0], x0[1] + 0.7 * x[1]]).unwrap();
            assert!(metric_g(&a, &b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn rescale_rejects_nonpositive() {
        let p = QPolynomial::zero(2, 1, 1, 1, vec![0.0, 0.0]).unwrap();
        assert!(p.rescale(&[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn recenter_preserves_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_poly(&mut rng, 3, 2, 2, 3);
        let r = p.recenter(&[0.3, 0.4, -0.2]).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(metric_g(&p.evaluate(&x).unwrap(), &r.evaluate(&x).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn degree_ignores_zero_slots() {
        let mut p = QPolynomial::zero(2, 1, 2, 3, vec![0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), 0);
        p.set_coeff(1, 0, &MultiIndex(vec![1, 1]), 1.0).unwrap();
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn coefficient_metric_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_poly(&mut rng, 2, 1, 2, 2);
        assert_eq!(coefficient_metric(&f, &f, 2, 0.5).unwrap(), 0.0);
        let g = f.recenter(&[0.9, 0.9]).unwrap();
        assert!(matches!(coefficient_metric(&f, &g, 2, 0.5), Err(Error::RecenterFirst)));
    }

    #[test]
    fn coefficient_metric_single_branch_is_euclidean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_poly(&mut rng, 2, 1, 1, 2);
        let mut g = f.clone();
        g.coeffs.iter_mut().for_each(|c| *c += 0.1);
        let rho: f64 = 0.5;
        let direct: f64 = f
            .basis()
            .iter()
            .map(|p| (0.1 * rho.powi(p.order() as i32)).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((coefficient_metric(&f, &g, 2, rho).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn joint_matching_exceeds_slotwise_matching() {
        // (constant, slope) pairs: F = {(0, 0), (1, 1)}, G = {(0, 1), (1, 0)}.
        // Matched slot by slot both multisets agree, jointly they do not.
        let e1 = MultiIndex::unit(2, 0);
        let z = MultiIndex::zero(2);
        let mut f = QPolynomial::zero(2, 1, 2, 1, vec![0.0, 0.0]).unwrap();
        f.set_coeff(1, 0, &z, 1.0).unwrap();
        f.set_coeff(1, 0, &e1, 1.0).unwrap();
        let mut g = QPolynomial::zero(2, 1, 2, 1, vec![0.0, 0.0]).unwrap();
        g.set_coeff(0, 0, &e1, 1.0).unwrap();
        g.set_coeff(1, 0, &z, 1.0).unwrap();

        let constants = |p: &QPolynomial| {
            AqPoint::new(2, 1, vec![p.coeff(0, 0, &z), p.coeff(1, 0, &z)]).unwrap()
        };
        let slopes = |p: &QPolynomial| {
            AqPoint::new(2, 1, vec![p.coeff(0, 0, &e1), p.coeff(1, 0, &e1)]).unwrap()
        };
        let slotwise = metric_g(&constants(&f), &constants(&g)).unwrap().hypot(
            metric_g(&slopes(&f), &slopes(&g)).unwrap(),
        );
        assert_eq!(slotwise, 0.0);

        let joint = coefficient_metric(&f, &g, 1, 1.0).unwrap();
        let oracle = brute_force_metric(&f.coefficient_tuple(1, 1.0), &g.coefficient_tuple(1, 1.0)).unwrap();
        assert!((joint - oracle).abs() < 1e-15);
        assert!((joint - 2f64.sqrt()).abs() < 1e-15);
        assert!(joint > slotwise);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_poly(&mut rng, 2, 2, 3, 2);
        let s = serde_json::to_string(&p.to_json()).unwrap();
        let back = QPolynomial::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, p);
        assert!(s.contains("\"Q\":3"));
    }

    #[test]
    fn partial_derivative_coefficients() {
        let mut p = QPolynomial::zero(2, 1, 1, 2, vec![0.0, 0.0]).unwrap();
        // P = x² y-free: a_(2,0) = 2 ⇒ P = x².
        p.set_coeff(0, 0, &MultiIndex(vec![2, 0]), 2.0).unwrap();
        let dx = p.partial(0).unwrap();
        let v = dx.evaluate(&[0.75, 0.0]).unwrap();
        assert!((v.branch(0)[0] - 1.5).abs() < 1e-15);
    }
}
