use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::{for_each_permutation, lex_min_assignment};
use crate::error::{Error, Result};

/// An unordered Q-tuple of vectors in R^m.
///
/// Branches are stored in lexicographic order so that equal multisets have
/// identical storage; the order carries no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AqPoint {
    q: usize,
    m: usize,
    data: Vec<f64>,
}

impl AqPoint {
    /// Builds a point from `q` branches of length `m`, laid out branch after
    /// branch in `data`.
    pub fn new(q: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "Q and m must be positive (Q = {q}, m = {m})"
            )));
        }
        if data.len() != q * m {
            return Err(Error::dims(q * m, data.len()));
        }
        let mut p = AqPoint { q, m, data };
        p.canonicalize();
        Ok(p)
    }

    pub fn from_branches(branches: &[Vec<f64>]) -> Result<Self> {
        let q = branches.len();
        let m = branches.first().map_or(0, Vec::len);
        if branches.iter().any(|b| b.len() != m) {
            return Err(Error::InvalidParameter("branches of unequal length".into()));
        }
        Self::new(q, m, branches.concat())
    }

    /// Q copies of a single vector.
    pub fn repeated(q: usize, value: &[f64]) -> Result<Self> {
        Self::new(q, value.len(), value.repeat(q))
    }

    /// Q⟦0⟧.
    pub fn zero(q: usize, m: usize) -> Result<Self> {
        Self::new(q, m, vec![0.0; q * m])
    }

    fn canonicalize(&mut self) {
        let m = self.m;
        let mut rows: Vec<&[f64]> = self.data.chunks_exact(m).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        self.data = rows.concat();
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn branch(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn branches(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// |T| = G(T, Q⟦0⟧), the Euclidean norm of all branch entries.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Average Q⁻¹ Σ Tᵢ.
    pub fn average(&self) -> Vec<f64> {
        let mut avg = vec![0.0; self.m];
        for b in self.branches() {
            for (a, v) in avg.iter_mut().zip(b) {
                *a += v;
            }
        }
        avg.iter_mut().for_each(|a| *a /= self.q as f64);
        avg
    }

    /// Symmetric part Σ ⟦Tᵢ − T_a⟧.
    pub fn symmetric_part(&self) -> AqPoint {
        let avg = self.average();
        let data = self
            .branches()
            .flat_map(|b| b.iter().zip(&avg).map(|(v, a)| v - a))
            .collect();
        AqPoint::new(self.q, self.m, data).expect("same shape")
    }

    /// Branchwise translation Σ ⟦Tᵢ + v⟧.
    pub fn translate(&self, v: &[f64]) -> Result<AqPoint> {
        if v.len() != self.m {
            return Err(Error::dims(self.m, v.len()));
        }
        let data = self
            .branches()
            .flat_map(|b| b.iter().zip(v).map(|(x, y)| x + y))
            .collect();
        AqPoint::new(self.q, self.m, data)
    }

    /// Smallest distance between two distinct branch slots (infinite for Q = 1).
    pub fn min_branch_gap(&self) -> f64 {
        min_gap(&self.data, self.q, self.m)
    }

    fn check_shape(&self, other: &AqPoint) -> Result<()> {
        if self.q != other.q || self.m != other.m {
            return Err(Error::dims(
                format!("(Q, m) = ({}, {})", self.q, self.m),
                format!("({}, {})", other.q, other.m),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for AqPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.branches().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if self.m == 1 {
                write!(f, "{}", b[0])?;
            } else {
                write!(f, "{b:?}")?;
            }
        }
        write!(f, "}}")
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn min_gap(data: &[f64], q: usize, m: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..q {
        for j in i + 1..q {
            let d: f64 = (0..m)
                .map(|c| (data[i * m + c] - data[j * m + c]).powi(2))
                .sum();
            gap = gap.min(d.sqrt());
        }
    }
    gap
}

/// Squared-distance cost matrix between the branches of two flat tuples.
pub(crate) fn cost_matrix(s: &[f64], t: &[f64], q: usize, m: usize, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(q * q);
    for i in 0..q {
        for j in 0..q {
            let mut c = 0.0;
            for k in 0..m {
                let d = s[i * m + k] - t[j * m + k];
                c += d * d;
            }
            out.push(c);
        }
    }
}

/// Optimal matching of branch `i` of `s` to branch `perm[i]` of `t`, with
/// ties going to the lexicographically smallest permutation. Returns the
/// permutation and the squared distance.
pub(crate) fn match_flat(s: &[f64], t: &[f64], q: usize, m: usize) -> (Vec<usize>, f64) {
    match q {
        1 => {
            let c = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            (vec![0], c)
        }
        2 => {
            let mut cost = Vec::new();
            cost_matrix(s, t, 2, m, &mut cost);
            let id = cost[0] + cost[3];
            let sw = cost[1] + cost[2];
            if sw < id {
                (vec![1, 0], sw)
            } else {
                (vec![0, 1], id)
            }
        }
        _ => {
            let mut cost = Vec::new();
            cost_matrix(s, t, q, m, &mut cost);
            if q <= 4 {
                // Lexicographic enumeration; the first strict minimum is the
                // lexicographically smallest optimum.
                let mut best = (Vec::new(), f64::INFINITY);
                for_each_permutation(q, |p| {
                    let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * q + j]).sum();
                    if c < best.1 {
                        best = (p.to_vec(), c);
                    }
                });
                best
            } else {
                let a = lex_min_assignment(&cost, q);
                (a.perm, a.cost)
            }
        }
    }
}

/// The metric G(s, t): minimum over permutations of the ℓ² distance between
/// matched branches, solved exactly as an assignment problem.
pub fn metric_g(s: &AqPoint, t: &AqPoint) -> Result<f64> {
    s.check_shape(t)?;
    Ok(match_flat(&s.data, &t.data, s.q, s.m).1.sqrt())
}

/// Optimal matching: branch `i` of `s` pairs with branch `perm[i]` of `t`.
pub fn optimal_matching(s: &AqPoint, t: &AqPoint) -> Result<Vec<usize>> {
    s.check_shape(t)?;
    Ok(match_flat(&s.data, &t.data, s.q, s.m).0)
}

/// G by exhaustive enumeration of all Q! permutations (Q ≤ 8).
pub fn brute_force_metric(s: &AqPoint, t: &AqPoint) -> Result<f64> {
    s.check_shape(t)?;
    if s.q > 8 {
        return Err(Error::OracleLimit(s.q));
    }
    let (q, m) = (s.q, s.m);
    let mut best = f64::INFINITY;
    for_each_permutation(q, |p| {
        let c: f64 = (0..q)
            .map(|i| {
                (0..m)
                    .map(|k| (s.data[i * m + k] - t.data[p[i] * m + k]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        best = best.min(c);
    });
    Ok(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(q: usize, m: usize, v: &[f64]) -> AqPoint {
        AqPoint::new(q, m, v.to_vec()).unwrap()
    }

    #[test]
    fn single_branch_is_euclidean() {
        let s = pt(1, 2, &[0.0, 0.0]);
        let t = pt(1, 2, &[3.0, 4.0]);
        assert_eq!(metric_g(&s, &t).unwrap(), 5.0);
    }

    #[test]
    fn identity_distance_is_zero() {
        let t = pt(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 3.0]);
        assert_eq!(metric_g(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn two_valued_identity_matching_wins() {
        let s = pt(2, 1, &[0.0, 1.0]);
        let t = pt(2, 1, &[0.4, 0.5]);
        // Oracle: both matchings written out by hand.
        let identity = (0.4f64 * 0.4 + 0.5 * 0.5).sqrt();
        let swap = (0.5f64 * 0.5 + 0.6 * 0.6).sqrt();
        assert!(identity < swap);
        assert!((metric_g(&s, &t).unwrap() - identity).abs() < 1e-15);
        assert!((identity - 0.41f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brute_force_agrees_on_a_three_valued_instance() {
        let s = pt(3, 2, &[0.3, -1.2, 2.0, 0.1, -0.7, 0.9]);
        let t = pt(3, 2, &[1.9, 0.2, 0.0, 0.0, -1.0, -1.0]);
        let a = metric_g(&s, &t).unwrap();
        let b = brute_force_metric(&s, &t).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn oracle_limit() {
        let s = AqPoint::zero(9, 1).unwrap();
        assert!(matches!(brute_force_metric(&s, &s), Err(Error::OracleLimit(9))));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = AqPoint::zero(2, 1).unwrap();
        let t = AqPoint::zero(3, 1).unwrap();
        assert!(metric_g(&s, &t).is_err());
        assert!(AqPoint::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn storage_is_canonical() {
        let a = pt(3, 1, &[3.0, -1.0, 2.0]);
        let b = pt(3, 1, &[2.0, 3.0, -1.0]);
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[-1.0, 2.0, 3.0]);
    }

    #[test]
    fn norm_is_distance_to_zero() {
        let t = pt(2, 2, &[1.0, 2.0, -2.0, 0.5]);
        let z = AqPoint::zero(2, 2).unwrap();
        assert!((t.norm() - metric_g(&t, &z).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn norm_decomposition() {
        let w = pt(3, 2, &[1.0, 2.0, -2.0, 0.5, 0.25, 4.0]);
        let avg = w.average();
        let lhs = w.norm().powi(2);
        let rhs = w.symmetric_part().norm().powi(2)
            + 3.0 * avg.iter().map(|a| a * a).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn five_valued_uses_assignment_solver() {
        let s = pt(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let t = pt(5, 1, &[4.1, 3.1, 2.1, 1.1, 0.1]);
        assert!((metric_g(&s, &t).unwrap() - (5.0f64 * 0.01).sqrt()).abs() < 1e-12);
    }
}
