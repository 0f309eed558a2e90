/// A multi-index p = (p₁, …, p_n).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut e = vec![0; n];
        e[j] = 1;
        MultiIndex(e)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// p! = Π pⱼ!
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other − self`, assuming `self ≤ other`.
    pub fn gap_to(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| b - a).collect())
    }
}

pub(crate) fn factorial(e: u32) -> f64 {
    (1..=e).map(f64::from).product()
}

/// All multi-indices in n variables with |p| ≤ k, graded by order and
/// reverse-lexicographic within each order: for n = 2,
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), …
pub fn multi_indices(n: usize, k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for d in 0..=k {
        let mut cur = vec![0u32; n];
        fill(&mut cur, 0, d, &mut out);
    }
    out
}

fn fill(cur: &mut Vec<u32>, axis: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    let n = cur.len();
    if axis + 1 == n {
        cur[axis] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[axis] = e;
        fill(cur, axis + 1, remaining - e, out);
    }
    cur[axis] = 0;
}

/// Number of multi-indices with |p| ≤ k in n variables: C(n+k, k).
pub fn basis_size(n: usize, k: u32) -> usize {
    let mut c = 1usize;
    for i in 1..=k as usize {
        c = c * (n + i) / i;
    }
    c
}

/// Values tᵖ/p! for every index of `basis`, written to `out`.
pub(crate) fn scaled_monomials(t: &[f64], basis: &[MultiIndex], k: u32, out: &mut [f64]) {
    let n = t.len();
    let kk = k as usize + 1;
    // powers[a][e] = t_a^e / e!
    let mut powers = vec![0.0; n * kk];
    for a in 0..n {
        powers[a * kk] = 1.0;
        for e in 1..kk {
            powers[a * kk + e] = powers[a * kk + e - 1] * t[a] / e as f64;
        }
    }
    for (slot, p) in out.iter_mut().zip(basis) {
        let mut v = 1.0;
        for (a, &e) in p.0.iter().enumerate() {
            v *= powers[a * kk + e as usize];
        }
        *slot = v;
    }
}
