//! Minimum-cost perfect assignment on square cost matrices.
//!
//! Shortest augmenting path Hungarian method with row/column potentials,
//! O(n^3). Costs are row-major `n x n`.

/// An optimal assignment: row `i` is matched to column `perm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// Solves the assignment problem. Ties are resolved by the solver's scan
/// order, which is deterministic for a given matrix.
pub fn hungarian(cost: &[f64], n: usize) -> Assignment {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Assignment {
            perm: Vec::new(),
            cost: 0.0,
        };
    }
    if n == 1 {
        return Assignment {
            perm: vec![0],
            cost: cost[0],
        };
    }

    // 1-based bookkeeping; index 0 is the virtual source column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let total = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Assignment { perm, cost: total }
}

/// Optimal assignment with ties broken toward the lexicographically smallest
/// permutation. Costs within `1e-12` (relative) of the optimum count as ties.
pub fn lex_min_assignment(cost: &[f64], n: usize) -> Assignment {
    let best = hungarian(cost, n);
    if n <= 1 {
        return best;
    }
    let tol = 1e-12 * (1.0 + best.cost.abs());
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut prefix_cost = 0.0;

    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        for col in 0..n {
            if used[col] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..n).filter(|&c| !used[c] && c != col).collect();
            let k = rest_rows.len();
            let mut sub = Vec::with_capacity(k * k);
            for &r in &rest_rows {
                for &c in &rest_cols {
                    sub.push(cost[r * n + c]);
                }
            }
            let tail = hungarian(&sub, k).cost;
            if prefix_cost + cost[row * n + col] + tail <= best.cost + tol {
                fixed.push(col);
                used[col] = true;
                prefix_cost += cost[row * n + col];
                break;
            }
        }
        if fixed.len() != row + 1 {
            // Rounding pushed every candidate over the tolerance.
            return best;
        }
    }
    let total = fixed
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Assignment {
        perm: fixed,
        cost: total,
    }
}

/// Visits every permutation of `0..n` in lexicographic order.
pub(crate) fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        f(&perm);
        // next_permutation
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return;
        };
        let j = (i..n).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
        let mut best = (f64::INFINITY, Vec::new());
        for_each_permutation(n, |p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            if c < best.0 {
                best = (c, p.to_vec());
            }
        });
        best
    }

    #[test]
    fn classic_three_by_three() {
        let cost = [8.0, 4.0, 7.0, 5.0, 2.0, 3.0, 9.0, 4.0, 8.0];
        let a = hungarian(&cost, 3);
        assert_eq!(a.cost, 15.0);
    }

    #[test]
    fn matches_enumeration_on_pseudorandom_matrices() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in 1..=6 {
            for _ in 0..50 {
                let cost: Vec<f64> = (0..n * n).map(|_| next()).collect();
                let a = hungarian(&cost, n);
                let (b, _) = brute(&cost, n);
                assert!((a.cost - b).abs() < 1e-12, "n={n}: {} vs {}", a.cost, b);
            }
        }
    }

    #[test]
    fn lex_tie_break_prefers_identity() {
        // Every permutation costs the same.
        let cost = vec![1.0; 16];
        let a = lex_min_assignment(&cost, 4);
        assert_eq!(a.perm, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lex_tie_break_among_two_optima() {
        // Optima: (1,0,2) and (2,0,1)... only the lexicographically first is returned.
        let cost = [
            5.0, 0.0, 0.0, //
            0.0, 5.0, 5.0, //
            5.0, 0.0, 0.0,
        ];
        let a = lex_min_assignment(&cost, 3);
        assert_eq!(a.perm, vec![1, 0, 2]);
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn permutation_count() {
        let mut count = 0;
        for_each_permutation(5, |_| count += 1);
        assert_eq!(count, 120);
    }
}
