//! Assignment-coupled least-squares fitting of Q-valued polynomials.
//!
//! The objective `Σ_s w_s G(u(x_s), P(x_s))^q` is minimized by alternating
//! between per-sample optimal branch assignments and a shared weighted
//! regression for all branches. Several deterministic and random starts are
//! tried and the best local optimum is kept.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{multi_indices, scaled_monomials, MultiIndex, QPolynomial};
use crate::aq::{lex_cmp, match_flat, min_gap, SampledQFunction};
use crate::error::{Error, Result};
use crate::par;

const CHUNK: usize = 4096;

/// Closed ball `B_radius(center)` intersected with the sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Region {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Region {
            center: center.to_vec(),
            radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Random multi-starts in addition to the deterministic ones.
    pub restarts: usize,
    /// Stop when the relative objective change drops below this.
    pub fit_tol: f64,
    pub max_iter: usize,
    /// Floor on `G` in the reweighting for exponents other than 2.
    pub delta_irls: f64,
    pub seed: u64,
    /// Constrain every branch to vanish at the region center.
    pub zero_constant: bool,
    /// Also start from a fit grown outward from the best-separated sample.
    pub region_growing: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 8,
            fit_tol: 1e-12,
            max_iter: 200,
            delta_irls: 1e-9,
            seed: 0,
            zero_constant: false,
            region_growing: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best polynomial, centered at the region center, branches in
    /// lexicographic coefficient order.
    pub poly: QPolynomial,
    /// `Σ_s w_s G(u(x_s), P(x_s))^q` over the region samples.
    pub residual: f64,
    /// False when the winning start hit `max_iter` before settling.
    pub converged: bool,
    pub iterations: usize,
    pub starts: usize,
    pub samples: usize,
}

/// Fitting problem on a set of samples, in the frame `t = (x − c)/s`.
struct Engine {
    q: usize,
    m: usize,
    n: usize,
    k: u32,
    /// Indices into the full basis that are free parameters.
    active: Vec<usize>,
    full_basis: Vec<MultiIndex>,
    frame_center: Vec<f64>,
    frame_scale: f64,
    len: usize,
    phi: Vec<f64>,
    w: Vec<f64>,
    vals: Vec<f64>,
    q_exp: f64,
    delta: f64,
    /// Normal matrix cached for q = 2, where it does not depend on the
    /// assignment.
    fixed_normal: Option<DMatrix<f64>>,
}

struct RunOutcome {
    coeffs: Vec<f64>,
    objective: f64,
    converged: bool,
    iterations: usize,
}

impl Engine {
    #[allow(clippy::too_many_arguments)]
    fn new(
        u: &SampledQFunction,
        idx: &[usize],
        k: u32,
        q_exp: f64,
        delta: f64,
        zero_constant: bool,
        frame_center: &[f64],
        frame_scale: f64,
    ) -> Self {
        let n = u.n();
        let (q, m) = (u.q(), u.m());
        let full_basis = multi_indices(n, k);
        let active: Vec<usize> = (0..full_basis.len())
            .filter(|&p| !(zero_constant && full_basis[p].order() == 0))
            .collect();
        let grid = u.grid();
        let rows = par::map_slice(idx, |&s| {
            let x = grid.point(s);
            let t: Vec<f64> = x
                .iter()
                .zip(frame_center)
                .map(|(a, c)| (a - c) / frame_scale)
                .collect();
            let mut all = vec![0.0; full_basis.len()];
            scaled_monomials(&t, &full_basis, k, &mut all);
            active.iter().map(|&p| all[p]).collect::<Vec<f64>>()
        });
        let phi = rows.concat();
        let w: Vec<f64> = idx.iter().map(|&s| grid.weight(s)).collect();
        let mut vals = Vec::with_capacity(idx.len() * q * m);
        for &s in idx {
            vals.extend_from_slice(u.raw(s));
        }
        let mut e = Engine {
            q,
            m,
            n,
            k,
            active,
            full_basis,
            frame_center: frame_center.to_vec(),
            frame_scale,
            len: idx.len(),
            phi,
            w,
            vals,
            q_exp,
            delta,
            fixed_normal: None,
        };
        if q_exp == 2.0 {
            let ones = vec![1.0; e.len];
            e.fixed_normal = Some(e.normal_matrix(&ones));
        }
        e
    }

    fn da(&self) -> usize {
        self.active.len()
    }

    fn rows(&self) -> usize {
        self.q * self.m
    }

    fn chunks(&self) -> usize {
        self.len.div_ceil(CHUNK)
    }

    fn eval_sample(&self, s: usize, c: &[f64], out: &mut [f64]) {
        let da = self.da();
        let phi = &self.phi[s * da..(s + 1) * da];
        for (r, o) in out.iter_mut().enumerate() {
            *o = c[r * da..(r + 1) * da].iter().zip(phi).map(|(a, b)| a * b).sum();
        }
    }

    fn sample_vals(&self, s: usize) -> &[f64] {
        let w = self.rows();
        &self.vals[s * w..(s + 1) * w]
    }

    fn cost(&self, d2: f64) -> f64 {
        if self.q_exp == 2.0 {
            d2
        } else {
            d2.powf(0.5 * self.q_exp)
        }
    }

    /// Step A: optimal assignment per sample. Returns the permutations
    /// (polynomial branch i ↔ data branch perm[i]), squared distances and
    /// the objective.
    fn assign(&self, c: &[f64]) -> (Vec<u8>, Vec<f64>, f64) {
        let (q, m) = (self.q, self.m);
        let parts = par::map_range(self.chunks(), |ch| {
            let lo = ch * CHUNK;
            let hi = (lo + CHUNK).min(self.len);
            let mut perms = Vec::with_capacity((hi - lo) * q);
            let mut d2s = Vec::with_capacity(hi - lo);
            let mut obj = 0.0;
            let mut pv = vec![0.0; q * m];
            for s in lo..hi {
                self.eval_sample(s, c, &mut pv);
                let (perm, d2) = match_flat(&pv, self.sample_vals(s), q, m);
                perms.extend(perm.iter().map(|&p| p as u8));
                d2s.push(d2);
                obj += self.w[s] * self.cost(d2);
            }
            (perms, d2s, obj)
        });
        let mut perms = Vec::with_capacity(self.len * q);
        let mut d2 = Vec::with_capacity(self.len);
        let mut obj = 0.0;
        for (p, d, o) in parts {
            perms.extend(p);
            d2.extend(d);
            obj += o;
        }
        (perms, d2, obj)
    }

    /// Reweighting factor `max(G_s, δ)^{q−2}` (1 for q = 2 or no residuals yet).
    fn irls(&self, s: usize, d2: Option<&[f64]>) -> f64 {
        match d2 {
            Some(d2) if self.q_exp != 2.0 => d2[s].sqrt().max(self.delta).powf(self.q_exp - 2.0),
            _ => 1.0,
        }
    }

    fn normal_matrix(&self, scale: &[f64]) -> DMatrix<f64> {
        let da = self.da();
        let parts = par::map_range(self.chunks(), |ch| {
            let lo = ch * CHUNK;
            let hi = (lo + CHUNK).min(self.len);
            let mut mm = vec![0.0; da * da];
            for s in lo..hi {
                let om = self.w[s] * scale[s];
                let phi = &self.phi[s * da..(s + 1) * da];
                for a in 0..da {
                    let pa = om * phi[a];
                    for b in a..da {
                        mm[a * da + b] += pa * phi[b];
                    }
                }
            }
            mm
        });
        let mut mm = vec![0.0; da * da];
        for p in parts {
            for (a, b) in mm.iter_mut().zip(p) {
                *a += b;
            }
        }
        DMatrix::from_fn(da, da, |a, b| if a <= b { mm[a * da + b] } else { mm[b * da + a] })
    }

    /// Step B: weighted regression of every branch on its assigned data.
    fn solve(&self, perms: &[u8], d2: Option<&[f64]>) -> Vec<f64> {
        let (q, m, da) = (self.q, self.m, self.da());
        let rows = self.rows();
        let parts = par::map_range(self.chunks(), |ch| {
            let lo = ch * CHUNK;
            let hi = (lo + CHUNK).min(self.len);
            let mut rhs = vec![0.0; da * rows];
            for s in lo..hi {
                let om = self.w[s] * self.irls(s, d2);
                let phi = &self.phi[s * da..(s + 1) * da];
                let v = self.sample_vals(s);
                for i in 0..q {
                    let src = perms[s * q + i] as usize;
                    for j in 0..m {
                        let y = om * v[src * m + j];
                        let r = i * m + j;
                        for a in 0..da {
                            rhs[a * rows + r] += y * phi[a];
                        }
                    }
                }
            }
            rhs
        });
        let mut rhs = vec![0.0; da * rows];
        for p in parts {
            for (a, b) in rhs.iter_mut().zip(p) {
                *a += b;
            }
        }
        let normal = match (&self.fixed_normal, d2) {
            (Some(n), _) => n.clone(),
            (None, _) => {
                let scale: Vec<f64> = (0..self.len).map(|s| self.irls(s, d2)).collect();
                self.normal_matrix(&scale)
            }
        };
        let b = DMatrix::from_row_slice(da, rows, &rhs);
        let x = solve_spd(normal, b);
        // Back to row-major (row r, basis a).
        let mut c = vec![0.0; rows * da];
        for r in 0..rows {
            for a in 0..da {
                c[r * da + a] = x[(a, r)];
            }
        }
        c
    }

    fn run(&self, c: Vec<f64>, max_iter: usize, tol: f64, floor: f64) -> RunOutcome {
        let (mut perms, mut d2, mut obj) = self.assign(&c);
        let mut best = (c, obj);
        let mut converged = obj <= floor;
        let mut iterations = 0;
        while !converged && iterations < max_iter {
            iterations += 1;
            let next = self.solve(&perms, Some(&d2));
            let (p2, d2n, obj2) = self.assign(&next);
            if obj2 < best.1 {
                best = (next, obj2);
            }
            let unchanged = p2 == perms;
            let change = (obj - obj2).abs();
            perms = p2;
            d2 = d2n;
            if obj2 <= floor
                || change <= tol * obj.max(f64::MIN_POSITIVE)
                || (unchanged && self.q_exp == 2.0)
            {
                converged = true;
            }
            obj = obj2;
        }
        RunOutcome {
            coeffs: best.0,
            objective: best.1,
            converged,
            iterations,
        }
    }

    fn run_from_perms(&self, perms: &[u8], max_iter: usize, tol: f64, floor: f64) -> RunOutcome {
        let c = self.solve(perms, None);
        self.run(c, max_iter, tol, floor)
    }

    /// Frame coefficients → polynomial centered at the frame center.
    fn to_poly(&self, c: &[f64]) -> QPolynomial {
        let nb = self.full_basis.len();
        let da = self.da();
        let mut full = vec![0.0; self.rows() * nb];
        for r in 0..self.rows() {
            for (a, &p) in self.active.iter().enumerate() {
                full[r * nb + p] =
                    c[r * da + a] / self.frame_scale.powi(self.full_basis[p].order() as i32);
            }
        }
        QPolynomial::from_coeffs(self.n, self.m, self.q, self.k, self.frame_center.clone(), full)
            .expect("consistent shape")
    }

    /// Polynomial → frame coefficients (constant slots dropped if inactive).
    fn from_poly(&self, p: &QPolynomial) -> Result<Vec<f64>> {
        let p = p.with_degree(self.k);
        let local = p.rescale(&self.frame_center, self.frame_scale)?;
        let nb = self.full_basis.len();
        let da = self.da();
        let mut c = vec![0.0; self.rows() * da];
        for r in 0..self.rows() {
            for (a, &pi) in self.active.iter().enumerate() {
                c[r * da + a] = local.coeffs()[r * nb + pi];
            }
        }
        Ok(c)
    }

    /// Data scale `Σ w |u|^q`, used for the exact-fit floor.
    fn data_scale(&self) -> f64 {
        par::sum_range(self.len, |s| {
            let v = self.sample_vals(s);
            self.w[s] * self.cost(v.iter().map(|x| x * x).sum())
        })
    }

    /// Branches sorted per sample: ascending values for m = 1, otherwise
    /// by projection on the principal direction of the symmetric parts.
    fn ordered_perms(&self) -> Vec<u8> {
        let (q, m) = (self.q, self.m);
        let dir: Vec<f64> = if m == 1 {
            vec![1.0]
        } else {
            let mut cov = DMatrix::<f64>::zeros(m, m);
            for s in 0..self.len {
                let v = self.sample_vals(s);
                let avg: Vec<f64> = (0..m).map(|j| (0..q).map(|i| v[i * m + j]).sum::<f64>() / q as f64).collect();
                for i in 0..q {
                    for a in 0..m {
                        for b in 0..m {
                            cov[(a, b)] += self.w[s] * (v[i * m + a] - avg[a]) * (v[i * m + b] - avg[b]);
                        }
                    }
                }
            }
            let eig = SymmetricEigen::new(cov);
            let top = eig.eigenvalues.imax();
            eig.eigenvectors.column(top).iter().copied().collect()
        };
        let mut perms = Vec::with_capacity(self.len * q);
        for s in 0..self.len {
            let v = self.sample_vals(s);
            let key = |i: usize| (0..m).map(|j| v[i * m + j] * dir[j]).sum::<f64>();
            let mut order: Vec<usize> = (0..q).collect();
            order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
            perms.extend(order.iter().map(|&o| o as u8));
        }
        perms
    }

    fn random_perms(&self, rng: &mut ChaCha8Rng) -> Vec<u8> {
        let mut perms = Vec::with_capacity(self.len * self.q);
        let mut order: Vec<u8> = (0..self.q as u8).collect();
        for _ in 0..self.len {
            order.shuffle(rng);
            perms.extend_from_slice(&order);
        }
        perms
    }
}

/// Solves `M X = B` for symmetric positive semidefinite `M`; Cholesky first,
/// SVD pseudo-inverse when the factorization fails.
fn solve_spd(m: DMatrix<f64>, b: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = m.clone().cholesky() {
        let x = ch.solve(&b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let svd = m.svd(true, true);
    let eps = 1e-14 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(&b, eps).expect("SVD with both factors")
}

/// Grows a fit from the sample whose branches are best separated: fit a
/// small ball around it with branches labelled by proximity to the seed
/// values, then repeatedly enlarge the ball by 1.5 and refit, each time
/// assigning by proximity to the previous fit.
#[allow(clippy::too_many_arguments)]
fn growth_start(
    u: &SampledQFunction,
    idx: &[usize],
    k: u32,
    q_exp: f64,
    cfg: &FitConfig,
    region: &Engine,
    floor: f64,
) -> Option<Vec<f64>> {
    let (q, m) = (u.q(), u.m());
    let grid = u.grid();
    let da = region.da();
    let stride = (idx.len() / 4096).max(1);
    let seed = idx
        .iter()
        .step_by(stride)
        .copied()
        .max_by(|&a, &b| min_gap(u.raw(a), q, m).total_cmp(&min_gap(u.raw(b), q, m)))?;
    let x_seed = grid.point(seed).to_vec();
    let seed_vals = u.raw(seed).to_vec();

    let mut by_dist: Vec<(f64, usize)> = idx
        .iter()
        .map(|&s| {
            let d: f64 = grid
                .point(s)
                .iter()
                .zip(&x_seed)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d.sqrt(), s)
        })
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let first = (2 * da).max(da + 4).min(by_dist.len());
    let max_dist = by_dist.last()?.0;
    let mut r = by_dist[first - 1].0.max(f64::MIN_POSITIVE);

    let mut poly: Option<QPolynomial> = None;
    loop {
        let count = by_dist.partition_point(|&(d, _)| d <= r);
        let mut sub: Vec<usize> = by_dist[..count].iter().map(|&(_, s)| s).collect();
        sub.sort_unstable();
        let eng = Engine::new(u, &sub, k, q_exp, cfg.delta_irls, false, &x_seed, r);
        let start = match &poly {
            None => {
                let perms: Vec<u8> = sub
                    .iter()
                    .flat_map(|&s| match_flat(&seed_vals, u.raw(s), q, m).0)
                    .map(|p| p as u8)
                    .collect();
                eng.solve(&perms, None)
            }
            Some(p) => eng.from_poly(p).ok()?,
        };
        let out = eng.run(start, 25, cfg.fit_tol, floor);
        poly = Some(eng.to_poly(&out.coeffs));
        if r >= max_dist {
            break;
        }
        r = (r * 1.5).min(max_dist);
    }
    region.from_poly(poly.as_ref()?).ok()
}

/// Best Q-valued polynomial of degree ≤ k on the region, with its residual.
pub fn best_fit(
    u: &SampledQFunction,
    region: &Region,
    k: u32,
    q_exp: f64,
    cfg: &FitConfig,
) -> Result<FitResult> {
    best_fit_with_starts(u, region, k, q_exp, cfg, &[])
}

/// [`best_fit`] with extra starting polynomials; the result is never worse
/// than the residual of any supplied start.
pub fn best_fit_with_starts(
    u: &SampledQFunction,
    region: &Region,
    k: u32,
    q_exp: f64,
    cfg: &FitConfig,
    starts: &[QPolynomial],
) -> Result<FitResult> {
    let n = u.n();
    if region.center.len() != n {
        return Err(Error::dims(n, region.center.len()));
    }
    if !(q_exp >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent {q_exp} < 1")));
    }
    if !(region.radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {}", region.radius)));
    }
    if u.q() > u8::MAX as usize {
        return Err(Error::InvalidParameter(format!("Q = {} too large", u.q())));
    }
    for s in starts {
        if s.n() != n || s.m() != u.m() || s.q() != u.q() {
            return Err(Error::dims(
                format!("(n, m, Q) = ({n}, {}, {})", u.m(), u.q()),
                format!("({}, {}, {})", s.n(), s.m(), s.q()),
            ));
        }
    }
    let idx = u.grid().ball_indices(&region.center, region.radius);
    let eng = Engine::new(
        u,
        &idx,
        k,
        q_exp,
        cfg.delta_irls,
        cfg.zero_constant,
        &region.center,
        region.radius,
    );
    let needed = eng.da().max(1);
    if idx.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            found: idx.len(),
        });
    }
    let floor = 1e-28 * eng.data_scale().max(f64::MIN_POSITIVE);
    let (max_iter, tol) = (cfg.max_iter, cfg.fit_tol);

    let mut outcomes: Vec<RunOutcome> = Vec::new();
    outcomes.push(eng.run_from_perms(&eng.ordered_perms(), max_iter, tol, floor));

    // With one branch the assignment is trivial and the problem is convex.
    let multi = u.q() > 1;
    if multi && cfg.region_growing && !cfg.zero_constant {
        if let Some(c) = growth_start(u, &idx, k, q_exp, cfg, &eng, floor) {
            outcomes.push(eng.run(c, max_iter, tol, floor));
        }
    }
    for s in starts {
        outcomes.push(eng.run(eng.from_poly(s)?, max_iter, tol, floor));
    }
    let exact = outcomes.iter().any(|o| o.objective <= floor);
    if multi && !exact && cfg.restarts > 0 {
        let random = par::map_range(cfg.restarts, |r| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed ^ (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let perms = eng.random_perms(&mut rng);
            eng.run_from_perms(&perms, max_iter, tol, floor)
        });
        outcomes.extend(random);
    }

    let starts_used = outcomes.len();
    let mut candidates: Vec<(RunOutcome, QPolynomial)> = outcomes
        .into_iter()
        .map(|o| {
            let mut p = eng.to_poly(&o.coeffs);
            p.canonicalize();
            (o, p)
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.0.objective
            .total_cmp(&b.0.objective)
            .then_with(|| lex_cmp(a.1.coeffs(), b.1.coeffs()))
    });
    let (best, poly) = candidates.swap_remove(0);
    if !best.converged {
        log::warn!(
            "best_fit: no convergence within {max_iter} iterations (residual {:e})",
            best.objective
        );
    }
    Ok(FitResult {
        poly,
        residual: best.objective,
        converged: best.converged,
        iterations: best.iterations,
        starts: starts_used,
        samples: idx.len(),
    })
}

/// Discrete `inf_{P ∈ P_k} ∫_{Ω ∩ B_ρ(x0)} G(u, P)^q`.
pub fn local_excess(
    u: &SampledQFunction,
    center: &[f64],
    radius: f64,
    k: u32,
    q_exp: f64,
    cfg: &FitConfig,
) -> Result<f64> {
    Ok(best_fit(u, &Region::new(center, radius), k, q_exp, cfg)?.residual)
}
