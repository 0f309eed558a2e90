//! Empirical constant for the coefficient comparison estimate
//! `G(a_(r), b_(r))^q ≤ C · min{1,ρ}^{−n−rq} ∫_E G(F, G)^q`
//! over polynomials F, G and sets E ⊂ B_ρ of measure at least A·ρ^n.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{basis_size, coefficient_metric, scaled_monomials, QPolynomial};
use crate::aq::match_flat;
use crate::domain::{Domain, QuadratureGrid};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolyEstimateConfig {
    pub n: usize,
    pub m: usize,
    /// Number of branches Q.
    pub q: usize,
    pub k: u32,
    /// Integrability exponent.
    pub q_exp: f64,
    /// Lower bound on |E| / ρ^n.
    pub a: f64,
    /// Coefficient order compared (r ≤ k).
    pub r: u32,
    pub rho: f64,
    /// Grid spacing relative to ρ.
    pub resolution: f64,
    pub instances: usize,
    /// Local maximization rounds per instance (0 reports the raw random
    /// ratio). Only used for q = 2.
    pub refine_rounds: usize,
    pub seed: u64,
}

impl Default for PolyEstimateConfig {
    fn default() -> Self {
        PolyEstimateConfig {
            n: 2,
            m: 1,
            q: 2,
            k: 2,
            q_exp: 2.0,
            a: 0.2,
            r: 2,
            rho: 1.0,
            resolution: 1.0 / 48.0,
            instances: 1000,
            refine_rounds: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolyEstimateReport {
    /// Largest observed ratio.
    pub sup: f64,
    /// Running supremum after each instance.
    pub running_sup: Vec<f64>,
    pub argmax: usize,
    /// Instances with a vanishing denominator (F = G on E), skipped.
    pub degenerate: usize,
}

impl PolyEstimateReport {
    /// Relative growth of the supremum between the first `count` instances
    /// and all of them.
    pub fn relative_change_from(&self, count: usize) -> f64 {
        let early = self.running_sup[count.min(self.running_sup.len()) - 1];
        (self.sup - early) / early
    }
}

/// The set E: grid points nearest to `c`, taken until their weight
/// reaches A·ρ^n.
fn set_e(cfg: &PolyEstimateConfig, grid: &QuadratureGrid, c: &[f64]) -> Vec<usize> {
    let n = cfg.n;
    let target = cfg.a * cfg.rho.powi(n as i32);
    let mut radius = (target / crate::domain::unit_ball_volume(n)).powf(1.0 / n as f64);
    let mut cand = grid.ball_indices(c, radius);
    while cand.iter().map(|&i| grid.weight(i)).sum::<f64>() < target && radius < 4.0 * cfg.rho {
        radius *= 1.25;
        cand = grid.ball_indices(c, radius);
    }
    let mut order: Vec<(f64, usize)> = cand
        .into_iter()
        .map(|i| {
            let d2: f64 = grid.point(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut weight = 0.0;
    let mut out = Vec::new();
    for (_, i) in order {
        if weight >= target {
            break;
        }
        weight += grid.weight(i);
        out.push(i);
    }
    out
}

/// Ratio for fixed polynomials on a fixed set.
fn ratio(cfg: &PolyEstimateConfig, grid: &QuadratureGrid, f: &QPolynomial, g: &QPolynomial, e: &[usize]) -> Option<f64> {
    let (n, m, q) = (cfg.n, cfg.m, cfg.q);
    let mut fv = vec![0.0; q * m];
    let mut gv = vec![0.0; q * m];
    let mut integral = 0.0;
    for &i in e {
        let x = grid.point(i);
        f.eval_flat(x, &mut fv);
        g.eval_flat(x, &mut gv);
        let d2 = match_flat(&fv, &gv, q, m).1;
        integral += grid.weight(i) * d2.powf(0.5 * cfg.q_exp);
    }
    if !(integral > 1e-300) {
        return None;
    }
    let lhs = coefficient_metric(f, g, cfg.r, cfg.rho).expect("same center").powf(cfg.q_exp);
    let scale = cfg.rho.min(1.0).powf(-(n as f64) - cfg.r as f64 * cfg.q_exp);
    Some(lhs / (scale * integral))
}

/// For q = 2 and matchings frozen at their values for (F, G), the ratio is
/// a quotient of quadratic forms in the stacked coefficients z = (F, G).
/// Returns the maximizing (F, G) on the range of the denominator form.
fn eigen_step(
    cfg: &PolyEstimateConfig,
    grid: &QuadratureGrid,
    f: &QPolynomial,
    g: &QPolynomial,
    e: &[usize],
) -> Option<(QPolynomial, QPolynomial)> {
    let (n, m, q, k) = (cfg.n, cfg.m, cfg.q, cfg.k);
    let basis = f.basis().to_vec();
    let d = basis.len();
    let half = q * m * d;
    let dim = 2 * half;
    let fi = |i: usize, j: usize, p: usize| (i * m + j) * d + p;
    let gi = |i: usize, j: usize, p: usize| half + (i * m + j) * d + p;

    // Denominator: Σ_s w_s Σ_{i,j} (F_ij(x_s) − G_{σ_s(i) j}(x_s))².
    let mut den = DMatrix::<f64>::zeros(dim, dim);
    let mut phi = vec![0.0; d];
    let mut fv = vec![0.0; q * m];
    let mut gv = vec![0.0; q * m];
    let mut row = vec![0.0; dim];
    for &s in e {
        let x = grid.point(s);
        scaled_monomials(x, &basis, k, &mut phi);
        f.eval_flat(x, &mut fv);
        g.eval_flat(x, &mut gv);
        let (sigma, _) = match_flat(&fv, &gv, q, m);
        let w = grid.weight(s);
        for i in 0..q {
            for j in 0..m {
                row.iter_mut().for_each(|v| *v = 0.0);
                for p in 0..d {
                    row[fi(i, j, p)] = phi[p];
                    row[gi(sigma[i], j, p)] = -phi[p];
                }
                den.ger(w, &DVector::from_column_slice(&row), &DVector::from_column_slice(&row), 1.0);
            }
        }
    }
    // Numerator: Σ_{i,j,|p|≤r} ρ^{2|p|} (a_ijp − b_{τ(i)jp})².
    let tau = crate::aq::optimal_matching(&f.coefficient_tuple(cfg.r, cfg.rho), &g.coefficient_tuple(cfg.r, cfg.rho)).ok()?;
    let mut num = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..q {
        for j in 0..m {
            for (p, mi) in basis.iter().enumerate() {
                if mi.order() > cfg.r {
                    continue;
                }
                let s2 = cfg.rho.powi(2 * mi.order() as i32);
                let (a, b) = (fi(i, j, p), gi(tau[i], j, p));
                num[(a, a)] += s2;
                num[(b, b)] += s2;
                num[(a, b)] -= s2;
                num[(b, a)] -= s2;
            }
        }
    }
    let eig = SymmetricEigen::new(den);
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return None;
    }
    let keep: Vec<usize> = (0..dim).filter(|&c| eig.eigenvalues[c] > 1e-10 * top).collect();
    let w = DMatrix::from_fn(dim, keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    });
    let reduced = w.transpose() * num * &w;
    let red = SymmetricEigen::new(reduced);
    let z = w * red.eigenvectors.column(red.eigenvalues.imax());
    let center = vec![0.0; n];
    let fnew = QPolynomial::from_coeffs(n, m, q, k, center.clone(), z.rows(0, half).iter().copied().collect()).ok()?;
    let gnew = QPolynomial::from_coeffs(n, m, q, k, center, z.rows(half, half).iter().copied().collect()).ok()?;
    Some((fnew, gnew))
}

fn random_point_in_ball(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-rho..rho)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() < rho * rho {
            return x;
        }
    }
}

/// Alternates eigen-steps and matching updates on a fixed set.
fn refine_on_set(
    cfg: &PolyEstimateConfig,
    grid: &QuadratureGrid,
    mut f: QPolynomial,
    mut g: QPolynomial,
    e: &[usize],
) -> (f64, QPolynomial, QPolynomial) {
    let mut best = ratio(cfg, grid, &f, &g, e).unwrap_or(0.0);
    for _ in 0..cfg.refine_rounds {
        let Some((f2, g2)) = eigen_step(cfg, grid, &f, &g, e) else { break };
        match ratio(cfg, grid, &f2, &g2, e) {
            Some(r) if r > best * (1.0 + 1e-9) => {
                best = r;
                f = f2;
                g = g2;
            }
            _ => break,
        }
    }
    (best, f, g)
}

/// One instance: random F, G and set center; for q = 2 the ratio is then
/// pushed to a nearby local maximum over (F, G) and the set center.
fn instance(cfg: &PolyEstimateConfig, grid: &QuadratureGrid, index: usize) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (index as u64 + 1).wrapping_mul(0xA076_1D64_78BD_642F));
    let (n, m, q, k) = (cfg.n, cfg.m, cfg.q, cfg.k);
    let rho = cfg.rho;
    let d = basis_size(n, k);
    let center = vec![0.0; n];
    // Coefficients drawn at unit scale, then expressed at scale ρ.
    let scales: Vec<f64> = super::multi_indices(n, k)
        .iter()
        .map(|p| rho.powi(-(p.order() as i32)))
        .collect();
    let mut draw = || -> QPolynomial {
        let c: Vec<f64> = (0..q * m * d).map(|i| rng.gen_range(-1.0..1.0) * scales[i % d]).collect();
        QPolynomial::from_coeffs(n, m, q, k, center.clone(), c).expect("shape")
    };
    let f = draw();
    let g = draw();
    let mut c = random_point_in_ball(&mut rng, n, rho);
    let e = set_e(cfg, grid, &c);
    if cfg.q_exp != 2.0 || cfg.refine_rounds == 0 {
        return ratio(cfg, grid, &f, &g, &e);
    }
    let (mut best, mut f, mut g) = refine_on_set(cfg, grid, f, g, &e);
    if best == 0.0 {
        return None;
    }
    let mut step = 0.1 * rho;
    for _ in 0..cfg.refine_rounds {
        let moved: Vec<f64> = c.iter().map(|v| v + step * rng.gen_range(-1.0..1.0)).collect();
        if moved.iter().map(|v| v * v).sum::<f64>() >= rho * rho {
            step *= 0.5;
            continue;
        }
        let e2 = set_e(cfg, grid, &moved);
        let (r, f2, g2) = refine_on_set(cfg, grid, f.clone(), g.clone(), &e2);
        if r > best {
            best = r;
            f = f2;
            g = g2;
            c = moved;
        } else {
            step *= 0.5;
        }
    }
    Some(best)
}

/// Samples random (F, G, E) instances and reports the supremum of
/// `G(a_(r), b_(r))^q / (min{1,ρ}^{−n−rq} ∫_E G(F, G)^q)`.
///
/// Instance `i` depends only on `(seed, i)`, so a run with more instances
/// extends a shorter one.
pub fn poly_estimate_constant(cfg: &PolyEstimateConfig) -> Result<PolyEstimateReport> {
    if cfg.instances == 0 {
        return Err(Error::InvalidParameter("instances must be positive".into()));
    }
    if cfg.r > cfg.k {
        return Err(Error::InvalidParameter(format!("order r = {} exceeds k = {}", cfg.r, cfg.k)));
    }
    if !(cfg.a > 0.0 && cfg.a < crate::domain::unit_ball_volume(cfg.n)) {
        return Err(Error::InvalidParameter(format!("A = {} out of range", cfg.a)));
    }
    let grid = Domain::Ball {
        center: vec![0.0; cfg.n],
        radius: cfg.rho,
    }
    .sample(cfg.resolution * cfg.rho)?;
    let ratios = par::map_range(cfg.instances, |i| instance(cfg, &grid, i));
    let mut sup = 0.0f64;
    let mut argmax = 0;
    let mut degenerate = 0;
    let mut running_sup = Vec::with_capacity(ratios.len());
    for (i, r) in ratios.iter().enumerate() {
        match r {
            Some(v) if *v > sup => {
                sup = *v;
                argmax = i;
            }
            Some(_) => {}
            None => degenerate += 1,
        }
        running_sup.push(sup);
    }
    Ok(PolyEstimateReport {
        sup,
        running_sup,
        argmax,
        degenerate,
    })
}
