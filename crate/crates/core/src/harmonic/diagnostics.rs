use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fields::jacobian_at;
use crate::aq::{match_flat, QField, SampledQFunction};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::par;
use crate::qpoly::{best_fit, FitConfig, MultiIndex, QPolynomial, Region};
use crate::quadrature::{circle_nodes, Angular, PolarRule};

const RADIAL_PANELS: usize = 8;
const RADIAL_ORDER: usize = 8;
const ANGULAR_NODES: usize = 256;
const CIRCLE_NODES: usize = 1024;

fn require_plane(u: &dyn QField) -> Result<()> {
    if u.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "polar quadrature supports n = 2 only, got n = {}",
            u.dim()
        )));
    }
    Ok(())
}

pub(crate) fn disk_rule(center: &[f64], r: f64) -> PolarRule {
    PolarRule::new(
        [center[0], center[1]],
        r,
        RADIAL_PANELS,
        RADIAL_ORDER,
        Angular::FullCircle { nodes: ANGULAR_NODES },
    )
}

/// Half-disk `B_r(c) ∩ {x¹ > c¹}`.
pub(crate) fn half_disk_rule(center: &[f64], r: f64) -> PolarRule {
    PolarRule::new(
        [center[0], center[1]],
        r,
        RADIAL_PANELS,
        RADIAL_ORDER,
        Angular::Sector {
            from: -std::f64::consts::FRAC_PI_2,
            to: std::f64::consts::FRAC_PI_2,
            panels: 8,
            order: 16,
        },
    )
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Branch average `u_a = Q⁻¹ Σ uᵢ` at `x`.
pub fn average_at(u: &dyn QField, x: &[f64]) -> Vec<f64> {
    let (q, m) = (u.q(), u.m());
    let v = u.eval(x);
    let mut a = vec![0.0; m];
    for b in v.chunks_exact(m) {
        a.iter_mut().zip(b).for_each(|(s, x)| *s += x);
    }
    a.iter_mut().for_each(|s| *s /= q as f64);
    a
}

/// Symmetric part `u − u_a`, branchwise.
fn symmetric_values(v: &mut [f64], q: usize, m: usize) {
    let mut a = vec![0.0; m];
    for b in v.chunks_exact(m) {
        a.iter_mut().zip(b).for_each(|(s, x)| *s += x / q as f64);
    }
    for b in v.chunks_exact_mut(m) {
        b.iter_mut().zip(&a).for_each(|(x, s)| *x -= s);
    }
}

/// `(u_a, u_s)` on the same grid.
pub fn average_symmetric_split(u: &SampledQFunction) -> Result<(SampledQFunction, SampledQFunction)> {
    let (q, m) = (u.q(), u.m());
    let avg = u.map_values(1, m, |_, v| {
        let mut a = vec![0.0; m];
        for b in v.chunks_exact(m) {
            a.iter_mut().zip(b).for_each(|(s, x)| *s += x / q as f64);
        }
        a
    })?;
    let sym = u.map_values(q, m, |_, v| {
        let mut w = v.to_vec();
        symmetric_values(&mut w, q, m);
        w
    })?;
    Ok((avg, sym))
}

/// Sample indices where two branches agree in value and derivative up to
/// `tol`. Exact Jacobians are used when `u` has an exact source, otherwise
/// differences with grid neighbours after matching branches.
pub fn branch_set_detect(u: &SampledQFunction, tol: f64) -> Result<Vec<usize>> {
    let (q, m, n) = (u.q(), u.m(), u.n());
    if q == 1 {
        return Ok(Vec::new());
    }
    let grid = u.grid();
    let h = grid.resolution();
    let flags = par::map_range(u.len(), |i| {
        let x = grid.point(i);
        let mut values = vec![0.0; q * m];
        let mut jac = vec![0.0; q * m * n];
        let exact = u.jacobian_into(x, &mut values, &mut jac);
        if !exact {
            values.copy_from_slice(u.raw(i));
            if u.exact_source().is_some() {
                // Source without a derivative here: not C¹ at this point.
                return true;
            }
            for j in 0..n {
                let mut off = vec![0i64; n];
                off[j] = 1;
                let plus = grid.neighbor(i, &off);
                off[j] = -1;
                let minus = grid.neighbor(i, &off);
                let (a, b, span) = match (plus, minus) {
                    (Some(p), Some(mi)) => (u.raw(p), u.raw(mi), 2.0 * h),
                    (Some(p), None) => (u.raw(p), u.raw(i), h),
                    (None, Some(mi)) => (u.raw(i), u.raw(mi), h),
                    (None, None) => continue,
                };
                let (pa, _) = match_flat(&values, a, q, m);
                let (pb, _) = match_flat(&values, b, q, m);
                for s in 0..q {
                    for c in 0..m {
                        jac[(s * m + c) * n + j] = (a[pa[s] * m + c] - b[pb[s] * m + c]) / span;
                    }
                }
            }
        }
        let w = m * (n + 1);
        let mut stacked = vec![0.0; q * w];
        for s in 0..q {
            stacked[s * w..s * w + m].copy_from_slice(&values[s * m..(s + 1) * m]);
            stacked[s * w + m..(s + 1) * w].copy_from_slice(&jac[s * m * n..(s + 1) * m * n]);
        }
        crate::aq::min_gap(&stacked, q, w) < tol
    });
    Ok(flags.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRatio {
    pub sigma: f64,
    pub rho: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodDecayReport {
    pub exponent: f64,
    pub ratios: Vec<DecayRatio>,
    /// `u_s ≡ 0` on every ball: nothing to check.
    pub vacuous: bool,
    pub good: bool,
}

/// `σ^{-n}∫_{B_σ}|u_s|²` against `(σ/ρ)^{2(1+1/Q)} ρ^{-n}∫_{B_ρ}|u_s|²`,
/// reported as their ratio for each pair `0 < σ ≤ ρ`.
pub fn good_decay_check(
    u: &dyn QField,
    x0: &[f64],
    pairs: &[(f64, f64)],
    tol: f64,
) -> Result<GoodDecayReport> {
    require_plane(u)?;
    let (q, m) = (u.q(), u.m());
    let admissible: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(s, r)| s > 0.0 && s <= r)
        .collect();
    if admissible.is_empty() {
        return Err(Error::NoAdmissiblePairs);
    }
    let exponent = 2.0 * (1.0 + 1.0 / q as f64);
    let sym_mass = |r: f64| {
        disk_rule(x0, r).integrate(|x, y| {
            let mut v = u.eval(&[x, y]);
            symmetric_values(&mut v, q, m);
            norm2(&v)
        })
    };
    let n = 2.0;
    let mut ratios = Vec::with_capacity(admissible.len());
    let mut vacuous = true;
    for (sigma, rho) in admissible {
        let inner = sigma.powf(-n) * sym_mass(sigma);
        let outer = (sigma / rho).powf(exponent) * rho.powf(-n) * sym_mass(rho);
        let ratio = if outer == 0.0 {
            if inner == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            vacuous = false;
            inner / outer
        };
        ratios.push(DecayRatio { sigma, rho, ratio });
    }
    let good = ratios.iter().all(|r| r.ratio <= 1.0 + tol);
    Ok(GoodDecayReport {
        exponent,
        ratios,
        vacuous,
        good,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyRung {
    pub rho: f64,
    /// None when the boundary mass vanishes.
    pub value: Option<f64>,
}

/// `N(ρ) = ρ ∫_{B_ρ(x)} |Du|² / ∫_{∂B_ρ(x)} |u|²` in the plane.
pub fn frequency_function(u: &dyn QField, x: &[f64], radii: &[f64], h: f64) -> Result<Vec<FrequencyRung>> {
    require_plane(u)?;
    radii
        .iter()
        .map(|&rho| {
            let mut energy = 0.0;
            for &[a, b, w] in &disk_rule(x, rho).nodes {
                energy += w * norm2(&jacobian_at(u, &[a, b], h)?.1);
            }
            let boundary: f64 = circle_nodes([x[0], x[1]], rho, CIRCLE_NODES)
                .iter()
                .map(|&[a, b, w]| w * norm2(&u.eval(&[a, b])))
                .sum();
            let scale = energy.abs().max(1.0) * f64::EPSILON;
            let value = (boundary > scale).then(|| rho * energy / boundary);
            Ok(FrequencyRung { rho, value })
        })
        .collect()
}

/// `Σ_b |Dv_b·(x − z) − (v_b − shift)|²` at `x`; zero for fields that are
/// homogeneous of degree one about `z` after subtracting `shift`.
pub(crate) fn radial_defect(v: &dyn QField, z: &[f64], shift: &[f64], x: &[f64], h: f64) -> Result<f64> {
    let (q, m, n) = (v.q(), v.m(), v.dim());
    let (values, jac) = jacobian_at(v, x, h)?;
    let mut total = 0.0;
    for b in 0..q {
        for c in 0..m {
            let row = &jac[(b * m + c) * n..(b * m + c + 1) * n];
            let dr: f64 = row.iter().zip(x.iter().zip(z)).map(|(d, (a, b))| d * (a - b)).sum();
            total += (dr - (values[b * m + c] - shift[c])).powi(2);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Homogeneity {
    /// `(∫ Σ_b |∂_R(v_b/R)|²)^{1/2}` over the annulus.
    pub deviation: f64,
    /// Deviation divided by `(∫ |v|²/R⁴)^{1/2}`.
    pub relative: f64,
    pub excluded: usize,
}

/// Degree-one homogeneity defect of `v` about `center` on the annulus
/// `inner < R < outer` (only its `x¹ > center¹` half when `half_space`).
pub fn homogeneity_deviation(
    v: &dyn QField,
    center: &[f64],
    inner: f64,
    outer: f64,
    half_space: bool,
    h: f64,
) -> Result<Homogeneity> {
    require_plane(v)?;
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::InvalidParameter(format!("annulus ({inner}, {outer})")));
    }
    let angular = if half_space {
        Angular::Sector {
            from: -std::f64::consts::FRAC_PI_2,
            to: std::f64::consts::FRAC_PI_2,
            panels: 8,
            order: 16,
        }
    } else {
        Angular::FullCircle { nodes: ANGULAR_NODES }
    };
    let rule = PolarRule::annular([center[0], center[1]], inner, outer, RADIAL_PANELS, RADIAL_ORDER, angular);
    let zero = vec![0.0; v.m()];
    let mut dev = 0.0;
    let mut mass = 0.0;
    let mut excluded = 0;
    for &[a, b, w] in &rule.nodes {
        let x = [a, b];
        let r2 = crate::domain::dist2(&x, center);
        match radial_defect(v, center, &zero, &x, h) {
            Ok(d) => dev += w * d / (r2 * r2),
            Err(_) => excluded += 1,
        }
        mass += w * norm2(&v.eval(&x)) / (r2 * r2);
    }
    let deviation = dev.sqrt();
    let relative = if mass > 0.0 { deviation / mass.sqrt() } else { 0.0 };
    Ok(Homogeneity {
        deviation,
        relative,
        excluded,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Invariance {
    /// Sup of `G(v(x + t e), v(x))` per candidate direction.
    pub sups: Vec<f64>,
    /// Orthonormal basis of the span of the invariant directions.
    pub basis: Vec<Vec<f64>>,
    pub dimension: usize,
}

pub fn translation_invariance_set(
    v: &dyn QField,
    directions: &[Vec<f64>],
    points: &[Vec<f64>],
    shifts: &[f64],
    tol: f64,
) -> Result<Invariance> {
    let (q, m, n) = (v.q(), v.m(), v.dim());
    for d in directions {
        if d.len() != n {
            return Err(Error::dims(n, d.len()));
        }
    }
    let sups = par::map_slice(directions, |e| {
        let len = norm2(e).sqrt();
        let mut sup: f64 = 0.0;
        for x in points {
            let base = v.eval(x);
            for &t in shifts {
                let y: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + t * b / len).collect();
                sup = sup.max(match_flat(&base, &v.eval(&y), q, m).1.sqrt());
            }
        }
        sup
    });
    let chosen: Vec<&Vec<f64>> = directions.iter().zip(&sups).filter(|(_, s)| **s <= tol).map(|(d, _)| d).collect();
    let mut basis = Vec::new();
    if !chosen.is_empty() {
        let mat = DMatrix::from_fn(chosen.len(), n, |r, c| chosen[r][c] / norm2(chosen[r]).sqrt());
        let svd = mat.svd(false, true);
        let vt = svd.v_t.expect("requested");
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s > 1e-8 {
                basis.push(vt.row(k).iter().copied().collect());
            }
        }
    }
    Ok(Invariance {
        dimension: basis.len(),
        sups,
        basis,
    })
}

/// The coordinate directions `e₂, …, e_n` spanning `{x¹ = 0}`.
pub fn wall_directions(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Linearity {
    pub linear: bool,
    /// `(Σ w G(v, P)²)^{1/2} / ‖v‖_{L²}` for the best zero-constant linear P.
    pub relative_residual: f64,
    pub homogeneity: Homogeneity,
    /// `a_j` of `Σ_j ⟦a_j x¹⟧` when v is linear, scalar, vanishes on
    /// `{x¹ = 0}` and depends on x¹ only.
    pub slopes: Option<Vec<f64>>,
    pub poly: QPolynomial,
}

/// Classifies a degree-one homogeneous candidate on a ball or half-ball
/// centered at its homogeneity center.
pub fn linearity_classify(
    v: Arc<dyn QField>,
    domain: &Domain,
    h: f64,
    tol: f64,
    homogeneity_tol: f64,
) -> Result<Linearity> {
    let (center, radius, half) = match domain {
        Domain::Ball { center, radius } => (center.clone(), *radius, false),
        Domain::HalfBall { center, radius, axis: 0 } => (center.clone(), *radius, true),
        _ => {
            return Err(Error::InvalidParameter(
                "linearity classification needs a ball or an x¹-half-ball".into(),
            ))
        }
    };
    let homogeneity = homogeneity_deviation(v.as_ref(), &center, radius / 4.0, radius, half, h.min(1e-4))?;
    if homogeneity.relative > homogeneity_tol {
        return Err(Error::NotHomogeneous {
            deviation: homogeneity.relative,
            tol: homogeneity_tol,
        });
    }
    let grid = domain.sample(h)?;
    let u = SampledQFunction::from_field(grid, v.clone())?;
    let cfg = FitConfig {
        zero_constant: true,
        ..FitConfig::default()
    };
    let fit = best_fit(&u, &Region::new(&center, radius * (1.0 + 1e-9)), 1, 2.0, &cfg)?;
    let norm: f64 = (0..u.len()).map(|i| u.grid().weight(i) * norm2(u.raw(i))).sum();
    let relative_residual = if norm > 0.0 { (fit.residual / norm).sqrt() } else { 0.0 };
    let linear = relative_residual <= tol;
    let slopes = if linear && v.m() == 1 {
        x1_slopes(&fit.poly, v.as_ref(), &center, radius, tol)
    } else {
        None
    };
    Ok(Linearity {
        linear,
        relative_residual,
        homogeneity,
        slopes,
        poly: fit.poly,
    })
}

fn x1_slopes(p: &QPolynomial, v: &dyn QField, center: &[f64], radius: f64, tol: f64) -> Option<Vec<f64>> {
    let n = p.n();
    let scale: f64 = (0..n)
        .flat_map(|j| (0..p.q()).map(move |i| (i, j)))
        .map(|(i, j)| p.coeff(i, 0, &MultiIndex::unit(n, j)).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 1..n {
        for i in 0..p.q() {
            if p.coeff(i, 0, &MultiIndex::unit(n, j)).abs() > tol * scale {
                return None;
            }
        }
    }
    // Trace on the wall through the center.
    for t in [-0.75, -0.5, -0.25, 0.25, 0.5, 0.75] {
        let mut x = center.to_vec();
        x[0] = center[0];
        x[n.min(2) - 1] += t * radius;
        if norm2(&v.eval(&x)).sqrt() > tol * scale * radius {
            return None;
        }
    }
    Some((0..p.q()).map(|i| p.coeff(i, 0, &MultiIndex::unit(n, 0))).collect())
}

/// Largest five-point Laplacian `|Δ_h v_b(x)|` over branches, with each
/// neighbour value matched to the first-order prediction of its branch.
pub fn laplacian_defect(v: &dyn QField, x: &[f64], h: f64) -> Result<f64> {
    let (q, m, n) = (v.q(), v.m(), v.dim());
    let (values, jac) = jacobian_at(v, x, h / 4.0)?;
    let mut lap = vec![0.0; q * m];
    let mut y = x.to_vec();
    for j in 0..n {
        for sign in [1.0, -1.0] {
            y[j] = x[j] + sign * h;
            let nb = v.eval(&y);
            let predicted: Vec<f64> = (0..q * m)
                .map(|bc| values[bc] + sign * h * jac[bc * n + j])
                .collect();
            let (perm, _) = match_flat(&predicted, &nb, q, m);
            for b in 0..q {
                for c in 0..m {
                    lap[b * m + c] += nb[perm[b] * m + c] - values[b * m + c];
                }
            }
        }
        y[j] = x[j];
    }
    Ok(lap.iter().map(|l| (l / (h * h)).abs()).fold(0.0, f64::max))
}

/// Largest Laplacian defect over the cells at `x¹ = ±h/2` whose remaining
/// coordinate runs through `wall` (n = 2).
pub fn wall_laplacian_audit(v: &dyn QField, wall: &[f64], h: f64) -> Result<f64> {
    require_plane(v)?;
    let mut worst: f64 = 0.0;
    for &t in wall {
        for s in [0.5, -0.5] {
            worst = worst.max(laplacian_defect(v, &[s * h, t], h)?);
        }
    }
    Ok(worst)
}

/// `log₂` of successive defect ratios under halving of h.
pub fn observed_orders(defects: &[f64]) -> Vec<f64> {
    defects.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Share of `∫_Ω |v|²` lying outside `B_{1/2}` on the unit half-disk.
pub fn outer_mass_fraction(v: &dyn QField) -> Result<f64> {
    require_plane(v)?;
    let total = half_disk_rule(&[0.0, 0.0], 1.0).integrate(|a, b| norm2(&v.eval(&[a, b])));
    let inner = half_disk_rule(&[0.0, 0.0], 0.5).integrate(|a, b| norm2(&v.eval(&[a, b])));
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("field vanishes on the half-disk".into()));
    }
    Ok((total - inner) / total)
}
