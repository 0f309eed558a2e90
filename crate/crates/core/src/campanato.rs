//! Campanato seminorms, dyadic excess profiles, coefficient flow along a
//! dyadic ladder and empirical Hölder exponents.

use serde::{Deserialize, Serialize};

use crate::aq::{match_flat, metric_g, AqPoint, SampledQFunction};
use crate::error::{Error, Result};
use crate::par;
use crate::qpoly::{best_fit, FitConfig, MultiIndex, QPolynomial, Region};

/// Radii `ρ_j = ρ0·2^{-j}` for `j = 0..depth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub rho0: f64,
    pub depth: usize,
}

impl Ladder {
    pub fn new(rho0: f64, depth: usize) -> Self {
        Ladder { rho0, depth }
    }

    /// Ladder starting at `min{1, diam}`.
    pub fn capped(diameter: f64, depth: usize) -> Self {
        Ladder::new(diameter.min(1.0), depth)
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.depth).map(|j| self.rho0 * 0.5f64.powi(j as i32)).collect()
    }

    /// Rungs at least four grid cells wide.
    pub fn usable(&self, h: f64) -> Vec<f64> {
        self.radii().into_iter().filter(|&r| r >= 4.0 * h).collect()
    }
}

/// Excess of the best fit on each rung around one center.
#[derive(Debug, Clone)]
pub struct ExcessProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub excess: Vec<f64>,
    /// `Σ w |u|^q` on each rung; the scale against which an excess counts
    /// as numerically zero.
    pub scale: Vec<f64>,
    pub fits: Vec<QPolynomial>,
}

impl ExcessProfile {
    /// `(ρ, excess)` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,excess\n");
        for (r, e) in self.radii.iter().zip(&self.excess) {
            s.push_str(&format!("{r},{e}\n"));
        }
        s
    }
}

pub fn excess_profile(
    u: &SampledQFunction,
    x0: &[f64],
    k: u32,
    q_exp: f64,
    ladder: &Ladder,
    cfg: &FitConfig,
) -> Result<ExcessProfile> {
    let radii = ladder.usable(u.grid().resolution());
    let rows = par::map_slice(&radii, |&r| -> Result<(f64, f64, QPolynomial)> {
        let fit = best_fit(u, &Region::new(x0, r), k, q_exp, cfg)?;
        let idx = u.grid().ball_indices(x0, r);
        let scale: f64 = idx
            .iter()
            .map(|&i| {
                let n2: f64 = u.raw(i).iter().map(|v| v * v).sum();
                u.grid().weight(i) * n2.powf(0.5 * q_exp)
            })
            .sum();
        Ok((fit.residual, scale, fit.poly))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut excess = Vec::with_capacity(rows.len());
    let mut scale = Vec::with_capacity(rows.len());
    let mut fits = Vec::with_capacity(rows.len());
    for (e, s, p) in rows {
        excess.push(e);
        scale.push(s);
        fits.push(p);
    }
    Ok(ExcessProfile {
        center: x0.to_vec(),
        radii,
        excess,
        scale,
        fits,
    })
}

/// Largest sampled `[ρ^{-λ}·excess(x0, ρ)]^{1/q}` over the centers and rungs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seminorm {
    pub value: f64,
    pub argmax_center: Vec<f64>,
    pub argmax_rho: f64,
    pub pairs: usize,
}

pub fn campanato_seminorm(
    u: &SampledQFunction,
    k: u32,
    q_exp: f64,
    lambda: f64,
    centers: &[Vec<f64>],
    ladder: &Ladder,
    cfg: &FitConfig,
) -> Result<Seminorm> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let radii = ladder.usable(u.grid().resolution());
    let pairs: Vec<(usize, f64)> = (0..centers.len())
        .flat_map(|c| radii.iter().map(move |&r| (c, r)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::TooFewRungs { found: 0, needed: 1 });
    }
    let values = par::map_slice(&pairs, |&(c, r)| -> Result<f64> {
        let fit = best_fit(u, &Region::new(&centers[c], r), k, q_exp, cfg)?;
        Ok((r.powf(-lambda) * fit.residual.max(0.0)).powf(1.0 / q_exp))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(Seminorm {
        value: values[best],
        argmax_center: centers[pairs[best].0].clone(),
        argmax_rho: pairs[best].1,
        pairs: pairs.len(),
    })
}

/// Log-log slope of an excess profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// None when every rung fits exactly.
    pub lambda_hat: Option<f64>,
    pub r2: Option<f64>,
    pub exact_fit: bool,
    pub rungs_used: usize,
}

const MIN_RUNGS: usize = 4;

pub fn fit_decay(profile: &ExcessProfile) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.excess)
        .zip(&profile.scale)
        .filter(|((_, &e), &s)| e > 1e2 * f64::EPSILON * s.max(f64::MIN_POSITIVE))
        .map(|((&r, &e), _)| (r.ln(), e.ln()))
        .collect();
    if usable.is_empty() && profile.radii.len() >= MIN_RUNGS {
        return Ok(DecayFit {
            lambda_hat: None,
            r2: None,
            exact_fit: true,
            rungs_used: 0,
        });
    }
    if usable.len() < MIN_RUNGS {
        return Err(Error::TooFewRungs {
            found: usable.len(),
            needed: MIN_RUNGS,
        });
    }
    let (slope, r2) = linear_regression(&usable);
    Ok(DecayFit {
        lambda_hat: Some(slope),
        r2: Some(r2),
        exact_fit: false,
        rungs_used: usable.len(),
    })
}

/// Slope and coefficient of determination of a least-squares line.
fn linear_regression(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

pub fn decay_exponent(
    u: &SampledQFunction,
    x0: &[f64],
    k: u32,
    q_exp: f64,
    ladder: &Ladder,
    cfg: &FitConfig,
) -> Result<DecayFit> {
    fit_decay(&excess_profile(u, x0, k, q_exp, ladder, cfg)?)
}

/// `α = (λ − n − ℓq)/q`, defined for `n + ℓq < λ < n + (ℓ+1)q`.
pub fn holder_from_campanato(lambda: f64, n: usize, ell: u32, q_exp: f64) -> Result<f64> {
    let lo = n as f64 + ell as f64 * q_exp;
    let hi = lo + q_exp;
    if !(lambda > lo && lambda < hi) {
        return Err(Error::ExponentBand { lambda, lo, hi });
    }
    Ok((lambda - lo) / q_exp)
}

/// The order ℓ whose band strictly contains λ, with the matching α.
pub fn holder_band(lambda: f64, n: usize, q_exp: f64) -> Option<(u32, f64)> {
    let t = (lambda - n as f64) / q_exp;
    if !(t > 0.0) || t.fract() == 0.0 {
        return None;
    }
    let ell = t.floor() as u32;
    holder_from_campanato(lambda, n, ell, q_exp).ok().map(|a| (ell, a))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterReport {
    pub center: Vec<f64>,
    pub decay: DecayFit,
    pub radii: Vec<f64>,
    pub excess: Vec<f64>,
    /// Deepest-rung fit, standing in for the limits `v_p(x0)`.
    pub limit: crate::qpoly::PolyJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampanatoReport {
    pub n: usize,
    pub k: u32,
    pub q_exp: f64,
    pub ladder: Ladder,
    pub seminorm: Option<Seminorm>,
    pub centers: Vec<CenterReport>,
    /// Smallest per-center slope.
    pub lambda_hat: Option<f64>,
    pub ell: Option<u32>,
    pub alpha_hat: Option<f64>,
}

/// Per-center decay slopes, the worst slope, its Hölder exponent, and the
/// seminorm at `lambda` when one is given.
pub fn campanato_report(
    u: &SampledQFunction,
    centers: &[Vec<f64>],
    k: u32,
    q_exp: f64,
    ladder: &Ladder,
    lambda: Option<f64>,
    cfg: &FitConfig,
) -> Result<CampanatoReport> {
    let mut reports = Vec::with_capacity(centers.len());
    for c in centers {
        let profile = excess_profile(u, c, k, q_exp, ladder, cfg)?;
        let decay = fit_decay(&profile)?;
        reports.push(CenterReport {
            center: c.clone(),
            decay,
            radii: profile.radii.clone(),
            excess: profile.excess.clone(),
            limit: profile.fits.last().expect("at least four rungs").to_json(),
        });
    }
    let lambda_hat = reports
        .iter()
        .filter_map(|r| r.decay.lambda_hat)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let band = lambda_hat.and_then(|l| holder_band(l, u.n(), q_exp));
    let seminorm = match lambda {
        Some(l) => Some(campanato_seminorm(u, k, q_exp, l, centers, ladder, cfg)?),
        None => None,
    };
    Ok(CampanatoReport {
        n: u.n(),
        k,
        q_exp,
        ladder: *ladder,
        seminorm,
        centers: reports,
        lambda_hat,
        ell: band.map(|b| b.0),
        alpha_hat: band.map(|b| b.1),
    })
}

/// Coefficient tuples `a_(r)(x0, ρ_i)` along the ladder.
#[derive(Debug, Clone)]
pub struct CoefficientFlow {
    pub radii: Vec<f64>,
    pub tuples: Vec<AqPoint>,
    /// `G` between consecutive tuples.
    pub steps: Vec<f64>,
    /// `2^{j(n+rq−λ)/q}` summands for the supplied λ, one per step.
    pub geometric_bound: Option<Vec<f64>>,
    /// Deepest tuple.
    pub limit: AqPoint,
    /// Geometric extrapolation from the last three tuples when the steps
    /// shrink; None otherwise.
    pub extrapolated: Option<AqPoint>,
    /// True when the last step is numerically zero, so `limit` is exact.
    pub settled: bool,
    pub fits: Vec<QPolynomial>,
}

impl CoefficientFlow {
    /// Ratios of consecutive steps.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.steps.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn coefficient_flow(
    u: &SampledQFunction,
    x0: &[f64],
    rho0: f64,
    k: u32,
    q_exp: f64,
    depth: usize,
    r: u32,
    lambda: Option<f64>,
    cfg: &FitConfig,
) -> Result<CoefficientFlow> {
    if r > k {
        return Err(Error::InvalidParameter(format!("truncation order {r} exceeds degree {k}")));
    }
    let profile = excess_profile(u, x0, k, q_exp, &Ladder::new(rho0, depth), cfg)?;
    if profile.radii.len() < 2 {
        return Err(Error::TooFewRungs {
            found: profile.radii.len(),
            needed: 2,
        });
    }
    let tuples: Vec<AqPoint> = profile.fits.iter().map(|p| p.coefficient_tuple(r, 1.0)).collect();
    let steps: Vec<f64> = tuples
        .windows(2)
        .map(|w| metric_g(&w[0], &w[1]).expect("same shape"))
        .collect();
    let n = u.n() as f64;
    let geometric_bound = lambda.map(|l| {
        (0..steps.len())
            .map(|j| 2f64.powf(j as f64 * (n + r as f64 * q_exp - l) / q_exp))
            .collect()
    });
    let limit = tuples.last().expect("non-empty").clone();
    let size = limit.norm().max(1.0);
    let settled = *steps.last().expect("non-empty") <= 1e-9 * size;
    let extrapolated = if tuples.len() >= 3 && !settled {
        extrapolate(&tuples[tuples.len() - 3..])
    } else {
        None
    };
    Ok(CoefficientFlow {
        radii: profile.radii,
        tuples,
        steps,
        geometric_bound,
        limit,
        extrapolated,
        settled,
        fits: profile.fits,
    })
}

/// Aitken-style limit of three geometrically converging tuples, matched to
/// the last one.
fn extrapolate(t: &[AqPoint]) -> Option<AqPoint> {
    let (q, w) = (t[2].q(), t[2].m());
    let align = |a: &AqPoint| -> Vec<f64> {
        let (perm, _) = match_flat(t[2].as_slice(), a.as_slice(), q, w);
        (0..q).flat_map(|i| a.branch(perm[i]).to_vec()).collect()
    };
    let a0 = align(&t[0]);
    let a1 = align(&t[1]);
    let a2 = t[2].as_slice();
    let d1: f64 = a1.iter().zip(&a0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let d2: f64 = a2.iter().zip(&a1).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    if !(d1 > 0.0) {
        return None;
    }
    let ratio = d2 / d1;
    if !(ratio < 1.0) {
        return None;
    }
    let f = ratio / (1.0 - ratio);
    let data = a2.iter().zip(&a1).map(|(x, y)| x + f * (x - y)).collect();
    AqPoint::new(q, w, data).ok()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    /// Largest `G(∂_j v_p, v_{p+e_j})` over checked (j, p).
    pub max_discrepancy: f64,
    pub checked: usize,
    /// Directions skipped because branches could not be told apart.
    pub excluded: usize,
}

/// Compares finite differences of `x ↦ v_p(x)` with `v_{p+e_j}`, where
/// `v(x)` is the best fit of degree k on `B_radius(x)`.
pub fn derivative_chain_check(
    u: &SampledQFunction,
    x0: &[f64],
    k: u32,
    q_exp: f64,
    radius: f64,
    h: f64,
    cfg: &FitConfig,
) -> Result<ChainReport> {
    let n = u.n();
    let fit_at = |x: &[f64]| best_fit(u, &Region::new(x, radius), k, q_exp, cfg).map(|f| f.poly);
    let base = fit_at(x0)?;
    let (q, m) = (base.q(), base.m());
    let basis = base.basis().to_vec();
    let width = m * basis.len();
    let gap_tol = 1e-6 * base.coefficient_tuple(k, 1.0).norm().max(1e-300);
    let ambiguous = base.coefficient_tuple(k, 1.0).min_branch_gap() <= gap_tol;

    let mut max_discrepancy: f64 = 0.0;
    let mut checked = 0;
    let mut excluded = 0;
    for j in 0..n {
        if ambiguous && q > 1 {
            excluded += 1;
            continue;
        }
        let mut xp = x0.to_vec();
        let mut xm = x0.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let plus = fit_at(&xp)?;
        let minus = fit_at(&xm)?;
        let (pp, _) = match_flat(base.coeffs(), plus.coeffs(), q, width);
        let (pm, _) = match_flat(base.coeffs(), minus.coeffs(), q, width);
        let ej = MultiIndex::unit(n, j);
        for p in basis.iter().filter(|p| p.order() < k) {
            let up = p.plus(&ej);
            let mut d2 = 0.0;
            for i in 0..q {
                for c in 0..m {
                    let diff = (plus.coeff(pp[i], c, p) - minus.coeff(pm[i], c, p)) / (2.0 * h);
                    d2 += (diff - base.coeff(i, c, &up)).powi(2);
                }
            }
            max_discrepancy = max_discrepancy.max(d2.sqrt());
            checked += 1;
        }
    }
    Ok(ChainReport {
        max_discrepancy,
        checked,
        excluded,
    })
}

/// `2^q + 2^{q−λ}`.
pub fn dyadic_constant(q_exp: f64, lambda: f64) -> f64 {
    2f64.powf(q_exp) + 2f64.powf(q_exp - lambda)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungCheck {
    pub rho: f64,
    /// `∫_{B_{ρ/2}} G(P_ρ, P_{ρ/2})^q`.
    pub lhs: f64,
    /// `C·ρ^λ·⦀u⦀^q`.
    pub bound: f64,
    pub ratio: f64,
}

/// Checks consecutive best fits against the bound `C·ρ^λ·⦀u⦀^q` with
/// `C = 2^q + 2^{q−λ}`. The seminorm is the sampled one at this center.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_consistency(
    u: &SampledQFunction,
    x0: &[f64],
    ladder: &Ladder,
    k: u32,
    q_exp: f64,
    lambda: f64,
    seminorm: Option<f64>,
    cfg: &FitConfig,
) -> Result<Vec<RungCheck>> {
    let profile = excess_profile(u, x0, k, q_exp, ladder, cfg)?;
    let semi_q = match seminorm {
        Some(s) => s.powf(q_exp),
        None => profile
            .radii
            .iter()
            .zip(&profile.excess)
            .map(|(r, e)| r.powf(-lambda) * e)
            .fold(0.0, f64::max),
    };
    let c = dyadic_constant(q_exp, lambda);
    let grid = u.grid();
    let (q, m) = (u.q(), u.m());
    let mut out = Vec::new();
    for l in 0..profile.radii.len().saturating_sub(1) {
        let rho = profile.radii[l];
        let (a, b) = (&profile.fits[l], &profile.fits[l + 1]);
        let mut av = vec![0.0; q * m];
        let mut bv = vec![0.0; q * m];
        let mut lhs = 0.0;
        for i in grid.ball_indices(x0, profile.radii[l + 1]) {
            let x = grid.point(i);
            a.eval_flat(x, &mut av);
            b.eval_flat(x, &mut bv);
            lhs += grid.weight(i) * match_flat(&av, &bv, q, m).1.powf(0.5 * q_exp);
        }
        let bound = c * rho.powf(lambda) * semi_q;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / bound };
        out.push(RungCheck { rho, lhs, bound, ratio });
    }
    Ok(out)
}

/// Top-order coefficients `(a^{i,j}_p)_{|p| = k}` as a Q-point.
fn top_tuple(p: &QPolynomial) -> AqPoint {
    let k = p.k();
    let (q, m) = (p.q(), p.m());
    let top: Vec<&MultiIndex> = p.basis().iter().filter(|b| b.order() == k).collect();
    let mut data = Vec::with_capacity(q * m * top.len());
    for i in 0..q {
        for j in 0..m {
            for b in &top {
                data.push(p.coeff(i, j, b));
            }
        }
    }
    AqPoint::new(q, m * top.len(), data).expect("valid shape")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCenter {
    pub rho: f64,
    pub lhs: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Compares top-order coefficients of the fits on `B_{2ρ}(x0)` and
/// `B_{2ρ}(y0)`, `ρ = |x0 − y0|`, against `C₁·2^{q+1+λ}⦀u⦀^q ρ^{λ−n−kq}`.
#[allow(clippy::too_many_arguments)]
pub fn cross_center_check(
    u: &SampledQFunction,
    x0: &[f64],
    y0: &[f64],
    k: u32,
    q_exp: f64,
    lambda: f64,
    seminorm: f64,
    c1: f64,
    diameter: f64,
    cfg: &FitConfig,
) -> Result<CrossCenter> {
    let rho = crate::domain::dist2(x0, y0).sqrt();
    if rho > diameter / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "centers {rho} apart exceed half the diameter {diameter}"
        )));
    }
    let n = u.n() as f64;
    let bound = c1 * 2f64.powf(q_exp + 1.0 + lambda) * seminorm.powf(q_exp)
        * rho.powf(lambda - n - k as f64 * q_exp);
    if rho == 0.0 {
        return Ok(CrossCenter { rho, lhs: 0.0, bound, ratio: 0.0 });
    }
    let fx = best_fit(u, &Region::new(x0, 2.0 * rho), k, q_exp, cfg)?;
    let fy = best_fit(u, &Region::new(y0, 2.0 * rho), k, q_exp, cfg)?;
    let lhs = metric_g(&top_tuple(&fx.poly), &top_tuple(&fy.poly))?.powf(q_exp);
    let ratio = if lhs <= 1e-24 { 0.0 } else { lhs / bound };
    Ok(CrossCenter { rho, lhs, bound, ratio })
}
