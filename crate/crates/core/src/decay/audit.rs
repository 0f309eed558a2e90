use serde::{Deserialize, Serialize};

use crate::aq::{match_flat, SampledQFunction};
use crate::error::{Error, Result};
use crate::par;
use crate::qpoly::{best_fit, FitConfig, QPolynomial, Region};

use super::certificate::DecayHypothesis;

/// Stratum 0 (`gamma0`) and the higher strata `Γ_1, …, Γ_N` as point sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub gamma0: Vec<Vec<f64>>,
    #[serde(default)]
    pub strata: Vec<Vec<Vec<f64>>>,
}

impl Stratification {
    pub fn single(gamma0: Vec<Vec<f64>>) -> Self {
        Stratification {
            gamma0,
            strata: Vec::new(),
        }
    }

    /// Checks dimensions, that stratum 0 is non-empty and that each `Γ_i`
    /// avoids stratum 0. On finite samples the closure condition reduces to
    /// this separation: every accumulation point of a sampled `Γ_i` is one of
    /// its own points.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.gamma0.is_empty() {
            return Err(Error::InvalidParameter("stratum 0 must be non-empty".into()));
        }
        for p in self.gamma0.iter().chain(self.strata.iter().flatten()) {
            if p.len() != n {
                return Err(Error::dims(n, p.len()));
            }
        }
        for (i, s) in self.strata.iter().enumerate() {
            if let Some(p) = s.iter().find(|p| dist_to_set(p, &self.gamma0) == 0.0) {
                return Err(Error::Stratum {
                    stratum: i + 1,
                    source: Box::new(Error::InvalidParameter(format!(
                        "point {p:?} also lies in stratum 0"
                    ))),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn dist_to_set(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|p| {
            p.iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    I,
    II,
    III,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub which: Which,
    /// 0 for stratum-0 points, i for checks of component/stratum i.
    pub stratum: usize,
    pub point: Vec<f64>,
    pub sigma: f64,
    pub rho: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Relative slack: a pair violates when `lhs > (1 + tol)·rhs`.
    pub tol: f64,
    /// Smallest σ in grid cells.
    pub min_cells: f64,
    /// Largest number of dyadic halvings below the top radius.
    pub max_depth: usize,
    /// Points off the strata for (II)/(III); a lattice of this spacing is
    /// used when `None`.
    pub off_points: Option<Vec<Vec<f64>>>,
    pub off_spacing: f64,
    /// Supplied `P_{x0}` for the stratum-0 points, in order. Fitted when absent.
    #[serde(skip)]
    pub family0: Option<Vec<QPolynomial>>,
    pub fit: FitConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            tol: 0.05,
            min_cells: 6.0,
            max_depth: 6,
            off_points: None,
            off_spacing: 0.125,
            family0: None,
            fit: FitConfig {
                restarts: 4,
                ..FitConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Number of (point, σ, ρ) inequalities evaluated.
    pub checked: usize,
    pub points: usize,
    /// Points with no admissible pair at this resolution.
    pub skipped_points: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn merge(&mut self, other: AuditReport) {
        self.checked += other.checked;
        self.points += other.points;
        self.skipped_points += other.skipped_points;
        self.violations.extend(other.violations);
    }

    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `Σ_{x_s ∈ B_r(x)} w_s G(u(x_s), P(x_s))^q`.
pub(crate) fn ball_integral(u: &SampledQFunction, x: &[f64], r: f64, p: &QPolynomial, q_exp: f64) -> f64 {
    let (q, m) = (u.q(), u.m());
    let mut buf = vec![0.0; q * m];
    let grid = u.grid();
    grid.ball_indices(x, r)
        .into_iter()
        .map(|i| {
            p.eval_flat(grid.point(i), &mut buf);
            let g2 = match_flat(u.raw(i), &buf, q, m).1;
            grid.weight(i) * g2.powf(0.5 * q_exp)
        })
        .sum()
}

/// Dyadic pairs `σ ≤ ρ/2` with `ρ ≤ top` and `σ ≥ smallest`.
fn dyadic_pairs(top: f64, smallest: f64, max_depth: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for j in 0..=max_depth {
        let rho = top * 0.5f64.powi(j as i32);
        for l in 1..=max_depth {
            let sigma = rho * 0.5f64.powi(l as i32);
            if sigma < smallest {
                break;
            }
            out.push((sigma, rho));
        }
    }
    out
}

struct Task<'a> {
    which: Which,
    stratum: usize,
    point: Vec<f64>,
    /// Components entering the left and right sides (several for (I)).
    comps: Vec<usize>,
    /// Comparison polynomials per component; `None` means use the point's own.
    compare: Option<&'a [Vec<QPolynomial>]>,
    top: f64,
}

fn fit_at(u: &SampledQFunction, x: &[f64], r: f64, k: u32, q_exp: f64, cfg: &FitConfig) -> Result<QPolynomial> {
    Ok(best_fit(u, &Region::new(x, r), k, q_exp, cfg)?.poly)
}

fn run_task(
    t: &Task,
    comps: &[SampledQFunction],
    h: &DecayHypothesis,
    beta: f64,
    own: Option<&[QPolynomial]>,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let hres = comps[0].grid().resolution();
    let pairs = dyadic_pairs(t.top, cfg.min_cells * hres, cfg.max_depth);
    let mut report = AuditReport {
        points: 1,
        ..Default::default()
    };
    if pairs.is_empty() {
        report.skipped_points = 1;
        return Ok(report);
    }
    let fit_radius = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let own: Vec<QPolynomial> = match own {
        Some(p) => p.to_vec(),
        None => t
            .comps
            .iter()
            .map(|&c| fit_at(&comps[c], &t.point, fit_radius, h.k, h.q_exp, &cfg.fit))
            .collect::<Result<_>>()?,
    };
    let d = h.n as f64 + h.k as f64 * h.q_exp;
    for &(sigma, rho) in &pairs {
        let lhs_int: f64 = t
            .comps
            .iter()
            .zip(&own)
            .map(|(&c, p)| ball_integral(&comps[c], &t.point, sigma, p, h.q_exp))
            .sum();
        let rhs_int = match t.compare {
            None => t
                .comps
                .iter()
                .zip(&own)
                .map(|(&c, p)| ball_integral(&comps[c], &t.point, rho, p, h.q_exp))
                .sum(),
            // Worst case over the comparison family.
            Some(fam) => fam
                .iter()
                .map(|ps| {
                    t.comps
                        .iter()
                        .zip(ps)
                        .map(|(&c, p)| ball_integral(&comps[c], &t.point, rho, p, h.q_exp))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
        };
        let lhs = sigma.powf(-d) * lhs_int;
        let rhs = beta * (sigma / rho).powf(h.q_exp * h.mu) * rho.powf(-d) * rhs_int;
        report.checked += 1;
        let negligible = lhs_int <= 1e-24 * sigma.powf(h.n as f64);
        if !negligible && lhs > (1.0 + cfg.tol) * rhs {
            report.violations.push(Violation {
                which: t.which,
                stratum: t.stratum,
                point: t.point.clone(),
                sigma,
                rho,
                lhs,
                rhs,
                ratio: lhs / rhs,
            });
        }
    }
    Ok(report)
}

/// Lattice points of the given spacing that land on the sample grid.
pub(crate) fn lattice_points(u: &SampledQFunction, spacing: f64) -> Vec<Vec<f64>> {
    let grid = u.grid();
    let n = grid.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for p in grid.points() {
        for j in 0..n {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let counts: Vec<i64> = (0..n)
        .map(|j| ((hi[j] - lo[j]) / spacing).floor() as i64 + 1)
        .collect();
    let total: i64 = counts.iter().product();
    let mut out = Vec::new();
    for mut flat in 0..total {
        let mut x = vec![0.0; n];
        for j in 0..n {
            let c = flat % counts[j];
            flat /= counts[j];
            x[j] = (((lo[j] + c as f64 * spacing) / spacing).round()) * spacing;
        }
        if let Some(i) = grid.nearest(&x) {
            let p = grid.point(i);
            let d2: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() <= grid.resolution() {
                out.push(p.to_vec());
            }
        }
    }
    out
}

/// Evaluates both sides of hypothesis `which` at every relevant point and
/// admissible dyadic pair. Without strata this is the single-layer pair:
/// (I) at stratum-0 points and (II) at points off stratum 0 against the
/// stratum-0 family. With strata, `components[i]` is audited against
/// stratum `i + 1`; a single component is reused for every stratum.
pub fn audit_hypothesis(
    components: &[SampledQFunction],
    h: &DecayHypothesis,
    s: &Stratification,
    which: Which,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    h.validate()?;
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidParameter("no sampled components".into()))?;
    s.validate(first.n())?;
    if components.iter().any(|c| c.n() != first.n()) {
        return Err(Error::InvalidParameter("components sampled in different dimensions".into()));
    }
    let nstrata = s.strata.len();
    if nstrata > 0 && components.len() != 1 && components.len() != nstrata {
        return Err(Error::InvalidParameter(format!(
            "{} components for {nstrata} strata",
            components.len()
        )));
    }
    if which == Which::III && nstrata == 0 {
        return Err(Error::InvalidParameter("hypothesis III needs at least one stratum".into()));
    }
    let comp_of = |i: usize| if components.len() == 1 { 0 } else { i };
    let all_comps: Vec<usize> = if nstrata == 0 || components.len() == 1 {
        vec![0]
    } else {
        (0..nstrata).collect()
    };
    let hres = first.grid().resolution();
    let smallest = cfg.min_cells * hres;
    let top_i = h.epsilon;
    let fit_i = dyadic_pairs(top_i, smallest, cfg.max_depth)
        .iter()
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);

    // Stratum-0 family, one polynomial per component per point.
    let family0: Vec<Vec<QPolynomial>> = match &cfg.family0 {
        Some(f) => {
            if f.len() != s.gamma0.len() || all_comps.len() != 1 {
                return Err(Error::InvalidParameter(
                    "supplied family must hold one polynomial per stratum-0 point".into(),
                ));
            }
            f.iter().map(|p| vec![p.clone()]).collect()
        }
        None => {
            if !fit_i.is_finite() {
                return Err(Error::NoAdmissiblePairs);
            }
            par::map_slice(&s.gamma0, |y| {
                all_comps
                    .iter()
                    .map(|&c| fit_at(&components[c], y, fit_i, h.k, h.q_exp, &cfg.fit))
                    .collect::<Result<Vec<_>>>()
            })
            .into_iter()
            .collect::<Result<_>>()?
        }
    };

    let off = match &cfg.off_points {
        Some(p) => p.clone(),
        None => lattice_points(first, cfg.off_spacing),
    };

    let mut report = AuditReport::default();
    match which {
        Which::I => {
            let tasks: Vec<(Task, usize)> = s
                .gamma0
                .iter()
                .enumerate()
                .map(|(idx, y)| {
                    (
                        Task {
                            which,
                            stratum: 0,
                            point: y.clone(),
                            comps: all_comps.clone(),
                            compare: None,
                            top: top_i,
                        },
                        idx,
                    )
                })
                .collect();
            let reports = par::map_slice(&tasks, |(t, idx)| {
                run_task(t, components, h, h.beta1, Some(&family0[*idx]), cfg)
            });
            for r in reports {
                report.merge(r?);
            }
        }
        Which::II if nstrata == 0 => {
            let fam: Vec<Vec<QPolynomial>> = family0.clone();
            let tasks: Vec<Task> = off
                .iter()
                .filter_map(|x| {
                    let d = dist_to_set(x, &s.gamma0);
                    (d > 0.0).then(|| Task {
                        which,
                        stratum: 0,
                        point: x.clone(),
                        comps: vec![0],
                        compare: Some(&fam),
                        // Strict upper bound ρ < min{1/4, dist}.
                        top: 0.25f64.min(d) * (1.0 - 1e-9),
                    })
                })
                .collect();
            for r in par::map_slice(&tasks, |t| run_task(t, components, h, h.beta2, None, cfg)) {
                report.merge(r?);
            }
        }
        Which::II => {
            // Comparison against the stratum-0 family of the matching component.
            for (i, stratum) in s.strata.iter().enumerate() {
                let c = comp_of(i);
                let slot = all_comps.iter().position(|&a| a == c).unwrap_or(0);
                let fam: Vec<Vec<QPolynomial>> = family0.iter().map(|ps| vec![ps[slot].clone()]).collect();
                let tasks: Vec<Task> = stratum
                    .iter()
                    .map(|x| Task {
                        which,
                        stratum: i + 1,
                        point: x.clone(),
                        comps: vec![c],
                        compare: Some(&fam),
                        top: 0.25f64.min(dist_to_set(x, &s.gamma0)),
                    })
                    .collect();
                let beta = h.strata.get(i).map_or(h.beta2, |c| c.beta);
                for r in par::map_slice(&tasks, |t| run_task(t, components, h, beta, None, cfg)) {
                    report.merge(r?);
                }
            }
        }
        Which::III => {
            for (i, stratum) in s.strata.iter().enumerate() {
                let c = comp_of(i);
                let slot = all_comps.iter().position(|&a| a == c).unwrap_or(0);
                let own_i: Vec<Vec<QPolynomial>> = par::map_slice(stratum, |x| {
                    fit_at(&components[c], x, fit_i, h.k, h.q_exp, &cfg.fit).map(|p| vec![p])
                })
                .into_iter()
                .collect::<Result<_>>()?;
                let mut fam: Vec<Vec<QPolynomial>> = family0.iter().map(|ps| vec![ps[slot].clone()]).collect();
                fam.extend(own_i);
                let mut bad: Vec<Vec<f64>> = s.gamma0.clone();
                bad.extend(stratum.iter().cloned());
                let tasks: Vec<Task> = off
                    .iter()
                    .filter_map(|x| {
                        let d = dist_to_set(x, &bad);
                        (d > 0.0).then(|| Task {
                            which,
                            stratum: i + 1,
                            point: x.clone(),
                            comps: vec![c],
                            compare: Some(&fam),
                            top: 0.25f64.min(d),
                        })
                    })
                    .collect();
                let beta = h.strata.get(i).map_or(h.beta2, |c| c.beta_tilde);
                for r in par::map_slice(&tasks, |t| run_task(t, components, h, beta, None, cfg)) {
                    report.merge(r?);
                }
            }
        }
    }
    if report.checked == 0 {
        return Err(Error::NoAdmissiblePairs);
    }
    Ok(report)
}
