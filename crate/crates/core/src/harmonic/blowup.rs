use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::diagnostics::{average_at, half_disk_rule, radial_defect};
use super::fields::jacobian_at;
use crate::aq::QField;
use crate::error::{Error, Result};
use crate::qpoly::QPolynomial;

/// Components `v¹, …, v^N` on the unit half-disk `{x¹ > 0} ∩ B₁`, with a
/// single-valued boundary datum κⁱ for each.
#[derive(Clone)]
pub struct BlowupCandidate {
    pub components: Vec<Arc<dyn QField>>,
    /// Q = 1 polynomials, one per component.
    pub kappa: Vec<QPolynomial>,
    /// Fine-class parameter; carried along, never used.
    pub m_param: f64,
}

impl BlowupCandidate {
    pub fn new(components: Vec<Arc<dyn QField>>, kappa: Vec<QPolynomial>) -> Result<Self> {
        if components.is_empty() || components.len() != kappa.len() {
            return Err(Error::dims(components.len(), kappa.len()));
        }
        for (v, k) in components.iter().zip(&kappa) {
            if v.dim() != 2 || k.n() != 2 || k.q() != 1 || k.m() != v.m() {
                return Err(Error::InvalidParameter(
                    "components must be planar with a matching single-valued trace".into(),
                ));
            }
        }
        Ok(BlowupCandidate {
            components,
            kappa,
            m_param: 1.0,
        })
    }

    /// Candidate with κ ≡ 0.
    pub fn zero_trace(components: Vec<Arc<dyn QField>>) -> Result<Self> {
        let kappa = components
            .iter()
            .map(|v| QPolynomial::zero(2, v.m(), 1, 0, vec![0.0, 0.0]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components, kappa)
    }

    fn check_wall_point(&self, z: &[f64], rho: f64) -> Result<()> {
        if z.len() != 2 || z[0] != 0.0 {
            return Err(Error::InvalidParameter("z must lie on {x¹ = 0}".into()));
        }
        let zn = z[1].abs();
        if !(zn < 1.0 && rho > 0.0 && rho <= 0.375 * (1.0 - zn)) {
            return Err(Error::InvalidParameter(format!(
                "rho = {rho} outside (0, 3/8·(1 − |z|)] for |z| = {zn}"
            )));
        }
        Ok(())
    }

    /// `Σᵢ ∫_{B₁∩H} |vⁱ|²`.
    pub fn l2_norm_squared(&self) -> f64 {
        half_disk_rule(&[0.0, 0.0], 1.0)
            .integrate(|a, b| self.components.iter().map(|v| sq(&v.eval(&[a, b]))).sum())
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Σ over branches of `|v_b − c|²`.
fn dist_to_point(v: &[f64], c: &[f64]) -> f64 {
    v.chunks_exact(c.len())
        .map(|b| b.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs/rhs`; zero when both sides vanish.
    pub ratio: f64,
    pub vacuous: bool,
    pub excluded: usize,
}

fn ratio_of(lhs: f64, rhs: f64, excluded: usize) -> KernelCheck {
    let vacuous = lhs == 0.0 && rhs == 0.0;
    let ratio = if vacuous {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    KernelCheck {
        lhs,
        rhs,
        ratio,
        vacuous,
        excluded,
    }
}

/// Kernel side `∫_{B_{ρ/2}(z)∩Ω} Σᵢ |vⁱ − κⁱ(z)|² / |x − z|^{n+3/2}`
/// against `ρ^{−n−3/2} ∫_{B_ρ(z)∩Ω} Σᵢ |vⁱ − κⁱ(z)|²`.
pub fn boundary_estimate_check(v: &BlowupCandidate, z: &[f64], rho: f64) -> Result<KernelCheck> {
    v.check_wall_point(z, rho)?;
    let n = 2.0;
    let kz: Vec<Vec<f64>> = v.kappa.iter().map(|k| k.eval(z)).collect();
    let excess = |x: &[f64]| -> f64 {
        v.components
            .iter()
            .zip(&kz)
            .map(|(c, k)| dist_to_point(&c.eval(x), k))
            .sum()
    };
    let lhs = half_disk_rule(z, rho / 2.0).integrate(|a, b| {
        let r = ((a - z[0]).powi(2) + (b - z[1]).powi(2)).sqrt();
        excess(&[a, b]) / r.powf(n + 1.5)
    });
    let rhs = rho.powf(-n - 1.5) * half_disk_rule(z, rho).integrate(|a, b| excess(&[a, b]));
    Ok(ratio_of(lhs, rhs, 0))
}

/// `∫_{B_{ρ/2}(z)∩Ω} Σᵢ R^{2−n} (∂_R((vⁱ − vⁱ_a(z))/R))²` against
/// `ρ^{−n−2} ∫_{B_ρ(z)∩Ω} Σᵢ |vⁱ − ℓ_{vⁱ,z}|²`, R = |x − z|.
pub fn hardt_simon_check(v: &BlowupCandidate, z: &[f64], rho: f64, h: f64) -> Result<KernelCheck> {
    v.check_wall_point(z, rho)?;
    let n = 2.0;
    let mut affine = Vec::with_capacity(v.components.len());
    for c in &v.components {
        let avg = average_at(c.as_ref(), z);
        let grad = average_gradient(c.as_ref(), z, h)?;
        affine.push((avg, grad));
    }
    let mut excluded = 0usize;
    let mut lhs = 0.0;
    for &[a, b, w] in &half_disk_rule(z, rho / 2.0).nodes {
        let x = [a, b];
        let r2 = (a - z[0]).powi(2) + (b - z[1]).powi(2);
        for (c, (avg, _)) in v.components.iter().zip(&affine) {
            match radial_defect(c.as_ref(), z, avg, &x, h) {
                // R^{2−n}·|∂_R(w/R)|² with ∂_R(w/R) = (Dw·(x−z) − w)/R².
                Ok(d) => lhs += w * r2.sqrt().powf(2.0 - n) * d / (r2 * r2),
                Err(_) => excluded += 1,
            }
        }
    }
    let rhs = rho.powf(-n - 2.0)
        * half_disk_rule(z, rho).integrate(|a, b| {
            let x = [a, b];
            v.components
                .iter()
                .zip(&affine)
                .map(|(c, (avg, grad))| {
                    let m = avg.len();
                    let ell: Vec<f64> = (0..m)
                        .map(|k| avg[k] + grad[k * 2] * (a - z[0]) + grad[k * 2 + 1] * (b - z[1]))
                        .collect();
                    dist_to_point(&c.eval(&x), &ell)
                })
                .sum()
        });
    Ok(ratio_of(lhs, rhs, excluded))
}

/// `D v_a(z)` as an m×n row-major block. Uses exact Jacobians when
/// available (the average is smooth even where branches cross), otherwise
/// central differences of the average.
fn average_gradient(v: &dyn QField, z: &[f64], h: f64) -> Result<Vec<f64>> {
    let (q, m, n) = (v.q(), v.m(), v.dim());
    if let Ok((_, jac)) = jacobian_at(v, z, h) {
        let mut g = vec![0.0; m * n];
        for b in 0..q {
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += jac[b * m * n + k] / q as f64;
            }
        }
        return Ok(g);
    }
    let mut g = vec![0.0; m * n];
    let mut xp = z.to_vec();
    let mut xm = z.to_vec();
    for j in 0..n {
        xp[j] += h;
        xm[j] -= h;
        let ap = average_at(v, &xp);
        let am = average_at(v, &xm);
        for c in 0..m {
            g[c * n + j] = (ap[c] - am[c]) / (2.0 * h);
        }
        xp[j] = z[j];
        xm[j] = z[j];
    }
    Ok(g)
}

/// `x ↦ scale·v(z + σx)`.
#[derive(Clone)]
pub struct Rescaled {
    pub inner: Arc<dyn QField>,
    pub z: Vec<f64>,
    pub sigma: f64,
    pub scale: f64,
}

impl QField for Rescaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn q(&self) -> usize {
        self.inner.q()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x.iter().zip(&self.z).map(|(a, c)| c + self.sigma * a).collect();
        self.inner.eval_into(&y, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        let y: Vec<f64> = x.iter().zip(&self.z).map(|(a, c)| c + self.sigma * a).collect();
        if !self.inner.jacobian_into(&y, values, jac) {
            return false;
        }
        values.iter_mut().for_each(|v| *v *= self.scale);
        jac.iter_mut().for_each(|v| *v *= self.scale * self.sigma);
        true
    }
}

/// `x ↦ scale·(v(x) − ℓ(x))` for a single-valued affine ℓ.
#[derive(Clone)]
pub struct MinusAffine {
    pub inner: Arc<dyn QField>,
    pub offset: Vec<f64>,
    /// m×n row-major.
    pub gradient: Vec<f64>,
    pub scale: f64,
}

impl MinusAffine {
    fn ell(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..self.offset.len())
            .map(|c| self.offset[c] + (0..n).map(|j| self.gradient[c * n + j] * x[j]).sum::<f64>())
            .collect()
    }
}

impl QField for MinusAffine {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn q(&self) -> usize {
        self.inner.q()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.eval_into(x, out);
        let l = self.ell(x);
        for b in out.chunks_exact_mut(l.len()) {
            b.iter_mut().zip(&l).for_each(|(v, a)| *v = self.scale * (*v - a));
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        if !self.inner.jacobian_into(x, values, jac) {
            return false;
        }
        let l = self.ell(x);
        let w = self.gradient.len();
        for b in values.chunks_exact_mut(l.len()) {
            b.iter_mut().zip(&l).for_each(|(v, a)| *v = self.scale * (*v - a));
        }
        for b in jac.chunks_exact_mut(w) {
            b.iter_mut().zip(&self.gradient).for_each(|(v, g)| *v = self.scale * (*v - g));
        }
        true
    }
}

impl BlowupCandidate {
    /// `v(z + σ·)` normalized in `L²(Ω)`; None when it vanishes there.
    pub fn rescale_at(&self, z: &[f64], sigma: f64) -> Result<Option<BlowupCandidate>> {
        self.check_wall_point(z, sigma)?;
        let comps: Vec<Arc<dyn QField>> = self
            .components
            .iter()
            .map(|c| {
                Arc::new(Rescaled {
                    inner: c.clone(),
                    z: z.to_vec(),
                    sigma,
                    scale: 1.0,
                }) as Arc<dyn QField>
            })
            .collect();
        let kappa = self
            .kappa
            .iter()
            .map(|k| k.rescale(z, sigma))
            .collect::<Result<Vec<_>>>()?;
        self.normalized(comps, kappa)
    }

    /// `(v − ℓ_v)/‖v − ℓ_v‖`, with ℓ_v the affine part of the average at 0.
    pub fn remove_affine(&self, h: f64) -> Result<Option<BlowupCandidate>> {
        let origin = [0.0, 0.0];
        let mut comps: Vec<Arc<dyn QField>> = Vec::new();
        let mut kappa = Vec::new();
        for (c, k) in self.components.iter().zip(&self.kappa) {
            let offset = average_at(c.as_ref(), &origin);
            let gradient = average_gradient(c.as_ref(), &origin, h)?;
            let mut shifted = k.recenter(&origin)?;
            shifted = shifted.with_degree(shifted.k().max(1));
            let zero = crate::qpoly::MultiIndex::zero(2);
            for j in 0..c.m() {
                let a = shifted.coeff(0, j, &zero);
                shifted.set_coeff(0, j, &zero, a - offset[j])?;
                for d in 0..2 {
                    let e = crate::qpoly::MultiIndex::unit(2, d);
                    let a = shifted.coeff(0, j, &e);
                    shifted.set_coeff(0, j, &e, a - gradient[j * 2 + d])?;
                }
            }
            comps.push(Arc::new(MinusAffine {
                inner: c.clone(),
                offset,
                gradient,
                scale: 1.0,
            }));
            kappa.push(shifted);
        }
        self.normalized(comps, kappa)
    }

    fn normalized(&self, comps: Vec<Arc<dyn QField>>, kappa: Vec<QPolynomial>) -> Result<Option<BlowupCandidate>> {
        let raw = BlowupCandidate {
            components: comps,
            kappa,
            m_param: self.m_param,
        };
        let norm = raw.l2_norm_squared().sqrt();
        if !(norm > 0.0) {
            return Ok(None);
        }
        let components = raw
            .components
            .iter()
            .map(|c| {
                Arc::new(Rescaled {
                    inner: c.clone(),
                    z: vec![0.0, 0.0],
                    sigma: 1.0,
                    scale: 1.0 / norm,
                }) as Arc<dyn QField>
            })
            .collect();
        let kappa = raw
            .kappa
            .iter()
            .map(|k| {
                let c: Vec<f64> = k.coeffs().iter().map(|a| a / norm).collect();
                QPolynomial::from_coeffs(2, k.m(), 1, k.k(), k.center().to_vec(), c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(BlowupCandidate {
            components,
            kappa,
            m_param: self.m_param,
        }))
    }
}
