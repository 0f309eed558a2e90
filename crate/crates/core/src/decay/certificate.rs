use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of a stratified decay hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayHypothesis {
    pub n: usize,
    pub k: u32,
    /// Integrability exponent q ≥ 1.
    pub q_exp: f64,
    pub mu: f64,
    /// Bound on `sup |P|` for the stratum-0 polynomials.
    #[serde(default = "one")]
    pub beta: f64,
    /// Contraction constant at stratum-0 points.
    pub beta1: f64,
    /// Constant away from stratum 0.
    #[serde(default = "one")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `dist(Ω′, Ω″)` when known; caps γ at half of it.
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub strata: Vec<StratumConstants>,
    #[serde(default = "default_m")]
    pub m_offset: u32,
}

fn one() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_m() -> u32 {
    4
}

/// `(β_i, β̃_i)` for stratum i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumConstants {
    pub beta: f64,
    pub beta_tilde: f64,
}

impl DecayHypothesis {
    pub fn new(n: usize, k: u32, q_exp: f64, beta1: f64, mu: f64) -> Self {
        DecayHypothesis {
            n,
            k,
            q_exp,
            mu,
            beta: 1.0,
            beta1,
            beta2: 1.0,
            epsilon: default_epsilon(),
            margin: None,
            strata: Vec::new(),
            m_offset: default_m(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.q_exp >= 1.0) {
            return bad(format!("q = {} < 1", self.q_exp));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad(format!("mu = {} outside (0, 1)", self.mu));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return bad(format!("epsilon = {} outside (0, 1/4)", self.epsilon));
        }
        let betas = [self.beta, self.beta1, self.beta2]
            .into_iter()
            .chain(self.strata.iter().flat_map(|s| [s.beta, s.beta_tilde]));
        for b in betas {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("beta = {b} must be positive"));
            }
        }
        if let Some(m) = self.margin {
            if !(m > 0.0) {
                return bad(format!("margin = {m} must be positive"));
            }
        }
        if self.m_offset < 3 {
            return bad(format!("M = {} below the floor 3", self.m_offset));
        }
        Ok(())
    }

    fn homogeneity(&self) -> f64 {
        self.n as f64 + self.k as f64 * self.q_exp
    }
}

const MIN_T: u32 = 3;
const MAX_T: u32 = 64;

fn contraction(n: usize, k: u32, q_exp: f64, beta1: f64, mu: f64, gamma: f64) -> f64 {
    4f64.powf(n as f64 + k as f64 * q_exp) * beta1 * (2.0 * gamma / (1.0 - gamma)).powf(q_exp * mu)
}

/// Largest `γ = 2^{-t}`, `3 ≤ t ≤ 64`, with
/// `4^{n+kq}·β₁·(2γ/(1−γ))^{qμ} < 1/4`.
pub fn gamma_select(n: usize, k: u32, q_exp: f64, beta1: f64, mu: f64) -> Result<f64> {
    gamma_exponent(n, k, q_exp, beta1, mu).map(|t| 0.5f64.powi(t as i32))
}

fn gamma_exponent(n: usize, k: u32, q_exp: f64, beta1: f64, mu: f64) -> Result<u32> {
    (MIN_T..=MAX_T)
        .find(|&t| contraction(n, k, q_exp, beta1, mu, 0.5f64.powi(t as i32)) < 0.25)
        .ok_or(Error::HypothesisTooWeak)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub checked: usize,
    pub violations: Vec<super::audit::Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub gamma: f64,
    pub lambda: f64,
    pub mu_prime: f64,
    pub mu_tilde: f64,
    pub lambda_tilde: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub factors: Vec<Factor>,
    pub audit: AuditSummary,
    /// Per-stratum inner certificates when the hypothesis is stratified.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<HolderCertificate>,
}

/// Dyadic exponent t of the γ actually used: the contraction choice,
/// capped by ε and by half the margin.
fn effective_t(h: &DecayHypothesis, beta1: f64) -> Result<u32> {
    let mut t = gamma_exponent(h.n, h.k, h.q_exp, beta1, h.mu)?;
    let mut cap = h.epsilon;
    if let Some(m) = h.margin {
        cap = cap.min(0.5 * m);
    }
    while 0.5f64.powi(t as i32) > cap {
        t += 1;
        if t > MAX_T {
            return Err(Error::HypothesisTooWeak);
        }
    }
    Ok(t)
}

fn chain(h: &DecayHypothesis, beta1: f64, beta2: f64) -> Result<HolderCertificate> {
    let t = effective_t(h, beta1)?;
    let gamma = 0.5f64.powi(t as i32);
    // log_γ(1/4) for γ = 2^{-t}.
    let lambda = 2.0 / t as f64;
    let mu_prime = h.mu.min(lambda / h.q_exp);
    let mu_tilde = lambda.min(mu_prime);
    let lambda_tilde = h.n as f64 + h.q_exp * (h.k as f64 + mu_tilde);
    let d = h.homogeneity();
    let factors = vec![
        Factor {
            name: "4^(n+kq)".into(),
            value: 4f64.powf(d),
        },
        Factor {
            name: "2^(n+kq+q*mu')".into(),
            value: 2f64.powf(d + h.q_exp * mu_prime),
        },
        Factor {
            name: "1/(1-1/4)".into(),
            value: 4.0 / 3.0,
        },
        Factor {
            name: "max(1,beta2)".into(),
            value: beta2.max(1.0),
        },
    ];
    let c = factors.iter().map(|f| f.value).product();
    Ok(HolderCertificate {
        gamma,
        lambda,
        mu_prime,
        mu_tilde,
        lambda_tilde,
        c,
        factors,
        audit: AuditSummary::default(),
        strata: Vec::new(),
    })
}

/// Exponent chain `γ → λ = log_γ(1/4) → μ′ → μ̃ → λ̃ = n + q(k + μ̃)` and
/// the constant assembled from the logged factors.
pub fn certified_exponent(h: &DecayHypothesis) -> Result<HolderCertificate> {
    h.validate()?;
    chain(h, h.beta1, h.beta2)
}

/// Two-level chain: an inner certificate per stratum from `(β_i, β̃_i)`,
/// an outer one from `β₀ = beta1`, and the weakest exponent overall. The
/// M-offset scale gap enters the constant only.
pub fn certified_exponent_stratified(h: &DecayHypothesis) -> Result<HolderCertificate> {
    h.validate()?;
    if h.strata.is_empty() {
        return Err(Error::InvalidParameter("stratified certificate needs N >= 1 strata".into()));
    }
    let inner = h
        .strata
        .iter()
        .enumerate()
        .map(|(i, s)| {
            chain(h, s.beta, s.beta_tilde).map_err(|e| Error::Stratum {
                stratum: i + 1,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_inner_beta = h.strata.iter().map(|s| s.beta).fold(h.beta2, f64::max);
    let mut outer = chain(h, h.beta1, worst_inner_beta)?;
    for c in &inner {
        if c.mu_tilde < outer.mu_tilde {
            outer.gamma = c.gamma;
            outer.lambda = c.lambda;
            outer.mu_prime = c.mu_prime;
            outer.mu_tilde = c.mu_tilde;
            outer.lambda_tilde = c.lambda_tilde;
        }
    }
    let d = h.homogeneity() + h.q_exp * outer.mu_prime;
    let gap = (2.0 * outer.gamma.powi(-(h.m_offset as i32 - 1))).powf(d);
    outer.factors.push(Factor {
        name: format!("(2*gamma^-(M-1))^(n+kq+q*mu'), M = {}", h.m_offset),
        value: gap,
    });
    let inner_c = inner.iter().map(|c| c.c).fold(1.0, f64::max);
    outer.factors.push(Factor {
        name: "max inner C".into(),
        value: inner_c,
    });
    outer.c = outer.factors.iter().map(|f| f.value).product();
    outer.strata = inner;
    Ok(outer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_chain() {
        let c = certified_exponent(&DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5)).unwrap();
        assert_eq!(c.gamma, 1.0 / 4096.0);
        assert!((c.lambda - 1.0 / 6.0).abs() <= 1e-15);
        assert!((c.mu_prime - 1.0 / 12.0).abs() <= 1e-15);
        assert!((c.mu_tilde - 1.0 / 12.0).abs() <= 1e-15);
        assert!((c.lambda_tilde - 25.0 / 6.0).abs() <= 1e-15);
    }

    #[test]
    fn vacuous_bound_gives_the_cap() {
        assert_eq!(gamma_select(2, 1, 2.0, 1e-300, 0.5).unwrap(), 0.125);
    }

    #[test]
    fn hopeless_constants_are_rejected() {
        assert!(matches!(gamma_select(2, 1, 2.0, 1e40, 0.01), Err(Error::HypothesisTooWeak)));
    }

    #[test]
    fn epsilon_caps_gamma() {
        let mut h = DecayHypothesis::new(2, 1, 2.0, 1e-300, 0.5);
        h.epsilon = 0.01;
        assert_eq!(certified_exponent(&h).unwrap().gamma, 1.0 / 128.0);
    }
}
