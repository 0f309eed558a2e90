//! Certified Hölder exponents from stratified decay hypotheses, and numerical
//! audits of those hypotheses on sampled data.

mod audit;
mod certificate;

pub use audit::{audit_hypothesis, AuditConfig, AuditReport, Stratification, Violation, Which};
pub use certificate::{
    certified_exponent, certified_exponent_stratified, gamma_select, AuditSummary, DecayHypothesis,
    Factor, HolderCertificate, StratumConstants,
};

use serde::{Deserialize, Serialize};

use crate::aq::SampledQFunction;
use crate::campanato::{decay_exponent, Ladder};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub audit: AuditConfig,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Ladder for the measured exponent at each soundness center.
    pub ladder: Ladder,
    /// At most this many centers enter the soundness check.
    pub soundness_centers: usize,
    pub soundness_fraction: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            audit: AuditConfig::default(),
            beta1: 1.0,
            beta2: 1.0,
            epsilon: 0.2,
            ladder: Ladder::new(0.5, 6),
            soundness_centers: 12,
            soundness_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessCheck {
    pub centers: Vec<Vec<f64>>,
    /// Measured exponent per center; `None` for an exact fit at every rung.
    pub lambda_hat: Vec<Option<f64>>,
    /// Centers where the ladder had too few usable rungs.
    pub unmeasured: usize,
    pub fraction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CertifyOutcome {
    Certified {
        certificate: HolderCertificate,
        soundness: SoundnessCheck,
    },
    Refused {
        audit: AuditReport,
    },
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&HolderCertificate> {
        match self {
            CertifyOutcome::Certified { certificate, .. } => Some(certificate),
            CertifyOutcome::Refused { .. } => None,
        }
    }
}

/// Builds the hypothesis from a claimed exponent and the default constants,
/// then runs [`certify_hypothesis`].
pub fn end_to_end_certify(
    u: &SampledQFunction,
    s: &Stratification,
    k: u32,
    q_exp: f64,
    mu_claim: f64,
    cfg: &CertifyConfig,
) -> Result<CertifyOutcome> {
    let mut h = DecayHypothesis::new(u.n(), k, q_exp, cfg.beta1, mu_claim);
    h.beta2 = cfg.beta2;
    h.epsilon = cfg.epsilon;
    h.strata = s
        .strata
        .iter()
        .map(|_| StratumConstants {
            beta: cfg.beta1,
            beta_tilde: cfg.beta2,
        })
        .collect();
    certify_hypothesis(std::slice::from_ref(u), s, &h, cfg)
}

/// Audits every hypothesis of the chain; refuses on any violation, else
/// issues the certificate and compares `λ̃` with the measured exponent at
/// the stratum points and a spread of off-stratum centers.
pub fn certify_hypothesis(
    components: &[SampledQFunction],
    s: &Stratification,
    h: &DecayHypothesis,
    cfg: &CertifyConfig,
) -> Result<CertifyOutcome> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidParameter("no sampled components".into()))?;
    let whiches: &[Which] = if s.strata.is_empty() {
        &[Which::I, Which::II]
    } else {
        &[Which::I, Which::II, Which::III]
    };
    let mut report = AuditReport::default();
    for &w in whiches {
        report.merge(audit_hypothesis(components, h, s, w, &cfg.audit)?);
    }
    if !report.clean() {
        return Ok(CertifyOutcome::Refused { audit: report });
    }
    let mut certificate = if s.strata.is_empty() {
        certified_exponent(h)?
    } else {
        certified_exponent_stratified(h)?
    };
    certificate.audit = AuditSummary {
        checked: report.checked,
        violations: Vec::new(),
    };
    let centers = soundness_centers(first, s, cfg);
    let rows = par::map_slice(&centers, |x| {
        components
            .iter()
            .map(|u| decay_exponent(u, x, h.k, h.q_exp, &cfg.ladder, &cfg.audit.fit))
            .collect::<Vec<_>>()
    });
    let mut lambda_hat = Vec::with_capacity(centers.len());
    let (mut sound, mut measured, mut unmeasured) = (0usize, 0usize, 0usize);
    for row in rows {
        let mut worst: Option<Option<f64>> = None;
        for fit in row {
            match fit {
                Ok(f) => {
                    let v = f.lambda_hat;
                    worst = Some(match (worst, v) {
                        (None, v) => v,
                        (Some(None), v) => v,
                        (Some(Some(a)), Some(b)) => Some(a.min(b)),
                        (Some(Some(a)), None) => Some(a),
                    });
                }
                Err(Error::TooFewRungs { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        match worst {
            None => unmeasured += 1,
            Some(v) => {
                measured += 1;
                if v.map_or(true, |l| certificate.lambda_tilde <= l) {
                    sound += 1;
                }
            }

        }
        lambda_hat.push(worst.flatten());
    }
    let fraction = if measured == 0 {
        0.0
    } else {
        sound as f64 / measured as f64
    };
    let soundness = SoundnessCheck {
        centers,
        lambda_hat,
        unmeasured,
        fraction,
        passed: measured > 0 && fraction >= cfg.soundness_fraction,
    };
    Ok(CertifyOutcome::Certified {
        certificate,
        soundness,
    })
}

/// Stratum points first, then audit off-points spread by a fixed stride.
fn soundness_centers(u: &SampledQFunction, s: &Stratification, cfg: &CertifyConfig) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = s.gamma0.iter().chain(s.strata.iter().flatten()).cloned().collect();
    out.truncate(cfg.soundness_centers);
    let room = cfg.soundness_centers.saturating_sub(out.len());
    if room > 0 {
        let off = match &cfg.audit.off_points {
            Some(p) => p.clone(),
            None => audit::lattice_points(u, cfg.audit.off_spacing.max(0.25)),
        };
        let stride = (off.len() / room).max(1);
        out.extend(off.into_iter().step_by(stride).take(room));
    }
    out
}
