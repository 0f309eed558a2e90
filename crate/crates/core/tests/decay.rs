use std::sync::Arc;

use qvalued::decay::*;
use qvalued::harmonic::BranchPower;
use qvalued::{ClosureField, Domain, Error, SampledQFunction};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * a.abs().max(b.abs()).max(1.0)
}

/// Independent restatement of the exponent chain in logarithmic form.
struct Chain {
    gamma: f64,
    lambda: f64,
    mu_prime: f64,
    mu_tilde: f64,
    lambda_tilde: f64,
}

fn oracle(n: usize, k: u32, q: f64, beta1: f64, mu: f64) -> Option<Chain> {
    let ln_bound = (n as f64 + k as f64 * q) * 4f64.ln() + beta1.ln();
    let t = (3..=64).find(|&t| {
        let g = 2f64.powi(-t);
        ln_bound + q * mu * (2.0 * g / (1.0 - g)).ln() < 0.25f64.ln()
    })?;
    let gamma = 2f64.powi(-t);
    let lambda = 0.25f64.ln() / gamma.ln();
    let mu_prime = if mu < lambda / q { mu } else { lambda / q };
    let mu_tilde = if lambda < mu_prime { lambda } else { mu_prime };
    Some(Chain {
        gamma,
        lambda,
        mu_prime,
        mu_tilde,
        lambda_tilde: n as f64 + q * (k as f64 + mu_tilde),
    })
}

fn sample(h: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> SampledQFunction {
    let grid = Domain::unit_ball(2).sample(h).unwrap();
    let field = ClosureField::new(2, 1, 1, move |x: &[f64], o: &mut [f64]| o[0] = f(x));
    SampledQFunction::from_field(grid, Arc::new(field)).unwrap()
}

#[test]
fn golden_certificate_chain() {
    let c = certified_exponent(&DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5)).unwrap();
    assert_eq!(c.gamma, 2f64.powi(-12));
    assert!(close(c.lambda, 1.0 / 6.0));
    assert!(close(c.mu_prime, 1.0 / 12.0));
    assert!(close(c.mu_tilde, 1.0 / 12.0));
    assert!(close(c.lambda_tilde, 25.0 / 6.0));
    let product: f64 = c.factors.iter().map(|f| f.value).product();
    assert!(close(c.c, product));
}

#[test]
fn pinned_tuples_match_the_logarithmic_oracle() {
    let tuples: [(usize, u32, f64, f64, f64); 20] = [
        (2, 1, 2.0, 1.0, 0.5),
        (2, 0, 2.0, 1.0, 0.5),
        (2, 1, 2.0, 0.1, 0.5),
        (2, 1, 2.0, 10.0, 0.5),
        (2, 1, 1.0, 1.0, 0.5),
        (2, 2, 2.0, 1.0, 0.9),
        (3, 1, 2.0, 1.0, 0.5),
        (1, 1, 2.0, 1.0, 0.25),
        (1, 0, 1.0, 1.0, 0.75),
        (2, 1, 3.0, 1.0, 0.3),
        (2, 1, 2.0, 1e-6, 0.99),
        (2, 1, 2.0, 1e3, 0.6),
        (4, 0, 2.0, 0.5, 0.4),
        (2, 3, 1.5, 1.0, 0.5),
        (1, 2, 2.5, 2.0, 0.3),
        (3, 0, 1.0, 0.01, 0.05),
        (2, 1, 2.0, 1.0, 0.2),
        (2, 0, 4.0, 1.0, 0.7),
        (5, 1, 1.0, 1.0, 0.5),
        (2, 2, 1.25, 0.2, 0.35),
    ];
    for (n, k, q, b, mu) in tuples {
        let want = oracle(n, k, q, b, mu).expect("oracle finds a gamma");
        let h = DecayHypothesis::new(n, k, q, b, mu);
        let got = certified_exponent(&h).unwrap();
        let ctx = format!("({n},{k},{q},{b},{mu})");
        assert_eq!(got.gamma, want.gamma, "{ctx}");
        assert_eq!(gamma_select(n, k, q, b, mu).unwrap(), want.gamma, "{ctx}");
        assert!(close(got.lambda, want.lambda), "{ctx}");
        assert!(close(got.mu_prime, want.mu_prime), "{ctx}");
        assert!(close(got.mu_tilde, want.mu_tilde), "{ctx}");
        assert!(close(got.lambda_tilde, want.lambda_tilde), "{ctx}");
    }
}

#[test]
fn vanishing_constant_selects_the_cap() {
    assert_eq!(gamma_select(2, 1, 2.0, f64::MIN_POSITIVE, 0.5).unwrap(), 0.125);
}

#[test]
fn enormous_constant_is_too_weak() {
    assert!(matches!(gamma_select(2, 1, 2.0, 1e40, 0.01), Err(Error::HypothesisTooWeak)));
}

#[test]
fn exponent_does_not_improve_with_larger_constants() {
    for mu in [0.1, 0.5, 0.9] {
        let mut last = f64::INFINITY;
        for e in -6..=6 {
            let b = 10f64.powi(e);
            let Ok(c) = certified_exponent(&DecayHypothesis::new(2, 1, 2.0, b, mu)) else {
                // Once too weak, every larger constant is too weak as well.
                assert!(certified_exponent(&DecayHypothesis::new(2, 1, 2.0, 10.0 * b, mu)).is_err());
                break;
            };
            assert!(c.lambda_tilde <= last + 1e-15, "mu {mu}, beta {b}");
            assert!(c.mu_tilde <= mu && c.mu_tilde <= c.lambda);
            last = c.lambda_tilde;
        }
    }
}

#[test]
fn invalid_hypotheses_are_rejected() {
    for mu in [0.0, 1.0, 1.5, -0.2] {
        let h = DecayHypothesis::new(2, 1, 2.0, 1.0, mu);
        assert!(matches!(certified_exponent(&h), Err(Error::InvalidParameter(_))));
    }
    let mut h = DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5);
    h.epsilon = 0.3;
    assert!(certified_exponent(&h).is_err());
}

#[test]
fn one_stratum_never_beats_the_unstratified_exponent() {
    for (b, mu) in [(1.0, 0.5), (0.1, 0.9), (30.0, 0.2), (1e-4, 0.6)] {
        let plain = certified_exponent(&DecayHypothesis::new(2, 1, 2.0, b, mu)).unwrap();
        let mut h = DecayHypothesis::new(2, 1, 2.0, b, mu);
        h.strata = vec![StratumConstants { beta: b, beta_tilde: b }];
        let strat = certified_exponent_stratified(&h).unwrap();
        assert!(strat.lambda_tilde <= plain.lambda_tilde + 1e-15);
        assert!(strat.c >= plain.c);
        assert_eq!(strat.strata.len(), 1);
    }
}

#[test]
fn symmetric_strata_match_a_single_stratum() {
    let mut one = DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5);
    one.strata = vec![StratumConstants { beta: 1.0, beta_tilde: 1.0 }];
    let mut two = one.clone();
    two.strata.push(StratumConstants { beta: 1.0, beta_tilde: 1.0 });
    let a = certified_exponent_stratified(&one).unwrap();
    let b = certified_exponent_stratified(&two).unwrap();
    assert_eq!(a.mu_tilde, b.mu_tilde);
    assert_eq!(a.lambda_tilde, b.lambda_tilde);
    assert!(close(a.lambda_tilde, 25.0 / 6.0));
}

#[test]
fn failing_stratum_is_named() {
    let mut h = DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5);
    h.strata = vec![
        StratumConstants { beta: 1.0, beta_tilde: 1.0 },
        StratumConstants { beta: 1e40, beta_tilde: 1.0 },
    ];
    match certified_exponent_stratified(&h) {
        Err(Error::Stratum { stratum, .. }) => assert_eq!(stratum, 2),
        other => panic!("expected a stratum error, got {other:?}"),
    }
}

#[test]
fn stratum_overlapping_stratum_zero_is_invalid() {
    let s = Stratification {
        gamma0: vec![vec![0.0, 0.0]],
        strata: vec![vec![vec![0.5, 0.0], vec![0.0, 0.0]]],
    };
    assert!(s.validate(2).is_err());
    assert!(Stratification::single(vec![]).validate(2).is_err());
    assert!(Stratification::single(vec![vec![0.0]]).validate(2).is_err());
    assert!(Stratification::single(vec![vec![0.0, 0.0]]).validate(2).is_ok());
}

#[test]
fn polynomial_data_audits_clean() {
    let u = sample(1.0 / 64.0, |x| 1.0 + 2.0 * x[0] - x[1]);
    let h = DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5);
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    for w in [Which::I, Which::II] {
        let r = audit_hypothesis(std::slice::from_ref(&u), &h, &s, w, &AuditConfig::default()).unwrap();
        assert!(r.checked > 0);
        assert!(r.clean(), "{w:?}: {:?}", r.violations.first());
    }
}

#[test]
fn slowly_decaying_data_violates_the_claim() {
    let u = sample(1.0 / 128.0, |x| (x[0] * x[0] + x[1] * x[1]).powf(0.05));
    let h = DecayHypothesis::new(2, 0, 2.0, 1.0, 0.9);
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    let r = audit_hypothesis(std::slice::from_ref(&u), &h, &s, Which::I, &AuditConfig::default()).unwrap();
    assert!(!r.violations.is_empty());
    let smallest = r.violations.iter().map(|v| v.sigma).fold(f64::INFINITY, f64::min);
    assert!(smallest < 0.1, "violations only at coarse scales: {smallest}");
    assert!(r.violations.iter().all(|v| v.ratio > 1.05));
}

#[test]
fn too_coarse_grid_has_no_admissible_pairs() {
    let u = sample(0.25, |x| x[0]);
    let h = DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5);
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    let r = audit_hypothesis(std::slice::from_ref(&u), &h, &s, Which::I, &AuditConfig::default());
    assert!(matches!(r, Err(Error::NoAdmissiblePairs)), "{r:?}");
}

#[test]
fn polynomial_data_is_certified() {
    let u = sample(1.0 / 64.0, |x| x[0] * x[1] - 0.5 * x[0]);
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    let out = end_to_end_certify(&u, &s, 2, 2.0, 0.5, &CertifyConfig::default()).unwrap();
    let CertifyOutcome::Certified { certificate, soundness } = out else {
        panic!("polynomial data refused");
    };
    assert!(certificate.audit.violations.is_empty());
    assert!(certificate.audit.checked > 0);
    assert!(soundness.passed);
}

#[test]
fn branch_power_is_certified_below_its_measured_exponent() {
    let grid = Domain::unit_ball(2).sample(1.0 / 128.0).unwrap();
    let u = SampledQFunction::from_field(grid, Arc::new(BranchPower::three_halves(2))).unwrap();
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    let out = end_to_end_certify(&u, &s, 1, 2.0, 0.5, &CertifyConfig::default()).unwrap();
    let CertifyOutcome::Certified { certificate, soundness } = out else {
        panic!("branch power refused");
    };
    assert!(close(certificate.lambda_tilde, 25.0 / 6.0));
    let at_origin = soundness.lambda_hat[0].expect("measured at the branch point");
    assert!((at_origin - 5.0).abs() < 0.25, "{at_origin}");
    assert!(soundness.fraction >= 0.95);
}

#[test]
fn broken_data_is_refused() {
    let u = sample(1.0 / 128.0, |x| (x[0] * x[0] + x[1] * x[1]).powf(0.05));
    let s = Stratification::single(vec![vec![0.0, 0.0]]);
    let out = end_to_end_certify(&u, &s, 0, 2.0, 0.9, &CertifyConfig::default()).unwrap();
    match out {
        CertifyOutcome::Refused { audit } => assert!(!audit.violations.is_empty()),
        CertifyOutcome::Certified { .. } => panic!("broken data certified"),
    }
}

#[test]
fn certificate_serializes_with_named_constant() {
    let c = certified_exponent(&DecayHypothesis::new(2, 1, 2.0, 1.0, 0.5)).unwrap();
    let v = serde_json::to_value(&c).unwrap();
    assert!(v.get("C").is_some());
    assert!(v.get("strata").is_none());
    let back: HolderCertificate = serde_json::from_value(v).unwrap();
    assert_eq!(back, c);
}
