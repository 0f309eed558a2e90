use serde::Serialize;

use super::{match_flat, min_gap, AqPoint, QField, SampledQFunction};
use crate::domain::unit_ball_volume;
use crate::error::{Error, Result};
use crate::par;

/// Default separability threshold: `1e-6` times the local value scale.
pub(crate) fn default_gap_tol(values: &[f64], m: usize) -> f64 {
    let scale = values
        .chunks_exact(m)
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    1e-6 * scale
}

/// Central-difference Jacobians at `x0`, aligned with the branch order of
/// `u.eval(x0)`.
///
/// Returns `(values, jac)` where `jac` holds one row-major m×n block per
/// branch. Branches at `x0 ± h·e_j` are tracked by optimal matching against
/// the values at `x0`, which requires the branches at `x0` to be separated by
/// more than `gap_tol` (default `1e-6` times the largest branch norm).
pub fn numeric_jacobian(
    u: &dyn QField,
    x0: &[f64],
    h: f64,
    gap_tol: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m, q) = (u.dim(), u.m(), u.q());
    if x0.len() != n {
        return Err(Error::dims(n, x0.len()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h}")));
    }
    let base = u.eval(x0);
    if q > 1 {
        let tol = gap_tol.unwrap_or_else(|| default_gap_tol(&base, m));
        let gap = min_gap(&base, q, m);
        if gap <= tol {
            return Err(Error::BranchAmbiguity { gap, tol });
        }
    }
    let mut jac = vec![0.0; q * m * n];
    let mut xp = x0.to_vec();
    let mut xm = x0.to_vec();
    for j in 0..n {
        xp[j] = x0[j] + h;
        xm[j] = x0[j] - h;
        let plus = u.eval(&xp);
        let minus = u.eval(&xm);
        xp[j] = x0[j];
        xm[j] = x0[j];
        let (sp, _) = match_flat(&base, &plus, q, m);
        let (sm, _) = match_flat(&base, &minus, q, m);
        for i in 0..q {
            for c in 0..m {
                jac[(i * m + c) * n + j] =
                    (plus[sp[i] * m + c] - minus[sm[i] * m + c]) / (2.0 * h);
            }
        }
    }
    Ok((base, jac))
}

/// The Q matrices Aᵢ ∈ R^{m×n} of the first-order expansion at `x0`, as a
/// point of A_Q(R^{m·n}) (row-major blocks).
///
/// `x0` should sit at least `2h` inside the region where `u` is meaningful.
pub fn numeric_derivative(
    u: &dyn QField,
    x0: &[f64],
    h: f64,
    gap_tol: Option<f64>,
) -> Result<AqPoint> {
    let (_, jac) = numeric_jacobian(u, x0, h, gap_tol)?;
    AqPoint::new(u.q(), u.m() * u.dim(), jac)
}

/// Averages `(ω_n ρ^n)⁻¹ ∫_{B_ρ(x0)} G(u, u(x0))^q` along a radius ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LebesgueProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when rungs below the grid resolution were dropped.
    pub truncated: bool,
}

pub fn lebesgue_point_profile(
    u: &SampledQFunction,
    x0: &[f64],
    q_exp: f64,
    radii: &[f64],
) -> Result<LebesgueProfile> {
    let n = u.n();
    if x0.len() != n {
        return Err(Error::dims(n, x0.len()));
    }
    if !(q_exp >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent {q_exp} < 1")));
    }
    let (q, m) = (u.q(), u.m());
    let center = u.eval(x0);
    let h = u.grid().resolution();
    let usable: Vec<f64> = radii.iter().copied().filter(|&r| r > 2.0 * h).collect();
    let truncated = usable.len() < radii.len();
    if truncated {
        log::warn!(
            "lebesgue profile: dropped {} rung(s) below resolution {h}",
            radii.len() - usable.len()
        );
    }
    let mut values = Vec::with_capacity(usable.len());
    for &rho in &usable {
        let idx = u.grid().ball_indices(x0, rho);
        let integral = par::sum_slice(&idx, |&i| {
            let d2 = match_flat(u.raw(i), &center, q, m).1;
            u.grid().weight(i) * d2.powf(0.5 * q_exp)
        });
        values.push(integral / (unit_ball_volume(n) * rho.powi(n as i32)));
    }
    Ok(LebesgueProfile {
        radii: usable,
        values,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aq::{metric_g, ClosureField};
    use crate::domain::Domain;
    use num_complex::Complex64;
    use std::sync::Arc;

    #[test]
    fn linear_gradient_is_exact() {
        let f = ClosureField::new(3, 1, 1, |x, out| out[0] = 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2] + 1.0);
        let d = numeric_derivative(&f, &[0.3, -0.2, 0.7], 1e-3, None).unwrap();
        let expect = [2.0, -3.0, 0.5];
        for (a, b) in d.branch(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_pair_derivatives() {
        let f = ClosureField::new(2, 2, 1, |x, out| {
            out[0] = x[0];
            out[1] = -x[0];
        });
        let d = numeric_derivative(&f, &[0.5, 0.1], 1e-3, None).unwrap();
        let expect = AqPoint::new(2, 2, vec![1.0, 0.0, -1.0, 0.0]).unwrap();
        assert!(metric_g(&d, &expect).unwrap() < 1e-10);
    }

    #[test]
    fn three_halves_power_matches_closed_form() {
        let f = ClosureField::new(2, 2, 1, |x, out| {
            let w = Complex64::new(x[0], x[1]).powf(1.5);
            out[0] = w.re;
            out[1] = -w.re;
        });
        let x0 = [1.0, 0.0];
        let d = numeric_derivative(&f, &x0, 1e-4, None).unwrap();
        // d/dz z^{3/2} = (3/2) z^{1/2}; for U = Re w, DU = (Re w', -Im w').
        let wp = Complex64::new(1.0, 0.0).sqrt() * 1.5;
        let exact = AqPoint::new(2, 2, vec![wp.re, -wp.im, -wp.re, wp.im]).unwrap();
        assert!(metric_g(&d, &exact).unwrap() < 1e-6);
        // First-order model check along each axis.
        let base = f.value(&x0);
        for j in 0..2 {
            let h = 1e-4;
            let mut x = x0;
            x[j] += h;
            let model: Vec<f64> = (0..2)
                .map(|i| base.branch(i)[0] + h * d.branch(i)[j])
                .collect();
            let err = metric_g(&f.value(&x), &AqPoint::new(2, 1, model).unwrap()).unwrap();
            assert!(err / h < 1e-3);
        }
    }

    #[test]
    fn branch_point_is_ambiguous() {
        let f = ClosureField::new(2, 2, 1, |x, out| {
            out[0] = x[0] * x[0];
            out[1] = -x[0] * x[0];
        });
        assert!(matches!(
            numeric_derivative(&f, &[0.0, 0.3], 1e-4, None),
            Err(Error::BranchAmbiguity { .. })
        ));
    }

    #[test]
    fn constant_profile_vanishes() {
        let grid = Domain::unit_ball(2).sample(1.0 / 32.0).unwrap();
        let u = SampledQFunction::new(grid.clone(), 2, 1, vec![1.0; 2 * grid.len()]).unwrap();
        let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &[0.5, 0.25, 0.125]).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(!p.truncated);
    }

    #[test]
    fn lipschitz_profile_bound() {
        let grid = Domain::unit_ball(2).sample(1.0 / 128.0).unwrap();
        let lip = 3.0;
        let f = Arc::new(ClosureField::new(2, 1, 1, move |x, out| {
            out[0] = lip * (x[0] * x[0] + x[1] * x[1]).sqrt()
        }));
        let u = SampledQFunction::from_field(grid, f).unwrap();
        let radii = [0.5, 0.25, 0.125, 0.0625];
        let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &radii).unwrap();
        for (r, v) in p.radii.iter().zip(&p.values) {
            assert!(*v <= 1.05 * lip * lip * r * r);
        }
    }

    #[test]
    fn branch_point_profile_slope_three() {
        let grid = Domain::unit_ball(2).sample(1.0 / 256.0).unwrap();
        let f = Arc::new(ClosureField::new(2, 2, 1, |x, out| {
            let w = Complex64::new(x[0], x[1]).powf(1.5);
            out[0] = w.re;
            out[1] = -w.re;
        }));
        let u = SampledQFunction::from_field(grid, f).unwrap();
        let radii = [0.5, 0.25, 0.125, 0.0625];
        let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &radii).unwrap();
        let slope = (p.values[0] / p.values[3]).ln() / (radii[0] / radii[3]).ln();
        assert!((slope - 3.0).abs() < 0.05, "slope {slope}");
        // Closed form: (πρ²)⁻¹ ∫∫ 2 r³ cos²(3θ/2) r dr dθ = (2/5) ρ³.
        let exact = 0.4 * radii[0].powi(3);
        assert!((p.values[0] - exact).abs() / exact < 0.02);
    }

    #[test]
    fn profile_truncates_small_radii() {
        let grid = Domain::unit_ball(2).sample(1.0 / 16.0).unwrap();
        let u = SampledQFunction::new(grid.clone(), 1, 1, vec![0.0; grid.len()]).unwrap();
        let p = lebesgue_point_profile(&u, &[0.0, 0.0], 2.0, &[0.5, 0.01]).unwrap();
        assert!(p.truncated);
        assert_eq!(p.radii, vec![0.5]);
    }
}
