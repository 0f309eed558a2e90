use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aq::{numeric_jacobian, QField};
use crate::error::{Error, Result};

/// Which parts of `z^{p/Q}` a branch power carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    Re,
    Im,
    Both,
}

impl Components {
    pub fn m(self) -> usize {
        match self {
            Components::Both => 2,
            _ => 1,
        }
    }

    fn write(self, w: Complex64, out: &mut [f64]) {
        match self {
            Components::Re => out[0] = w.re,
            Components::Im => out[0] = w.im,
            Components::Both => {
                out[0] = w.re;
                out[1] = w.im;
            }
        }
    }
}

/// `Σ_s ⟦z^{p/Q}⟧` over the Q determinations of the root, with
/// `z = x¹ + i x²`; further coordinates are ignored.
///
/// Branch s is `r^{p/Q} e^{i(p/Q)(θ + 2πs)}` with `θ ∈ (−π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPower {
    pub n: usize,
    pub q: usize,
    pub p: i32,
    pub components: Components,
}

impl BranchPower {
    pub fn new(n: usize, q: usize, p: i32, components: Components) -> Result<Self> {
        if n < 2 || q == 0 || p <= 0 {
            return Err(Error::InvalidParameter(format!(
                "branch power needs n >= 2, Q >= 1, p >= 1 (n = {n}, Q = {q}, p = {p})"
            )));
        }
        Ok(BranchPower { n, q, p, components })
    }

    /// The 2-valued `z^{3/2}` with both components.
    pub fn three_halves(n: usize) -> Self {
        BranchPower::new(n, 2, 3, Components::Both).expect("valid parameters")
    }

    pub fn degree(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    fn branch(&self, x: &[f64], s: usize) -> (Complex64, Complex64) {
        let a = self.degree();
        let z = Complex64::new(x[0], x[1]);
        let r = z.norm();
        if r == 0.0 {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let theta = z.arg() + 2.0 * PI * s as f64;
        let w = Complex64::from_polar(r.powf(a), a * theta);
        (w, a * w / z)
    }
}

impl QField for BranchPower {
    fn dim(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.components.m()
    }
    fn q(&self) -> usize {
        self.q
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m();
        for s in 0..self.q {
            self.components.write(self.branch(x, s).0, &mut out[s * m..(s + 1) * m]);
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        if x[0] == 0.0 && x[1] == 0.0 && self.degree() < 1.0 {
            return false;
        }
        self.eval_into(x, values);
        write_holomorphic_jacobian(self.n, self.q, self.components, jac, |s| self.branch(x, s).1);
        true
    }
}

/// Jacobian rows of `Re w` and `Im w` for holomorphic branches with
/// derivative `dw(s)` with respect to `x¹ + i x²`.
fn write_holomorphic_jacobian(
    n: usize,
    q: usize,
    components: Components,
    jac: &mut [f64],
    dw: impl Fn(usize) -> Complex64,
) {
    jac.iter_mut().for_each(|v| *v = 0.0);
    let m = components.m();
    for s in 0..q {
        let d = dw(s);
        let base = s * m * n;
        let re = [d.re, -d.im];
        let im = [d.im, d.re];
        match components {
            Components::Re => jac[base..base + 2].copy_from_slice(&re),
            Components::Im => jac[base..base + 2].copy_from_slice(&im),
            Components::Both => {
                jac[base..base + 2].copy_from_slice(&re);
                jac[base + n..base + n + 2].copy_from_slice(&im);
            }
        }
    }
}

/// `{±Im (w² + c²)^{3/2}}` with `w = x² + i x¹`: a 2-valued harmonic
/// function on `{x¹ > 0}` vanishing on `{x¹ = 0}`, with branch points at
/// `x = (±c, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTraceBranch {
    pub c: f64,
}

impl ZeroTraceBranch {
    fn root(&self, x: &[f64]) -> (Complex64, Complex64) {
        let w = Complex64::new(x[1], x[0]);
        let g = w * w + self.c * self.c;
        let s = g.sqrt();
        (g * s, 3.0 * s * w)
    }
}

impl QField for ZeroTraceBranch {
    fn dim(&self) -> usize {
        2
    }
    fn m(&self) -> usize {
        1
    }
    fn q(&self) -> usize {
        2
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let v = self.root(x).0.im;
        out[0] = v;
        out[1] = -v;
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        self.eval_into(x, values);
        // d/dx¹ = i·d/dw and d/dx² = d/dw.
        let d = self.root(x).1;
        let row = [(Complex64::i() * d).im, d.im];
        jac[0..2].copy_from_slice(&row);
        jac[2] = -row[0];
        jac[3] = -row[1];
        true
    }
}

/// `Σ_j ⟦a_j x¹⟧` in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTuple {
    pub n: usize,
    pub slopes: Vec<f64>,
}

impl LinearTuple {
    pub fn new(n: usize, slopes: Vec<f64>) -> Result<Self> {
        if n == 0 || slopes.is_empty() {
            return Err(Error::InvalidParameter("linear tuple needs n >= 1 and Q >= 1".into()));
        }
        Ok(LinearTuple { n, slopes })
    }

    /// Slopes shifted to sum to zero.
    pub fn balanced(n: usize, slopes: Vec<f64>) -> Result<Self> {
        let mean = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
        Self::new(n, slopes.into_iter().map(|a| a - mean).collect())
    }
}

impl QField for LinearTuple {
    fn dim(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        1
    }
    fn q(&self) -> usize {
        self.slopes.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.slopes) {
            *o = a * x[0];
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        self.eval_into(x, values);
        jac.iter_mut().for_each(|v| *v = 0.0);
        for (s, a) in self.slopes.iter().enumerate() {
            jac[s * self.n] = *a;
        }
        true
    }
}

/// `Σ_j ⟦s_j |x − c|⟧`: homogeneous of degree one about `c`, not harmonic.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    pub center: Vec<f64>,
    pub scales: Vec<f64>,
}

impl QField for Cone {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn m(&self) -> usize {
        1
    }
    fn q(&self) -> usize {
        self.scales.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let r = crate::domain::dist2(x, &self.center).sqrt();
        for (o, s) in out.iter_mut().zip(&self.scales) {
            *o = s * r;
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        let r = crate::domain::dist2(x, &self.center).sqrt();
        if r == 0.0 {
            return false;
        }
        self.eval_into(x, values);
        let n = self.dim();
        for (b, s) in self.scales.iter().enumerate() {
            for j in 0..n {
                jac[b * n + j] = s * (x[j] - self.center[j]) / r;
            }
        }
        true
    }
}

/// `Σ_i ⟦f + g_i⟧` for a single-valued `f` and a Q-valued `g`.
#[derive(Clone)]
pub struct SumOf {
    pub single: Arc<dyn QField>,
    pub multi: Arc<dyn QField>,
}

impl SumOf {
    pub fn new(single: Arc<dyn QField>, multi: Arc<dyn QField>) -> Result<Self> {
        if single.q() != 1 || single.m() != multi.m() || single.dim() != multi.dim() {
            return Err(Error::dims(
                format!("single-valued field with m = {}, n = {}", multi.m(), multi.dim()),
                format!("Q = {}, m = {}, n = {}", single.q(), single.m(), single.dim()),
            ));
        }
        Ok(SumOf { single, multi })
    }
}

impl QField for SumOf {
    fn dim(&self) -> usize {
        self.multi.dim()
    }
    fn m(&self) -> usize {
        self.multi.m()
    }
    fn q(&self) -> usize {
        self.multi.q()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.multi.eval_into(x, out);
        let f = self.single.eval(x);
        for b in out.chunks_exact_mut(self.m()) {
            b.iter_mut().zip(&f).for_each(|(v, a)| *v += a);
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        let (m, n) = (self.m(), self.dim());
        let mut fv = vec![0.0; m];
        let mut fj = vec![0.0; m * n];
        if !self.single.jacobian_into(x, &mut fv, &mut fj) || !self.multi.jacobian_into(x, values, jac) {
            return false;
        }
        for b in values.chunks_exact_mut(m) {
            b.iter_mut().zip(&fv).for_each(|(v, a)| *v += a);
        }
        for b in jac.chunks_exact_mut(m * n) {
            b.iter_mut().zip(&fj).for_each(|(v, a)| *v += a);
        }
        true
    }
}

/// Single-valued `Re z^d` (or `Im`), with `z = x¹ + i x²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub n: usize,
    pub degree: u32,
    pub imaginary: bool,
}

impl QField for Monomial {
    fn dim(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        1
    }
    fn q(&self) -> usize {
        1
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let w = Complex64::new(x[0], x[1]).powu(self.degree);
        out[0] = if self.imaginary { w.im } else { w.re };
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        self.eval_into(x, values);
        let z = Complex64::new(x[0], x[1]);
        let d = if self.degree == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.degree as f64 * z.powu(self.degree - 1)
        };
        let comp = if self.imaginary { Components::Im } else { Components::Re };
        write_holomorphic_jacobian(self.n, 1, comp, jac, |_| d);
        true
    }
}

/// Odd reflection across `{x¹ = 0}`: `F(x) = f(x)` for `x¹ ≥ 0` and
/// `F(x) = −f(−x¹, x²,…)` otherwise, branchwise.
#[derive(Clone)]
pub struct Reflected {
    pub inner: Arc<dyn QField>,
}

fn mirror(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    y[0] = -y[0];
    y
}

impl QField for Reflected {
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
        if x[0] >= 0.0 {
            self.inner.eval_into(x, out);
        } else {
            self.inner.eval_into(&mirror(x), out);
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        if x[0] >= 0.0 {
            return self.inner.jacobian_into(x, values, jac);
        }
        if !self.inner.jacobian_into(&mirror(x), values, jac) {
            return false;
        }
        values.iter_mut().for_each(|v| *v = -*v);
        let n = self.dim();
        for (idx, v) in jac.iter_mut().enumerate() {
            if idx % n != 0 {
                *v = -*v;
            }
        }
        true
    }
}

/// Reflects `f` after checking that its trace on `{x¹ = 0}` vanishes at
/// the given wall points (first coordinate ignored).
pub fn odd_reflection(f: Arc<dyn QField>, wall: &[Vec<f64>], tol: f64) -> Result<Reflected> {
    let mut max_trace: f64 = 0.0;
    for p in wall {
        let mut x = p.clone();
        x[0] = 0.0;
        let v = f.eval(&x);
        max_trace = max_trace.max(v.iter().map(|a| a * a).sum::<f64>().sqrt());
    }
    if max_trace > tol {
        return Err(Error::NonZeroTrace { max_trace, tol });
    }
    Ok(Reflected { inner: f })
}

/// Values and Jacobians at `x`: exact when the field provides them,
/// otherwise central differences with step `h`.
pub fn jacobian_at(u: &dyn QField, x: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (q, m, n) = (u.q(), u.m(), u.dim());
    let mut values = vec![0.0; q * m];
    let mut jac = vec![0.0; q * m * n];
    if u.jacobian_into(x, &mut values, &mut jac) {
        return Ok((values, jac));
    }
    numeric_jacobian(u, x, h, None)
}
