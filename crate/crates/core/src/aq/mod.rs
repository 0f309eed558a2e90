//! The metric space A_Q(R^m), Q-valued fields, and sampled Q-valued functions.

mod diff;
mod point;
mod sampled;

pub use diff::{lebesgue_point_profile, numeric_derivative, numeric_jacobian, LebesgueProfile};
pub use point::{brute_force_metric, metric_g, optimal_matching, AqPoint};
pub use sampled::{order_branches, translate_add, SampledQFunction};

pub(crate) use point::{lex_cmp, match_flat, min_gap};

/// A Q-valued function R^n → A_Q(R^m) that can be evaluated anywhere.
///
/// Values are written branch after branch (`Q·m` numbers). Branch order is
/// arbitrary, but [`QField::jacobian_into`] must report values and Jacobians
/// in the same order so that each Jacobian belongs to its branch.
pub trait QField: Send + Sync {
    /// Dimension n of the domain.
    fn dim(&self) -> usize;
    /// Dimension m of each branch value.
    fn m(&self) -> usize;
    /// Number of branches Q.
    fn q(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    /// Fills `values` (Q·m) and `jac` (Q·m·n, row-major m×n per branch) and
    /// returns true, or returns false when no exact derivative is available.
    fn jacobian_into(&self, _x: &[f64], _values: &mut [f64], _jac: &mut [f64]) -> bool {
        false
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q() * self.m()];
        self.eval_into(x, &mut out);
        out
    }

    fn value(&self, x: &[f64]) -> AqPoint {
        AqPoint::new(self.q(), self.m(), self.eval(x)).expect("field shape is valid")
    }
}

impl<T: QField + ?Sized> QField for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn m(&self) -> usize {
        (**self).m()
    }
    fn q(&self) -> usize {
        (**self).q()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).eval_into(x, out)
    }
    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        (**self).jacobian_into(x, values, jac)
    }
}

/// A [`QField`] backed by a closure writing `Q·m` values.
pub struct ClosureField<F> {
    n: usize,
    q: usize,
    m: usize,
    f: F,
}

impl<F> ClosureField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(n: usize, q: usize, m: usize, f: F) -> Self {
        ClosureField { n, q, m, f }
    }
}

impl<F> QField for ClosureField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.m
    }
    fn q(&self) -> usize {
        self.q
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}
