use std::fmt;
use std::sync::Arc;

use super::{AqPoint, QField};
use crate::domain::QuadratureGrid;
use crate::error::{Error, Result};
use crate::par;

/// A Q-valued function known on the points of a quadrature grid.
///
/// Optionally carries the closed-form field it was sampled from, which is
/// then used for off-grid evaluation and exact derivatives.
#[derive(Clone)]
pub struct SampledQFunction {
    grid: QuadratureGrid,
    q: usize,
    m: usize,
    values: Vec<f64>,
    source: Option<Arc<dyn QField>>,
}

impl fmt::Debug for SampledQFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledQFunction")
            .field("samples", &self.grid.len())
            .field("n", &self.grid.dim())
            .field("m", &self.m)
            .field("q", &self.q)
            .field("exact_source", &self.source.is_some())
            .finish()
    }
}

impl SampledQFunction {
    /// `values` holds `Q·m` numbers per grid point, grouped by branch.
    pub fn new(grid: QuadratureGrid, q: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if q == 0 || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "Q and m must be positive (Q = {q}, m = {m})"
            )));
        }
        if values.len() != grid.len() * q * m {
            return Err(Error::dims(grid.len() * q * m, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sample value".into()));
        }
        Ok(SampledQFunction {
            grid,
            q,
            m,
            values,
            source: None,
        })
    }

    /// Samples `field` on every grid point and remembers it as exact source.
    pub fn from_field(grid: QuadratureGrid, field: Arc<dyn QField>) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::dims(grid.dim(), field.dim()));
        }
        let rows = par::map_range(grid.len(), |i| field.eval(grid.point(i)));
        let mut s = Self::new(grid, field.q(), field.m(), rows.concat())?;
        s.source = Some(field);
        Ok(s)
    }

    pub fn with_source(mut self, field: Arc<dyn QField>) -> Self {
        self.source = Some(field);
        self
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.grid.dim()
    }

    pub fn exact_source(&self) -> Option<&Arc<dyn QField>> {
        self.source.as_ref()
    }

    /// Raw branch values at sample `i`, in stored order.
    pub fn raw(&self, i: usize) -> &[f64] {
        let w = self.q * self.m;
        &self.values[i * w..(i + 1) * w]
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> AqPoint {
        AqPoint::new(self.q, self.m, self.raw(i).to_vec()).expect("validated shape")
    }

    /// Samples within the closed ball, with the same exact source.
    pub fn restrict(&self, center: &[f64], radius: f64) -> Result<Self> {
        let sub = self.grid.restrict(center, radius)?;
        let idx = self.grid.ball_indices(center, radius);
        Ok(self.reindexed(sub, &idx))
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        self.reindexed(self.grid.subset(idx), idx)
    }

    fn reindexed(&self, grid: QuadratureGrid, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.q * self.m);
        for &i in idx {
            values.extend_from_slice(self.raw(i));
        }
        SampledQFunction {
            grid,
            q: self.q,
            m: self.m,
            values,
            source: self.source.clone(),
        }
    }

    /// Applies `f` to the stored branch values of every sample.
    pub fn map_values(&self, q: usize, m: usize, f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send) -> Result<Self> {
        let rows = par::map_range(self.len(), |i| f(self.grid.point(i), self.raw(i)));
        Self::new(self.grid.clone(), q, m, rows.concat())
    }

    /// Largest |u(x)| over the samples.
    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.raw(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

impl QField for SampledQFunction {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn m(&self) -> usize {
        self.m
    }

    fn q(&self) -> usize {
        self.q
    }

    /// Exact source when present, otherwise the nearest sample.
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.source {
            Some(f) => f.eval_into(x, out),
            None => {
                let i = self.grid.nearest(x).expect("non-empty grid");
                out.copy_from_slice(self.raw(i));
            }
        }
    }

    fn jacobian_into(&self, x: &[f64], values: &mut [f64], jac: &mut [f64]) -> bool {
        match &self.source {
            Some(f) => f.jacobian_into(x, values, jac),
            None => false,
        }
    }
}

/// Pointwise `Σ ⟦f(x) + gᵢ(x)⟧` for a single-valued `f`.
pub fn translate_add(
    f: impl Fn(&[f64]) -> Vec<f64> + Sync + Send,
    g: &SampledQFunction,
) -> Result<SampledQFunction> {
    let (q, m) = (g.q, g.m);
    if let Some(x) = (g.len() > 0).then(|| g.grid.point(0)) {
        let probe = f(x).len();
        if probe != m {
            return Err(Error::dims(m, probe));
        }
    }
    g.map_values(q, m, |x, v| {
        let shift = f(x);
        v.chunks_exact(m)
            .flat_map(|b| b.iter().zip(&shift).map(|(a, s)| a + s))
            .collect()
    })
}

/// Sorts the branches of a scalar (m = 1) function in descending order at
/// every sample: ũ₁ ≥ ũ₂ ≥ … ≥ ũ_Q.
pub fn order_branches(u: &SampledQFunction) -> Result<SampledQFunction> {
    if u.m != 1 {
        return Err(Error::NotScalar(u.m));
    }
    let mut out = u.clone();
    for row in out.values.chunks_exact_mut(u.q) {
        row.sort_by(|a, b| b.total_cmp(a));
    }
    Ok(out)
}
