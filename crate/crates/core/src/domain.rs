//! Bounded domains in R^n, midpoint-rule sampling, and the A-weighted
//! mass-ratio estimate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    HalfBall,
    Annulus,
    Box,
}

/// A bounded open domain.
///
/// Half-balls are cut by an axis-aligned hyperplane through the center and
/// keep the side where coordinate `axis` is positive (the x¹-axis by default).
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    HalfBall { center: Vec<f64>, radius: f64, axis: usize },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_ball(n: usize) -> Self {
        Domain::Ball {
            center: vec![0.0; n],
            radius: 1.0,
        }
    }

    pub fn half_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = Domain::HalfBall {
            center,
            radius,
            axis: 0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn annulus(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        let d = Domain::Annulus {
            center,
            inner,
            outer,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn cube(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::DegenerateDomain("dimension 0".into()));
        }
        match self {
            Domain::Ball { radius, .. } | Domain::HalfBall { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::DegenerateDomain(format!("radius {radius}")));
                }
                if let Domain::HalfBall { axis, .. } = self {
                    if *axis >= n {
                        return Err(Error::DegenerateDomain(format!("axis {axis} >= n")));
                    }
                }
            }
            Domain::Annulus { inner, outer, .. } => {
                if !(*inner >= 0.0 && outer > inner && outer.is_finite()) {
                    return Err(Error::DegenerateDomain(format!(
                        "annulus radii ({inner}, {outer})"
                    )));
                }
            }
            Domain::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dims(lower.len(), upper.len()));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
                    return Err(Error::DegenerateDomain("box with empty side".into()));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> DomainKind {
        match self {
            Domain::Ball { .. } => DomainKind::Ball,
            Domain::HalfBall { .. } => DomainKind::HalfBall,
            Domain::Annulus { .. } => DomainKind::Annulus,
            Domain::Box { .. } => DomainKind::Box,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. }
            | Domain::HalfBall { center, .. }
            | Domain::Annulus { center, .. } => center.len(),
            Domain::Box { lower, .. } => lower.len(),
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Ball { center, radius } => dist2(x, center) < radius * radius,
            Domain::HalfBall {
                center,
                radius,
                axis,
            } => x[*axis] > center[*axis] && dist2(x, center) < radius * radius,
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let r2 = dist2(x, center);
                r2 > inner * inner && r2 < outer * outer
            }
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (a, b))| v > a && v < b),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::HalfBall { radius, .. } => {
                // For n >= 2 the flat face has the full diameter.
                if self.dim() >= 2 {
                    2.0 * radius
                } else {
                    *radius
                }
            }
            Domain::Annulus { outer, .. } => 2.0 * outer,
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Domain::Annulus { inner, .. } if *inner > 0.0)
    }

    /// Closed-form n-dimensional measure.
    pub fn measure(&self) -> f64 {
        let n = self.dim();
        match self {
            Domain::Ball { radius, .. } => unit_ball_volume(n) * radius.powi(n as i32),
            Domain::HalfBall { radius, .. } => 0.5 * unit_ball_volume(n) * radius.powi(n as i32),
            Domain::Annulus { inner, outer, .. } => {
                unit_ball_volume(n) * (outer.powi(n as i32) - inner.powi(n as i32))
            }
            Domain::Box { lower, upper } => lower.iter().zip(upper).map(|(a, b)| b - a).product(),
        }
    }

    /// Smallest length scale of the domain (used to bound the resolution).
    pub fn smallest_radius(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } | Domain::HalfBall { radius, .. } => *radius,
            Domain::Annulus { inner, outer, .. } => {
                if *inner > 0.0 {
                    (outer - inner).min(*inner)
                } else {
                    *outer
                }
            }
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| 0.5 * (b - a))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::HalfBall {
                center,
                radius,
                axis,
            } => {
                let mut lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                lo[*axis] = center[*axis];
                (lo, center.iter().map(|c| c + radius).collect())
            }
            Domain::Annulus { center, outer, .. } => (
                center.iter().map(|c| c - outer).collect(),
                center.iter().map(|c| c + outer).collect(),
            ),
            Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }

    /// Per-axis lattice anchor: cell centers sit at `anchor + h*i`.
    /// Balls and annuli are anchored at the center so that the center is a
    /// sample; half-balls offset the cut axis by h/2 so no sample lies on the
    /// flat face; boxes use an exact cell decomposition.
    fn lattice_anchor(&self, h: f64) -> Vec<f64> {
        match self {
            Domain::Ball { center, .. } | Domain::Annulus { center, .. } => center.clone(),
            Domain::HalfBall { center, axis, .. } => {
                let mut a = center.clone();
                a[*axis] += 0.5 * h;
                a
            }
            Domain::Box { lower, .. } => lower.iter().map(|l| l + 0.5 * h).collect(),
        }
    }

    /// Midpoint-rule grid: cells of side `resolution` whose center lies in
    /// the domain, each with weight `resolution^n`.
    pub fn sample(&self, resolution: f64) -> Result<QuadratureGrid> {
        self.validate()?;
        if !(resolution > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if resolution > self.smallest_radius() {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution} exceeds the domain scale {}",
                self.smallest_radius()
            )));
        }
        let n = self.dim();
        let h = resolution;
        let anchor = self.lattice_anchor(h);
        let (lo, hi) = self.bounding_box();
        let imin: Vec<i64> = (0..n)
            .map(|a| ((lo[a] - anchor[a]) / h).floor() as i64 - 1)
            .collect();
        let imax: Vec<i64> = (0..n)
            .map(|a| ((hi[a] - anchor[a]) / h).ceil() as i64 + 1)
            .collect();

        let mut points = Vec::new();
        let mut idx = imin.clone();
        let mut x = vec![0.0; n];
        'outer: loop {
            for a in 0..n {
                x[a] = anchor[a] + h * idx[a] as f64;
            }
            if self.contains(&x) {
                points.extend_from_slice(&x);
            }
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] <= imax[a] {
                    continue 'outer;
                }
                idx[a] = imin[a];
            }
            break;
        }
        if points.is_empty() {
            return Err(Error::DegenerateDomain(
                "no cell centers inside the domain at this resolution".into(),
            ));
        }
        let count = points.len() / n;
        let weights = vec![h.powi(n as i32); count];
        Ok(QuadratureGrid::on_lattice(n, h, anchor, points, weights))
    }

    /// Points of the closure's boundary, roughly `spacing` apart (n = 2 and
    /// n = 3 only; other dimensions return the bounding-box corners that lie
    /// on the boundary, which may be none).
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::new();
        let sphere = |center: &[f64], r: f64, out: &mut Vec<Vec<f64>>| {
            if n == 2 {
                let count = ((2.0 * PI * r / spacing).ceil() as usize).clamp(8, 4096);
                for i in 0..count {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    out.push(vec![center[0] + r * t.cos(), center[1] + r * t.sin()]);
                }
            } else if n == 3 {
                let count = ((4.0 * PI * r * r / (spacing * spacing)).ceil() as usize).clamp(16, 8192);
                let golden = PI * (3.0 - 5f64.sqrt());
                for i in 0..count {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let s = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    out.push(vec![
                        center[0] + r * s * t.cos(),
                        center[1] + r * s * t.sin(),
                        center[2] + r * z,
                    ]);
                }
            }
        };
        match self {
            Domain::Ball { center, radius } => sphere(center, *radius, &mut out),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                sphere(center, *outer, &mut out);
                if *inner > 0.0 {
                    sphere(center, *inner, &mut out);
                }
            }
            Domain::HalfBall {
                center,
                radius,
                axis,
            } => {
                let mut curved = Vec::new();
                sphere(center, *radius, &mut curved);
                out.extend(curved.into_iter().filter(|p| p[*axis] >= center[*axis]));
                if n == 2 {
                    // Flat face, including both corners.
                    let other = 1 - axis;
                    let count = ((2.0 * radius / spacing).ceil() as usize).max(2);
                    for i in 0..=count {
                        let mut p = center.clone();
                        p[other] += -radius + 2.0 * radius * i as f64 / count as f64;
                        out.push(p);
                    }
                }
            }
            Domain::Box { lower, upper } => {
                if n == 2 {
                    let count = ((upper[0] - lower[0]).max(upper[1] - lower[1]) / spacing).ceil()
                        as usize;
                    let count = count.max(2);
                    for i in 0..=count {
                        let t = i as f64 / count as f64;
                        let x = lower[0] + t * (upper[0] - lower[0]);
                        let y = lower[1] + t * (upper[1] - lower[1]);
                        out.push(vec![x, lower[1]]);
                        out.push(vec![x, upper[1]]);
                        out.push(vec![lower[0], y]);
                        out.push(vec![upper[0], y]);
                    }
                }
            }
        }
        out
    }
}

/// JSON domain description used by the CLI, e.g.
/// `{"kind": "half_ball", "n": 2, "radius": 1.0, "resolution": 0.00390625}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Box side lengths (box kind only); the box starts at `center` or 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn to_domain(&self) -> Result<Domain> {
        let center = self.center.clone().unwrap_or_else(|| vec![0.0; self.n]);
        if center.len() != self.n {
            return Err(Error::dims(self.n, center.len()));
        }
        let d = match self.kind {
            DomainKind::Ball => Domain::Ball {
                center,
                radius: self.radius,
            },
            DomainKind::HalfBall => Domain::HalfBall {
                center,
                radius: self.radius,
                axis: 0,
            },
            DomainKind::Annulus => Domain::Annulus {
                center,
                inner: self.inner_radius.unwrap_or(0.0),
                outer: self.radius,
            },
            DomainKind::Box => {
                let sides = self.sides.clone().unwrap_or_else(|| vec![self.radius; self.n]);
                if sides.len() != self.n {
                    return Err(Error::dims(self.n, sides.len()));
                }
                let upper = center.iter().zip(&sides).map(|(c, s)| c + s).collect();
                Domain::Box {
                    lower: center,
                    upper,
                }
            }
        };
        d.validate()?;
        Ok(d)
    }
}

/// Sample points with nonnegative quadrature weights.
///
/// Grids produced by [`Domain::sample`] remember their lattice so that ball
/// restrictions only visit the bounding box of the ball.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    n: usize,
    h: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    lattice: Option<Lattice>,
}

#[derive(Debug, Clone)]
struct Lattice {
    anchor: Vec<f64>,
    imin: Vec<i64>,
    extent: Vec<usize>,
    slots: Vec<u32>,
}

const EMPTY: u32 = u32::MAX;

impl Lattice {
    fn build(n: usize, h: f64, anchor: &[f64], points: &[f64]) -> Option<Self> {
        let count = points.len() / n;
        if count == 0 || count >= EMPTY as usize {
            return None;
        }
        let mut idx = vec![0i64; count * n];
        for p in 0..count {
            for a in 0..n {
                let t = (points[p * n + a] - anchor[a]) / h;
                let r = t.round();
                if (t - r).abs() > 1e-6 {
                    return None;
                }
                idx[p * n + a] = r as i64;
            }
        }
        let imin: Vec<i64> = (0..n)
            .map(|a| (0..count).map(|p| idx[p * n + a]).min().unwrap())
            .collect();
        let imax: Vec<i64> = (0..n)
            .map(|a| (0..count).map(|p| idx[p * n + a]).max().unwrap())
            .collect();
        let extent: Vec<usize> = (0..n).map(|a| (imax[a] - imin[a] + 1) as usize).collect();
        let total: usize = extent.iter().product();
        if total > 64 * count.max(1 << 16) {
            return None;
        }
        let mut slots = vec![EMPTY; total];
        for p in 0..count {
            let mut flat = 0usize;
            for a in 0..n {
                flat = flat * extent[a] + (idx[p * n + a] - imin[a]) as usize;
            }
            slots[flat] = p as u32;
        }
        Some(Lattice {
            anchor: anchor.to_vec(),
            imin,
            extent,
            slots,
        })
    }

    fn lookup(&self, idx: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for (a, &i) in idx.iter().enumerate() {
            let off = i - self.imin[a];
            if off < 0 || off as usize >= self.extent[a] {
                return None;
            }
            flat = flat * self.extent[a] + off as usize;
        }
        match self.slots[flat] {
            EMPTY => None,
            s => Some(s as usize),
        }
    }
}

impl QuadratureGrid {
    fn on_lattice(n: usize, h: f64, anchor: Vec<f64>, points: Vec<f64>, weights: Vec<f64>) -> Self {
        let lattice = Lattice::build(n, h, &anchor, &points);
        QuadratureGrid {
            n,
            h,
            points,
            weights,
            lattice,
        }
    }

    /// Builds a grid from explicit points and weights. If the points sit on a
    /// lattice of spacing `h` the lattice is detected and used for lookups.
    pub fn from_points(n: usize, h: f64, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 || points.len() % n != 0 {
            return Err(Error::dims(format!("multiple of {n}"), points.len()));
        }
        if weights.len() != points.len() / n {
            return Err(Error::dims(points.len() / n, weights.len()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("negative quadrature weight".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("resolution {h}")));
        }
        let anchor = points.get(..n).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        Ok(Self::on_lattice(n, h, anchor, points, weights))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.n)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the sample at lattice offset `offset` (in cells) from sample `i`.
    pub fn neighbor(&self, i: usize, offset: &[i64]) -> Option<usize> {
        let lat = self.lattice.as_ref()?;
        let p = self.point(i);
        let idx: Vec<i64> = (0..self.n)
            .map(|a| ((p[a] - lat.anchor[a]) / self.h).round() as i64 + offset[a])
            .collect();
        lat.lookup(&idx)
    }

    /// Index of the sample nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        if let Some(lat) = &self.lattice {
            let idx: Vec<i64> = (0..self.n)
                .map(|a| ((x[a] - lat.anchor[a]) / self.h).round() as i64)
                .collect();
            if let Some(i) = lat.lookup(&idx) {
                return Some(i);
            }
        }
        (0..self.len()).min_by(|&a, &b| {
            dist2(self.point(a), x).total_cmp(&dist2(self.point(b), x))
        })
    }

    /// Indices of samples in the closed ball `B_radius(center)`, in grid order.
    pub fn ball_indices(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        match &self.lattice {
            Some(lat) => {
                let n = self.n;
                let lo: Vec<i64> = (0..n)
                    .map(|a| (((center[a] - radius - lat.anchor[a]) / self.h).floor() as i64).max(lat.imin[a]))
                    .collect();
                let hi: Vec<i64> = (0..n)
                    .map(|a| {
                        (((center[a] + radius - lat.anchor[a]) / self.h).ceil() as i64)
                            .min(lat.imin[a] + lat.extent[a] as i64 - 1)
                    })
                    .collect();
                if (0..n).any(|a| lo[a] > hi[a]) {
                    return Vec::new();
                }
                let mut out = Vec::new();
                let mut idx = lo.clone();
                'outer: loop {
                    if let Some(s) = lat.lookup(&idx) {
                        if dist2(self.point(s), center) <= r2 {
                            out.push(s);
                        }
                    }
                    for a in (0..n).rev() {
                        idx[a] += 1;
                        if idx[a] <= hi[a] {
                            continue 'outer;
                        }
                        idx[a] = lo[a];
                    }
                    break;
                }
                out.sort_unstable();
                out
            }
            None => (0..self.len())
                .filter(|&i| dist2(self.point(i), center) <= r2)
                .collect(),
        }
    }

    /// Total weight inside the closed ball.
    pub fn ball_weight(&self, center: &[f64], radius: f64) -> f64 {
        self.ball_indices(center, radius)
            .iter()
            .map(|&i| self.weights[i])
            .sum()
    }

    /// Sub-grid on `B_radius(center)`; weights are unchanged.
    pub fn restrict(&self, center: &[f64], radius: f64) -> Result<QuadratureGrid> {
        if center.len() != self.n {
            return Err(Error::dims(self.n, center.len()));
        }
        if !(radius > 2.0 * self.h) {
            return Err(Error::InvalidParameter(format!(
                "restriction radius {radius} is below the grid resolution (need > {})",
                2.0 * self.h
            )));
        }
        let idx = self.ball_indices(center, radius);
        if idx.is_empty() {
            return Err(Error::EmptyIntersection { radius });
        }
        Ok(self.subset(&idx))
    }

    pub fn subset(&self, idx: &[usize]) -> QuadratureGrid {
        let mut points = Vec::with_capacity(idx.len() * self.n);
        for &i in idx {
            points.extend_from_slice(self.point(i));
        }
        let weights = idx.iter().map(|&i| self.weights[i]).collect();
        let anchor = self
            .lattice
            .as_ref()
            .map(|l| l.anchor.clone())
            .unwrap_or_else(|| vec![0.0; self.n]);
        QuadratureGrid::on_lattice(self.n, self.h, anchor, points, weights)
    }
}

/// Result of the A-weighted estimate: the smallest sampled mass ratio
/// `H^n(Ω ∩ B_ρ(x)) / ρ^n` and where it was attained.
#[derive(Debug, Clone, Serialize)]
pub struct AWeightedEstimate {
    pub constant: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub pairs_checked: usize,
}

/// Estimates the largest A for which the domain is A-weighted, as the minimum
/// of the mass ratio over grid centers plus boundary points and dyadic radii
/// `diam·2^-j` (down to 4 cells).
pub fn a_weighted_constant(domain: &Domain, resolution: f64) -> Result<AWeightedEstimate> {
    domain.validate()?;
    if !(resolution < domain.smallest_radius() / 4.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} must be below a quarter of the smallest radius {}",
            domain.smallest_radius()
        )));
    }
    let grid = domain.sample(resolution)?;
    let n = domain.dim();
    let diam = domain.diameter();

    let mut radii = Vec::new();
    let mut rho = diam;
    while rho >= 4.0 * resolution {
        radii.push(rho);
        rho *= 0.5;
    }

    // Interior centers: a strided subset of the grid, about 256 of them.
    let stride = (grid.len() / 256).max(1);
    let mut centers: Vec<Vec<f64>> = (0..grid.len())
        .step_by(stride)
        .map(|i| grid.point(i).to_vec())
        .collect();
    let spacing = (16.0 * resolution).max(diam / 512.0);
    centers.extend(domain.boundary_samples(spacing));

    let pairs: Vec<(usize, usize)> = (0..centers.len())
        .flat_map(|c| (0..radii.len()).map(move |r| (c, r)))
        .collect();
    let ratios = par::map_slice(&pairs, |&(c, r)| {
        grid.ball_weight(&centers[c], radii[r]) / radii[r].powi(n as i32)
    });
    // First minimum in pair order keeps the argmin deterministic.
    let (best, &value) = ratios
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one (center, radius) pair");
    let (c, r) = pairs[best];
    Ok(AWeightedEstimate {
        constant: value,
        center: centers[c].clone(),
        radius: radii[r],
        pairs_checked: pairs.len(),
    })
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
