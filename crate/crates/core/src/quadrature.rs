//! Gauss–Legendre rules and polar quadrature on disks and disk sectors.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = order as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_interval(a: f64, b: f64, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (a + half * (xi + 1.0), half * wi))
        .collect()
}

/// Angular rule on a circle sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angular {
    /// Equispaced trapezoid on the full circle (spectrally accurate for
    /// smooth periodic integrands).
    FullCircle { nodes: usize },
    /// Gauss–Legendre on `[from, to]`, split into `panels` panels.
    Sector { from: f64, to: f64, panels: usize, order: usize },
}

impl Angular {
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match *self {
            Angular::FullCircle { nodes } => {
                let w = 2.0 * PI / nodes as f64;
                (0..nodes).map(|i| (w * i as f64 - PI, w)).collect()
            }
            Angular::Sector {
                from,
                to,
                panels,
                order,
            } => {
                let step = (to - from) / panels as f64;
                (0..panels)
                    .flat_map(|p| {
                        gauss_interval(from + step * p as f64, from + step * (p + 1) as f64, order)
                    })
                    .collect()
            }
        }
    }
}

/// Polar rule on `{|x - c| < R}` (or a sector of it) in R².
///
/// The radial variable is substituted `r = R t²`, which makes integrands
/// with `r^s` behaviour at the center (s > -2) smooth in `t`. Each node is
/// `(x, y, weight)` with the Jacobian `r` already included.
#[derive(Debug, Clone)]
pub struct PolarRule {
    pub nodes: Vec<[f64; 3]>,
}

impl PolarRule {
    pub fn new(center: [f64; 2], radius: f64, radial_panels: usize, radial_order: usize, angular: Angular) -> Self {
        Self::annular(center, 0.0, radius, radial_panels, radial_order, angular)
    }

    /// Rule on `{r_in < |x - c| < r_out}`; for `r_in = 0` the `t²` substitution
    /// is used, otherwise plain Gauss panels in r.
    pub fn annular(
        center: [f64; 2],
        r_in: f64,
        r_out: f64,
        radial_panels: usize,
        radial_order: usize,
        angular: Angular,
    ) -> Self {
        let radial: Vec<(f64, f64)> = if r_in == 0.0 {
            let step = 1.0 / radial_panels as f64;
            (0..radial_panels)
                .flat_map(|p| gauss_interval(step * p as f64, step * (p + 1) as f64, radial_order))
                .map(|(t, w)| (r_out * t * t, w * 2.0 * r_out * t))
                .collect()
        } else {
            let step = (r_out - r_in) / radial_panels as f64;
            (0..radial_panels)
                .flat_map(|p| gauss_interval(r_in + step * p as f64, r_in + step * (p + 1) as f64, radial_order))
                .collect()
        };
        let ang = angular.nodes();
        let mut nodes = Vec::with_capacity(radial.len() * ang.len());
        for &(r, wr) in &radial {
            for &(th, wt) in &ang {
                nodes.push([center[0] + r * th.cos(), center[1] + r * th.sin(), wr * wt * r]);
            }
        }
        PolarRule { nodes }
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|&[x, y, w]| w * f(x, y)).sum()
    }
}

/// Trapezoid nodes on the circle `|x - c| = r`: `(x, y, arc weight)`.
pub fn circle_nodes(center: [f64; 2], r: f64, count: usize) -> Vec<[f64; 3]> {
    let w = 2.0 * PI * r / count as f64;
    (0..count)
        .map(|i| {
            let t = 2.0 * PI * (i as f64 + 0.5) / count as f64 - PI;
            [center[0] + r * t.cos(), center[1] + r * t.sin(), w]
        })
        .collect()
}
