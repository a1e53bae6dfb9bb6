//! Explicit closed surfaces: the flat torus and the round sphere.
//!
//! Both models have closed-form geodesic distance, so every other module
//! measures lengths, balls and transport costs through [`ManifoldModel`].
//! [`SampleGrid`] is the shared discretization: a lattice with positive area
//! weights and an 8-neighbour graph whose edge lengths are geodesic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::fejer_first;

/// A point in chart coordinates: `(x, y)` on the torus, `(θ, ϕ)` (colatitude,
/// longitude) on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ManifoldModel {
    FlatTorus { lx: f64, ly: f64 },
    RoundSphere { radius: f64 },
}

impl ManifoldModel {
    pub fn flat_torus(lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "torus side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self::FlatTorus { lx, ly })
    }

    /// The torus `R/2πZ × R/2πZ`.
    pub fn square_torus() -> Self {
        Self::FlatTorus { lx: 2.0 * PI, ly: 2.0 * PI }
    }

    pub fn round_sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self::RoundSphere { radius })
    }

    pub fn unit_sphere() -> Self {
        Self::RoundSphere { radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::FlatTorus { lx, ly } => Self::flat_torus(lx, ly).map(|_| ()),
            Self::RoundSphere { radius } => Self::round_sphere(radius).map(|_| ()),
        }
    }

    pub fn dimension(&self) -> usize {
        2
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Self::FlatTorus { .. })
    }

    pub fn area(&self) -> f64 {
        match *self {
            Self::FlatTorus { lx, ly } => lx * ly,
            Self::RoundSphere { radius } => 4.0 * PI * radius * radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Self::FlatTorus { lx, ly } => 0.5 * lx.hypot(ly),
            Self::RoundSphere { radius } => PI * radius,
        }
    }

    /// Largest radius for which metric balls are embedded discs.
    pub fn injectivity_radius(&self) -> f64 {
        match *self {
            Self::FlatTorus { lx, ly } => 0.5 * lx.min(ly),
            Self::RoundSphere { radius } => PI * radius,
        }
    }

    /// Reduce chart coordinates to the fundamental domain.
    pub fn reduce(&self, p: Point) -> Point {
        match *self {
            Self::FlatTorus { lx, ly } => Point::new(p.u.rem_euclid(lx), p.v.rem_euclid(ly)),
            Self::RoundSphere { .. } => {
                let mut theta = p.u.rem_euclid(2.0 * PI);
                let mut phi = p.v;
                if theta > PI {
                    theta = 2.0 * PI - theta;
                    phi += PI;
                }
                Point::new(theta, phi.rem_euclid(2.0 * PI))
            }
        }
    }

    /// Shortest signed torus displacement from `a` to `b`.
    pub fn torus_delta(&self, a: Point, b: Point) -> [f64; 2] {
        match *self {
            Self::FlatTorus { lx, ly } => [wrap(b.u - a.u, lx), wrap(b.v - a.v, ly)],
            Self::RoundSphere { .. } => [b.u - a.u, b.v - a.v],
        }
    }

    pub fn geodesic_distance(&self, a: Point, b: Point) -> f64 {
        match *self {
            Self::FlatTorus { .. } => {
                let [dx, dy] = self.torus_delta(a, b);
                dx.hypot(dy)
            }
            Self::RoundSphere { radius } => {
                radius * angle_between(unit_vector(a), unit_vector(b))
            }
        }
    }

    /// Ambient coordinates: `(x, y, 0)` on the torus chart, `R·n̂` on the sphere.
    pub fn to_ambient(&self, p: Point) -> [f64; 3] {
        match *self {
            Self::FlatTorus { .. } => [p.u, p.v, 0.0],
            Self::RoundSphere { radius } => {
                let n = unit_vector(p);
                [radius * n[0], radius * n[1], radius * n[2]]
            }
        }
    }
}

fn wrap(d: f64, period: f64) -> f64 {
    let r = d.rem_euclid(period);
    if r > 0.5 * period {
        r - period
    } else {
        r
    }
}

/// Unit vector of a sphere chart point.
pub fn unit_vector(p: Point) -> [f64; 3] {
    let (st, ct) = p.u.sin_cos();
    let (sp, cp) = p.v.sin_cos();
    [st * cp, st * sp, ct]
}

/// Chart point of a (not necessarily normalized) ambient vector.
pub fn from_unit_vector(n: [f64; 3]) -> Point {
    let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let theta = (n[2] / r).clamp(-1.0, 1.0).acos();
    let phi = n[1].atan2(n[0]).rem_euclid(2.0 * PI);
    Point::new(theta, phi)
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Angle between two unit vectors, accurate for nearby and antipodal pairs.
pub(crate) fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b))
}

pub fn geodesic_distance(m: &ManifoldModel, a: Point, b: Point) -> f64 {
    m.geodesic_distance(a, b)
}

#[derive(Debug, Clone)]
enum Layout {
    Torus {
        n: usize,
        hx: f64,
        hy: f64,
    },
    Sphere {
        n_theta: usize,
        n_phi: usize,
        radius: f64,
        thetas: Vec<f64>,
        ring_weights: Vec<f64>,
        ring_len: Vec<f64>,
        diag_len: Vec<f64>,
        meridian_len: f64,
        pole_len: f64,
    },
}

/// Quadrature lattice with an 8-neighbour graph.
///
/// Torus nodes sit at `(i·L_x/n, j·L_y/n)` with index `j·n + i`. Sphere nodes
/// sit on `n` midpoint colatitude rings `θ_i = (i + ½)π/n` times `2n`
/// longitudes `ϕ_j = jπ/n` with index `i·2n + j`; the poles are never nodes.
/// Sphere weights are Fejér first-rule weights, so they sum to `4πR²` to
/// rounding and integrate zonal polynomials of degree `< n` exactly. Each
/// top- and bottom-ring node is also joined to its partner across the pole.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    model: ManifoldModel,
    layout: Layout,
}

/// Small fixed-capacity neighbour list.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors {
    buf: [(usize, f64); 9],
    len: usize,
    pos: usize,
}

impl Neighbors {
    fn new() -> Self {
        Self { buf: [(0, 0.0); 9], len: 0, pos: 0 }
    }

    fn push(&mut self, j: usize, len: f64) {
        self.buf[self.len] = (j, len);
        self.len += 1;
    }
}

impl Iterator for Neighbors {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos < self.len {
            self.pos += 1;
            Some(self.buf[self.pos - 1])
        } else {
            None
        }
    }
}

/// Build the default lattice with `resolution` nodes per axis.
pub fn build_grid(m: &ManifoldModel, resolution: usize) -> Result<SampleGrid> {
    SampleGrid::new(*m, resolution)
}

impl SampleGrid {
    pub fn new(model: ManifoldModel, resolution: usize) -> Result<Self> {
        model.validate()?;
        if resolution < 8 {
            return Err(Error::ResolutionTooCoarse(resolution));
        }
        let layout = match model {
            ManifoldModel::FlatTorus { lx, ly } => Layout::Torus {
                n: resolution,
                hx: lx / resolution as f64,
                hy: ly / resolution as f64,
            },
            ManifoldModel::RoundSphere { radius } => {
                let n_theta = resolution;
                let n_phi = 2 * resolution;
                let dphi = 2.0 * PI / n_phi as f64;
                let (thetas, w) = fejer_first(n_theta);
                let ring_weights = w.iter().map(|w| radius * radius * w * dphi).collect();
                let ring_len = thetas
                    .iter()
                    .map(|&t| 2.0 * radius * (t.sin() * (0.5 * dphi).sin()).asin())
                    .collect();
                let diag_len = thetas
                    .windows(2)
                    .map(|w| {
                        radius
                            * angle_between(
                                unit_vector(Point::new(w[0], 0.0)),
                                unit_vector(Point::new(w[1], dphi)),
                            )
                    })
                    .collect();
                let dtheta = PI / n_theta as f64;
                Layout::Sphere {
                    n_theta,
                    n_phi,
                    radius,
                    pole_len: 2.0 * radius * thetas[0],
                    thetas,
                    ring_weights,
                    ring_len,
                    diag_len,
                    meridian_len: radius * dtheta,
                }
            }
        };
        Ok(Self { model, layout })
    }

    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        match &self.layout {
            Layout::Torus { n, .. } => n * n,
            Layout::Sphere { n_theta, n_phi, .. } => n_theta * n_phi,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes per axis as passed to [`build_grid`].
    pub fn resolution(&self) -> usize {
        match &self.layout {
            Layout::Torus { n, .. } => *n,
            Layout::Sphere { n_theta, .. } => *n_theta,
        }
    }

    /// Characteristic mesh size `h`.
    pub fn spacing(&self) -> f64 {
        match &self.layout {
            Layout::Torus { hx, hy, .. } => hx.max(*hy),
            Layout::Sphere { meridian_len, .. } => *meridian_len,
        }
    }

    /// Lattice shape `(columns, rows)`: `(n, n)` on the torus, `(2n, n)` on the
    /// sphere (longitudes, rings).
    pub fn shape(&self) -> (usize, usize) {
        match &self.layout {
            Layout::Torus { n, .. } => (*n, *n),
            Layout::Sphere { n_theta, n_phi, .. } => (*n_phi, *n_theta),
        }
    }

    /// Node index for lattice column `col` and row `row` (both wrapped in the
    /// periodic directions).
    pub fn index(&self, col: usize, row: usize) -> usize {
        let (cols, _) = self.shape();
        row * cols + col % cols
    }

    /// `(column, row)` of a node.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        let (cols, _) = self.shape();
        (i % cols, i / cols)
    }

    pub fn point(&self, i: usize) -> Point {
        let (c, r) = self.coords(i);
        match &self.layout {
            Layout::Torus { hx, hy, .. } => Point::new(c as f64 * hx, r as f64 * hy),
            Layout::Sphere { thetas, n_phi, .. } => {
                Point::new(thetas[r], c as f64 * 2.0 * PI / *n_phi as f64)
            }
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.layout {
            Layout::Torus { hx, hy, .. } => hx * hy,
            Layout::Sphere { ring_weights, n_phi, .. } => ring_weights[i / n_phi],
        }
    }

    pub fn total_weight(&self) -> f64 {
        match &self.layout {
            Layout::Torus { n, hx, hy } => (n * n) as f64 * hx * hy,
            Layout::Sphere { ring_weights, n_phi, .. } => {
                ring_weights.iter().sum::<f64>() * *n_phi as f64
            }
        }
    }

    /// Sphere ring colatitudes; `None` on the torus.
    pub fn ring_colatitudes(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Torus { .. } => None,
            Layout::Sphere { thetas, .. } => Some(thetas),
        }
    }

    /// Lattice spacing along the two chart axes, `(Δu, Δv)`.
    pub fn chart_steps(&self) -> (f64, f64) {
        match &self.layout {
            Layout::Torus { hx, hy, .. } => (*hx, *hy),
            Layout::Sphere { n_theta, n_phi, .. } => {
                (PI / *n_theta as f64, 2.0 * PI / *n_phi as f64)
            }
        }
    }

    /// Graph neighbours with geodesic edge lengths (8-neighbour stencil plus the
    /// across-pole edges on the sphere).
    pub fn neighbors(&self, i: usize) -> Neighbors {
        let mut out = Neighbors::new();
        let (c, r) = self.coords(i);
        match &self.layout {
            Layout::Torus { n, hx, hy } => {
                let n = *n;
                let diag = hx.hypot(*hy);
                for (dc, dr, len) in [
                    (1, 0, *hx),
                    (n - 1, 0, *hx),
                    (0, 1, *hy),
                    (0, n - 1, *hy),
                    (1, 1, diag),
                    (n - 1, 1, diag),
                    (1, n - 1, diag),
                    (n - 1, n - 1, diag),
                ] {
                    out.push(((r + dr) % n) * n + (c + dc) % n, len);
                }
            }
            Layout::Sphere {
                n_theta,
                n_phi,
                ring_len,
                diag_len,
                meridian_len,
                pole_len,
                ..
            } => {
                let (nt, np) = (*n_theta, *n_phi);
                let left = (c + np - 1) % np;
                let right = (c + 1) % np;
                out.push(r * np + right, ring_len[r]);
                out.push(r * np + left, ring_len[r]);
                if r > 0 {
                    out.push((r - 1) * np + c, *meridian_len);
                    out.push((r - 1) * np + right, diag_len[r - 1]);
                    out.push((r - 1) * np + left, diag_len[r - 1]);
                } else {
                    out.push((c + np / 2) % np, *pole_len);
                }
                if r + 1 < nt {
                    out.push((r + 1) * np + c, *meridian_len);
                    out.push((r + 1) * np + right, diag_len[r]);
                    out.push((r + 1) * np + left, diag_len[r]);
                } else {
                    out.push(r * np + (c + np / 2) % np, *pole_len);
                }
            }
        }
        out
    }

    /// Axis neighbours only (4-connectivity, no across-pole edges). Used for
    /// sign-domain flood fill.
    pub fn axis_neighbors(&self, i: usize) -> Neighbors {
        let mut out = Neighbors::new();
        let (c, r) = self.coords(i);
        match &self.layout {
            Layout::Torus { n, hx, hy } => {
                let n = *n;
                out.push(r * n + (c + 1) % n, *hx);
                out.push(r * n + (c + n - 1) % n, *hx);
                out.push(((r + 1) % n) * n + c, *hy);
                out.push(((r + n - 1) % n) * n + c, *hy);
            }
            Layout::Sphere { n_theta, n_phi, ring_len, meridian_len, .. } => {
                let (nt, np) = (*n_theta, *n_phi);
                out.push(r * np + (c + 1) % np, ring_len[r]);
                out.push(r * np + (c + np - 1) % np, ring_len[r]);
                if r > 0 {
                    out.push((r - 1) * np + c, *meridian_len);
                }
                if r + 1 < nt {
                    out.push((r + 1) * np + c, *meridian_len);
                }
            }
        }
        out
    }

    /// Each undirected graph edge once, as `(i, j, length)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.len() * 4);
        for i in 0..self.len() {
            for (j, len) in self.neighbors(i) {
                if i < j {
                    out.push((i, j, len));
                }
            }
        }
        out
    }

    /// All nodes within geodesic distance `r` of `center`, ascending.
    pub fn metric_ball(&self, center: Point, r: f64) -> Result<Vec<usize>> {
        let h = self.spacing();
        if !(r > 0.0) || r < 0.5 * h {
            return Err(Error::EmptyBall { radius: r, spacing: h });
        }
        let center = self.model.reduce(center);
        let mut out = Vec::new();
        match &self.layout {
            Layout::Torus { n, hx, hy } => {
                let n = *n;
                let cols = axis_window(center.u, r, *hx, n);
                let rows = axis_window(center.v, r, *hy, n);
                for &row in &rows {
                    for &col in &cols {
                        let i = row * n + col;
                        if self.model.geodesic_distance(center, self.point(i)) <= r {
                            out.push(i);
                        }
                    }
                }
            }
            Layout::Sphere { n_phi, thetas, radius, .. } => {
                let np = *n_phi;
                let ang = r / radius;
                let c = unit_vector(center);
                let (st_c, ct_c) = center.u.sin_cos();
                for (ring, &theta) in thetas.iter().enumerate() {
                    if (theta - center.u).abs() > ang + 1e-12 {
                        continue;
                    }
                    let (st, ct) = theta.sin_cos();
                    let denom = st_c * st;
                    let cos_min = if denom < 1e-14 {
                        -1.0
                    } else {
                        (ang.cos() - ct_c * ct) / denom
                    };
                    let cols: Vec<usize> = if cos_min <= -1.0 {
                        (0..np).collect()
                    } else {
                        let dphi = cos_min.clamp(-1.0, 1.0).acos() + 1e-12;
                        axis_window(center.v, dphi, 2.0 * PI / np as f64, np)
                    };
                    for col in cols {
                        let i = ring * np + col;
                        let p = self.point(i);
                        if radius * angle_between(c, unit_vector(p)) <= r {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Nearest lattice node to a point.
    pub fn nearest_node(&self, p: Point) -> usize {
        let p = self.model.reduce(p);
        match &self.layout {
            Layout::Torus { n, hx, hy } => {
                let c = ((p.u / hx).round() as usize) % n;
                let r = ((p.v / hy).round() as usize) % n;
                r * n + c
            }
            Layout::Sphere { n_theta, n_phi, .. } => {
                let dtheta = PI / *n_theta as f64;
                let ring = ((p.u / dtheta - 0.5).round().max(0.0) as usize).min(n_theta - 1);
                let col = ((p.v / (2.0 * PI / *n_phi as f64)).round() as usize) % n_phi;
                ring * n_phi + col
            }
        }
    }
}

/// Lattice indices whose coordinate lies within `r` of `x` on a periodic axis
/// with `n` nodes of spacing `h`.
fn axis_window(x: f64, r: f64, h: f64, n: usize) -> Vec<usize> {
    let lo = ((x - r) / h).floor() as i64;
    let hi = ((x + r) / h).ceil() as i64;
    if hi - lo + 1 >= n as i64 {
        return (0..n).collect();
    }
    (lo..=hi).map(|k| k.rem_euclid(n as i64) as usize).collect()
}

/// Smallest resolution giving `nodes_per_wavelength` samples per `2π/√λ`,
/// never below `min_nodes`.
pub fn resolution_for(m: &ManifoldModel, lambda: f64, nodes_per_wavelength: f64, min_nodes: usize) -> usize {
    let wavelength = 2.0 * PI / lambda.sqrt();
    let h = wavelength / nodes_per_wavelength;
    let n = match *m {
        ManifoldModel::FlatTorus { lx, ly } => (lx.max(ly) / h).ceil(),
        ManifoldModel::RoundSphere { radius } => (PI * radius / h).ceil(),
    };
    (n as usize).max(min_nodes).max(8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn torus_distances() {
        let m = ManifoldModel::square_torus();
        let o = Point::new(0.0, 0.0);
        assert_eq!(m.geodesic_distance(o, o), 0.0);
        assert!((m.geodesic_distance(o, Point::new(PI, 0.0)) - PI).abs() < 1e-15);
        assert!((m.geodesic_distance(o, Point::new(1.5 * PI, 0.0)) - 0.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn sphere_antipodes() {
        let m = ManifoldModel::unit_sphere();
        let d = m.geodesic_distance(Point::new(0.0, 0.0), Point::new(PI, 0.0));
        assert!((d - PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_models() {
        assert!(ManifoldModel::flat_torus(0.0, 1.0).is_err());
        assert!(ManifoldModel::round_sphere(-1.0).is_err());
    }

    #[test]
    fn torus_grid_weights() {
        let g = build_grid(&ManifoldModel::square_torus(), 64).unwrap();
        assert_eq!(g.len(), 4096);
        let w = (2.0 * PI / 64.0).powi(2);
        assert!((0..g.len()).all(|i| (g.weight(i) - w).abs() < 1e-15));
        assert!((g.total_weight() - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn sphere_grid_area() {
        let g = build_grid(&ManifoldModel::unit_sphere(), 64).unwrap();
        assert!(((g.total_weight() - 4.0 * PI) / (4.0 * PI)).abs() < 1e-6);
        assert!((0..g.len()).all(|i| g.weight(i) > 0.0));
        // no node at either pole
        let t = g.ring_colatitudes().unwrap();
        assert!(t[0] > 0.0 && t[t.len() - 1] < PI);
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        let err = build_grid(&ManifoldModel::square_torus(), 4).unwrap_err();
        assert!(matches!(err, Error::ResolutionTooCoarse(4)));
    }

    #[test]
    fn torus_axis_neighbors() {
        let g = build_grid(&ManifoldModel::square_torus(), 8).unwrap();
        let h = 2.0 * PI / 8.0;
        for i in 0..g.len() {
            let nb: Vec<_> = g.axis_neighbors(i).collect();
            assert_eq!(nb.len(), 4);
            assert!(nb.iter().all(|&(_, l)| (l - h).abs() < 1e-15));
            let all: Vec<_> = g.neighbors(i).collect();
            assert_eq!(all.len(), 8);
        }
    }

    #[test]
    fn edge_lengths_are_geodesic() {
        for m in [ManifoldModel::square_torus(), ManifoldModel::unit_sphere()] {
            let g = build_grid(&m, 16).unwrap();
            for (i, j, len) in g.edges() {
                let d = m.geodesic_distance(g.point(i), g.point(j));
                assert!((d - len).abs() < 1e-12, "{i}-{j}: {d} vs {len}");
            }
        }
    }

    #[test]
    fn ball_covering_whole_torus() {
        let g = build_grid(&ManifoldModel::square_torus(), 64).unwrap();
        let b = g.metric_ball(Point::new(0.0, 0.0), 2.0 * PI).unwrap();
        assert_eq!(b.len(), 4096);
    }

    #[test]
    fn tiny_ball_is_an_error() {
        let g = build_grid(&ManifoldModel::square_torus(), 64).unwrap();
        let err = g.metric_ball(Point::new(0.0, 0.0), g.spacing() / 4.0).unwrap_err();
        assert!(matches!(err, Error::EmptyBall { .. }));
    }

    #[test]
    fn ball_area_matches_disc() {
        let g = build_grid(&ManifoldModel::square_torus(), 64).unwrap();
        let r = PI / 2.0;
        let b = g.metric_ball(Point::new(0.0, 0.0), r).unwrap();
        let area: f64 = b.iter().map(|&i| g.weight(i)).sum();
        let disc = PI * r * r;
        assert!(((area - disc) / disc).abs() < 0.05);
    }

    #[test]
    fn sphere_ball_matches_brute_force() {
        let m = ManifoldModel::unit_sphere();
        let g = build_grid(&m, 24).unwrap();
        for c in [Point::new(0.05, 1.0), Point::new(1.3, 6.2), Point::new(PI - 0.2, 3.0)] {
            for r in [0.3, 0.9, 2.5] {
                let fast = g.metric_ball(c, r).unwrap();
                let brute: Vec<usize> =
                    (0..g.len()).filter(|&i| m.geodesic_distance(c, g.point(i)) <= r).collect();
                assert_eq!(fast, brute);
            }
        }
    }

    #[test]
    fn nonempty_ball_at_spacing() {
        for m in [ManifoldModel::square_torus(), ManifoldModel::unit_sphere()] {
            let g = build_grid(&m, 32).unwrap();
            let h = g.spacing();
            for c in [Point::new(0.3, 0.7), Point::new(1.1, 4.0)] {
                assert!(!g.metric_ball(c, h).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn sphere_refinement_keeps_area() {
        let m = ManifoldModel::round_sphere(2.5).unwrap();
        let a = build_grid(&m, 40).unwrap().total_weight();
        let b = build_grid(&m, 80).unwrap().total_weight();
        assert!(((a - b) / a).abs() < 1e-6);
        assert!(((a - m.area()) / m.area()).abs() < 1e-12);
    }

    fn arb_point(m: ManifoldModel) -> impl Strategy<Value = Point> {
        match m {
            ManifoldModel::FlatTorus { lx, ly } => {
                (0.0..lx, 0.0..ly).prop_map(|(u, v)| Point::new(u, v)).boxed()
            }
            ManifoldModel::RoundSphere { .. } => (0.0..PI, 0.0..2.0 * PI)
                .prop_map(|(u, v)| Point::new(u, v))
                .boxed(),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn torus_triangle_inequality(
            a in arb_point(ManifoldModel::square_torus()),
            b in arb_point(ManifoldModel::square_torus()),
            c in arb_point(ManifoldModel::square_torus()),
        ) {
            let m = ManifoldModel::square_torus();
            prop_assert!(m.geodesic_distance(a, c) <= m.geodesic_distance(a, b) + m.geodesic_distance(b, c) + 1e-12);
            prop_assert!((m.geodesic_distance(a, b) - m.geodesic_distance(b, a)).abs() < 1e-15);
        }

        #[test]
        fn sphere_triangle_inequality(
            a in arb_point(ManifoldModel::unit_sphere()),
            b in arb_point(ManifoldModel::unit_sphere()),
            c in arb_point(ManifoldModel::unit_sphere()),
        ) {
            let m = ManifoldModel::unit_sphere();
            prop_assert!(m.geodesic_distance(a, c) <= m.geodesic_distance(a, b) + m.geodesic_distance(b, c) + 1e-12);
            prop_assert!((m.geodesic_distance(a, b) - m.geodesic_distance(b, a)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn balls_are_monotone(u in 0.0..2.0 * PI, v in 0.0..2.0 * PI, r1 in 0.1..2.0f64, dr in 0.0..1.0f64) {
            let g = build_grid(&ManifoldModel::square_torus(), 32).unwrap();
            let c = Point::new(u, v);
            let small = g.metric_ball(c, r1).unwrap();
            let big = g.metric_ball(c, r1 + dr).unwrap();
            prop_assert!(small.iter().all(|i| big.binary_search(i).is_ok()));
        }
    }
}
