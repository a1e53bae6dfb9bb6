//! Marching squares on the periodic torus lattice and on the sphere's
//! ring-by-longitude lattice, with triangle fans closing the polar caps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::{angle_between, from_unit_vector, norm, ManifoldModel, Point, SampleGrid};

/// A straight piece of the nodal set. Endpoints are ambient coordinates:
/// `(x, y, 0)` in the unwrapped chart of the cell on the torus, points of
/// the radius-`R` sphere otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub length: f64,
}

impl Segment {
    pub fn chart_endpoints(&self, m: &ManifoldModel) -> [Point; 2] {
        match m {
            ManifoldModel::FlatTorus { .. } => [
                m.reduce(Point::new(self.a[0], self.a[1])),
                m.reduce(Point::new(self.b[0], self.b[1])),
            ],
            ManifoldModel::RoundSphere { .. } => {
                [from_unit_vector(self.a), from_unit_vector(self.b)]
            }
        }
    }

    pub fn midpoint_chart(&self, m: &ManifoldModel) -> Point {
        let mid = [
            0.5 * (self.a[0] + self.b[0]),
            0.5 * (self.a[1] + self.b[1]),
            0.5 * (self.a[2] + self.b[2]),
        ];
        match m {
            ManifoldModel::FlatTorus { .. } => m.reduce(Point::new(mid[0], mid[1])),
            ManifoldModel::RoundSphere { .. } => from_unit_vector(mid),
        }
    }
}

// Edge ids: e0 = c0c1, e1 = c1c2, e2 = c2c3, e3 = c3c0. Bit k of the case is
// set when corner k is negative. Saddles 5 and 10 are resolved below.
const EDGE_PAIRS: [&[(usize, usize)]; 16] = [
    &[],
    &[(3, 0)],
    &[(0, 1)],
    &[(3, 1)],
    &[(1, 2)],
    &[],
    &[(0, 2)],
    &[(3, 2)],
    &[(2, 3)],
    &[(0, 2)],
    &[],
    &[(1, 2)],
    &[(3, 1)],
    &[(0, 1)],
    &[(3, 0)],
    &[],
];

const EDGE_CORNERS: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];

fn interpolate(pa: [f64; 3], pb: [f64; 3], va: f64, vb: f64) -> [f64; 3] {
    let t = if va == 0.0 { 0.0 } else { va / (va - vb) };
    [
        pa[0] + t * (pb[0] - pa[0]),
        pa[1] + t * (pb[1] - pa[1]),
        pa[2] + t * (pb[2] - pa[2]),
    ]
}

/// Marching-squares segments of a cell with corners `p` (counterclockwise)
/// and values `v`.
fn cell_segments(p: [[f64; 3]; 4], v: [f64; 4], out: &mut Vec<([f64; 3], [f64; 3])>) {
    let case = (0..4).fold(0usize, |acc, k| acc | (usize::from(v[k] < 0.0) << k));
    let point = |e: usize| {
        let (i, j) = EDGE_CORNERS[e];
        interpolate(p[i], p[j], v[i], v[j])
    };
    let center_positive = v.iter().sum::<f64>() >= 0.0;
    let pairs: &[(usize, usize)] = match (case, center_positive) {
        // negatives c0, c2 isolated by a positive centre
        (5, true) => &[(3, 0), (1, 2)],
        (5, false) => &[(0, 1), (2, 3)],
        (10, true) => &[(0, 1), (2, 3)],
        (10, false) => &[(3, 0), (1, 2)],
        _ => EDGE_PAIRS[case],
    };
    for &(e, f) in pairs {
        out.push((point(e), point(f)));
    }
}

fn triangle_segments(p: [[f64; 3]; 3], v: [f64; 3], out: &mut Vec<([f64; 3], [f64; 3])>) {
    let neg: Vec<bool> = v.iter().map(|&x| x < 0.0).collect();
    let mut pts = Vec::with_capacity(2);
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        if neg[i] != neg[j] {
            pts.push(interpolate(p[i], p[j], v[i], v[j]));
        }
    }
    if pts.len() == 2 {
        out.push((pts[0], pts[1]));
    }
}

fn normalize(a: [f64; 3], radius: f64) -> [f64; 3] {
    let n = norm(a);
    [radius * a[0] / n, radius * a[1] / n, radius * a[2] / n]
}

/// Extract every nodal segment; exact zeros count as positive.
pub(crate) fn march(grid: &SampleGrid, v: &[f64]) -> Vec<Segment> {
    let (cols, rows) = grid.shape();
    let model = *grid.model();
    match model {
        ManifoldModel::FlatTorus { .. } => {
            let (hx, hy) = grid.chart_steps();
            (0..cols * rows)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let (c, r) = grid.coords(i);
                    let idx = [
                        i,
                        grid.index(c + 1, r),
                        grid.index(c + 1, (r + 1) % rows),
                        grid.index(c, (r + 1) % rows),
                    ];
                    let (x0, y0) = (c as f64 * hx, r as f64 * hy);
                    let p = [
                        [x0, y0, 0.0],
                        [x0 + hx, y0, 0.0],
                        [x0 + hx, y0 + hy, 0.0],
                        [x0, y0 + hy, 0.0],
                    ];
                    let mut raw = Vec::new();
                    cell_segments(p, idx.map(|k| v[k]), &mut raw);
                    raw.into_iter().filter_map(|(a, b)| {
                        let length = (b[0] - a[0]).hypot(b[1] - a[1]);
                        (length > 0.0).then_some(Segment { a, b, length })
                    })
                })
                .collect()
        }
        ManifoldModel::RoundSphere { radius } => {
            let amb = |i: usize| model.to_ambient(grid.point(i));
            let seg = move |(a, b): ([f64; 3], [f64; 3])| {
                let (a, b) = (normalize(a, radius), normalize(b, radius));
                let length = radius * angle_between(a, b);
                (length > 0.0).then_some(Segment { a, b, length })
            };
            let north_mean = (0..cols).map(|c| v[c]).sum::<f64>() / cols as f64;
            let south_mean =
                (0..cols).map(|c| v[(rows - 1) * cols + c]).sum::<f64>() / cols as f64;
            let mut out: Vec<Segment> = (0..cols)
                .into_par_iter()
                .flat_map_iter(|c| {
                    let mut raw = Vec::new();
                    let (i, j) = (c, grid.index(c + 1, 0));
                    triangle_segments(
                        [[0.0, 0.0, radius], amb(i), amb(j)],
                        [north_mean, v[i], v[j]],
                        &mut raw,
                    );
                    raw.into_iter().filter_map(seg)
                })
                .collect();
            out.par_extend((0..cols * (rows - 1)).into_par_iter().flat_map_iter(|i| {
                let (c, r) = grid.coords(i);
                let idx = [i, grid.index(c + 1, r), grid.index(c + 1, r + 1), grid.index(c, r + 1)];
                let mut raw = Vec::new();
                cell_segments(idx.map(amb), idx.map(|k| v[k]), &mut raw);
                raw.into_iter().filter_map(seg)
            }));
            let tail: Vec<Segment> = (0..cols)
                .into_par_iter()
                .flat_map_iter(|c| {
                    let mut raw = Vec::new();
                    let (i, j) = ((rows - 1) * cols + c, grid.index(c + 1, rows - 1));
                    triangle_segments(
                        [[0.0, 0.0, -radius], amb(j), amb(i)],
                        [south_mean, v[j], v[i]],
                        &mut raw,
                    );
                    raw.into_iter().filter_map(seg)
                })
                .collect();
            out.extend(tail);
            out
        }
    }
}
