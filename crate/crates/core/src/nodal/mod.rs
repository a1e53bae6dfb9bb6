//! Nodal sets, nodal domains, distance to the nodal set and the geometric
//! quantities built on it (tubes, density radius, asymmetry, inscribed balls).

mod index;
mod marching;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::manifold::{Point, SampleGrid};

use index::SegmentIndex;
pub use marching::Segment;

/// Values with `|φ| < ZERO_BAND · max|φ|` count as lying on the nodal set.
pub const ZERO_BAND: f64 = 1e-12;

/// Exact segment distances are computed out to this many wavelengths; farther
/// nodes get graph distances.
pub const EXACT_WAVELENGTHS: f64 = 3.0;

/// Sign class of a node: `1`, `-1`, or `0` inside the zero band.
pub fn sign_class(v: f64, tol: f64) -> i8 {
    if v.abs() < tol {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Flood-filled nodal domains. Label `0` marks zero-band nodes; label
/// `k ≥ 1` has sign `signs[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalDomains {
    pub labels: Vec<u32>,
    pub signs: Vec<i8>,
}

impl NodalDomains {
    pub fn count(&self) -> usize {
        self.signs.len()
    }
}

pub fn nodal_domains(f: &ScalarField) -> NodalDomains {
    let grid = &f.grid;
    let tol = ZERO_BAND * f.max_abs();
    let class: Vec<i8> = f.values.iter().map(|&v| sign_class(v, tol)).collect();
    let mut labels = vec![0u32; grid.len()];
    let mut signs = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..grid.len() {
        if class[seed] == 0 || labels[seed] != 0 {
            continue;
        }
        signs.push(class[seed]);
        let label = signs.len() as u32;
        labels[seed] = label;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for (j, _) in grid.axis_neighbors(i) {
                if labels[j] == 0 && class[j] == class[seed] {
                    labels[j] = label;
                    stack.push(j);
                }
            }
        }
    }
    NodalDomains { labels, signs }
}

#[derive(Debug, Clone)]
pub struct NodalGeometry {
    pub segments: Vec<Segment>,
    /// Total `H¹` measure of the segments.
    pub length: f64,
    /// `d(x, N_φ)` at every node.
    pub distance: ScalarField,
    pub domains: NodalDomains,
    pub zero_tol: f64,
    index: SegmentIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRadius {
    pub radius: f64,
    /// `radius · √λ`, when the eigenvalue is known.
    pub normalized: Option<f64>,
}

/// Serializable digest for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodalSummary {
    pub segments: Vec<[[f64; 2]; 2]>,
    pub domain_count: usize,
    pub length: f64,
    pub density_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeSplit {
    pub tube: Vec<usize>,
    pub complement: Vec<usize>,
}

pub fn extract_nodal_set(f: &ScalarField) -> Result<NodalGeometry> {
    let grid = &f.grid;
    let model = *grid.model();
    let tol = ZERO_BAND * f.max_abs();
    let cleaned: Vec<f64> =
        f.values.iter().map(|&v| if v.abs() < tol { 0.0 } else { v }).collect();
    // contour the raw values: the band only decides labels and seeds, and
    // tiny but smooth values (beam poles) still carry sign information
    let segments = marching::march(grid, &f.values);
    let any_band = cleaned.contains(&0.0);
    if segments.is_empty() && !any_band {
        return Err(Error::NoZeroCrossing);
    }
    let length = segments.iter().map(|s| s.length).sum();
    let h = grid.spacing();
    let wavelength = f.sqrt_lambda().filter(|k| *k > 0.0).map(|k| 2.0 * PI / k);
    // typical node-to-nodal-set distances are a fraction of a wavelength
    let bucket = wavelength.map_or(2.0 * h, |w| (w / 8.0).max(2.0 * h));
    let index = SegmentIndex::new(&model, &segments, bucket);
    let cap = wavelength.map_or(f64::INFINITY, |w| EXACT_WAVELENGTHS * w);
    let exact: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| if cleaned[i] == 0.0 { Some(0.0) } else { index.nearest(grid.point(i), cap) })
        .collect();
    let distance = graph_fill(grid, exact);
    Ok(NodalGeometry {
        segments,
        length,
        distance: ScalarField {
            grid: Arc::clone(grid),
            values: distance,
            eigenvalue: f.eigenvalue,
        },
        domains: nodal_domains(f),
        zero_tol: tol,
        index,
    })
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Multi-source Dijkstra over the grid graph from all nodes with known
/// values; a no-op when every node is already known.
fn graph_fill(grid: &SampleGrid, known: Vec<Option<f64>>) -> Vec<f64> {
    if known.iter().all(Option::is_some) {
        return known.into_iter().map(Option::unwrap).collect();
    }
    let sources = known
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|d| (i, d)));
    multi_source_dijkstra(grid, sources)
}

/// Graph distances from a set of weighted sources.
pub fn multi_source_dijkstra(
    grid: &SampleGrid,
    sources: impl IntoIterator<Item = (usize, f64)>,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut heap = BinaryHeap::new();
    for (i, d) in sources {
        if d < dist[i] {
            dist[i] = d;
            heap.push(Reverse((Dist(d), i)));
        }
    }
    while let Some(Reverse((Dist(d), i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        for (j, len) in grid.neighbors(i) {
            let nd = d + len;
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((Dist(nd), j)));
            }
        }
    }
    dist
}

impl NodalGeometry {
    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.distance.grid
    }

    /// Exact distance from an arbitrary point to the extracted nodal set.
    pub fn distance_to_nodal_set(&self, p: Point) -> f64 {
        self.index.nearest(p, f64::INFINITY).unwrap_or(f64::INFINITY)
    }

    pub fn tube_mask(&self, delta: f64) -> TubeSplit {
        let (tube, complement) =
            (0..self.distance.len()).partition(|&i| self.distance.values[i] <= delta);
        TubeSplit { tube, complement }
    }

    pub fn density_radius(&self) -> DensityRadius {
        let radius = self.distance.max_abs();
        DensityRadius { radius, normalized: self.distance.sqrt_lambda().map(|k| radius * k) }
    }

    pub fn summary(&self) -> NodalSummary {
        let m = *self.grid().model();
        NodalSummary {
            segments: self
                .segments
                .iter()
                .map(|s| {
                    let [a, b] = s.chart_endpoints(&m);
                    [[a.u, a.v], [b.u, b.v]]
                })
                .collect(),
            domain_count: self.domains.count(),
            length: self.length,
            density_radius: self.density_radius().radius,
        }
    }

    /// Per-domain area, `L¹` mass and inradius (largest distance to the
    /// nodal set inside the domain).
    pub fn domain_stats(&self, f: &ScalarField) -> Vec<DomainStat> {
        let mut stats: Vec<DomainStat> = self
            .domains
            .signs
            .iter()
            .enumerate()
            .map(|(k, &sign)| DomainStat {
                label: k as u32 + 1,
                sign,
                area: 0.0,
                l1_mass: 0.0,
                inradius: 0.0,
            })
            .collect();
        let grid = self.grid();
        for (i, &label) in self.domains.labels.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let s = &mut stats[label as usize - 1];
            let w = grid.weight(i);
            s.area += w;
            s.l1_mass += w * f.values[i].abs();
            s.inradius = s.inradius.max(self.distance.values[i]);
        }
        stats
    }

    /// Twice the smallest inradius over domains that carry at least half the
    /// mean domain `L¹` mass: `π/k` for `sin kx`. Slivers created by the grid
    /// are ignored by the mass cut.
    pub fn nodal_spacing(&self, f: &ScalarField) -> f64 {
        let stats = self.domain_stats(f);
        if stats.is_empty() {
            return 0.0;
        }
        let mean = stats.iter().map(|s| s.l1_mass).sum::<f64>() / stats.len() as f64;
        2.0 * stats
            .iter()
            .filter(|s| s.l1_mass >= 0.5 * mean)
            .map(|s| s.inradius)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainStat {
    pub label: u32,
    pub sign: i8,
    pub area: f64,
    pub l1_mass: f64,
    pub inradius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    /// `|{φ > 0} ∩ B| / |B|`, zero-band nodes counting one half.
    pub ratio: f64,
    /// The half-ball `B(x, r/2)` does not meet the nodal set.
    pub misses_nodal_set: bool,
}

/// Positive-volume fraction of `B(center, r)`.
pub fn asymmetry_ratio(
    f: &ScalarField,
    ng: &NodalGeometry,
    center: Point,
    r: f64,
) -> Result<Asymmetry> {
    let ball = f.grid.metric_ball(center, r)?;
    let (mut pos, mut all) = (0.0, 0.0);
    for &i in &ball {
        let w = f.grid.weight(i);
        all += w;
        match sign_class(f.values[i], ng.zero_tol) {
            1 => pos += w,
            // zero-band nodes straddle the nodal set
            0 => pos += 0.5 * w,
            _ => {}
        }
    }
    Ok(Asymmetry {
        ratio: pos / all,
        misses_nodal_set: ng.distance_to_nodal_set(center) > 0.5 * r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignBall {
    pub node: usize,
    pub center: Point,
    pub radius: f64,
}

/// Largest ball of the requested sign inside `B(center, r)`, centred on a grid
/// node. Ties go to the chart-lexicographically smallest node.
pub fn inscribed_sign_ball(
    f: &ScalarField,
    ng: &NodalGeometry,
    center: Point,
    r: f64,
    sign: i8,
) -> Result<SignBall> {
    let grid = &f.grid;
    if r < 2.0 * grid.spacing() {
        return Err(Error::InvalidArgument(format!(
            "inscribed ball needs r >= 2h, got r = {r}, h = {}",
            grid.spacing()
        )));
    }
    let m = grid.model();
    let mut best: Option<SignBall> = None;
    for i in grid.metric_ball(center, r)? {
        if sign_class(f.values[i], ng.zero_tol) != sign.signum() {
            continue;
        }
        let p = grid.point(i);
        let value = ng.distance.values[i].min(r - m.geodesic_distance(p, center));
        let better = match best {
            None => true,
            Some(b) => {
                value > b.radius
                    || (value == b.radius && (p.u, p.v) < (b.center.u, b.center.v))
            }
        };
        if better {
            best = Some(SignBall { node: i, center: p, radius: value });
        }
    }
    best.ok_or(Error::NoSignPresent(sign.signum()))
}
