//! Bucket index over nodal segments for exact point-to-nodal-set distances.

use std::collections::HashMap;

use crate::manifold::{angle_between, cross, dot, norm, unit_vector, ManifoldModel, Point};

use super::marching::Segment;

#[derive(Debug, Clone)]
pub(crate) enum SegmentIndex {
    /// Periodic 2-D buckets in CSR layout.
    Torus {
        model: ManifoldModel,
        nb: [usize; 2],
        width: [f64; 2],
        offsets: Vec<usize>,
        items: Vec<u32>,
        /// Reduced midpoints and half-vectors.
        mids: Vec<[f64; 2]>,
        halves: Vec<[f64; 2]>,
    },
    /// 3-D buckets over the ambient embedding.
    Sphere {
        radius: f64,
        width: f64,
        buckets: HashMap<[i32; 3], Vec<u32>>,
        /// Unit endpoints and unit normals of the great-circle arcs.
        ends: Vec<([f64; 3], [f64; 3])>,
        normals: Vec<Option<[f64; 3]>>,
        /// Largest bucket offset that can still hold points of the sphere.
        max_shell: i32,
    },
}

impl SegmentIndex {
    pub(crate) fn new(model: &ManifoldModel, segments: &[Segment], bucket: f64) -> Self {
        match *model {
            ManifoldModel::FlatTorus { lx, ly } => {
                let nb = [((lx / bucket).floor() as usize).max(1), ((ly / bucket).floor() as usize).max(1)];
                let width = [lx / nb[0] as f64, ly / nb[1] as f64];
                let mut mids = Vec::with_capacity(segments.len());
                let mut halves = Vec::with_capacity(segments.len());
                let mut cells: Vec<Vec<u32>> = vec![Vec::new(); nb[0] * nb[1]];
                for (s, seg) in segments.iter().enumerate() {
                    let mid = model.reduce(Point::new(
                        0.5 * (seg.a[0] + seg.b[0]),
                        0.5 * (seg.a[1] + seg.b[1]),
                    ));
                    let half = [0.5 * (seg.b[0] - seg.a[0]), 0.5 * (seg.b[1] - seg.a[1])];
                    let lo = [mid.u - half[0].abs(), mid.v - half[1].abs()];
                    let hi = [mid.u + half[0].abs(), mid.v + half[1].abs()];
                    let bx = (lo[0] / width[0]).floor() as i64..=(hi[0] / width[0]).floor() as i64;
                    let by = (lo[1] / width[1]).floor() as i64..=(hi[1] / width[1]).floor() as i64;
                    for y in by {
                        for x in bx.clone() {
                            let cx = x.rem_euclid(nb[0] as i64) as usize;
                            let cy = y.rem_euclid(nb[1] as i64) as usize;
                            let cell = &mut cells[cy * nb[0] + cx];
                            if cell.last() != Some(&(s as u32)) {
                                cell.push(s as u32);
                            }
                        }
                    }
                    mids.push([mid.u, mid.v]);
                    halves.push(half);
                }
                let mut offsets = Vec::with_capacity(cells.len() + 1);
                let mut items = Vec::new();
                offsets.push(0);
                for c in cells {
                    items.extend(c);
                    offsets.push(items.len());
                }
                Self::Torus { model: *model, nb, width, offsets, items, mids, halves }
            }
            ManifoldModel::RoundSphere { radius } => {
                let mut buckets: HashMap<[i32; 3], Vec<u32>> = HashMap::new();
                let mut ends = Vec::with_capacity(segments.len());
                let mut normals = Vec::with_capacity(segments.len());
                let key = |x: f64| (x / bucket).floor() as i32;
                for (s, seg) in segments.iter().enumerate() {
                    // the arc bulges past its chord by at most the sagitta
                    let pad = seg.length * seg.length / (8.0 * radius) + 1e-12;
                    let lo: [i32; 3] = std::array::from_fn(|k| key(seg.a[k].min(seg.b[k]) - pad));
                    let hi: [i32; 3] = std::array::from_fn(|k| key(seg.a[k].max(seg.b[k]) + pad));
                    for x in lo[0]..=hi[0] {
                        for y in lo[1]..=hi[1] {
                            for z in lo[2]..=hi[2] {
                                buckets.entry([x, y, z]).or_default().push(s as u32);
                            }
                        }
                    }
                    let ua = seg.a.map(|c| c / radius);
                    let ub = seg.b.map(|c| c / radius);
                    let n = cross(ua, ub);
                    let nn = norm(n);
                    normals.push((nn > 1e-15).then(|| n.map(|c| c / nn)));
                    ends.push((ua, ub));
                }
                let max_shell = (2.0 * radius / bucket).ceil() as i32 + 2;
                Self::Sphere { radius, width: bucket, buckets, ends, normals, max_shell }
            }
        }
    }

    /// Exact distance from `p` to the nearest indexed segment, or `None` if
    /// nothing lies within `cap`.
    pub(crate) fn nearest(&self, p: Point, cap: f64) -> Option<f64> {
        match self {
            Self::Torus { model, nb, width, offsets, items, mids, halves } => {
                if items.is_empty() {
                    return None;
                }
                let p = model.reduce(p);
                let bx = ((p.u / width[0]).floor() as i64).rem_euclid(nb[0] as i64);
                let by = ((p.v / width[1]).floor() as i64).rem_euclid(nb[1] as i64);
                let wmin = width[0].min(width[1]);
                let kmax = nb[0].max(nb[1]) as i64 / 2 + 1;
                let mut best = f64::INFINITY;
                for k in 0..=kmax {
                    for dy in -k..=k {
                        for dx in -k..=k {
                            if dx.abs() != k && dy.abs() != k {
                                continue;
                            }
                            let cx = (bx + dx).rem_euclid(nb[0] as i64) as usize;
                            let cy = (by + dy).rem_euclid(nb[1] as i64) as usize;
                            let cell = cy * nb[0] + cx;
                            for &s in &items[offsets[cell]..offsets[cell + 1]] {
                                let s = s as usize;
                                let m = Point::new(mids[s][0], mids[s][1]);
                                let d = model.torus_delta(p, m);
                                best = best.min(origin_to_segment(d, halves[s]));
                            }
                        }
                    }
                    let reach = k as f64 * wmin;
                    if best <= reach {
                        break;
                    }
                    if reach > cap {
                        return None;
                    }
                }
                (best <= cap).then_some(best)
            }
            Self::Sphere { radius, width, buckets, ends, normals, max_shell } => {
                if ends.is_empty() {
                    return None;
                }
                let u = unit_vector(p);
                let key: [i32; 3] = std::array::from_fn(|k| (radius * u[k] / width).floor() as i32);
                let mut best = f64::INFINITY;
                for k in 0..=*max_shell {
                    for x in -k..=k {
                        for y in -k..=k {
                            for z in -k..=k {
                                if x.abs() != k && y.abs() != k && z.abs() != k {
                                    continue;
                                }
                                let Some(list) = buckets.get(&[key[0] + x, key[1] + y, key[2] + z])
                                else {
                                    continue;
                                };
                                for &s in list {
                                    let s = s as usize;
                                    let d = point_to_arc(u, ends[s], normals[s]);
                                    best = best.min(radius * d);
                                }
                            }
                        }
                    }
                    let reach = k as f64 * width;
                    if best <= reach {
                        break;
                    }
                    if reach > cap {
                        return None;
                    }
                }
                (best <= cap).then_some(best)
            }
        }
    }
}

/// Distance from the origin to the segment `mid ± half`.
fn origin_to_segment(mid: [f64; 2], half: [f64; 2]) -> f64 {
    let a = [mid[0] - half[0], mid[1] - half[1]];
    let e = [2.0 * half[0], 2.0 * half[1]];
    let ee = e[0] * e[0] + e[1] * e[1];
    let t = if ee > 0.0 { (-(a[0] * e[0] + a[1] * e[1]) / ee).clamp(0.0, 1.0) } else { 0.0 };
    (a[0] + t * e[0]).hypot(a[1] + t * e[1])
}

/// Angle from the unit vector `p` to the great-circle arc between unit
/// endpoints.
fn point_to_arc(p: [f64; 3], (a, b): ([f64; 3], [f64; 3]), normal: Option<[f64; 3]>) -> f64 {
    let endpoint = angle_between(p, a).min(angle_between(p, b));
    let Some(n) = normal else {
        return endpoint;
    };
    let pn = dot(p, n);
    let q = [p[0] - pn * n[0], p[1] - pn * n[1], p[2] - pn * n[2]];
    if norm(q) < 1e-15 {
        return endpoint;
    }
    if dot(cross(a, q), n) >= 0.0 && dot(cross(q, b), n) >= 0.0 {
        pn.abs().min(1.0).asin()
    } else {
        endpoint
    }
}
