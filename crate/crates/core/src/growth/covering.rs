//! Wavelength coverings whose balls meet the nodal set deeply, and good-ball
//! classification.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point, SampleGrid};
use crate::massconc::lp_mass;
use crate::nodal::NodalGeometry;

use super::lift::{lift_frequency, HarmonicLift, LiftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverBall {
    pub center: Point,
    /// `N_φ ∩ ½B ≠ ∅`.
    pub deep: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub r: f64,
    pub balls: Vec<CoverBall>,
    /// Largest number of doubled balls `2B_j` containing one grid node.
    pub multiplicity: usize,
}

/// Sites per period `len`: spacing at least `s` unless that would stretch it
/// past `1.25 s`.
fn sites(len: f64, s: f64) -> usize {
    let n = ((len / s).floor() as usize).max(1);
    if len / n as f64 > 1.25 * s {
        (len / s).ceil() as usize
    } else {
        n
    }
}

/// Lattice sites with spacing close to `s`, row by row.
fn lattice(m: &ManifoldModel, s: f64) -> Vec<Point> {
    match *m {
        ManifoldModel::FlatTorus { lx, ly } => {
            let (nx, ny) = (sites(lx, s), sites(ly, s));
            let mut out = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Point::new(i as f64 * lx / nx as f64, j as f64 * ly / ny as f64));
                }
            }
            out
        }
        ManifoldModel::RoundSphere { radius } => {
            let rings = sites(PI * radius, s);
            let mut out = Vec::new();
            for i in 0..rings {
                let theta = (i as f64 + 0.5) * PI / rings as f64;
                let count = sites(2.0 * PI * radius * theta.sin(), s);
                for j in 0..count {
                    out.push(Point::new(theta, 2.0 * PI * j as f64 / count as f64));
                }
            }
            out
        }
    }
}

/// Balls of radius `r = r₀/√λ` centred on a lattice of spacing `r`. Each
/// site whose half-ball misses the nodal set is moved to the nearest grid
/// node within `r/4` whose half-ball does meet it, or dropped.
pub fn build_covering(
    grid: &SampleGrid,
    ng: &NodalGeometry,
    lambda: f64,
    r0: f64,
) -> Result<Covering> {
    let r = r0 / lambda.sqrt();
    let h = grid.spacing();
    if r < 3.0 * h {
        return Err(Error::InvalidArgument(format!(
            "covering radius {r} is below 3h = {}",
            3.0 * h
        )));
    }
    let m = grid.model();
    let shift = 0.25 * r;
    let mut balls = Vec::new();
    for site in lattice(m, r) {
        if ng.distance_to_nodal_set(site) <= 0.5 * r {
            balls.push(CoverBall { center: site, deep: true });
            continue;
        }
        let moved = grid
            .metric_ball(site, shift)?
            .into_iter()
            .filter(|&i| ng.distance.values[i] <= 0.5 * r)
            .map(|i| (m.geodesic_distance(site, grid.point(i)), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = moved {
            balls.push(CoverBall { center: grid.point(i), deep: true });
        }
    }
    let mut covered = vec![false; grid.len()];
    let mut count = vec![0usize; grid.len()];
    for b in &balls {
        for i in grid.metric_ball(b.center, r)? {
            covered[i] = true;
        }
        for i in grid.metric_ball(b.center, 2.0 * r)? {
            count[i] += 1;
        }
    }
    let uncovered = covered.iter().filter(|c| !**c).count();
    if uncovered > 0 {
        return Err(Error::CoverageGap { uncovered });
    }
    Ok(Covering { r, balls, multiplicity: count.into_iter().max().unwrap_or(0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallVerdict {
    /// `‖φ‖^p_{L^p(2B)} / ‖φ‖^p_{L^p(B)}`.
    pub np_ratio: f64,
    pub good_doubling: bool,
    pub n_lift: Option<f64>,
    pub good_frequency: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodBallReport {
    pub d: f64,
    pub p: f64,
    pub r: f64,
    pub centers: Vec<Point>,
    pub deep: Vec<bool>,
    pub verdicts: Vec<BallVerdict>,
    pub good: usize,
    pub bad: usize,
    /// `‖φ‖^p_{L^p(G_d)} / ‖φ‖^p_{L^p(M)}`.
    pub mass_fraction: f64,
    pub multiplicity: usize,
}

impl GoodBallReport {
    /// The good-ball mass bound `1 − fraction ≤ C_mult·2^{-d}` with the
    /// measured multiplicity as `C_mult`.
    pub fn satisfies_mass_bound(&self) -> bool {
        1.0 - self.mass_fraction <= self.multiplicity as f64 * 2f64.powf(-self.d) + 1e-12
    }

    pub fn records(&self) -> Vec<GoodBallRecord> {
        self.verdicts
            .iter()
            .enumerate()
            .map(|(k, v)| GoodBallRecord {
                ball_index: k,
                center: format!("{} {}", self.centers[k].u, self.centers[k].v),
                r: self.r,
                np_ratio: v.np_ratio,
                good_doubling: v.good_doubling,
                n_lift: v.n_lift,
                good_frequency: v.good_frequency,
                deep_flag: self.deep[k],
            })
            .collect()
    }
}

/// CSV row: ball_index, center, r, Np_ratio, good_doubling, N_lift,
/// good_frequency, deep_flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodBallRecord {
    pub ball_index: usize,
    pub center: String,
    pub r: f64,
    #[serde(rename = "Np_ratio")]
    pub np_ratio: f64,
    pub good_doubling: bool,
    #[serde(rename = "N_lift")]
    pub n_lift: Option<f64>,
    pub good_frequency: Option<bool>,
    pub deep_flag: bool,
}

/// Classify every covering ball as `d`-good by `L^p` doubling (mass ratio at
/// most `2^d`) and, when a lift is supplied, by lift frequency (`N ≤ d`).
pub fn classify_good_balls(
    f: &ScalarField,
    covering: &Covering,
    d: f64,
    p: f64,
    lift: Option<(&dyn HarmonicLift, &LiftConfig)>,
) -> Result<GoodBallReport> {
    let grid = &f.grid;
    let r = covering.r;
    let mut in_good = vec![false; grid.len()];
    let mut verdicts = Vec::with_capacity(covering.balls.len());
    for b in &covering.balls {
        let inner = grid.metric_ball(b.center, r)?;
        let outer = grid.metric_ball(b.center, 2.0 * r)?;
        let mi = lp_mass(f, &inner, p);
        let np_ratio = if mi > 0.0 { lp_mass(f, &outer, p) / mi } else { f64::INFINITY };
        let good_doubling = np_ratio <= 2f64.powf(d);
        if good_doubling {
            for &i in &inner {
                in_good[i] = true;
            }
        }
        let n_lift = match lift {
            Some((l, cfg)) => Some(lift_frequency(l, b.center, r, cfg)?.n),
            None => None,
        };
        verdicts.push(BallVerdict {
            np_ratio,
            good_doubling,
            n_lift,
            good_frequency: n_lift.map(|n| n <= d),
        });
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    let good_nodes: Vec<usize> = all.iter().copied().filter(|&i| in_good[i]).collect();
    let total = lp_mass(f, &all, p);
    let good = verdicts.iter().filter(|v| v.good_doubling).count();
    Ok(GoodBallReport {
        d,
        p,
        r,
        centers: covering.balls.iter().map(|b| b.center).collect(),
        deep: covering.balls.iter().map(|b| b.deep).collect(),
        good,
        bad: verdicts.len() - good,
        verdicts,
        mass_fraction: lp_mass(f, &good_nodes, p) / total,
        multiplicity: covering.multiplicity,
    })
}
