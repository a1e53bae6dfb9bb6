//! `L^p` norms on regions and how much of them survives outside the nodal
//! tube `T_δ`.

use serde::{Deserialize, Serialize};

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::nodal::{sign_class, NodalGeometry};

/// `(Σ_{region} w|φ|^p)^{1/p}`, or the max of `|φ|` when `p` is infinite.
pub fn lp_norm(f: &ScalarField, region: &[usize], p: f64) -> Result<f64> {
    if p.is_infinite() {
        if region.is_empty() {
            return Err(Error::EmptyRegionSup);
        }
        return Ok(region.iter().fold(0.0f64, |m, &i| m.max(f.values[i].abs())));
    }
    check_p(p)?;
    Ok(lp_mass(f, region, p).powf(1.0 / p))
}

/// `Σ_{region} w|φ|^p` for finite `p`.
pub fn lp_mass(f: &ScalarField, region: &[usize], p: f64) -> f64 {
    region.iter().map(|&i| f.grid.weight(i) * pow_abs(f.values[i], p)).sum()
}

/// Norm over the whole grid.
pub fn total_norm(f: &ScalarField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    (0..f.len())
        .map(|i| f.grid.weight(i) * pow_abs(f.values[i], p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn pow_abs(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v.abs()
    } else if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p must lie in [1, ∞], got {p}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub p: f64,
    pub delta: f64,
    pub delta_sqrtlambda: f64,
    pub ratio_total: f64,
    pub ratio_pos: f64,
    pub ratio_neg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub lambda: f64,
    pub rows: Vec<RetentionRow>,
}

impl RetentionReport {
    /// Rows for one exponent, in δ order.
    pub fn for_p(&self, p: f64) -> impl Iterator<Item = &RetentionRow> {
        self.rows.iter().filter(move |r| r.p == p)
    }
}

/// Nodes sorted by decreasing distance to the nodal set, so that every
/// complement `M ∖ T_δ` is a prefix.
struct FarFirst<'a> {
    order: Vec<usize>,
    dist: &'a [f64],
}

impl<'a> FarFirst<'a> {
    fn new(ng: &'a NodalGeometry) -> Self {
        let dist = &ng.distance.values[..];
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
        Self { order, dist }
    }

    /// Number of nodes with `d > δ`.
    fn outside(&self, delta: f64) -> usize {
        self.order.partition_point(|&i| self.dist[i] > delta)
    }
}

/// Cumulative `(total, positive, negative)` masses along `order`; for
/// `p = ∞` running maxima instead of sums.
fn prefix(f: &ScalarField, order: &[usize], p: f64, tol: f64) -> Vec<[f64; 3]> {
    let mut acc = [0.0f64; 3];
    let mut out = Vec::with_capacity(order.len() + 1);
    out.push(acc);
    for &i in order {
        let v = f.values[i];
        let s = sign_class(v, tol);
        if p.is_infinite() {
            let a = v.abs();
            acc[0] = acc[0].max(a);
            match s {
                1 => acc[1] = acc[1].max(a),
                -1 => acc[2] = acc[2].max(a),
                _ => {}
            }
        } else {
            let m = f.grid.weight(i) * pow_abs(v, p);
            acc[0] += m;
            match s {
                1 => acc[1] += m,
                -1 => acc[2] += m,
                _ => {}
            }
        }
        out.push(acc);
    }
    out
}

/// Retention ratios `‖φ‖_{L^p(M∖T_δ)}/‖φ‖_{L^p(M)}` and their signed parts.
pub fn retention(
    f: &ScalarField,
    ng: &NodalGeometry,
    deltas: &[f64],
    ps: &[f64],
) -> Result<RetentionReport> {
    let lambda = f.eigenvalue.unwrap_or(f64::NAN);
    let sqrt_lambda = lambda.sqrt();
    let far = FarFirst::new(ng);
    let mut rows = Vec::with_capacity(deltas.len() * ps.len());
    for &p in ps {
        check_p(p)?;
        let cum = prefix(f, &far.order, p, ng.zero_tol);
        let total = cum[cum.len() - 1][0];
        for &delta in deltas {
            if !(delta >= 0.0) {
                return Err(Error::InvalidArgument(format!("tube width must be >= 0, got {delta}")));
            }
            let k = far.outside(delta);
            let [t, pos, neg] = cum[k];
            let (ratio_total, ratio_pos, ratio_neg) = if p.is_infinite() {
                if k == 0 {
                    return Err(Error::EmptyRegionSup);
                }
                (t / total, pos / total, neg / total)
            } else {
                let r = |m: f64| (m / total).powf(1.0 / p);
                (r(t), r(pos), r(neg))
            };
            rows.push(RetentionRow {
                p,
                delta,
                delta_sqrtlambda: delta * sqrt_lambda,
                ratio_total,
                ratio_pos,
                ratio_neg,
            });
        }
    }
    Ok(RetentionReport { lambda, rows })
}

/// `n` log-spaced values in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// The default normalized tube widths: 24 log-spaced values of `δ√λ` from
/// `10⁻²` up to the measured density constant.
pub fn default_width_grid(ng: &NodalGeometry) -> Vec<f64> {
    let c = ng.density_radius().normalized.unwrap_or(1.0);
    log_space(1e-2, c.max(1e-2), 24)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub delta_sqrtlambda: f64,
    /// `‖φ‖^p_{L^p(T_δ)}` (the sup over the tube when `p = ∞`).
    pub tube_mass: f64,
}

/// Tube mass as a function of normalized width, ending with the full mass.
pub fn tube_mass_profile(f: &ScalarField, ng: &NodalGeometry, p: f64) -> Result<Vec<ProfilePoint>> {
    check_p(p)?;
    let sqrt_lambda = f.sqrt_lambda().ok_or_else(|| {
        Error::InvalidArgument("tube profiles need a field with a known eigenvalue".into())
    })?;
    let dist = &ng.distance.values;
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let cum = prefix(f, &order, p, ng.zero_tol);
    let mut widths = default_width_grid(ng);
    let last = ng.density_radius().radius * sqrt_lambda;
    if widths.last().is_none_or(|w| *w < last) {
        widths.push(last);
    }
    Ok(widths
        .into_iter()
        .map(|w| {
            let delta = w / sqrt_lambda;
            let k = order.partition_point(|&i| dist[i] <= delta);
            ProfilePoint { delta_sqrtlambda: w, tube_mass: cum[k][0] }
        })
        .collect())
}

/// One CSV row: family, seed, lambda, p, delta, delta_sqrtlambda,
/// ratio_total, ratio_pos, ratio_neg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRecord {
    pub family: String,
    pub seed: u64,
    pub lambda: f64,
    pub p: f64,
    pub delta: f64,
    pub delta_sqrtlambda: f64,
    pub ratio_total: f64,
    pub ratio_pos: f64,
    pub ratio_neg: f64,
}

impl RetentionReport {
    pub fn records(&self, family: &str, seed: u64) -> Vec<RetentionRecord> {
        self.rows
            .iter()
            .map(|r| RetentionRecord {
                family: family.to_string(),
                seed,
                lambda: self.lambda,
                p: r.p,
                delta: r.delta,
                delta_sqrtlambda: r.delta_sqrtlambda,
                ratio_total: r.ratio_total,
                ratio_pos: r.ratio_pos,
                ratio_neg: r.ratio_neg,
            })
            .collect()
    }
}
