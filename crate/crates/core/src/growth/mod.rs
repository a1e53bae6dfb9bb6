//! Doubling exponents, lift frequency functions, wavelength coverings and
//! good-ball classification.

mod covering;
mod lift;

use serde::{Deserialize, Serialize};

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::manifold::Point;
use crate::massconc::lp_mass;

pub use covering::{build_covering, classify_good_balls, BallVerdict, CoverBall, Covering, GoodBallRecord, GoodBallReport};
pub use lift::{lift_frequency, HarmonicLift, HarmonicPolynomial, LiftConfig, LiftFrequency};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthConfig {
    /// Largest lift radius `R₀`.
    pub lift_radius: f64,
    /// Frequencies below `N₀` are not "large".
    pub n0: f64,
    /// Almost-monotonicity slack.
    pub epsilon: f64,
    /// Largest acceptable covering multiplicity.
    pub c_mult: usize,
    /// Covering radius in wavelength units, `r = r₀/√λ`.
    pub r0: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self { lift_radius: 0.5, n0: 10.0, epsilon: 0.1, c_mult: 16, r0: 4.0 }
    }
}

/// Quadrature noise allowed on top of `ε` in monotonicity checks.
pub const QUADRATURE_SLACK: f64 = 0.01;

/// `log(sup_{B(x,2r)}|φ| / sup_{B(x,r)}|φ|)`.
pub fn doubling_exponent(f: &ScalarField, x: Point, r: f64) -> Result<f64> {
    let sup = |ball: Vec<usize>| ball.iter().fold(0.0f64, |m, &i| m.max(f.values[i].abs()));
    let inner = sup(f.grid.metric_ball(x, r)?);
    if inner < 1e-14 * f.max_abs() {
        return Err(Error::ZeroOnBall { sup: inner });
    }
    let outer = sup(f.grid.metric_ball(x, 2.0 * r)?);
    Ok((outer / inner).ln())
}

/// `log(‖φ‖^p_{L^p(B(x,2r))} / ‖φ‖^p_{L^p(B(x,r))})`.
pub fn lp_doubling_exponent(f: &ScalarField, x: Point, r: f64, p: f64) -> Result<f64> {
    let inner_ball = f.grid.metric_ball(x, r)?;
    let inner = lp_mass(f, &inner_ball, p);
    let total = lp_mass(f, &(0..f.len()).collect::<Vec<_>>(), p);
    if inner < 1e-28 * total {
        return Err(Error::ZeroOnBall { sup: inner });
    }
    let outer = lp_mass(f, &f.grid.metric_ball(x, 2.0 * r)?, p);
    Ok((outer / inner).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub r1: f64,
    pub r2: f64,
    pub n1: f64,
    pub n2: f64,
}

/// Pairs `r₁ < r₂` with `N(r₁) > N(r₂)(1 + ε)` beyond the quadrature slack.
pub fn check_almost_monotonicity(
    lift: &dyn HarmonicLift,
    x: Point,
    radii: &[f64],
    epsilon: f64,
    cfg: &LiftConfig,
) -> Result<Vec<Violation>> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("radius grid must be increasing".into()));
    }
    let ns = radii
        .iter()
        .map(|&r| lift_frequency(lift, x, r, cfg).map(|f| f.n))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..ns.len() {
        for j in i + 1..ns.len() {
            if ns[i] > ns[j] * (1.0 + epsilon) * (1.0 + QUADRATURE_SLACK) {
                out.push(Violation { r1: radii[i], r2: radii[j], n1: ns[i], n2: ns[j] });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborCheck {
    pub verdict: Verdict,
    pub n1: f64,
    pub n2: f64,
}

/// Tests `N(x₂, C*τ) > 0.99·N(x₁, τ)`; skipped unless both frequencies
/// reach `N₀`.
pub fn neighbor_frequency_check(
    lift: &dyn HarmonicLift,
    x1: Point,
    x2: Point,
    tau: f64,
    c_star: f64,
    n0: f64,
    cfg: &LiftConfig,
) -> Result<NeighborCheck> {
    let d = lift.manifold().geodesic_distance(x1, x2);
    if d >= tau {
        return Err(Error::InvalidArgument(format!("points {d} apart, need < τ = {tau}")));
    }
    let n1 = lift_frequency(lift, x1, tau, cfg)?.n;
    let n2 = lift_frequency(lift, x2, c_star * tau, cfg)?.n;
    let verdict = if n1 < n0 || n2 < n0 {
        Verdict::Skipped
    } else if n2 > 0.99 * n1 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(NeighborCheck { verdict, n1, n2 })
}

/// Affine envelope `y ≤ a·x + b` over all pairs: `a` from least squares,
/// `b` the smallest offset that makes it hold.
pub fn envelope_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("envelope fit needs >= 2 paired values".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let b = xs.iter().zip(ys).map(|(x, y)| y - a * x).fold(f64::NEG_INFINITY, f64::max);
    Ok((a, b))
}
