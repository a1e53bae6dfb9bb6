//! Frequency functions of the harmonic lift `u(x, t) = e^{√λ t} φ(x)` on the
//! product `M × ℝ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eigenmodel::Eigenfunction;
use crate::error::{Error, Result};
use crate::manifold::{cross, from_unit_vector, norm, unit_vector, ManifoldModel, Point};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};

/// A harmonic function on `M × ℝ`.
pub trait HarmonicLift: Sync {
    fn manifold(&self) -> ManifoldModel;
    /// Frequency scale of the function, used to size the quadrature.
    fn bandwidth(&self) -> f64;
    fn value(&self, p: Point, t: f64) -> f64;
    /// `|∇u|²` in the product metric.
    fn grad_sq(&self, p: Point, t: f64) -> f64;
}

impl HarmonicLift for Eigenfunction {
    fn manifold(&self) -> ManifoldModel {
        self.manifold
    }

    fn bandwidth(&self) -> f64 {
        self.sqrt_lambda()
    }

    fn value(&self, p: Point, t: f64) -> f64 {
        (self.sqrt_lambda() * t).exp() * self.evaluate(p)
    }

    fn grad_sq(&self, p: Point, t: f64) -> f64 {
        let phi = self.evaluate(p);
        let g = self.gradient_limit(p).unwrap_or([0.0, 0.0]);
        (2.0 * self.sqrt_lambda() * t).exp() * (g[0] * g[0] + g[1] * g[1] + self.eigenvalue * phi * phi)
    }
}

/// `x₁ + c·(x₁³ − 3x₁x₂²)` in flat coordinates centred at `origin` on a flat
/// torus. Harmonic in `ℝ³`, independent of `t`; its frequency at the origin
/// grows from 1 towards 3 with the radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPolynomial {
    pub manifold: ManifoldModel,
    pub origin: Point,
    pub cubic: f64,
}

impl HarmonicPolynomial {
    fn local(&self, p: Point) -> [f64; 2] {
        self.manifold.torus_delta(self.origin, p)
    }
}

impl HarmonicLift for HarmonicPolynomial {
    fn manifold(&self) -> ManifoldModel {
        self.manifold
    }

    fn bandwidth(&self) -> f64 {
        3.0
    }

    fn value(&self, p: Point, _t: f64) -> f64 {
        let [x, y] = self.local(p);
        x + self.cubic * (x * x * x - 3.0 * x * y * y)
    }

    fn grad_sq(&self, p: Point, _t: f64) -> f64 {
        let [x, y] = self.local(p);
        let gx = 1.0 + self.cubic * (3.0 * x * x - 3.0 * y * y);
        let gy = -6.0 * self.cubic * x * y;
        gx * gx + gy * gy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftConfig {
    /// Largest admissible lift radius.
    pub max_radius: f64,
    /// Allowed relative change of `N` when the surface rule is doubled.
    pub refinement_tol: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self { max_radius: 0.5, refinement_tol: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftFrequency {
    pub r: f64,
    /// Spherical mean of `u²` over `∂B((x, 0), r)`.
    pub h: f64,
    pub h_prime: f64,
    /// `∫_B |∇u|²` divided by the area of `∂B`.
    pub d: f64,
    /// `rH'/(2H)`.
    pub n: f64,
    /// `rD/H`.
    pub n_tilde: f64,
}

/// Geodesic polar coordinates around a base point of `M × ℝ`: maps a
/// tangent displacement `(v₁, v₂)` of the `M` factor to a point of `M`, and
/// gives the area Jacobian relative to flat space.
struct Chart {
    model: ManifoldModel,
    base: Point,
    frame: Option<([f64; 3], [f64; 3], [f64; 3])>,
}

impl Chart {
    fn new(model: ManifoldModel, base: Point) -> Self {
        let frame = match model {
            ManifoldModel::FlatTorus { .. } => None,
            ManifoldModel::RoundSphere { .. } => {
                let x = unit_vector(base);
                let a = if x[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
                let e1 = cross(a, x);
                let n1 = norm(e1);
                let e1 = e1.map(|c| c / n1);
                Some((x, e1, cross(x, e1)))
            }
        };
        Self { model, base, frame }
    }

    fn exp(&self, v: [f64; 2]) -> (Point, f64) {
        match (self.model, self.frame) {
            (ManifoldModel::RoundSphere { radius }, Some((x, e1, e2))) => {
                let s = v[0].hypot(v[1]);
                if s < 1e-300 {
                    return (self.base, 1.0);
                }
                let ang = s / radius;
                let (sa, ca) = ang.sin_cos();
                let (c1, c2) = (v[0] / s, v[1] / s);
                let y: [f64; 3] =
                    std::array::from_fn(|k| ca * x[k] + sa * (c1 * e1[k] + c2 * e2[k]));
                (from_unit_vector(y), sa / ang)
            }
            _ => (Point::new(self.base.u + v[0], self.base.v + v[1]), 1.0),
        }
    }
}

struct SurfaceRule {
    /// `(cos α, sin α, cos β, sin β, weight)` on the unit sphere.
    nodes: Vec<[f64; 5]>,
}

impl SurfaceRule {
    fn new(n_pol: usize) -> Self {
        let (x, w) = gauss_legendre(n_pol);
        let n_az = 2 * n_pol;
        let db = 2.0 * PI / n_az as f64;
        let mut nodes = Vec::with_capacity(n_pol * n_az);
        for (ca, wa) in x.iter().zip(&w) {
            let sa = (1.0 - ca * ca).sqrt();
            for j in 0..n_az {
                let (sb, cb) = (j as f64 * db).sin_cos();
                nodes.push([*ca, sa, cb, sb, wa * db]);
            }
        }
        Self { nodes }
    }

    /// `(∫ g·J dΩ, ∫ J dΩ)` over the sphere of radius `rho` (times `rho²`).
    fn integrate(&self, chart: &Chart, rho: f64, g: impl Fn(Point, f64) -> f64) -> (f64, f64) {
        let (mut num, mut area) = (0.0, 0.0);
        for &[ca, sa, cb, sb, w] in &self.nodes {
            let t = rho * ca;
            let (p, jac) = chart.exp([rho * sa * cb, rho * sa * sb]);
            num += w * jac * g(p, t);
            area += w * jac;
        }
        (num * rho * rho, area * rho * rho)
    }
}

fn frequencies(lift: &dyn HarmonicLift, x: Point, r: f64, n_pol: usize) -> LiftFrequency {
    let chart = Chart::new(lift.manifold(), x);
    let rule = SurfaceRule::new(n_pol);
    let h_mean = |rho: f64| {
        let (num, area) = rule.integrate(&chart, rho, |p, t| lift.value(p, t).powi(2));
        num / area
    };
    let step = r / 50.0;
    let h = h_mean(r);
    let h_prime = (h_mean(r + step) - h_mean(r - step)) / (2.0 * step);
    let (radii, weights) = gauss_legendre_on(24, 0.0, r);
    let dirichlet: f64 = radii
        .iter()
        .zip(&weights)
        .map(|(&rho, &w)| w * rule.integrate(&chart, rho, |p, t| lift.grad_sq(p, t)).0)
        .sum();
    let (_, area) = rule.integrate(&chart, r, |_, _| 0.0);
    let d = dirichlet / area;
    LiftFrequency { r, h, h_prime, d, n: r * h_prime / (2.0 * h), n_tilde: r * d / h }
}

/// `H`, `H'`, `D`, `N` and `Ñ` of the lift on the ball `B((x, 0), r)`.
///
/// `H` is the spherical mean of `u²`, which makes `N` the classical
/// homogeneity degree (exactly 1 for linear functions).
pub fn lift_frequency(
    lift: &dyn HarmonicLift,
    x: Point,
    r: f64,
    cfg: &LiftConfig,
) -> Result<LiftFrequency> {
    let model = lift.manifold();
    let limit = cfg.max_radius.min(model.injectivity_radius());
    if !(r > 0.0) || r > limit {
        return Err(Error::InvalidArgument(format!(
            "lift radius {r} outside (0, {limit}]"
        )));
    }
    let n_pol = 15usize.max((1.2 * lift.bandwidth() * r).ceil() as usize + 10);
    let coarse = frequencies(lift, x, r, n_pol);
    let fine = frequencies(lift, x, r, 2 * n_pol);
    let rel_change = (fine.n - coarse.n).abs() / fine.n.abs().max(1e-12);
    if rel_change > cfg.refinement_tol {
        return Err(Error::QuadratureUnderResolved { rel_change });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodel::{make_gaussian_beam, sine_mode};

    fn linear() -> HarmonicPolynomial {
        HarmonicPolynomial {
            manifold: ManifoldModel::square_torus(),
            origin: Point::new(1.0, 2.0),
            cubic: 0.0,
        }
    }

    #[test]
    fn linear_function_has_frequency_one() {
        for r in [0.05, 0.2, 0.5] {
            let f = lift_frequency(&linear(), Point::new(1.0, 2.0), r, &LiftConfig::default()).unwrap();
            assert!((f.n - 1.0).abs() < 1e-2, "{f:?}");
            assert!((f.n_tilde - 1.0).abs() < 1e-2, "{f:?}");
        }
    }

    #[test]
    fn cubic_perturbation_raises_frequency() {
        let poly = HarmonicPolynomial { cubic: 0.5, ..linear() };
        let cfg = LiftConfig::default();
        let a = lift_frequency(&poly, poly.origin, 0.1, &cfg).unwrap().n;
        let b = lift_frequency(&poly, poly.origin, 0.5, &cfg).unwrap().n;
        assert!(1.0 < a && a < b && b < 3.0, "{a} {b}");
    }

    #[test]
    fn frequency_is_scale_invariant() {
        let e = sine_mode(3).unwrap();
        let x = Point::new(PI / 6.0, 0.0);
        let cfg = LiftConfig::default();
        let a = lift_frequency(&e, x, 0.2, &cfg).unwrap();
        let mut scaled = e.clone();
        if let crate::eigenmodel::Family::TorusMode { terms } = &mut scaled.family {
            terms[0].amplitude = 7.5;
        }
        let b = lift_frequency(&scaled, x, 0.2, &cfg).unwrap();
        assert!((a.n - b.n).abs() < 1e-12 && (a.n_tilde - b.n_tilde).abs() < 1e-12);
    }

    #[test]
    fn sine_lift_frequencies_agree() {
        // for a harmonic function N and Ñ coincide with normalized H
        let e = sine_mode(3).unwrap();
        let f = lift_frequency(&e, Point::new(PI / 6.0, 0.0), 0.2, &LiftConfig::default()).unwrap();
        assert!((f.n - f.n_tilde).abs() / f.n < 1e-3, "{f:?}");
    }

    #[test]
    fn sphere_lift_is_resolved() {
        let e = make_gaussian_beam(&ManifoldModel::unit_sphere(), 10).unwrap();
        let f = lift_frequency(&e, Point::new(PI / 2.0, 0.1), 0.3, &LiftConfig::default()).unwrap();
        assert!(f.h > 0.0 && f.n > 0.0 && f.n_tilde > 0.0);
    }

    #[test]
    fn radius_limit_enforced() {
        let e = sine_mode(3).unwrap();
        let err = lift_frequency(&e, Point::new(0.0, 0.0), 0.8, &LiftConfig::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
