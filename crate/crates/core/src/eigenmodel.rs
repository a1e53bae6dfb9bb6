//! Closed-form Laplace eigenfunctions and their sampled fields.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point, SampleGrid};

/// One summand `a·sin(2πk x/L_x + 2πl y/L_y + ψ)` of a torus mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusTerm {
    pub k: i64,
    pub l: i64,
    pub amplitude: f64,
    pub phase: f64,
}

impl TorusTerm {
    pub fn new(k: i64, l: i64, amplitude: f64, phase: f64) -> Self {
        Self { k, l, amplitude, phase }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    TorusMode { terms: Vec<TorusTerm> },
    /// Real harmonic `amp·P̄_ℓ^|m|(cos θ)·cos(mϕ)`, with `sin(|m|ϕ)` for `m < 0`.
    /// `P̄` is normalized to unit `L²(-1, 1)` norm.
    SphereHarmonic { degree: usize, order: i64, amplitude: f64 },
    /// `Re(x₁ + ix₂)^ℓ` restricted to the sphere: `sin^ℓθ·cos ℓϕ`.
    GaussianBeam { degree: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub manifold: ManifoldModel,
    pub eigenvalue: f64,
    pub family: Family,
}

fn torus_wavevector(m: &ManifoldModel, t: &TorusTerm) -> [f64; 2] {
    match *m {
        ManifoldModel::FlatTorus { lx, ly } => {
            [2.0 * PI * t.k as f64 / lx, 2.0 * PI * t.l as f64 / ly]
        }
        ManifoldModel::RoundSphere { .. } => unreachable!("torus term on a sphere"),
    }
}

/// Torus mode on an arbitrary flat torus; every summand must share `λ`.
pub fn make_torus_mode(m: &ManifoldModel, terms: Vec<TorusTerm>) -> Result<Eigenfunction> {
    if !m.is_torus() {
        return Err(Error::InvalidArgument("torus modes need a flat torus".into()));
    }
    if terms.is_empty() {
        return Err(Error::InvalidArgument("torus mode needs at least one term".into()));
    }
    if terms.iter().all(|t| t.amplitude == 0.0) {
        return Err(Error::InvalidArgument("all torus mode amplitudes are zero".into()));
    }
    let lam = |t: &TorusTerm| {
        let [a, b] = torus_wavevector(m, t);
        a * a + b * b
    };
    let first = lam(&terms[0]);
    for t in &terms[1..] {
        let other = lam(t);
        if (other - first).abs() > 1e-12 * first.max(1.0) {
            return Err(Error::MixedEigenvalue { first, other });
        }
    }
    if first == 0.0 {
        return Err(Error::InvalidArgument("the constant mode is excluded".into()));
    }
    Ok(Eigenfunction { manifold: *m, eigenvalue: first, family: Family::TorusMode { terms } })
}

/// `sin kx` on the 2π-torus.
pub fn sine_mode(k: i64) -> Result<Eigenfunction> {
    make_torus_mode(&ManifoldModel::square_torus(), vec![TorusTerm::new(k, 0, 1.0, 0.0)])
}

/// Lattice points `(a, b)` with `a² + b² = n`, one per `±` pair.
pub fn lattice_representatives(n: u64) -> Vec<(i64, i64)> {
    let r = (n as f64).sqrt().ceil() as i64 + 1;
    let mut out = Vec::new();
    for a in 0..=r {
        for b in -r..=r {
            if (a * a + b * b) as u64 == n && (a > 0 || b > 0) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Gaussian random element of the `λ = n` eigenspace of the 2π-torus:
/// standard normal amplitudes and uniform phases over the lattice
/// representatives of `a² + b² = n`.
pub fn random_torus_combination(n: u64, seed: u64) -> Result<Eigenfunction> {
    let reps = lattice_representatives(n);
    if reps.is_empty() {
        return Err(Error::InvalidArgument(format!("{n} is not a sum of two squares")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = reps
        .into_iter()
        .map(|(k, l)| {
            let a: f64 = rng.sample(StandardNormal);
            let psi = rng.random_range(0.0..2.0 * PI);
            TorusTerm::new(k, l, a, psi)
        })
        .collect();
    make_torus_mode(&ManifoldModel::square_torus(), terms)
}

pub fn make_gaussian_beam(m: &ManifoldModel, degree: usize) -> Result<Eigenfunction> {
    let ManifoldModel::RoundSphere { radius } = *m else {
        return Err(Error::InvalidArgument("gaussian beams live on the sphere".into()));
    };
    if degree == 0 {
        return Err(Error::InvalidArgument("gaussian beam degree must be >= 1".into()));
    }
    let l = degree as f64;
    Ok(Eigenfunction {
        manifold: *m,
        eigenvalue: l * (l + 1.0) / (radius * radius),
        family: Family::GaussianBeam { degree },
    })
}

pub fn make_sphere_harmonic(
    m: &ManifoldModel,
    degree: usize,
    order: i64,
    amplitude: f64,
) -> Result<Eigenfunction> {
    let ManifoldModel::RoundSphere { radius } = *m else {
        return Err(Error::InvalidArgument("spherical harmonics live on the sphere".into()));
    };
    if degree == 0 || order.unsigned_abs() as usize > degree || amplitude == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= degree, |order| <= degree and nonzero amplitude, got ({degree}, {order}, {amplitude})"
        )));
    }
    let l = degree as f64;
    Ok(Eigenfunction {
        manifold: *m,
        eigenvalue: l * (l + 1.0) / (radius * radius),
        family: Family::SphereHarmonic { degree, order, amplitude },
    })
}

/// Normalized associated Legendre values `P̄_ℓ^m(cos θ)` and `P̄_{ℓ-1}^m`.
fn legendre_pair(l: usize, m: usize, x: f64, s: f64) -> (f64, f64) {
    let mut pmm = (0.5f64).sqrt();
    for i in 1..=m {
        let fi = i as f64;
        pmm *= ((2.0 * fi + 1.0) / (2.0 * fi)).sqrt() * s;
    }
    if l == m {
        return (pmm, 0.0);
    }
    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

impl Eigenfunction {
    pub fn sqrt_lambda(&self) -> f64 {
        self.eigenvalue.sqrt()
    }

    /// Short human-readable family label.
    pub fn label(&self) -> String {
        match &self.family {
            Family::TorusMode { terms } if terms.len() == 1 => {
                let t = terms[0];
                format!("torus_mode(k={},l={})", t.k, t.l)
            }
            Family::TorusMode { terms } => format!("torus_mode({} terms)", terms.len()),
            Family::SphereHarmonic { degree, order, .. } => {
                format!("sphere_harmonic(l={degree},m={order})")
            }
            Family::GaussianBeam { degree } => format!("gaussian_beam(l={degree})"),
        }
    }

    pub fn evaluate(&self, p: Point) -> f64 {
        match &self.family {
            Family::TorusMode { terms } => terms
                .iter()
                .map(|t| {
                    let [a, b] = torus_wavevector(&self.manifold, t);
                    t.amplitude * (a * p.u + b * p.v + t.phase).sin()
                })
                .sum(),
            Family::GaussianBeam { degree } => {
                let l = *degree as i32;
                p.u.sin().powi(l) * (l as f64 * p.v).cos()
            }
            Family::SphereHarmonic { degree, order, amplitude } => {
                let m = order.unsigned_abs() as usize;
                let (s, x) = p.u.sin_cos();
                let (pl, _) = legendre_pair(*degree, m, x, s.abs());
                amplitude * pl * azimuthal(*order, p.v).0
            }
        }
    }

    /// Gradient in the orthonormal frame: `(∂_x, ∂_y)` on the torus,
    /// `(∂_θ, (1/sin θ)∂_ϕ)/R` on the sphere.
    pub fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        match &self.family {
            Family::TorusMode { terms } => {
                let mut g = [0.0; 2];
                for t in terms {
                    let [a, b] = torus_wavevector(&self.manifold, t);
                    let c = t.amplitude * (a * p.u + b * p.v + t.phase).cos();
                    g[0] += a * c;
                    g[1] += b * c;
                }
                Ok(g)
            }
            Family::GaussianBeam { degree } => {
                let (s, c) = p.u.sin_cos();
                if s.abs() < 1e-300 {
                    return Err(Error::PoleGradient);
                }
                let lf = *degree as f64;
                let base = lf * s.powi(*degree as i32 - 1);
                let (sp, cp) = (lf * p.v).sin_cos();
                let r = self.radius();
                Ok([base * c * cp / r, -base * sp / r])
            }
            Family::SphereHarmonic { degree, order, amplitude } => {
                let m = order.unsigned_abs() as usize;
                let (s, x) = p.u.sin_cos();
                let r = self.radius();
                if s.abs() < 1e-300 {
                    if m != 0 {
                        return Err(Error::PoleGradient);
                    }
                    return Ok([0.0, 0.0]);
                }
                let (pl, pl1) = legendre_pair(*degree, m, x, s);
                let (lf, mf) = (*degree as f64, m as f64);
                let c = ((2.0 * lf + 1.0) * (lf - mf) * (lf + mf) / (2.0 * lf - 1.0)).sqrt();
                let dtheta = (lf * x * pl - c * pl1) / s;
                let (az, daz) = azimuthal(*order, p.v);
                Ok([amplitude * dtheta * az / r, amplitude * pl * daz / (s * r)])
            }
        }
    }

    /// Gradient at (or near) a pole, taken as the limit along the meridian
    /// of longitude `p.v`.
    pub fn gradient_limit(&self, p: Point) -> Result<[f64; 2]> {
        match self.gradient(p) {
            Err(Error::PoleGradient) => {
                let eps = 1e-7;
                let theta = if p.u < 0.5 * PI { eps } else { PI - eps };
                self.gradient(Point::new(theta, p.v))
            }
            other => other,
        }
    }

    fn radius(&self) -> f64 {
        match self.manifold {
            ManifoldModel::RoundSphere { radius } => radius,
            ManifoldModel::FlatTorus { .. } => 1.0,
        }
    }
}

/// `(cos mϕ, d/dϕ cos mϕ)` for `m ≥ 0`, `(sin|m|ϕ, d/dϕ)` for `m < 0`.
fn azimuthal(order: i64, phi: f64) -> (f64, f64) {
    let m = order.unsigned_abs() as f64;
    let (s, c) = (m * phi).sin_cos();
    if order >= 0 {
        (c, -m * s)
    } else {
        (s, m * c)
    }
}

/// Values sampled on a grid, optionally tagged with their eigenvalue.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<SampleGrid>,
    pub values: Vec<f64>,
    pub eigenvalue: Option<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SampleGrid>, values: Vec<f64>, eigenvalue: Option<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite values".into()));
        }
        Ok(Self { grid, values, eigenvalue })
    }

    /// Field from a closure over node positions (test harness fields).
    pub fn from_fn(grid: Arc<SampleGrid>, f: impl Fn(Point) -> f64 + Sync) -> Result<Self> {
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect();
        Self::new(grid, values, None)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
            eigenvalue: self.eigenvalue,
        }
    }

    /// `Σ wᵢ φᵢ`.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| self.grid.weight(i) * v).sum()
    }

    /// `√λ` if known.
    pub fn sqrt_lambda(&self) -> Option<f64> {
        self.eigenvalue.map(f64::sqrt)
    }
}

pub fn sample(e: &Eigenfunction, grid: &Arc<SampleGrid>) -> ScalarField {
    let values = (0..grid.len()).into_par_iter().map(|i| e.evaluate(grid.point(i))).collect();
    ScalarField { grid: Arc::clone(grid), values, eigenvalue: Some(e.eigenvalue) }
}

/// Largest relative finite-difference residual that still counts as resolved.
/// Pure modes sampled at 12 nodes per wavelength sit at `(2π/12)²/12 ≈ 0.023`.
pub const RESIDUAL_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `max |Δ_h φ + λφ|` over interior stencils.
    pub max_abs: f64,
    /// `max_abs / (λ · max|φ|)`.
    pub relative: f64,
}

/// Finite-difference eigen-equation residual: 5-point stencil on the torus,
/// flux-form latitude-longitude stencil on interior sphere rings.
pub fn residual_check(e: &Eigenfunction, grid: &Arc<SampleGrid>) -> Residual {
    let f = sample(e, grid);
    let phi = &f.values;
    let lam = e.eigenvalue;
    let (cols, rows) = grid.shape();
    let (du, dv) = grid.chart_steps();
    let at = |c: usize, r: usize| phi[grid.index(c % cols, r)];
    let max_abs = match *grid.model() {
        ManifoldModel::FlatTorus { .. } => (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (c, r) = grid.coords(i);
                let (cl, cr) = ((c + cols - 1) % cols, (c + 1) % cols);
                let (rd, ru) = ((r + rows - 1) % rows, (r + 1) % rows);
                let lap = (at(cr, r) - 2.0 * phi[i] + at(cl, r)) / (du * du)
                    + (at(c, ru) - 2.0 * phi[i] + at(c, rd)) / (dv * dv);
                (lap + lam * phi[i]).abs()
            })
            .reduce(|| 0.0, f64::max),
        ManifoldModel::RoundSphere { radius } => {
            let thetas = grid.ring_colatitudes().expect("sphere grid");
            (cols..(rows - 1) * cols)
                .into_par_iter()
                .map(|i| {
                    let (c, r) = grid.coords(i);
                    let t = thetas[r];
                    let (s, sp, sm) =
                        (t.sin(), (t + 0.5 * du).sin(), (t - 0.5 * du).sin());
                    let lat = (sp * (at(c, r + 1) - phi[i]) - sm * (phi[i] - at(c, r - 1)))
                        / (s * du * du);
                    let lon = (at(c + 1, r) - 2.0 * phi[i] + at(c + cols - 1, r))
                        / (s * s * dv * dv);
                    ((lat + lon) / (radius * radius) + lam * phi[i]).abs()
                })
                .reduce(|| 0.0, f64::max)
        }
    };
    let scale = lam * f.max_abs();
    Residual { max_abs, relative: if scale > 0.0 { max_abs / scale } else { 0.0 } }
}

/// JSON descriptor `{"manifold", "family", "params", "seed"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDescriptor {
    pub manifold: ManifoldModel,
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
struct KParam {
    k: i64,
}

#[derive(Deserialize)]
struct NormParam {
    lambda: u64,
}

#[derive(Deserialize)]
struct DegreeParam {
    degree: usize,
}

#[derive(Deserialize)]
struct HarmonicParam {
    degree: usize,
    order: i64,
    #[serde(default = "one")]
    amplitude: f64,
}

#[derive(Deserialize)]
struct TermsParam {
    terms: Vec<TorusTerm>,
}

fn one() -> f64 {
    1.0
}

impl EigenDescriptor {
    pub fn build(&self) -> Result<Eigenfunction> {
        let bad = |e: serde_json::Error| {
            Error::ConfigInvalid(format!("params for family {:?}: {e}", self.family))
        };
        let params = self.params.clone();
        match self.family.as_str() {
            "sine" => {
                let p: KParam = serde_json::from_value(params).map_err(bad)?;
                make_torus_mode(&self.manifold, vec![TorusTerm::new(p.k, 0, 1.0, 0.0)])
            }
            "torus_mode" => {
                let p: TermsParam = serde_json::from_value(params).map_err(bad)?;
                make_torus_mode(&self.manifold, p.terms)
            }
            "torus_random" => {
                let p: NormParam = serde_json::from_value(params).map_err(bad)?;
                if self.manifold != ManifoldModel::square_torus() {
                    return Err(Error::ConfigInvalid(
                        "torus_random is defined on the 2π-torus".into(),
                    ));
                }
                random_torus_combination(p.lambda, self.seed.unwrap_or(0))
            }
            "gaussian_beam" => {
                let p: DegreeParam = serde_json::from_value(params).map_err(bad)?;
                make_gaussian_beam(&self.manifold, p.degree)
            }
            "sphere_harmonic" => {
                let p: HarmonicParam = serde_json::from_value(params).map_err(bad)?;
                make_sphere_harmonic(&self.manifold, p.degree, p.order, p.amplitude)
            }
            other => Err(Error::ConfigInvalid(format!("unknown family {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_grid;
    use statrs::function::gamma::ln_gamma;

    fn torus_grid(n: usize) -> Arc<SampleGrid> {
        Arc::new(build_grid(&ManifoldModel::square_torus(), n).unwrap())
    }

    fn sphere_grid(n: usize) -> Arc<SampleGrid> {
        Arc::new(build_grid(&ManifoldModel::unit_sphere(), n).unwrap())
    }

    #[test]
    fn torus_mode_eigenvalues() {
        assert_eq!(sine_mode(3).unwrap().eigenvalue, 9.0);
        let two = make_torus_mode(
            &ManifoldModel::square_torus(),
            vec![TorusTerm::new(3, 0, 1.0, 0.0), TorusTerm::new(0, 3, 1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(two.eigenvalue, 9.0);
        let p = Point::new(0.3, 1.1);
        assert!((two.evaluate(p) - ((0.9f64).sin() + (3.3f64).sin())).abs() < 1e-14);
    }

    #[test]
    fn mixed_eigenvalue_is_rejected() {
        let err = make_torus_mode(
            &ManifoldModel::square_torus(),
            vec![TorusTerm::new(3, 0, 1.0, 0.0), TorusTerm::new(2, 0, 1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::MixedEigenvalue { first, other } if first == 9.0 && other == 4.0));
    }

    #[test]
    fn sine_values_and_gradients() {
        let e = sine_mode(3).unwrap();
        let top = Point::new(PI / 6.0, 0.0);
        assert!((e.evaluate(top) - 1.0).abs() < 1e-15);
        let g = e.gradient(top).unwrap();
        assert!(g[0].abs() < 1e-14 && g[1] == 0.0);
        let g0 = e.gradient(Point::new(0.0, 0.0)).unwrap();
        assert!((g0[0].hypot(g0[1]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn beam_anchors() {
        let e = make_gaussian_beam(&ManifoldModel::unit_sphere(), 4).unwrap();
        assert_eq!(e.eigenvalue, 20.0);
        assert!((e.evaluate(Point::new(PI / 2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert_eq!(e.evaluate(Point::new(0.0, 0.3)), 0.0);
        let g = e.gradient(Point::new(PI / 2.0, PI / 8.0)).unwrap();
        assert!((g[0].hypot(g[1]) - 4.0).abs() < 1e-14);
        assert!(matches!(e.gradient(Point::new(0.0, 0.0)), Err(Error::PoleGradient)));
        assert!(e.gradient_limit(Point::new(0.0, 0.0)).is_ok());
    }

    #[test]
    fn beam_is_a_sectoral_harmonic() {
        // sin^ℓθ cos ℓϕ is proportional to P̄_ℓ^ℓ cos ℓϕ
        let m = ManifoldModel::unit_sphere();
        let beam = make_gaussian_beam(&m, 5).unwrap();
        let harm = make_sphere_harmonic(&m, 5, 5, 1.0).unwrap();
        let p0 = Point::new(PI / 2.0, 0.0);
        let c = beam.evaluate(p0) / harm.evaluate(p0);
        for p in [Point::new(0.4, 1.0), Point::new(2.0, 5.5)] {
            assert!((beam.evaluate(p) - c * harm.evaluate(p)).abs() < 1e-13);
            let (gb, gh) = (beam.gradient(p).unwrap(), harm.gradient(p).unwrap());
            assert!((gb[0] - c * gh[0]).abs() < 1e-12 && (gb[1] - c * gh[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_gradient_matches_finite_differences() {
        let m = ManifoldModel::round_sphere(1.7).unwrap();
        for (l, mm) in [(1usize, 0i64), (6, 2), (9, -4), (12, 12)] {
            let e = make_sphere_harmonic(&m, l, mm, 0.8).unwrap();
            let p = Point::new(1.1, 2.3);
            let h = 1e-6;
            let dt = (e.evaluate(Point::new(p.u + h, p.v)) - e.evaluate(Point::new(p.u - h, p.v)))
                / (2.0 * h * 1.7);
            let dp = (e.evaluate(Point::new(p.u, p.v + h)) - e.evaluate(Point::new(p.u, p.v - h)))
                / (2.0 * h * 1.7 * p.u.sin());
            let g = e.gradient(p).unwrap();
            assert!((g[0] - dt).abs() < 1e-7, "({l},{mm}) θ: {} vs {dt}", g[0]);
            assert!((g[1] - dp).abs() < 1e-7, "({l},{mm}) ϕ: {} vs {dp}", g[1]);
        }
    }

    #[test]
    fn harmonic_legendre_is_normalized() {
        // ∫ P̄_ℓ^m(x)² dx = 1 via a Gauss rule exact for the degree
        let (x, w) = crate::quadrature::gauss_legendre(40);
        for (l, m) in [(3usize, 0usize), (10, 3), (25, 25)] {
            let q: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * legendre_pair(l, m, *x, (1.0 - x * x).sqrt()).0.powi(2))
                .sum();
            assert!((q - 1.0).abs() < 1e-12, "({l},{m}) {q}");
        }
    }

    #[test]
    fn sampled_sine_norms() {
        let g = torus_grid(64);
        let f = sample(&sine_mode(3).unwrap(), &g);
        assert_eq!(f.len(), 4096);
        assert!(f.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        let l2: f64 = f.values.iter().enumerate().map(|(i, v)| g.weight(i) * v * v).sum();
        assert!(((l2 - 2.0 * PI * PI) / (2.0 * PI * PI)).abs() < 1e-6);
    }

    #[test]
    fn beam_sup_on_grid() {
        let g = sphere_grid(64);
        let f = sample(&make_gaussian_beam(&ManifoldModel::unit_sphere(), 8).unwrap(), &g);
        let max = f.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((0.95..=1.0).contains(&max), "{max}");
    }

    #[test]
    fn residual_is_second_order_on_torus() {
        let e = sine_mode(3).unwrap();
        let a = residual_check(&e, &torus_grid(64)).max_abs;
        let b = residual_check(&e, &torus_grid(128)).max_abs;
        assert!((3.5..=4.5).contains(&(a / b)), "{}", a / b);
        let two = make_torus_mode(
            &ManifoldModel::square_torus(),
            vec![TorusTerm::new(3, 0, 1.0, 0.0), TorusTerm::new(0, 3, 1.0, 0.0)],
        )
        .unwrap();
        assert!(residual_check(&two, &torus_grid(64)).max_abs <= 2.0 * a + 1e-12);
    }

    #[test]
    fn residual_is_second_order_on_sphere() {
        let e = make_gaussian_beam(&ManifoldModel::unit_sphere(), 4).unwrap();
        let a = residual_check(&e, &sphere_grid(32)).max_abs;
        let b = residual_check(&e, &sphere_grid(64)).max_abs;
        assert!((3.0..=5.0).contains(&(a / b)), "{a} {b}");
    }

    #[test]
    fn coarse_sampling_fails_residual_gate() {
        let e = sine_mode(16).unwrap();
        // 6 nodes per wavelength
        assert!(residual_check(&e, &torus_grid(96)).relative > RESIDUAL_TOLERANCE);
        assert!(residual_check(&e, &torus_grid(192)).relative < RESIDUAL_TOLERANCE);
    }

    #[test]
    fn gradient_bound_holds() {
        let g = torus_grid(128);
        for e in [sine_mode(5).unwrap(), random_torus_combination(25, 3).unwrap()] {
            let f = sample(&e, &g);
            let gmax = (0..g.len())
                .map(|i| {
                    let d = e.gradient(g.point(i)).unwrap();
                    d[0].hypot(d[1])
                })
                .fold(0.0, f64::max);
            assert!(gmax / (e.sqrt_lambda() * f.max_abs()) <= 2.0);
        }
    }

    #[test]
    fn fields_are_mean_zero() {
        let fields = [
            sample(&random_torus_combination(65, 7).unwrap(), &torus_grid(128)),
            sample(&make_gaussian_beam(&ManifoldModel::unit_sphere(), 9).unwrap(), &sphere_grid(64)),
            sample(
                &make_sphere_harmonic(&ManifoldModel::unit_sphere(), 7, 0, 1.0).unwrap(),
                &sphere_grid(64),
            ),
        ];
        for f in fields {
            let abs: f64 = f.values.iter().enumerate().map(|(i, v)| f.grid.weight(i) * v.abs()).sum();
            assert!(f.integral().abs() <= 1e-8 * abs);
        }
    }

    #[test]
    fn beam_norms_follow_gamma_ratio() {
        for p in [1.0f64, 2.0, 4.0] {
            let ratios: Vec<f64> = [8usize, 16, 32]
                .iter()
                .map(|&l| {
                    let g = sphere_grid(12 * l);
                    let f = sample(&make_gaussian_beam(&ManifoldModel::unit_sphere(), l).unwrap(), &g);
                    let norm: f64 =
                        f.values.iter().enumerate().map(|(i, v)| g.weight(i) * v.abs().powf(p)).sum();
                    let lp = l as f64 * p / 2.0;
                    norm / (ln_gamma(lp + 1.0) - ln_gamma(lp + 1.5)).exp()
                })
                .collect();
            for r in &ratios {
                assert!((r / ratios[0] - 1.0).abs() < 0.05, "p={p}: {ratios:?}");
            }
        }
    }

    #[test]
    fn random_combination_is_reproducible() {
        let a = random_torus_combination(25, 11).unwrap();
        let b = random_torus_combination(25, 11).unwrap();
        let c = random_torus_combination(25, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.eigenvalue, 25.0);
        // 25 = 5² + 0² = 3² + 4²: (5,0), (0,5), (3,±4), (4,±3)
        assert_eq!(lattice_representatives(25).len(), 6);
        assert!(random_torus_combination(3, 0).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let json = r#"{"manifold":{"type":"round_sphere","radius":1.0},"family":"gaussian_beam","params":{"degree":6},"seed":null}"#;
        let d: EigenDescriptor = serde_json::from_str(json).unwrap();
        let e = d.build().unwrap();
        assert_eq!(e.eigenvalue, 42.0);
        let bad = EigenDescriptor { family: "bessel".into(), ..d };
        assert!(matches!(bad.build(), Err(Error::ConfigInvalid(_))));
    }
}
