//! One-dimensional quadrature rules shared by the sphere grid and the lift
//! frequency integrals.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending nodes.
///
/// Newton iteration on the three-term recurrence, seeded with the Tricomi
/// asymptotic guess. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

/// Fejér's first rule on the midpoint colatitudes `θ_i = (i + ½)π/n`.
///
/// Returns `(θ_i, w_i)` with `Σ w_i f(cos θ_i) ≈ ∫_{-1}^{1} f(x) dx`, exact
/// for polynomials of degree `< n`. Every weight is positive and
/// `w_i ≈ sin θ_i · π/n`.
pub fn fejer_first(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "fejer_first needs at least one node");
    let thetas: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * PI / n as f64).collect();
    let weights = thetas
        .iter()
        .map(|&t| {
            let s: f64 = (1..=n / 2)
                .map(|j| {
                    let jf = j as f64;
                    (2.0 * jf * t).cos() / (4.0 * jf * jf - 1.0)
                })
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect();
    (thetas, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for deg in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_odd_count_has_center_node() {
        let (x, w) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-15);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn fejer_weights_are_positive_and_exact() {
        for n in [1usize, 2, 7, 64] {
            let (t, w) = fejer_first(n);
            assert!(w.iter().all(|&v| v > 0.0));
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            for deg in 0..n as i32 {
                let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.cos().powi(deg)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "n {n} degree {deg}");
            }
        }
    }
}
