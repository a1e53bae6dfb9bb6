use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, Point, SampleGrid};

use super::simplex::min_cost_flow;
use super::{DiscreteMeasure, Method, TransportResult};

/// Integer units the common total mass is quantized to.
pub const MASS_UNITS: f64 = 1e15;

/// Worst ratio of graph distance to geodesic distance for the 8-neighbour
/// stencil, `1/cos(π/8)`.
pub fn stencil_distortion() -> f64 {
    1.0 / (PI / 8.0).cos()
}

fn check_balance(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > 1e-12 * a.max(b) {
        return Err(Error::InfeasibleFlow { mu: a, nu: b });
    }
    Ok(a)
}

/// Round `values · scale` to integers and push the rounding residue onto the
/// largest entry so the sum is exactly `target`.
fn quantize(values: &[f64], scale: f64, target: i64) -> Vec<i64> {
    let mut q: Vec<i64> = values.iter().map(|v| (v * scale).round() as i64).collect();
    let diff = target - q.iter().sum::<i64>();
    if let Some(k) = (0..q.len()).max_by_key(|&k| q[k].abs()) {
        q[k] += diff;
    }
    q
}

/// Exact `W₁` for the graph metric: Beckmann min-cost flow on the grid
/// adjacency with edge costs equal to geodesic edge lengths.
pub fn w1_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, grid: &SampleGrid) -> Result<TransportResult> {
    let total = check_balance(mu, nu)?;
    let (Some(mn), Some(nn)) = (&mu.nodes, &nu.nodes) else {
        return Err(Error::InvalidArgument("exact flow needs atoms on grid nodes".into()));
    };
    let n = grid.len();
    if mn.iter().chain(nn).any(|&i| i >= n) {
        return Err(Error::InvalidArgument("atom node outside the grid".into()));
    }
    let mut net = vec![0.0; n];
    for (&i, &m) in mn.iter().zip(&mu.masses) {
        net[i] += m;
    }
    for (&i, &m) in nn.iter().zip(&nu.masses) {
        net[i] -= m;
    }
    let scale = MASS_UNITS / total;
    let supply = quantize(&net, scale, 0);
    let residual: f64 = supply
        .iter()
        .zip(&net)
        .map(|(&s, &x)| (s as f64 / scale - x).abs())
        .fold(0.0, f64::max)
        / total;
    let mut arcs = Vec::with_capacity(8 * n);
    for (i, j, len) in grid.edges() {
        arcs.push((i, j, len));
        arcs.push((j, i, len));
    }
    let sol = min_cost_flow(n, &arcs, &supply)?;
    let dual: f64 = supply.iter().zip(&sol.potentials).map(|(&b, &p)| -(b as f64) * p).sum();
    let plan = arcs
        .iter()
        .zip(&sol.flows)
        .filter(|(_, &f)| f > 0)
        .map(|(&(i, j, _), &f)| (i, j, f as f64 / scale))
        .collect();
    Ok(TransportResult {
        method: Method::ExactFlow,
        value: sol.cost / scale,
        lower_bound: Some(dual / scale),
        marginal_err: residual,
        imbalance: 0.0,
        seed: None,
        atoms: (mu.len(), nu.len()),
        distortion: Some(stencil_distortion()),
        plan,
    })
}

/// Exact discrete `W₁` between atom sets by network simplex on the complete
/// bipartite graph, with the cost given by `dist` (the model's geodesic
/// distance by default).
pub fn w1_dense(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    model: &ManifoldModel,
    dist: Option<&dyn Fn(Point, Point) -> f64>,
) -> Result<TransportResult> {
    let total = check_balance(mu, nu)?;
    let (a, b) = (mu.len(), nu.len());
    let geodesic = |p: Point, q: Point| model.geodesic_distance(p, q);
    let cost: &dyn Fn(Point, Point) -> f64 = dist.unwrap_or(&geodesic);
    let scale = MASS_UNITS / total;
    let target = MASS_UNITS as i64;
    let mut supply = quantize(&mu.masses, scale, target);
    supply.extend(quantize(&nu.masses, scale, target).into_iter().map(|s| -s));
    let mut arcs = Vec::with_capacity(a * b);
    for (i, &p) in mu.points.iter().enumerate() {
        for (j, &q) in nu.points.iter().enumerate() {
            arcs.push((i, a + j, cost(p, q)));
        }
    }
    let sol = min_cost_flow(a + b, &arcs, &supply)?;
    let plan = arcs
        .iter()
        .zip(&sol.flows)
        .filter(|(_, &f)| f > 0)
        .map(|(&(i, j, _), &f)| (i, j - a, f as f64 / scale))
        .collect();
    let dual: f64 = supply.iter().zip(&sol.potentials).map(|(&s, &p)| -(s as f64) * p).sum();
    Ok(TransportResult {
        method: Method::ExactFlow,
        value: sol.cost / scale,
        lower_bound: Some(dual / scale),
        marginal_err: 0.5 / MASS_UNITS * (a + b) as f64,
        imbalance: 0.0,
        seed: None,
        atoms: (a, b),
        distortion: None,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodel::{sample, sine_mode};
    use crate::manifold::build_grid;
    use crate::transport::{signed_measures, sine_w1};
    use std::sync::Arc;

    fn dirac(grid: &SampleGrid, i: usize, m: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![grid.point(i)], vec![m], Some(vec![i])).unwrap()
    }

    #[test]
    fn two_diracs() {
        let grid = build_grid(&ManifoldModel::square_torus(), 32).unwrap();
        let h = grid.spacing();
        let (a, b) = (grid.index(3, 4), grid.index(8, 6));
        let r = w1_exact(&dirac(&grid, a, 2.0), &dirac(&grid, b, 2.0), &grid).unwrap();
        // 2 diagonal steps and 3 axis steps
        assert!((r.value - 2.0 * (3.0 * h + 2.0 * 2f64.sqrt() * h)).abs() < 1e-12);
        let geo = ManifoldModel::square_torus().geodesic_distance(grid.point(a), grid.point(b));
        assert!(r.value / 2.0 >= geo - 1e-12 && r.value / 2.0 <= stencil_distortion() * geo);
        let r = w1_exact(&dirac(&grid, a, 2.0), &dirac(&grid, a, 2.0), &grid).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn unequal_totals_are_infeasible() {
        let grid = build_grid(&ManifoldModel::square_torus(), 16).unwrap();
        assert!(matches!(
            w1_exact(&dirac(&grid, 0, 1.0), &dirac(&grid, 5, 1.5), &grid),
            Err(Error::InfeasibleFlow { .. })
        ));
    }

    #[test]
    fn sine_flow_matches_oracle() {
        let g = Arc::new(build_grid(&ManifoldModel::square_torus(), 192).unwrap());
        let s = signed_measures(&sample(&sine_mode(8).unwrap(), &g)).unwrap();
        let r = w1_exact(&s.mu, &s.nu, &g).unwrap();
        let oracle = sine_w1(8.0, 2.0 * PI);
        assert!((r.value / oracle - 1.0).abs() < 0.02, "{} vs {oracle}", r.value);
        assert!(r.marginal_err <= 1e-9);
        assert!((r.lower_bound.unwrap() - r.value).abs() < 1e-9 * r.value);
    }

    #[test]
    fn homogeneous_and_translation_invariant() {
        let g = Arc::new(build_grid(&ManifoldModel::square_torus(), 48).unwrap());
        let e = crate::eigenmodel::random_torus_combination(25, 5).unwrap();
        let f = sample(&e, &g);
        let s = signed_measures(&f).unwrap();
        let base = w1_exact(&s.mu, &s.nu, &g).unwrap().value;
        let scaled = w1_exact(&s.mu.scaled(3.0), &s.nu.scaled(3.0), &g).unwrap().value;
        assert!((scaled - 3.0 * base).abs() < 1e-12 * scaled);
        let h = g.spacing();
        let shifted = crate::eigenmodel::ScalarField::from_fn(Arc::clone(&g), |p| {
            e.evaluate(Point::new(p.u + 5.0 * h, p.v - 2.0 * h))
        })
        .unwrap();
        let t = signed_measures(&shifted).unwrap();
        let moved = w1_exact(&t.mu, &t.nu, &g).unwrap().value;
        assert!((moved / base - 1.0).abs() < 1e-3, "{moved} vs {base}");
    }

    #[test]
    fn dense_matches_grid_flow_on_line() {
        // masses on one row: graph distance along the row is exact
        let grid = build_grid(&ManifoldModel::square_torus(), 24).unwrap();
        let mu = DiscreteMeasure::new(
            vec![grid.point(1), grid.point(2)],
            vec![1.0, 2.0],
            Some(vec![1, 2]),
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            vec![grid.point(7), grid.point(20)],
            vec![1.5, 1.5],
            Some(vec![7, 20]),
        )
        .unwrap();
        let a = w1_exact(&mu, &nu, &grid).unwrap().value;
        let b = w1_dense(&mu, &nu, grid.model(), None).unwrap().value;
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }
}
