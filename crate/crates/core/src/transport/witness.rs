//! The interpolating 1-Lipschitz function `R(d_Z − d_Y) / (4(d_Z + d_Y))`
//! between the tube-trimmed positive and negative regions.

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::manifold::SampleGrid;
use crate::nodal::{multi_source_dijkstra, sign_class, NodalGeometry};

use super::signed_measures;

/// Edge-wise slack on the Lipschitz constant.
pub const LIPSCHITZ_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Witness {
    pub values: Vec<f64>,
    pub r: f64,
    /// Measured edge-wise Lipschitz constant of the raw formula.
    pub lipschitz: f64,
    /// True when the values were divided by `lipschitz`.
    pub rescaled: bool,
    /// `∫ f d(μ − ν)`, a lower bound on `W₁` for the grid metric.
    pub bound: f64,
    pub y_nodes: usize,
    pub z_nodes: usize,
}

impl Witness {
    /// Re-measure the stored values against the grid edges.
    pub fn verify(&self, grid: &SampleGrid) -> bool {
        edge_lipschitz(grid, &self.values) <= 1.0 + LIPSCHITZ_TOL
    }
}

/// `max |f(i) − f(j)| / len(i, j)` over grid edges.
pub fn edge_lipschitz(grid: &SampleGrid, values: &[f64]) -> f64 {
    grid.edges()
        .into_iter()
        .map(|(i, j, len)| (values[i] - values[j]).abs() / len)
        .fold(0.0, f64::max)
}

/// Half the measured nodal spacing.
pub fn default_witness_radius(ng: &NodalGeometry, f: &ScalarField) -> f64 {
    0.5 * ng.nodal_spacing(f)
}

/// Witness with `Y = {φ > 0} ∖ T_{R/2}` and `Z = {φ < 0} ∖ T_{R/2}`; the
/// distances to `Y` and `Z` are graph distances.
pub fn lipschitz_witness(ng: &NodalGeometry, f: &ScalarField, r: f64) -> Result<Witness> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("witness radius must be positive, got {r}")));
    }
    let grid = &f.grid;
    let half = 0.5 * r;
    let mut y = Vec::new();
    let mut z = Vec::new();
    for i in 0..grid.len() {
        if ng.distance.values[i] < half {
            continue;
        }
        match sign_class(f.values[i], ng.zero_tol) {
            1 => y.push((i, 0.0)),
            -1 => z.push((i, 0.0)),
            _ => {}
        }
    }
    if y.is_empty() || z.is_empty() {
        return Err(Error::EmptySignedRegion);
    }
    let (y_nodes, z_nodes) = (y.len(), z.len());
    let dy = multi_source_dijkstra(grid, y);
    let dz = multi_source_dijkstra(grid, z);
    let mut values: Vec<f64> =
        dy.iter().zip(&dz).map(|(a, b)| r * (b - a) / (4.0 * (a + b))).collect();
    let lipschitz = edge_lipschitz(grid, &values);
    let rescaled = lipschitz > 1.0 + LIPSCHITZ_TOL;
    if rescaled {
        values.iter_mut().for_each(|v| *v /= lipschitz);
    }
    let s = signed_measures(f)?;
    let integrate = |m: &super::DiscreteMeasure| -> f64 {
        let nodes = m.nodes.as_ref().expect("grid measure");
        nodes.iter().zip(&m.masses).map(|(&i, &w)| values[i] * w).sum()
    };
    let bound = integrate(&s.mu) - integrate(&s.nu);
    Ok(Witness { values, r, lipschitz, rescaled, bound, y_nodes, z_nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodel::{random_torus_combination, sample, sine_mode};
    use crate::manifold::build_grid;
    use crate::nodal::extract_nodal_set;
    use crate::transport::w1_exact;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(e: &crate::eigenmodel::Eigenfunction, n: usize) -> (ScalarField, NodalGeometry) {
        let g = Arc::new(build_grid(&e.manifold, n).unwrap());
        let f = sample(e, &g);
        let ng = extract_nodal_set(&f).unwrap();
        (f, ng)
    }

    #[test]
    fn plateaus_are_exact() {
        let (f, ng) = setup(&sine_mode(4).unwrap(), 96);
        let r = PI / 8.0;
        let w = lipschitz_witness(&ng, &f, r).unwrap();
        for i in 0..f.len() {
            if ng.distance.values[i] >= r / 2.0 {
                let expect = if f.values[i] > 0.0 { r / 4.0 } else { -r / 4.0 };
                assert_eq!(w.values[i], expect);
            }
        }
        assert!(!w.rescaled && w.verify(&f.grid));
    }

    #[test]
    fn weak_duality() {
        for e in [sine_mode(3).unwrap(), random_torus_combination(50, 2).unwrap()] {
            let (f, ng) = setup(&e, 64);
            let r = default_witness_radius(&ng, &f);
            let w = lipschitz_witness(&ng, &f, r).unwrap();
            let s = signed_measures(&f).unwrap();
            let exact = w1_exact(&s.mu, &s.nu, &f.grid).unwrap().value;
            assert!(w.bound > 0.0 && w.bound <= exact * (1.0 + 1e-9), "{} vs {exact}", w.bound);
        }
    }

    #[test]
    fn wide_tube_empties_regions() {
        let (f, ng) = setup(&sine_mode(4).unwrap(), 64);
        assert!(matches!(lipschitz_witness(&ng, &f, 2.0), Err(Error::EmptySignedRegion)));
    }

    #[test]
    fn tampered_values_fail_verification() {
        let (f, ng) = setup(&sine_mode(2).unwrap(), 64);
        let mut w = lipschitz_witness(&ng, &f, 0.4).unwrap();
        let l = edge_lipschitz(&f.grid, &w.values);
        w.values.iter_mut().for_each(|v| *v *= 1.5 / l);
        assert!(!w.verify(&f.grid));
    }

    #[test]
    fn sine_bound_scales_like_wavelength() {
        let mut scaled = Vec::new();
        for k in [4i64, 8, 16] {
            let (f, ng) = setup(&sine_mode(k).unwrap(), 12 * k as usize);
            let w = lipschitz_witness(&ng, &f, PI / (2.0 * k as f64)).unwrap();
            scaled.push(w.bound * k as f64);
        }
        let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(lo > 0.0 && hi / lo < 1.5, "{scaled:?}");
    }
}
