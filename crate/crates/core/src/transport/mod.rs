//! Wasserstein-1 distance between `φ⁺dx` and `φ⁻dx`: exact min-cost flow on
//! the grid graph, entropic Sinkhorn on subsampled atoms, and a 1-Lipschitz
//! dual witness built from the nodal tube.

mod exact;
mod oracle;
mod simplex;
mod sinkhorn;
mod witness;

use serde::{Deserialize, Serialize};

use crate::eigenmodel::ScalarField;
use crate::error::{Error, Result};
use crate::manifold::Point;
use crate::massconc::total_norm;
use crate::nodal::NodalGeometry;

pub use exact::{stencil_distortion, w1_dense, w1_exact, MASS_UNITS};
pub use oracle::{sine_w1, w1_circle, w1_oracle_1d};
pub use simplex::{min_cost_flow, FlowSolution};
pub use sinkhorn::{subsample, w1_sinkhorn, w1_sinkhorn_trace, SinkhornConfig};
pub use witness::{default_witness_radius, edge_lipschitz, lipschitz_witness, Witness, LIPSCHITZ_TOL};

/// Atoms with nonnegative masses; `nodes` ties each atom to a grid node when
/// the measure lives on a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub masses: Vec<f64>,
    pub nodes: Option<Vec<usize>>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, masses: Vec<f64>, nodes: Option<Vec<usize>>) -> Result<Self> {
        if points.len() != masses.len() || nodes.as_ref().is_some_and(|n| n.len() != points.len()) {
            return Err(Error::InvalidArgument("atom arrays differ in length".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("atom masses must be finite and >= 0".into()));
        }
        let out = Self { points, masses, nodes };
        if !(out.total() > 0.0) {
            return Err(Error::InvalidArgument("measure has zero total mass".into()));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { masses: self.masses.iter().map(|m| c * m).collect(), ..self.clone() }
    }
}

/// `φ⁺dx` and `φ⁻dx` on the grid, with `ν` rescaled to the mass of `μ`.
#[derive(Debug, Clone)]
pub struct SignedMeasures {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// `(total(ν) − total(μ)) / total(μ)` before rescaling.
    pub imbalance: f64,
}

/// Relative mean the field may carry and still count as mean-zero.
pub const MEAN_TOL: f64 = 1e-6;

pub fn signed_measures(f: &ScalarField) -> Result<SignedMeasures> {
    let grid = &f.grid;
    let mut pos = (Vec::new(), Vec::new(), Vec::new());
    let mut neg = (Vec::new(), Vec::new(), Vec::new());
    for (i, &v) in f.values.iter().enumerate() {
        let side = if v > 0.0 {
            &mut pos
        } else if v < 0.0 {
            &mut neg
        } else {
            continue;
        };
        side.0.push(grid.point(i));
        side.1.push(grid.weight(i) * v.abs());
        side.2.push(i);
    }
    let (tp, tn): (f64, f64) = (pos.1.iter().sum(), neg.1.iter().sum());
    if !(tp > 0.0) || !(tn > 0.0) {
        return Err(Error::OneSignedField);
    }
    let mean = (tp - tn) / (tp + tn);
    if mean.abs() > MEAN_TOL {
        return Err(Error::NonZeroMean(mean));
    }
    let scale = tp / tn;
    let mu = DiscreteMeasure::new(pos.0, pos.1, Some(pos.2))?;
    let nu = DiscreteMeasure::new(neg.0, neg.1.iter().map(|m| m * scale).collect(), Some(neg.2))?;
    Ok(SignedMeasures { mu, nu, imbalance: (tn - tp) / tp })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactFlow,
    EntropicSinkhorn { epsilon: f64 },
    DualWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub method: Method,
    pub value: f64,
    /// Best certified lower bound known to the engine.
    pub lower_bound: Option<f64>,
    /// Relative marginal (or divergence) residual of the plan.
    pub marginal_err: f64,
    /// Relative mass imbalance before rebalancing.
    pub imbalance: f64,
    pub seed: Option<u64>,
    /// Atoms per side, `(μ, ν)`.
    pub atoms: (usize, usize),
    /// Graph-to-geodesic metric distortion bound of the stencil.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distortion: Option<f64>,
    /// `(from atom, to atom, mass)` for dense engines, `(node, node, flow)`
    /// for the grid flow.
    #[serde(skip)]
    pub plan: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Exact,
    Sinkhorn { atoms: usize, seed: u64 },
    Witness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    /// `W₁` of the field rescaled to unit `L¹` norm.
    pub w1: f64,
    pub nodal_length: f64,
    pub product: f64,
    pub l1_norm: f64,
}

/// `W₁(φ⁺dx, φ⁻dx) · H¹(N_φ)` with `φ` normalized to `∫|φ| = 1`.
pub fn uncertainty_product(f: &ScalarField, ng: &NodalGeometry, engine: Engine) -> Result<Uncertainty> {
    let l1 = total_norm(f, 1.0);
    let g = f.scaled(1.0 / l1);
    let w1 = match engine {
        Engine::Exact => {
            let s = signed_measures(&g)?;
            w1_exact(&s.mu, &s.nu, &g.grid)?.value
        }
        Engine::Sinkhorn { atoms, seed } => {
            let s = signed_measures(&g)?;
            let mu = subsample(&s.mu, atoms, seed)?;
            let nu = subsample(&s.nu, atoms, seed.wrapping_add(1))?;
            w1_sinkhorn(&mu, &nu, g.grid.model(), &SinkhornConfig::default())?.value
        }
        Engine::Witness => {
            let r = default_witness_radius(ng, &g);
            lipschitz_witness(ng, &g, r)?.bound
        }
    };
    Ok(Uncertainty { w1, nodal_length: ng.length, product: w1 * ng.length, l1_norm: l1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodel::{make_gaussian_beam, random_torus_combination, sample, sine_mode};
    use crate::manifold::{build_grid, ManifoldModel};
    use crate::nodal::extract_nodal_set;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn torus(n: usize) -> Arc<crate::manifold::SampleGrid> {
        Arc::new(build_grid(&ManifoldModel::square_torus(), n).unwrap())
    }

    #[test]
    fn sine_parts_have_equal_mass() {
        let s = signed_measures(&sample(&sine_mode(3).unwrap(), &torus(64))).unwrap();
        // relative: the kinks of sin⁺ cost O(h²) in the node sum
        assert!((s.mu.total() / (4.0 * PI) - 1.0).abs() < 1e-3);
        assert!((s.nu.total() / (4.0 * PI) - 1.0).abs() < 1e-3);
        assert!(s.imbalance.abs() < 1e-12);
    }

    #[test]
    fn rebalancing_is_tiny_for_analytic_families() {
        let g = torus(96);
        for e in [sine_mode(5).unwrap(), random_torus_combination(65, 3).unwrap()] {
            let s = signed_measures(&sample(&e, &g)).unwrap();
            assert!(s.imbalance.abs() <= 1e-4, "{}", s.imbalance);
        }
        let e = make_gaussian_beam(&ManifoldModel::unit_sphere(), 9).unwrap();
        let g = Arc::new(build_grid(&e.manifold, 96).unwrap());
        let s = signed_measures(&sample(&e, &g)).unwrap();
        assert!(s.imbalance.abs() <= 1e-4, "{}", s.imbalance);
    }

    #[test]
    fn one_signed_field_is_rejected() {
        let f = ScalarField::from_fn(torus(16), |p| 2.0 + p.u.sin()).unwrap();
        assert!(matches!(signed_measures(&f), Err(Error::OneSignedField)));
        let f = ScalarField::from_fn(torus(16), |p| 0.5 + p.u.sin()).unwrap();
        assert!(matches!(signed_measures(&f), Err(Error::NonZeroMean(_))));
    }

    #[test]
    fn sine_uncertainty_product() {
        let e = sine_mode(4).unwrap();
        let f = sample(&e, &torus(96));
        let ng = extract_nodal_set(&f).unwrap();
        let u = uncertainty_product(&f, &ng, Engine::Exact).unwrap();
        assert!((u.product / (4.0 * PI) - 1.0).abs() < 0.05, "{u:?}");
        let v = uncertainty_product(&f.scaled(-3.5), &ng, Engine::Exact).unwrap();
        assert!((u.product - v.product).abs() < 1e-9 * u.product);
        let w = uncertainty_product(&f, &ng, Engine::Witness).unwrap();
        assert!(w.w1 <= u.w1);
    }

    #[test]
    fn result_json_keys() {
        let r = TransportResult {
            method: Method::EntropicSinkhorn { epsilon: 0.01 },
            value: 1.0,
            lower_bound: Some(0.9),
            marginal_err: 1e-6,
            imbalance: 0.0,
            seed: Some(7),
            atoms: (3, 4),
            distortion: None,
            plan: vec![(0, 1, 1.0)],
        };
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["atoms", "imbalance", "lower_bound", "marginal_err", "method", "seed", "value"]);
    }
}
