//! Numerical laboratory for Laplace eigenfunctions on the flat torus and the
//! round sphere: nodal geometry, tube mass retention, doubling exponents and
//! the Wasserstein-1 distance between the positive and negative parts.

pub mod eigenmodel;
pub mod growth;
pub mod error;
pub mod experiment;
pub mod manifold;
pub mod massconc;
pub mod nodal;
pub mod quadrature;
pub mod transport;

pub use eigenmodel::{sample, Eigenfunction, ScalarField};
pub use error::{Error, Result};
pub use nodal::{extract_nodal_set, NodalGeometry};
pub use manifold::{build_grid, ManifoldModel, Point, SampleGrid};
pub use experiment::{ExperimentConfig, Report, ScalingFit};
pub use growth::GrowthConfig;
pub use transport::{DiscreteMeasure, Engine, TransportResult};
