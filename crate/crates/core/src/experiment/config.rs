use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::growth::GrowthConfig;
use crate::manifold::ManifoldModel;
use crate::transport::Engine;

/// An exponent `p ∈ [1, ∞]`; JSON accepts a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent(p)),
            Raw::Name(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Exponent(f64::INFINITY)),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("unknown exponent {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `sin kx` on the 2π-torus; values are `k`.
    Sine,
    /// Seeded combinations over `k² + l² = λ`; values are `λ`.
    TorusRandom,
    /// `Re (x₁ + i x₂)^ℓ` on the unit sphere; values are `ℓ`.
    GaussianBeam,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Sine => "sine",
            FamilyKind::TorusRandom => "torus_random",
            FamilyKind::GaussianBeam => "gaussian_beam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub values: Vec<u64>,
    /// Seeds for random families; empty means the top-level seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Overrides the family's natural manifold (sine only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldModel>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self { kind: FamilyKind::Sine, values: vec![2, 4, 8], seeds: Vec::new(), manifold: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionRule {
    pub nodes_per_wavelength: f64,
    pub min_nodes: usize,
}

impl Default for ResolutionRule {
    fn default() -> Self {
        Self { nodes_per_wavelength: 12.0, min_nodes: 64 }
    }
}

/// Lowest resolution the experiment runner accepts.
pub const MIN_NODES_PER_WAVELENGTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

/// Deliberate defects for exercising failure paths of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixture {
    /// Rescale the witness to this edge-wise Lipschitz constant.
    pub witness_lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub resolution: ResolutionRule,
    /// Tube widths as `δ√λ`.
    pub deltas: Vec<f64>,
    pub p: Vec<Exponent>,
    /// Good-ball thresholds.
    pub d: Vec<f64>,
    pub engine: Engine,
    /// Random wavelength balls per instance in the doubling scan.
    pub probes: usize,
    pub growth: GrowthConfig,
    pub output: OutputSpec,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<Fixture>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::default(),
            resolution: ResolutionRule::default(),
            deltas: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            p: vec![Exponent(1.0), Exponent(2.0), Exponent(f64::INFINITY)],
            d: vec![4.0, 6.0, 8.0, 10.0],
            engine: Engine::Exact,
            probes: 200,
            growth: GrowthConfig::default(),
            output: OutputSpec::default(),
            seed: 0,
            fixture: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn ps(&self) -> Vec<f64> {
        self.p.iter().map(|p| p.0).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.family.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.family.seeds.clone()
        }
    }

    /// Structural checks; `strict` also enforces the resolution floor.
    pub fn check(&self, strict: bool) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::ConfigInvalid(format!("{field}: {msg}")));
        if self.family.values.is_empty() {
            return bad("family.values", "must be nonempty");
        }
        if self.family.values.contains(&0) {
            return bad("family.values", "must be positive");
        }
        if self.family.manifold.is_some() && self.family.kind != FamilyKind::Sine {
            return bad("family.manifold", "only the sine family takes a manifold override");
        }
        if let Some(m) = &self.family.manifold {
            if let Err(e) = m.validate() {
                return bad("family.manifold", &e.to_string());
            }
        }
        if !(self.resolution.nodes_per_wavelength > 0.0) {
            return bad("resolution.nodes_per_wavelength", "must be positive");
        }
        if strict && self.resolution.nodes_per_wavelength < MIN_NODES_PER_WAVELENGTH {
            return bad("resolution.nodes_per_wavelength", "must be at least 12");
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d >= 0.0)) {
            return bad("deltas", "need one or more values >= 0");
        }
        if self.p.is_empty() || self.p.iter().any(|p| !(p.0 >= 1.0)) {
            return bad("p", "need one or more exponents in [1, inf]");
        }
        if self.d.is_empty() || self.d.iter().any(|d| !d.is_finite()) {
            return bad("d", "need one or more finite thresholds");
        }
        if self.probes == 0 {
            return bad("probes", "must be positive");
        }
        if let Engine::Sinkhorn { atoms, .. } = self.engine {
            if atoms == 0 || atoms > 5000 {
                return bad("engine.sinkhorn.atoms", "must lie in 1..=5000");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_with_infinite_p() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn field_level_errors() {
        let c = ExperimentConfig::from_json(r#"{"family": {"kind": "sine", "values": []}}"#).unwrap();
        let err = c.check(true).unwrap_err().to_string();
        assert!(err.contains("family.values"), "{err}");
        let c = ExperimentConfig::from_json(r#"{"resolution": {"nodes_per_wavelength": 6}}"#).unwrap();
        assert!(c.check(false).is_ok());
        assert!(c.check(true).unwrap_err().to_string().contains("nodes_per_wavelength"));
        assert!(ExperimentConfig::from_json(r#"{"colour": 1}"#).is_err());
    }
}
