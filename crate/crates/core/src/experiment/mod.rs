//! Config-driven scans over eigenfunction families with power-law fits and
//! CSV/JSON reports.

mod config;
mod fit;
mod report;
mod verify;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenmodel::{make_gaussian_beam, make_torus_mode, random_torus_combination, sample, Eigenfunction, TorusTerm};
use crate::error::{Error, Result};
use crate::growth::{build_covering, classify_good_balls, doubling_exponent};
use crate::manifold::{build_grid, resolution_for, ManifoldModel, Point, SampleGrid};
use crate::massconc::{retention, total_norm};
use crate::nodal::extract_nodal_set;
use crate::transport::{
    lipschitz_witness, default_witness_radius, signed_measures, sine_w1, subsample, uncertainty_product,
    w1_exact, w1_sinkhorn, Engine, SinkhornConfig,
};

pub use config::{ExperimentConfig, Exponent, FamilyKind, FamilySpec, Fixture, Format, OutputSpec, ResolutionRule, MIN_NODES_PER_WAVELENGTH};
pub use fit::{fit_power_law, ScalingFit};
pub use report::{content_hash, csv_header, csv_path, write_report, write_summary, CsvSink, Report, SCHEMA_VERSION};
pub use verify::{verify, Check, VerifySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ScanW1,
    ScanTubeMass,
    ScanDoubling,
    ScanUncertainty,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ScanW1 => "scan-w1",
            Command::ScanTubeMass => "scan-tube-mass",
            Command::ScanDoubling => "scan-doubling",
            Command::ScanUncertainty => "scan-uncertainty",
        }
    }
}

/// One member of a family scan.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: FamilyKind,
    /// `k`, `λ` or `ℓ` depending on the family.
    pub param: u64,
    pub seed: u64,
    pub eigen: std::result::Result<Eigenfunction, String>,
}

impl Instance {
    fn lambda(&self) -> f64 {
        match (&self.eigen, self.family) {
            (Ok(e), _) => e.eigenvalue,
            (Err(_), FamilyKind::Sine) => (self.param * self.param) as f64,
            (Err(_), FamilyKind::TorusRandom) => self.param as f64,
            (Err(_), FamilyKind::GaussianBeam) => (self.param * (self.param + 1)) as f64,
        }
    }
}

pub fn instances(cfg: &ExperimentConfig) -> Vec<Instance> {
    let mut out = Vec::new();
    for &v in &cfg.family.values {
        match cfg.family.kind {
            FamilyKind::Sine => {
                let m = cfg.family.manifold.unwrap_or_else(ManifoldModel::square_torus);
                let eigen = make_torus_mode(&m, vec![TorusTerm::new(v as i64, 0, 1.0, 0.0)]);
                out.push(Instance { family: cfg.family.kind, param: v, seed: cfg.seed, eigen: eigen.map_err(|e| e.to_string()) });
            }
            FamilyKind::TorusRandom => {
                for seed in cfg.seeds() {
                    let eigen = random_torus_combination(v, seed).map_err(|e| e.to_string());
                    out.push(Instance { family: cfg.family.kind, param: v, seed, eigen });
                }
            }
            FamilyKind::GaussianBeam => {
                let eigen = make_gaussian_beam(&ManifoldModel::unit_sphere(), v as usize).map_err(|e| e.to_string());
                out.push(Instance { family: cfg.family.kind, param: v, seed: cfg.seed, eigen });
            }
        }
    }
    out
}

fn grid_for(cfg: &ExperimentConfig, e: &Eigenfunction) -> Result<Arc<SampleGrid>> {
    let n = resolution_for(&e.manifold, e.eigenvalue, cfg.resolution.nodes_per_wavelength, cfg.resolution.min_nodes);
    Ok(Arc::new(build_grid(&e.manifold, n)?))
}

/// Columns shared by every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub family: String,
    pub param: u64,
    pub seed: u64,
    pub lambda: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    #[serde(flatten)]
    pub at: Provenance,
    pub engine: String,
    pub w1: Option<f64>,
    pub l1_norm: Option<f64>,
    /// `W₁·√λ / ‖φ‖₁`.
    pub w1_scaled: Option<f64>,
    pub witness: Option<f64>,
    pub witness_scaled: Option<f64>,
    pub weak_duality: Option<bool>,
    pub oracle: Option<f64>,
    pub imbalance: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeRow {
    #[serde(flatten)]
    pub at: Provenance,
    pub p: Option<f64>,
    pub delta_sqrtlambda: Option<f64>,
    pub ratio_total: Option<f64>,
    pub ratio_pos: Option<f64>,
    pub ratio_neg: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    #[serde(flatten)]
    pub at: Provenance,
    /// Largest doubling exponent over the probe balls.
    pub max_n: Option<f64>,
    pub max_n_over_sqrt_lambda: Option<f64>,
    pub d: Option<f64>,
    pub good_fraction: Option<f64>,
    pub good: Option<usize>,
    pub bad: Option<usize>,
    pub multiplicity: Option<usize>,
    pub bound_ok: Option<bool>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRow {
    #[serde(flatten)]
    pub at: Provenance,
    pub engine: String,
    pub w1_normalized: Option<f64>,
    pub nodal_length: Option<f64>,
    pub product: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Row {
    W1(W1Row),
    Tube(TubeRow),
    Doubling(DoublingRow),
    Uncertainty(UncertaintyRow),
}

impl Row {
    pub fn status(&self) -> &str {
        match self {
            Row::W1(r) => &r.status,
            Row::Tube(r) => &r.status,
            Row::Doubling(r) => &r.status,
            Row::Uncertainty(r) => &r.status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status() == "ok"
    }
}

fn engine_name(e: &Engine) -> String {
    match e {
        Engine::Exact => "exact".into(),
        Engine::Sinkhorn { atoms, seed } => format!("sinkhorn:{atoms}:{seed}"),
        Engine::Witness => "witness".into(),
    }
}

fn w1_instance(cfg: &ExperimentConfig, inst: &Instance, at: &mut Provenance) -> Result<W1Row> {
    let e = inst.eigen.as_ref().map_err(|m| Error::InvalidArgument(m.clone()))?;
    let grid = grid_for(cfg, e)?;
    at.resolution = grid.resolution();
    let f = sample(e, &grid);
    let ng = extract_nodal_set(&f)?;
    let s = signed_measures(&f)?;
    let l1 = total_norm(&f, 1.0);
    let w1 = match cfg.engine {
        Engine::Exact => w1_exact(&s.mu, &s.nu, &grid)?.value,
        Engine::Sinkhorn { atoms, seed } => {
            let mu = subsample(&s.mu, atoms, seed)?;
            let nu = subsample(&s.nu, atoms, seed.wrapping_add(1))?;
            w1_sinkhorn(&mu, &nu, grid.model(), &SinkhornConfig::default())?.value
        }
        Engine::Witness => f64::NAN,
    };
    let witness = lipschitz_witness(&ng, &f, default_witness_radius(&ng, &f))?;
    let sl = e.sqrt_lambda();
    let w1 = if w1.is_nan() { witness.bound } else { w1 };
    let oracle = match (inst.family, e.manifold) {
        (FamilyKind::Sine, ManifoldModel::FlatTorus { lx, ly }) if (lx - 2.0 * PI).abs() < 1e-12 => {
            Some(sine_w1(inst.param as f64, ly))
        }
        _ => None,
    };
    Ok(W1Row {
        at: at.clone(),
        engine: engine_name(&cfg.engine),
        w1: Some(w1),
        l1_norm: Some(l1),
        w1_scaled: Some(w1 * sl / l1),
        witness: Some(witness.bound),
        witness_scaled: Some(witness.bound * sl / l1),
        weak_duality: (cfg.engine == Engine::Exact).then_some(witness.bound <= w1 * (1.0 + 1e-9)),
        oracle,
        imbalance: Some(s.imbalance),
        status: "ok".into(),
    })
}

fn tube_instance(cfg: &ExperimentConfig, inst: &Instance, at: &mut Provenance) -> Result<Vec<TubeRow>> {
    let e = inst.eigen.as_ref().map_err(|m| Error::InvalidArgument(m.clone()))?;
    let grid = grid_for(cfg, e)?;
    at.resolution = grid.resolution();
    let f = sample(e, &grid);
    let ng = extract_nodal_set(&f)?;
    let sl = e.sqrt_lambda();
    let deltas: Vec<f64> = cfg.deltas.iter().map(|d| d / sl).collect();
    let rep = retention(&f, &ng, &deltas, &cfg.ps())?;
    Ok(rep
        .rows
        .iter()
        .map(|r| TubeRow {
            at: at.clone(),
            p: Some(r.p),
            delta_sqrtlambda: Some(r.delta_sqrtlambda),
            ratio_total: Some(r.ratio_total),
            ratio_pos: Some(r.ratio_pos),
            ratio_neg: Some(r.ratio_neg),
            status: "ok".into(),
        })
        .collect())
}

/// Uniformly distributed probe centres.
pub fn probe_points(m: &ManifoldModel, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match *m {
            ManifoldModel::FlatTorus { lx, ly } => Point::new(rng.random::<f64>() * lx, rng.random::<f64>() * ly),
            ManifoldModel::RoundSphere { .. } => {
                let z: f64 = 1.0 - 2.0 * rng.random::<f64>();
                Point::new(z.acos(), 2.0 * PI * rng.random::<f64>())
            }
        })
        .collect()
}

/// Probe seed mixed from the run seed and the instance.
fn probe_seed(cfg: &ExperimentConfig, inst: &Instance) -> u64 {
    cfg.seed ^ inst.param.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ inst.seed.rotate_left(17)
}

fn doubling_instance(cfg: &ExperimentConfig, inst: &Instance, at: &mut Provenance) -> Result<Vec<DoublingRow>> {
    let e = inst.eigen.as_ref().map_err(|m| Error::InvalidArgument(m.clone()))?;
    let grid = grid_for(cfg, e)?;
    at.resolution = grid.resolution();
    let f = sample(e, &grid);
    let ng = extract_nodal_set(&f)?;
    let sl = e.sqrt_lambda();
    let r = 1.0 / sl;
    let max_n = probe_points(&e.manifold, cfg.probes, probe_seed(cfg, inst))
        .into_iter()
        .filter_map(|x| doubling_exponent(&f, x, r).ok())
        .fold(f64::NEG_INFINITY, f64::max);
    let covering = build_covering(&grid, &ng, e.eigenvalue, cfg.growth.r0)?;
    cfg.d
        .iter()
        .map(|&d| {
            let rep = classify_good_balls(&f, &covering, d, 2.0, None)?;
            Ok(DoublingRow {
                at: at.clone(),
                max_n: max_n.is_finite().then_some(max_n),
                max_n_over_sqrt_lambda: max_n.is_finite().then_some(max_n / sl),
                d: Some(d),
                good_fraction: Some(rep.mass_fraction),
                good: Some(rep.good),
                bad: Some(rep.bad),
                multiplicity: Some(rep.multiplicity),
                bound_ok: Some(rep.satisfies_mass_bound() && rep.multiplicity <= cfg.growth.c_mult),
                status: "ok".into(),
            })
        })
        .collect()
}

fn uncertainty_instance(cfg: &ExperimentConfig, inst: &Instance, at: &mut Provenance) -> Result<UncertaintyRow> {
    let e = inst.eigen.as_ref().map_err(|m| Error::InvalidArgument(m.clone()))?;
    let grid = grid_for(cfg, e)?;
    at.resolution = grid.resolution();
    let f = sample(e, &grid);
    let ng = extract_nodal_set(&f)?;
    let u = uncertainty_product(&f, &ng, cfg.engine)?;
    Ok(UncertaintyRow {
        at: at.clone(),
        engine: engine_name(&cfg.engine),
        w1_normalized: Some(u.w1),
        nodal_length: Some(u.nodal_length),
        product: Some(u.product),
        status: "ok".into(),
    })
}

fn error_row(cmd: Command, at: Provenance, cfg: &ExperimentConfig, err: &Error) -> Row {
    let status = format!("error: {err}");
    match cmd {
        Command::ScanW1 => Row::W1(W1Row {
            at,
            engine: engine_name(&cfg.engine),
            w1: None,
            l1_norm: None,
            w1_scaled: None,
            witness: None,
            witness_scaled: None,
            weak_duality: None,
            oracle: None,
            imbalance: None,
            status,
        }),
        Command::ScanTubeMass => Row::Tube(TubeRow {
            at,
            p: None,
            delta_sqrtlambda: None,
            ratio_total: None,
            ratio_pos: None,
            ratio_neg: None,
            status,
        }),
        Command::ScanDoubling => Row::Doubling(DoublingRow {
            at,
            max_n: None,
            max_n_over_sqrt_lambda: None,
            d: None,
            good_fraction: None,
            good: None,
            bad: None,
            multiplicity: None,
            bound_ok: None,
            status,
        }),
        Command::ScanUncertainty => Row::Uncertainty(UncertaintyRow {
            at,
            engine: engine_name(&cfg.engine),
            w1_normalized: None,
            nodal_length: None,
            product: None,
            status,
        }),
    }
}

/// Rows for one instance; failures become a single error row.
pub fn run_instance(cfg: &ExperimentConfig, cmd: Command, inst: &Instance) -> Vec<Row> {
    let mut at = Provenance {
        family: inst.family.name().into(),
        param: inst.param,
        seed: inst.seed,
        lambda: inst.lambda(),
        resolution: 0,
    };
    let out = match cmd {
        Command::ScanW1 => w1_instance(cfg, inst, &mut at).map(|r| vec![Row::W1(r)]),
        Command::ScanTubeMass => tube_instance(cfg, inst, &mut at).map(|v| v.into_iter().map(Row::Tube).collect()),
        Command::ScanDoubling => doubling_instance(cfg, inst, &mut at).map(|v| v.into_iter().map(Row::Doubling).collect()),
        Command::ScanUncertainty => uncertainty_instance(cfg, inst, &mut at).map(|r| vec![Row::Uncertainty(r)]),
    };
    out.unwrap_or_else(|e| vec![error_row(cmd, at, cfg, &e)])
}

/// Run a scan, handing rows to `sink` in instance order as each batch of
/// `jobs` instances finishes.
pub fn run_streaming(
    cfg: &ExperimentConfig,
    cmd: Command,
    jobs: usize,
    sink: &mut dyn FnMut(&Row) -> Result<()>,
) -> Result<()> {
    cfg.check(true)?;
    let insts = instances(cfg);
    let jobs = jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for chunk in insts.chunks(jobs) {
        let rows: Vec<Vec<Row>> = pool.install(|| chunk.par_iter().map(|i| run_instance(cfg, cmd, i)).collect());
        for row in rows.iter().flatten() {
            sink(row)?;
        }
    }
    Ok(())
}

/// Run a scan and assemble the full report with fits.
pub fn run(cfg: &ExperimentConfig, cmd: Command, jobs: usize) -> Result<Report> {
    let mut rows = Vec::new();
    run_streaming(cfg, cmd, jobs, &mut |r| {
        rows.push(r.clone());
        Ok(())
    })?;
    Ok(Report::new(cmd, cfg, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_cfg(values: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig {
            family: FamilySpec { values, ..FamilySpec::default() },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn w1_scan_rows_and_fit() {
        let rep = run(&sine_cfg(vec![2, 4, 8, 16]), Command::ScanW1, 1).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.rows.iter().all(Row::is_ok));
        let fit = rep.fits.get("w1_vs_lambda").unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn empty_range_is_invalid() {
        let err = run(&sine_cfg(vec![]), Command::ScanW1, 1).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid(_)));
    }

    #[test]
    fn failing_instance_becomes_error_row() {
        // 3 is not a sum of two squares
        let cfg = ExperimentConfig {
            family: FamilySpec { kind: FamilyKind::TorusRandom, values: vec![3, 5], seeds: vec![1], manifold: None },
            ..ExperimentConfig::default()
        };
        let rep = run(&cfg, Command::ScanUncertainty, 2).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(!rep.rows[0].is_ok() && rep.rows[1].is_ok());
    }

    #[test]
    fn tube_and_doubling_scans() {
        let cfg = sine_cfg(vec![3]);
        let rep = run(&cfg, Command::ScanTubeMass, 1).unwrap();
        assert_eq!(rep.rows.len(), cfg.deltas.len() * cfg.p.len());
        let rep = run(&cfg, Command::ScanDoubling, 1).unwrap();
        assert_eq!(rep.rows.len(), cfg.d.len());
        for r in &rep.rows {
            let Row::Doubling(r) = r else { panic!() };
            assert_eq!(r.bound_ok, Some(true), "{r:?}");
        }
    }
}
