use serde::{Deserialize, Serialize};

use crate::eigenmodel::{residual_check, sample, Eigenfunction, RESIDUAL_TOLERANCE};
use crate::error::Result;
use crate::growth::{
    build_covering, check_almost_monotonicity, classify_good_balls, doubling_exponent, HarmonicPolynomial, LiftConfig,
};
use crate::manifold::{ManifoldModel, Point};
use crate::massconc::{retention, total_norm};
use crate::nodal::extract_nodal_set;
use crate::transport::{default_witness_radius, lipschitz_witness, signed_measures, w1_exact};

use super::report::row_cells;
use super::{csv_header, error_row, grid_for, instances, run_instance, Command, ExperimentConfig, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Hard checks gate the exit code; soft ones are informational.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerifySummary {
    pub checks: Vec<Check>,
}

impl VerifySummary {
    /// True iff every hard check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.hard || c.passed)
    }

    fn hard(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), hard: true, passed, detail: detail.into() });
    }

    fn soft(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), hard: false, passed: true, detail: detail.into() });
    }

    fn fail(&mut self, name: impl Into<String>, err: impl std::fmt::Display) {
        self.hard(name, false, format!("error: {err}"));
    }
}

/// Run the invariant suite over every instance of the config's family.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifySummary> {
    cfg.check(false)?;
    let mut s = VerifySummary::default();
    let insts = instances(cfg);
    let mut scaled = Vec::new();
    for inst in &insts {
        let tag = format!("{}={}/seed={}", inst.family.name(), inst.param, inst.seed);
        match &inst.eigen {
            Ok(e) => {
                if let Err(err) = verify_instance(cfg, e, &tag, &mut s, &mut scaled) {
                    s.fail(format!("{tag}: run"), err);
                }
            }
            Err(m) => s.fail(format!("{tag}: construct"), m),
        }
    }
    if let Some(inst) = insts.first() {
        let a = run_instance(cfg, Command::ScanTubeMass, inst);
        let b = run_instance(cfg, Command::ScanTubeMass, inst);
        s.hard("determinism", a == b, format!("{} rows compared", a.len()));
    }
    header_checks(cfg, &mut s);
    monotonicity_fixture(cfg, &mut s);
    if !scaled.is_empty() {
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.soft("constant: W1*sqrt(lambda)/L1", format!("range [{lo:.4}, {hi:.4}]"));
    }
    Ok(s)
}

fn verify_instance(
    cfg: &ExperimentConfig,
    e: &Eigenfunction,
    tag: &str,
    s: &mut VerifySummary,
    scaled: &mut Vec<f64>,
) -> Result<()> {
    let grid = grid_for(cfg, e)?;
    let res = residual_check(e, &grid);
    s.hard(
        format!("{tag}: residual"),
        res.relative <= RESIDUAL_TOLERANCE,
        format!("relative residual {:.3e} at n={} (limit {RESIDUAL_TOLERANCE})", res.relative, grid.resolution()),
    );
    let area = grid.model().area();
    let werr = (grid.total_weight() - area).abs() / area;
    s.hard(format!("{tag}: weights"), werr <= 1e-12, format!("relative error {werr:.2e}"));

    let f = sample(e, &grid);
    let l1 = total_norm(&f, 1.0);
    let mean = f.integral().abs() / l1;
    s.hard(format!("{tag}: mean zero"), mean <= 1e-8, format!("|∫φ|/‖φ‖₁ = {mean:.2e}"));

    let ng = extract_nodal_set(&f)?;
    let m = signed_measures(&f)?;
    let flow = w1_exact(&m.mu, &m.nu, &grid)?;
    let lower = flow.lower_bound.unwrap_or(f64::NAN);
    let gap = (flow.value - lower) / flow.value;
    s.hard(
        format!("{tag}: flow duality"),
        flow.marginal_err <= 1e-9 && (0.0..=1e-6).contains(&gap.max(0.0)) && lower <= flow.value * (1.0 + 1e-9),
        format!("value {:.6e}, dual gap {gap:.2e}, marginal error {:.2e}", flow.value, flow.marginal_err),
    );
    scaled.push(flow.value * e.sqrt_lambda() / l1);

    let twice = w1_exact(&m.mu.scaled(2.0), &m.nu.scaled(2.0), &grid)?;
    let hom = (twice.value / (2.0 * flow.value) - 1.0).abs();
    s.hard(format!("{tag}: homogeneity"), hom <= 1e-3, format!("W1(2μ,2ν)/2W1(μ,ν) - 1 = {hom:.2e}"));

    let mut w = lipschitz_witness(&ng, &f, default_witness_radius(&ng, &f))?;
    s.hard(
        format!("{tag}: weak duality"),
        w.bound <= flow.value * (1.0 + 1e-9),
        format!("witness {:.6e} <= W1 {:.6e}", w.bound, flow.value),
    );
    if let Some(target) = cfg.fixture.and_then(|fx| fx.witness_lipschitz) {
        let lip = crate::transport::edge_lipschitz(&grid, &w.values);
        for v in &mut w.values {
            *v *= target / lip;
        }
    }
    s.hard(
        format!("{tag}: witness lipschitz"),
        w.verify(&grid),
        format!("edge Lipschitz {:.6}", crate::transport::edge_lipschitz(&grid, &w.values)),
    );

    let ps = cfg.ps();
    let rep = retention(&f, &ng, &[0.0], &ps)?;
    let worst = rep.rows.iter().map(|r| (r.ratio_total - 1.0).abs()).fold(0.0, f64::max);
    s.hard(format!("{tag}: retention at δ=0"), worst <= 1e-12, format!("max |ratio - 1| = {worst:.2e}"));

    let deltas: Vec<f64> = cfg.deltas.iter().map(|d| d / e.sqrt_lambda()).collect();
    let a = retention(&f, &ng, &deltas, &ps)?;
    let b = retention(&f.scaled(-3.5), &ng, &deltas, &ps)?;
    let drift = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| (x.ratio_total - y.ratio_total).abs())
        .fold(0.0, f64::max);
    let x = grid.point(grid.len() / 3);
    let r = 1.0 / e.sqrt_lambda();
    let dn = match (doubling_exponent(&f, x, r), doubling_exponent(&f.scaled(-3.5), x, r)) {
        (Ok(p), Ok(q)) => (p - q).abs(),
        _ => 0.0,
    };
    s.hard(
        format!("{tag}: scaling invariance"),
        drift <= 1e-12 && dn <= 1e-12,
        format!("retention drift {drift:.1e}, doubling drift {dn:.1e}"),
    );

    let covering = build_covering(&grid, &ng, e.eigenvalue, cfg.growth.r0)?;
    let mut ds = cfg.d.clone();
    ds.sort_by(f64::total_cmp);
    let mut prev = f64::NEG_INFINITY;
    let mut ok = true;
    let mut notes = Vec::new();
    for d in ds {
        let rep = classify_good_balls(&f, &covering, d, 2.0, None)?;
        ok &= rep.satisfies_mass_bound() && rep.mass_fraction >= prev - 1e-12;
        prev = rep.mass_fraction;
        notes.push(format!("d={d}: {:.3}", rep.mass_fraction));
    }
    ok &= covering.multiplicity <= cfg.growth.c_mult;
    s.hard(
        format!("{tag}: good balls"),
        ok,
        format!("multiplicity {} (max {}); good mass {}", covering.multiplicity, cfg.growth.c_mult, notes.join(", ")),
    );
    Ok(())
}

fn header_checks(cfg: &ExperimentConfig, s: &mut VerifySummary) {
    for cmd in [Command::ScanW1, Command::ScanTubeMass, Command::ScanDoubling, Command::ScanUncertainty] {
        let at = Provenance { family: "probe".into(), param: 0, seed: 0, lambda: 0.0, resolution: 0 };
        let row = error_row(cmd, at, cfg, &crate::error::Error::InvalidArgument("probe".into()));
        let header = csv_header(cmd);
        match row_cells(&header, &row) {
            Ok(_) => s.hard(format!("schema: {}", cmd.name()), true, format!("{} columns", header.len())),
            Err(e) => s.fail(format!("schema: {}", cmd.name()), e),
        }
    }
}

fn monotonicity_fixture(cfg: &ExperimentConfig, s: &mut VerifySummary) {
    let lift = HarmonicPolynomial { manifold: ManifoldModel::square_torus(), origin: Point::new(1.0, 2.0), cubic: 0.5 };
    let radii: Vec<f64> = (1..=8).map(|i| 0.05 * i as f64).collect();
    match check_almost_monotonicity(&lift, lift.origin, &radii, cfg.growth.epsilon, &LiftConfig::default()) {
        Ok(v) => s.hard("almost monotonicity", v.is_empty(), format!("{} violating pairs", v.len())),
        Err(e) => s.fail("almost monotonicity", e),
    }
}
