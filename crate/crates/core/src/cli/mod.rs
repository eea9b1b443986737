//! Scenario runner behind the `sediment-lab` binary.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | i/o failure |
//! | 2 | configuration error |
//! | 3 | unstable or non-finite integration, or blow-up of the time factor |
//! | 4 | no transport (no outflow through the boundary) |
//! | 5 | a certification check failed |
//! | 6 | transport solver failure (size cap, convergence, certificate) |
//! | 7 | domain or parameter error |

pub mod config;
pub mod io;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{self, BallFamily, TestFunction};
use crate::analytic::{self, Family, HillParams, SeparableParams};
use crate::error::{LabError, Result};
use crate::evolve::{self, EvolveOptions, Trajectory};
use crate::grid::{FieldRole, GridSpec, ScalarField};
use crate::numeric::convergence_order;
use crate::transport::{self, MeasureOptions};

pub use config::{
    parse_config, parse_with_overrides, serialize_config, AnalysisConfig, Format, GridConfig, OutputConfig,
    RunConfig, SolverKind, SurfaceConfig, SurfaceFamily, TimeConfig, TransportConfig,
};
pub use io::{export_heatmap, read_diagnostics, read_field_csv, read_pgm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STABILITY: i32 = 3;
pub const EXIT_NO_TRANSPORT: i32 = 4;
pub const EXIT_CERTIFICATION: i32 = 5;
pub const EXIT_TRANSPORT: i32 = 6;
pub const EXIT_DOMAIN: i32 = 7;

pub fn exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Io(_) => EXIT_IO,
        LabError::Parse { .. } => EXIT_CONFIG,
        LabError::Stability { .. } | LabError::NonFinite { .. } | LabError::BlowUp { .. } => EXIT_STABILITY,
        LabError::NoTransport { .. } => EXIT_NO_TRANSPORT,
        LabError::SizeCap { .. }
        | LabError::Convergence { .. }
        | LabError::Certificate { .. }
        | LabError::Balance { .. }
        | LabError::EmptyComparison => EXIT_TRANSPORT,
        _ => EXIT_DOMAIN,
    }
}

/// What a command wrote and whether it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_CERTIFICATION
        }
    }
}

/// Collects output files and their hashes for the manifest.
struct Artifacts {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
    files: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let dir = PathBuf::from(&cfg.output.directory);
        fs::create_dir_all(&dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, hashes: BTreeMap::new(), files: Vec::new(), warnings: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        self.hashes.insert(name.to_string(), io::sha256_hex(contents.as_bytes()));
        self.files.push(path);
        Ok(())
    }

    fn heatmap(&mut self, name: &str, field: &ScalarField) -> Result<()> {
        let (text, ok) = io::heatmap_pgm(field);
        if !ok {
            self.warnings.push(format!("{name}: constant field, image is all zero"));
        }
        self.write(name, &text)
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`: the command, the configuration (with the
    /// output directory blanked so runs into different directories agree),
    /// a summary and the sha256 of every other file.
    fn finish(mut self, command: &str, cfg: &RunConfig, summary: Value, passed: bool) -> Result<Outcome> {
        let mut echo = cfg.clone();
        echo.output.directory = ".".into();
        let manifest = json!({
            "command": command,
            "config": serialize_config(&echo),
            "files": self.hashes,
            "summary": summary,
            "warnings": self.warnings,
        });
        self.json("manifest.json", &manifest)?;
        Ok(Outcome { files: self.files, passed, warnings: self.warnings })
    }
}

/// Initial surface and water depth of the configured scenario.
pub fn initial_fields(cfg: &RunConfig) -> Result<(ScalarField, ScalarField)> {
    let g = cfg.grid.spec()?;
    let s = &cfg.surface;
    let (h, surface) = match s.family {
        SurfaceFamily::Ridge | SurfaceFamily::Mountain => analytic::separable_fields(&s.separable(), &g)?,
        SurfaceFamily::Hill => analytic::hill_fields(&s.hill(), &g, 0.0)?,
        SurfaceFamily::Flat => (
            ScalarField::constant(g, FieldRole::WaterDepth, s.depth())?,
            ScalarField::zeros(g, FieldRole::Surface),
        ),
        SurfaceFamily::File => {
            let input = s.input.as_ref().expect("checked at parse time");
            let surface = read_field_csv(Path::new(input), &g, FieldRole::Surface)?;
            let h = match &s.water_input {
                Some(p) => read_field_csv(Path::new(p), &g, FieldRole::WaterDepth)?,
                None => ScalarField::constant(g, FieldRole::WaterDepth, s.depth())?,
            };
            (h, surface)
        }
    };
    Ok((surface.with_role(FieldRole::Surface)?, h))
}

pub fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions {
        t_end: cfg.time.t_end,
        cfl_safety: cfg.time.cfl_safety,
        max_steps: cfg.time.max_steps,
        snapshot_stride: cfg.time.snapshot_stride,
        dt_max: cfg.time.dt_max,
        ..EvolveOptions::default()
    }
}

fn snapshot_summary(traj: &Trajectory) -> Value {
    let snaps: Vec<Value> = traj
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, s)| json!({ "index": k, "step": s.step, "t": s.t }))
        .collect();
    let last = traj.diagnostics.last();
    json!({
        "steps": traj.diagnostics.len(),
        "t_final": traj.last().t,
        "hit_max_steps": traj.hit_max_steps,
        "initial_energy": traj.initial.energy,
        "final_energy": last.map_or(traj.initial.energy, |d| d.energy),
        "snapshots": snaps,
    })
}

/// Runs the configured scenario and writes `snapshot_<k>.csv`, `h.csv`,
/// `diagnostics.jsonl` and `manifest.json` (plus heatmaps when `pgm` is
/// among the formats).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let (surface, water) = initial_fields(cfg)?;
    let traj = evolve::run(&surface, &water, &evolve_options(cfg))?;
    let mut out = Artifacts::new(cfg)?;
    if cfg.output.wants(Format::Csv) {
        for (k, s) in traj.snapshots.iter().enumerate() {
            out.write(&format!("snapshot_{k}.csv"), &io::field_csv(&s.surface, "H"))?;
        }
        out.write("h.csv", &io::field_csv(&water, "h"))?;
    }
    out.write("diagnostics.jsonl", &io::diagnostics_jsonl(&traj.diagnostics))?;
    if cfg.output.wants(Format::Pgm) {
        out.heatmap("initial.pgm", &surface)?;
        out.heatmap("final.pgm", &traj.last().surface)?;
    }
    out.finish("simulate", cfg, snapshot_summary(&traj), true)
}

/// One certification check. Checks with `asserted = false` are reported
/// but do not affect the outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub asserted: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, asserted: true, value, threshold, detail: detail.into() }
    }

    fn failed(name: &str, e: &LabError) -> Self {
        Self::new(name, false, f64::NAN, f64::NAN, e.to_string())
    }

    fn informational(mut self) -> Self {
        self.asserted = false;
        self
    }
}

/// Minimum refinement order for residuals that should be second order.
pub const MIN_ORDER: f64 = 1.5;

/// Refinement order of the curl residual on the non-excluded cells. Returns
/// `None` for the order when the residual vanishes at every level.
pub fn curl_study(family: &Family, width: f64, length: f64, levels: &[usize]) -> Result<(Vec<f64>, Option<f64>)> {
    let mut spacings = Vec::new();
    let mut maxima = Vec::new();
    for &n in levels {
        let g = GridSpec::new(width, length, n, n)?;
        let surface = match family {
            Family::Separable(p) => analytic::separable_fields(p, &g)?.1,
            Family::Hill(p) => analytic::hill_fields(p, &g, 0.0)?.1,
        };
        let excluded = analytic::excluded_cells(family, &g);
        maxima.push(analytic::curl_residual(&surface, 1e-8).max_abs(Some(&excluded)));
        spacings.push(g.dx());
    }
    let order = if maxima.iter().all(|m| *m == 0.0) { None } else { convergence_order(&spacings, &maxima) };
    Ok((maxima, order))
}

fn analytic_checks(cfg: &RunConfig, checks: &mut Vec<Check>, orders: &mut BTreeMap<String, Value>) {
    let family = match cfg.surface.family {
        SurfaceFamily::Ridge | SurfaceFamily::Mountain => {
            let p = cfg.surface.separable();
            let res = analytic::validate_exponents(p.c, p.d).branch2_residual;
            checks.push(match p.check_erosive() {
                Ok(()) => Check::new("exponent_relation", true, res, 1e-12, "c = 2 - 5d/3"),
                Err(e) => Check::new("exponent_relation", false, res, 1e-12, e.to_string()),
            });
            Family::Separable(p)
        }
        SurfaceFamily::Hill => {
            let p = cfg.surface.hill();
            let v = p.violations();
            checks.push(Check::new("hill_constants", v.is_empty(), v.len() as f64, 0.0, v.join("; ")));
            Family::Hill(p)
        }
        SurfaceFamily::File | SurfaceFamily::Flat => return,
    };
    let (w, l) = (cfg.grid.width, cfg.grid.length);
    let levels = &cfg.analysis.levels;
    checks.push(match analytic::residual_refinement(&family, w, l, levels, 0.0) {
        Ok(study) => {
            orders.insert("pde_residual".into(), json!({ "max_residuals": study.max_residuals, "order": study.order }));
            let order = study.order.unwrap_or(f64::NAN);
            let exact = study.max_residuals.iter().all(|r| *r == 0.0);
            Check::new("pde_residual_order", exact || order >= MIN_ORDER, order, MIN_ORDER, "")
        }
        Err(e) => Check::failed("pde_residual_order", &e),
    });
    checks.push(match curl_study(&family, w, l, levels) {
        Ok((maxima, order)) => {
            orders.insert("curl_residual".into(), json!({ "max_residuals": maxima, "order": order }));
            match order {
                None => Check::new("curl_residual_order", true, f64::NAN, MIN_ORDER, "identically zero"),
                Some(o) => Check::new("curl_residual_order", o >= MIN_ORDER, o, MIN_ORDER, ""),
            }
        }
        Err(e) => Check::failed("curl_residual_order", &e),
    });
}

fn perturbation_scale(surface: &ScalarField) -> f64 {
    let m = surface.max().abs().max(surface.min().abs());
    if m > 0.0 {
        0.5 * m
    } else {
        0.5
    }
}

/// Test functions for the entropy check, drawn from `seed` so that every
/// resolution sees the same sequence of bumps.
fn entropy_tests(g: &GridSpec, water: &ScalarField, count: usize, amplitude: f64, seed: u64) -> Result<Vec<TestFunction>> {
    let zs = analysis::zero_set(water, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TestFunction::random_admissible(g, &zs.dilated, count, amplitude, &mut rng)
}

/// Largest positive entropy residual over the test functions and levels.
pub fn entropy_slack(traj: &Trajectory, tests: &[TestFunction], levels: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for phi in tests {
        for &k in levels {
            worst = worst.max(analysis::entropy_residual(traj, phi, k)?.max());
        }
    }
    Ok(worst)
}

fn entropy_check(cfg: &RunConfig, traj: &Trajectory, surface: &ScalarField) -> Result<Check> {
    let an = &cfg.analysis;
    let amp = perturbation_scale(surface);
    let g = *traj.grid();
    if surface.values().iter().all(|v| *v == 0.0) {
        return Ok(Check::new("entropy", true, 0.0, 0.0, "zero surface"));
    }
    if traj.snapshots.len() < 3 {
        let detail = format!("{} snapshots; lower snapshot_stride or raise t_end", traj.snapshots.len());
        return Ok(Check::new("entropy", true, f64::NAN, f64::NAN, detail).informational());
    }
    let coarse = entropy_slack(traj, &entropy_tests(&g, &traj.water, an.n_test_functions, amp, an.seed)?, &an.k_list)?;
    if cfg.surface.family == SurfaceFamily::File {
        return Ok(Check::new("entropy", true, coarse, f64::NAN, "single resolution").informational());
    }
    if coarse <= 1e-14 * (1.0 + amp) {
        return Ok(Check::new("entropy", true, coarse, 0.0, "no positive residual"));
    }
    let mut fine_cfg = cfg.clone();
    fine_cfg.grid.nx *= 2;
    fine_cfg.grid.ny *= 2;
    let (s2, h2) = initial_fields(&fine_cfg)?;
    let t2 = evolve::run(&s2, &h2, &evolve_options(&fine_cfg))?;
    let g2 = *t2.grid();
    let fine = entropy_slack(&t2, &entropy_tests(&g2, &h2, an.n_test_functions, amp, an.seed)?, &an.k_list)?;
    let ratio = coarse / fine.max(f64::MIN_POSITIVE);
    Ok(Check::new(
        "entropy",
        ratio >= 2.0,
        ratio,
        2.0,
        format!("positive slack {coarse:e} at {}x{}, {fine:e} at {}x{}", g.nx(), g.ny(), g2.nx(), g2.ny()),
    ))
}

fn contraction(cfg: &RunConfig, surface: &ScalarField, water: &ScalarField) -> Result<Check> {
    let g = *surface.grid();
    let amp = perturbation_scale(surface) * 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed.wrapping_add(1));
    let none = vec![false; g.cells()];
    let mut worst = 0.0_f64;
    let mut ok = true;
    for _ in 0..cfg.analysis.contraction_pairs {
        let bumps = TestFunction::random_admissible(&g, &none, 2, amp, &mut rng)?;
        let pair: Vec<ScalarField> = bumps
            .iter()
            .map(|b| {
                let v = surface.values().iter().zip(b.field().values()).map(|(s, p)| s + p).collect();
                ScalarField::new(g, FieldRole::Surface, v)
            })
            .collect::<Result<_>>()?;
        let runs = evolve::run_coupled(&pair, water, &evolve_options(cfg))?;
        let rep = evolve::contraction_check(&runs[0], &runs[1])?;
        ok &= rep.monotone;
        worst = worst.max(rep.max_violation);
    }
    Ok(Check::new("contraction", ok, worst, 1e-10, "largest increase of ||H_a - H_b||"))
}

fn water_function(cfg: &RunConfig, water: &ScalarField) -> Box<dyn Fn(f64, f64) -> f64> {
    match cfg.surface.family {
        SurfaceFamily::Ridge | SurfaceFamily::Mountain => {
            let p: SeparableParams = cfg.surface.separable();
            Box::new(move |x, y| {
                let b = p.base(x, y);
                if b > 0.0 {
                    p.h1 * b.powf(p.d)
                } else {
                    0.0
                }
            })
        }
        SurfaceFamily::Hill => {
            let p: HillParams = cfg.surface.hill();
            Box::new(move |x, y| p.water_at(x, y, 0.0).unwrap_or(f64::NAN))
        }
        SurfaceFamily::File | SurfaceFamily::Flat => {
            let w = water.clone();
            Box::new(move |x, y| {
                let g = w.grid();
                let i = ((x / g.dx()) as usize).min(g.nx() - 1);
                let j = ((y / g.dy()) as usize).min(g.ny() - 1);
                w.values()[g.idx(i, j)]
            })
        }
    }
}

/// Runs the certification suite and writes `report.json`. The outcome
/// fails when any asserted check fails.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let mut checks = Vec::new();
    let mut orders = BTreeMap::new();
    analytic_checks(cfg, &mut checks, &mut orders);

    let (surface, water) = initial_fields(cfg)?;
    let traj = evolve::run(&surface, &water, &evolve_options(cfg))?;
    let viol = traj.dissipation_violation();
    checks.push(Check::new(
        "dissipation",
        viol.is_none(),
        viol.map_or(0.0, |s| s as f64),
        1e-10,
        viol.map_or("energy and L2 norm never increase".to_string(), |s| format!("increase at step {s}")),
    ));
    let mb = traj.max_relative_mass_balance();
    checks.push(Check::new("mass_balance", mb <= 1e-12, mb, 1e-12, "max |dV/dt - F| / |F| per step"));
    checks.push(contraction(cfg, &surface, &water).unwrap_or_else(|e| Check::failed("contraction", &e)));
    checks.push(entropy_check(cfg, &traj, &surface).unwrap_or_else(|e| Check::failed("entropy", &e)));

    if matches!(cfg.surface.family, SurfaceFamily::Ridge | SurfaceFamily::Mountain) {
        let p = cfg.surface.separable();
        let formula = p.decay_rate();
        checks.push(match evolve::fit_decay(&traj) {
            Ok(fit) => {
                let ratio = fit.r_fit.abs() / formula.abs();
                Check::new(
                    "decay_rate",
                    (ratio - 1.0).abs() <= 0.1,
                    ratio,
                    0.1,
                    format!("r_fit = {}, formula r = {formula}, same sign: {}", fit.r_fit, fit.r_fit * formula > 0.0),
                )
                .informational()
            }
            Err(e) => Check::failed("decay_rate", &e).informational(),
        });
    }

    let g = *surface.grid();
    let balls = BallFamily::dyadic(&g, cfg.analysis.ball_stride)?;
    let h = water_function(cfg, &water);
    checks.push(match analysis::muckenhoupt_a4(&*h, &balls, cfg.analysis.quad_n) {
        Ok(m) => Check::new(
            "muckenhoupt_a4",
            !m.any_divergent,
            m.sup_estimate,
            f64::NAN,
            if m.any_divergent { "some balls diverge" } else { "all balls finite" },
        )
        .informational(),
        Err(e) => Check::failed("muckenhoupt_a4", &e).informational(),
    });

    let passed = checks.iter().all(|c| c.passed || !c.asserted);
    let report = json!({
        "command": "verify",
        "family": format!("{:?}", cfg.surface.family).to_lowercase(),
        "passed": passed,
        "checks": checks,
        "orders": orders,
    });
    let mut out = Artifacts::new(cfg)?;
    out.json("report.json", &report)?;
    out.finish("verify", cfg, json!({ "passed": passed, "checks": checks.len() }), passed)
}

/// Resolves a possibly negative snapshot index.
fn snapshot_index(requested: i64, count: usize) -> Result<usize> {
    let idx = if requested < 0 { count as i64 + requested } else { requested };
    if idx < 0 || idx >= count as i64 {
        return Err(LabError::Parameter(format!("snapshot {requested} out of range (have {count})")));
    }
    Ok(idx as usize)
}

/// Solves the transport problem at the configured snapshot and writes
/// `transport.json`, `directions.csv` and `potential.csv`.
pub fn cmd_transport(cfg: &RunConfig) -> Result<Outcome> {
    let (surface, water) = initial_fields(cfg)?;
    let traj = evolve::run(&surface, &water, &evolve_options(cfg))?;
    let tc = &cfg.transport;
    let idx = snapshot_index(tc.snapshot, traj.snapshots.len())?;
    let m = transport::build_measures(&traj, idx, &MeasureOptions { nu: tc.nu, rate: tc.rate, ..MeasureOptions::default() })?;
    let (plan, dual, solver_info) = match tc.solver {
        SolverKind::Exact => {
            let s = transport::solve_exact(&m.mu, &m.nu, tc.size_cap)?;
            let info = json!({ "solver": "exact", "pivots": s.pivots });
            (s.plan, s.dual, info)
        }
        SolverKind::Sinkhorn => {
            let s = transport::solve_sinkhorn(&m.mu, &m.nu, tc.reg_eps, tc.max_iter, tc.tol)?;
            let info = json!({
                "solver": "sinkhorn",
                "iterations": s.iterations,
                "marginal_error": s.marginal_error,
                "gap_bound": s.gap_bound,
                "reg_eps": tc.reg_eps,
            });
            (s.plan, s.dual, info)
        }
    };
    let snap = &traj.snapshots[idx];
    let dirs = transport::displacement_directions(&plan, &m.mu, tc.eps_mass)?;
    let rep = transport::alignment_report(&dirs, &dual, &snap.surface, tc.eps_grad)?;
    let gap = plan.cost - dual.objective;
    let report = json!({
        "command": "transport",
        "snapshot": idx,
        "step": snap.step,
        "t": snap.t,
        "solver": solver_info,
        "primal_cost": plan.cost,
        "dual_objective": dual.objective,
        "duality_gap": gap,
        "relative_gap": gap / (plan.cost + 1.0),
        "marginal_error": plan.marginal_error(&m.mu, &m.nu),
        "total_mass": m.mu.total(),
        "boundary_flux": m.boundary_flux,
        "erosion_ok": m.erosion_ok,
        "clipped_mass": m.clipped_mass,
        "rescale": m.rescale,
        "one_sided_rate": m.one_sided,
        "alignment": rep,
    });
    let mut out = Artifacts::new(cfg)?;
    out.json("transport.json", &report)?;
    let g = *surface.grid();
    let mut csv = String::from("x,y,dir_x,dir_y,valid\n");
    for k in 0..g.cells() {
        let (x, y) = g.center(k);
        csv.push_str(&format!(
            "{x:.16e},{y:.16e},{:.16e},{:.16e},{}\n",
            dirs.field.x()[k],
            dirs.field.y()[k],
            u8::from(dirs.valid[k])
        ));
    }
    out.write("directions.csv", &csv)?;
    out.write("potential.csv", &io::field_csv(&dual.potential, "u"))?;
    if cfg.output.wants(Format::Pgm) {
        out.heatmap("potential.pgm", &dual.potential)?;
    }
    let summary = json!({ "primal_cost": plan.cost, "relative_gap": gap / (plan.cost + 1.0) });
    out.finish("transport", cfg, summary, true)
}

/// Writes heatmaps of the initial surface and water depth, or of the field
/// stored in `input`.
pub fn cmd_heatmap(cfg: &RunConfig, input: Option<&Path>) -> Result<Outcome> {
    let mut out = Artifacts::new(cfg)?;
    match input {
        Some(path) => {
            let g = cfg.grid.spec()?;
            let field = read_field_csv(path, &g, FieldRole::Generic)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
            out.heatmap(&format!("{stem}.pgm"), &field)?;
        }
        None => {
            let (surface, water) = initial_fields(cfg)?;
            out.heatmap("surface.pgm", &surface)?;
            out.heatmap("water.pgm", &water)?;
        }
    }
    out.finish("heatmap", cfg, json!({}), true)
}
