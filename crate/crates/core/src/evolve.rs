//! Explicit time integration of the erosion flow with per-step monitors for
//! dissipation, conservation and the erosion sign.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{self, FaceWeights, FieldRole, GridSpec, ScalarField};
use crate::numeric::compensated_sum;

/// Floor on the stiffness in the stability bound.
const STIFFNESS_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub t_end: f64,
    /// Fraction of the stability limit used per step, in `(0, 1]`.
    pub cfl_safety: f64,
    pub max_steps: usize,
    pub snapshot_stride: usize,
    /// Threshold for forming unit directions in diagnostics.
    pub eps_grad: f64,
    /// Upper bound on any single step.
    pub dt_max: Option<f64>,
    /// Relative tolerance for `max(dH/dt) > 0` before a step counts as
    /// non-erosive.
    pub erosion_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_end: 0.01,
            cfl_safety: 0.4,
            max_steps: 1_000_000,
            snapshot_stride: 1,
            eps_grad: 1e-10,
            dt_max: None,
            erosion_tol: 1e-8,
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LabError::Parameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(LabError::Parameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.snapshot_stride == 0 || self.max_steps == 0 {
            return Err(LabError::Parameter("snapshot_stride and max_steps must be >= 1".into()));
        }
        if let Some(cap) = self.dt_max {
            if !(cap > 0.0) {
                return Err(LabError::Parameter(format!("dt_max must be positive, got {cap}")));
            }
        }
        Ok(())
    }
}

/// State of one step, recorded after the step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub l2: f64,
    pub volume: f64,
    /// Net outward flux of `h^{10/3} |grad H|^2 grad H` during the step.
    pub boundary_flux: f64,
    /// `|dV/dt - boundary_flux|` for the applied increment.
    pub mass_balance_residual: f64,
    pub min: f64,
    pub max: f64,
    /// `dH/dt <= 0` everywhere, up to the erosion tolerance.
    pub erosion_ok: bool,
}

/// Energy, norm and volume of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateStats {
    pub energy: f64,
    pub l2: f64,
    pub volume: f64,
}

impl StateStats {
    pub fn of(surface: &ScalarField, water: &ScalarField) -> Result<Self> {
        let n = grid::field_norms(surface, water)?;
        Ok(Self {
            energy: n.energy,
            l2: n.l2,
            volume: surface.integral(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub surface: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub water: ScalarField,
    pub diagnostics: Vec<Diagnostics>,
    pub initial: StateStats,
    /// The run stopped at `max_steps` before reaching `t_end`.
    pub hit_max_steps: bool,
}

impl Trajectory {
    pub fn grid(&self) -> &GridSpec {
        self.water.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has an initial snapshot")
    }

    /// First step whose energy or L2 norm rose by more than
    /// `1e-10 (initial + 1)`.
    pub fn dissipation_violation(&self) -> Option<usize> {
        let ke = 1e-10 * (self.initial.energy + 1.0);
        let kl = 1e-10 * (self.initial.l2 + 1.0);
        let mut prev = (self.initial.energy, self.initial.l2);
        for d in &self.diagnostics {
            if d.energy > prev.0 + ke || d.l2 > prev.1 + kl {
                return Some(d.step);
            }
            prev = (d.energy, d.l2);
        }
        None
    }

    /// Largest `mass_balance_residual / |boundary_flux|` over all steps.
    pub fn max_relative_mass_balance(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| {
                if d.boundary_flux == 0.0 {
                    if d.mass_balance_residual == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    d.mass_balance_residual / d.boundary_flux.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Precomputed face weights and scratch buffers for repeated steps.
struct Stepper {
    g: GridSpec,
    weights: FaceWeights,
    qx: Vec<f64>,
    qy: Vec<f64>,
    div: Vec<f64>,
}

impl Stepper {
    fn new(water: &ScalarField) -> Self {
        let g = *water.grid();
        Self {
            g,
            weights: FaceWeights::new(water),
            qx: vec![0.0; g.x_faces()],
            qy: vec![0.0; g.cells()],
            div: vec![0.0; g.cells()],
        }
    }

    /// Evaluates fluxes and divergence for `surface`; returns the stability
    /// limit at safety 1.
    fn evaluate(&mut self, surface: &[f64]) -> f64 {
        let stiff = grid::flux_into(&self.g, surface, &self.weights, &mut self.qx, &mut self.qy);
        grid::divergence_into(&self.g, &self.qx, &self.qy, &mut self.div);
        limit_from_stiffness(&self.g, stiff)
    }

    fn boundary_flux(&self) -> f64 {
        let g = &self.g;
        compensated_sum((0..g.ny()).map(|j| self.qx[g.x_face(g.nx(), j)] - self.qx[g.x_face(0, j)]))
            * g.dy()
    }

    fn volume_rate(&self) -> f64 {
        compensated_sum(self.div.iter().copied()) * self.g.cell_area()
    }
}

fn limit_from_stiffness(g: &GridSpec, stiff: f64) -> f64 {
    0.25 * g.dx().min(g.dy()).powi(2) / stiff.max(STIFFNESS_FLOOR)
}

/// Largest stable explicit step, `safety * 0.25 min(dx, dy)^2 / max 3 h^{10/3} |grad H|^2`,
/// with the maximum taken over faces, never above `cap`.
pub fn stable_dt(surface: &ScalarField, water: &ScalarField, cfl_safety: f64, cap: f64) -> Result<f64> {
    surface.same_grid(water)?;
    let mut st = Stepper::new(water);
    let limit = st.evaluate(surface.values());
    Ok((cfl_safety * limit).min(cap))
}

/// One explicit Euler step `H' = H + dt div q(H)`. Refuses steps above the
/// stability limit.
pub fn step(surface: &ScalarField, water: &ScalarField, dt: f64) -> Result<ScalarField> {
    surface.same_grid(water)?;
    let mut st = Stepper::new(water);
    let limit = st.evaluate(surface.values());
    if !(dt > 0.0) || dt > limit {
        return Err(LabError::Stability { dt, limit });
    }
    let values: Vec<f64> = surface.values().iter().zip(&st.div).map(|(h, d)| h + dt * d).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite { step: 1 });
    }
    Ok(ScalarField::from_parts(*surface.grid(), FieldRole::Surface, values))
}

struct Runner {
    stepper: Stepper,
    surface: Vec<f64>,
    traj: Trajectory,
}

impl Runner {
    fn new(surface: &ScalarField, water: &ScalarField) -> Result<Self> {
        surface.same_grid(water)?;
        let surface = surface.clone().with_role(FieldRole::Surface)?;
        Ok(Self {
            stepper: Stepper::new(water),
            surface: surface.values().to_vec(),
            traj: Trajectory {
                snapshots: vec![Snapshot { step: 0, t: 0.0, surface: surface.clone() }],
                water: water.clone(),
                diagnostics: Vec::new(),
                initial: StateStats::of(&surface, water)?,
                hit_max_steps: false,
            },
        })
    }

    /// Fluxes for the current state; returns its stability limit.
    fn prepare(&mut self) -> f64 {
        self.stepper.evaluate(&self.surface)
    }

    fn advance(&mut self, step: usize, t: f64, dt: f64, opts: &EvolveOptions) -> Result<()> {
        let st = &self.stepper;
        let boundary_flux = st.boundary_flux();
        let rate = st.volume_rate();
        let max_rate = st.div.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = st.div.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (h, d) in self.surface.iter_mut().zip(&st.div) {
            *h += dt * d;
        }
        if self.surface.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { step });
        }
        let g = st.g;
        let field = ScalarField::from_parts(g, FieldRole::Surface, self.surface.clone());
        let stats = StateStats::of(&field, &self.traj.water)?;
        self.traj.diagnostics.push(Diagnostics {
            step,
            t,
            dt,
            energy: stats.energy,
            l2: stats.l2,
            volume: stats.volume,
            boundary_flux,
            mass_balance_residual: (rate - boundary_flux).abs(),
            min: field.min(),
            max: field.max(),
            erosion_ok: max_rate <= opts.erosion_tol * scale,
        });
        let last_is = |s: &Snapshot| s.step == step;
        if step.is_multiple_of(opts.snapshot_stride) && !self.traj.snapshots.last().is_some_and(last_is) {
            self.traj.snapshots.push(Snapshot { step, t, surface: field });
        }
        Ok(())
    }

    fn finish(mut self, step: usize, t: f64) -> Trajectory {
        if self.traj.snapshots.last().is_some_and(|s| s.step != step) {
            let g = self.stepper.g;
            let field = ScalarField::from_parts(g, FieldRole::Surface, self.surface);
            self.traj.snapshots.push(Snapshot { step, t, surface: field });
        }
        self.traj
    }
}

/// Picks the next step size and whether it lands on `t_end`.
fn next_dt(t: f64, limit: f64, opts: &EvolveOptions) -> (f64, bool) {
    let mut dt = opts.cfl_safety * limit;
    if let Some(cap) = opts.dt_max {
        dt = dt.min(cap);
    }
    let remaining = opts.t_end - t;
    if dt >= remaining * (1.0 - 1e-12) {
        (remaining, true)
    } else {
        (dt, false)
    }
}

/// Integrates from `H0` to `t_end` with stable steps, recording diagnostics
/// every step and snapshots every `snapshot_stride` steps plus the final
/// state.
pub fn run(surface: &ScalarField, water: &ScalarField, opts: &EvolveOptions) -> Result<Trajectory> {
    Ok(run_coupled(std::slice::from_ref(surface), water, opts)?.remove(0))
}

/// Integrates several initial surfaces in lockstep with a shared step size
/// (the smallest of their stable steps), so snapshot times coincide.
pub fn run_coupled(
    surfaces: &[ScalarField],
    water: &ScalarField,
    opts: &EvolveOptions,
) -> Result<Vec<Trajectory>> {
    opts.validate()?;
    if surfaces.is_empty() {
        return Err(LabError::Parameter("no initial surfaces".into()));
    }
    let mut runners = surfaces
        .iter()
        .map(|s| Runner::new(s, water))
        .collect::<Result<Vec<_>>>()?;
    let mut t = 0.0;
    let mut n = 0;
    let mut hit = false;
    loop {
        if n == opts.max_steps {
            hit = true;
            break;
        }
        let limit = runners.iter_mut().map(|r| r.prepare()).fold(f64::INFINITY, f64::min);
        let (dt, last) = next_dt(t, limit, opts);
        n += 1;
        t = if last { opts.t_end } else { t + dt };
        for r in &mut runners {
            r.advance(n, t, dt, opts)?;
        }
        if last {
            break;
        }
    }
    Ok(runners
        .into_iter()
        .map(|r| {
            let mut tr = r.finish(n, t);
            tr.hit_max_steps = hit;
            tr
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub differences: Vec<f64>,
    pub monotone: bool,
    /// Largest increase between consecutive snapshots, 0 if none.
    pub max_violation: f64,
}

/// Snapshot-wise `||H_a - H_b||_2` and whether it is non-increasing within
/// `1e-10 (initial + 1)`.
pub fn contraction_check(a: &Trajectory, b: &Trajectory) -> Result<ContractionReport> {
    if a.grid() != b.grid() {
        return Err(LabError::Comparison("different grids".into()));
    }
    if a.water != b.water {
        return Err(LabError::Comparison("different water depth".into()));
    }
    if a.times() != b.times() {
        return Err(LabError::Comparison("snapshot times differ".into()));
    }
    let area = a.grid().cell_area();
    let differences: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let s: f64 = x
                .surface
                .values()
                .iter()
                .zip(y.surface.values())
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            (s * area).sqrt()
        })
        .collect();
    let slack = 1e-10 * (differences[0] + 1.0);
    let max_violation = differences.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(ContractionReport {
        monotone: max_violation <= slack,
        max_violation,
        differences,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub r_fit: f64,
    /// Root-mean-square misfit of the normalized norms.
    pub residual: f64,
}

/// Least-squares fit of `||H(t)|| / ||H(0)||` to `(1 + 2 r t)^{-1/2}` over the
/// snapshots.
pub fn fit_decay(traj: &Trajectory) -> Result<DecayFit> {
    if traj.snapshots.len() < 4 {
        return Err(LabError::InsufficientData(format!(
            "decay fit needs 4 snapshots, got {}",
            traj.snapshots.len()
        )));
    }
    let n0 = traj.snapshots[0].surface.l2_norm();
    if !(n0 > 0.0) {
        return Err(LabError::Fit("initial surface has zero norm".into()));
    }
    let data: Vec<(f64, f64)> = traj.snapshots.iter().map(|s| (s.t, s.surface.l2_norm() / n0)).collect();
    fit_decay_points(&data)
}

/// Fit on raw `(t, ratio)` pairs.
pub fn fit_decay_points(data: &[(f64, f64)]) -> Result<DecayFit> {
    if data.iter().any(|(_, y)| !(*y > 0.0)) {
        return Err(LabError::Fit("norm ratio must stay positive".into()));
    }
    // 1 / y^2 = 1 + 2 r t is linear in r
    let stt: f64 = data.iter().map(|(t, _)| t * t).sum();
    if stt == 0.0 {
        return Err(LabError::Fit("all samples at t = 0".into()));
    }
    let mut r = data.iter().map(|(t, y)| t * (1.0 / (y * y) - 1.0)).sum::<f64>() / (2.0 * stt);
    let sse = |r: f64| -> Option<f64> {
        data.iter().try_fold(0.0, |acc, (t, y)| {
            let base = 1.0 + 2.0 * r * t;
            (base > 0.0).then(|| acc + (y - base.powf(-0.5)).powi(2))
        })
    };
    let mut cur = sse(r).ok_or_else(|| LabError::Fit("initial guess leaves the model domain".into()))?;
    for _ in 0..100 {
        let (mut jj, mut jr) = (0.0, 0.0);
        for (t, y) in data {
            let base = 1.0 + 2.0 * r * t;
            let m = base.powf(-0.5);
            let dm = -t * base.powf(-1.5);
            jj += dm * dm;
            jr += dm * (y - m);
        }
        if jj == 0.0 {
            break;
        }
        let mut delta = jr / jj;
        let mut accepted = false;
        for _ in 0..40 {
            if let Some(next) = sse(r + delta) {
                if next <= cur {
                    r += delta;
                    cur = next;
                    accepted = true;
                    break;
                }
            }
            delta *= 0.5;
        }
        if !accepted || delta.abs() <= 1e-15 * r.abs().max(1.0) {
            break;
        }
    }
    Ok(DecayFit {
        r_fit: r,
        residual: (cur / data.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ridge_fields, SeparableParams};
    use crate::grid::make_grid;

    fn ridge(n: usize) -> (ScalarField, ScalarField) {
        ridge_fields(&SeparableParams::default(), &make_grid(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    #[test]
    fn stable_dt_examples() {
        let g = make_grid(1.0, 1.0, 10, 10).unwrap();
        let h = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        let flat = ScalarField::zeros(g, FieldRole::Surface);
        assert_eq!(stable_dt(&flat, &h, 0.4, 0.5).unwrap(), 0.5);
        // |grad H| = 1 on every face: H = 1 - x vanishes at the outlet
        let s = ScalarField::from_fn(g, FieldRole::Surface, |x, _| 1.0 - x).unwrap();
        let dt = stable_dt(&s, &h, 0.4, 1.0).unwrap();
        assert!((dt - 0.4 * 0.25 * 0.01 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stable_dt_quarters_under_refinement() {
        let (h, s) = ridge(32);
        let (h2, s2) = ridge(64);
        let a = stable_dt(&s, &h, 0.4, 1.0).unwrap();
        let b = stable_dt(&s2, &h2, 0.4, 1.0).unwrap();
        assert!((a / b / 4.0 - 1.0).abs() < 0.05, "{}", a / b);
    }

    #[test]
    fn step_refuses_unstable_dt() {
        let (h, s) = ridge(16);
        let dt = stable_dt(&s, &h, 1.0, 1.0).unwrap();
        assert!(step(&s, &h, dt).is_ok());
        assert!(matches!(step(&s, &h, 1.01 * dt), Err(LabError::Stability { .. })));
    }

    #[test]
    fn flat_and_dry_states_do_not_move() {
        let g = make_grid(1.0, 1.0, 8, 8).unwrap();
        let h = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        let flat = ScalarField::zeros(g, FieldRole::Surface);
        assert_eq!(step(&flat, &h, 0.1).unwrap(), flat);
        let (_, s) = ridge(8);
        let dry = ScalarField::zeros(g, FieldRole::WaterDepth);
        let tr = run(&s, &dry, &EvolveOptions { t_end: 3.0, ..Default::default() }).unwrap();
        assert_eq!(tr.last().surface.values(), s.values());
        assert_eq!(tr.last().t, 3.0);
    }

    #[test]
    fn one_step_volume_change_matches_boundary_flux() {
        let (h, s) = ridge(32);
        let dt = stable_dt(&s, &h, 0.4, 1.0).unwrap();
        let tr = run(&s, &h, &EvolveOptions { t_end: dt, ..Default::default() }).unwrap();
        assert_eq!(tr.snapshots.len(), 2);
        assert_eq!(tr.diagnostics.len(), 1);
        let d = tr.diagnostics[0];
        assert!(d.mass_balance_residual <= 1e-12 * d.boundary_flux.abs());
        // and the stored states agree up to their own roundoff
        let dv = (d.volume - tr.initial.volume) / dt;
        assert!((dv - d.boundary_flux).abs() < 1e-3 * d.boundary_flux.abs());
    }

    #[test]
    fn snapshots_follow_stride() {
        let (h, s) = ridge(16);
        let opts = EvolveOptions { t_end: 1e-3, snapshot_stride: 7, ..Default::default() };
        let tr = run(&s, &h, &opts).unwrap();
        let steps: Vec<usize> = tr.snapshots.iter().map(|s| s.step).collect();
        let n = tr.diagnostics.len();
        assert_eq!(steps[0], 0);
        assert_eq!(*steps.last().unwrap(), n);
        assert!(steps[1..steps.len() - 1].iter().all(|s| s % 7 == 0));
        assert!(tr.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(tr.last().t, 1e-3);
    }

    #[test]
    fn max_steps_flag() {
        let (h, s) = ridge(16);
        let opts = EvolveOptions { t_end: 1.0, max_steps: 3, ..Default::default() };
        let tr = run(&s, &h, &opts).unwrap();
        assert!(tr.hit_max_steps);
        assert_eq!(tr.diagnostics.len(), 3);
    }

    #[test]
    fn identical_runs_contract_trivially() {
        let (h, s) = ridge(16);
        let tr = run(&s, &h, &EvolveOptions { t_end: 1e-3, ..Default::default() }).unwrap();
        let rep = contraction_check(&tr, &tr).unwrap();
        assert!(rep.monotone);
        assert!(rep.differences.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn contraction_needs_matching_times() {
        let (h, s) = ridge(16);
        let a = run(&s, &h, &EvolveOptions { t_end: 1e-3, ..Default::default() }).unwrap();
        let b = run(&s, &h, &EvolveOptions { t_end: 2e-3, ..Default::default() }).unwrap();
        assert!(matches!(contraction_check(&a, &b), Err(LabError::Comparison(_))));
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let data: Vec<(f64, f64)> =
            (0..20).map(|k| k as f64 * 0.1).map(|t| (t, (1.0 + 1.4 * t).powf(-0.5))).collect();
        let f = fit_decay_points(&data).unwrap();
        assert!((f.r_fit - 0.7).abs() < 1e-6);
        assert!(f.residual < 1e-10);
        let flat: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 1.0)).collect();
        assert!(fit_decay_points(&flat).unwrap().r_fit.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let g = make_grid(1.0, 1.0, 4, 4).unwrap();
        let h = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        let z = ScalarField::zeros(g, FieldRole::Surface);
        let opts = EvolveOptions { t_end: 1.0, dt_max: Some(0.1), ..Default::default() };
        let tr = run(&z, &h, &opts).unwrap();
        assert!(matches!(fit_decay(&tr), Err(LabError::Fit(_))));
        let short = run(&z, &h, &EvolveOptions { t_end: 1.0, ..Default::default() }).unwrap();
        assert!(matches!(fit_decay(&short), Err(LabError::InsufficientData(_))));
    }
}
