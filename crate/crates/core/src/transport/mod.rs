//! Instantaneous optimal transport of eroded sediment.
//!
//! The erosion rate `-dH/dt` of a snapshot is the source measure `mu`, and
//! the outflow through the boundary, spread over the domain, is the target
//! `nu`. The L1 (Monge) problem between them is solved exactly by network
//! simplex or approximately by Sinkhorn, and the displacement directions and
//! the Kantorovich potential are compared with the downhill direction
//! `-grad H / |grad H|`.

mod simplex;
mod sinkhorn;

use rand::Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolve::Trajectory;
use crate::grid::{self, FieldRole, GridSpec, Placement, ScalarField, VectorField};
use crate::numeric::compensated_sum;

/// Largest combined support (sources plus sinks) for the exact solver.
pub const EXACT_SIZE_CAP: usize = 4096;

/// Relative tolerance for the duality-gap certificate.
pub const GAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: GridSpec,
    masses: Vec<f64>,
    total: f64,
}

impl DiscreteMeasure {
    pub fn new(grid: GridSpec, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.cells() {
            return Err(LabError::Field(format!(
                "expected {} masses, got {}",
                grid.cells(),
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(LabError::Field("masses must be finite and nonnegative".into()));
        }
        let total = compensated_sum(masses.iter().copied());
        Ok(Self { grid, masses, total })
    }

    /// Unit mass at one cell.
    pub fn dirac(grid: GridSpec, cell: usize) -> Result<Self> {
        let mut m = vec![0.0; grid.cells()];
        *m.get_mut(cell).ok_or_else(|| LabError::Field(format!("no cell {cell}")))? = 1.0;
        Self::new(grid, m)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, self.masses.iter().map(|m| m * factor).collect())
    }

    /// Mass per unit area.
    pub fn density(&self) -> ScalarField {
        let a = self.grid.cell_area();
        ScalarField::from_parts(self.grid, FieldRole::Density, self.masses.iter().map(|m| m / a).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    grid: GridSpec,
    /// Sorted by source then target.
    pub entries: Vec<PlanEntry>,
    /// `sum mass |x_source - x_target|`.
    pub cost: f64,
}

impl TransportPlan {
    fn from_entries(grid: GridSpec, entries: Vec<PlanEntry>) -> Self {
        let cost = compensated_sum(entries.iter().map(|e| e.mass * distance(&grid, e.source, e.target)));
        Self { grid, entries, cost }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.cells();
        let (mut rows, mut cols) = (vec![0.0; n], vec![0.0; n]);
        for e in &self.entries {
            rows[e.source] += e.mass;
            cols[e.target] += e.mass;
        }
        (rows, cols)
    }

    /// Largest marginal mismatch relative to the total mass.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let (rows, cols) = self.marginals();
        let scale = mu.total.max(nu.total).max(f64::MIN_POSITIVE);
        let er = rows.iter().zip(&mu.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ec = cols.iter().zip(&nu.masses).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        er.max(ec) / scale
    }
}

/// A 1-Lipschitz potential and its dual objective `sum u (mu - nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    pub potential: ScalarField,
    pub objective: f64,
}

impl DualPotential {
    /// Largest `|u_i - u_j| - |x_i - x_j|` over all grid-neighbour pairs
    /// (including diagonals) and `samples` random pairs.
    pub fn lipschitz_violation<R: Rng>(&self, samples: usize, rng: &mut R) -> f64 {
        let g = *self.potential.grid();
        let u = self.potential.values();
        let gap = |a: usize, b: usize| (u[a] - u[b]).abs() - distance(&g, a, b);
        let mut worst = f64::NEG_INFINITY;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.idx(i, j);
                for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
                    if i + di < g.nx() && j + dj < g.ny() {
                        worst = worst.max(gap(k, g.idx(i + di, j + dj)));
                    }
                }
                if i > 0 && j + 1 < g.ny() {
                    worst = worst.max(gap(k, g.idx(i - 1, j + 1)));
                }
            }
        }
        for _ in 0..samples {
            let a = rng.random_range(0..g.cells());
            let b = rng.random_range(0..g.cells());
            worst = worst.max(gap(a, b));
        }
        worst
    }
}

/// Euclidean distance between cell centers (no wrap in `y`).
pub fn distance(g: &GridSpec, a: usize, b: usize) -> f64 {
    let (xa, ya) = g.center(a);
    let (xb, yb) = g.center(b);
    (xa - xb).hypot(ya - yb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NuPlacement {
    /// Spread over every cell in proportion to area.
    Uniform,
    /// Spread over the column next to the outlet.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateEstimate {
    /// `div q` of the snapshot itself, consistent with the outlet flux.
    Instantaneous,
    /// Differences between neighbouring snapshots.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    pub nu: NuPlacement,
    pub rate: RateEstimate,
    /// Positive rates above `clip_tol * max |rate|` mark erosion as violated.
    pub clip_tol: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            nu: NuPlacement::Uniform,
            rate: RateEstimate::Instantaneous,
            clip_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measures {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// `dH/dt <= 0` everywhere up to the clipping tolerance.
    pub erosion_ok: bool,
    /// Net outward flux; negative for an outflow.
    pub boundary_flux: f64,
    /// Mass of positive rates removed by clipping.
    pub clipped_mass: f64,
    /// Relative change applied to `mu` to match the total of `nu`.
    pub rescale: f64,
    /// The rate came from a one-sided difference.
    pub one_sided: bool,
}

/// Source and target measures of the snapshot `index`.
pub fn build_measures(traj: &Trajectory, index: usize, opts: &MeasureOptions) -> Result<Measures> {
    let n = traj.snapshots.len();
    if index >= n {
        return Err(LabError::Parameter(format!("snapshot {index} out of range (have {n})")));
    }
    let g = *traj.grid();
    let area = g.cell_area();
    let snap = &traj.snapshots[index].surface;
    let (rate, flux, one_sided) = match opts.rate {
        RateEstimate::Instantaneous => {
            let q = grid::sediment_flux(snap, &traj.water)?;
            let flux = q.boundary_flux()?;
            (grid::divergence(&q)?.into_values(), flux, false)
        }
        RateEstimate::Centered => {
            if n < 2 {
                return Err(LabError::InsufficientData("centered rates need 2 snapshots".into()));
            }
            let (a, b, one_sided) = if index == 0 {
                (0, 1, true)
            } else if index == n - 1 {
                (n - 2, n - 1, true)
            } else {
                (index - 1, index + 1, false)
            };
            let (sa, sb) = (&traj.snapshots[a], &traj.snapshots[b]);
            let dt = sb.t - sa.t;
            let rate: Vec<f64> = sa
                .surface
                .values()
                .iter()
                .zip(sb.surface.values())
                .map(|(x, y)| (y - x) / dt)
                .collect();
            let flux = compensated_sum(rate.iter().copied()) * area;
            (rate, flux, one_sided)
        }
    };
    if !(flux < 0.0) {
        return Err(LabError::NoTransport { flux });
    }
    let scale = rate.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let top = rate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let erosion_ok = top <= opts.clip_tol * scale;
    let clipped_mass = compensated_sum(rate.iter().map(|r| r.max(0.0))) * area;
    let mut mu: Vec<f64> = rate.iter().map(|r| (-r).max(0.0) * area).collect();

    let outflow = -flux;
    let nu: Vec<f64> = match opts.nu {
        NuPlacement::Uniform => vec![outflow / g.cells() as f64; g.cells()],
        NuPlacement::Boundary => (0..g.cells())
            .map(|k| if g.ij(k).0 == g.nx() - 1 { outflow / g.ny() as f64 } else { 0.0 })
            .collect(),
    };
    let nu_total = compensated_sum(nu.iter().copied());
    let mu_total = compensated_sum(mu.iter().copied());
    if !(mu_total > 0.0) {
        return Err(LabError::NoTransport { flux });
    }
    let factor = nu_total / mu_total;
    mu.iter_mut().for_each(|m| *m *= factor);
    // absorb the last roundoff into the largest mass so the totals agree
    let big = (0..mu.len()).fold(0, |b, k| if mu[k] > mu[b] { k } else { b });
    for _ in 0..8 {
        let diff = nu_total - compensated_sum(mu.iter().copied());
        if diff == 0.0 {
            break;
        }
        mu[big] += diff;
    }
    Ok(Measures {
        mu: DiscreteMeasure::new(g, mu)?,
        nu: DiscreteMeasure::new(g, nu)?,
        erosion_ok,
        boundary_flux: flux,
        clipped_mass,
        rescale: factor - 1.0,
        one_sided,
    })
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.grid != nu.grid {
        return Err(LabError::GridMismatch);
    }
    let scale = mu.total.max(nu.total);
    if !(scale > 0.0) || (mu.total - nu.total).abs() > 1e-9 * scale {
        return Err(LabError::Balance { mu: mu.total, nu: nu.total });
    }
    Ok(())
}

/// Integer masses summing to `2^52`, rounded by largest remainder.
fn integerize(masses: &[f64], total: f64) -> Vec<i64> {
    const UNIT: i64 = 1 << 52;
    let scaled: Vec<f64> = masses.iter().map(|m| m / total * UNIT as f64).collect();
    let mut ints: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
    let mut short = UNIT - ints.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (scaled[a] - scaled[a].floor(), scaled[b] - scaled[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut k = 0;
    while short > 0 {
        let c = order[k % order.len()];
        if masses[c] > 0.0 {
            ints[c] += 1;
            short -= 1;
        }
        k += 1;
    }
    while short < 0 {
        let c = order[order.len() - 1 - (k % order.len())];
        if ints[c] > 0 {
            ints[c] -= 1;
            short += 1;
        }
        k += 1;
    }
    ints
}

/// Integer arc costs: the distance at `2^40 / diameter` resolution, with the
/// squared distance in the low bits as a tie-break. Among the optimal L1
/// plans this selects the one that also minimizes the quadratic cost, which
/// moves mass along monotone rays instead of arbitrary equal-cost swaps.
struct CostTable {
    nx: usize,
    shift: u32,
    primary_scale: f64,
    table: Vec<i128>,
}

impl CostTable {
    fn new(g: &GridSpec, nodes: usize) -> Self {
        let (nx, ny) = (g.nx(), g.ny());
        let diam = g.width().hypot(g.length());
        let primary_scale = (1u64 << 40) as f64 / diam;
        let h = g.dx().min(g.dy());
        let max_sec = ((diam / h).powi(2)).ceil() as i128 + 1;
        // keep every tree path of secondary costs below a quarter of the
        // primary unit
        let bound = 4 * (nodes as i128 + 1) * max_sec;
        let shift = 128 - bound.leading_zeros();
        let mut table = vec![0i128; nx * ny];
        for dj in 0..ny {
            for di in 0..nx {
                let (ex, ey) = (di as f64 * g.dx(), dj as f64 * g.dy());
                let d = ex.hypot(ey);
                let primary = (d * primary_scale).round() as i128;
                let secondary = ((ex * ex + ey * ey) / (h * h)).round() as i128;
                table[dj * nx + di] = (primary << shift) + secondary;
            }
        }
        Self { nx, shift, primary_scale, table }
    }

    #[inline]
    fn cost(&self, a: (usize, usize), b: (usize, usize)) -> i128 {
        self.table[a.1.abs_diff(b.1) * self.nx + a.0.abs_diff(b.0)]
    }

    /// Primary part of a potential, in distance units.
    fn primary(&self, pi: i128) -> f64 {
        let unit = 1i128 << self.shift;
        let p = (pi + unit / 2).div_euclid(unit);
        p as f64 / self.primary_scale
    }
}

/// `u(x) = min_j (|x - y_j| - v_j)` over sinks: the largest 1-Lipschitz
/// function below the sink constraints.
fn lipschitz_closure(g: &GridSpec, sinks: &[usize], v: &[f64]) -> Vec<f64> {
    (0..g.cells())
        .map(|k| {
            sinks
                .iter()
                .zip(v)
                .map(|(&s, vj)| distance(g, k, s) - vj)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn dual_from_sinks(g: &GridSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure, sinks: &[usize], v: &[f64]) -> DualPotential {
    let u = lipschitz_closure(g, sinks, v);
    let objective = compensated_sum((0..g.cells()).map(|k| u[k] * (mu.masses[k] - nu.masses[k])));
    DualPotential {
        potential: ScalarField::from_parts(*g, FieldRole::Generic, u),
        objective,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub plan: TransportPlan,
    pub dual: DualPotential,
    /// `cost - objective`.
    pub gap: f64,
    pub pivots: usize,
}

impl ExactSolution {
    pub fn relative_gap(&self) -> f64 {
        self.gap / (self.plan.cost + 1.0)
    }
}

/// Exact L1 transport by network simplex, with the Kantorovich potential
/// read off the node potentials and certified by strong duality.
pub fn solve_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cap: usize) -> Result<ExactSolution> {
    check_pair(mu, nu)?;
    let g = mu.grid;
    let total = mu.total;
    let mi = integerize(&mu.masses, total);
    let ni = integerize(&nu.masses, nu.total);
    let sources: Vec<usize> = (0..g.cells()).filter(|&k| mi[k] > 0).collect();
    let sinks: Vec<usize> = (0..g.cells()).filter(|&k| ni[k] > 0).collect();
    let size = sources.len() + sinks.len();
    if size > cap {
        return Err(LabError::SizeCap { size, cap });
    }
    let table = CostTable::new(&g, size);
    let src_ij: Vec<(usize, usize)> = sources.iter().map(|&k| g.ij(k)).collect();
    let dst_ij: Vec<(usize, usize)> = sinks.iter().map(|&k| g.ij(k)).collect();
    let supply: Vec<i64> = sources.iter().map(|&k| mi[k]).collect();
    let demand: Vec<i64> = sinks.iter().map(|&k| ni[k]).collect();
    let sol = simplex::solve(&supply, &demand, |i, j| table.cost(src_ij[i], dst_ij[j]));

    let unit = total / (1i64 << 52) as f64;
    let entries = sol
        .flows
        .iter()
        .map(|&(i, j, f)| PlanEntry { source: sources[i], target: sinks[j], mass: f as f64 * unit })
        .collect();
    let plan = TransportPlan::from_entries(g, entries);
    let v: Vec<f64> = sol.pi_dst.iter().map(|&p| table.primary(p)).collect();
    let dual = dual_from_sinks(&g, mu, nu, &sinks, &v);
    let gap = plan.cost - dual.objective;
    if gap.abs() > GAP_TOLERANCE * (plan.cost + 1.0) {
        return Err(LabError::Certificate { gap });
    }
    Ok(ExactSolution { plan, dual, gap, pivots: sol.pivots })
}

pub fn solve_primal_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportPlan> {
    Ok(solve_exact(mu, nu, EXACT_SIZE_CAP)?.plan)
}

pub fn solve_dual(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DualPotential> {
    Ok(solve_exact(mu, nu, EXACT_SIZE_CAP)?.dual)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornSolution {
    pub plan: TransportPlan,
    /// Lipschitz closure of the sink potential; a lower bound on the cost.
    pub dual: DualPotential,
    pub iterations: usize,
    pub marginal_error: f64,
    /// Guaranteed `cost - optimal cost` bound:
    /// `total (eps ln min(n, m) + 2 max_cost marginal_error)`.
    pub gap_bound: f64,
}

/// Entropic transport with regularization `reg_eps` (in distance units).
pub fn solve_sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reg_eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornSolution> {
    check_pair(mu, nu)?;
    if !(reg_eps > 0.0) {
        return Err(LabError::Parameter(format!("reg_eps must be positive, got {reg_eps}")));
    }
    let g = mu.grid;
    let sources: Vec<usize> = (0..g.cells()).filter(|&k| mu.masses[k] > 0.0).collect();
    let sinks: Vec<usize> = (0..g.cells()).filter(|&k| nu.masses[k] > 0.0).collect();
    let a: Vec<f64> = sources.iter().map(|&k| mu.masses[k] / mu.total).collect();
    let b: Vec<f64> = sinks.iter().map(|&k| nu.masses[k] / nu.total).collect();
    let m = sinks.len();
    let mut cost = vec![0.0; sources.len() * m];
    for (i, &s) in sources.iter().enumerate() {
        for (j, &t) in sinks.iter().enumerate() {
            cost[i * m + j] = distance(&g, s, t);
        }
    }
    let out = sinkhorn::solve(&a, &b, &cost, reg_eps, max_iter, tol)?;
    let entries = out
        .coupling
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| PlanEntry { source: sources[k / m], target: sinks[k % m], mass: p * mu.total })
        .collect();
    let plan = TransportPlan::from_entries(g, entries);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let spread = (sources.len().min(m) as f64).ln();
    let dual = dual_from_sinks(&g, mu, nu, &sinks, &out.g);
    Ok(SinkhornSolution {
        plan,
        dual,
        iterations: out.iterations,
        marginal_error: out.marginal_error,
        gap_bound: mu.total * (reg_eps * spread + 2.0 * max_cost * out.marginal_error),
    })
}

/// Barycentric displacement directions of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Directions {
    /// Cell-centered unit vectors, zero where invalid.
    pub field: VectorField,
    pub valid: Vec<bool>,
    /// Source mass per cell.
    pub weights: Vec<f64>,
}

/// `(s(x) - x) / |s(x) - x|` with `s` the barycentric target. Cells with
/// `mu <= eps_mass` or a displacement shorter than `dx / 10` are invalid.
pub fn displacement_directions(plan: &TransportPlan, mu: &DiscreteMeasure, eps_mass: f64) -> Result<Directions> {
    if plan.grid != mu.grid {
        return Err(LabError::GridMismatch);
    }
    let g = mu.grid;
    let n = g.cells();
    let (mut sx, mut sy) = (vec![0.0; n], vec![0.0; n]);
    for e in &plan.entries {
        let (x, y) = g.center(e.target);
        sx[e.source] += e.mass * x;
        sy[e.source] += e.mass * y;
    }
    let (mut dx, mut dy) = (vec![0.0; n], vec![0.0; n]);
    let mut valid = vec![false; n];
    for k in 0..n {
        let m = mu.masses[k];
        if m <= eps_mass {
            continue;
        }
        let (x, y) = g.center(k);
        let (ex, ey) = (sx[k] / m - x, sy[k] / m - y);
        let len = ex.hypot(ey);
        if len >= 0.1 * g.dx() {
            dx[k] = ex / len;
            dy[k] = ey / len;
            valid[k] = true;
        }
    }
    Ok(Directions {
        field: VectorField::new(g, Placement::CellCentered, dx, dy)?,
        valid,
        weights: mu.masses.clone(),
    })
}

/// Gradient with one-sided second-order differences on all four edges; the
/// potential is not periodic.
fn open_gradient(f: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = *f.grid();
    let v = f.values();
    let d = |a: &dyn Fn(usize) -> f64, i: usize, n: usize, h: f64| -> f64 {
        if n == 2 {
            (a(1) - a(0)) / h
        } else if i == 0 {
            (-3.0 * a(0) + 4.0 * a(1) - a(2)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * a(n - 1) - 4.0 * a(n - 2) + a(n - 3)) / (2.0 * h)
        } else {
            (a(i + 1) - a(i - 1)) / (2.0 * h)
        }
    };
    let mut gx = vec![0.0; g.cells()];
    let mut gy = vec![0.0; g.cells()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            gx[k] = d(&|ii| v[g.idx(ii, j)], i, g.nx(), g.dx());
            gy[k] = d(&|jj| v[g.idx(i, jj)], j, g.ny(), g.dy());
        }
    }
    (gx, gy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// Mass-weighted mean cosine between plan directions and `-grad H / |grad H|`.
    pub mean_cosine_plan: f64,
    /// Same for `-grad u / |grad u|`.
    pub mean_cosine_dual: f64,
    /// Mass fraction of compared plan directions with cosine >= 0.9.
    pub fraction_above_0_9: f64,
    pub fraction_above_0_9_dual: f64,
    /// Mass fraction of the source left out by either mask.
    pub excluded_fraction: f64,
}

pub fn alignment_report(
    dirs: &Directions,
    dual: &DualPotential,
    surface: &ScalarField,
    eps_grad: f64,
) -> Result<AlignmentReport> {
    let g = *surface.grid();
    if *dirs.field.grid() != g || *dual.potential.grid() != g {
        return Err(LabError::GridMismatch);
    }
    let surface = surface.clone().with_role(FieldRole::Surface)?;
    let gh = grid::gradient(&surface);
    let (ux, uy) = open_gradient(&dual.potential);
    let (mut base, mut excl) = (0.0, 0.0);
    let (mut wp, mut cp, mut ap) = (0.0, 0.0, 0.0);
    let (mut wd, mut cd, mut ad) = (0.0, 0.0, 0.0);
    for k in 0..g.cells() {
        let w = dirs.weights[k];
        if w <= 0.0 {
            continue;
        }
        base += w;
        let (hx, hy) = (gh.x()[k], gh.y()[k]);
        let hn = hx.hypot(hy);
        let grad_ok = hn >= eps_grad;
        if !(grad_ok && dirs.valid[k]) {
            excl += w;
        }
        if !grad_ok {
            continue;
        }
        let (tx, ty) = (-hx / hn, -hy / hn);
        if dirs.valid[k] {
            let c = dirs.field.x()[k] * tx + dirs.field.y()[k] * ty;
            wp += w;
            cp += w * c;
            if c >= 0.9 {
                ap += w;
            }
        }
        let un = ux[k].hypot(uy[k]);
        if un > 0.0 {
            let c = (-ux[k] * tx - uy[k] * ty) / un;
            wd += w;
            cd += w * c;
            if c >= 0.9 {
                ad += w;
            }
        }
    }
    if wp == 0.0 || wd == 0.0 {
        return Err(LabError::EmptyComparison);
    }
    Ok(AlignmentReport {
        mean_cosine_plan: cp / wp,
        mean_cosine_dual: cd / wd,
        fraction_above_0_9: ap / wp,
        fraction_above_0_9_dual: ad / wd,
        excluded_fraction: excl / base,
    })
}
