//! Checks of the solution concepts: truncation, entropy and weak-form
//! residuals along a trajectory, the Muckenhoupt `A_4` estimate for the
//! weight, and the zero set of the water depth.

use rand::Rng;

use crate::error::{LabError, Result};
use crate::evolve::Trajectory;
use crate::grid::{self, FieldRole, GridSpec, ScalarField, WATER_EXPONENT};

/// Clamps every value to `[-k, k]`.
pub fn truncate(f: &ScalarField, k: f64) -> Result<ScalarField> {
    if !(k > 0.0) {
        return Err(LabError::Parameter(format!("truncation level must be positive, got {k}")));
    }
    let v = f.values().iter().map(|x| x.clamp(-k, k)).collect();
    Ok(ScalarField::from_parts(*f.grid(), f.role(), v))
}

/// Cells where `h <= threshold`, and the same set grown by one cell in every
/// direction (periodically in `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub mask: Vec<bool>,
    pub dilated: Vec<bool>,
}

impl ZeroSet {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

pub fn zero_set(h: &ScalarField, threshold: f64) -> Result<ZeroSet> {
    if !(threshold >= 0.0) {
        return Err(LabError::Parameter(format!("threshold must be >= 0, got {threshold}")));
    }
    let g = *h.grid();
    let mask: Vec<bool> = h.values().iter().map(|&v| v <= threshold).collect();
    let mut dilated = mask.clone();
    for k in (0..g.cells()).filter(|&k| mask[k]) {
        let (i, j) = g.ij(k);
        for jj in [g.j_minus(j), j, g.j_plus(j)] {
            for ii in i.saturating_sub(1)..=(i + 1).min(g.nx() - 1) {
                dilated[g.idx(ii, jj)] = true;
            }
        }
    }
    Ok(ZeroSet { mask, dilated })
}

/// A bounded test function with the set of cells where it may be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    field: ScalarField,
    support: Vec<bool>,
}

impl TestFunction {
    pub fn new(field: ScalarField, support: Vec<bool>) -> Result<Self> {
        let g = *field.grid();
        if support.len() != g.cells() {
            return Err(LabError::Field("support mask has the wrong size".into()));
        }
        if let Some(k) = (0..g.cells()).find(|&k| !support[k] && field.values()[k] != 0.0) {
            let (i, j) = g.ij(k);
            return Err(LabError::Support { i, j });
        }
        Ok(Self { field, support })
    }

    /// Supported wherever the field is nonzero.
    pub fn from_field(field: ScalarField) -> Self {
        let support = field.values().iter().map(|v| *v != 0.0).collect();
        Self { field, support }
    }

    /// Tensor-product cosine bell `A cos^2(pi dx / 2 rx) cos^2(pi dy / 2 ry)`,
    /// periodic in `y`.
    pub fn bump(g: &GridSpec, center: (f64, f64), radii: (f64, f64), amplitude: f64) -> Result<Self> {
        let (rx, ry) = radii;
        if !(rx > 0.0 && ry > 0.0) {
            return Err(LabError::Parameter("bump radii must be positive".into()));
        }
        let l = g.length();
        let field = ScalarField::from_fn(*g, FieldRole::Generic, |x, y| {
            let ex = x - center.0;
            let mut ey = (y - center.1).rem_euclid(l);
            if ey > 0.5 * l {
                ey -= l;
            }
            if ex.abs() >= rx || ey.abs() >= ry {
                return 0.0;
            }
            let cx = (std::f64::consts::FRAC_PI_2 * ex / rx).cos();
            let cy = (std::f64::consts::FRAC_PI_2 * ey / ry).cos();
            amplitude * cx * cx * cy * cy
        })?;
        Ok(Self::from_field(field))
    }

    /// `count` random bumps whose supports avoid `excluded` and stay clear of
    /// both x-edges.
    pub fn random_admissible<R: Rng>(
        g: &GridSpec,
        excluded: &[bool],
        count: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Result<Vec<Self>> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            attempts += 1;
            if attempts > 1000 * count.max(1) {
                return Err(LabError::Parameter("no room for admissible test functions".into()));
            }
            let rx = rng.random_range(0.1..0.25) * g.width();
            let ry = rng.random_range(0.1..0.25) * g.length();
            let lo = rx + g.dx();
            let hi = g.width() - rx - g.dx();
            if lo >= hi {
                continue;
            }
            let cx = rng.random_range(lo..hi);
            let cy = rng.random_range(0.0..g.length());
            let amp = amplitude * rng.random_range(-1.0..1.0);
            let phi = Self::bump(g, (cx, cy), (rx, ry), amp)?;
            if phi.support.iter().zip(excluded).all(|(s, e)| !(*s && *e)) {
                out.push(phi);
            }
        }
        Ok(out)
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }
}

/// Per-snapshot values of an integral identity along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotResidual {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Integral of the absolute integrand, the natural size of each value.
    pub scales: Vec<f64>,
}

impl SnapshotResidual {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `value / scale`, zero where the scale vanishes.
    pub fn max_relative(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.scales)
            .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_relative(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.scales)
            .map(|(v, s)| if *s > 0.0 { (v / s).abs() } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Three-point derivative on a nonuniform stencil.
fn time_derivative(traj: &Trajectory, k: usize) -> Vec<f64> {
    let s = &traj.snapshots;
    let (t0, t1, t2) = (s[k - 1].t, s[k].t, s[k + 1].t);
    let (a, b) = (t1 - t0, t2 - t1);
    let w0 = -b / (a * (a + b));
    let w1 = (b - a) / (a * b);
    let w2 = a / (b * (a + b));
    let (h0, h1, h2) = (s[k - 1].surface.values(), s[k].surface.values(), s[k + 1].surface.values());
    (0..h1.len()).map(|c| w0 * h0[c] + w1 * h1[c] + w2 * h2[c]).collect()
}

/// `int dH/dt v + int q . grad v` and its absolute counterpart for one
/// snapshot. The flux term pairs each face flux with the difference of `v`
/// across the face, which is the same pairing the divergence uses; `v` is
/// taken as 0 on the outlet face.
fn integral_identity(traj: &Trajectory, k: usize, v: &[f64]) -> Result<(f64, f64)> {
    let g = *traj.grid();
    let snap = &traj.snapshots[k].surface;
    let rate = time_derivative(traj, k);
    let q = grid::sediment_flux(snap, &traj.water)?;
    let (qx, qy) = (q.x(), q.y());
    let area = g.cell_area();
    let (mut val, mut abs) = (0.0, 0.0);
    for c in 0..g.cells() {
        let t = rate[c] * v[c];
        val += t;
        abs += t.abs();
    }
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            let t = qx[g.x_face(i, j)] * (v[g.idx(i, j)] - v[g.idx(i - 1, j)]) / g.dx();
            val += t;
            abs += t.abs();
        }
        // half-cell outlet face
        let t = qx[g.x_face(g.nx(), j)] * (-v[g.idx(g.nx() - 1, j)]) / (0.5 * g.dx()) * 0.5;
        val += t;
        abs += t.abs();
        let jm = g.j_minus(j);
        for i in 0..g.nx() {
            let t = qy[g.y_face(i, j)] * (v[g.idx(i, j)] - v[g.idx(i, jm)]) / g.dy();
            val += t;
            abs += t.abs();
        }
    }
    Ok((val * area, abs * area))
}

fn interior_snapshots(traj: &Trajectory) -> Result<std::ops::Range<usize>> {
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(LabError::InsufficientData(format!("need 3 snapshots, got {n}")));
    }
    Ok(1..n - 1)
}

fn check_grid(traj: &Trajectory, phi: &TestFunction) -> Result<()> {
    if traj.grid() != phi.field.grid() {
        return Err(LabError::GridMismatch);
    }
    Ok(())
}

/// Entropy residual at one interior snapshot.
pub fn entropy_residual_at(traj: &Trajectory, k: usize, phi: &TestFunction, level: f64) -> Result<(f64, f64)> {
    check_grid(traj, phi)?;
    if k == 0 || k + 1 >= traj.snapshots.len() {
        return Err(LabError::InsufficientData(format!("snapshot {k} has no centered stencil")));
    }
    let diff: Vec<f64> = traj.snapshots[k]
        .surface
        .values()
        .iter()
        .zip(phi.field.values())
        .map(|(h, p)| h - p)
        .collect();
    let w = ScalarField::from_parts(*traj.grid(), FieldRole::Generic, diff);
    let v = truncate(&w, level)?;
    integral_identity(traj, k, v.values())
}

/// `int dH/dt T_k(H - phi) + h^{10/3} |grad H|^2 grad H . grad T_k(H - phi)`
/// at every interior snapshot; the entropy formulation asks for `<= 0`.
pub fn entropy_residual(traj: &Trajectory, phi: &TestFunction, level: f64) -> Result<SnapshotResidual> {
    let range = interior_snapshots(traj)?;
    let mut out = SnapshotResidual { times: vec![], values: vec![], scales: vec![] };
    for k in range {
        let (v, s) = entropy_residual_at(traj, k, phi, level)?;
        out.times.push(traj.snapshots[k].t);
        out.values.push(v);
        out.scales.push(s);
    }
    Ok(out)
}

/// `int dH/dt (H - phi) + h^{10/3} |grad H|^2 grad H . grad(H - phi)` at every
/// interior snapshot, which vanishes for weak solutions. `phi` must vanish
/// near the zero set of the water depth.
pub fn weak_residual(traj: &Trajectory, phi: &TestFunction) -> Result<SnapshotResidual> {
    check_grid(traj, phi)?;
    let zs = zero_set(&traj.water, 0.0)?;
    let g = *traj.grid();
    if let Some(k) = (0..g.cells()).find(|&k| zs.dilated[k] && phi.field.values()[k] != 0.0) {
        let (i, j) = g.ij(k);
        return Err(LabError::Support { i, j });
    }
    let range = interior_snapshots(traj)?;
    let mut out = SnapshotResidual { times: vec![], values: vec![], scales: vec![] };
    for k in range {
        let v: Vec<f64> = traj.snapshots[k]
            .surface
            .values()
            .iter()
            .zip(phi.field.values())
            .map(|(h, p)| h - p)
            .collect();
        let (val, s) = integral_identity(traj, k, &v)?;
        out.times.push(traj.snapshots[k].t);
        out.values.push(val);
        out.scales.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: (f64, f64),
    pub radius: f64,
}

/// Balls over which the weight is averaged. The weight is extended outside
/// the domain by even reflection across `x = 0` and `x = W` and periodically
/// in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallFamily {
    balls: Vec<Ball>,
    width: f64,
    length: f64,
}

impl BallFamily {
    pub fn new(balls: Vec<Ball>, width: f64, length: f64) -> Result<Self> {
        if balls.is_empty() {
            return Err(LabError::Parameter("ball family is empty".into()));
        }
        if balls.iter().any(|b| !(b.radius > 0.0)) {
            return Err(LabError::Parameter("ball radii must be positive".into()));
        }
        if !(width > 0.0 && length > 0.0) {
            return Err(LabError::Parameter("extension needs a positive domain".into()));
        }
        Ok(Self { balls, width, length })
    }

    /// Balls centered on every `stride`-th cell center with radii
    /// `dx 2^j` up to `min(W, L)`.
    pub fn dyadic(g: &GridSpec, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let cap = g.width().min(g.length());
        let mut radii = Vec::new();
        let mut r = g.dx();
        while r < cap {
            radii.push(r);
            r *= 2.0;
        }
        radii.push(cap);
        let mut balls = Vec::new();
        for j in (0..g.ny()).step_by(stride) {
            for i in (0..g.nx()).step_by(stride) {
                for &radius in &radii {
                    balls.push(Ball { center: (g.x_center(i), g.y_center(j)), radius });
                }
            }
        }
        Self::new(balls, g.width(), g.length())
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    fn extend(&self, x: f64, y: f64) -> (f64, f64) {
        let period = 2.0 * self.width;
        let mut xr = x.rem_euclid(period);
        if xr > self.width {
            xr = period - xr;
        }
        (xr, y.rem_euclid(self.length))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallEstimate {
    /// `avg(h^{10/3}) avg(h^{-10/9})^3` at the finest quadrature.
    pub value: f64,
    /// The average of `h^{-10/9}` vanishes or keeps growing under refinement.
    pub divergent: bool,
}

/// Lower estimate of the `A_4` constant of `h^{10/3}` over a finite family.
#[derive(Debug, Clone, PartialEq)]
pub struct MuckenhouptEstimate {
    /// Largest value over balls that were not flagged divergent.
    pub sup_estimate: f64,
    pub argmax: Option<usize>,
    pub per_ball: Vec<BallEstimate>,
    pub any_divergent: bool,
}

/// Offset of the sample lattice in units of its spacing. The lattice is
/// anchored at the origin rather than at the ball, so a zero line at a
/// multiple of the spacing (`x = 0`, `x = W` on dyadic refinements) keeps
/// the same relative position at every level and the quadrature error near
/// it scales cleanly.
const LATTICE_SHIFT: f64 = 0.25;

/// The `A_4` product and the raw average of `h^{-10/9}`.
fn ball_average(h: &dyn Fn(f64, f64) -> f64, fam: &BallFamily, ball: &Ball, n: usize) -> Option<(f64, f64)> {
    let side = 2.0 * ball.radius / n as f64;
    let (cx, cy) = ball.center;
    let span = |c: f64| {
        let lo = ((c - ball.radius) / side - LATTICE_SHIFT).floor() as i64;
        let hi = ((c + ball.radius) / side - LATTICE_SHIFT).ceil() as i64;
        lo..=hi
    };
    let mut samples = Vec::with_capacity(n * n);
    for a in span(cx) {
        let x = (a as f64 + LATTICE_SHIFT) * side;
        for b in span(cy) {
            let y = (b as f64 + LATTICE_SHIFT) * side;
            let (ox, oy) = (x - cx, y - cy);
            if ox * ox + oy * oy <= ball.radius * ball.radius {
                let (x, y) = fam.extend(x, y);
                samples.push(h(x, y));
            }
        }
    }
    if samples.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let top = samples.iter().copied().fold(0.0, f64::max);
    let m = samples.len() as f64;
    let (mut p, mut q) = (0.0, 0.0);
    for v in &samples {
        let w = v / top;
        p += w.powf(WATER_EXPONENT);
        q += w.powf(-WATER_EXPONENT / 3.0);
    }
    let raw = q / m * top.powf(-WATER_EXPONENT / 3.0);
    Some(((p / m) * (q / m).powi(3), raw))
}

/// Midpoint quadrature of `(avg h^{10/3}) (avg h^{-10/9})^3` over each ball
/// at `quad_n`, `2 quad_n`, `4 quad_n` and `8 quad_n` points per diameter.
/// A ball is flagged divergent when the weight vanishes at a sample or the average of
/// `h^{-10/9}` grows by non-shrinking increments under refinement, the
/// signature of a non-integrable singularity.
pub fn muckenhoupt_a4(
    h: &dyn Fn(f64, f64) -> f64,
    balls: &BallFamily,
    quad_n: usize,
) -> Result<MuckenhouptEstimate> {
    if quad_n < 32 {
        return Err(LabError::Parameter(format!("quad_n must be >= 32, got {quad_n}")));
    }
    let mut per_ball = Vec::with_capacity(balls.balls.len());
    for ball in &balls.balls {
        let vals: Option<Vec<(f64, f64)>> =
            [quad_n, 2 * quad_n, 4 * quad_n, 8 * quad_n].iter().map(|&n| ball_average(h, balls, ball, n)).collect();
        per_ball.push(match vals {
            None => BallEstimate { value: f64::INFINITY, divergent: true },
            Some(v) => {
                let d: Vec<f64> = v.windows(2).map(|w| w[1].1 - w[0].1).collect();
                let growing = d[0] > 0.0 && d[2] > 1e-9 * v[3].1 && d[1] >= d[0] && d[2] >= d[1];
                BallEstimate { value: v[3].0, divergent: growing }
            }
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, b) in per_ball.iter().enumerate() {
        if !b.divergent && best.is_none_or(|(_, v)| b.value > v) {
            best = Some((k, b.value));
        }
    }
    Ok(MuckenhouptEstimate {
        sup_estimate: best.map_or(f64::NAN, |b| b.1),
        argmax: best.map(|b| b.0),
        any_divergent: per_ball.iter().any(|b| b.divergent),
        per_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ridge_fields, SeparableParams, Shape};
    use crate::evolve::{run, EvolveOptions};
    use crate::grid::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> GridSpec {
        make_grid(1.0, 1.0, n, n).unwrap()
    }

    #[test]
    fn truncate_examples() {
        let g = make_grid(1.0, 1.0, 2, 2).unwrap();
        let f = ScalarField::new(g, FieldRole::Surface, vec![5.0, -3.0, 1.0, -2.0]).unwrap();
        let t = truncate(&f, 2.0).unwrap();
        assert_eq!(t.values(), &[2.0, -2.0, 1.0, -2.0]);
        assert_eq!(truncate(&t, 2.0).unwrap(), t);
        assert_eq!(truncate(&f, 10.0).unwrap(), f);
        assert!(matches!(truncate(&f, 0.0), Err(LabError::Parameter(_))));
    }

    #[test]
    fn zero_set_of_ridge_is_its_crest() {
        let p = SeparableParams { x0: 0.5, big_h1: 1.0, shape: Shape::Ridge { crest: true }, ..Default::default() };
        let g = unit(16);
        let (h, _) = ridge_fields(&p, &g).unwrap();
        let zs = zero_set(&h, 0.0).unwrap();
        let crest: Vec<bool> = (0..g.cells()).map(|k| h.values()[k] == 0.0).collect();
        assert_eq!(zs.mask, crest);
        // x0 = 0.5 falls on a face, so no center is within dx/2 of it
        assert_eq!(zs.count(), 0);
        let g = unit(15);
        let (h, _) = ridge_fields(&p, &g).unwrap();
        let zs = zero_set(&h, 0.0).unwrap();
        assert_eq!(zs.count(), 15);
        assert_eq!(zs.dilated.iter().filter(|m| **m).count(), 45);
        let pos = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        assert_eq!(zero_set(&pos, 0.5).unwrap().count(), 0);
    }

    #[test]
    fn bumps_avoid_excluded_cells() {
        let g = unit(32);
        let mut excluded = vec![false; g.cells()];
        for j in 0..32 {
            excluded[g.idx(16, j)] = true;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phis = TestFunction::random_admissible(&g, &excluded, 5, 1.0, &mut rng).unwrap();
        assert_eq!(phis.len(), 5);
        for p in &phis {
            assert!(p.support().iter().zip(&excluded).all(|(s, e)| !(*s && *e)));
            assert!(p.field().values().iter().all(|v| v.abs() <= 1.0));
            for j in 0..32 {
                assert_eq!(p.field().get(31, j), 0.0);
            }
        }
    }

    #[test]
    fn test_function_support_is_enforced() {
        let g = unit(4);
        let f = ScalarField::constant(g, FieldRole::Generic, 1.0).unwrap();
        let mut support = vec![true; 16];
        support[5] = false;
        assert_eq!(TestFunction::new(f, support), Err(LabError::Support { i: 1, j: 1 }));
    }

    fn short_run() -> Trajectory {
        let g = unit(16);
        let (h, s) = ridge_fields(&SeparableParams::default(), &g).unwrap();
        run(&s, &h, &EvolveOptions { t_end: 2e-3, ..Default::default() }).unwrap()
    }

    #[test]
    fn residuals_vanish_for_zero_trajectory() {
        let g = unit(8);
        let h = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        let z = ScalarField::zeros(g, FieldRole::Surface);
        let tr = run(&z, &h, &EvolveOptions { t_end: 1.0, dt_max: Some(0.25), ..Default::default() }).unwrap();
        let phi = TestFunction::bump(&g, (0.4, 0.5), (0.2, 0.2), 0.7).unwrap();
        let e = entropy_residual(&tr, &phi, 1.0).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        let w = weak_residual(&tr, &phi).unwrap();
        assert!(w.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residuals_vanish_when_phi_is_the_snapshot() {
        let tr = short_run();
        let k = tr.snapshots.len() / 2;
        let phi = TestFunction::from_field(tr.snapshots[k].surface.clone());
        assert_eq!(entropy_residual_at(&tr, k, &phi, 0.5).unwrap().0, 0.0);
        let w = weak_residual(&tr, &phi).unwrap();
        assert_eq!(w.values[k - 1], 0.0);
    }

    #[test]
    fn weak_residual_checks_support() {
        let p = SeparableParams { x0: 0.5, big_h1: 1.0, shape: Shape::Ridge { crest: true }, ..Default::default() };
        let g = unit(15);
        let (h, s) = ridge_fields(&p, &g).unwrap();
        let tr = run(&s, &h, &EvolveOptions { t_end: 1e-4, ..Default::default() }).unwrap();
        let phi = TestFunction::bump(&g, (0.5, 0.5), (0.2, 0.2), 1.0).unwrap();
        assert!(matches!(weak_residual(&tr, &phi), Err(LabError::Support { .. })));
    }

    #[test]
    fn entropy_residual_needs_three_snapshots() {
        let g = unit(8);
        let h = ScalarField::constant(g, FieldRole::WaterDepth, 1.0).unwrap();
        let z = ScalarField::zeros(g, FieldRole::Surface);
        let tr = run(&z, &h, &EvolveOptions { t_end: 1.0, ..Default::default() }).unwrap();
        let phi = TestFunction::from_field(z);
        assert!(matches!(entropy_residual(&tr, &phi, 1.0), Err(LabError::InsufficientData(_))));
    }

    #[test]
    fn muckenhoupt_constant_weight_is_one() {
        let g = unit(8);
        let fam = BallFamily::dyadic(&g, 3).unwrap();
        let est = muckenhoupt_a4(&|_, _| 2.7, &fam, 32).unwrap();
        assert!(est.per_ball.iter().all(|b| b.value == 1.0 && !b.divergent));
        assert_eq!(est.sup_estimate, 1.0);
    }

    #[test]
    fn muckenhoupt_flags_vanishing_weight() {
        let g = unit(8);
        let fam = BallFamily::new(vec![Ball { center: (0.5, 0.5), radius: 0.2 }], 1.0, 1.0).unwrap();
        let est = muckenhoupt_a4(&|x, _| if x > 0.5 { 1.0 } else { 0.0 }, &fam, 32).unwrap();
        assert!(est.any_divergent);
        assert!(est.argmax.is_none());
        assert!(BallFamily::new(vec![], 1.0, 1.0).is_err());
        assert!(muckenhoupt_a4(&|_, _| 1.0, &BallFamily::dyadic(&g, 4).unwrap(), 16).is_err());
    }
}
