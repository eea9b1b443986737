//! Closed-form separable solutions: mountain ridges, mountains and collapsing
//! hills, with the constraint checks and residual metrics used to certify them.
//!
//! Ridges and mountains have the product form `H = H0(x, y) T(t)` with
//! `H0 = B^c`, water depth `h = h1 B^d` and `T(t) = (1 + 2 r t)^{-1/2}`, where
//! `B` is piecewise affine:
//!
//! * ridge without crest: `B = H1^{1/c} + a (x - x0) + b (y - y0)`
//! * ridge with crest: `B = H1^{1/c} - |a (x - x0) + b (y - y0)|`, the crest
//!   being the line where the affine part vanishes
//! * mountain: `B = H1^{1/c} - a |x - x0| - b |y - y0|` with `a, b >= 0`
//!
//! Hills are radially symmetric about `(x0, y0)` and collapse in finite time.

use crate::error::{LabError, Result};
use crate::grid::{self, FieldRole, GridSpec, ScalarField, WATER_EXPONENT};
use crate::numeric::convergence_order;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ridge { crest: bool },
    Mountain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub h1: f64,
    /// Surface amplitude `H1 > 0`.
    pub big_h1: f64,
    pub x0: f64,
    pub y0: f64,
    pub shape: Shape,
}

impl Default for SeparableParams {
    /// The erosive ridge `H0 = (1 - x)^{3/2}`, `h = (1 - x)^{3/10}`.
    fn default() -> Self {
        Self {
            a: -1.0,
            b: 0.0,
            c: 1.5,
            d: 0.3,
            h1: 1.0,
            big_h1: 1.0,
            x0: 0.0,
            y0: 0.0,
            shape: Shape::Ridge { crest: false },
        }
    }
}

impl SeparableParams {
    /// Erosive exponent for a given water exponent, `c = 2 - 5d/3`.
    pub fn erosive_c(d: f64) -> f64 {
        2.0 - 5.0 * d / 3.0
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.a, self.b, self.c, self.d, self.h1, self.big_h1, self.x0, self.y0];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Parameter("non-finite separable parameter".into()));
        }
        if self.c <= 0.0 {
            return Err(LabError::Parameter(format!("c must be positive, got {}", self.c)));
        }
        if self.h1 < 0.0 {
            return Err(LabError::Parameter(format!("h1 must be >= 0, got {}", self.h1)));
        }
        if self.big_h1 <= 0.0 {
            return Err(LabError::Parameter(format!("H1 must be positive, got {}", self.big_h1)));
        }
        if self.shape == Shape::Mountain && (self.a < 0.0 || self.b < 0.0) {
            return Err(LabError::Parameter("mountain slopes a, b must be >= 0".into()));
        }
        Ok(())
    }

    /// Checks the erosive relation `c = 2 - 5d/3` and the range `d < 9/10`.
    pub fn check_erosive(&self) -> Result<()> {
        let res = validate_exponents(self.c, self.d).branch2_residual;
        if res.abs() > 1e-12 {
            return Err(LabError::Parameter(format!(
                "c = {} is off the erosive line c = 2 - 5d/3 by {res:e}",
                self.c
            )));
        }
        if self.d >= 0.9 {
            return Err(LabError::Parameter(format!("d = {} must be below 9/10", self.d)));
        }
        Ok(())
    }

    /// Affine part whose sign change marks a ridge crest.
    fn linear(&self, x: f64, y: f64) -> f64 {
        self.a * (x - self.x0) + self.b * (y - self.y0)
    }

    /// Piecewise-affine base `B(x, y)`.
    pub fn base(&self, x: f64, y: f64) -> f64 {
        let top = self.big_h1.powf(1.0 / self.c);
        match self.shape {
            Shape::Ridge { crest: false } => top + self.linear(x, y),
            Shape::Ridge { crest: true } => top - self.linear(x, y).abs(),
            Shape::Mountain => top - self.a * (x - self.x0).abs() - self.b * (y - self.y0).abs(),
        }
    }

    /// `grad B`, taking the `+` side on the crest itself.
    pub fn base_gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match self.shape {
            Shape::Ridge { crest: false } => (self.a, self.b),
            Shape::Ridge { crest: true } => {
                let s = if self.linear(x, y) < 0.0 { 1.0 } else { -1.0 };
                (s * self.a, s * self.b)
            }
            Shape::Mountain => {
                let sx = if x < self.x0 { 1.0 } else { -1.0 };
                let sy = if y < self.y0 { 1.0 } else { -1.0 };
                (sx * self.a, sy * self.b)
            }
        }
    }

    /// Whether the cell centered at `(x, y)` is cut by a crest line.
    pub fn on_crest(&self, g: &GridSpec, x: f64, y: f64) -> bool {
        self.near_crest(g, x, y, 0.5)
    }

    /// Crest distance test in units of the cell size.
    fn near_crest(&self, g: &GridSpec, x: f64, y: f64, cells: f64) -> bool {
        match self.shape {
            Shape::Ridge { crest: false } => false,
            Shape::Ridge { crest: true } => {
                let reach = self.a.abs() * g.dx() + self.b.abs() * g.dy();
                reach > 0.0 && self.linear(x, y).abs() < cells * reach
            }
            Shape::Mountain => {
                (self.a != 0.0 && (x - self.x0).abs() < cells * g.dx())
                    || (self.b != 0.0 && (y - self.y0).abs() < cells * g.dy())
            }
        }
    }

    /// The field does not depend on `y`, so it is genuinely periodic.
    fn y_invariant(&self) -> bool {
        self.b == 0.0
    }

    pub fn surface_at(&self, x: f64, y: f64) -> f64 {
        self.base(x, y).powf(self.c)
    }

    pub fn decay_rate(&self) -> f64 {
        validate_exponents(self.c, self.d).decay_rate(self.h1, self.a, self.b)
    }

    pub fn decay_law(&self) -> DecayLaw {
        DecayLaw { r: self.decay_rate(), a0: 1.0 }
    }

    fn sample(&self, g: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut h = vec![0.0; g.cells()];
        let mut s = vec![0.0; g.cells()];
        for k in 0..g.cells() {
            let (x, y) = g.center(k);
            let base = self.base(x, y);
            if !(base > 0.0) {
                let (i, j) = g.ij(k);
                return Err(LabError::Domain { i, j, value: base });
            }
            s[k] = base.powf(self.c);
            h[k] = if self.on_crest(g, x, y) { 0.0 } else { self.h1 * base.powf(self.d) };
        }
        Ok((h, s))
    }
}

fn into_fields(g: &GridSpec, h: Vec<f64>, s: Vec<f64>) -> Result<(ScalarField, ScalarField)> {
    Ok((
        ScalarField::new(*g, FieldRole::WaterDepth, h)?,
        ScalarField::new(*g, FieldRole::Surface, s)?,
    ))
}

/// Water depth and initial surface `(h, H0)` of a mountain ridge.
///
/// Only positivity of `B` is enforced here. Exponents off the erosive line
/// are accepted so that their failure can be demonstrated downstream.
pub fn ridge_fields(p: &SeparableParams, g: &GridSpec) -> Result<(ScalarField, ScalarField)> {
    if p.shape == Shape::Mountain {
        return Err(LabError::Parameter("ridge_fields needs a ridge shape".into()));
    }
    let (h, s) = p.sample(g)?;
    into_fields(g, h, s)
}

/// Water depth and initial surface `(h, H0)` of a mountain.
pub fn mountain_fields(p: &SeparableParams, g: &GridSpec) -> Result<(ScalarField, ScalarField)> {
    if p.shape != Shape::Mountain {
        return Err(LabError::Parameter("mountain_fields needs the mountain shape".into()));
    }
    let (h, s) = p.sample(g)?;
    into_fields(g, h, s)
}

/// Dispatches on the shape.
pub fn separable_fields(p: &SeparableParams, g: &GridSpec) -> Result<(ScalarField, ScalarField)> {
    let (h, s) = p.sample(g)?;
    into_fields(g, h, s)
}

/// Which constant relations a hill is held to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HillRelations {
    /// `d = (3/10)(1 - 2c)` and `beta r = 16 H1^2 c^4`.
    Published,
    /// `d = (3/5)(1 - c)` and `beta r = 16 H1^2 h1^{10/3} c^3 (1 + c)`, which is
    /// what substituting the hill into the equation produces.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillParams {
    pub h1: f64,
    pub big_h1: f64,
    pub c: f64,
    pub d: f64,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub x0: f64,
    pub y0: f64,
    pub relations: HillRelations,
}

impl HillParams {
    /// Fills in `d`, `gamma` and `r` from the chosen relations.
    pub fn derived(
        h1: f64,
        big_h1: f64,
        c: f64,
        beta: f64,
        x0: f64,
        y0: f64,
        relations: HillRelations,
    ) -> Self {
        let mut p = Self {
            h1,
            big_h1,
            c,
            d: 0.0,
            r: 0.0,
            beta,
            gamma: -0.3 * (1.0 + 2.0 * beta),
            x0,
            y0,
            relations,
        };
        p.d = p.expected_d();
        p.r = p.expected_beta_r() / beta;
        p
    }

    fn expected_d(&self) -> f64 {
        match self.relations {
            HillRelations::Published => 0.3 * (1.0 - 2.0 * self.c),
            HillRelations::Exact => 0.6 * (1.0 - self.c),
        }
    }

    fn expected_beta_r(&self) -> f64 {
        let base = 16.0 * self.big_h1 * self.big_h1 * self.c.powi(3);
        match self.relations {
            HillRelations::Published => base * self.c,
            HillRelations::Exact => base * self.h1.powf(WATER_EXPONENT) * (1.0 + self.c),
        }
    }

    /// All violated relations and ranges, by name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let gamma = -0.3 * (1.0 + 2.0 * self.beta);
        if (self.gamma - gamma).abs() > 1e-12 {
            out.push(format!("gamma = -(3/10)(1 + 2 beta) (off by {:e})", self.gamma - gamma));
        }
        let d = self.expected_d();
        if (self.d - d).abs() > 1e-12 {
            let rel = match self.relations {
                HillRelations::Published => "d = (3/10)(1 - 2c)",
                HillRelations::Exact => "d = (3/5)(1 - c)",
            };
            out.push(format!("{rel} (off by {:e})", self.d - d));
        }
        let br = self.expected_beta_r();
        if (self.beta * self.r - br).abs() > 1e-12 * br.abs().max(1.0) {
            let rel = match self.relations {
                HillRelations::Published => "beta r = 16 H1^2 c^4",
                HillRelations::Exact => "beta r = 16 H1^2 h1^(10/3) c^3 (1 + c)",
            };
            out.push(format!("{rel} (off by {:e})", self.beta * self.r - br));
        }
        if !(self.beta > -0.5 && self.beta < 0.0) {
            out.push(format!("beta in (-1/2, 0) (got {})", self.beta));
        }
        if !(self.gamma > -0.3 && self.gamma < 0.0) {
            out.push(format!("gamma in (-3/10, 0) (got {})", self.gamma));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(LabError::Constraint(v))
        }
    }

    fn time_base(&self, t: f64) -> Result<f64> {
        let base = 1.0 + self.r * t;
        if t < 0.0 || !(base > 0.0) {
            return Err(LabError::BlowUp { t, radicand: base });
        }
        Ok(base)
    }

    fn rho(&self, x: f64, y: f64) -> f64 {
        (x - self.x0).powi(2) + (y - self.y0).powi(2)
    }

    pub fn surface_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.big_h1 * self.rho(x, y).powf(self.c) * self.time_base(t)?.powf(self.beta))
    }

    pub fn water_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        Ok(self.h1 * self.rho(x, y).powf(self.d) * self.time_base(t)?.powf(self.gamma))
    }

    fn surface_rate_at(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let tb = self.time_base(t)?;
        Ok(self.big_h1 * self.rho(x, y).powf(self.c) * self.beta * self.r * tb.powf(self.beta - 1.0))
    }
}

/// Water depth and surface `(h, H)` of a collapsing hill at time `t`.
pub fn hill_fields(p: &HillParams, g: &GridSpec, t: f64) -> Result<(ScalarField, ScalarField)> {
    p.validate()?;
    let tb = p.time_base(t)?;
    let (ft, gt) = (tb.powf(p.beta), tb.powf(p.gamma));
    let mut h = vec![0.0; g.cells()];
    let mut s = vec![0.0; g.cells()];
    for k in 0..g.cells() {
        let (x, y) = g.center(k);
        let rho = p.rho(x, y);
        s[k] = p.big_h1 * rho.powf(p.c) * ft;
        h[k] = p.h1 * rho.powf(p.d) * gt;
    }
    into_fields(g, h, s)
}

/// Time factor `T(t) = (a0 + 2 r t)^{-1/2}`. It solves `T' = lambda T^3` with
/// `lambda = -r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayLaw {
    pub r: f64,
    pub a0: f64,
}

impl DecayLaw {
    pub fn new(r: f64) -> Self {
        Self { r, a0: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        -self.r
    }

    pub fn b0(&self) -> f64 {
        2.0 * self.r
    }

    /// Time at which the radicand reaches zero, if it ever does.
    pub fn blow_up_time(&self) -> Option<f64> {
        (self.r < 0.0).then(|| -self.a0 / (2.0 * self.r))
    }
}

pub fn time_factor(law: &DecayLaw, t: f64) -> Result<f64> {
    let radicand = law.a0 + 2.0 * law.r * t;
    if !(radicand > 0.0) {
        return Err(LabError::BlowUp { t, radicand });
    }
    Ok(radicand.powf(-0.5))
}

/// Residuals of the two exponent branches of separable solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentCheck {
    pub c: f64,
    pub d: f64,
    /// `3c - 3 + 10d/3`, zero on the stationary branch (`r = 0`).
    pub branch1_residual: f64,
    /// `2c - 4 + 10d/3`, zero on the erosive branch.
    pub branch2_residual: f64,
}

impl ExponentCheck {
    /// `r = -h1^{10/3} c^3 (a^2 + b^2)^2 (3c - 3 + 10d/3)`.
    pub fn decay_rate(&self, h1: f64, a: f64, b: f64) -> f64 {
        let s = a * a + b * b;
        -h1.powf(WATER_EXPONENT) * self.c.powi(3) * s * s * self.branch1_residual
    }
}

pub fn validate_exponents(c: f64, d: f64) -> ExponentCheck {
    ExponentCheck {
        c,
        d,
        branch1_residual: 3.0 * c - 3.0 + 10.0 * d / 3.0,
        branch2_residual: 2.0 * c - 4.0 + 10.0 * d / 3.0,
    }
}

#[derive(Debug, Clone)]
pub struct CurlResidual {
    pub residual: ScalarField,
    /// Boundary columns and cells with `|grad H| < eps_grad`.
    pub excluded: Vec<bool>,
}

impl CurlResidual {
    /// Largest residual magnitude over cells that are neither excluded here
    /// nor by `extra`.
    pub fn max_abs(&self, extra: Option<&[bool]>) -> f64 {
        masked_max(self.residual.values(), &self.excluded, extra)
    }
}

fn masked_max(values: &[f64], excluded: &[bool], extra: Option<&[bool]>) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(k, _)| !excluded[*k] && !extra.is_some_and(|m| m[*k]))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

/// Pointwise `H_xy (H_x^2 - H_y^2) - H_x H_y (H_xx - H_yy)`, the condition for
/// `grad H / |grad H|` to be a gradient field.
pub fn curl_residual(surface: &ScalarField, eps_grad: f64) -> CurlResidual {
    let g = *surface.grid();
    let v = surface.values();
    let (dx, dy) = (g.dx(), g.dy());
    let mut res = vec![0.0; g.cells()];
    let mut excluded = vec![true; g.cells()];
    for j in 0..g.ny() {
        let (jp, jm) = (g.j_plus(j), g.j_minus(j));
        for i in 1..g.nx() - 1 {
            let f = |ii: usize, jj: usize| v[g.idx(ii, jj)];
            let hx = (f(i + 1, j) - f(i - 1, j)) / (2.0 * dx);
            let hy = (f(i, jp) - f(i, jm)) / (2.0 * dy);
            let hxx = (f(i + 1, j) - 2.0 * f(i, j) + f(i - 1, j)) / (dx * dx);
            let hyy = (f(i, jp) - 2.0 * f(i, j) + f(i, jm)) / (dy * dy);
            let hxy = (f(i + 1, jp) - f(i + 1, jm) - f(i - 1, jp) + f(i - 1, jm)) / (4.0 * dx * dy);
            let k = g.idx(i, j);
            res[k] = hxy * (hx * hx - hy * hy) - hx * hy * (hxx - hyy);
            excluded[k] = (hx * hx + hy * hy).sqrt() < eps_grad;
        }
    }
    CurlResidual {
        residual: ScalarField::from_parts(g, FieldRole::Residual, res),
        excluded,
    }
}

/// Initial outlet flux and volume of a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxVolume {
    /// `int_{x=W} h^{10/3} |grad H|^2 dH/dx dy`; negative for an outflow.
    pub f0: f64,
    /// `int H0`.
    pub v0: f64,
}

impl FluxVolume {
    /// `r = -c_r F0 / V0` for a caller-supplied positive constant `c_r`.
    pub fn rate(&self, c_r: f64) -> Result<f64> {
        if !(c_r > 0.0 && c_r.is_finite()) {
            return Err(LabError::Parameter(format!("c_r must be positive, got {c_r}")));
        }
        Ok(-c_r * self.f0 / self.v0)
    }
}

/// Outlet flux and volume of `H0`. Values on the `x = W` line come from
/// quadratic extrapolation of the last three columns, so surfaces that do
/// not vanish at the outlet are handled too.
pub fn flux_volume_rate(surface: &ScalarField, water: &ScalarField) -> Result<FluxVolume> {
    surface.same_grid(water)?;
    let g = *surface.grid();
    if g.nx() < 3 {
        return Err(LabError::InvalidGrid("outlet extrapolation needs nx >= 3".into()));
    }
    let v0 = surface.integral();
    if !(v0 > 0.0) {
        return Err(LabError::DegenerateVolume(v0));
    }
    let (_, gy) = grid::cell_gradient(&g, surface.values(), false);
    let n = g.nx();
    let extrap = |f: &dyn Fn(usize) -> f64| (15.0 * f(n - 1) - 10.0 * f(n - 2) + 3.0 * f(n - 3)) / 8.0;
    let mut f0 = 0.0;
    for j in 0..g.ny() {
        let s = |i: usize| surface.values()[g.idx(i, j)];
        let hx = (2.0 * s(n - 1) - 3.0 * s(n - 2) + s(n - 3)) / g.dx();
        let hy = extrap(&|i| gy[g.idx(i, j)]);
        let hw = extrap(&|i| water.values()[g.idx(i, j)]).max(0.0);
        f0 += hw.powf(WATER_EXPONENT) * (hx * hx + hy * hy) * hx;
    }
    Ok(FluxVolume { f0: f0 * g.dy(), v0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Separable(SeparableParams),
    Hill(HillParams),
}

#[derive(Debug, Clone)]
pub struct PdeResidual {
    pub residual: ScalarField,
    /// Cells away from crests, hill centers, x-edges and (for fields that
    /// are not periodic in `y`) the seam rows.
    pub valid: Vec<bool>,
}

impl PdeResidual {
    pub fn max_abs(&self) -> f64 {
        let excluded: Vec<bool> = self.valid.iter().map(|v| !v).collect();
        masked_max(self.residual.values(), &excluded, None)
    }
}

/// Cells within this many cell widths of a crest are left out of residual
/// metrics; the flux stencil reaches two cells.
const CREST_MARGIN: f64 = 3.5;

/// Fraction of `min(W, L)` excluded around a hill center.
const HILL_CORE: f64 = 0.2;

/// Fraction of the crest height of `B` below which a separable field counts
/// as near its degenerate line `B = 0`.
const DEGENERATE_BAND: f64 = 0.1;

/// Cells where a closed-form family is not resolved by the discrete
/// operators: edge columns, the `y` seam of fields that are not periodic,
/// cells within a few widths of a crest or of the line where `B` vanishes,
/// and the core of a hill.
pub fn excluded_cells(family: &Family, g: &GridSpec) -> Vec<bool> {
    let periodic = matches!(family, Family::Separable(p) if p.y_invariant());
    let core = HILL_CORE * g.width().min(g.length());
    (0..g.cells())
        .map(|k| {
            let (i, j) = g.ij(k);
            let (x, y) = g.center(k);
            let edge = i == 0 || i + 1 == g.nx();
            let seam = !periodic && (j == 0 || j + 1 == g.ny());
            let kink = match family {
                Family::Separable(p) => {
                    let reach = p.a.abs() * g.dx() + p.b.abs() * g.dy();
                    let band = (CREST_MARGIN * reach).max(DEGENERATE_BAND * p.big_h1.powf(1.0 / p.c));
                    p.near_crest(g, x, y, CREST_MARGIN) || p.base(x, y) < band
                }
                Family::Hill(p) => p.rho(x, y).sqrt() < core,
            };
            edge || seam || kink
        })
        .collect()
}

/// `dH/dt - div(h^{10/3} |grad H|^2 grad H)` at cell centers, with the time
/// derivative taken from the closed form and the divergence from the
/// discrete operators.
pub fn pde_residual(family: &Family, g: &GridSpec, t: f64) -> Result<PdeResidual> {
    let (h, s, rate): (Vec<f64>, Vec<f64>, Vec<f64>) =
        match family {
            Family::Separable(p) => {
                let (h, s0) = p.sample(g)?;
                let law = p.decay_law();
                let tf = time_factor(&law, t)?;
                let s: Vec<f64> = s0.iter().map(|v| v * tf).collect();
                let rate = s0.iter().map(|v| -law.r * v * tf.powi(3)).collect();
                (h, s, rate)
            }
            Family::Hill(p) => {
                p.validate()?;
                let mut h = vec![0.0; g.cells()];
                let mut s = vec![0.0; g.cells()];
                let mut rate = vec![0.0; g.cells()];
                for k in 0..g.cells() {
                    let (x, y) = g.center(k);
                    h[k] = p.water_at(x, y, t)?;
                    s[k] = p.surface_at(x, y, t)?;
                    rate[k] = p.surface_rate_at(x, y, t)?;
                }
                (h, s, rate)
            }
        };
    let excluded = excluded_cells(family, g);
    let water = ScalarField::new(*g, FieldRole::WaterDepth, h)?;
    let surface = ScalarField::new(*g, FieldRole::Generic, s)?;
    let div = grid::divergence(&grid::sediment_flux(&surface, &water)?)?;
    let mut res = vec![0.0; g.cells()];
    let mut valid = vec![false; g.cells()];
    for k in 0..g.cells() {
        res[k] = rate[k] - div.values()[k];
        valid[k] = !excluded[k];
    }
    Ok(PdeResidual {
        residual: ScalarField::from_parts(*g, FieldRole::Residual, res),
        valid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub cells: Vec<usize>,
    pub spacings: Vec<f64>,
    pub max_residuals: Vec<f64>,
    /// Observed order of the maximum residual, `None` when all residuals
    /// vanish.
    pub order: Option<f64>,
}

/// `pde_residual` on square `n x n` grids for each `n` in `levels`.
pub fn residual_refinement(
    family: &Family,
    width: f64,
    length: f64,
    levels: &[usize],
    t: f64,
) -> Result<RefinementStudy> {
    let mut spacings = Vec::new();
    let mut max_residuals = Vec::new();
    for &n in levels {
        let g = grid::make_grid(width, length, n, n)?;
        spacings.push(g.dx().max(g.dy()));
        max_residuals.push(pde_residual(family, &g, t)?.max_abs());
    }
    let order = convergence_order(&spacings, &max_residuals);
    Ok(RefinementStudy {
        cells: levels.to_vec(),
        spacings,
        max_residuals,
        order,
    })
}
