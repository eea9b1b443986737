//! Cylinder discretization of the rectangle `[0, W] x [0, L]`.
//!
//! Primary variables are cell-centered, fluxes live on cell faces. The `y`
//! direction is periodic. The boundary behavior of the erosion equation is
//! built into the operators: the sediment flux through the `x = 0` faces is
//! zero and the surface takes the value `H = 0` on the `x = W` faces.
//!
//! Cells are stored row-major with `idx = j * nx + i`, `i` counting along `x`
//! and `j` along `y`.

use crate::error::{LabError, Result};

/// Exponent of the water depth in the sediment flux.
pub const WATER_EXPONENT: f64 = 10.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    width: f64,
    length: f64,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
}

/// Builds a grid with `nx x ny` cells on `[0, width] x [0, length]`.
pub fn make_grid(width: f64, length: f64, nx: usize, ny: usize) -> Result<GridSpec> {
    GridSpec::new(width, length, nx, ny)
}

impl GridSpec {
    pub fn new(width: f64, length: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || !(length.is_finite() && length > 0.0) {
            return Err(LabError::InvalidGrid(format!(
                "dimensions must be positive, got W = {width}, L = {length}"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(LabError::InvalidGrid(format!(
                "cell counts must be at least 2, got nx = {nx}, ny = {ny}"
            )));
        }
        Ok(Self {
            width,
            length,
            nx,
            ny,
            dx: width / nx as f64,
            dy: length / ny as f64,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn area(&self) -> f64 {
        self.width * self.length
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Inverse of [`GridSpec::idx`].
    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    #[inline]
    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy
    }

    #[inline]
    pub fn center(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.x_center(i), self.y_center(j))
    }

    #[inline]
    pub fn j_plus(&self, j: usize) -> usize {
        if j + 1 == self.ny {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn j_minus(&self, j: usize) -> usize {
        if j == 0 {
            self.ny - 1
        } else {
            j - 1
        }
    }

    /// Number of x-normal faces, `(nx + 1) * ny`.
    pub fn x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    /// Index of the x-normal face at `x = i * dx` in row `j`.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Index of the y-normal face below cell `(i, j)`. Face 0 doubles as the
    /// face above the last row.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// What a scalar field represents. Water depth carries the `h >= 0` invariant
/// and surfaces pick up the Dirichlet ghost value in gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Surface,
    WaterDepth,
    Residual,
    Density,
    Generic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    role: FieldRole,
}

impl ScalarField {
    pub fn new(grid: GridSpec, role: FieldRole, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(LabError::Field(format!(
                "expected {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.ij(k);
            return Err(LabError::Field(format!("non-finite value at cell ({i}, {j})")));
        }
        if role == FieldRole::WaterDepth {
            if let Some(k) = values.iter().position(|&v| v < 0.0) {
                let (i, j) = grid.ij(k);
                return Err(LabError::InvalidWeight { i, j });
            }
        }
        Ok(Self { grid, values, role })
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: GridSpec, role: FieldRole, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.cells())
            .map(|k| {
                let (x, y) = grid.center(k);
                f(x, y)
            })
            .collect();
        Self::new(grid, role, values)
    }

    pub fn zeros(grid: GridSpec, role: FieldRole) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cells()],
            role,
        }
    }

    pub fn constant(grid: GridSpec, role: FieldRole, value: f64) -> Result<Self> {
        Self::new(grid, role, vec![value; grid.cells()])
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_parts(grid: GridSpec, role: FieldRole, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cells());
        Self { grid, values, role }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn with_role(mut self, role: FieldRole) -> Result<Self> {
        if role == FieldRole::WaterDepth {
            if let Some(k) = self.values.iter().position(|&v| v < 0.0) {
                let (i, j) = self.grid.ij(k);
                return Err(LabError::InvalidWeight { i, j });
            }
        }
        self.role = role;
        Ok(self)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub(crate) fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(LabError::GridMismatch)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// One vector per cell center.
    CellCentered,
    /// `x` holds the normal component on the `(nx + 1) * ny` x-faces and `y`
    /// the normal component on the `nx * ny` y-faces.
    FaceCentered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    placement: Placement,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, placement: Placement, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let (nxs, nys) = match placement {
            Placement::CellCentered => (grid.cells(), grid.cells()),
            Placement::FaceCentered => (grid.x_faces(), grid.cells()),
        };
        if x.len() != nxs || y.len() != nys {
            return Err(LabError::Field(format!(
                "expected {nxs} + {nys} components, got {} + {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(LabError::Field("non-finite vector component".into()));
        }
        Ok(Self {
            grid,
            placement,
            x,
            y,
        })
    }

    /// Samples a continuous vector field: at cell centers, or the normal
    /// component at face midpoints.
    pub fn from_fn(
        grid: GridSpec,
        placement: Placement,
        f: impl Fn(f64, f64) -> (f64, f64),
    ) -> Result<Self> {
        let (x, y) = match placement {
            Placement::CellCentered => (0..grid.cells())
                .map(|k| {
                    let (cx, cy) = grid.center(k);
                    f(cx, cy)
                })
                .unzip(),
            Placement::FaceCentered => {
                let mut qx = vec![0.0; grid.x_faces()];
                for j in 0..grid.ny() {
                    for i in 0..=grid.nx() {
                        qx[grid.x_face(i, j)] = f(i as f64 * grid.dx(), grid.y_center(j)).0;
                    }
                }
                let mut qy = vec![0.0; grid.cells()];
                for j in 0..grid.ny() {
                    for i in 0..grid.nx() {
                        qy[grid.y_face(i, j)] = f(grid.x_center(i), j as f64 * grid.dy()).1;
                    }
                }
                (qx, qy)
            }
        };
        Self::new(grid, placement, x, y)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Net outward flux through the domain boundary of a face-centered field.
    pub fn boundary_flux(&self) -> Result<f64> {
        self.expect(Placement::FaceCentered)?;
        let g = &self.grid;
        let mut total = 0.0;
        for j in 0..g.ny() {
            total += self.x[g.x_face(g.nx(), j)] - self.x[g.x_face(0, j)];
        }
        Ok(total * g.dy())
    }

    /// Outward flux through the `x = W` faces only.
    pub fn outlet_flux(&self) -> Result<f64> {
        self.expect(Placement::FaceCentered)?;
        let g = &self.grid;
        Ok((0..g.ny()).map(|j| self.x[g.x_face(g.nx(), j)]).sum::<f64>() * g.dy())
    }

    fn expect(&self, placement: Placement) -> Result<()> {
        if self.placement == placement {
            Ok(())
        } else {
            Err(LabError::Placement {
                expected: match placement {
                    Placement::CellCentered => "cell-centered",
                    Placement::FaceCentered => "face-centered",
                },
            })
        }
    }
}

/// Cell-centered x-derivative. With `dirichlet`, the surface value 0 on the
/// `x = W` face closes the stencil in the last column.
#[inline]
fn ddx(g: &GridSpec, v: &[f64], i: usize, j: usize, dirichlet: bool) -> f64 {
    let nx = g.nx();
    let h = g.dx();
    let at = |ii: usize| v[g.idx(ii, j)];
    if i > 0 && i + 1 < nx {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    } else if i == 0 {
        if nx >= 3 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else {
            (at(1) - at(0)) / h
        }
    } else if dirichlet {
        // quadratic through x_{n-2}, x_{n-1} and the boundary value at W
        -at(nx - 2) / (3.0 * h) - at(nx - 1) / h
    } else if nx >= 3 {
        (3.0 * at(nx - 1) - 4.0 * at(nx - 2) + at(nx - 3)) / (2.0 * h)
    } else {
        (at(nx - 1) - at(nx - 2)) / h
    }
}

#[inline]
fn ddy(g: &GridSpec, v: &[f64], i: usize, j: usize) -> f64 {
    (v[g.idx(i, g.j_plus(j))] - v[g.idx(i, g.j_minus(j))]) / (2.0 * g.dy())
}

pub(crate) fn cell_gradient(g: &GridSpec, v: &[f64], dirichlet: bool) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; g.cells()];
    let mut gy = vec![0.0; g.cells()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            gx[k] = ddx(g, v, i, j, dirichlet);
            gy[k] = ddy(g, v, i, j);
        }
    }
    (gx, gy)
}

/// Cell-centered gradient: central differences inside, second-order one-sided
/// differences on the x-edges, periodic in y.
pub fn gradient(f: &ScalarField) -> VectorField {
    let (x, y) = cell_gradient(&f.grid, &f.values, f.role == FieldRole::Surface);
    VectorField {
        grid: f.grid,
        placement: Placement::CellCentered,
        x,
        y,
    }
}

/// Conservative divergence of a face-centered field.
pub fn divergence(q: &VectorField) -> Result<ScalarField> {
    q.expect(Placement::FaceCentered)?;
    let g = q.grid;
    let mut out = vec![0.0; g.cells()];
    divergence_into(&g, &q.x, &q.y, &mut out);
    Ok(ScalarField::from_parts(g, FieldRole::Residual, out))
}

pub(crate) fn divergence_into(g: &GridSpec, qx: &[f64], qy: &[f64], out: &mut [f64]) {
    let (dx, dy) = (g.dx(), g.dy());
    for j in 0..g.ny() {
        let jp = g.j_plus(j);
        for i in 0..g.nx() {
            out[g.idx(i, j)] = (qx[g.x_face(i + 1, j)] - qx[g.x_face(i, j)]) / dx
                + (qy[g.y_face(i, jp)] - qy[g.y_face(i, j)]) / dy;
        }
    }
}

/// Face weights `h^{10/3}` with `h` averaged arithmetically onto faces. The
/// water depth is static during a run, so these are computed once.
#[derive(Debug, Clone)]
pub(crate) struct FaceWeights {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceWeights {
    pub fn new(h: &ScalarField) -> Self {
        let g = h.grid;
        let v = &h.values;
        let mut wx = vec![0.0; g.x_faces()];
        let mut wy = vec![0.0; g.cells()];
        for j in 0..g.ny() {
            for i in 1..g.nx() {
                let hf = 0.5 * (v[g.idx(i - 1, j)] + v[g.idx(i, j)]);
                wx[g.x_face(i, j)] = hf.powf(WATER_EXPONENT);
            }
            wx[g.x_face(g.nx(), j)] = v[g.idx(g.nx() - 1, j)].powf(WATER_EXPONENT);
            let jm = g.j_minus(j);
            for i in 0..g.nx() {
                let hf = 0.5 * (v[g.idx(i, jm)] + v[g.idx(i, j)]);
                wy[g.y_face(i, j)] = hf.powf(WATER_EXPONENT);
            }
        }
        Self { x: wx, y: wy }
    }
}

/// Face fluxes `w |grad H|^2 (grad H . n)` written into `qx`, `qy`. Returns the
/// largest face value of `3 w |grad H|^2`, the stiffness of the scheme.
pub(crate) fn flux_into(
    g: &GridSpec,
    surface: &[f64],
    w: &FaceWeights,
    qx: &mut [f64],
    qy: &mut [f64],
) -> f64 {
    let (gx, gy) = cell_gradient(g, surface, true);
    let (dx, dy) = (g.dx(), g.dy());
    let nx = g.nx();
    let mut stiff: f64 = 0.0;
    for j in 0..g.ny() {
        qx[g.x_face(0, j)] = 0.0;
        for i in 1..nx {
            let (a, b) = (g.idx(i - 1, j), g.idx(i, j));
            let gn = (surface[b] - surface[a]) / dx;
            let gt = 0.5 * (gy[a] + gy[b]);
            let wf = w.x[g.x_face(i, j)];
            let s = wf * (gn * gn + gt * gt);
            qx[g.x_face(i, j)] = s * gn;
            stiff = stiff.max(3.0 * s);
        }
        // Dirichlet face: ghost value 0 half a cell away, no tangential slope.
        let last = g.idx(nx - 1, j);
        let gn = -surface[last] / (0.5 * dx);
        let s = w.x[g.x_face(nx, j)] * gn * gn;
        qx[g.x_face(nx, j)] = s * gn;
        stiff = stiff.max(3.0 * s);

        let jm = g.j_minus(j);
        for i in 0..nx {
            let (a, b) = (g.idx(i, jm), g.idx(i, j));
            let gn = (surface[b] - surface[a]) / dy;
            let gt = 0.5 * (gx[a] + gx[b]);
            let s = w.y[g.y_face(i, j)] * (gn * gn + gt * gt);
            qy[g.y_face(i, j)] = s * gn;
            stiff = stiff.max(3.0 * s);
        }
    }
    stiff
}

/// Sediment flux `h^{10/3} |grad H|^2 grad H` on faces.
///
/// The face gradient pairs the normal difference across the face with the
/// average of the two adjacent cell-centered tangential derivatives. The flux
/// through `x = 0` is zero and the `x = W` faces see the ghost value `H = 0`.
pub fn sediment_flux(surface: &ScalarField, water: &ScalarField) -> Result<VectorField> {
    surface.same_grid(water)?;
    if let Some(k) = water.values.iter().position(|&v| v < 0.0) {
        let (i, j) = water.grid.ij(k);
        return Err(LabError::InvalidWeight { i, j });
    }
    let g = surface.grid;
    let w = FaceWeights::new(water);
    let mut qx = vec![0.0; g.x_faces()];
    let mut qy = vec![0.0; g.cells()];
    flux_into(&g, &surface.values, &w, &mut qx, &mut qy);
    VectorField::new(g, Placement::FaceCentered, qx, qy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub l1: f64,
    pub l2: f64,
    /// `K(f) = int |grad f|^4 h^{10/3} / 4`.
    pub energy: f64,
    /// `(int |f|^4 + |grad f|^4 h^{10/3})^{1/4}`.
    pub weighted_sobolev: f64,
}

/// Midpoint-rule norms of `f` weighted by the water depth `h`.
pub fn field_norms(f: &ScalarField, h: &ScalarField) -> Result<FieldNorms> {
    f.same_grid(h)?;
    let g = f.grid;
    let (gx, gy) = cell_gradient(&g, &f.values, f.role == FieldRole::Surface);
    let (mut l1, mut l2, mut grad4, mut f4) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..g.cells() {
        let v = f.values[k];
        l1 += v.abs();
        l2 += v * v;
        f4 += v * v * v * v;
        let s = gx[k] * gx[k] + gy[k] * gy[k];
        grad4 += s * s * h.values[k].powf(WATER_EXPONENT);
    }
    let area = g.cell_area();
    Ok(FieldNorms {
        l1: l1 * area,
        l2: (l2 * area).sqrt(),
        energy: 0.25 * grad4 * area,
        weighted_sobolev: ((f4 + grad4) * area).powf(0.25),
    })
}
