//! Uniform node grids, nodal fields and the zero-Neumann Laplacian.
//!
//! Values are stored row-major with `i` (the x index) running fastest:
//! node `(i, j)` lives at `values[i + j * nx]`. Snapshot files use the
//! same order, so a field written and read back is bit-identical.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::error::{HbmoError, Result};

/// Rows per rayon task in the stencil loops. Small grids run serially.
const PAR_MIN_NODES: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub origin: [f64; 2],
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, origin: [f64; 2]) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(HbmoError::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(HbmoError::InvalidGrid(format!(
                "domain sides must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Grid2D {
            nx,
            ny,
            hx: lx / (nx - 1) as f64,
            hy: ly / (ny - 1) as f64,
            origin,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.hy
    }

    #[inline]
    pub fn position(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.coords(k);
        [self.x(i), self.y(j)]
    }

    pub fn lx(&self) -> f64 {
        self.hx * (self.nx - 1) as f64
    }

    pub fn ly(&self) -> f64 {
        self.hy * (self.ny - 1) as f64
    }

    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }

    /// Largest node spacing.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    /// Trapezoid quadrature weight of node `k`: `hx*hy`, halved on each
    /// boundary line the node sits on. The weights sum to the domain area.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        let (i, j) = self.coords(k);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }
}

/// Square grid covering `[0, domain]^2` with `n` nodes per axis.
pub fn make_grid(n: usize, domain: f64) -> Result<Grid2D> {
    Grid2D::new(n, n, domain, domain, [0.0, 0.0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HbmoError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.position(k);
                f(x, y)
            })
            .collect();
        ScalarField { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`, the workhorse for two-history initial data.
    pub fn lincomb(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    /// Trapezoid-rule integral over the domain.
    pub fn integrate(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| self.grid.weight(k) * v)
            .sum()
    }

    pub(crate) fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(HbmoError::GridMismatch)
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|v| v * rhs)
    }
}

/// `N - 1` channels for an `N`-phase configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid2D,
    pub channels: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(channels: Vec<ScalarField>) -> Result<Self> {
        let grid = channels
            .first()
            .map(|c| c.grid)
            .ok_or_else(|| HbmoError::InvalidGrid("vector field needs a channel".into()))?;
        if channels.iter().any(|c| c.grid != grid) {
            return Err(HbmoError::GridMismatch);
        }
        Ok(VectorField { grid, channels })
    }

    pub fn zeros(grid: Grid2D, dim: usize) -> Self {
        VectorField {
            grid,
            channels: vec![ScalarField::zeros(grid); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    /// Value of all channels at node `k`.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c.values[k]).collect()
    }

    /// Nodewise dot product with a constant vector.
    pub fn dot(&self, p: &[f64]) -> ScalarField {
        debug_assert_eq!(p.len(), self.dim());
        let mut out = ScalarField::zeros(self.grid);
        for (c, &pc) in self.channels.iter().zip(p) {
            for (o, v) in out.values.iter_mut().zip(&c.values) {
                *o += pc * v;
            }
        }
        out
    }

    pub fn lincomb(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(HbmoError::GridMismatch);
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(x, y)| x.lincomb(a, y, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField {
            grid: self.grid,
            channels,
        })
    }

    /// Adds the constant vector `w` to every node.
    pub fn shifted(&self, w: &[f64]) -> Self {
        VectorField {
            grid: self.grid,
            channels: self
                .channels
                .iter()
                .zip(w)
                .map(|(c, &wc)| c.map(|v| v + wc))
                .collect(),
        }
    }
}

#[inline]
fn stencil_row(grid: &Grid2D, f: &[f64], j: usize, out: &mut [f64]) {
    let nx = grid.nx;
    let ny = grid.ny;
    let ihx2 = 1.0 / (grid.hx * grid.hx);
    let ihy2 = 1.0 / (grid.hy * grid.hy);
    let row = &f[j * nx..(j + 1) * nx];
    // Mirror ghosts: the value across a wall equals the interior neighbour.
    let down = if j == 0 { 1 } else { j - 1 };
    let up = if j == ny - 1 { ny - 2 } else { j + 1 };
    let row_d = &f[down * nx..(down + 1) * nx];
    let row_u = &f[up * nx..(up + 1) * nx];
    for i in 0..nx {
        let left = if i == 0 { row[1] } else { row[i - 1] };
        let right = if i == nx - 1 { row[nx - 2] } else { row[i + 1] };
        let c = row[i];
        out[i] = (left + right - 2.0 * c) * ihx2 + (row_d[i] + row_u[i] - 2.0 * c) * ihy2;
    }
}

/// Writes the 5-point Neumann Laplacian of `f` into `out`.
pub(crate) fn laplacian_into(grid: &Grid2D, f: &[f64], out: &mut [f64]) {
    debug_assert_eq!(f.len(), grid.len());
    debug_assert_eq!(out.len(), grid.len());
    if grid.len() >= PAR_MIN_NODES {
        out.par_chunks_mut(grid.nx)
            .enumerate()
            .for_each(|(j, row)| stencil_row(grid, f, j, row));
    } else {
        out.chunks_mut(grid.nx)
            .enumerate()
            .for_each(|(j, row)| stencil_row(grid, f, j, row));
    }
}

/// Five-point Laplacian with zero-Neumann walls via mirror ghost nodes.
pub fn laplacian_neumann(f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid);
    laplacian_into(&f.grid, &f.values, &mut out.values);
    out
}

/// Discrete Dirichlet energy `½∫|∇f|²` built from edge differences with
/// trapezoid edge weights. Its gradient is exactly `-W·L f`, where `W`
/// holds the nodal weights and `L` is [`laplacian_neumann`].
pub fn dirichlet_energy(f: &ScalarField) -> f64 {
    0.5 * gradient_pairing(f, f)
}

/// Symmetric bilinear form `∫∇f·∇g` with the same edge weights as
/// [`dirichlet_energy`].
pub fn gradient_pairing(f: &ScalarField, g: &ScalarField) -> f64 {
    let grid = &f.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let cell = grid.hx * grid.hy;
    let mut acc = 0.0;
    for j in 0..ny {
        let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        for i in 0..nx - 1 {
            let k = grid.index(i, j);
            let df = f.values[k + 1] - f.values[k];
            let dg = g.values[k + 1] - g.values[k];
            acc += wy * df * dg / (grid.hx * grid.hx);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let wx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
            let k = grid.index(i, j);
            let df = f.values[k + nx] - f.values[k];
            let dg = g.values[k + nx] - g.values[k];
            acc += wx * df * dg / (grid.hy * grid.hy);
        }
    }
    acc * cell
}
