use alloc::vec::Vec;

use super::RiskField;
use crate::{Error, Result, Vec2};

/// Axis-aligned rectangle in state space.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::param("bounds", f64::NAN, "finite corners"));
        }
        if !(max.x > min.x) {
            return Err(Error::param("bounds.max.x", max.x, "greater than min.x"));
        }
        if !(max.y > min.y) {
            return Err(Error::param("bounds.max.y", max.y, "greater than min.y"));
        }
        Ok(Bounds { min, max })
    }

    /// The square `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64) -> Self {
        Bounds {
            min: Vec2::new(lo, lo),
            max: Vec2::new(hi, hi),
        }
    }
}

/// Values sampled at cell centers of a regular grid, stored row-major
/// (`index = j·nx + i`, `i` along x).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldGrid {
    bounds: Bounds,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl FieldGrid {
    /// Evaluates `f` at every cell center, in row-major order.
    pub fn from_fn(bounds: Bounds, nx: usize, ny: usize, mut f: impl FnMut(Vec2) -> f64) -> Result<Self> {
        Bounds::new(bounds.min, bounds.max)?;
        if nx < 2 || ny < 2 {
            return Err(Error::param("resolution", nx.min(ny) as f64, "at least 2 cells per axis"));
        }
        let mut grid = FieldGrid {
            bounds,
            nx,
            ny,
            values: Vec::with_capacity(nx * ny),
        };
        for j in 0..ny {
            for i in 0..nx {
                let center = grid.cell_center(i, j);
                grid.values.push(f(center));
            }
        }
        Ok(grid)
    }

    pub fn from_values(bounds: Bounds, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::param("values", values.len() as f64, "nx·ny entries"));
        }
        let mut values = values.into_iter();
        FieldGrid::from_fn(bounds, nx, ny, |_| values.next().unwrap_or(f64::NAN))
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_size(&self) -> Vec2 {
        Vec2::new(
            (self.bounds.max.x - self.bounds.min.x) / self.nx as f64,
            (self.bounds.max.y - self.bounds.min.y) / self.ny as f64,
        )
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let size = self.cell_size();
        Vec2::new(
            self.bounds.min.x + (i as f64 + 0.5) * size.x,
            self.bounds.min.y + (j as f64 + 0.5) * size.y,
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(i, j)` of the largest value; the first one in row-major order on
    /// ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best % self.nx, best / self.nx)
    }

    /// Bilinear interpolation between cell centers, clamped to the lattice.
    pub fn interpolate(&self, p: Vec2) -> f64 {
        let size = self.cell_size();
        let fx = ((p.x - self.bounds.min.x) / size.x - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.bounds.min.y) / size.y - 0.5).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx as usize).min(self.nx - 2);
        let j = (fy as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let bottom = self.get(i, j) * (1.0 - tx) + self.get(i + 1, j) * tx;
        let top = self.get(i, j + 1) * (1.0 - tx) + self.get(i + 1, j + 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

/// Closed-form perceived risk on a grid: cell `(i, j)` holds `R_c(ξ)` with
/// `ξ = source - center(i, j)`.
pub fn rasterize(field: &RiskField, source: Vec2, bounds: Bounds, nx: usize, ny: usize) -> Result<FieldGrid> {
    FieldGrid::from_fn(bounds, nx, ny, |center| field.value(source - center))
}

/// Cell-wise safety classification `R ≤ ρ`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mask {
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(nx: usize, ny: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), nx * ny, "mask size");
        Mask { nx, ny, cells }
    }

    pub fn filled(nx: usize, ny: usize, value: bool) -> Self {
        Mask::new(nx, ny, alloc::vec![value; nx * ny])
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.cells.len() as f64
    }

    pub fn complement(&self) -> Mask {
        Mask::new(self.nx, self.ny, self.cells.iter().map(|c| !c).collect())
    }

    pub fn union_with(&mut self, other: &Mask) {
        debug_assert_eq!(self.resolution(), other.resolution());
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= *b;
        }
    }

    /// Number of cells set here but not in `other`.
    pub fn count_not_in(&self, other: &Mask) -> usize {
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a && !**b)
            .count()
    }
}

/// Safe set `{R ≤ ρ}`; its complement is the risky set.
pub fn safe_mask(grid: &FieldGrid, rho: f64) -> Mask {
    let (nx, ny) = grid.resolution();
    Mask::new(nx, ny, grid.values().iter().map(|v| *v <= rho).collect())
}
