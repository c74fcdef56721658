use crate::error::{Error, Result};

/// Regular planar grid of square pixels.
///
/// All coordinates live in one shared projected CRS (meters). Row indices
/// grow with `y`, column indices with `x`; the center of cell `(r, c)` is
/// `origin + (c + 0.5, r + 0.5) * pixel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin_x: f64,
    origin_y: f64,
    pixel_size: f64,
    n_rows: usize,
    n_cols: usize,
}

impl Grid {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size: f64,
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        if pixel_size <= 0.0 || !pixel_size.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "pixel size must be positive and finite, got {pixel_size}"
            )));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be at least 1x1, got {n_rows}x{n_cols}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::InvalidConfig("grid origin must be finite".into()));
        }
        Ok(Grid {
            origin_x,
            origin_y,
            pixel_size,
            n_rows,
            n_cols,
        })
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are at least 1x1 by construction
    }

    /// Map coordinates of the center of cell `(row, col)`.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size,
            self.origin_y + (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Row-major list of all pixel centers.
    pub fn pixel_centers(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                out.push(self.center(r, c));
            }
        }
        out
    }

    /// Continuous cell-space coordinates of a map point: `(u, v)` such that
    /// the center of cell `(r, c)` maps to exactly `(c, r)`.
    pub fn to_cell_space(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin_x) / self.pixel_size - 0.5,
            (y - self.origin_y) / self.pixel_size - 0.5,
        )
    }

    /// Cell containing a map point, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_x) / self.pixel_size).floor();
        let r = ((y - self.origin_y) / self.pixel_size).floor();
        if r < 0.0 || c < 0.0 || r >= self.n_rows as f64 || c >= self.n_cols as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        row * self.n_cols + col
    }

    /// Outer bounding box `(x_min, y_min, x_max, y_max)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.n_cols as f64 * self.pixel_size,
            self.origin_y + self.n_rows as f64 * self.pixel_size,
        )
    }

    pub fn extent_overlaps(&self, other: &Grid) -> bool {
        let (ax0, ay0, ax1, ay1) = self.extent();
        let (bx0, by0, bx1, by1) = other.extent();
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }

    /// Grid covering the same extent with `factor`-times larger pixels.
    pub fn aggregated(&self, factor: usize) -> Result<Grid> {
        if factor == 0 {
            return Err(Error::InvalidConfig("aggregation factor must be >= 1".into()));
        }
        if !self.n_rows.is_multiple_of(factor) || !self.n_cols.is_multiple_of(factor) {
            return Err(Error::dimension_mismatch(
                "grid dimensions not divisible by aggregation factor",
                format!("multiple of {factor}"),
                format!("{}x{}", self.n_rows, self.n_cols),
            ));
        }
        Grid::new(
            self.origin_x,
            self.origin_y,
            self.pixel_size * factor as f64,
            self.n_rows / factor,
            self.n_cols / factor,
        )
    }
}
