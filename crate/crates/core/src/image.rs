use crate::error::{Error, Result};
use crate::grid::Grid;

/// Single-band raster with a per-pixel validity mask.
///
/// Values are reflectances (dimensionless, typically in `[0, 1]`) stored
/// row-major. Invalid pixels never contribute to sums, means, correlations,
/// or interpolation; operations creating derived images propagate masks so
/// an invalid-only neighborhood never yields a valid output pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedImage {
    grid: Grid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl MaskedImage {
    pub fn new(grid: Grid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dimension_mismatch(
                "value buffer does not match grid",
                grid.len(),
                values.len(),
            ));
        }
        if mask.len() != grid.len() {
            return Err(Error::dimension_mismatch(
                "mask buffer does not match grid",
                grid.len(),
                mask.len(),
            ));
        }
        Ok(MaskedImage { grid, values, mask })
    }

    /// Fully valid image from raw values.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(grid, values, mask)
    }

    /// Constant fully valid image.
    pub fn constant(grid: Grid, value: f64) -> Self {
        let n = grid.len();
        MaskedImage {
            grid,
            values: vec![value; n],
            mask: vec![true; n],
        }
    }

    /// All-invalid image (used as an accumulator shape).
    pub fn empty(grid: Grid) -> Self {
        let n = grid.len();
        MaskedImage {
            grid,
            values: vec![0.0; n],
            mask: vec![false; n],
        }
    }

    /// Image whose value at each pixel is `f(x, y)` of the pixel center.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for r in 0..grid.n_rows() {
            for c in 0..grid.n_cols() {
                let (x, y) = grid.center(r, c);
                values.push(f(x, y));
            }
        }
        let mask = vec![true; values.len()];
        MaskedImage { grid, values, mask }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_rows(&self) -> usize {
        self.grid.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.n_cols()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.grid.index(row, col);
        self.mask[i].then(|| self.values[i])
    }

    pub fn value_at(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[self.grid.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.grid.index(row, col);
        self.values[i] = value;
        self.mask[i] = true;
    }

    pub fn invalidate(&mut self, row: usize, col: usize) {
        let i = self.grid.index(row, col);
        self.mask[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iterator over `(index, value)` of valid pixels.
    pub fn valid_pixels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(self.mask.iter())
            .enumerate()
            .filter_map(|(i, (&v, &m))| m.then_some((i, v)))
    }

    /// Mean over valid pixels, if any.
    pub fn valid_mean(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (_, v) in self.valid_pixels() {
            sum += v;
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// New image with `f` applied to valid values; mask unchanged.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> MaskedImage {
        let values = self
            .values
            .iter()
            .zip(self.mask.iter())
            .map(|(&v, &m)| if m { f(v) } else { v })
            .collect();
        MaskedImage {
            grid: self.grid.clone(),
            values,
            mask: self.mask.clone(),
        }
    }

    /// Pixel-wise combination of two images on the same grid; output valid
    /// only where both inputs are valid.
    pub fn zip_with(&self, other: &MaskedImage, f: impl Fn(f64, f64) -> f64) -> Result<MaskedImage> {
        self.check_same_grid(other)?;
        let n = self.values.len();
        let mut values = vec![0.0; n];
        let mut mask = vec![false; n];
        for i in 0..n {
            if self.mask[i] && other.mask[i] {
                values[i] = f(self.values[i], other.values[i]);
                mask[i] = true;
            }
        }
        Ok(MaskedImage {
            grid: self.grid.clone(),
            values,
            mask,
        })
    }

    pub fn check_same_grid(&self, other: &MaskedImage) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{}x{} px {} vs {}x{} px {}",
                self.grid.n_rows(),
                self.grid.n_cols(),
                self.grid.pixel_size(),
                other.grid.n_rows(),
                other.grid.n_cols(),
                other.grid.pixel_size(),
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize) -> Grid {
        Grid::new(0.0, 0.0, 1.0, rows, cols).unwrap()
    }

    #[test]
    fn rejects_wrong_buffer_lengths() {
        assert!(MaskedImage::new(grid(2, 2), vec![0.0; 3], vec![true; 4]).is_err());
        assert!(MaskedImage::new(grid(2, 2), vec![0.0; 4], vec![true; 3]).is_err());
    }

    #[test]
    fn masked_pixels_do_not_contribute() {
        let mut img = MaskedImage::from_values(grid(2, 2), vec![1.0, 2.0, 3.0, 100.0]).unwrap();
        img.invalidate(1, 1);
        assert_eq!(img.valid_count(), 3);
        assert_eq!(img.valid_mean(), Some(2.0));
        assert_eq!(img.get(1, 1), None);
    }

    #[test]
    fn zip_with_intersects_masks() {
        let mut a = MaskedImage::from_values(grid(1, 3), vec![1.0, 2.0, 3.0]).unwrap();
        let mut b = MaskedImage::from_values(grid(1, 3), vec![10.0, 20.0, 30.0]).unwrap();
        a.invalidate(0, 0);
        b.invalidate(0, 2);
        let sum = a.zip_with(&b, |x, y| x + y).unwrap();
        assert!(!sum.is_valid(0, 0));
        assert_eq!(sum.get(0, 1), Some(22.0));
        assert!(!sum.is_valid(0, 2));
    }

    #[test]
    fn zip_with_requires_matching_grids() {
        let a = MaskedImage::constant(grid(2, 2), 1.0);
        let b = MaskedImage::constant(grid(2, 3), 1.0);
        assert!(a.zip_with(&b, |x, y| x + y).is_err());
    }
}
