use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;

/// Fractional offsets this close to a lattice point snap onto it, so
/// reprojection onto an identical grid reproduces values exactly instead of
/// demanding a fourth neighbor that carries zero weight.
const SNAP_EPS: f64 = 1e-9;

/// Resampling method for moving an image onto another grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampler {
    #[default]
    Bilinear,
    Nearest,
}

impl Resampler {
    pub fn apply(&self, src: &MaskedImage, target: &Grid) -> Result<MaskedImage> {
        match self {
            Resampler::Bilinear => reproject_bilinear(src, target),
            Resampler::Nearest => reproject_nearest(src, target),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Resampler::Bilinear => "bilinear",
            Resampler::Nearest => "nearest",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(Resampler::Bilinear),
            "nearest" => Ok(Resampler::Nearest),
            other => Err(Error::InvalidConfig(format!(
                "unknown resampler {other:?} (expected bilinear or nearest)"
            ))),
        }
    }
}

/// Block-averages `fine` into pixels `factor` times larger.
///
/// Each output pixel is the mean of the valid input values in its
/// `factor`x`factor` block and is invalid only when the whole block is
/// invalid, so partially clouded blocks remain usable.
pub fn aggregate_mean(fine: &MaskedImage, factor: usize) -> Result<MaskedImage> {
    let grid = fine.grid();
    let out_grid = grid.aggregated(factor)?;
    let (rows_out, cols_out) = (out_grid.n_rows(), out_grid.n_cols());
    let cols_in = grid.n_cols();

    let mut values = vec![0.0; rows_out * cols_out];
    let mut mask = vec![false; rows_out * cols_out];
    let src_values = fine.values();
    let src_mask = fine.mask();

    for br in 0..rows_out {
        for bc in 0..cols_out {
            let mut sum = 0.0;
            let mut count = 0usize;
            for r in br * factor..(br + 1) * factor {
                let row_base = r * cols_in + bc * factor;
                for i in row_base..row_base + factor {
                    if src_mask[i] {
                        sum += src_values[i];
                        count += 1;
                    }
                }
            }
            let o = br * cols_out + bc;
            if count > 0 {
                values[o] = sum / count as f64;
                mask[o] = true;
            }
        }
    }

    MaskedImage::new(out_grid, values, mask)
}

/// Samples `src` at each target pixel center with bilinear interpolation.
///
/// A target pixel is invalid when any contributing neighbor (nonzero
/// interpolation weight) is invalid or lies outside `src`.
pub fn reproject_bilinear(src: &MaskedImage, target: &Grid) -> Result<MaskedImage> {
    if src.valid_count() == 0 {
        return Err(Error::EmptyInput(
            "source image has no valid pixels to interpolate from".into(),
        ));
    }
    let sg = src.grid();
    let (n_rows, n_cols) = (sg.n_rows(), sg.n_cols());
    let src_values = src.values();
    let src_mask = src.mask();

    let mut values = vec![0.0; target.len()];
    let mut mask = vec![false; target.len()];

    for tr in 0..target.n_rows() {
        for tc in 0..target.n_cols() {
            let (x, y) = target.center(tr, tc);
            let (u, v) = sg.to_cell_space(x, y);

            let (c0, fx) = split_cell(u);
            let (r0, fy) = split_cell(v);

            let need_c1 = fx > 0.0;
            let need_r1 = fy > 0.0;
            if c0 < 0
                || r0 < 0
                || c0 as usize >= n_cols
                || r0 as usize >= n_rows
                || (need_c1 && c0 as usize + 1 >= n_cols)
                || (need_r1 && r0 as usize + 1 >= n_rows)
            {
                continue;
            }
            let (r0, c0) = (r0 as usize, c0 as usize);
            let i00 = r0 * n_cols + c0;
            let i01 = i00 + 1;
            let i10 = i00 + n_cols;
            let i11 = i10 + 1;

            let ok = src_mask[i00]
                && (!need_c1 || src_mask[i01])
                && (!need_r1 || src_mask[i10])
                && (!(need_c1 && need_r1) || src_mask[i11]);
            if !ok {
                continue;
            }

            let top = if need_c1 {
                src_values[i00] * (1.0 - fx) + src_values[i01] * fx
            } else {
                src_values[i00]
            };
            let value = if need_r1 {
                let bottom = if need_c1 {
                    src_values[i10] * (1.0 - fx) + src_values[i11] * fx
                } else {
                    src_values[i10]
                };
                top * (1.0 - fy) + bottom * fy
            } else {
                top
            };

            let o = tr * target.n_cols() + tc;
            values[o] = value;
            mask[o] = true;
        }
    }

    MaskedImage::new(target.clone(), values, mask)
}

/// Nearest-neighbor counterpart of [`reproject_bilinear`].
pub fn reproject_nearest(src: &MaskedImage, target: &Grid) -> Result<MaskedImage> {
    if src.valid_count() == 0 {
        return Err(Error::EmptyInput(
            "source image has no valid pixels to sample from".into(),
        ));
    }
    let mut out = MaskedImage::empty(target.clone());
    for tr in 0..target.n_rows() {
        for tc in 0..target.n_cols() {
            let (x, y) = target.center(tr, tc);
            if let Some((r, c)) = src.grid().cell_at(x, y) {
                if let Some(v) = src.get(r, c) {
                    out.set(tr, tc, v);
                }
            }
        }
    }
    Ok(out)
}

/// Splits a continuous cell-space coordinate into base index and fractional
/// part, snapping near-lattice values so zero-weight neighbors drop out.
fn split_cell(u: f64) -> (i64, f64) {
    let base = u.floor();
    let mut frac = u - base;
    let mut idx = base as i64;
    if frac <= SNAP_EPS {
        frac = 0.0;
    } else if frac >= 1.0 - SNAP_EPS {
        idx += 1;
        frac = 0.0;
    }
    (idx, frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: usize, cols: usize, ps: f64) -> Grid {
        Grid::new(0.0, 0.0, ps, rows, cols).unwrap()
    }

    #[test]
    fn constant_block_aggregates_to_its_value() {
        let img = MaskedImage::constant(grid(2, 2, 1.0), 0.3);
        let out = aggregate_mean(&img, 2).unwrap();
        assert_eq!(out.n_rows(), 1);
        assert_eq!(out.n_cols(), 1);
        assert_eq!(out.get(0, 0), Some(0.3));
    }

    #[test]
    fn full_scale_aggregation_dimensions() {
        let img = MaskedImage::constant(grid(900, 900, 20.0), 0.1);
        let out = aggregate_mean(&img, 15).unwrap();
        assert_eq!((out.n_rows(), out.n_cols()), (60, 60));
        assert_eq!(out.grid().pixel_size(), 300.0);
    }

    #[test]
    fn fully_invalid_block_is_invalid_others_match_brute_force() {
        let g = grid(4, 4, 1.0);
        let values: Vec<f64> = (0..16).map(|i| i as f64 * 0.01).collect();
        let mut img = MaskedImage::from_values(g, values.clone()).unwrap();
        // top-left 2x2 block fully invalid
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            img.invalidate(r, c);
        }
        // one extra masked pixel inside the bottom-right block
        img.invalidate(2, 2);

        let out = aggregate_mean(&img, 2).unwrap();
        assert!(!out.is_valid(0, 0));

        // independent brute-force block means over the valid entries
        for (br, bc) in [(0usize, 1usize), (1, 0), (1, 1)] {
            let mut sum = 0.0;
            let mut n = 0;
            for r in br * 2..br * 2 + 2 {
                for c in bc * 2..bc * 2 + 2 {
                    if img.is_valid(r, c) {
                        sum += values[r * 4 + c];
                        n += 1;
                    }
                }
            }
            let expect = sum / n as f64;
            assert!((out.get(br, bc).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn non_divisible_dimensions_error_names_both() {
        let img = MaskedImage::constant(grid(5, 4, 1.0), 0.0);
        let err = aggregate_mean(&img, 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("5x4"), "{msg}");
        assert!(msg.contains("2"), "{msg}");
    }

    #[test]
    fn aggregate_preserves_global_mean_when_all_valid() {
        let g = grid(6, 6, 1.0);
        let img = MaskedImage::from_fn(g, |x, y| 0.2 + 0.01 * x + 0.003 * y * y);
        let before = img.valid_mean().unwrap();
        let after = aggregate_mean(&img, 3).unwrap().valid_mean().unwrap();
        assert!((before - after).abs() <= 1e-9 * before.abs());
    }

    #[test]
    fn identity_reprojection_is_exact() {
        let g = Grid::new(123.4, -56.7, 2.5, 5, 7).unwrap();
        let mut img = MaskedImage::from_fn(g.clone(), |x, y| (x * 0.01).sin() + 0.1 * y);
        img.invalidate(2, 3);
        let out = reproject_bilinear(&img, &g).unwrap();
        for r in 0..5 {
            for c in 0..7 {
                match img.get(r, c) {
                    Some(v) => assert_eq!(out.get(r, c), Some(v)),
                    None => assert!(!out.is_valid(r, c)),
                }
            }
        }
    }

    #[test]
    fn constant_image_interpolates_to_constant() {
        let src = MaskedImage::constant(grid(8, 8, 1.0), 0.42);
        // interior target, offset and finer
        let target = Grid::new(1.3, 2.1, 0.7, 5, 5).unwrap();
        let out = reproject_bilinear(&src, &target).unwrap();
        for (_, v) in out.valid_pixels() {
            assert!((v - 0.42).abs() < 1e-12);
        }
        assert!(out.valid_count() > 0);
    }

    #[test]
    fn midpoint_of_two_by_two_is_mean_of_corners() {
        let src =
            MaskedImage::from_values(grid(2, 2, 1.0), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        // single pixel whose center lands exactly in the middle of the 2x2
        let target = Grid::new(0.5, 0.5, 1.0, 1, 1).unwrap();
        let out = reproject_bilinear(&src, &target).unwrap();
        assert!((out.get(0, 0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_extent_targets_are_invalid_not_errors() {
        let src = MaskedImage::constant(grid(2, 2, 1.0), 1.0);
        let target = Grid::new(100.0, 100.0, 1.0, 2, 2).unwrap();
        let out = reproject_bilinear(&src, &target).unwrap();
        assert_eq!(out.valid_count(), 0);
    }

    #[test]
    fn empty_source_is_an_error() {
        let src = MaskedImage::empty(grid(2, 2, 1.0));
        let target = grid(2, 2, 1.0);
        assert!(matches!(
            reproject_bilinear(&src, &target),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn invalid_neighbor_invalidates_interpolation() {
        let mut src = MaskedImage::constant(grid(2, 2, 1.0), 1.0);
        src.invalidate(0, 1);
        let target = Grid::new(0.5, 0.5, 1.0, 1, 1).unwrap();
        let out = reproject_bilinear(&src, &target).unwrap();
        assert!(!out.is_valid(0, 0));
    }
}
