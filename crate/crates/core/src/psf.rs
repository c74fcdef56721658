//! Gaussian point-spread-function simulation: degrades fine-resolution
//! imagery onto a coarse grid through a shifted, truncated Gaussian kernel.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;

/// Parameters of one upscaling operator: kernel shifts and blur width, all
/// in coarse-pixel units (1.0 equals one coarse pixel).
///
/// Positive `shift_x` moves the sampling center toward increasing `x`
/// (east); positive `shift_y` toward increasing row index. An image whose
/// content is translated east by `k` coarse pixels is therefore recovered
/// with `shift_x` larger by `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpscaleParams {
    pub shift_x: f64,
    pub shift_y: f64,
    pub sigma: f64,
}

impl UpscaleParams {
    pub fn new(shift_x: f64, shift_y: f64, sigma: f64) -> Result<Self> {
        let p = UpscaleParams {
            shift_x,
            shift_y,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Search start of the greedy algorithm: no shift, one-pixel blur.
    pub fn identity() -> Self {
        UpscaleParams {
            shift_x: 0.0,
            shift_y: 0.0,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !self.shift_x.is_finite() || !self.shift_y.is_finite() {
            return Err(Error::InvalidConfig("shifts must be finite".into()));
        }
        Ok(())
    }
}

/// Options of the upscale operator.
#[derive(Debug, Clone, Copy)]
pub struct UpscaleOptions {
    /// Kernel support ends at `truncation_radius * sigma` (coarse pixels).
    pub truncation_radius: f64,
    /// A coarse pixel is invalid when the valid fine pixels under the kernel
    /// carry less than this fraction of the full (untruncated) kernel mass.
    pub min_valid_fraction: f64,
}

impl Default for UpscaleOptions {
    fn default() -> Self {
        UpscaleOptions {
            truncation_radius: 3.0,
            min_valid_fraction: 0.5,
        }
    }
}

/// Unnormalized isotropic Gaussian density of Eq-style form
/// `exp(-d^2 / (2 sigma^2)) / (2 pi sigma^2)`, distance in coarse pixels.
pub fn gaussian_density(sigma: f64, d: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma * sigma)
}

/// Sparse normalized kernel over fine pixels for one coarse pixel center.
///
/// Weights are `g_sigma(d)` at each fine pixel center within
/// `truncation_radius * sigma` of the shifted coarse center, renormalized to
/// sum to one. Returns `(row-major fine index, weight)` pairs.
pub fn gaussian_weights(
    params: &UpscaleParams,
    coarse_center: (f64, f64),
    fine_grid: &Grid,
    coarse_pixel_size: f64,
    truncation_radius: f64,
) -> Result<Vec<(usize, f64)>> {
    params.validate()?;
    if truncation_radius <= 0.0 || truncation_radius.is_nan() {
        return Err(Error::InvalidConfig(format!(
            "truncation radius must be positive, got {truncation_radius}"
        )));
    }
    let cx = coarse_center.0 + params.shift_x * coarse_pixel_size;
    let cy = coarse_center.1 + params.shift_y * coarse_pixel_size;
    let radius_m = truncation_radius * params.sigma * coarse_pixel_size;

    let fps = fine_grid.pixel_size();
    let (ox, oy) = fine_grid.origin();
    let col_lo = (((cx - radius_m - ox) / fps) - 0.5).ceil().max(0.0) as usize;
    let col_hi = ((((cx + radius_m - ox) / fps) - 0.5).floor()).min(fine_grid.n_cols() as f64 - 1.0);
    let row_lo = (((cy - radius_m - oy) / fps) - 0.5).ceil().max(0.0) as usize;
    let row_hi = ((((cy + radius_m - oy) / fps) - 0.5).floor()).min(fine_grid.n_rows() as f64 - 1.0);

    let mut weights = Vec::new();
    let mut total = 0.0;
    if col_hi >= 0.0 && row_hi >= 0.0 {
        let (col_hi, row_hi) = (col_hi as usize, row_hi as usize);
        let r2 = (truncation_radius * params.sigma) * (truncation_radius * params.sigma);
        for r in row_lo..=row_hi {
            for c in col_lo..=col_hi {
                let (px, py) = fine_grid.center(r, c);
                let dx = (px - cx) / coarse_pixel_size;
                let dy = (py - cy) / coarse_pixel_size;
                let d2 = dx * dx + dy * dy;
                if d2 <= r2 {
                    let w = gaussian_density(params.sigma, d2.sqrt());
                    weights.push((fine_grid.index(r, c), w));
                    total += w;
                }
            }
        }
    }
    if weights.is_empty() || total <= 0.0 {
        return Err(Error::EmptyKernel {
            x: coarse_center.0,
            y: coarse_center.1,
        });
    }
    for (_, w) in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Degrades `fine` onto `coarse_grid` by convolving with the shifted
/// truncated Gaussian of `params`.
///
/// Each coarse value is the valid-weight-normalized sum of fine values under
/// the kernel; the pixel is invalid when the valid fine pixels carry less
/// than `min_valid_fraction` of the full kernel mass (edges, clouds).
pub fn upscale(
    fine: &MaskedImage,
    coarse_grid: &Grid,
    params: &UpscaleParams,
    opts: &UpscaleOptions,
) -> Result<MaskedImage> {
    params.validate()?;
    if !fine.grid().extent_overlaps(coarse_grid) {
        return Err(Error::DisjointExtent(format!(
            "fine extent {:?} vs coarse extent {:?}",
            fine.grid().extent(),
            coarse_grid.extent()
        )));
    }

    let ratio = coarse_grid.pixel_size() / fine.grid().pixel_size();
    let factor = ratio.round();
    if factor >= 1.0 && (ratio - factor).abs() < 1e-9 * ratio {
        upscale_integral(fine, coarse_grid, params, opts, factor as i64)
    } else {
        upscale_general(fine, coarse_grid, params, opts)
    }
}

/// Fast path for integral fine-to-coarse pixel ratios: the kernel footprint
/// relative to each coarse pixel is translation invariant, so the weight
/// template is built once and swept over the coarse grid.
fn upscale_integral(
    fine: &MaskedImage,
    coarse_grid: &Grid,
    params: &UpscaleParams,
    opts: &UpscaleOptions,
    factor: i64,
) -> Result<MaskedImage> {
    let fg = fine.grid();
    let fps = fg.pixel_size();
    let cps = coarse_grid.pixel_size();
    let f = factor as f64;

    // Signed distance (in fine pixels) from fine column `C*factor + j` to
    // the shifted center of coarse column C is `j - const_x`, identical for
    // every C when the pixel ratio is integral.
    let (fox, foy) = fg.origin();
    let (cox, coy) = coarse_grid.origin();
    let const_x = (cox - fox) / fps - 0.5 + (0.5 + params.shift_x) * f;
    let const_y = (coy - foy) / fps - 0.5 + (0.5 + params.shift_y) * f;

    let radius_fine = opts.truncation_radius * params.sigma * f;
    let r2 = radius_fine * radius_fine;
    let sigma_fine = params.sigma * f;
    let inv_two_sigma2 = 1.0 / (2.0 * sigma_fine * sigma_fine);

    // Normalization so the full untruncated template sums to ~1:
    // g_sigma(d_coarse) * (fine area / coarse area).
    let norm = 1.0 / (2.0 * std::f64::consts::PI * params.sigma * params.sigma) / (f * f);

    let j_lo = (-radius_fine + const_x).ceil() as i64;
    let j_hi = (radius_fine + const_x).floor() as i64;
    let i_lo = (-radius_fine + const_y).ceil() as i64;
    let i_hi = (radius_fine + const_y).floor() as i64;
    if j_lo > j_hi || i_lo > i_hi {
        return Err(Error::EmptyKernel {
            x: cox + 0.5 * cps,
            y: coy + 0.5 * cps,
        });
    }

    let wx: Vec<f64> = (j_lo..=j_hi)
        .map(|j| {
            let dx = j as f64 - const_x;
            (-dx * dx * inv_two_sigma2).exp()
        })
        .collect();
    // Row weights carry the normalization constant so the combined weight is
    // a single multiply in the inner loop.
    struct TemplateRow {
        di: i64,
        wy: f64,
        j_lo: i64,
        j_hi: i64,
    }
    let mut rows = Vec::new();
    for i in i_lo..=i_hi {
        let dy = i as f64 - const_y;
        let dy2 = dy * dy;
        if dy2 > r2 {
            continue;
        }
        let chord = (r2 - dy2).sqrt();
        let row_j_lo = ((-chord + const_x).ceil() as i64).max(j_lo);
        let row_j_hi = ((chord + const_x).floor() as i64).min(j_hi);
        if row_j_lo > row_j_hi {
            continue;
        }
        rows.push(TemplateRow {
            di: i,
            wy: (-dy2 * inv_two_sigma2).exp() * norm,
            j_lo: row_j_lo,
            j_hi: row_j_hi,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyKernel {
            x: cox + 0.5 * cps,
            y: coy + 0.5 * cps,
        });
    }

    let n_fine_rows = fg.n_rows() as i64;
    let n_fine_cols = fg.n_cols() as i64;
    let fine_values = fine.values();
    let fine_mask = fine.mask();
    let all_valid = fine.valid_count() == fine_values.len();

    let mut values = vec![0.0; coarse_grid.len()];
    let mut mask = vec![false; coarse_grid.len()];

    for cr in 0..coarse_grid.n_rows() {
        let base_row = cr as i64 * factor;
        for cc in 0..coarse_grid.n_cols() {
            let base_col = cc as i64 * factor;
            let mut wsum = 0.0;
            let mut vsum = 0.0;
            for row in &rows {
                let rr = base_row + row.di;
                if rr < 0 || rr >= n_fine_rows {
                    continue;
                }
                let j0 = (base_col + row.j_lo).max(0);
                let j1 = (base_col + row.j_hi).min(n_fine_cols - 1);
                if j0 > j1 {
                    continue;
                }
                let row_base = (rr * n_fine_cols) as usize;
                let t0 = (j0 - base_col - row.j_lo) as usize;
                let vals = &fine_values[row_base + j0 as usize..=row_base + j1 as usize];
                let wrow = &wx[(row.j_lo - j_lo) as usize + t0
                    ..=(row.j_lo - j_lo) as usize + t0 + (j1 - j0) as usize];
                if all_valid {
                    let mut ws = 0.0;
                    let mut vs = 0.0;
                    for (v, w) in vals.iter().zip(wrow) {
                        ws += w;
                        vs += w * v;
                    }
                    wsum += row.wy * ws;
                    vsum += row.wy * vs;
                } else {
                    let msk = &fine_mask[row_base + j0 as usize..=row_base + j1 as usize];
                    let mut ws = 0.0;
                    let mut vs = 0.0;
                    for ((v, w), m) in vals.iter().zip(wrow).zip(msk) {
                        if *m {
                            ws += w;
                            vs += w * v;
                        }
                    }
                    wsum += row.wy * ws;
                    vsum += row.wy * vs;
                }
            }
            if wsum >= opts.min_valid_fraction && wsum > 0.0 {
                let o = cr * coarse_grid.n_cols() + cc;
                values[o] = vsum / wsum;
                mask[o] = true;
            }
        }
    }

    MaskedImage::new(coarse_grid.clone(), values, mask)
}

/// Correctness-first path for arbitrary pixel-size ratios.
fn upscale_general(
    fine: &MaskedImage,
    coarse_grid: &Grid,
    params: &UpscaleParams,
    opts: &UpscaleOptions,
) -> Result<MaskedImage> {
    let fg = fine.grid();
    let fps = fg.pixel_size();
    let cps = coarse_grid.pixel_size();
    let (ox, oy) = fg.origin();
    let radius_m = opts.truncation_radius * params.sigma * cps;
    let r2 = (opts.truncation_radius * params.sigma) * (opts.truncation_radius * params.sigma);
    let norm = (fps / cps) * (fps / cps)
        / (2.0 * std::f64::consts::PI * params.sigma * params.sigma);
    let inv_two_sigma2 = 1.0 / (2.0 * params.sigma * params.sigma);

    let mut values = vec![0.0; coarse_grid.len()];
    let mut mask = vec![false; coarse_grid.len()];
    for cr in 0..coarse_grid.n_rows() {
        for cc in 0..coarse_grid.n_cols() {
            let (mut cx, mut cy) = coarse_grid.center(cr, cc);
            cx += params.shift_x * cps;
            cy += params.shift_y * cps;
            let col_lo = (((cx - radius_m - ox) / fps) - 0.5).ceil().max(0.0);
            let col_hi = (((cx + radius_m - ox) / fps) - 0.5)
                .floor()
                .min(fg.n_cols() as f64 - 1.0);
            let row_lo = (((cy - radius_m - oy) / fps) - 0.5).ceil().max(0.0);
            let row_hi = (((cy + radius_m - oy) / fps) - 0.5)
                .floor()
                .min(fg.n_rows() as f64 - 1.0);
            if col_hi < col_lo || row_hi < row_lo {
                continue;
            }
            let mut wsum = 0.0;
            let mut vsum = 0.0;
            for r in row_lo as usize..=row_hi as usize {
                for c in col_lo as usize..=col_hi as usize {
                    let (px, py) = fg.center(r, c);
                    let dx = (px - cx) / cps;
                    let dy = (py - cy) / cps;
                    let d2 = dx * dx + dy * dy;
                    if d2 <= r2 && fine.mask()[fg.index(r, c)] {
                        let w = (-d2 * inv_two_sigma2).exp() * norm;
                        wsum += w;
                        vsum += w * fine.values()[fg.index(r, c)];
                    }
                }
            }
            if wsum >= opts.min_valid_fraction && wsum > 0.0 {
                let o = cr * coarse_grid.n_cols() + cc;
                values[o] = vsum / wsum;
                mask[o] = true;
            }
        }
    }
    MaskedImage::new(coarse_grid.clone(), values, mask)
}
