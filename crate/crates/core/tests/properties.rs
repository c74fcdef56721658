//! Property tests for the raster, kernel, and metric invariants.

use proptest::prelude::*;
use stifprep::io::{read_series_bytes, write_series_bytes, RasterMeta};
use stifprep::metrics::{pearson, rmse, roberts_edge_feature};
use stifprep::psf::{gaussian_weights, upscale, UpscaleOptions, UpscaleParams};
use stifprep::resample::{aggregate_mean, reproject_bilinear};
use stifprep::{BandSet, Date, Grid, ImageSeries, MaskedImage, SeriesEntry};

fn image_strategy(
    rows: usize,
    cols: usize,
    with_mask: bool,
) -> impl Strategy<Value = MaskedImage> {
    let n = rows * cols;
    (
        prop::collection::vec(0.0f64..1.0, n),
        prop::collection::vec(any::<bool>(), if with_mask { n } else { 0 }),
    )
        .prop_map(move |(values, holes)| {
            let grid = Grid::new(0.0, 0.0, 1.0, rows, cols).unwrap();
            let mask = if holes.is_empty() {
                vec![true; values.len()]
            } else {
                // keep at least half the pixels valid
                holes
                    .iter()
                    .enumerate()
                    .map(|(i, &h)| h || i % 2 == 0)
                    .collect()
            };
            MaskedImage::new(grid, values, mask).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aggregate_mean_preserves_global_mean(img in image_strategy(12, 12, false)) {
        let before = img.valid_mean().unwrap();
        for factor in [2usize, 3, 4, 6] {
            let after = aggregate_mean(&img, factor).unwrap().valid_mean().unwrap();
            prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1e-30));
        }
    }

    #[test]
    fn aggregate_mean_composes(img in image_strategy(12, 12, false)) {
        let two_step = aggregate_mean(&aggregate_mean(&img, 2).unwrap(), 3).unwrap();
        let one_step = aggregate_mean(&img, 6).unwrap();
        for i in 0..two_step.values().len() {
            let (a, b) = (two_step.values()[i], one_step.values()[i]);
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-30));
        }
    }

    #[test]
    fn bilinear_is_exact_on_affine_fields(
        a in -0.01f64..0.01,
        b in -0.01f64..0.01,
        c in 0.0f64..1.0,
        ox in -3.0f64..3.0,
        oy in -3.0f64..3.0,
        ps in 0.3f64..1.7,
    ) {
        let src_grid = Grid::new(0.0, 0.0, 1.0, 16, 16).unwrap();
        let src = MaskedImage::from_fn(src_grid, |x, y| a * x + b * y + c);
        let target = Grid::new(5.0 + ox, 5.0 + oy, ps, 5, 5).unwrap();
        let out = reproject_bilinear(&src, &target).unwrap();
        for r in 0..5 {
            for col in 0..5 {
                if let Some(v) = out.get(r, col) {
                    let (x, y) = target.center(r, col);
                    let expect = a * x + b * y + c;
                    prop_assert!((v - expect).abs() <= 1e-9 * expect.abs().max(1e-30));
                }
            }
        }
    }

    #[test]
    fn masks_propagate_monotonically(img in image_strategy(12, 12, true)) {
        // aggregation: a block with zero valid inputs stays invalid
        let agg = aggregate_mean(&img, 3).unwrap();
        for br in 0..4 {
            for bc in 0..4 {
                let any_valid = (br * 3..br * 3 + 3)
                    .any(|r| (bc * 3..bc * 3 + 3).any(|c| img.is_valid(r, c)));
                if !any_valid {
                    prop_assert!(!agg.is_valid(br, bc));
                }
            }
        }
        // reprojection onto the same grid: invalid stays invalid
        if img.valid_count() > 0 {
            let re = reproject_bilinear(&img, img.grid()).unwrap();
            for i in 0..img.values().len() {
                if !img.mask()[i] {
                    prop_assert!(!re.mask()[i]);
                }
            }
        }
    }

    #[test]
    fn kernel_weights_are_convex(
        sx in -1.5f64..1.5,
        sy in -1.5f64..1.5,
        sigma in 0.3f64..2.0,
    ) {
        let fine = Grid::new(0.0, 0.0, 20.0, 60, 60).unwrap();
        let params = UpscaleParams::new(sx, sy, sigma).unwrap();
        let weights = gaussian_weights(&params, (600.0, 600.0), &fine, 300.0, 3.0).unwrap();
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(weights.iter().all(|&(_, w)| w >= 0.0));
    }

    #[test]
    fn constant_fields_upscale_to_the_constant(
        value in 0.05f64..0.95,
        sx in -1.0f64..1.0,
        sy in -1.0f64..1.0,
        sigma in 0.3f64..1.8,
    ) {
        let fine = MaskedImage::constant(Grid::new(0.0, 0.0, 20.0, 60, 60).unwrap(), value);
        let coarse_grid = fine.grid().aggregated(15).unwrap();
        let params = UpscaleParams::new(sx, sy, sigma).unwrap();
        let out = upscale(&fine, &coarse_grid, &params, &UpscaleOptions::default()).unwrap();
        prop_assert!(out.valid_count() > 0);
        for (_, v) in out.valid_pixels() {
            prop_assert!((v - value).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine(
        img in image_strategy(8, 8, false),
        gain in 0.1f64..5.0,
        offset in -1.0f64..1.0,
    ) {
        let other = MaskedImage::from_fn(img.grid().clone(), |x, y| {
            0.5 + 0.2 * (0.9 * x).sin() + 0.1 * (1.3 * y).cos()
        });
        let base = match pearson(&img, &other) {
            Ok(r) => r,
            Err(_) => return Ok(()), // degenerate random draw
        };
        let scaled = img.map(|v| gain * v + offset);
        let transformed = pearson(&scaled, &other).unwrap();
        prop_assert!((base - transformed).abs() < 1e-9);
    }

    #[test]
    fn rmse_triangle_inequality(
        a in image_strategy(6, 6, false),
        b in image_strategy(6, 6, false),
        c in image_strategy(6, 6, false),
    ) {
        prop_assert!(rmse(&a, &a).unwrap() == 0.0);
        let ab = rmse(&a, &b).unwrap();
        let bc = rmse(&b, &c).unwrap();
        let ac = rmse(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn roberts_feature_shift_invariant_and_homogeneous(
        img in image_strategy(8, 8, false),
        offset in -2.0f64..2.0,
        gain in -3.0f64..3.0,
    ) {
        let f = roberts_edge_feature(&img).unwrap();
        let f_shifted = roberts_edge_feature(&img.map(|v| v + offset)).unwrap();
        let f_scaled = roberts_edge_feature(&img.map(|v| gain * v)).unwrap();
        for i in 0..f.values().len() {
            if f.mask()[i] {
                prop_assert!((f.values()[i] - f_shifted.values()[i]).abs() < 1e-12);
                prop_assert!(
                    (gain.abs() * f.values()[i] - f_scaled.values()[i]).abs() < 1e-9
                );
            }
        }
    }

    #[test]
    fn container_round_trip_is_bit_exact(
        img_a in image_strategy(5, 7, true),
        img_b in image_strategy(5, 7, true),
    ) {
        let grid = img_a.grid().clone();
        let series = ImageSeries::new(
            grid,
            BandSet::from_names(["b0"]).unwrap(),
            vec![
                SeriesEntry { date: Date::new(2023, 1, 5).unwrap(), images: vec![img_a] },
                SeriesEntry { date: Date::new(2023, 2, 5).unwrap(), images: vec![img_b] },
            ],
        )
        .unwrap();
        let bytes = write_series_bytes(&series, &RasterMeta::default()).unwrap();
        let (back, meta) = read_series_bytes(&bytes).unwrap();
        let bytes2 = write_series_bytes(&back, &meta).unwrap();
        prop_assert_eq!(bytes, bytes2);
    }
}
