//! Deterministic synthetic multi-sensor scenes with known blur, shift, and
//! temporal-evolution ground truth, used as the oracle for parameter
//! recovery and standardization tests.

use crate::band::BandSet;
use crate::date::Date;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;
use crate::psf::{upscale, UpscaleOptions, UpscaleParams};
use crate::series::{ImageSeries, SeriesEntry};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Spatial structure of the underlying scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseField {
    /// Sum of random sinusoids; smooth and everywhere non-constant.
    Smooth { components: usize },
    /// Anti-aliased discs and rectangles on a smooth background; disc sizes
    /// near the coarse pixel scale provoke aliasing under plain averaging.
    Shapes { discs: usize, rects: usize },
    /// A few straight step edges, for edge-metric scenes.
    StepEdges { edges: usize },
}

impl Default for BaseField {
    fn default() -> Self {
        BaseField::Smooth { components: 8 }
    }
}

/// Complete recipe for one synthetic scene; the seed fixes every output
/// byte.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub seed: u64,
    pub fine_rows: usize,
    pub fine_cols: usize,
    pub fine_pixel_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    /// Aggregation factor between the fine grid and the coarse grid.
    pub factor: usize,
    pub bands: usize,
    pub base_field: BaseField,
    /// True upscaling operator per band (shift-x, shift-y, sigma).
    pub true_params: Vec<UpscaleParams>,
    pub start_date: Date,
    pub date_step_days: i64,
    /// Per-date global affine evolution; lengths define the date count.
    pub gains: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Localized constant-valued change patches added per date.
    pub change_patches: usize,
    pub patch_magnitude: f64,
    /// Additive Gaussian noise, in reflectance units.
    pub fine_noise_sd: f64,
    pub coarse_noise_sd: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            fine_rows: 300,
            fine_cols: 300,
            fine_pixel_size: 20.0,
            origin_x: 0.0,
            origin_y: 0.0,
            factor: 15,
            bands: 1,
            base_field: BaseField::default(),
            true_params: vec![UpscaleParams::identity()],
            start_date: Date::new(2023, 1, 1).expect("valid date"),
            date_step_days: 10,
            gains: vec![1.0],
            offsets: vec![0.0],
            change_patches: 0,
            patch_magnitude: 0.1,
            fine_noise_sd: 0.0,
            coarse_noise_sd: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 {
            return Err(Error::InvalidConfig("scene needs at least one band".into()));
        }
        if self.true_params.len() != self.bands {
            return Err(Error::InvalidConfig(format!(
                "got {} parameter triples for {} bands",
                self.true_params.len(),
                self.bands
            )));
        }
        for p in &self.true_params {
            p.validate()?;
        }
        if self.gains.is_empty() || self.gains.len() != self.offsets.len() {
            return Err(Error::InvalidConfig(
                "gains and offsets must be non-empty and equally long".into(),
            ));
        }
        if self.gains.iter().any(|&g| g <= 0.0 || g.is_nan()) {
            return Err(Error::InvalidConfig("gains must be positive".into()));
        }
        if self.fine_noise_sd < 0.0 || self.coarse_noise_sd < 0.0 {
            return Err(Error::InvalidConfig("noise levels must be non-negative".into()));
        }
        if self.factor == 0
            || !self.fine_rows.is_multiple_of(self.factor)
            || !self.fine_cols.is_multiple_of(self.factor)
        {
            return Err(Error::dimension_mismatch(
                "fine dimensions must be divisible by the aggregation factor",
                format!("multiple of {}", self.factor),
                format!("{}x{}", self.fine_rows, self.fine_cols),
            ));
        }
        if self.date_step_days < 1 {
            return Err(Error::InvalidConfig("date step must be at least one day".into()));
        }
        Ok(())
    }

    pub fn n_dates(&self) -> usize {
        self.gains.len()
    }

    pub fn fine_grid(&self) -> Result<Grid> {
        Grid::new(
            self.origin_x,
            self.origin_y,
            self.fine_pixel_size,
            self.fine_rows,
            self.fine_cols,
        )
    }

    pub fn dates(&self) -> Vec<Date> {
        (0..self.n_dates())
            .map(|k| self.start_date.add_days(self.date_step_days * k as i64))
            .collect()
    }
}

/// Standard normal deviate via Box-Muller on the scene RNG.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn generate_base(spec: &SceneSpec, grid: &Grid, rng: &mut ChaCha8Rng) -> MaskedImage {
    let (x0, y0, x1, y1) = grid.extent();
    let (w, h) = (x1 - x0, y1 - y0);
    match spec.base_field {
        BaseField::Smooth { components } => {
            // A ladder of radial frequencies from scene scale up to ~2.5
            // coarse pixels per cycle, with random orientations: low
            // frequencies anchor the blur estimate, high ones the shifts.
            let n = components.max(1);
            let k_max = (grid.n_cols().min(grid.n_rows()) as f64 / (2.5 * spec.factor as f64))
                .max(2.0);
            let comps: Vec<(f64, f64, f64, f64)> = (0..n)
                .map(|i| {
                    let k_radial = k_max * (i + 1) as f64 / n as f64;
                    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
                    let phase: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                    let amp: f64 = rng.random_range(0.5..1.0);
                    (k_radial * theta.cos(), k_radial * theta.sin(), phase, amp)
                })
                .collect();
            let total_amp: f64 = comps.iter().map(|c| c.3).sum();
            let scale = 0.35 / total_amp;
            MaskedImage::from_fn(grid.clone(), move |x, y| {
                let mut v = 0.5;
                for &(kx, ky, phase, amp) in &comps {
                    let t = 2.0 * std::f64::consts::PI
                        * (kx * (x - x0) / w + ky * (y - y0) / h)
                        + phase;
                    v += scale * amp * t.sin();
                }
                v
            })
        }
        BaseField::Shapes { discs, rects } => {
            let coarse_px = spec.factor as f64 * spec.fine_pixel_size;
            let mut background_rng = rng.clone();
            let background = generate_base(
                &SceneSpec {
                    base_field: BaseField::Smooth { components: 4 },
                    ..spec.clone()
                },
                grid,
                &mut background_rng,
            );
            *rng = background_rng;
            let disc_params: Vec<(f64, f64, f64, f64)> = (0..discs)
                .map(|_| {
                    let cx = rng.random_range(x0..x1);
                    let cy = rng.random_range(y0..y1);
                    // radius near the coarse pixel scale provokes aliasing
                    let radius = rng.random_range(0.6..1.6) * coarse_px;
                    let level = rng.random_range(-0.25..0.25);
                    (cx, cy, radius, level)
                })
                .collect();
            let rect_params: Vec<(f64, f64, f64, f64, f64)> = (0..rects)
                .map(|_| {
                    let cx = rng.random_range(x0..x1);
                    let cy = rng.random_range(y0..y1);
                    let half_w = rng.random_range(1.0..4.0) * coarse_px;
                    let half_h = rng.random_range(1.0..4.0) * coarse_px;
                    let level = rng.random_range(-0.2..0.2);
                    (cx, cy, half_w, half_h, level)
                })
                .collect();
            let aa = spec.fine_pixel_size; // one-pixel anti-aliasing ramp
            background.map_with_centers(grid, move |x, y, v| {
                let mut out = v;
                for &(cx, cy, radius, level) in &disc_params {
                    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    out += level * smoothstep((radius - d) / aa);
                }
                for &(cx, cy, hw, hh, level) in &rect_params {
                    let inside_x = smoothstep((hw - (x - cx).abs()) / aa);
                    let inside_y = smoothstep((hh - (y - cy).abs()) / aa);
                    out += level * inside_x * inside_y;
                }
                out
            })
        }
        BaseField::StepEdges { edges } => {
            let edge_params: Vec<(bool, f64, f64)> = (0..edges.max(1))
                .map(|_| {
                    let vertical = rng.random_range(0.0..1.0) < 0.5;
                    let pos = rng.random_range(0.2..0.8);
                    let height = rng.random_range(0.1..0.3);
                    (vertical, pos, height)
                })
                .collect();
            MaskedImage::from_fn(grid.clone(), move |x, y| {
                let mut v = 0.3;
                for &(vertical, pos, height) in &edge_params {
                    let t = if vertical {
                        (x - x0) / w
                    } else {
                        (y - y0) / h
                    };
                    if t > pos {
                        v += height;
                    }
                }
                v
            })
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl MaskedImage {
    /// Like [`MaskedImage::map`] but with the pixel center available.
    fn map_with_centers(&self, grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> MaskedImage {
        let mut out = self.clone();
        for r in 0..grid.n_rows() {
            for c in 0..grid.n_cols() {
                let (x, y) = grid.center(r, c);
                let i = grid.index(r, c);
                if self.mask()[i] {
                    out.set(r, c, f(x, y, self.values()[i]));
                }
            }
        }
        out
    }
}

/// Generates the fine-resolution series: date `k` is
/// `gain_k * base + offset_k + change patches + noise`, fully deterministic
/// under the scene seed.
pub fn generate_fine_series(spec: &SceneSpec) -> Result<ImageSeries> {
    spec.validate()?;
    let grid = spec.fine_grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let bases: Vec<MaskedImage> = (0..spec.bands)
        .map(|_| generate_base(spec, &grid, &mut rng))
        .collect();

    let (x0, y0, x1, y1) = grid.extent();
    let dates = spec.dates();
    let mut entries = Vec::with_capacity(spec.n_dates());
    for (k, date) in dates.iter().enumerate() {
        let mut images = Vec::with_capacity(spec.bands);
        for base in &bases {
            let mut img = base.map(|v| spec.gains[k] * v + spec.offsets[k]);
            for _ in 0..spec.change_patches {
                let cx = rng.random_range(x0..x1);
                let cy = rng.random_range(y0..y1);
                let hw = rng.random_range(0.05..0.2) * (x1 - x0);
                let hh = rng.random_range(0.05..0.2) * (y1 - y0);
                let level = rng.random_range(-1.0..1.0) * spec.patch_magnitude;
                img = img.map_with_centers(&grid, |x, y, v| {
                    if (x - cx).abs() < hw && (y - cy).abs() < hh {
                        v + level
                    } else {
                        v
                    }
                });
            }
            if spec.fine_noise_sd > 0.0 {
                let mut values = img.values().to_vec();
                for v in &mut values {
                    *v += spec.fine_noise_sd * normal(&mut rng);
                }
                img = MaskedImage::from_values(grid.clone(), values)?;
            }
            images.push(img);
        }
        entries.push(SeriesEntry {
            date: *date,
            images,
        });
    }
    ImageSeries::new(grid, BandSet::numbered(spec.bands)?, entries)
}

/// Applies the scene's true per-band upscaling operator to every entry and
/// adds coarse-level noise, producing the matching coarse-resolution series.
pub fn degrade_to_coarse(spec: &SceneSpec, fine: &ImageSeries) -> Result<ImageSeries> {
    spec.validate()?;
    let coarse_grid = fine.grid().aggregated(spec.factor)?;
    let opts = UpscaleOptions::default();
    // separate stream so coarse noise does not depend on how the fine series
    // was consumed
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut entries = Vec::with_capacity(fine.len());
    for entry in fine.entries() {
        let mut images = Vec::with_capacity(fine.band_set().len());
        for (band, img) in entry.images.iter().enumerate() {
            let mut coarse = upscale(img, &coarse_grid, &spec.true_params[band], &opts)?;
            if spec.coarse_noise_sd > 0.0 {
                let mut values = coarse.values().to_vec();
                for (i, v) in values.iter_mut().enumerate() {
                    let noise = spec.coarse_noise_sd * normal(&mut rng);
                    if coarse.mask()[i] {
                        *v += noise;
                    }
                }
                coarse = MaskedImage::new(coarse_grid.clone(), values, coarse.mask().to_vec())?;
            }
            images.push(coarse);
        }
        entries.push(SeriesEntry {
            date: entry.date,
            images,
        });
    }
    ImageSeries::new(coarse_grid, fine.band_set().clone(), entries)
}

/// Block-averages every entry of a series, producing the aggregated
/// fine-resolution series.
pub fn aggregate_series(series: &ImageSeries, factor: usize) -> Result<ImageSeries> {
    let grid = series.grid().aggregated(factor)?;
    series.map_images(grid, |img| crate::resample::aggregate_mean(img, factor))
}

/// Removes one date for scoring; see [`ImageSeries::holdout`].
pub fn holdout(series: &ImageSeries, date: Date) -> Result<(ImageSeries, SeriesEntry)> {
    series.holdout(date)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::aggregate_mean;
    use crate::search::{grid_search_shift, pairwise_objective, SearchOptions};

    fn small_spec() -> SceneSpec {
        SceneSpec {
            seed: 7,
            fine_rows: 150,
            fine_cols: 150,
            factor: 15,
            gains: vec![1.0, 1.1, 0.95],
            offsets: vec![0.0, 0.01, -0.02],
            ..SceneSpec::default()
        }
    }

    #[test]
    fn degenerate_temporal_model_repeats_the_base() {
        let spec = SceneSpec {
            gains: vec![1.0, 1.0, 1.0],
            offsets: vec![0.0, 0.0, 0.0],
            ..small_spec()
        };
        let series = generate_fine_series(&spec).unwrap();
        let first = &series.entries()[0].images[0];
        for entry in series.entries() {
            assert_eq!(&entry.images[0], first);
        }
    }

    #[test]
    fn same_seed_is_byte_identical_different_seed_differs() {
        let spec = SceneSpec {
            change_patches: 2,
            fine_noise_sd: 0.005,
            ..small_spec()
        };
        let a = generate_fine_series(&spec).unwrap();
        let b = generate_fine_series(&spec).unwrap();
        assert_eq!(a, b);

        let c = generate_fine_series(&SceneSpec { seed: 8, ..spec }).unwrap();
        let pixels_differ = a.entries()[0].images[0]
            .values()
            .iter()
            .zip(c.entries()[0].images[0].values())
            .any(|(x, y)| x != y);
        assert!(pixels_differ);
    }

    #[test]
    fn forward_model_scores_one_at_truth() {
        let truth = UpscaleParams::new(0.4, -0.6, 1.2).unwrap();
        let spec = SceneSpec {
            true_params: vec![truth],
            ..small_spec()
        };
        let fine = generate_fine_series(&spec).unwrap();
        let coarse = degrade_to_coarse(&spec, &fine).unwrap();
        let rho = pairwise_objective(
            &fine.entries()[0].images[0],
            &coarse.entries()[0].images[0],
            &truth,
            &UpscaleOptions::default(),
        )
        .unwrap();
        assert!((rho - 1.0).abs() < 1e-9, "rho {rho}");
    }

    #[test]
    fn shift_grid_recovers_the_scene_shift() {
        let truth = UpscaleParams::new(1.0, -2.0, 1.0).unwrap();
        let spec = SceneSpec {
            seed: 21,
            fine_rows: 150,
            fine_cols: 150,
            factor: 5,
            true_params: vec![truth],
            ..SceneSpec::default()
        };
        let fine = generate_fine_series(&spec).unwrap();
        let coarse = degrade_to_coarse(&spec, &fine).unwrap();
        let out = grid_search_shift(
            &fine.entries()[0].images[0],
            &coarse.entries()[0].images[0],
            &UpscaleParams::identity(),
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!((out.params.shift_x, out.params.shift_y), (1.0, -2.0));
    }

    #[test]
    fn holdout_round_trips() {
        let spec = small_spec();
        let series = generate_fine_series(&spec).unwrap();
        let d = series.entries()[1].date;
        let (reduced, held) = holdout(&series, d).unwrap();
        assert_eq!(reduced.len(), series.len() - 1);
        assert_eq!(held, series.entries()[1]);
        assert_eq!(reduced.insert(held).unwrap(), series);
        assert!(holdout(&series, Date::new(1999, 1, 1).unwrap()).is_err());
    }

    /// Naive DFT energy at spatial frequencies above half the Nyquist band,
    /// in either axis. Slow and direct on purpose.
    fn high_frequency_energy(img: &MaskedImage) -> f64 {
        let n = img.n_rows();
        assert_eq!(n, img.n_cols());
        let v = img.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let mut energy = 0.0;
        for fr in 0..n {
            for fc in 0..n {
                let kr = fr.min(n - fr);
                let kc = fc.min(n - fc);
                if kr.max(kc) <= n / 4 {
                    continue;
                }
                let mut re = 0.0;
                let mut im = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        let angle = -2.0 * std::f64::consts::PI
                            * (fr as f64 * r as f64 + fc as f64 * c as f64)
                            / n as f64;
                        let x = v[r * n + c] - mean;
                        re += x * angle.cos();
                        im += x * angle.sin();
                    }
                }
                energy += re * re + im * im;
            }
        }
        energy
    }

    /// Fully valid interior crop, dropping `margin` pixels per side.
    fn interior(img: &MaskedImage, margin: usize) -> MaskedImage {
        let (rows, cols) = (img.n_rows() - 2 * margin, img.n_cols() - 2 * margin);
        let ps = img.grid().pixel_size();
        let (ox, oy) = img.grid().origin();
        let grid = Grid::new(
            ox + margin as f64 * ps,
            oy + margin as f64 * ps,
            ps,
            rows,
            cols,
        )
        .unwrap();
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = img
                    .get(r + margin, c + margin)
                    .expect("interior pixel must be valid");
                values.push(v);
            }
        }
        MaskedImage::from_values(grid, values).unwrap()
    }

    #[test]
    fn aliasing_scene_box_average_keeps_more_high_frequency_than_psf() {
        let spec = SceneSpec {
            seed: 5,
            fine_rows: 200,
            fine_cols: 200,
            factor: 5,
            base_field: BaseField::Shapes { discs: 60, rects: 0 },
            true_params: vec![UpscaleParams::identity()],
            ..SceneSpec::default()
        };
        let fine = generate_fine_series(&spec).unwrap();
        let img = &fine.entries()[0].images[0];
        let boxed = aggregate_mean(img, 5).unwrap();
        let gauss = upscale(
            img,
            boxed.grid(),
            &UpscaleParams::identity(),
            &UpscaleOptions::default(),
        )
        .unwrap();
        // compare on a shared fully valid interior
        let e_box = high_frequency_energy(&interior(&boxed, 6));
        let e_gauss = high_frequency_energy(&interior(&gauss, 6));
        assert!(
            e_box > e_gauss,
            "box energy {e_box} vs gaussian energy {e_gauss}"
        );
    }

    #[test]
    fn increasing_sigma_strictly_reduces_high_frequency_energy() {
        let spec = SceneSpec {
            seed: 11,
            fine_rows: 200,
            fine_cols: 200,
            factor: 5,
            base_field: BaseField::Shapes { discs: 35, rects: 8 },
            ..SceneSpec::default()
        };
        let fine = generate_fine_series(&spec).unwrap();
        let img = &fine.entries()[0].images[0];
        let cg = img.grid().aggregated(5).unwrap();
        // sigma = 2 invalidates a 6-pixel ring; crop it off everywhere
        let mut last = f64::INFINITY;
        for sigma in [0.6, 1.0, 1.5, 2.0] {
            let p = UpscaleParams::new(0.0, 0.0, sigma).unwrap();
            let coarse = upscale(img, &cg, &p, &UpscaleOptions::default()).unwrap();
            let energy = high_frequency_energy(&interior(&coarse, 6));
            assert!(energy < last, "sigma {sigma}: {energy} !< {last}");
            last = energy;
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SceneSpec { bands: 0, ..small_spec() }.validate().is_err());
        assert!(SceneSpec { gains: vec![], offsets: vec![], ..small_spec() }
            .validate()
            .is_err());
        assert!(SceneSpec { gains: vec![-1.0, 1.0], offsets: vec![0.0, 0.0], ..small_spec() }
            .validate()
            .is_err());
        assert!(SceneSpec { factor: 7, ..small_spec() }.validate().is_err());
        assert!(SceneSpec { fine_noise_sd: -0.1, ..small_spec() }
            .validate()
            .is_err());
    }
}
