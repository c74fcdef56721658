//! Shared fixtures for the benchmark suite.

use stifprep::psf::UpscaleParams;
use stifprep::synth::{degrade_to_coarse, generate_fine_series, SceneSpec};
use stifprep::{ImageSeries, MaskedImage};

/// Full-scale single-date pair: 300x300 fine at factor 15 (20x20 coarse).
pub fn full_scale_pair() -> (MaskedImage, MaskedImage) {
    let spec = SceneSpec {
        seed: 42,
        fine_rows: 300,
        fine_cols: 300,
        factor: 15,
        true_params: vec![UpscaleParams::new(0.5, -0.3, 1.2).unwrap()],
        ..SceneSpec::default()
    };
    let fine = generate_fine_series(&spec).expect("valid spec");
    let coarse = degrade_to_coarse(&spec, &fine).expect("valid spec");
    (
        fine.entries()[0].images[0].clone(),
        coarse.entries()[0].images[0].clone(),
    )
}

/// Seven-date coarse and aggregated-fine series on a 30x30 grid.
pub fn absis_series() -> (ImageSeries, ImageSeries) {
    let spec = SceneSpec {
        seed: 23,
        fine_rows: 150,
        fine_cols: 150,
        factor: 5,
        true_params: vec![UpscaleParams::new(0.3, -0.2, 1.1).unwrap()],
        gains: vec![1.0, 1.06, 0.95, 1.02, 0.9, 1.08, 0.98],
        offsets: vec![0.0, 0.01, -0.02, 0.005, 0.0, -0.01, 0.02],
        change_patches: 2,
        patch_magnitude: 0.06,
        ..SceneSpec::default()
    };
    let fine = generate_fine_series(&spec).expect("valid spec");
    let coarse = degrade_to_coarse(&spec, &fine).expect("valid spec");
    let agg = stifprep::synth::aggregate_series(&fine, 5).expect("divisible dims");
    (coarse, agg)
}
