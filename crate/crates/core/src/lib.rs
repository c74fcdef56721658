//! Standardization of multi-sensor satellite image time series.
//!
//! Two complementary routes make a coarse-resolution series and a
//! fine-resolution series comparable:
//!
//! - [`psf`]/[`search`]: degrade the fine images onto the coarse support by
//!   simulating the coarse sensor's point spread function with a shifted
//!   Gaussian kernel, fitting blur and co-registration shifts per band by
//!   greedy correlation maximization (with a sub-pixel refinement stage and
//!   a generalized multi-date variant).
//! - [`absis`]: sharpen a coarse image toward the aggregated fine domain by
//!   splitting series into temporal-mean patterns plus per-date anomalies
//!   and transferring the target anomaly through per-pixel local regression
//!   on the best-correlated baseline date.
//!
//! [`metrics`] scores results (Pearson correlation, RMSE, Robert's Edge
//! spatial accuracy), [`synth`] generates seeded scenes with known ground
//! truth, and [`io`] defines the file interchange formats. Everything is
//! built on the masked raster types of [`grid`], [`image`], and [`series`].

pub mod absis;
pub mod band;
pub mod date;
pub mod error;
pub mod grid;
pub mod image;
pub mod io;
pub mod metrics;
pub mod psf;
pub mod resample;
pub mod search;
pub mod series;
pub mod synth;

pub use band::{Band, BandSet};
pub use date::Date;
pub use error::{Error, Result};
pub use grid::Grid;
pub use image::MaskedImage;
pub use psf::{UpscaleOptions, UpscaleParams};
pub use resample::Resampler;
pub use series::{ImageSeries, SeriesEntry};
