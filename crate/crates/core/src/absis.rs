//! Anomaly-based satellite image standardization: a coarse image is
//! decomposed into a temporal-mean pattern plus a per-date anomaly, the
//! anomaly is transferred to the aggregated fine-resolution domain through a
//! per-pixel local regression against the best-correlated baseline date, and
//! the result is rebuilt on the fine-side pattern.

use crate::date::Date;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;
use crate::metrics::effectively_zero_variance;
use crate::resample::Resampler;
use crate::series::ImageSeries;

/// What to do at pixels whose selected predictor window has no variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    /// Fall back to the best constant predictor: slope 0, intercept set to
    /// the target window mean.
    #[default]
    ConstantMean,
    /// Mark the pixel invalid instead.
    Invalidate,
}

impl DegeneratePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            DegeneratePolicy::ConstantMean => "constant-mean",
            DegeneratePolicy::Invalidate => "invalidate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant-mean" => Ok(DegeneratePolicy::ConstantMean),
            "invalidate" => Ok(DegeneratePolicy::Invalidate),
            other => Err(Error::InvalidConfig(format!(
                "unknown degenerate-regression policy {other:?}"
            ))),
        }
    }
}

/// Configuration of the standardization pipeline.
#[derive(Debug, Clone)]
pub struct AbsisConfig {
    /// Moving-window side length (aggregated-fine pixels); odd, at least 3.
    pub window: usize,
    /// Baseline dates taken before and after the target date.
    pub baseline_before: usize,
    pub baseline_after: usize,
    /// Resampler carrying coarse anomalies onto the aggregated-fine grid.
    pub resampler: Resampler,
    pub degenerate_policy: DegeneratePolicy,
}

impl Default for AbsisConfig {
    fn default() -> Self {
        AbsisConfig {
            window: 5,
            baseline_before: 3,
            baseline_after: 3,
            resampler: Resampler::Bilinear,
            degenerate_policy: DegeneratePolicy::ConstantMean,
        }
    }
}

impl AbsisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if self.baseline_before == 0 || self.baseline_after == 0 {
            return Err(Error::InvalidConfig(
                "baseline counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Temporal-mean pattern plus per-date anomalies of one band.
///
/// At every jointly valid pixel `pattern + anomaly` reproduces the source
/// image exactly; anomalies are valid only where both the image and the
/// pattern are.
#[derive(Debug, Clone)]
pub struct AnomalyDecomposition {
    pub pattern: MaskedImage,
    pub anomalies: Vec<(Date, MaskedImage)>,
}

/// Per-pixel choice of the best-correlated baseline date for one band.
#[derive(Debug, Clone)]
pub struct SelectionMask {
    grid: Grid,
    chosen: Vec<usize>,
    best_rho: Vec<f64>,
    mask: Vec<bool>,
}

impl SelectionMask {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn chosen(&self, idx: usize) -> Option<usize> {
        self.mask[idx].then(|| self.chosen[idx])
    }

    pub fn best_rho(&self, idx: usize) -> Option<f64> {
        self.mask[idx].then(|| self.best_rho[idx])
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Selected baseline index per pixel as a raster (for diagnostics).
    pub fn to_index_image(&self) -> MaskedImage {
        MaskedImage::new(
            self.grid.clone(),
            self.chosen.iter().map(|&k| k as f64).collect(),
            self.mask.clone(),
        )
        .expect("buffers sized with the grid")
    }

    /// Best window correlation per pixel as a raster (for diagnostics).
    pub fn to_rho_image(&self) -> MaskedImage {
        MaskedImage::new(self.grid.clone(), self.best_rho.clone(), self.mask.clone())
            .expect("buffers sized with the grid")
    }
}

/// Per-pixel local regression coefficients for one band.
#[derive(Debug, Clone)]
pub struct LocalRegressionField {
    pub alpha0: MaskedImage,
    pub alpha1: MaskedImage,
    /// Pixels resolved by the degenerate policy rather than a real fit.
    pub degenerate: Vec<bool>,
}

/// Pixel-wise mean over the dates at which each pixel is valid, one output
/// image per band. A pixel is invalid only when no date observed it.
pub fn capture_pattern(series: &ImageSeries) -> Result<Vec<MaskedImage>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("cannot capture a pattern from an empty series".into()));
    }
    let n = series.grid().len();
    let mut out = Vec::with_capacity(series.band_set().len());
    for band in 0..series.band_set().len() {
        let mut sum = vec![0.0; n];
        let mut count = vec![0u32; n];
        for entry in series.entries() {
            let img = &entry.images[band];
            for (i, v) in img.valid_pixels() {
                sum[i] += v;
                count[i] += 1;
            }
        }
        let mut values = vec![0.0; n];
        let mut mask = vec![false; n];
        for i in 0..n {
            if count[i] > 0 {
                values[i] = sum[i] / count[i] as f64;
                mask[i] = true;
            }
        }
        out.push(MaskedImage::new(series.grid().clone(), values, mask)?);
    }
    Ok(out)
}

/// Subtracts a band's pattern from each entry of a series.
pub fn decompose(series: &ImageSeries, band: usize, pattern: &MaskedImage) -> Result<AnomalyDecomposition> {
    if pattern.grid() != series.grid() {
        return Err(Error::GridMismatch(
            "pattern grid differs from series grid".into(),
        ));
    }
    let mut anomalies = Vec::with_capacity(series.len());
    for entry in series.entries() {
        let anomaly = entry.images[band].zip_with(pattern, |v, p| v - p)?;
        anomalies.push((entry.date, anomaly));
    }
    Ok(AnomalyDecomposition {
        pattern: pattern.clone(),
        anomalies,
    })
}

/// Resamples every anomaly of a decomposition onto `target`.
pub fn reproject_anomalies(
    decomp: &AnomalyDecomposition,
    target: &Grid,
    resampler: Resampler,
) -> Result<Vec<(Date, MaskedImage)>> {
    decomp
        .anomalies
        .iter()
        .map(|(date, img)| Ok((*date, resampler.apply(img, target)?)))
        .collect()
}

/// Moving-window statistics of one window pair, or `None` when the window
/// leaves the image or touches an invalid pixel (complete-data rule).
#[derive(Debug, Clone, Copy)]
struct WindowStats {
    mean_a: f64,
    mean_b: f64,
    cov: f64,
    var_a: f64,
    var_b: f64,
    scale_a: f64,
    scale_b: f64,
    n: usize,
}

fn window_stats(
    a: &MaskedImage,
    b: &MaskedImage,
    row: usize,
    col: usize,
    window: usize,
) -> Option<WindowStats> {
    let half = window / 2;
    let (rows, cols) = (a.n_rows(), a.n_cols());
    if row < half || col < half || row + half >= rows || col + half >= cols {
        return None;
    }
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    let mut abs_a = 0.0;
    let mut abs_b = 0.0;
    for r in row - half..=row + half {
        for c in col - half..=col + half {
            let i = r * cols + c;
            if !a.mask()[i] || !b.mask()[i] {
                return None;
            }
            sum_a += a.values()[i];
            sum_b += b.values()[i];
            abs_a += a.values()[i].abs();
            abs_b += b.values()[i].abs();
        }
    }
    let n = window * window;
    let mean_a = sum_a / n as f64;
    let mean_b = sum_b / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for r in row - half..=row + half {
        for c in col - half..=col + half {
            let i = r * cols + c;
            let da = a.values()[i] - mean_a;
            let db = b.values()[i] - mean_b;
            cov += da * db;
            var_a += da * da;
            var_b += db * db;
        }
    }
    Some(WindowStats {
        mean_a,
        mean_b,
        cov,
        var_a,
        var_b,
        scale_a: abs_a / n as f64,
        scale_b: abs_b / n as f64,
        n,
    })
}

/// Per-pixel Pearson correlation between the `window`x`window` neighborhoods
/// of a baseline anomaly and the target anomaly.
///
/// A pixel is valid only when both windows are complete (inside the image,
/// no invalid pixel) and neither window is constant.
pub fn windowed_correlation(
    target: &MaskedImage,
    baseline: &MaskedImage,
    window: usize,
) -> Result<MaskedImage> {
    target.check_same_grid(baseline)?;
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "window must be odd and at least 3, got {window}"
        )));
    }
    let mut out = MaskedImage::empty(target.grid().clone());
    for r in 0..target.n_rows() {
        for c in 0..target.n_cols() {
            let Some(s) = window_stats(baseline, target, r, c, window) else {
                continue;
            };
            if effectively_zero_variance(s.var_a, s.scale_a, s.n)
                || effectively_zero_variance(s.var_b, s.scale_b, s.n)
            {
                continue;
            }
            out.set(r, c, s.cov / (s.var_a * s.var_b).sqrt());
        }
    }
    Ok(out)
}

/// Per-pixel argmax over per-date correlation maps; ties break toward the
/// earliest date, and a pixel is invalid only when no date has a valid
/// correlation there.
pub fn select_optimal(correlation_maps: &[MaskedImage]) -> Result<SelectionMask> {
    let first = correlation_maps
        .first()
        .ok_or_else(|| Error::EmptyInput("selection needs at least one baseline date".into()))?;
    for m in correlation_maps {
        m.check_same_grid(first)?;
    }
    let grid = first.grid().clone();
    let n = grid.len();
    let mut chosen = vec![0usize; n];
    let mut best_rho = vec![0.0; n];
    let mut mask = vec![false; n];
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (k, m) in correlation_maps.iter().enumerate() {
            if m.mask()[i] {
                let rho = m.values()[i];
                // strict improvement keeps the earliest date on ties
                if best.is_none_or(|(_, b)| rho > b) {
                    best = Some((k, rho));
                }
            }
        }
        if let Some((k, rho)) = best {
            chosen[i] = k;
            best_rho[i] = rho;
            mask[i] = true;
        }
    }
    Ok(SelectionMask {
        grid,
        chosen,
        best_rho,
        mask,
    })
}

/// Ordinary least squares of the target window on the selected baseline
/// window, per pixel: `alpha1 = cov/var`, `alpha0 = mean_t - alpha1 * mean_s`.
///
/// Output validity follows the selection and re-checks window completeness;
/// zero-variance predictors are resolved by `policy` and flagged.
pub fn fit_local_regression(
    target: &MaskedImage,
    baseline_anomalies: &[(Date, MaskedImage)],
    selection: &SelectionMask,
    window: usize,
    policy: DegeneratePolicy,
) -> Result<LocalRegressionField> {
    if target.grid() != &selection.grid {
        return Err(Error::GridMismatch(
            "selection mask grid differs from the target anomaly grid".into(),
        ));
    }
    let grid = target.grid().clone();
    let n = grid.len();
    let mut alpha0 = vec![0.0; n];
    let mut alpha1 = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut degenerate = vec![false; n];
    let cols = grid.n_cols();
    for i in 0..n {
        let Some(k) = selection.chosen(i) else {
            continue;
        };
        let predictor = &baseline_anomalies
            .get(k)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "selection refers to baseline index {k} but only {} dates supplied",
                    baseline_anomalies.len()
                ))
            })?
            .1;
        let (r, c) = (i / cols, i % cols);
        let Some(s) = window_stats(predictor, target, r, c, window) else {
            continue;
        };
        if effectively_zero_variance(s.var_a, s.scale_a, s.n) {
            match policy {
                DegeneratePolicy::ConstantMean => {
                    alpha0[i] = s.mean_b;
                    alpha1[i] = 0.0;
                    mask[i] = true;
                    degenerate[i] = true;
                }
                DegeneratePolicy::Invalidate => {}
            }
            continue;
        }
        let slope = s.cov / s.var_a;
        alpha1[i] = slope;
        alpha0[i] = s.mean_b - slope * s.mean_a;
        mask[i] = true;
    }
    Ok(LocalRegressionField {
        alpha0: MaskedImage::new(grid.clone(), alpha0, mask.clone())?,
        alpha1: MaskedImage::new(grid, alpha1, mask)?,
        degenerate,
    })
}

/// Applies the fitted coefficients to the fine-side anomaly of the selected
/// date: `alpha0 + alpha1 * fine_anomaly[selected]`, per pixel.
pub fn predict_anomaly(
    field: &LocalRegressionField,
    fine_anomalies: &[(Date, MaskedImage)],
    selection: &SelectionMask,
) -> Result<MaskedImage> {
    let grid = field.alpha0.grid().clone();
    let mut out = MaskedImage::empty(grid.clone());
    let cols = grid.n_cols();
    for i in 0..grid.len() {
        let Some(k) = selection.chosen(i) else {
            continue;
        };
        if !field.alpha0.mask()[i] {
            continue;
        }
        let anomaly = &fine_anomalies
            .get(k)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "selection refers to baseline index {k} but only {} dates supplied",
                    fine_anomalies.len()
                ))
            })?
            .1;
        if !anomaly.mask()[i] {
            continue;
        }
        let value = field.alpha0.values()[i] + field.alpha1.values()[i] * anomaly.values()[i];
        out.set(i / cols, i % cols, value);
    }
    Ok(out)
}

/// Adds the corrected anomaly back onto the aggregated fine-resolution
/// pattern.
pub fn rebuild(pattern: &MaskedImage, anomaly: &MaskedImage) -> Result<MaskedImage> {
    pattern.zip_with(anomaly, |p, a| p + a)
}

/// Standardized output for one target date plus per-band diagnostics.
#[derive(Debug, Clone)]
pub struct AbsisOutput {
    pub date: Date,
    pub baseline_dates: Vec<Date>,
    /// One standardized image per band, in series band order.
    pub images: Vec<MaskedImage>,
    pub diagnostics: Vec<BandDiagnostics>,
}

/// Intermediate products worth exporting per band.
#[derive(Debug, Clone)]
pub struct BandDiagnostics {
    pub band: String,
    pub selection: SelectionMask,
    pub alpha0: MaskedImage,
    pub alpha1: MaskedImage,
}

/// Dates used to correct `target`: `before` dates immediately preceding and
/// `after` immediately following it in `series`.
pub fn baseline_dates(
    series: &ImageSeries,
    target: Date,
    before: usize,
    after: usize,
) -> Result<Vec<Date>> {
    let pos = series
        .position(target)
        .ok_or_else(|| Error::DateNotFound(target.to_string()))?;
    if pos < before {
        return Err(Error::BaselineUnavailable {
            date: target.to_string(),
            detail: format!("needs {before} earlier dates, only {pos} available"),
        });
    }
    let remaining = series.len() - pos - 1;
    if remaining < after {
        return Err(Error::BaselineUnavailable {
            date: target.to_string(),
            detail: format!("needs {after} later dates, only {remaining} available"),
        });
    }
    Ok(series.entries()[pos - before..=pos + after]
        .iter()
        .map(|e| e.date)
        .filter(|&d| d != target)
        .collect())
}

/// Full ABSIS pipeline for one target date, applied independently per band.
///
/// The coarse series must contain the target date; both series must contain
/// every baseline date. The target's fine image, if present, is ignored
/// (treated as missing).
pub fn absis_standardize(
    coarse: &ImageSeries,
    agg_fine: &ImageSeries,
    target: Date,
    config: &AbsisConfig,
) -> Result<AbsisOutput> {
    config.validate()?;
    if coarse.band_set() != agg_fine.band_set() {
        return Err(Error::InvalidConfig(
            "coarse and aggregated-fine series must share a band set".into(),
        ));
    }
    let dates = baseline_dates(coarse, target, config.baseline_before, config.baseline_after)?;
    for d in &dates {
        if agg_fine.position(*d).is_none() {
            return Err(Error::BaselineUnavailable {
                date: target.to_string(),
                detail: format!("aggregated-fine series is missing baseline date {d}"),
            });
        }
    }

    let coarse_baseline = subset(coarse, &dates)?;
    let fine_baseline = subset(agg_fine, &dates)?;
    let target_entry = coarse.entry(target).expect("position checked above");

    let coarse_patterns = capture_pattern(&coarse_baseline)?;
    let fine_patterns = capture_pattern(&fine_baseline)?;

    let mut images = Vec::with_capacity(coarse.band_set().len());
    let mut diagnostics = Vec::with_capacity(coarse.band_set().len());
    for (band, band_name) in coarse.band_set().names().enumerate() {
        let coarse_decomp = decompose(&coarse_baseline, band, &coarse_patterns[band])?;
        let target_anomaly = target_entry.images[band]
            .zip_with(&coarse_patterns[band], |v, p| v - p)?;

        let reprojected =
            reproject_anomalies(&coarse_decomp, agg_fine.grid(), config.resampler)?;
        let target_reprojected = config
            .resampler
            .apply(&target_anomaly, agg_fine.grid())?;

        let fine_decomp = decompose(&fine_baseline, band, &fine_patterns[band])?;

        let correlation_maps = reprojected
            .iter()
            .map(|(_, a)| windowed_correlation(&target_reprojected, a, config.window))
            .collect::<Result<Vec<_>>>()?;
        let selection = select_optimal(&correlation_maps)?;

        let field = fit_local_regression(
            &target_reprojected,
            &reprojected,
            &selection,
            config.window,
            config.degenerate_policy,
        )?;
        let predicted = predict_anomaly(&field, &fine_decomp.anomalies, &selection)?;
        let rebuilt = rebuild(&fine_patterns[band], &predicted)?;

        images.push(rebuilt);
        diagnostics.push(BandDiagnostics {
            band: band_name.to_string(),
            selection,
            alpha0: field.alpha0,
            alpha1: field.alpha1,
        });
    }

    Ok(AbsisOutput {
        date: target,
        baseline_dates: dates,
        images,
        diagnostics,
    })
}

fn subset(series: &ImageSeries, dates: &[Date]) -> Result<ImageSeries> {
    let entries = dates
        .iter()
        .map(|d| {
            series
                .entry(*d)
                .cloned()
                .ok_or_else(|| Error::DateNotFound(d.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    ImageSeries::new(series.grid().clone(), series.band_set().clone(), entries)
}
