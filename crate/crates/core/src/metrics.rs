//! Evaluation metrics: Pearson correlation, RMSE, and the Robert's Edge
//! spatial accuracy score, with band averaging.

use crate::date::Date;
use crate::error::{Error, Result};
use crate::image::MaskedImage;

/// Sample Pearson correlation over jointly valid pixels.
///
/// Requires at least 3 jointly valid pixels and nonzero variance on both
/// sides; degenerate inputs yield an undefined-metric error so searches can
/// treat them as rejected candidates.
pub fn pearson(a: &MaskedImage, b: &MaskedImage) -> Result<f64> {
    a.check_same_grid(b)?;
    let mut n = 0usize;
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    let mut abs_a = 0.0;
    let mut abs_b = 0.0;
    for i in 0..a.values().len() {
        if a.mask()[i] && b.mask()[i] {
            sum_a += a.values()[i];
            sum_b += b.values()[i];
            abs_a += a.values()[i].abs();
            abs_b += b.values()[i].abs();
            n += 1;
        }
    }
    if n < 3 {
        return Err(Error::UndefinedMetric(format!(
            "need at least 3 jointly valid pixels, got {n}"
        )));
    }
    let mean_a = sum_a / n as f64;
    let mean_b = sum_b / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..a.values().len() {
        if a.mask()[i] && b.mask()[i] {
            let da = a.values()[i] - mean_a;
            let db = b.values()[i] - mean_b;
            cov += da * db;
            var_a += da * da;
            var_b += db * db;
        }
    }
    if effectively_zero_variance(var_a, abs_a / n as f64, n)
        || effectively_zero_variance(var_b, abs_b / n as f64, n)
    {
        return Err(Error::UndefinedMetric(
            "zero variance on at least one side".into(),
        ));
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// A variance sum this far below the value scale is summation noise from a
/// constant signal, not real spread.
pub(crate) fn effectively_zero_variance(var_sum: f64, abs_scale: f64, n: usize) -> bool {
    let floor = abs_scale * 1e-12;
    var_sum <= n as f64 * floor * floor
}

/// Root mean square difference over jointly valid pixels.
pub fn rmse(pred: &MaskedImage, reference: &MaskedImage) -> Result<f64> {
    pred.check_same_grid(reference)?;
    let mut n = 0usize;
    let mut sum_sq = 0.0;
    for i in 0..pred.values().len() {
        if pred.mask()[i] && reference.mask()[i] {
            let d = pred.values()[i] - reference.values()[i];
            sum_sq += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "no jointly valid pixels to compare".into(),
        ));
    }
    Ok((sum_sq / n as f64).sqrt())
}

/// Robert's cross gradient magnitude over the forward 2x2 neighborhood:
/// `sqrt((v[r,c] - v[r+1,c+1])^2 + (v[r+1,c] - v[r,c+1])^2)`.
///
/// The feature is valid only where all four pixels are valid; the last row
/// and column are always invalid.
pub fn roberts_edge_feature(img: &MaskedImage) -> Result<MaskedImage> {
    let (rows, cols) = (img.n_rows(), img.n_cols());
    if rows < 2 || cols < 2 {
        return Err(Error::dimension_mismatch(
            "Robert's cross needs a 2x2 neighborhood",
            "at least 2x2",
            format!("{rows}x{cols}"),
        ));
    }
    let v = img.values();
    let m = img.mask();
    let mut out = MaskedImage::empty(img.grid().clone());
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let i00 = r * cols + c;
            let i01 = i00 + 1;
            let i10 = i00 + cols;
            let i11 = i10 + 1;
            if m[i00] && m[i01] && m[i10] && m[i11] {
                let d1 = v[i00] - v[i11];
                let d2 = v[i10] - v[i01];
                out.set(r, c, (d1 * d1 + d2 * d2).sqrt());
            }
        }
    }
    Ok(out)
}

/// Spatial accuracy score comparing edge features of a prediction against a
/// reference.
///
/// Both feature maps are computed with [`roberts_edge_feature`]; pixels where
/// the predicted feature exceeds its own 90th percentile (nearest-rank, over
/// valid predicted-feature pixels) are scored with the normalized difference
/// `(pred_feature - ref_feature) / (pred_feature + ref_feature)` and averaged.
/// Zero-denominator pixels are excluded. Negative scores mean the prediction
/// under-represents the reference's edges (over-smoothing); positive scores
/// mean over-sharpening.
pub fn edge_accuracy(reference: &MaskedImage, prediction: &MaskedImage) -> Result<f64> {
    reference.check_same_grid(prediction)?;
    let s_ref = roberts_edge_feature(reference)?;
    let s_pred = roberts_edge_feature(prediction)?;

    let threshold = percentile_nearest_rank(
        s_pred.valid_pixels().map(|(_, v)| v),
        90.0,
    )
    .ok_or_else(|| Error::UndefinedMetric("predicted feature map has no valid pixels".into()))?;

    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, sp) in s_pred.valid_pixels() {
        if sp <= threshold || !s_ref.mask()[i] {
            continue;
        }
        let sr = s_ref.values()[i];
        let denom = sp + sr;
        if denom == 0.0 {
            continue; // both features flat: carries no sharpness information
        }
        sum += (sp - sr) / denom;
        n += 1;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "no pixels above the 90th percentile of the predicted feature".into(),
        ));
    }
    Ok(sum / n as f64)
}

/// Nearest-rank percentile of an unsorted value stream.
pub fn percentile_nearest_rank(values: impl Iterator<Item = f64>, pct: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
    let rank = ((pct / 100.0) * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

/// Arithmetic mean across bands.
pub fn band_average(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean of absolute values, as used for Edge summary rows.
pub fn band_average_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}

/// Which metric a report row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Rho,
    Rmse,
    Edge,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Rho => "rho",
            MetricKind::Rmse => "rmse",
            MetricKind::Edge => "edge",
        }
    }

    pub fn compute(&self, prediction: &MaskedImage, reference: &MaskedImage) -> Result<f64> {
        match self {
            MetricKind::Rho => pearson(prediction, reference),
            MetricKind::Rmse => rmse(prediction, reference),
            MetricKind::Edge => edge_accuracy(reference, prediction),
        }
    }
}

/// Per-band metric values for one comparison, with provenance.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub method: String,
    pub date: Option<Date>,
    pub metric: MetricKind,
    pub per_band: Vec<(String, f64)>,
    pub prediction_id: String,
    pub reference_id: String,
}

impl MetricReport {
    pub fn band_average(&self) -> f64 {
        band_average(&self.per_band.iter().map(|(_, v)| *v).collect::<Vec<_>>())
    }

    pub fn band_average_abs(&self) -> f64 {
        band_average_abs(&self.per_band.iter().map(|(_, v)| *v).collect::<Vec<_>>())
    }

    /// CSV rows `date,method,band,metric,value`; band averages appear as the
    /// pseudo-bands `mean` and (for edge) `mean-abs`.
    pub fn to_csv_rows(&self) -> String {
        let date = self
            .date
            .map(|d| d.to_string())
            .unwrap_or_else(|| "-".into());
        let mut out = String::new();
        for (band, value) in &self.per_band {
            out.push_str(&format!(
                "{date},{},{band},{},{value:.10}\n",
                self.method,
                self.metric.name()
            ));
        }
        out.push_str(&format!(
            "{date},{},mean,{},{:.10}\n",
            self.method,
            self.metric.name(),
            self.band_average()
        ));
        if self.metric == MetricKind::Edge {
            out.push_str(&format!(
                "{date},{},mean-abs,{},{:.10}\n",
                self.method,
                self.metric.name(),
                self.band_average_abs()
            ));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "date,method,band,metric,value";
}

/// Compact aligned table for a batch of reports, one row per band.
pub fn report_table(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for report in reports {
        let date = report
            .date
            .map(|d| d.to_string())
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{} [{}] {} vs {}\n",
            report.metric.name(),
            report.method,
            report.prediction_id,
            report.reference_id
        ));
        out.push_str(&format!("{:<12} {:>12}\n", "band", date));
        for (band, value) in &report.per_band {
            out.push_str(&format!("{band:<12} {value:>12.4}\n"));
        }
        out.push_str(&format!("{:<12} {:>12.4}\n", "mean", report.band_average()));
        if report.metric == MetricKind::Edge {
            out.push_str(&format!(
                "{:<12} {:>12.4}\n",
                "mean(|.|)",
                report.band_average_abs()
            ));
        }
        out.push('\n');
    }
    out
}
