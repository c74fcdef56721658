//! Upscaling parameter estimation: correlation objective, sigma/shift grid
//! searches, greedy joint fitting with sub-pixel refinement, and the
//! generalized (multi-pair) variant with leave-one-out evaluation.
//!
//! Shifts and sigma move on a 0.1-step lattice held as integer tenths, so
//! repeated runs produce identical parameter values with no drift.

use crate::error::{Error, Result};
use crate::image::MaskedImage;
use crate::metrics::pearson;
use crate::psf::{upscale, UpscaleOptions, UpscaleParams};
use std::fmt;

/// Which stage of the search produced a trace step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchPhase {
    PixelLevel,
    SubPixel,
}

impl fmt::Display for SearchPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchPhase::PixelLevel => write!(f, "pixel-level"),
            SearchPhase::SubPixel => write!(f, "sub-pixel"),
        }
    }
}

/// One objective evaluation; `rho` is NaN when the objective was undefined
/// at the candidate (zero variance or too little joint support).
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub iteration: usize,
    pub phase: SearchPhase,
    pub params: UpscaleParams,
    pub rho: f64,
    pub accepted: bool,
}

/// Audit log of a parameter search: every evaluation in order, plus any
/// warnings (for example a shift search stopped at its expansion cap).
#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    pub steps: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

impl SearchTrace {
    fn record(&mut self, phase: SearchPhase, params: UpscaleParams, rho: Option<f64>) -> usize {
        let iteration = self.steps.len();
        self.steps.push(TraceStep {
            iteration,
            phase,
            params,
            rho: rho.unwrap_or(f64::NAN),
            accepted: false,
        });
        iteration
    }

    fn accept(&mut self, iteration: usize) {
        self.steps[iteration].accepted = true;
    }

    /// Objectives of accepted steps, in order.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.rho)
            .collect()
    }

    /// True when every accepted step strictly improves on the previous one.
    pub fn is_strictly_increasing(&self) -> bool {
        self.accepted_objectives().windows(2).all(|w| w[1] > w[0])
    }

}

/// Search configuration; the defaults match the published procedure.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub upscale: UpscaleOptions,
    /// Sigma grid for [`grid_search_sigma`], inclusive, in coarse pixels.
    pub sigma_grid_min: f64,
    pub sigma_grid_max: f64,
    /// Initial half-width of the whole-pixel shift grid search.
    pub shift_window: i64,
    /// Hard cap on the expanded shift window half-width.
    pub shift_cap: i64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            upscale: UpscaleOptions::default(),
            sigma_grid_min: 0.4,
            sigma_grid_max: 2.0,
            shift_window: 2,
            shift_cap: 8,
        }
    }
}

/// Point on the 0.1-step search lattice, stored in integer tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct LatticePoint {
    x: i64,
    y: i64,
    sigma: i64,
}

impl LatticePoint {
    fn from_params(p: &UpscaleParams) -> Self {
        LatticePoint {
            x: (p.shift_x * 10.0).round() as i64,
            y: (p.shift_y * 10.0).round() as i64,
            sigma: (p.sigma * 10.0).round() as i64,
        }
    }

    fn params(&self) -> UpscaleParams {
        UpscaleParams {
            shift_x: self.x as f64 / 10.0,
            shift_y: self.y as f64 / 10.0,
            sigma: self.sigma as f64 / 10.0,
        }
    }

    fn offset(&self, dx: i64, dy: i64, dsigma: i64) -> Option<LatticePoint> {
        let sigma = self.sigma + dsigma;
        if sigma < 1 {
            // a kernel this narrow is degenerate; skip the move
            return None;
        }
        Some(LatticePoint {
            x: self.x + dx,
            y: self.y + dy,
            sigma,
        })
    }
}

/// Pixel-level greedy moves: whole-pixel shifts and 0.1 sigma steps.
const PIXEL_MOVES: [(i64, i64, i64); 6] = [
    (10, 0, 0),
    (-10, 0, 0),
    (0, 10, 0),
    (0, -10, 0),
    (0, 0, 1),
    (0, 0, -1),
];

/// Sub-pixel moves: 0.1-pixel shifts, sigma held fixed.
const SUBPIXEL_MOVES: [(i64, i64, i64); 4] = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)];

/// Result of a parameter search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub params: UpscaleParams,
    pub objective: f64,
    pub trace: SearchTrace,
}

/// Pearson correlation between `coarse` and `fine` upscaled with `params`,
/// over pixels valid in both.
pub fn pairwise_objective(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    params: &UpscaleParams,
    opts: &UpscaleOptions,
) -> Result<f64> {
    let upscaled = upscale(fine, coarse.grid(), params, opts)?;
    pearson(&upscaled, coarse).map_err(|e| match e {
        Error::UndefinedMetric(msg) => Error::UndefinedObjective(msg),
        other => other,
    })
}

/// Evaluates a candidate, treating an undefined objective as a rejected
/// candidate (`None`) and propagating real failures.
fn try_objective(
    eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>,
    params: &UpscaleParams,
) -> Result<Option<f64>> {
    match eval(params) {
        Ok(rho) => Ok(Some(rho)),
        Err(Error::UndefinedObjective(_)) => Ok(None),
        Err(other) => Err(other),
    }
}

/// Greedy descent engine shared by the pixel-level, sub-pixel, and
/// generalized stages: evaluate every move from the incumbent, accept the
/// best strictly improving one, stop when none improves.
fn greedy_stage(
    start: LatticePoint,
    start_rho: f64,
    moves: &[(i64, i64, i64)],
    phase: SearchPhase,
    eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>,
    trace: &mut SearchTrace,
) -> Result<(LatticePoint, f64)> {
    let mut current = start;
    let mut current_rho = start_rho;
    loop {
        let mut best: Option<(LatticePoint, f64, usize)> = None;
        for &(dx, dy, ds) in moves {
            let Some(candidate) = current.offset(dx, dy, ds) else {
                continue;
            };
            let params = candidate.params();
            let rho = try_objective(eval, &params)?;
            let step = trace.record(phase, params, rho);
            if let Some(rho) = rho {
                if rho > current_rho && best.as_ref().is_none_or(|&(_, b, _)| rho > b) {
                    best = Some((candidate, rho, step));
                }
            }
        }
        match best {
            Some((next, rho, step)) => {
                trace.accept(step);
                current = next;
                current_rho = rho;
            }
            None => return Ok((current, current_rho)),
        }
    }
}

fn start_search(
    phase: SearchPhase,
    start: LatticePoint,
    eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>,
    trace: &mut SearchTrace,
) -> Result<f64> {
    let params = start.params();
    let rho = try_objective(eval, &params)?.ok_or_else(|| {
        Error::SearchFailed(format!(
            "objective undefined at start ({}, {}, {})",
            params.shift_x, params.shift_y, params.sigma
        ))
    })?;
    let step = trace.record(phase, params, Some(rho));
    trace.accept(step);
    Ok(rho)
}

/// Sigma grid search with zero shifts over `{sigma_grid_min, ..,
/// sigma_grid_max}` in 0.1 steps; ties break toward the smaller sigma.
pub fn grid_search_sigma(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut eval = |p: &UpscaleParams| pairwise_objective(fine, coarse, p, &opts.upscale);
    let lo = (opts.sigma_grid_min * 10.0).round() as i64;
    let hi = (opts.sigma_grid_max * 10.0).round() as i64;
    if lo < 1 || hi < lo {
        return Err(Error::InvalidConfig(format!(
            "bad sigma grid [{}, {}]",
            opts.sigma_grid_min, opts.sigma_grid_max
        )));
    }
    let mut trace = SearchTrace::default();
    let mut best: Option<(LatticePoint, f64, usize)> = None;
    for sigma in lo..=hi {
        let point = LatticePoint { x: 0, y: 0, sigma };
        let params = point.params();
        let rho = try_objective(&mut eval, &params)?;
        let step = trace.record(SearchPhase::PixelLevel, params, rho);
        if let Some(rho) = rho {
            // strict improvement keeps the smaller sigma on ties
            if best.as_ref().is_none_or(|&(_, b, _)| rho > b) {
                best = Some((point, rho, step));
            }
        }
    }
    let (point, objective, step) =
        best.ok_or_else(|| Error::SearchFailed("objective undefined on the whole sigma grid".into()))?;
    trace.accept(step);
    Ok(SearchOutcome {
        params: point.params(),
        objective,
        trace,
    })
}

/// Whole-pixel shift grid search around zero with sigma fixed; the window
/// grows by one pixel per side whenever the maximum sits on its boundary,
/// up to `shift_cap`.
pub fn grid_search_shift(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    params: &UpscaleParams,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut eval = |p: &UpscaleParams| pairwise_objective(fine, coarse, p, &opts.upscale);
    let sigma = LatticePoint::from_params(params).sigma;
    let mut trace = SearchTrace::default();
    let mut best: Option<(LatticePoint, f64, usize)> = None;

    let mut window = opts.shift_window.max(1);
    let mut evaluated_window = -1i64; // nothing evaluated yet
    loop {
        for yp in -window..=window {
            for xp in -window..=window {
                // only the freshly exposed ring on expansion
                if xp.abs() <= evaluated_window && yp.abs() <= evaluated_window {
                    continue;
                }
                let point = LatticePoint {
                    x: xp * 10,
                    y: yp * 10,
                    sigma,
                };
                let p = point.params();
                let rho = try_objective(&mut eval, &p)?;
                let step = trace.record(SearchPhase::PixelLevel, p, rho);
                if let Some(rho) = rho {
                    if best.as_ref().is_none_or(|&(_, b, _)| rho > b) {
                        best = Some((point, rho, step));
                    }
                }
            }
        }
        let Some((point, _, _)) = best else {
            return Err(Error::SearchFailed(
                "objective undefined on the whole shift grid".into(),
            ));
        };
        let on_boundary =
            point.x.abs() == window * 10 || point.y.abs() == window * 10;
        if !on_boundary {
            break;
        }
        if window >= opts.shift_cap {
            trace.warnings.push(format!(
                "best shift ({}, {}) lies on the expansion cap (+-{})",
                point.params().shift_x,
                point.params().shift_y,
                opts.shift_cap
            ));
            break;
        }
        evaluated_window = window;
        window += 1;
    }

    let (point, objective, step) = best.expect("checked above");
    trace.accept(step);
    Ok(SearchOutcome {
        params: point.params(),
        objective,
        trace,
    })
}

/// Greedy joint fit of shifts and sigma from `(0, 0, 1.0)` over the
/// six pixel-level moves, accepting the best strictly improving move per
/// sweep until none improves.
pub fn greedy_joint_search(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut eval = |p: &UpscaleParams| pairwise_objective(fine, coarse, p, &opts.upscale);
    greedy_joint_with(&mut eval)
}

fn greedy_joint_with(
    eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>,
) -> Result<SearchOutcome> {
    let mut trace = SearchTrace::default();
    let start = LatticePoint::from_params(&UpscaleParams::identity());
    let start_rho = start_search(SearchPhase::PixelLevel, start, eval, &mut trace)?;
    let (point, objective) = greedy_stage(
        start,
        start_rho,
        &PIXEL_MOVES,
        SearchPhase::PixelLevel,
        eval,
        &mut trace,
    )?;
    Ok(SearchOutcome {
        params: point.params(),
        objective,
        trace,
    })
}

/// Sub-pixel shift refinement around pixel-level parameters: greedy over
/// 0.1-pixel shift moves with sigma held fixed. Fractional shifts move the
/// continuous kernel center, so no image resampling is involved.
pub fn subpixel_refine(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    params: &UpscaleParams,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut eval = |p: &UpscaleParams| pairwise_objective(fine, coarse, p, &opts.upscale);
    subpixel_refine_with(params, &mut eval)
}

fn subpixel_refine_with(
    params: &UpscaleParams,
    eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>,
) -> Result<SearchOutcome> {
    let mut trace = SearchTrace::default();
    let start = LatticePoint::from_params(params);
    let start_rho = start_search(SearchPhase::SubPixel, start, eval, &mut trace)?;
    let (point, objective) = greedy_stage(
        start,
        start_rho,
        &SUBPIXEL_MOVES,
        SearchPhase::SubPixel,
        eval,
        &mut trace,
    )?;
    Ok(SearchOutcome {
        params: point.params(),
        objective,
        trace,
    })
}

/// Full per-pair fit: the greedy joint stage followed by sub-pixel
/// refinement, repeated until a whole cycle stops improving.
///
/// A single pass can leave sigma inflated: when the true shift sits near a
/// half pixel, the pixel-level stage over-blurs to mask the misalignment and
/// the sub-pixel stage holds sigma fixed. Alternating the two stages to a
/// joint fixpoint removes that coupling; each cycle strictly improves the
/// objective, so termination is guaranteed.
pub fn fit_pair(
    fine: &MaskedImage,
    coarse: &MaskedImage,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let mut eval = |p: &UpscaleParams| pairwise_objective(fine, coarse, p, &opts.upscale);
    fit_with(&mut eval)
}

fn fit_with(eval: &mut impl FnMut(&UpscaleParams) -> Result<f64>) -> Result<SearchOutcome> {
    let mut trace = SearchTrace::default();
    let mut point = LatticePoint::from_params(&UpscaleParams::identity());
    let mut rho = start_search(SearchPhase::PixelLevel, point, eval, &mut trace)?;
    loop {
        let before = rho;
        let (p, r) = greedy_stage(
            point,
            rho,
            &PIXEL_MOVES,
            SearchPhase::PixelLevel,
            eval,
            &mut trace,
        )?;
        let (p, r) = greedy_stage(p, r, &SUBPIXEL_MOVES, SearchPhase::SubPixel, eval, &mut trace)?;
        point = p;
        rho = r;
        if rho <= before {
            break;
        }
    }
    Ok(SearchOutcome {
        params: point.params(),
        objective: rho,
        trace,
    })
}

/// One fine/coarse image pair borrowed for a multi-pair search.
pub type ImagePair<'a> = (&'a MaskedImage, &'a MaskedImage);

/// Generalized fit across several pairs: same greedy policy as the per-pair
/// search, but each candidate is scored by the mean pairwise correlation.
/// Pairs with an undefined objective at a candidate are dropped from that
/// mean and noted in the trace warnings.
pub fn generalized_search(pairs: &[ImagePair<'_>], opts: &SearchOptions) -> Result<SearchOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("generalized search needs at least one pair".into()));
    }
    let mut warned: std::collections::HashSet<usize> = std::collections::HashSet::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut eval = |p: &UpscaleParams| -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, (fine, coarse)) in pairs.iter().enumerate() {
            match pairwise_objective(fine, coarse, p, &opts.upscale) {
                Ok(rho) => {
                    sum += rho;
                    n += 1;
                }
                Err(Error::UndefinedObjective(msg)) => {
                    if warned.insert(i) {
                        warnings.push(format!("pair {i} undefined at some candidates: {msg}"));
                    }
                }
                Err(other) => return Err(other),
            }
        }
        if n == 0 {
            return Err(Error::UndefinedObjective(
                "objective undefined for every pair".into(),
            ));
        }
        Ok(sum / n as f64)
    };

    let mut outcome = fit_with(&mut eval)?;
    outcome.trace.warnings.extend(warnings);
    Ok(outcome)
}

/// Leave-one-out evaluation of generalized parameters: for each pair,
/// parameters are fit on all other pairs and scored on the held-out one.
/// Per-fold failures are reported in place.
pub fn loo_evaluate_generalized(
    pairs: &[ImagePair<'_>],
    opts: &SearchOptions,
) -> Result<Vec<Result<f64>>> {
    if pairs.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out needs at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for held in 0..pairs.len() {
        let rest: Vec<ImagePair<'_>> = pairs
            .iter()
            .enumerate()
            .filter_map(|(i, p)| (i != held).then_some(*p))
            .collect();
        let fold = generalized_search(&rest, opts).and_then(|outcome| {
            pairwise_objective(pairs[held].0, pairs[held].1, &outcome.params, &opts.upscale)
        });
        out.push(fold);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::psf::upscale;

    fn smooth_fine(n: usize, seed_phase: f64) -> MaskedImage {
        let grid = Grid::new(0.0, 0.0, 20.0, n, n).unwrap();
        let (_, _, w, h) = {
            let e = grid.extent();
            (e.0, e.1, e.2, e.3)
        };
        MaskedImage::from_fn(grid, move |x, y| {
            let tx = 2.0 * std::f64::consts::PI * x / w;
            let ty = 2.0 * std::f64::consts::PI * y / h;
            0.5 + 0.18 * (3.0 * tx + seed_phase).sin() * (2.0 * ty).cos()
                + 0.12 * (5.0 * ty + 0.7 * seed_phase).sin()
                + 0.08 * (7.0 * tx - seed_phase).cos() * (4.0 * ty).sin()
        })
    }

    fn make_pair(n: usize, factor: usize, truth: &UpscaleParams, phase: f64) -> (MaskedImage, MaskedImage) {
        let fine = smooth_fine(n, phase);
        let cg = fine.grid().aggregated(factor).unwrap();
        let coarse = upscale(&fine, &cg, truth, &UpscaleOptions::default()).unwrap();
        (fine, coarse)
    }

    #[test]
    fn objective_is_one_for_exact_forward_model() {
        let truth = UpscaleParams::new(0.3, -0.2, 1.2).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.4);
        let rho = pairwise_objective(&fine, &coarse, &truth, &UpscaleOptions::default()).unwrap();
        assert!((rho - 1.0).abs() < 1e-12, "rho {rho}");
    }

    #[test]
    fn objective_is_minus_one_for_negated_anomaly() {
        let truth = UpscaleParams::identity();
        let (fine, coarse) = make_pair(150, 15, &truth, 1.1);
        let mean = coarse.valid_mean().unwrap();
        let negated = coarse.map(|v| mean - (v - mean));
        let rho =
            pairwise_objective(&fine, &negated, &truth, &UpscaleOptions::default()).unwrap();
        assert!((rho + 1.0).abs() < 1e-12, "rho {rho}");
    }

    #[test]
    fn orthogonal_patterns_have_near_zero_objective() {
        // fine varies only along x; coarse only along y, full periods
        let grid = Grid::new(0.0, 0.0, 20.0, 300, 300).unwrap();
        let w = grid.extent().2;
        let fine = MaskedImage::from_fn(grid.clone(), move |x, _| {
            0.5 + 0.2 * (2.0 * std::f64::consts::PI * 4.0 * x / w).sin()
        });
        let cg = grid.aggregated(5).unwrap();
        let coarse = MaskedImage::from_fn(cg, move |_, y| {
            0.5 + 0.2 * (2.0 * std::f64::consts::PI * 6.0 * y / w).sin()
        });
        let rho = pairwise_objective(
            &fine,
            &coarse,
            &UpscaleParams::identity(),
            &UpscaleOptions::default(),
        )
        .unwrap();
        // independent check on the raw fields
        let upscaled = upscale(
            &fine,
            coarse.grid(),
            &UpscaleParams::identity(),
            &UpscaleOptions::default(),
        )
        .unwrap();
        let direct = {
            let a = upscaled.values();
            let b = coarse.values();
            let n = a.len() as f64;
            let (ma, mb) = (
                a.iter().sum::<f64>() / n,
                b.iter().sum::<f64>() / n,
            );
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
            cov / (va * vb).sqrt()
        };
        assert!(rho.abs() < 0.05, "rho {rho}");
        assert!((rho - direct).abs() < 1e-9);
    }

    #[test]
    fn objective_errors_on_degenerate_input() {
        let truth = UpscaleParams::identity();
        let (fine, coarse) = make_pair(60, 15, &truth, 0.2);
        let flat = MaskedImage::constant(coarse.grid().clone(), 0.5);
        assert!(matches!(
            pairwise_objective(&fine, &flat, &truth, &UpscaleOptions::default()),
            Err(Error::UndefinedObjective(_))
        ));
    }

    #[test]
    fn sigma_grid_recovers_on_lattice_truth() {
        let truth = UpscaleParams::new(0.0, 0.0, 1.2).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.9);
        let out = grid_search_sigma(&fine, &coarse, &SearchOptions::default()).unwrap();
        assert!((out.params.sigma - 1.2).abs() < 1e-12);
        assert!((out.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sigma_grid_off_lattice_truth_picks_better_neighbor() {
        let truth = UpscaleParams::new(0.0, 0.0, 0.75).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 1.7);
        let opts = SearchOptions::default();
        let out = grid_search_sigma(&fine, &coarse, &opts).unwrap();
        let rho_07 = pairwise_objective(
            &fine,
            &coarse,
            &UpscaleParams::new(0.0, 0.0, 0.7).unwrap(),
            &opts.upscale,
        )
        .unwrap();
        let rho_08 = pairwise_objective(
            &fine,
            &coarse,
            &UpscaleParams::new(0.0, 0.0, 0.8).unwrap(),
            &opts.upscale,
        )
        .unwrap();
        let expect = if rho_07 >= rho_08 { 0.7 } else { 0.8 };
        assert!(
            (out.params.sigma - expect).abs() < 1e-12,
            "got {} expected {expect}",
            out.params.sigma
        );
    }

    #[test]
    fn sigma_grid_fails_on_constant_coarse() {
        let fine = smooth_fine(60, 0.3);
        let flat = MaskedImage::constant(fine.grid().aggregated(15).unwrap(), 0.2);
        assert!(matches!(
            grid_search_sigma(&fine, &flat, &SearchOptions::default()),
            Err(Error::SearchFailed(_))
        ));
    }

    #[test]
    fn shift_grid_recovers_integer_shift() {
        let truth = UpscaleParams::new(1.0, -2.0, 1.0).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.5);
        let out = grid_search_shift(
            &fine,
            &coarse,
            &UpscaleParams::identity(),
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!((out.params.shift_x, out.params.shift_y), (1.0, -2.0));
        assert!(out.trace.warnings.is_empty());
    }

    #[test]
    fn shift_grid_expands_on_demand() {
        let truth = UpscaleParams::new(3.0, 0.0, 1.0).unwrap();
        let (fine, coarse) = make_pair(150, 5, &truth, 2.3);
        let out = grid_search_shift(
            &fine,
            &coarse,
            &UpscaleParams::identity(),
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!((out.params.shift_x, out.params.shift_y), (3.0, 0.0));
        assert!(out.trace.warnings.is_empty());
    }

    #[test]
    fn shift_grid_reports_cap_warning() {
        let truth = UpscaleParams::new(4.0, 0.0, 1.0).unwrap();
        let (fine, coarse) = make_pair(150, 5, &truth, 0.8);
        let opts = SearchOptions {
            shift_cap: 3,
            ..SearchOptions::default()
        };
        let out =
            grid_search_shift(&fine, &coarse, &UpscaleParams::identity(), &opts).unwrap();
        assert!(!out.trace.warnings.is_empty());
        assert_eq!(out.params.shift_x.abs(), 3.0);
    }

    #[test]
    fn aligned_pair_keeps_zero_shift() {
        let truth = UpscaleParams::new(0.0, 0.0, 1.3).unwrap();
        let (fine, coarse) = make_pair(150, 5, &truth, 1.9);
        let out = grid_search_shift(
            &fine,
            &coarse,
            &UpscaleParams::new(0.0, 0.0, 1.3).unwrap(),
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!((out.params.shift_x, out.params.shift_y), (0.0, 0.0));
    }

    #[test]
    fn greedy_recovers_joint_truth() {
        let truth = UpscaleParams::new(1.0, -1.0, 1.3).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.6);
        let out = greedy_joint_search(&fine, &coarse, &SearchOptions::default()).unwrap();
        assert!((out.params.shift_x - 1.0).abs() < 1e-12);
        assert!((out.params.shift_y + 1.0).abs() < 1e-12);
        assert!((out.params.sigma - 1.3).abs() < 0.1 + 1e-12);
        assert!(out.trace.is_strictly_increasing());
    }

    #[test]
    fn greedy_terminates_immediately_at_optimum() {
        let truth = UpscaleParams::identity();
        let (fine, coarse) = make_pair(150, 15, &truth, 1.4);
        let out = greedy_joint_search(&fine, &coarse, &SearchOptions::default()).unwrap();
        assert_eq!(out.params, UpscaleParams::identity());
        // one accepted start plus one sweep of six rejected moves
        assert_eq!(out.trace.steps.len(), 7);
        assert!((out.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subpixel_refine_recovers_fractional_shift() {
        let truth = UpscaleParams::new(0.6, -0.4, 1.0).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.35);
        let pixel = greedy_joint_search(&fine, &coarse, &SearchOptions::default()).unwrap();
        let out =
            subpixel_refine(&fine, &coarse, &pixel.params, &SearchOptions::default()).unwrap();
        assert!(
            (out.params.shift_x - 0.6).abs() < 0.1 + 1e-12,
            "x {}",
            out.params.shift_x
        );
        assert!(
            (out.params.shift_y + 0.4).abs() < 0.1 + 1e-12,
            "y {}",
            out.params.shift_y
        );
        assert!(out.trace.is_strictly_increasing());
    }

    #[test]
    fn subpixel_refine_keeps_already_optimal_params() {
        let truth = UpscaleParams::new(1.0, 0.0, 1.1).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 2.2);
        let out = subpixel_refine(&fine, &coarse, &truth, &SearchOptions::default()).unwrap();
        assert_eq!(out.params, truth);
    }

    #[test]
    fn generalized_on_identical_truth_matches_pairwise() {
        let truth = UpscaleParams::new(0.5, 0.3, 1.2).unwrap();
        let pairs_owned: Vec<_> = [0.2, 1.5, 2.8]
            .iter()
            .map(|&phase| make_pair(120, 15, &truth, phase))
            .collect();
        let pairs: Vec<ImagePair<'_>> =
            pairs_owned.iter().map(|(f, c)| (f, c)).collect();
        let opts = SearchOptions::default();
        let general = generalized_search(&pairs, &opts).unwrap();
        let single = fit_pair(&pairs_owned[0].0, &pairs_owned[0].1, &opts).unwrap();
        assert!((general.params.shift_x - single.params.shift_x).abs() <= 0.1 + 1e-12);
        assert!((general.params.shift_y - single.params.shift_y).abs() <= 0.1 + 1e-12);
        assert!((general.params.sigma - single.params.sigma).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn generalized_single_pair_degenerates_to_pairwise() {
        let truth = UpscaleParams::new(-0.6, 0.2, 0.9).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.75);
        let opts = SearchOptions::default();
        let general = generalized_search(&[(&fine, &coarse)], &opts).unwrap();
        let single = fit_pair(&fine, &coarse, &opts).unwrap();
        assert_eq!(general.params, single.params);
        assert_eq!(general.objective, single.objective);
    }

    #[test]
    fn generalized_sigma_lies_between_heterogeneous_truths() {
        let t1 = UpscaleParams::new(0.0, 0.0, 1.0).unwrap();
        let t2 = UpscaleParams::new(0.0, 0.0, 1.4).unwrap();
        let p1 = make_pair(150, 15, &t1, 0.4);
        let p2 = make_pair(150, 15, &t2, 0.4);
        let pairs: Vec<ImagePair<'_>> = vec![(&p1.0, &p1.1), (&p2.0, &p2.1)];
        let out = generalized_search(&pairs, &SearchOptions::default()).unwrap();
        assert!(
            out.params.sigma >= 1.0 - 1e-12 && out.params.sigma <= 1.4 + 1e-12,
            "sigma {}",
            out.params.sigma
        );
        // mean objective over the sigma axis peaks strictly inside the range
        let opts = SearchOptions::default();
        let mean_at = |sigma: f64| {
            let p = UpscaleParams::new(0.0, 0.0, sigma).unwrap();
            (pairwise_objective(&p1.0, &p1.1, &p, &opts.upscale).unwrap()
                + pairwise_objective(&p2.0, &p2.1, &p, &opts.upscale).unwrap())
                / 2.0
        };
        assert!(mean_at(out.params.sigma) >= mean_at(0.9));
        assert!(mean_at(out.params.sigma) >= mean_at(1.5));
    }

    #[test]
    fn loo_identical_pairs_match_in_sample() {
        let truth = UpscaleParams::new(0.4, -0.2, 1.1).unwrap();
        let base = make_pair(120, 15, &truth, 1.3);
        let pairs: Vec<ImagePair<'_>> = vec![
            (&base.0, &base.1),
            (&base.0, &base.1),
            (&base.0, &base.1),
        ];
        let opts = SearchOptions::default();
        let folds = loo_evaluate_generalized(&pairs, &opts).unwrap();
        assert_eq!(folds.len(), 3);
        let general = generalized_search(&pairs, &opts).unwrap();
        for fold in folds {
            let rho = fold.unwrap();
            assert!((rho - general.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn loo_needs_three_pairs() {
        let truth = UpscaleParams::identity();
        let base = make_pair(60, 15, &truth, 0.1);
        let pairs: Vec<ImagePair<'_>> = vec![(&base.0, &base.1), (&base.0, &base.1)];
        assert!(loo_evaluate_generalized(&pairs, &SearchOptions::default()).is_err());
    }

    #[test]
    fn shift_equivariance_under_content_translation() {
        // translating the fine content east by one coarse pixel raises the
        // recovered shift_x by one under the documented sign convention
        let truth = UpscaleParams::new(0.0, 0.0, 1.0).unwrap();
        let (fine, coarse) = make_pair(150, 15, &truth, 0.45);
        let (rows, cols) = (fine.n_rows(), fine.n_cols());
        let mut rolled = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                // content of column c moves to column (c + 15) mod cols
                rolled[r * cols + (c + 15) % cols] = fine.values()[r * cols + c];
            }
        }
        let shifted = MaskedImage::from_values(fine.grid().clone(), rolled).unwrap();
        let out = greedy_joint_search(&shifted, &coarse, &SearchOptions::default()).unwrap();
        assert_eq!(out.params.shift_x, 1.0, "params {:?}", out.params);
        assert_eq!(out.params.shift_y, 0.0);
    }

    #[test]
    fn greedy_beats_or_matches_sigma_grid() {
        for (truth, phase) in [
            (UpscaleParams::new(0.7, -0.3, 1.2).unwrap(), 0.3),
            (UpscaleParams::new(-1.0, 0.5, 0.8).unwrap(), 1.1),
        ] {
            let (fine, coarse) = make_pair(150, 15, &truth, phase);
            let opts = SearchOptions::default();
            let greedy = fit_pair(&fine, &coarse, &opts).unwrap();
            let grid = grid_search_sigma(&fine, &coarse, &opts).unwrap();
            assert!(
                greedy.objective >= grid.objective - 1e-12,
                "greedy {} grid {}",
                greedy.objective,
                grid.objective
            );
        }
    }
}
