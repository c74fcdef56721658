use crate::config::ConfigEcho;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use stifprep::absis::{absis_standardize, AbsisConfig, AbsisOutput, DegeneratePolicy};
use stifprep::error::{Error, Result};
use stifprep::io::{
    parse_scene_spec, read_series, write_params, write_series, ParamsEntry, RasterMeta,
};
use stifprep::metrics::{report_table, MetricKind, MetricReport};
use stifprep::psf::{upscale, UpscaleOptions};
use stifprep::search::{
    fit_pair, generalized_search, loo_evaluate_generalized, ImagePair, SearchOptions, SearchTrace,
};
use stifprep::synth::{aggregate_series, degrade_to_coarse, generate_fine_series};
use stifprep::{BandSet, Date, ImageSeries, MaskedImage, SeriesEntry};

#[derive(Parser, Debug)]
#[command(
    name = "stifprep",
    version,
    about = "Standardize multi-sensor satellite image time series: PSF-simulating upscaling, \
             anomaly-based sharpening, synthetic scenes, and evaluation metrics",
    after_help = crate::EXIT_CODES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene (fine series, optionally the degraded
    /// coarse series and the aggregated fine series) from a spec file
    Synth(SynthArgs),
    /// Fit per-pair upscaling parameters (greedy joint search plus
    /// sub-pixel refinement) for every date common to both series
    UpscalePair(UpscalePairArgs),
    /// Fit one generalized parameter set per band across all common dates,
    /// optionally with a leave-one-out report
    UpscaleGeneral(UpscaleGeneralArgs),
    /// Sharpen coarse image(s) toward the aggregated fine-resolution domain
    Absis(AbsisArgs),
    /// Compare two series date by date with rho / rmse / edge metrics
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scene specification file (key = value text)
    #[arg(long)]
    spec: PathBuf,
    /// Output path for the fine-resolution series
    #[arg(long)]
    out_fine: PathBuf,
    /// Also write the coarse series produced by the scene's true parameters
    #[arg(long)]
    out_coarse: Option<PathBuf>,
    /// Also write the block-averaged (aggregated) fine series
    #[arg(long)]
    out_aggfine: Option<PathBuf>,
    /// Nodata sentinel for the output containers
    #[arg(long, default_value_t = -9999.0)]
    nodata: f64,
}

#[derive(Args, Debug)]
pub struct UpscaleArgsCommon {
    /// Fine-resolution input series
    #[arg(long)]
    fine: PathBuf,
    /// Coarse-resolution input series
    #[arg(long)]
    coarse: PathBuf,
    /// Output parameter document
    #[arg(long)]
    out_params: PathBuf,
    /// Optional output series upscaled with the fitted parameters
    #[arg(long)]
    out_upscaled: Option<PathBuf>,
    /// Optional search trace CSV (date,band,iteration,phase,x,y,sigma,rho,accepted)
    #[arg(long)]
    out_trace: Option<PathBuf>,
    /// Restrict fitting to one band
    #[arg(long)]
    band: Option<String>,
    /// Kernel support ends at this multiple of sigma
    #[arg(long, default_value_t = 3.0)]
    truncation_radius: f64,
    /// Coarse pixels keeping less than this fraction of kernel mass are invalid
    #[arg(long, default_value_t = 0.5)]
    min_valid_fraction: f64,
}

#[derive(Args, Debug)]
pub struct UpscalePairArgs {
    #[command(flatten)]
    common: UpscaleArgsCommon,
}

#[derive(Args, Debug)]
pub struct UpscaleGeneralArgs {
    #[command(flatten)]
    common: UpscaleArgsCommon,
    /// Leave-one-out cross-validation report CSV (needs at least 3 dates)
    #[arg(long)]
    loo_report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AbsisArgs {
    /// Coarse-resolution input series
    #[arg(long)]
    coarse: PathBuf,
    /// Aggregated fine-resolution input series (block-averaged to the
    /// coarse pixel size)
    #[arg(long)]
    aggfine: PathBuf,
    /// Target date(s) to standardize; repeatable. Default: every date with
    /// a full baseline on both sides
    #[arg(long)]
    target_date: Vec<String>,
    /// Output series with one entry per standardized date
    #[arg(long)]
    out: PathBuf,
    /// Moving-window side length, odd, in aggregated-fine pixels
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Baseline dates before the target
    #[arg(long, default_value_t = 3)]
    before: usize,
    /// Baseline dates after the target
    #[arg(long, default_value_t = 3)]
    after: usize,
    /// Resampler for coarse anomalies: bilinear or nearest
    #[arg(long, default_value = "bilinear")]
    resampler: String,
    /// Policy at zero-variance predictor windows: constant-mean or invalidate
    #[arg(long, default_value = "constant-mean")]
    degenerate_policy: String,
    /// Directory for per-date diagnostic rasters (selection, best rho,
    /// alpha0, alpha1)
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Prediction series
    #[arg(long)]
    pred: PathBuf,
    /// Reference series
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Metric: rho, rmse, edge, or all
    #[arg(long, default_value = "all")]
    metric: String,
    /// Output CSV (date,method,band,metric,value)
    #[arg(long)]
    out: PathBuf,
    /// Method tag recorded in the report; defaults to the prediction
    /// file stem
    #[arg(long)]
    method: Option<String>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::UpscalePair(args) => cmd_upscale_pair(args),
        Command::UpscaleGeneral(args) => cmd_upscale_general(args),
        Command::Absis(args) => cmd_absis(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec_text = std::fs::read_to_string(&args.spec)?;
    let spec = parse_scene_spec(&spec_text)?;

    let mut echo = ConfigEcho::new("synth");
    echo.push_path("spec", &args.spec);
    echo.push("seed", spec.seed);
    echo.push("nodata", args.nodata);
    let metadata = format!("{}--- scene spec ---\n{}", echo.render(), spec_text);
    let meta = RasterMeta {
        nodata: args.nodata,
        metadata,
    };

    let fine = generate_fine_series(&spec)?;
    write_series(&fine, &args.out_fine, &meta)?;
    eprintln!("synth: wrote fine series ({} dates) to {}", fine.len(), args.out_fine.display());

    if let Some(path) = &args.out_coarse {
        let coarse = degrade_to_coarse(&spec, &fine)?;
        write_series(&coarse, path, &meta)?;
        eprintln!("synth: wrote coarse series to {}", path.display());
    }
    if let Some(path) = &args.out_aggfine {
        let agg = aggregate_series(&fine, spec.factor)?;
        write_series(&agg, path, &meta)?;
        eprintln!("synth: wrote aggregated fine series to {}", path.display());
    }
    Ok(())
}

/// Dates present in both series, with their positions.
fn common_dates(fine: &ImageSeries, coarse: &ImageSeries) -> Result<Vec<Date>> {
    let dates: Vec<Date> = fine
        .dates()
        .filter(|d| coarse.position(*d).is_some())
        .collect();
    if dates.is_empty() {
        return Err(Error::EmptyInput(
            "the fine and coarse series share no dates".into(),
        ));
    }
    Ok(dates)
}

/// Band indices to fit: all, or the one selected by name.
fn band_indices(series: &ImageSeries, selected: &Option<String>) -> Result<Vec<usize>> {
    match selected {
        None => Ok((0..series.band_set().len()).collect()),
        Some(name) => {
            let idx = series.band_set().index_of(name).ok_or_else(|| {
                Error::InvalidConfig(format!("band {name:?} not present in the series"))
            })?;
            Ok(vec![idx])
        }
    }
}

fn check_band_sets(fine: &ImageSeries, coarse: &ImageSeries) -> Result<()> {
    if fine.band_set() != coarse.band_set() {
        return Err(Error::InvalidConfig(
            "fine and coarse series carry different band sets".into(),
        ));
    }
    Ok(())
}

fn search_options(common: &UpscaleArgsCommon) -> SearchOptions {
    SearchOptions {
        upscale: UpscaleOptions {
            truncation_radius: common.truncation_radius,
            min_valid_fraction: common.min_valid_fraction,
        },
        ..SearchOptions::default()
    }
}

fn upscale_echo(command: &str, common: &UpscaleArgsCommon) -> ConfigEcho {
    let mut echo = ConfigEcho::new(command);
    echo.push_path("fine", &common.fine);
    echo.push_path("coarse", &common.coarse);
    echo.push("band", common.band.as_deref().unwrap_or("all"));
    echo.push("truncation-radius", common.truncation_radius);
    echo.push("min-valid-fraction", common.min_valid_fraction);
    echo
}

/// Appends one search trace to the run-level CSV body.
fn push_trace(body: &mut String, date: Option<Date>, band: &str, trace: &SearchTrace) {
    let date = date.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
    for step in &trace.steps {
        let rho = if step.rho.is_nan() {
            "nan".to_string()
        } else {
            step.rho.to_string()
        };
        body.push_str(&format!(
            "{date},{band},{},{},{},{},{},{rho},{}\n",
            step.iteration,
            step.phase,
            step.params.shift_x,
            step.params.shift_y,
            step.params.sigma,
            step.accepted
        ));
    }
}

const TRACE_HEADER: &str = "date,band,iteration,phase,x,y,sigma,rho,accepted\n";

fn selected_band_set(series: &ImageSeries, bands: &[usize]) -> Result<BandSet> {
    BandSet::new(
        bands
            .iter()
            .map(|&b| series.band_set().bands()[b].clone())
            .collect(),
    )
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_upscale_pair(args: UpscalePairArgs) -> Result<()> {
    let common = args.common;
    let (fine, _) = read_series(&common.fine)?;
    let (coarse, coarse_meta) = read_series(&common.coarse)?;
    check_band_sets(&fine, &coarse)?;
    let dates = common_dates(&fine, &coarse)?;
    let bands = band_indices(&fine, &common.band)?;
    let opts = search_options(&common);
    let echo = upscale_echo("upscale-pair", &common);

    let mut entries = Vec::new();
    let mut trace_body = String::new();
    let mut upscaled_entries = Vec::new();
    for &date in &dates {
        let mut images = Vec::new();
        for &band in &bands {
            let fine_img = fine.image(date, band).expect("date and band checked");
            let coarse_img = coarse.image(date, band).expect("date and band checked");
            let outcome = fit_pair(fine_img, coarse_img, &opts)?;
            let band_name = fine.band_set().bands()[band].name.clone();
            push_trace(&mut trace_body, Some(date), &band_name, &outcome.trace);
            images.push(upscale(
                fine_img,
                coarse.grid(),
                &outcome.params,
                &opts.upscale,
            )?);
            entries.push(ParamsEntry {
                date: Some(date),
                band: band_name,
                params: outcome.params,
                objective: outcome.objective,
            });
        }
        upscaled_entries.push(SeriesEntry { date, images });
    }

    write_text(&common.out_params, &write_params(&entries, &echo.render()))?;
    eprintln!(
        "upscale-pair: fitted {} date/band pairs, params in {}",
        entries.len(),
        common.out_params.display()
    );
    if let Some(path) = &common.out_upscaled {
        let series = ImageSeries::new(
            coarse.grid().clone(),
            selected_band_set(&fine, &bands)?,
            upscaled_entries,
        )?;
        let meta = RasterMeta {
            nodata: coarse_meta.nodata,
            metadata: echo.render(),
        };
        write_series(&series, path, &meta)?;
    }
    if let Some(path) = &common.out_trace {
        let mut text: String = echo
            .render()
            .lines()
            .map(|l| format!("# {l}\n"))
            .collect();
        text.push_str(TRACE_HEADER);
        text.push_str(&trace_body);
        write_text(path, &text)?;
    }
    Ok(())
}

fn cmd_upscale_general(args: UpscaleGeneralArgs) -> Result<()> {
    let common = args.common;
    let (fine, _) = read_series(&common.fine)?;
    let (coarse, coarse_meta) = read_series(&common.coarse)?;
    check_band_sets(&fine, &coarse)?;
    let dates = common_dates(&fine, &coarse)?;
    let bands = band_indices(&fine, &common.band)?;
    let opts = search_options(&common);
    let echo = upscale_echo("upscale-general", &common);

    let mut entries = Vec::new();
    let mut trace_body = String::new();
    let mut loo_body = String::new();
    let mut per_band_params = Vec::new();
    for &band in &bands {
        let pairs: Vec<ImagePair<'_>> = dates
            .iter()
            .map(|&d| {
                (
                    fine.image(d, band).expect("common date"),
                    coarse.image(d, band).expect("common date"),
                )
            })
            .collect();
        let outcome = generalized_search(&pairs, &opts)?;
        let band_name = fine.band_set().bands()[band].name.clone();
        push_trace(&mut trace_body, None, &band_name, &outcome.trace);
        if args.loo_report.is_some() {
            let folds = loo_evaluate_generalized(&pairs, &opts)?;
            for (date, fold) in dates.iter().zip(folds) {
                let value = match fold {
                    Ok(rho) => rho.to_string(),
                    Err(e) => format!("error: {e}"),
                };
                loo_body.push_str(&format!("{date},{band_name},{value}\n"));
            }
        }
        entries.push(ParamsEntry {
            date: None,
            band: band_name,
            params: outcome.params,
            objective: outcome.objective,
        });
        per_band_params.push(outcome.params);
    }

    write_text(&common.out_params, &write_params(&entries, &echo.render()))?;
    eprintln!(
        "upscale-general: fitted {} band(s) over {} dates, params in {}",
        bands.len(),
        dates.len(),
        common.out_params.display()
    );

    if let Some(path) = &common.out_upscaled {
        let mut upscaled_entries = Vec::new();
        for &date in &dates {
            let mut images = Vec::new();
            for (slot, &band) in bands.iter().enumerate() {
                let fine_img = fine.image(date, band).expect("common date");
                images.push(upscale(
                    fine_img,
                    coarse.grid(),
                    &per_band_params[slot],
                    &opts.upscale,
                )?);
            }
            upscaled_entries.push(SeriesEntry { date, images });
        }
        let series = ImageSeries::new(
            coarse.grid().clone(),
            selected_band_set(&fine, &bands)?,
            upscaled_entries,
        )?;
        let meta = RasterMeta {
            nodata: coarse_meta.nodata,
            metadata: echo.render(),
        };
        write_series(&series, path, &meta)?;
    }
    if let Some(path) = &common.out_trace {
        let mut text: String = echo
            .render()
            .lines()
            .map(|l| format!("# {l}\n"))
            .collect();
        text.push_str(TRACE_HEADER);
        text.push_str(&trace_body);
        write_text(path, &text)?;
    }
    if let Some(path) = &args.loo_report {
        let mut text: String = echo
            .render()
            .lines()
            .map(|l| format!("# {l}\n"))
            .collect();
        text.push_str("date,band,held_out_rho\n");
        text.push_str(&loo_body);
        write_text(path, &text)?;
    }
    Ok(())
}

fn cmd_absis(args: AbsisArgs) -> Result<()> {
    let (coarse, coarse_meta) = read_series(&args.coarse)?;
    let (aggfine, _) = read_series(&args.aggfine)?;
    let config = AbsisConfig {
        window: args.window,
        baseline_before: args.before,
        baseline_after: args.after,
        resampler: stifprep::Resampler::parse(&args.resampler)?,
        degenerate_policy: DegeneratePolicy::parse(&args.degenerate_policy)?,
    };
    config.validate()?;

    let targets: Vec<Date> = if args.target_date.is_empty() {
        // every date with a full baseline on both sides of the coarse
        // series that the aggregated fine series can also support
        coarse
            .dates()
            .filter(|&d| {
                stifprep::absis::baseline_dates(&coarse, d, args.before, args.after)
                    .map(|dates| dates.iter().all(|bd| aggfine.position(*bd).is_some()))
                    .unwrap_or(false)
            })
            .collect()
    } else {
        let mut dates = args
            .target_date
            .iter()
            .map(|s| {
                s.parse::<Date>()
                    .map_err(|_| Error::InvalidConfig(format!("bad target date {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        dates.sort();
        dates.dedup();
        dates
    };
    if targets.is_empty() {
        return Err(Error::BaselineUnavailable {
            date: "-".into(),
            detail: format!(
                "no date in {} has {} earlier and {} later baseline dates",
                args.coarse.display(),
                args.before,
                args.after
            ),
        });
    }

    let mut echo = ConfigEcho::new("absis");
    echo.push_path("coarse", &args.coarse);
    echo.push_path("aggfine", &args.aggfine);
    echo.push("window", args.window);
    echo.push("baseline-before", args.before);
    echo.push("baseline-after", args.after);
    echo.push("resampler", config.resampler.name());
    echo.push("degenerate-policy", config.degenerate_policy.name());
    echo.push(
        "target-dates",
        targets
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );

    let mut outputs: Vec<AbsisOutput> = Vec::new();
    for &target in &targets {
        let output = absis_standardize(&coarse, &aggfine, target, &config)?;
        eprintln!(
            "absis: standardized {} (baseline {} .. {})",
            target,
            output.baseline_dates.first().expect("non-empty baseline"),
            output.baseline_dates.last().expect("non-empty baseline"),
        );
        outputs.push(output);
    }

    let meta = RasterMeta {
        nodata: coarse_meta.nodata,
        metadata: echo.render(),
    };
    let entries: Vec<SeriesEntry> = outputs
        .iter()
        .map(|o| SeriesEntry {
            date: o.date,
            images: o.images.clone(),
        })
        .collect();
    let series = ImageSeries::new(aggfine.grid().clone(), aggfine.band_set().clone(), entries)?;
    write_series(&series, &args.out, &meta)?;

    if let Some(dir) = &args.diagnostics {
        std::fs::create_dir_all(dir)?;
        for output in &outputs {
            let date = output.date;
            let single = |images: Vec<MaskedImage>| -> Result<ImageSeries> {
                ImageSeries::new(
                    aggfine.grid().clone(),
                    aggfine.band_set().clone(),
                    vec![SeriesEntry { date, images }],
                )
            };
            let write_diag = |name: &str, images: Vec<MaskedImage>| -> Result<()> {
                let path = dir.join(format!("absis_{date}_{name}.msr"));
                write_series(&single(images)?, &path, &meta)
            };
            write_diag(
                "selection",
                output
                    .diagnostics
                    .iter()
                    .map(|d| d.selection.to_index_image())
                    .collect(),
            )?;
            write_diag(
                "rho",
                output
                    .diagnostics
                    .iter()
                    .map(|d| d.selection.to_rho_image())
                    .collect(),
            )?;
            write_diag(
                "alpha0",
                output.diagnostics.iter().map(|d| d.alpha0.clone()).collect(),
            )?;
            write_diag(
                "alpha1",
                output.diagnostics.iter().map(|d| d.alpha1.clone()).collect(),
            )?;
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (pred, _) = read_series(&args.pred)?;
    let (reference, _) = read_series(&args.reference)?;
    let metrics: Vec<MetricKind> = match args.metric.as_str() {
        "rho" => vec![MetricKind::Rho],
        "rmse" => vec![MetricKind::Rmse],
        "edge" => vec![MetricKind::Edge],
        "all" => vec![MetricKind::Rho, MetricKind::Rmse, MetricKind::Edge],
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown metric {other:?} (rho, rmse, edge, or all)"
            )))
        }
    };
    if pred.band_set() != reference.band_set() {
        return Err(Error::InvalidConfig(
            "prediction and reference series carry different band sets".into(),
        ));
    }
    let dates = common_dates(&pred, &reference)?;
    let method = args.method.clone().unwrap_or_else(|| {
        args.pred
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pred".into())
    });

    let mut echo = ConfigEcho::new("evaluate");
    echo.push_path("pred", &args.pred);
    echo.push_path("ref", &args.reference);
    echo.push("metric", &args.metric);
    echo.push("method", &method);

    let mut reports = Vec::new();
    for &date in &dates {
        for &metric in &metrics {
            let mut per_band = Vec::new();
            for (band, name) in pred.band_set().names().enumerate() {
                let p = pred.image(date, band).expect("common date");
                let r = reference.image(date, band).expect("common date");
                per_band.push((name.to_string(), metric.compute(p, r)?));
            }
            reports.push(MetricReport {
                method: method.clone(),
                date: Some(date),
                metric,
                per_band,
                prediction_id: args.pred.display().to_string(),
                reference_id: args.reference.display().to_string(),
            });
        }
    }

    let mut csv: String = echo
        .render()
        .lines()
        .map(|l| format!("# {l}\n"))
        .collect();
    csv.push_str(MetricReport::CSV_HEADER);
    csv.push('\n');
    for report in &reports {
        csv.push_str(&report.to_csv_rows());
    }
    write_text(&args.out, &csv)?;
    print!("{}", report_table(&reports));
    Ok(())
}
