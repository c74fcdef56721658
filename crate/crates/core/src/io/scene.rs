//! Human-editable text form of [`SceneSpec`].

use crate::error::{Error, Result};
use crate::psf::UpscaleParams;
use crate::synth::{BaseField, SceneSpec};

pub fn write_scene_spec(spec: &SceneSpec) -> String {
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let base = match spec.base_field {
        BaseField::Smooth { components } => format!("smooth:{components}"),
        BaseField::Shapes { discs, rects } => format!("shapes:{discs},{rects}"),
        BaseField::StepEdges { edges } => format!("steps:{edges}"),
    };
    let sx: Vec<f64> = spec.true_params.iter().map(|p| p.shift_x).collect();
    let sy: Vec<f64> = spec.true_params.iter().map(|p| p.shift_y).collect();
    let sg: Vec<f64> = spec.true_params.iter().map(|p| p.sigma).collect();
    format!(
        "# synthetic scene specification\n\
         seed = {}\n\
         rows = {}\n\
         cols = {}\n\
         pixel-size = {}\n\
         origin-x = {}\n\
         origin-y = {}\n\
         factor = {}\n\
         bands = {}\n\
         base-field = {base}\n\
         shift-x = {}\n\
         shift-y = {}\n\
         sigma = {}\n\
         start-date = {}\n\
         date-step = {}\n\
         gains = {}\n\
         offsets = {}\n\
         change-patches = {}\n\
         patch-magnitude = {}\n\
         fine-noise-sd = {}\n\
         coarse-noise-sd = {}\n",
        spec.seed,
        spec.fine_rows,
        spec.fine_cols,
        spec.fine_pixel_size,
        spec.origin_x,
        spec.origin_y,
        spec.factor,
        spec.bands,
        list(&sx),
        list(&sy),
        list(&sg),
        spec.start_date,
        spec.date_step_days,
        list(&spec.gains),
        list(&spec.offsets),
        spec.change_patches,
        spec.patch_magnitude,
        spec.fine_noise_sd,
        spec.coarse_noise_sd,
    )
}

fn parse_list(lineno: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|part| super::parse_num(lineno, key, part.trim()))
        .collect()
}

fn parse_base_field(lineno: usize, value: &str) -> Result<BaseField> {
    let (kind, args) = value.split_once(':').unwrap_or((value, ""));
    match kind.trim() {
        "smooth" => Ok(BaseField::Smooth {
            components: if args.is_empty() {
                8
            } else {
                super::parse_num(lineno, "base-field", args.trim())?
            },
        }),
        "shapes" => {
            let (discs, rects) = args.split_once(',').unwrap_or((args, "0"));
            Ok(BaseField::Shapes {
                discs: super::parse_num(lineno, "base-field discs", discs.trim())?,
                rects: super::parse_num(lineno, "base-field rects", rects.trim())?,
            })
        }
        "steps" => Ok(BaseField::StepEdges {
            edges: if args.is_empty() {
                3
            } else {
                super::parse_num(lineno, "base-field", args.trim())?
            },
        }),
        other => Err(Error::InvalidConfig(format!(
            "line {lineno}: unknown base-field {other:?} (smooth, shapes, or steps)"
        ))),
    }
}

/// Expands a per-band list that may be given once for all bands.
fn per_band(lineno: usize, key: &str, values: &[f64], bands: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; bands]),
        n if n == bands => Ok(values.to_vec()),
        n => Err(Error::InvalidConfig(format!(
            "line {lineno}: {key} lists {n} values for {bands} bands"
        ))),
    }
}

pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    let mut spec = SceneSpec::default();
    let mut shift_x: (usize, Vec<f64>) = (0, vec![0.0]);
    let mut shift_y: (usize, Vec<f64>) = (0, vec![0.0]);
    let mut sigma: (usize, Vec<f64>) = (0, vec![1.0]);

    for (lineno, key, value) in super::key_value_lines(text)? {
        match key.as_str() {
            "seed" => spec.seed = super::parse_num(lineno, &key, &value)?,
            "rows" => spec.fine_rows = super::parse_num(lineno, &key, &value)?,
            "cols" => spec.fine_cols = super::parse_num(lineno, &key, &value)?,
            "pixel-size" => spec.fine_pixel_size = super::parse_num(lineno, &key, &value)?,
            "origin-x" => spec.origin_x = super::parse_num(lineno, &key, &value)?,
            "origin-y" => spec.origin_y = super::parse_num(lineno, &key, &value)?,
            "factor" => spec.factor = super::parse_num(lineno, &key, &value)?,
            "bands" => spec.bands = super::parse_num(lineno, &key, &value)?,
            "base-field" => spec.base_field = parse_base_field(lineno, &value)?,
            "shift-x" => shift_x = (lineno, parse_list(lineno, &key, &value)?),
            "shift-y" => shift_y = (lineno, parse_list(lineno, &key, &value)?),
            "sigma" => sigma = (lineno, parse_list(lineno, &key, &value)?),
            "start-date" => {
                spec.start_date = value.parse().map_err(|e: Error| {
                    Error::InvalidConfig(format!("line {lineno}: {e}"))
                })?
            }
            "date-step" => spec.date_step_days = super::parse_num(lineno, &key, &value)?,
            "gains" => spec.gains = parse_list(lineno, &key, &value)?,
            "offsets" => spec.offsets = parse_list(lineno, &key, &value)?,
            "change-patches" => spec.change_patches = super::parse_num(lineno, &key, &value)?,
            "patch-magnitude" => spec.patch_magnitude = super::parse_num(lineno, &key, &value)?,
            "fine-noise-sd" => spec.fine_noise_sd = super::parse_num(lineno, &key, &value)?,
            "coarse-noise-sd" => spec.coarse_noise_sd = super::parse_num(lineno, &key, &value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "line {lineno}: unknown scene key {other:?}"
                )))
            }
        }
    }

    let sx = per_band(shift_x.0, "shift-x", &shift_x.1, spec.bands)?;
    let sy = per_band(shift_y.0, "shift-y", &shift_y.1, spec.bands)?;
    let sg = per_band(sigma.0, "sigma", &sigma.1, spec.bands)?;
    spec.true_params = (0..spec.bands)
        .map(|b| UpscaleParams::new(sx[b], sy[b], sg[b]))
        .collect::<Result<Vec<_>>>()?;

    if spec.offsets.len() == 1 && spec.gains.len() > 1 {
        spec.offsets = vec![spec.offsets[0]; spec.gains.len()];
    }
    spec.validate()?;
    Ok(spec)
}
