//! File interchange: the binary raster container, parameter documents,
//! search-trace CSV, and scene specification text files.

pub mod container;
pub mod params;
pub mod scene;
pub mod trace;

pub use container::{read_series, read_series_bytes, write_series, write_series_bytes, RasterMeta};
pub use params::{parse_params, write_params, ParamsEntry};
pub use scene::{parse_scene_spec, write_scene_spec};
pub use trace::trace_to_csv;

use crate::error::{Error, Result};

/// Splits `key = value` lines, skipping blanks and `#` comments. Returns
/// `(line number, key, value)` triples.
pub(crate) fn key_value_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got {:?}",
                lineno + 1,
                raw
            )));
        };
        out.push((
            lineno + 1,
            key.trim().to_string(),
            value.trim().to_string(),
        ));
    }
    Ok(out)
}

pub(crate) fn parse_num<T: std::str::FromStr>(lineno: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::InvalidConfig(format!(
            "line {lineno}: cannot parse {key} value {value:?}"
        ))
    })
}
