//! Plain-text parameter documents: one `[section]` per fitted band (or
//! date/band pair), holding shift-x, shift-y, sigma, and the objective.

use crate::date::Date;
use crate::error::{Error, Result};
use crate::psf::UpscaleParams;

/// One fitted parameter set. `date` is absent for generalized parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsEntry {
    pub date: Option<Date>,
    pub band: String,
    pub params: UpscaleParams,
    pub objective: f64,
}

impl ParamsEntry {
    fn section(&self) -> String {
        match self.date {
            Some(d) => format!("{d}/{}", self.band),
            None => self.band.clone(),
        }
    }
}

/// Renders entries as a key-value document. `header` lines are embedded as
/// comments (the CLI puts the resolved configuration there).
pub fn write_params(entries: &[ParamsEntry], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    for e in entries {
        out.push_str(&format!("\n[{}]\n", e.section()));
        out.push_str(&format!("shift-x = {}\n", e.params.shift_x));
        out.push_str(&format!("shift-y = {}\n", e.params.shift_y));
        out.push_str(&format!("sigma = {}\n", e.params.sigma));
        out.push_str(&format!("objective = {}\n", e.objective));
    }
    out
}

pub fn parse_params(text: &str) -> Result<Vec<ParamsEntry>> {
    let mut entries: Vec<ParamsEntry> = Vec::new();
    let mut current: Option<(Option<Date>, String, [Option<f64>; 4])> = None;

    let finish = |state: Option<(Option<Date>, String, [Option<f64>; 4])>,
                      entries: &mut Vec<ParamsEntry>|
     -> Result<()> {
        if let Some((date, band, fields)) = state {
            let [sx, sy, sigma, objective] = fields;
            let missing = |what: &str, band: &str| {
                Error::InvalidConfig(format!("section [{band}] is missing {what}"))
            };
            let params = UpscaleParams::new(
                sx.ok_or_else(|| missing("shift-x", &band))?,
                sy.ok_or_else(|| missing("shift-y", &band))?,
                sigma.ok_or_else(|| missing("sigma", &band))?,
            )?;
            let objective = objective.ok_or_else(|| missing("objective", &band))?;
            entries.push(ParamsEntry {
                date,
                band,
                params,
                objective,
            });
        }
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            finish(current.take(), &mut entries)?;
            let (date, band) = match name.split_once('/') {
                Some((d, b)) => (Some(d.parse::<Date>()?), b.to_string()),
                None => (None, name.to_string()),
            };
            current = Some((date, band, [None; 4]));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            )));
        };
        let Some((_, _, fields)) = current.as_mut() else {
            return Err(Error::InvalidConfig(format!(
                "line {}: value outside any [section]",
                lineno + 1
            )));
        };
        let slot = match key.trim() {
            "shift-x" => 0,
            "shift-y" => 1,
            "sigma" => 2,
            "objective" => 3,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "line {}: unknown parameter key {other:?}",
                    lineno + 1
                )))
            }
        };
        fields[slot] = Some(super::parse_num(lineno + 1, key.trim(), value.trim())?);
    }
    finish(current, &mut entries)?;
    if entries.is_empty() {
        return Err(Error::EmptyInput("parameter document holds no sections".into()));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_per_pair_and_generalized_entries() {
        let entries = vec![
            ParamsEntry {
                date: Some("2023-06-17".parse().unwrap()),
                band: "red".into(),
                params: UpscaleParams::new(1.0, -0.4, 1.2).unwrap(),
                objective: 0.987654321,
            },
            ParamsEntry {
                date: None,
                band: "nir".into(),
                params: UpscaleParams::new(0.0, 0.0, 0.7).unwrap(),
                objective: 0.91,
            },
        ];
        let text = write_params(&entries, "tool = test\nrun = 1");
        let back = parse_params(&text).unwrap();
        assert_eq!(back, entries);
        assert!(text.contains("# tool = test"));
        assert!(text.contains("[2023-06-17/red]"));
        assert!(text.contains("[nir]"));
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(parse_params("").is_err());
        assert!(parse_params("shift-x = 1\n").is_err()); // value before section
        assert!(parse_params("[red]\nshift-x = 1\n").is_err()); // incomplete
        assert!(parse_params("[red]\nwat = 1\n").is_err()); // unknown key
        assert!(parse_params("[red]\nshift-x = abc\n").is_err());
    }
}
