//! Report rows and their CSV and JSON renderings.

use std::io::Write;

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// One evaluated quantity. Every numeric field carries 12 significant
/// digits; missing or non-finite values render as an empty CSV cell or a
/// JSON `null`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub quantity: String,
    pub model: String,
    pub x: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub value: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_se: Option<f64>,
    pub z: Option<f64>,
    /// Set in verify mode when the comparison fails.
    pub flag: String,
    pub branch: String,
    pub tol_achieved: Option<f64>,
    /// Wall time, only with `--timing` so that output stays reproducible.
    pub ms: Option<f64>,
}

/// Column order of the CSV header.
pub const COLUMNS: [&str; 16] = [
    "quantity", "model", "x", "a", "b", "c", "p", "q", "value", "mc_mean", "mc_se", "z", "flag",
    "branch", "tol_achieved", "ms",
];

/// Rounds to 12 significant digits; non-finite values become `None`.
pub fn sig12(v: f64) -> Option<f64> {
    if v.is_finite() {
        Some(format!("{v:.11e}").parse().expect("formatted float parses"))
    } else {
        None
    }
}

pub fn opt12(v: Option<f64>) -> Option<f64> {
    v.and_then(sig12)
}

impl Report {
    /// Applies the output precision to every numeric field.
    pub fn rounded(mut self) -> Report {
        for f in [
            &mut self.x,
            &mut self.a,
            &mut self.b,
            &mut self.c,
            &mut self.p,
            &mut self.q,
            &mut self.value,
            &mut self.mc_mean,
            &mut self.mc_se,
            &mut self.z,
            &mut self.tol_achieved,
            &mut self.ms,
        ] {
            *f = opt12(*f);
        }
        self
    }
}

pub fn emit(reports: &[Report], format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Validation(format!("cannot write output: {e}"));
    let rows: Vec<Report> = reports.iter().cloned().map(Report::rounded).collect();
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            let fail = |e: csv::Error| CliError::Validation(format!("cannot write output: {e}"));
            w.write_record(COLUMNS).map_err(fail)?;
            for r in &rows {
                w.serialize(r).map_err(fail)?;
            }
            w.flush().map_err(io)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &rows)
                .map_err(|e| CliError::Validation(format!("cannot write output: {e}")))?;
            writeln!(out).map_err(io)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.731058578630005), Some(0.73105857863));
        assert_eq!(sig12(1.0 / 3.0), Some(0.333333333333));
        assert_eq!(sig12(f64::NAN), None);
        assert_eq!(sig12(f64::INFINITY), None);
    }

    #[test]
    fn empty_outputs() {
        let mut buf = Vec::new();
        emit(&[], Format::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), COLUMNS.join(",") + "\n");
        let mut buf = Vec::new();
        emit(&[], Format::Json, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "[]");
    }

    #[test]
    fn one_row_has_every_column() {
        let r = Report {
            quantity: "exit-above".into(),
            model: "brownian-drift".into(),
            x: Some(1.0),
            value: Some(0.5),
            ..Report::default()
        };
        let mut buf = Vec::new();
        emit(&[r], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), COLUMNS.len());
    }
}
