//! CSV and JSON result files with a configuration echo.
//!
//! CSV layout:
//!
//! ```text
//! # n = 20
//! # hops = 9,18,56
//! # ...
//! m,mode,negativity,neg_err,fidelity,fid_err,trajectories,seconds
//! 9,dynamic,0.459312,0.00871245,0.702113,0.00612004,200,0
//! ```
//!
//! JSON is an object `{"config": "<echo text>", "rows": [...]}`; rows carry
//! the per-variant breakdown in post-selection mode. Reals are rounded to six
//! significant digits in both formats.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use super::{ResultRow, VariantResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "m,mode,negativity,neg_err,fidelity,fid_err,trajectories,seconds";

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float parses")
}

fn r6(x: f64) -> f64 {
    round_sig(x, 6)
}

fn rounded(row: &ResultRow) -> ResultRow {
    ResultRow {
        negativity: r6(row.negativity),
        neg_err: r6(row.neg_err),
        fidelity: r6(row.fidelity),
        fid_err: r6(row.fid_err),
        seconds: r6(row.seconds),
        variants: row
            .variants
            .iter()
            .map(|v| VariantResult {
                weight: r6(v.weight),
                negativity: v.negativity.map(r6),
                fidelity: v.fidelity.map(r6),
                ..v.clone()
            })
            .collect(),
        ..row.clone()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFile {
    config: String,
    rows: Vec<ResultRow>,
}

/// Parsed contents of a results file.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsFile {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
}

pub fn format_results(rows: &[ResultRow], config: &ExperimentConfig, format: OutputFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::ResultsFormat("no rows to write".into()));
    }
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            for line in config.to_text().lines() {
                let _ = writeln!(out, "# {line}");
            }
            out.push_str(CSV_HEADER);
            out.push('\n');
            for row in rows.iter().map(rounded) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    row.m, row.mode, row.negativity, row.neg_err, row.fidelity, row.fid_err, row.trajectories, row.seconds
                );
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let file = JsonFile { config: config.to_text(), rows: rows.iter().map(rounded).collect() };
            let mut text = serde_json::to_string_pretty(&file)?;
            text.push('\n');
            Ok(text)
        }
    }
}

/// Writes results to `writer`.
pub fn emit_results<W: Write>(rows: &[ResultRow], config: &ExperimentConfig, format: OutputFormat, writer: &mut W) -> Result<()> {
    writer.write_all(format_results(rows, config, format)?.as_bytes())?;
    writer.flush()?;
    Ok(())
}

/// Reads either format back; JSON is recognized by a leading `{`.
pub fn parse_results(text: &str) -> Result<ResultsFile> {
    if text.trim_start().starts_with('{') {
        let file: JsonFile = serde_json::from_str(text)?;
        return Ok(ResultsFile { config: ExperimentConfig::parse(&file.config)?, rows: file.rows });
    }
    let bad = |line: usize, msg: String| Error::ResultsFormat(format!("line {line}: {msg}"));
    let mut echo = String::new();
    let mut rows = Vec::new();
    let mut header = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(rest) = line.strip_prefix("# ") {
            echo.push_str(rest);
            echo.push('\n');
        } else if line == CSV_HEADER {
            header = true;
        } else if line.is_empty() {
            continue;
        } else {
            if !header {
                return Err(bad(line_no, "data before header".into()));
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(line_no, format!("expected 8 fields, got {}", f.len())));
            }
            let real = |s: &str| s.parse::<f64>().map_err(|e| bad(line_no, format!("{s:?}: {e}")));
            rows.push(ResultRow {
                m: f[0].parse().map_err(|e| bad(line_no, format!("m: {e}")))?,
                mode: f[1].parse()?,
                negativity: real(f[2])?,
                neg_err: real(f[3])?,
                fidelity: real(f[4])?,
                fid_err: real(f[5])?,
                trajectories: f[6].parse().map_err(|e| bad(line_no, format!("trajectories: {e}")))?,
                seconds: real(f[7])?,
                variants: Vec::new(),
            });
        }
    }
    if !header {
        return Err(Error::ResultsFormat("missing CSV header".into()));
    }
    Ok(ResultsFile { config: ExperimentConfig::parse(&echo)?, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wheel::CorrectionMode;

    fn row(m: usize) -> ResultRow {
        ResultRow {
            m,
            mode: CorrectionMode::PostSelection,
            negativity: 0.45931234567,
            neg_err: 0.008712449,
            fidelity: 1.0,
            fid_err: 0.0,
            trajectories: 200,
            seconds: 0.0,
            variants: vec![VariantResult { z: true, x: false, weight: 0.25, negativity: Some(0.4), fidelity: None }],
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(0.45931234567, 6), 0.459312);
        assert_eq!(round_sig(123456789.0, 6), 123457000.0);
        assert_eq!(round_sig(-0.000123456789, 6), -0.000123457);
        assert_eq!(round_sig(0.0, 6), 0.0);
    }

    #[test]
    fn one_row_csv() {
        let text = format_results(&[row(9)], &ExperimentConfig::default(), OutputFormat::Csv).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec![CSV_HEADER, "9,post_selection,0.459312,0.00871245,1,0,200,0"]);
    }

    #[test]
    fn csv_json_csv_round_trip() {
        let config = ExperimentConfig { hops: vec![3, 9], seed: 42, ..ExperimentConfig::default() };
        let csv = format_results(&[row(3), row(9)], &config, OutputFormat::Csv).unwrap();
        let parsed = parse_results(&csv).unwrap();
        assert_eq!(parsed.config, config);
        let json = format_results(&parsed.rows, &parsed.config, OutputFormat::Json).unwrap();
        let back = parse_results(&json).unwrap();
        assert_eq!(back, parsed);
        assert_eq!(format_results(&back.rows, &back.config, OutputFormat::Csv).unwrap(), csv);
    }

    #[test]
    fn json_keeps_variants() {
        let json = format_results(&[row(3)], &ExperimentConfig::default(), OutputFormat::Json).unwrap();
        let parsed = parse_results(&json).unwrap();
        assert_eq!(parsed.rows[0].variants.len(), 1);
        assert_eq!(parsed.rows[0].negativity, 0.459312);
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(format_results(&[], &ExperimentConfig::default(), OutputFormat::Csv).is_err());
    }
}
