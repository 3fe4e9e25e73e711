use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use swdgp::PredictiveResult;

use crate::error::CliError;

/// One parsed data row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub x: f64,
    pub y: f64,
    /// 1-based line number in the input file.
    pub line: u64,
}

fn parse_field(field: &str) -> Option<f64> {
    let v: f64 = field.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads `x,y` rows. The first record is treated as a header when any of
/// its fields is not a number. Blank lines and lines starting with `#` are
/// skipped.
pub fn read_xy(path: &Path) -> Result<Vec<Row>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut first = true;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let text = line.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = i as u64 + 1;
        let text = text.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(|f| f.trim().trim_matches('"')).collect();
        let values: Vec<Option<f64>> = fields.iter().map(|f| parse_field(f)).collect();
        if std::mem::take(&mut first) && values.iter().any(Option::is_none) {
            continue;
        }
        if values.len() != 2 {
            return Err(CliError::Usage(format!(
                "{} line {line}: expected 2 columns (x, y), found {}; only 1-D inputs are supported",
                path.display(),
                values.len()
            )));
        }
        match (values[0], values[1]) {
            (Some(x), Some(y)) => rows.push(Row { x, y, line }),
            _ => {
                return Err(CliError::Usage(format!(
                    "{} line {line}: '{text}' is not a pair of finite numbers",
                    path.display()
                )))
            }
        }
    }
    Ok(rows)
}

/// `count` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// The output path when it names a file rather than standard output.
pub fn file_output(path: Option<&Path>) -> Option<PathBuf> {
    path.filter(|p| *p != Path::new("-")).map(Path::to_path_buf)
}

pub fn write_predictions_csv<W: Write, C: Serialize>(
    mut out: W,
    config: &C,
    test: &[f64],
    pred: &PredictiveResult,
) -> io::Result<()> {
    writeln!(out, "# config={}", serde_json::to_string(config)?)?;
    writeln!(out, "x,mean,variance,observation_variance")?;
    for (i, x) in test.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            float(*x),
            float(pred.mean[i]),
            float(pred.variance[i]),
            float(pred.observation_variance(i))
        )?;
    }
    out.flush()
}

pub fn write_predictions_json<W: Write, C: Serialize>(
    mut out: W,
    config: &C,
    test: &[f64],
    pred: &PredictiveResult,
) -> io::Result<()> {
    let observation: Vec<f64> = (0..pred.len()).map(|i| pred.observation_variance(i)).collect();
    let doc = json!({
        "config": config,
        "x": test,
        "mean": pred.mean,
        "variance": pred.variance,
        "observation_variance": observation,
        "clamped": pred.clamped,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_str(text: &str) -> Result<Vec<Row>, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, text).unwrap();
        read_xy(&path)
    }

    #[test]
    fn header_is_sniffed() {
        let with = read_str("x,y\n0.5,1\n1.5,2\n").unwrap();
        let without = read_str("0.5,1\n1.5,2\n").unwrap();
        assert_eq!(with.len(), 2);
        assert_eq!(without.len(), 2);
        assert_eq!(with[0].x, without[0].x);
        assert_eq!(with[1].line, 3);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let rows = read_str("# note\n\n1e-3, -2.5E1\n").unwrap();
        assert_eq!(
            rows,
            vec![Row {
                x: 1e-3,
                y: -25.0,
                line: 3
            }]
        );
    }

    #[test]
    fn bad_rows_are_named() {
        let err = read_str("x,y\n1,2\n3,abc\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read_str("1,2,3\n4,5,6\n").unwrap_err();
        assert!(err.to_string().contains("1-D"), "{err}");
        // comma decimal separators are not numbers
        assert!(read_str("x;y\n0,5;1\n").is_err());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            let s = float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').len(), 18);
        }
    }

    #[test]
    fn linspace_ends() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 5.0, 1), vec![2.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
