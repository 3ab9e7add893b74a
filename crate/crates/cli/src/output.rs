//! CSV and JSON writers with a fixed number format.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Twelve significant digits in plain decimal notation.
pub fn sig12(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = if x == 0.0 { 0 } else { x.abs().log10().floor() as i32 };
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes CSV rows (header first) to `out`, or to stdout when `out` is `None`.
pub fn write_csv(out: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buffer = Vec::new();
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buffer);
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
    }
    emit(out, &buffer)
}

pub fn write_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    emit(out, &text)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| CliError::new("io", format!("cannot write {}: {e}", path.display())))
        }
        None => Ok(io::stdout().lock().write_all(bytes)?),
    }
}

/// `<stem>.json` next to a CSV output.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.32), "0.320000000000");
        assert_eq!(sig12(0.0), "0.00000000000");
        assert_eq!(sig12(-0.0), "0.00000000000");
        assert_eq!(sig12(-0.00123), "-0.00123000000000");
        assert_eq!(sig12(1234.5), "1234.50000000");
        assert_eq!(sig12(0.1 + 0.2), "0.300000000000");
    }

    #[test]
    fn sidecar_sits_next_to_the_csv() {
        assert_eq!(sidecar_path(Path::new("out/run.csv")), PathBuf::from("out/run.json"));
    }
}
