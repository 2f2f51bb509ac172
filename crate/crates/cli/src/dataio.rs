use anyhow::{bail, Context, Result};
use cpmle_core::Dataset;
use std::path::Path;

/// Reads a numeric CSV: comma-separated, '.' decimal, rows are ordered
/// observations, columns are dimensions. A single non-numeric first row is
/// treated as a header and skipped.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let mut row = Vec::with_capacity(record.len());
        let mut parse_failed_at = None;
        for (col, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    parse_failed_at = Some(col);
                    break;
                }
            }
        }
        match parse_failed_at {
            None => rows.push(row),
            Some(col) => {
                if line == 0 && rows.is_empty() {
                    continue; // header row
                }
                bail!(
                    "{}: line {}, column {}: not a number: {:?}",
                    path.display(),
                    line + 1,
                    col + 1,
                    record.get(col).unwrap_or("")
                );
            }
        }
    }
    if rows.is_empty() {
        bail!("{}: no numeric rows", path.display());
    }
    Dataset::from_rows(&rows).map_err(anyhow::Error::from)
}

/// Writes a dataset back to CSV with shortest-round-trip float formatting,
/// so parse -> serialize -> parse is the identity.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_serialize_parse_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let original = dir.path().join("data.csv");
        std::fs::write(&original, "0.1,2.5\n-3.25,1e-3\n7,0.3333333333333333\n").unwrap();
        let parsed = read_csv(&original).unwrap();
        let echoed = dir.path().join("echo.csv");
        write_csv(&parsed, &echoed).unwrap();
        let reparsed = read_csv(&echoed).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn header_row_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("headed.csv");
        std::fs::write(&path, "x,y\n1,2\n3,4\n").unwrap();
        let parsed = read_csv(&path).unwrap();
        assert_eq!(parsed.n(), 2);
        assert_eq!(parsed.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn mid_file_garbage_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,oops\n").unwrap();
        let err = read_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("column 2"), "{err}");
    }
}
