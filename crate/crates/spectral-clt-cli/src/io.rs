//! CSV ingestion: comma-separated, '.' decimal point, optional single header
//! row (auto-detected when the first row fails numeric parsing), UTF-8.
//! Ragged rows are rejected with a row-numbered diagnostic.

use std::path::Path;

use spectral_clt::estimators::DataMatrix;

pub fn read_csv(path: &Path, transpose: bool) -> Result<DataMatrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(w) = width {
                    if values.len() != w {
                        return Err(format!(
                            "{}: row {} has {} fields, expected {}",
                            path.display(),
                            idx + 1,
                            values.len(),
                            w
                        ));
                    }
                } else {
                    width = Some(values.len());
                }
                rows.push(values);
            }
            Err(_) if idx == 0 => {
                // non-numeric first row: treat as header
                continue;
            }
            Err(e) => {
                return Err(format!("{}: row {} is not numeric: {e}", path.display(), idx + 1))
            }
        }
    }
    if rows.is_empty() {
        return Err(format!("{}: no numeric data rows", path.display()));
    }
    let rows = if transpose {
        let w = rows[0].len();
        (0..w)
            .map(|j| rows.iter().map(|r| r[j]).collect::<Vec<f64>>())
            .collect()
    } else {
        rows
    };
    DataMatrix::from_rows(&rows).map_err(|e| format!("{}: {e}", path.display()))
}

/// Parse a discrete spectrum "t:w,t:w,...".
pub fn parse_atoms(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut atoms = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (t, w) = part
            .split_once(':')
            .ok_or_else(|| format!("atom '{part}' must have the form t:w"))?;
        let t: f64 = t.trim().parse().map_err(|e| format!("atom '{part}': {e}"))?;
        let w: f64 = w.trim().parse().map_err(|e| format!("atom '{part}': {e}"))?;
        atoms.push((t, w));
    }
    if atoms.is_empty() {
        return Err("no atoms given".into());
    }
    Ok(atoms)
}
