use std::path::Path;

use mbf_core::linalg::Matrix;

use crate::CliError;

/// Reads a comma-separated numeric matrix, one observation per line.
/// Blank lines are ignored; `header` skips the first line.
pub fn read_matrix(path: &Path, header: bool) -> Result<Matrix, CliError> {
    let name = path.display();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let &mut expected = width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(CliError::Data(format!(
                "{name} line {line}: expected {expected} fields, found {}",
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "{name} line {line}, column {}: not a finite number: {f:?}",
                            j + 1
                        ))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::Data(format!("{name}: {e}")))
}
