use std::path::Path;

use super::{ColumnKind, Dataset, Schema};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A loaded dataset plus any non-fatal warnings raised while mapping
/// category strings to codes.
#[derive(Debug)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Loads a comma-separated, header-first, UTF-8 file against `schema`.
/// Categorical strings map to their schema codes; unseen strings map to
/// the reserved missing slot with a warning. Empty categorical fields are
/// treated as missing.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<LoadedCsv> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Data(format!("cannot read '{}': {e}", path.display()))
    })?;
    load_csv_str(&text, schema)
}

pub fn load_csv_str(text: &str, schema: &Schema) -> Result<LoadedCsv> {
    schema.validate()?;
    let mut records = parse_csv(text);
    if records.is_empty() {
        return Err(Error::Data("empty file: no header row".into()));
    }
    let header = records.remove(0);
    let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::Data(format!(
            "header mismatch: expected [{}], found [{}]",
            expected.join(","),
            header.join(",")
        )));
    }

    let n_rows = records.len();
    let numeric_cols = schema.numeric_columns().len();
    let mut numeric = Vec::with_capacity(n_rows * numeric_cols);
    let mut categorical = Vec::new();
    let mut labels = Vec::with_capacity(n_rows);
    let mut weights: Vec<f64> = Vec::new();
    let has_weight = schema.weight_column().is_some();
    let mut warnings: Vec<String> = Vec::new();

    for (row_idx, record) in records.iter().enumerate() {
        if record.len() != schema.columns.len() {
            return Err(Error::Data(format!(
                "row {}: expected {} fields, found {}",
                row_idx + 1,
                schema.columns.len(),
                record.len()
            )));
        }
        for (col, field) in schema.columns.iter().zip(record) {
            let field = field.trim();
            match col.kind {
                ColumnKind::Numeric => {
                    numeric.push(parse_numeric(field, row_idx, &col.name)?);
                }
                ColumnKind::Weight => {
                    weights.push(parse_numeric(field, row_idx, &col.name)?);
                }
                ColumnKind::Label => {
                    labels.push(match field {
                        "0" => 0,
                        "1" => 1,
                        other => {
                            return Err(Error::Data(format!(
                                "row {}, column '{}': label must be 0 or 1, found '{other}'",
                                row_idx + 1,
                                col.name
                            )))
                        }
                    });
                }
                ColumnKind::Categorical => {
                    let cats = col.categories.as_ref().expect("validated schema");
                    let missing_slot = cats.len() as u32;
                    let code = if field.is_empty() {
                        missing_slot
                    } else {
                        match cats.iter().position(|c| c == field) {
                            Some(i) => i as u32,
                            None => {
                                let warning = format!(
                                    "column '{}': unseen category '{field}' mapped to missing slot",
                                    col.name
                                );
                                if !warnings.contains(&warning) {
                                    warnings.push(warning);
                                }
                                missing_slot
                            }
                        }
                    };
                    categorical.push(code);
                }
            }
        }
    }

    let dataset = Dataset::new(
        schema.clone(),
        Matrix::from_vec(n_rows, numeric_cols, numeric),
        categorical,
        labels,
        if has_weight { Some(weights) } else { None },
    )?;
    Ok(LoadedCsv { dataset, warnings })
}

fn parse_numeric(field: &str, row_idx: usize, col: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::Data(format!(
            "row {}, column '{col}': cannot parse '{field}' as a number",
            row_idx + 1
        ))
    })
}

/// Minimal RFC-4180 reader: quoted fields, doubled-quote escapes, CRLF or
/// LF records. Blank trailing lines are skipped.
pub(crate) fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    let mut chars = text.chars().peekable();
    let mut saw_any = false;

    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        field.push('"');
                    } else {
                        in_quotes = false;
                    }
                }
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' => in_quotes = true,
            ',' => {
                record.push(std::mem::take(&mut field));
                saw_any = true;
            }
            '\r' => {}
            '\n' => {
                if saw_any || !field.is_empty() {
                    record.push(std::mem::take(&mut field));
                    records.push(std::mem::take(&mut record));
                }
                saw_any = false;
            }
            _ => {
                field.push(c);
                saw_any = true;
            }
        }
    }
    if saw_any || !field.is_empty() {
        record.push(field);
        records.push(record);
    }
    records
}
