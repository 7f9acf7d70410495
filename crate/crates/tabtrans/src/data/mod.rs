//! Typed datasets: CSV ingestion, schema typing, outlier filtering,
//! scaling, encoding, stratified splitting, and SMOTE class balancing.

mod io;
mod smote;
mod split;
mod transform;

pub use io::{load_csv, load_csv_str, LoadedCsv};
pub(crate) use io::parse_csv as parse_csv_text;
pub use smote::{smote, SmoteConfig, SmoteResult};
pub use split::{stratified_assignments, stratified_split, FoldPlan, SplitResult};
pub use transform::{
    encode, standard_scale_fit, zscore_filter, EncodeMode, Encoded, RemovalReport, RemovedRow,
    ScalerParams,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Weight,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category strings for categorical columns. The code space
    /// is `0..categories.len()` plus a reserved trailing missing slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn numeric(name: &str) -> Self {
        ColumnSpec { name: name.into(), kind: ColumnKind::Numeric, categories: None }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: Some(categories.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn label(name: &str) -> Self {
        ColumnSpec { name: name.into(), kind: ColumnKind::Label, categories: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Schema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.columns.iter().filter(|c| c.kind == ColumnKind::Label).count();
        if labels != 1 {
            return Err(Error::Config(format!(
                "schema must have exactly one label column, found {labels}"
            )));
        }
        let weights = self.columns.iter().filter(|c| c.kind == ColumnKind::Weight).count();
        if weights > 1 {
            return Err(Error::Config("schema may have at most one weight column".into()));
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.columns.len() {
            return Err(Error::Config("schema column names must be unique".into()));
        }
        for col in &self.columns {
            match col.kind {
                ColumnKind::Categorical => {
                    if col.categories.is_none() {
                        return Err(Error::Config(format!(
                            "categorical column '{}' must enumerate its categories",
                            col.name
                        )));
                    }
                }
                _ => {
                    if col.categories.is_some() {
                        return Err(Error::Config(format!(
                            "non-categorical column '{}' must not list categories",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> &ColumnSpec {
        self.columns.iter().find(|c| c.kind == ColumnKind::Label).expect("validated")
    }

    pub fn numeric_columns(&self) -> Vec<&ColumnSpec> {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Numeric).collect()
    }

    pub fn categorical_columns(&self) -> Vec<&ColumnSpec> {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Categorical).collect()
    }

    pub fn weight_column(&self) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.kind == ColumnKind::Weight)
    }

    /// Stable fingerprint used to guard model/schema pairing on load.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("schema serializes");
        format!("{:016x}", fnv1a64(json.as_bytes()))
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Typed column store. Numeric values and categorical codes live in
/// separate row-aligned matrices; `provenance` tracks each row's index in
/// the originally loaded file through every filter and subset, which is
/// what the cross-validation leakage guard audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Schema,
    /// n_rows x (#numeric columns), schema order.
    pub numeric: Matrix,
    /// Row-major codes, n_rows x (#categorical columns). A code equal to
    /// the column's category count is the reserved missing slot.
    categorical: Vec<u32>,
    n_categorical: usize,
    pub labels: Vec<u8>,
    pub weights: Option<Vec<f64>>,
    pub provenance: Vec<usize>,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        numeric: Matrix,
        categorical: Vec<u32>,
        labels: Vec<u8>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        schema.validate()?;
        let n_categorical = schema.categorical_columns().len();
        let n_rows = labels.len();
        if numeric.rows() != n_rows
            || numeric.cols() != schema.numeric_columns().len()
            || categorical.len() != n_rows * n_categorical
            || weights.as_ref().is_some_and(|w| w.len() != n_rows)
        {
            return Err(Error::Data("dataset buffers disagree on row count".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be binary (0/1)".into()));
        }
        let cat_cols = schema.categorical_columns();
        for (i, code) in categorical.iter().enumerate() {
            let col = &cat_cols[i % n_categorical.max(1)];
            let slots = col.categories.as_ref().map_or(0, |c| c.len()) as u32;
            if *code > slots {
                return Err(Error::Data(format!(
                    "categorical code {code} out of range for column '{}'",
                    col.name
                )));
            }
        }
        let provenance = (0..n_rows).collect();
        Ok(Dataset {
            schema,
            numeric,
            categorical,
            n_categorical,
            labels,
            weights,
            provenance,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_numeric(&self) -> usize {
        self.numeric.cols()
    }

    pub fn n_categorical(&self) -> usize {
        self.n_categorical
    }

    /// Codes of one row, schema categorical order.
    pub fn codes_row(&self, r: usize) -> &[u32] {
        &self.categorical[r * self.n_categorical..(r + 1) * self.n_categorical]
    }

    pub fn categorical_col(&self, c: usize) -> Vec<u32> {
        (0..self.n_rows()).map(|r| self.categorical[r * self.n_categorical + c]).collect()
    }

    /// Number of code slots (categories + missing) of categorical column `c`.
    pub fn category_slots(&self, c: usize) -> usize {
        self.schema.categorical_columns()[c]
            .categories
            .as_ref()
            .map_or(1, |cats| cats.len() + 1)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.labels.len() - pos)
    }

    /// Row subset in the given order; provenance follows the rows.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let numeric = self.numeric.select_rows(rows);
        let mut categorical = Vec::with_capacity(rows.len() * self.n_categorical);
        for &r in rows {
            categorical.extend_from_slice(self.codes_row(r));
        }
        Dataset {
            schema: self.schema.clone(),
            numeric,
            categorical,
            n_categorical: self.n_categorical,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| rows.iter().map(|&r| w[r]).collect()),
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
        }
    }
}

/// Default schema for the heart-disease table this pipeline targets:
/// six numeric features, five categorical features, binary label.
pub fn heart_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::numeric("Age"),
        ColumnSpec::categorical("Sex", &["F", "M"]),
        ColumnSpec::categorical("ChestPainType", &["TA", "ATA", "NAP", "ASY"]),
        ColumnSpec::numeric("RestingBP"),
        ColumnSpec::numeric("Cholesterol"),
        ColumnSpec::numeric("FastingBS"),
        ColumnSpec::categorical("RestingECG", &["Normal", "ST", "LVH"]),
        ColumnSpec::numeric("MaxHR"),
        ColumnSpec::categorical("ExerciseAngina", &["N", "Y"]),
        ColumnSpec::numeric("Oldpeak"),
        ColumnSpec::categorical("ST_Slope", &["Up", "Flat", "Down"]),
        ColumnSpec::label("HeartDisease"),
    ])
    .expect("builtin schema is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_requires_single_label() {
        let err = Schema::new(vec![ColumnSpec::numeric("a")]);
        assert!(err.is_err());
        let err = Schema::new(vec![
            ColumnSpec::label("y"),
            ColumnSpec::label("z"),
            ColumnSpec::numeric("a"),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn schema_rejects_duplicate_names() {
        let err = Schema::new(vec![
            ColumnSpec::numeric("a"),
            ColumnSpec::numeric("a"),
            ColumnSpec::label("y"),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn fingerprint_stable_and_sensitive() {
        let a = heart_schema().fingerprint();
        let b = heart_schema().fingerprint();
        assert_eq!(a, b);
        let other = Schema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::label("y")])
            .unwrap()
            .fingerprint();
        assert_ne!(a, other);
    }

    #[test]
    fn subset_tracks_provenance() {
        let schema =
            Schema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::label("y")]).unwrap();
        let ds = Dataset::new(
            schema,
            Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]),
            vec![],
            vec![0, 1, 0, 1],
            None,
        )
        .unwrap();
        let sub = ds.subset(&[3, 1]);
        assert_eq!(sub.provenance, vec![3, 1]);
        assert_eq!(sub.labels, vec![1, 1]);
        let subsub = sub.subset(&[1]);
        assert_eq!(subsub.provenance, vec![1]);
    }
}
