use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovedRow {
    /// Provenance index of the removed row (position in the original file).
    pub row: usize,
    pub offending_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovalReport {
    pub tau: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub removed: Vec<RemovedRow>,
    /// Zero-spread columns skipped with a warning (no row can exceed tau).
    pub skipped_columns: Vec<String>,
}

/// Removes every row where any selected numeric column has
/// |x - mean| / std > tau, with mean and population std taken over the
/// full input. `columns` indexes the numeric matrix; `None` means all
/// numeric columns.
pub fn zscore_filter(
    ds: &Dataset,
    tau: f64,
    columns: Option<&[usize]>,
) -> Result<(Dataset, RemovalReport)> {
    if tau <= 0.0 {
        return Err(Error::Config(format!("zscore_filter: tau must be > 0, got {tau}")));
    }
    let all: Vec<usize> = (0..ds.n_numeric()).collect();
    let selected = columns.unwrap_or(&all);
    if let Some(&bad) = selected.iter().find(|&&c| c >= ds.n_numeric()) {
        return Err(Error::Config(format!(
            "zscore_filter: column index {bad} out of range ({} numeric columns)",
            ds.n_numeric()
        )));
    }
    let names: Vec<String> = ds
        .schema
        .numeric_columns()
        .iter()
        .map(|c| c.name.clone())
        .collect();

    let n = ds.n_rows() as f64;
    let mut skipped = Vec::new();
    let mut bounds = Vec::new(); // (col, mean, std)
    for &c in selected {
        let col = ds.numeric.col(c);
        let mean = col.iter().sum::<f64>() / n.max(1.0);
        let std = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n.max(1.0)).sqrt();
        if std == 0.0 {
            skipped.push(names[c].clone());
        } else {
            bounds.push((c, mean, std));
        }
    }

    let mut keep = Vec::with_capacity(ds.n_rows());
    let mut removed = Vec::new();
    for r in 0..ds.n_rows() {
        let offending: Vec<String> = bounds
            .iter()
            .filter(|(c, mean, std)| ((ds.numeric.get(r, *c) - mean) / std).abs() > tau)
            .map(|(c, _, _)| names[*c].clone())
            .collect();
        if offending.is_empty() {
            keep.push(r);
        } else {
            removed.push(RemovedRow { row: ds.provenance[r], offending_columns: offending });
        }
    }

    let out = ds.subset(&keep);
    let report = RemovalReport {
        tau,
        n_in: ds.n_rows(),
        n_out: out.n_rows(),
        removed,
        skipped_columns: skipped,
    };
    Ok((out, report))
}

/// Per-column standardization parameters fitted on a training partition.
/// Population (n) standard deviation by convention, so tests are exact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn standard_scale_fit(fit: &Dataset) -> Result<ScalerParams> {
    if fit.n_rows() == 0 {
        return Err(Error::Data("standard_scale: empty fit partition".into()));
    }
    let n = fit.n_rows() as f64;
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for c in 0..fit.n_numeric() {
        let col = fit.numeric.col(c);
        let m = col.iter().sum::<f64>() / n;
        let s = (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
        mean.push(m);
        std.push(s);
    }
    Ok(ScalerParams {
        columns: fit.schema.numeric_columns().iter().map(|c| c.name.clone()).collect(),
        mean,
        std,
    })
}

impl ScalerParams {
    /// Transformed column = (x - mean) / std; zero-spread columns map to
    /// all-zeros. Errors when the column set disagrees with the dataset.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let names: Vec<String> =
            ds.schema.numeric_columns().iter().map(|c| c.name.clone()).collect();
        if names != self.columns {
            return Err(Error::Data(format!(
                "scaler fitted on columns [{}] but dataset has [{}]",
                self.columns.join(","),
                names.join(",")
            )));
        }
        let mut out = ds.clone();
        for c in 0..out.n_numeric() {
            let (m, s) = (self.mean[c], self.std[c]);
            for r in 0..out.n_rows() {
                let v = if s == 0.0 { 0.0 } else { (out.numeric.get(r, c) - m) / s };
                out.numeric.set(r, c, v);
            }
        }
        Ok(out)
    }

    /// Scales a single row of raw numeric values (schema numeric order).
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    /// Numeric columns unchanged, each categorical column expanded into
    /// one indicator column per category (missing rows are all-zero).
    OneHot,
    /// Categorical integer codes only, the transformer's input layout.
    Codes,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub matrix: Matrix,
    pub names: Vec<String>,
}

/// Flattens a dataset into a plain feature matrix with deterministic
/// column names ("col=category" for indicators).
pub fn encode(ds: &Dataset, mode: EncodeMode) -> Encoded {
    match mode {
        EncodeMode::Codes => {
            let cols = ds.n_categorical();
            let mut m = Matrix::zeros(ds.n_rows(), cols);
            for r in 0..ds.n_rows() {
                for (c, &code) in ds.codes_row(r).iter().enumerate() {
                    m.set(r, c, code as f64);
                }
            }
            let names = ds
                .schema
                .categorical_columns()
                .iter()
                .map(|c| c.name.clone())
                .collect();
            Encoded { matrix: m, names }
        }
        EncodeMode::OneHot => {
            let mut names = Vec::new();
            let mut widths = Vec::new();
            for col in &ds.schema.columns {
                match col.kind {
                    ColumnKind::Numeric => {
                        names.push(col.name.clone());
                        widths.push(1);
                    }
                    ColumnKind::Categorical => {
                        let cats = col.categories.as_ref().expect("validated");
                        for cat in cats {
                            names.push(format!("{}={}", col.name, cat));
                        }
                        widths.push(cats.len());
                    }
                    ColumnKind::Label | ColumnKind::Weight => {}
                }
            }
            let total: usize = widths.iter().sum();
            let mut m = Matrix::zeros(ds.n_rows(), total);
            for r in 0..ds.n_rows() {
                let mut out_c = 0;
                let mut num_c = 0;
                let mut cat_c = 0;
                for col in &ds.schema.columns {
                    match col.kind {
                        ColumnKind::Numeric => {
                            m.set(r, out_c, ds.numeric.get(r, num_c));
                            out_c += 1;
                            num_c += 1;
                        }
                        ColumnKind::Categorical => {
                            let cats = col.categories.as_ref().expect("validated");
                            let code = ds.codes_row(r)[cat_c] as usize;
                            if code < cats.len() {
                                m.set(r, out_c + code, 1.0);
                            }
                            out_c += cats.len();
                            cat_c += 1;
                        }
                        ColumnKind::Label | ColumnKind::Weight => {}
                    }
                }
            }
            Encoded { matrix: m, names }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, Schema};

    fn ds_with(numeric: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        let cols = numeric[0].len();
        let mut specs: Vec<ColumnSpec> =
            (0..cols).map(|i| ColumnSpec::numeric(&format!("n{i}"))).collect();
        specs.push(ColumnSpec::label("y"));
        Dataset::new(
            Schema::new(specs).unwrap(),
            Matrix::from_rows(&numeric),
            vec![],
            labels,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zscore_keeps_moderate_outlier() {
        // mean 25, population std 43.3: z of 100 is 1.73
        let ds = ds_with(
            vec![vec![0.0], vec![0.0], vec![0.0], vec![100.0]],
            vec![0, 1, 0, 1],
        );
        let (out, report) = zscore_filter(&ds, 3.0, None).unwrap();
        assert_eq!(out.n_rows(), 4);
        assert!(report.removed.is_empty());
    }

    #[test]
    fn zscore_constant_column_skipped() {
        let ds = ds_with(vec![vec![5.0], vec![5.0], vec![5.0]], vec![0, 1, 0]);
        let (out, report) = zscore_filter(&ds, 0.1, None).unwrap();
        assert_eq!(out.n_rows(), 3);
        assert_eq!(report.skipped_columns, vec!["n0".to_string()]);
    }

    #[test]
    fn zscore_removes_and_reports() {
        let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        rows.push(vec![1000.0]);
        let labels = vec![0; 21];
        let ds = ds_with(rows, labels);
        let (out, report) = zscore_filter(&ds, 3.0, None).unwrap();
        assert_eq!(report.n_in, 21);
        assert_eq!(report.n_out, out.n_rows());
        assert_eq!(report.removed.len() + out.n_rows(), 21);
        assert_eq!(report.removed[0].row, 20);
        assert_eq!(report.removed[0].offending_columns, vec!["n0".to_string()]);
    }

    #[test]
    fn zscore_rejects_bad_tau() {
        let ds = ds_with(vec![vec![1.0], vec![2.0]], vec![0, 1]);
        assert!(zscore_filter(&ds, 0.0, None).is_err());
    }

    #[test]
    fn scaler_basic() {
        let ds = ds_with(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0]);
        let params = standard_scale_fit(&ds).unwrap();
        let out = params.apply(&ds).unwrap();
        let col = out.numeric.col(0);
        assert!((col[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert!(col[1].abs() < 1e-12);
        assert!((col[2] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn scaler_constant_column_maps_to_zero() {
        let ds = ds_with(vec![vec![5.0], vec![5.0]], vec![0, 1]);
        let params = standard_scale_fit(&ds).unwrap();
        let out = params.apply(&ds).unwrap();
        assert_eq!(out.numeric.col(0), vec![0.0, 0.0]);
    }

    #[test]
    fn scaler_centers_training_mean_to_zero() {
        let ds = ds_with(vec![vec![2.0], vec![4.0], vec![9.0]], vec![0, 1, 0]);
        let params = standard_scale_fit(&ds).unwrap();
        assert_eq!(params.apply_row(&[params.mean[0]]), vec![0.0]);
    }

    #[test]
    fn scaler_normalizes_fit_partition() {
        let ds = ds_with(
            (0..37).map(|i| vec![(i as f64).sin() * 3.0 + 1.0, i as f64]).collect(),
            vec![0; 37],
        );
        let params = standard_scale_fit(&ds).unwrap();
        let out = params.apply(&ds).unwrap();
        for c in 0..2 {
            let col = out.numeric.col(c);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scaler_column_mismatch_errors() {
        let ds = ds_with(vec![vec![1.0], vec![2.0]], vec![0, 1]);
        let other = ds_with(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![0, 1]);
        let params = standard_scale_fit(&ds).unwrap();
        assert!(params.apply(&other).is_err());
    }

    fn mixed_ds() -> Dataset {
        let schema = Schema::new(vec![
            ColumnSpec::numeric("x"),
            ColumnSpec::categorical("c", &["a", "b", "c"]),
            ColumnSpec::label("y"),
        ])
        .unwrap();
        Dataset::new(
            schema,
            Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]),
            vec![0, 2, 1, 3], // last code = missing slot
            vec![0, 1, 0, 1],
            None,
        )
        .unwrap()
    }

    #[test]
    fn onehot_rows_sum_to_one_or_zero_when_missing() {
        let e = encode(&mixed_ds(), EncodeMode::OneHot);
        assert_eq!(e.names, vec!["x", "c=a", "c=b", "c=c"]);
        for r in 0..3 {
            let sum: f64 = e.matrix.row(r)[1..].iter().sum();
            assert_eq!(sum, 1.0);
        }
        let missing_sum: f64 = e.matrix.row(3)[1..].iter().sum();
        assert_eq!(missing_sum, 0.0);
    }

    #[test]
    fn codes_mode_width_is_categorical_count() {
        let e = encode(&mixed_ds(), EncodeMode::Codes);
        assert_eq!(e.matrix.cols(), 1);
        assert_eq!(e.matrix.col(0), vec![0.0, 2.0, 1.0, 3.0]);
    }

    #[test]
    fn onehot_argmax_recovers_code() {
        let ds = mixed_ds();
        let e = encode(&ds, EncodeMode::OneHot);
        for r in 0..3 {
            let block = &e.matrix.row(r)[1..];
            let argmax = block
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax as u32, ds.codes_row(r)[0]);
        }
    }
}
