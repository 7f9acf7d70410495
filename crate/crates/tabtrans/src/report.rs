//! Report emission: RFC-4180 CSV and JSON serializations of every
//! pipeline artifact (stats tables, rankings, leaderboards, fold
//! reports, ROC/calibration/net-benefit series, tuning history).

use std::path::Path;

use serde::Serialize;

use crate::classical::RankedFeatures;
use crate::error::Result;
use crate::eval::{CvReport, MetricsEntry, RocCurve, TrialRecord};
use crate::nomogram::{CalibrationBin, NetBenefitPoint, NomogramSpec};
use crate::stats::{AssociationRow, FeatureSummary};

/// Quotes a CSV field when it contains a comma, quote, or newline.
pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(","));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(
            &row.iter().map(|f| csv_escape(f)).collect::<Vec<_>>().join(","),
        );
        out.push_str("\r\n");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Aligned-text statistical report with the layout of the association
/// table: feature, per-class summaries, test, statistic, p-value.
pub fn stats_text_table(rows: &[AssociationRow]) -> String {
    let mut lines: Vec<[String; 6]> = vec![[
        "Feature".into(),
        "Positive class".into(),
        "Negative class".into(),
        "Test".into(),
        "Statistic".into(),
        "P-value".into(),
    ]];
    for row in rows {
        let (pos, neg) = match &row.summary {
            FeatureSummary::Numeric { positive, negative, .. } => (
                format!("{:.2}+-{:.2} med {:.2}", positive.mean, positive.std, positive.median),
                format!("{:.2}+-{:.2} med {:.2}", negative.mean, negative.std, negative.median),
            ),
            FeatureSummary::Categorical { lines } => {
                let fmt_side = |f: &dyn Fn(&crate::stats::CategoryLine) -> (usize, f64)| {
                    lines
                        .iter()
                        .map(|l| {
                            let (count, pct) = f(l);
                            format!("{}:{count}({pct:.1}%)", l.category)
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                (
                    fmt_side(&|l| (l.positive_count, l.positive_pct)),
                    fmt_side(&|l| (l.negative_count, l.negative_pct)),
                )
            }
        };
        lines.push([
            row.feature.clone(),
            pos,
            neg,
            row.chosen_test.to_string(),
            format!("{:.4}", row.result.statistic),
            format_p(row.result.p_value),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let rendered: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect();
        out.push_str(rendered.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
            out.push('\n');
        }
    }
    out
}

fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else if p < 0.05 {
        "<0.05".to_string()
    } else {
        format!("{p:.2}")
    }
}

pub fn write_stats_report(dir: &Path, rows: &[AssociationRow]) -> Result<Vec<String>> {
    write_json(&dir.join("stats.json"), &rows)?;
    std::fs::write(dir.join("stats.txt"), stats_text_table(rows))?;
    Ok(vec!["stats.json".into(), "stats.txt".into()])
}

/// Ranking report: rank, feature name, importance.
pub fn write_ranking(
    path: &Path,
    ranked: &RankedFeatures,
    names: &[String],
    top_n: usize,
) -> Result<()> {
    let rows: Vec<Vec<String>> = ranked
        .ranking
        .iter()
        .take(top_n)
        .enumerate()
        .map(|(rank, (idx, importance))| {
            vec![(rank + 1).to_string(), names[*idx].clone(), fmt(*importance)]
        })
        .collect();
    write_csv(path, &["rank", "feature", "importance"], &rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct LeaderboardEntry {
    pub model: String,
    pub metrics: MetricsEntry,
}

fn metric_cells(m: &MetricsEntry) -> Vec<String> {
    vec![
        fmt_pct(m.accuracy),
        fmt_pct(m.precision),
        fmt_pct(m.recall),
        fmt_pct(m.f1),
        fmt_pct(m.specificity),
        m.auc.map(fmt_pct).unwrap_or_else(|| "-".into()),
    ]
}

const METRIC_HEADER: [&str; 7] =
    ["model", "accuracy", "precision", "recall", "f1", "specificity", "auc"];

/// Leaderboard sorted by accuracy descending (ties by name).
pub fn write_leaderboard(dir: &Path, entries: &mut Vec<LeaderboardEntry>) -> Result<Vec<String>> {
    entries.sort_by(|a, b| {
        b.metrics
            .accuracy
            .partial_cmp(&a.metrics.accuracy)
            .unwrap()
            .then(a.model.cmp(&b.model))
    });
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let mut cells = vec![e.model.clone()];
            cells.extend(metric_cells(&e.metrics));
            cells
        })
        .collect();
    write_csv(&dir.join("leaderboard.csv"), &METRIC_HEADER, &rows)?;
    write_json(&dir.join("leaderboard.json"), entries)?;
    Ok(vec!["leaderboard.csv".into(), "leaderboard.json".into()])
}

/// Per-fold cross-validation report: one row per fold, then the
/// fold-mean row and the pooled-counts row.
pub fn write_cv_report(dir: &Path, stem: &str, report: &CvReport) -> Result<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .folds
        .iter()
        .map(|f| {
            let mut cells = vec![format!("fold {}", f.fold + 1)];
            cells.extend(metric_cells(&f.metrics));
            cells
        })
        .collect();
    let mut mean_cells = vec!["mean".to_string()];
    mean_cells.extend(metric_cells(&report.mean));
    rows.push(mean_cells);
    let mut pooled_cells = vec!["pooled".to_string()];
    pooled_cells.extend(metric_cells(&report.pooled));
    rows.push(pooled_cells);

    let csv_name = format!("{stem}.csv");
    let json_name = format!("{stem}.json");
    write_csv(&dir.join(&csv_name), &METRIC_HEADER, &rows)?;
    write_json(&dir.join(&json_name), report)?;
    Ok(vec![csv_name, json_name])
}

pub fn write_roc(path: &Path, roc: &RocCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = roc
        .points
        .iter()
        .map(|p| vec![format!("{:.6}", p.threshold), fmt(p.fpr), fmt(p.tpr)])
        .collect();
    write_csv(path, &["threshold", "fpr", "tpr"], &rows)
}

pub fn write_loss_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .iter()
        .enumerate()
        .map(|(epoch, loss)| vec![(epoch + 1).to_string(), fmt(*loss)])
        .collect();
    write_csv(path, &["epoch", "mean_loss"], &rows)
}

pub fn write_tuning_history(path: &Path, history: &[TrialRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|t| {
            vec![
                t.trial.to_string(),
                serde_json::to_string(&t.params).unwrap_or_default(),
                fmt(t.objective),
                format!("{:.3}", t.duration_s),
            ]
        })
        .collect();
    write_csv(path, &["trial", "params", "objective", "duration_s"], &rows)
}

/// Nomogram artifacts: the JSON spec plus a plot-ready CSV with one row
/// per feature tick mark (0..=10 points per feature).
pub fn write_nomogram(dir: &Path, spec: &NomogramSpec) -> Result<Vec<String>> {
    write_json(&dir.join("nomogram.json"), spec)?;
    let mut rows = Vec::new();
    for f in &spec.features {
        let ticks = 11;
        for t in 0..ticks {
            let frac = t as f64 / (ticks - 1) as f64;
            let points = frac * f.max_points;
            // feature value at this many points, following orientation
            let span = f.hi - f.lo;
            let value = if f.coefficient >= 0.0 {
                f.lo + frac * span
            } else {
                f.hi - frac * span
            };
            rows.push(vec![f.name.clone(), fmt(value), fmt(points)]);
        }
    }
    write_csv(&dir.join("nomogram_scales.csv"), &["feature", "value", "points"], &rows)?;
    Ok(vec!["nomogram.json".into(), "nomogram_scales.csv".into()])
}

pub fn write_calibration(path: &Path, bins: &[CalibrationBin]) -> Result<()> {
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| {
            vec![
                fmt(b.lo),
                fmt(b.hi),
                fmt(b.mean_predicted),
                fmt(b.observed_rate),
                b.count.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["bin_lo", "bin_hi", "mean_predicted", "observed_rate", "count"], &rows)
}

pub fn write_decision_curve(path: &Path, points: &[NetBenefitPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![fmt(p.threshold), fmt(p.model), fmt(p.treat_all), fmt(p.treat_none)]
        })
        .collect();
    write_csv(path, &["threshold", "nb_model", "nb_treat_all", "nb_treat_none"], &rows)
}

/// Feature matrix with a trailing label column, the exchange format of
/// the extract/rank/train subcommands.
pub fn write_features_csv(
    path: &Path,
    features: &crate::numerics::Matrix,
    names: &[String],
    labels: &[u8],
) -> Result<()> {
    let mut header: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    header.push("label");
    let rows: Vec<Vec<String>> = (0..features.rows())
        .map(|r| {
            let mut cells: Vec<String> =
                features.row(r).iter().map(|v| format!("{v}")).collect();
            cells.push(labels[r].to_string());
            cells
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Reads a feature CSV produced by [`write_features_csv`].
pub fn read_features_csv(path: &Path) -> Result<(crate::numerics::Matrix, Vec<String>, Vec<u8>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::error::Error::Data(format!("cannot read '{}': {e}", path.display())))?;
    let records = crate::data::parse_csv_text(&text);
    if records.is_empty() {
        return Err(crate::error::Error::Data("empty feature file".into()));
    }
    let header = &records[0];
    if header.last().map(|s| s.as_str()) != Some("label") {
        return Err(crate::error::Error::Data(
            "feature file must end with a 'label' column".into(),
        ));
    }
    let names: Vec<String> = header[..header.len() - 1].to_vec();
    let width = names.len();
    let mut data = Vec::with_capacity((records.len() - 1) * width);
    let mut labels = Vec::with_capacity(records.len() - 1);
    for (i, record) in records.iter().skip(1).enumerate() {
        if record.len() != width + 1 {
            return Err(crate::error::Error::Data(format!(
                "feature file row {}: expected {} fields, found {}",
                i + 1,
                width + 1,
                record.len()
            )));
        }
        for field in &record[..width] {
            data.push(field.parse::<f64>().map_err(|_| {
                crate::error::Error::Data(format!(
                    "feature file row {}: cannot parse '{field}'",
                    i + 1
                ))
            })?);
        }
        labels.push(match record[width].as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(crate::error::Error::Data(format!(
                    "feature file row {}: label must be 0/1, found '{other}'",
                    i + 1
                )))
            }
        });
    }
    Ok((
        crate::numerics::Matrix::from_vec(labels.len(), width, data),
        names,
        labels,
    ))
}
