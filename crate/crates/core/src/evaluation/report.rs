use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, Metrics, RunManifest};
use crate::fsutil::atomic_write;

const BASELINES: &str = include_str!("../../data/baselines.csv");

pub const REPORT_HEADER: &str =
    "positive class SUPPORTED; precision, recall and F1 in percent; * marks the best F1 per dataset";

/// One line of a comparison table. Scores are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub evidence_source: String,
    pub dataset: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub best: bool,
}

impl ReportRow {
    pub fn from_metrics(system: &str, evidence_source: &str, dataset: &str, m: Metrics) -> Self {
        Self {
            system: system.to_string(),
            evidence_source: evidence_source.to_string(),
            dataset: dataset.to_string(),
            precision: m.precision * 100.0,
            recall: m.recall * 100.0,
            f1: m.f1 * 100.0,
            baseline: false,
            best: false,
        }
    }

    pub fn from_manifest(m: &RunManifest) -> Self {
        Self::from_metrics(&m.system, &m.evidence_source, &m.dataset, m.metrics)
    }

    /// F1 as shown, in tenths of a point.
    fn shown_f1(&self) -> i64 {
        (self.f1 * 10.0).round() as i64
    }
}

#[derive(Deserialize)]
struct BaselineRecord {
    system: String,
    evidence_source: String,
    dataset: String,
    precision: f64,
    recall: f64,
    f1: f64,
}

/// Published reference scores for the three medical datasets.
pub fn baseline_rows() -> Vec<ReportRow> {
    csv::Reader::from_reader(BASELINES.as_bytes())
        .deserialize::<BaselineRecord>()
        .map(|r| {
            let r = r.expect("bundled baseline table parses");
            ReportRow {
                system: r.system,
                evidence_source: r.evidence_source,
                dataset: r.dataset,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                baseline: true,
                best: false,
            }
        })
        .collect()
}

/// Flags the rows with the highest displayed F1 in each dataset (ties all
/// get the mark).
pub fn mark_best(rows: &mut [ReportRow]) {
    let mut best: Vec<(String, i64)> = Vec::new();
    for row in rows.iter() {
        match best.iter_mut().find(|(d, _)| *d == row.dataset) {
            Some((_, f1)) => *f1 = (*f1).max(row.shown_f1()),
            None => best.push((row.dataset.clone(), row.shown_f1())),
        }
    }
    for row in rows.iter_mut() {
        row.best = best.iter().any(|(d, f1)| *d == row.dataset && *f1 == row.shown_f1());
    }
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let headers = ["system", "evidence", "dataset", "P", "R", "F1", ""];
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.system.clone(),
                r.evidence_source.clone(),
                r.dataset.clone(),
                format!("{:.1}", r.precision),
                format!("{:.1}", r.recall),
                format!("{:.1}", r.f1),
                if r.best { "*".into() } else { String::new() },
            ]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |fields: &[String]| {
        let mut out = String::new();
        for (i, (f, w)) in fields.iter().zip(widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            // Text columns left-aligned, scores right-aligned.
            if (3..6).contains(&i) {
                out.push_str(&format!("{f:>w$}"));
            } else {
                out.push_str(&format!("{f:<w$}"));
            }
        }
        out.trim_end().to_string()
    };
    let mut out = format!("# {REPORT_HEADER}\n");
    out.push_str(&line(&headers.map(String::from)));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["system", "evidence_source", "dataset", "precision", "recall", "f1", "best", "baseline"])
        .expect("write to memory");
    for r in rows {
        w.write_record([
            r.system.as_str(),
            r.evidence_source.as_str(),
            r.dataset.as_str(),
            &format!("{:.1}", r.precision),
            &format!("{:.1}", r.recall),
            &format!("{:.1}", r.f1),
            if r.best { "true" } else { "false" },
            if r.baseline { "true" } else { "false" },
        ])
        .expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// Marks the best rows and writes `report.txt` and `report.csv` into `dir`.
pub fn emit_report(rows: &[ReportRow], dir: &Path) -> Result<(PathBuf, PathBuf), EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoRows);
    }
    let mut rows = rows.to_vec();
    mark_best(&mut rows);
    let txt = dir.join("report.txt");
    let csv_path = dir.join("report.csv");
    atomic_write(&txt, render_text(&rows).as_bytes())?;
    atomic_write(&csv_path, render_csv(&rows).as_bytes())?;
    Ok((txt, csv_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(rows: &'a [ReportRow], system: &str, source: &str, dataset: &str) -> &'a ReportRow {
        rows.iter()
            .find(|r| r.system == system && r.evidence_source == source && r.dataset == dataset)
            .unwrap()
    }

    #[test]
    fn baselines_loaded() {
        let rows = baseline_rows();
        assert_eq!(rows.len(), 33);
        let wiki = find(&rows, "Three-part pipeline", "Wikipedia", "HealthFC");
        assert_eq!((wiki.precision, wiki.recall, wiki.f1), (65.2, 92.6, 76.5));
    }

    #[test]
    fn best_marks_follow_table() {
        let mut rows = baseline_rows();
        mark_best(&mut rows);
        let best: Vec<_> = rows.iter().filter(|r| r.best).map(|r| (r.dataset.as_str(), r.f1)).collect();
        assert_eq!(best, vec![("CoVERT", 85.9), ("SciFact", 87.6), ("HealthFC", 81.7)]);
    }

    #[test]
    fn single_row_is_best() {
        let dir = tempfile::tempdir().unwrap();
        let row = ReportRow::from_metrics(
            "m",
            "internal",
            "generic",
            Metrics {
                precision: 2.0 / 3.0,
                recall: 2.0 / 3.0,
                f1: 2.0 / 3.0,
            },
        );
        let (txt, csv_path) = emit_report(&[row], dir.path()).unwrap();
        let text = std::fs::read_to_string(txt).unwrap();
        assert!(text.starts_with("# positive class SUPPORTED"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().last().unwrap().ends_with("66.7  66.7  66.7  *"));
        let csv_text = std::fs::read_to_string(csv_path).unwrap();
        assert_eq!(csv_text.lines().nth(1).unwrap(), "m,internal,generic,66.7,66.7,66.7,true,false");
        assert!(matches!(emit_report(&[], dir.path()), Err(EvalError::NoRows)));
    }
}
