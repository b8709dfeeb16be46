//! Binary precision/recall/F1, benchmark runs and comparison reports.

mod bench;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{run_benchmark, BenchmarkResult, Failure, RunCounts, RunManifest, MANIFEST_SCHEMA};
pub use report::{baseline_rows, emit_report, mark_best, render_csv, render_text, ReportRow, REPORT_HEADER};

use crate::claim::Verdict;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("all {0} claims aborted")]
    AllFailed(usize),
    #[error("no report rows")]
    NoRows,
    #[error("baseline table: {0}")]
    Baselines(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Confusion counts with SUPPORTED as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: Verdict, gold: Verdict) {
        match (predicted, gold) {
            (Verdict::Supported, Verdict::Supported) => self.tp += 1,
            (Verdict::Supported, Verdict::Refuted) => self.fp += 1,
            (Verdict::Refuted, Verdict::Supported) => self.fn_ += 1,
            (Verdict::Refuted, Verdict::Refuted) => self.tn += 1,
        }
    }
}

/// Fractions in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn confusion(predictions: &[Verdict], golds: &[Verdict]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in predictions.iter().zip(golds) {
        c.record(p, g);
    }
    Ok(c)
}

/// Zero denominators give 0.
pub fn precision_recall_f1(c: ConfusionCounts) -> Metrics {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics { precision, recall, f1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Verdict::{Refuted as R, Supported as S};

    #[test]
    fn hand_enumerated() {
        let c = confusion(&[S, S, R], &[S, R, R]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 0, tn: 1 });
        let same = confusion(&[S, R, R, S], &[S, R, R, S]).unwrap();
        assert_eq!((same.fp, same.fn_), (0, 0));
        assert!(matches!(confusion(&[S, S], &[S, S, R]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn formula_cases() {
        let m = precision_recall_f1(ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 0 });
        for v in [m.precision, m.recall, m.f1] {
            assert!((v - 0.6667).abs() < 1e-4);
        }
        assert_eq!(precision_recall_f1(ConfusionCounts::default()), Metrics::default());
        let perfect = precision_recall_f1(ConfusionCounts { tp: 3, fp: 0, fn_: 0, tn: 7 });
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn serde_uses_fn_key() {
        let json = serde_json::to_string(&ConfusionCounts { tp: 1, fp: 2, fn_: 3, tn: 4 }).unwrap();
        assert_eq!(json, r#"{"tp":1,"fp":2,"fn":3,"tn":4}"#);
    }

    proptest! {
        #[test]
        fn metric_bounds(tp in 0u64..100, fp in 0u64..100, fn_ in 0u64..100, tn in 0u64..100) {
            let m = precision_recall_f1(ConfusionCounts { tp, fp, fn_, tn });
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision + m.recall > 0.0 {
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            }
        }
    }
}
