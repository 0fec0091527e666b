//! Confusion matrices, per-class precision/recall/F1 and overall accuracy.

use std::fmt::Write as _;

use crate::cloud::LabelArray;
use crate::error::{Error, Result};

/// K×K counts, rows are ground truth and columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.class_count + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.class_count + pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.class_count).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_sum(&self, pred: usize) -> u64 {
        (0..self.class_count).map(|t| self.get(t, pred)).sum()
    }
}

/// Tallies `pred` against `truth`. Points whose truth is
/// [`LabelArray::IGNORE`] are skipped.
pub fn confusion(pred: &LabelArray, truth: &LabelArray, class_count: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(class_count);
    for (i, (&p, &t)) in pred.as_slice().iter().zip(truth.as_slice()).enumerate() {
        if t == LabelArray::IGNORE {
            continue;
        }
        if p as usize >= class_count || t as usize >= class_count {
            return Err(Error::contract(format!(
                "point {i}: label pair ({t}, {p}) outside {class_count} classes"
            )));
        }
        cm.add(t as usize, p as usize);
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False when the class appears in neither truth nor prediction.
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean of the per-class F1 over all K classes.
    pub average_f1: f64,
    pub overall_accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = (0..cm.class_count())
        .map(|c| {
            let tp = cm.get(c, c);
            let fp = cm.column_sum(c) - tp;
            let fn_ = cm.row_sum(c) - tp;
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                tp,
                fp,
                fn_,
                precision,
                recall,
                f1,
                present: tp + fp + fn_ > 0,
            }
        })
        .collect();
    let average_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64
    };
    MetricsReport {
        average_f1,
        overall_accuracy: ratio(cm.trace(), cm.total()),
        total: cm.total(),
        per_class,
    }
}

impl MetricsReport {
    /// Aligned table for terminals. `names` must have one entry per class.
    pub fn to_text(&self, names: &[String]) -> String {
        let width = names.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "class", "precision", "recall", "f1", "support"
        );
        for (m, name) in self.per_class.iter().zip(names) {
            let _ = write!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}",
                name,
                m.precision,
                m.recall,
                m.f1,
                m.tp + m.fn_
            );
            if !m.present {
                out.push_str("  (absent)");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\noverall accuracy  {:.4}", self.overall_accuracy);
        let _ = writeln!(out, "average f1        {:.4}", self.average_f1);
        out
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("class,tp,fp,fn,precision,recall,f1,present\n");
        for (m, name) in self.per_class.iter().zip(names) {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{},{}",
                m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1, m.present as u8
            );
        }
        let _ = writeln!(out, "overall_accuracy,,,,,,{},", self.overall_accuracy);
        let _ = writeln!(out, "average_f1,,,,,,{},", self.average_f1);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[u32]) -> LabelArray {
        LabelArray::new(v.to_vec())
    }

    #[test]
    fn perfect_prediction() {
        let t = labels(&[0, 1, 2, 2, 1]);
        let cm = confusion(&t, &t, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(cm.get(a, b), 0);
                }
            }
        }
        let m = metrics(&cm);
        assert_eq!(m.overall_accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.f1 == 1.0));
    }

    #[test]
    fn everything_predicted_as_zero() {
        let cm = confusion(&labels(&[0, 0, 0, 0]), &labels(&[0, 1, 2, 1]), 3).unwrap();
        for c in 1..3 {
            assert_eq!(cm.column_sum(c), 0);
        }
        assert_eq!(cm.column_sum(0), 4);
    }

    #[test]
    fn eight_two_two() {
        let mut cm = ConfusionMatrix::new(2);
        for _ in 0..8 {
            cm.add(0, 0);
        }
        cm.add(1, 0);
        cm.add(1, 0);
        cm.add(0, 1);
        cm.add(0, 1);
        let m = &metrics(&cm).per_class[0];
        assert_eq!((m.tp, m.fp, m.fn_), (8, 2, 2));
        assert!((m.precision - 0.8).abs() < 1e-15);
        assert!((m.recall - 0.8).abs() < 1e-15);
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_flagged() {
        let t = labels(&[0, 1, 0]);
        let m = metrics(&confusion(&t, &t, 3).unwrap());
        assert!(!m.per_class[2].present);
        assert_eq!(m.per_class[2].f1, 0.0);
        assert!((m.average_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ignored_truth_is_skipped_and_bad_input_rejected() {
        let cm = confusion(&labels(&[0, 1]), &labels(&[LabelArray::IGNORE, 1]), 2).unwrap();
        assert_eq!(cm.total(), 1);
        assert!(confusion(&labels(&[0]), &labels(&[0, 1]), 2).is_err());
        assert!(confusion(&labels(&[5]), &labels(&[0]), 2).is_err());
    }

    #[test]
    fn text_and_csv_render() {
        let t = labels(&[0, 1, 1]);
        let m = metrics(&confusion(&t, &t, 2).unwrap());
        let names = vec!["ground".to_string(), "roof".to_string()];
        let text = m.to_text(&names);
        assert!(text.contains("overall accuracy  1.0000"));
        let csv = m.to_csv(&names);
        assert!(csv.starts_with("class,tp,fp,fn"));
        assert!(csv.contains("roof,2,0,0,1,1,1,1"));
    }

    proptest! {
        #[test]
        fn perfect_predictor_has_unit_accuracy(k in 1usize..8, seq in proptest::collection::vec(0u32..8, 1..60)) {
            let t = labels(&seq.iter().map(|v| v % k as u32).collect::<Vec<_>>());
            prop_assert_eq!(metrics(&confusion(&t, &t, k).unwrap()).overall_accuracy, 1.0);
        }

        #[test]
        fn f1_is_the_harmonic_mean(pred in proptest::collection::vec(0u32..3, 30), truth in proptest::collection::vec(0u32..3, 30)) {
            let m = metrics(&confusion(&labels(&pred), &labels(&truth), 3).unwrap());
            for c in &m.per_class {
                if c.precision > 0.0 && c.recall > 0.0 {
                    let h = 2.0 / (1.0 / c.precision + 1.0 / c.recall);
                    prop_assert!((c.f1 - h).abs() < 1e-12);
                }
            }
        }
    }
}
