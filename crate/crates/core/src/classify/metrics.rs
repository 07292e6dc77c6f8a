use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::{Error, Result};

/// Counts indexed by (true class, predicted class) in canonical class order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; Label::COUNT]; Label::COUNT],
}

impl ConfusionMatrix {
    pub fn get(&self, truth: Label, predicted: Label) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn row(&self, truth: Label) -> &[u64; Label::COUNT] {
        &self.counts[truth.index()]
    }

    pub fn rows(&self) -> &[[u64; Label::COUNT]; Label::COUNT] {
        &self.counts
    }

    /// Number of samples whose true class is `truth`.
    pub fn support(&self, truth: Label) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn predicted(&self, label: Label) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        Label::ALL.iter().map(|&l| self.get(l, l)).sum()
    }

    /// Share of the `truth` row predicted as `predicted`; 0 for an empty row.
    pub fn row_share(&self, truth: Label, predicted: Label) -> f64 {
        match self.support(truth) {
            0 => 0.0,
            s => self.get(truth, predicted) as f64 / s as f64,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<16}", "true \\ pred");
        for l in Label::ALL {
            out.push_str(&format!("{:>6}", &l.as_str()[..5.min(l.as_str().len())]));
        }
        out.push('\n');
        for t in Label::ALL {
            out.push_str(&format!("{:<16}", t.as_str()));
            for c in self.row(t) {
                out.push_str(&format!("{c:>6}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(refs: &[Label], preds: &[Label]) -> Result<ConfusionMatrix> {
    if refs.len() != preds.len() {
        return Err(Error::LengthMismatch {
            left: refs.len(),
            right: preds.len(),
        });
    }
    if refs.is_empty() {
        return Err(Error::Empty("label list"));
    }
    let mut cm = ConfusionMatrix::default();
    for (r, p) in refs.iter().zip(preds) {
        cm.counts[r.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// Mean F1 over classes that occur in the reference labels.
    pub macro_f1: f64,
    /// F1 for every class seen in the references or the predictions.
    pub per_class_f1: BTreeMap<Label, f64>,
    pub support: BTreeMap<Label, u64>,
    pub samples: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> ClassMetrics {
        let total = cm.total();
        let mut per_class_f1 = BTreeMap::new();
        let mut support = BTreeMap::new();
        let mut weighted = 0.0;
        let mut macro_sum = 0.0;
        let mut present = 0usize;
        for label in Label::ALL {
            let tp = cm.get(label, label);
            let n_true = cm.support(label);
            let n_pred = cm.predicted(label);
            if n_true == 0 && n_pred == 0 {
                continue;
            }
            let precision = ratio(tp, n_pred);
            let recall = ratio(tp, n_true);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class_f1.insert(label, f1);
            if n_true > 0 {
                support.insert(label, n_true);
                weighted += f1 * n_true as f64;
                macro_sum += f1;
                present += 1;
            }
        }
        ClassMetrics {
            accuracy: ratio(cm.trace(), total),
            weighted_f1: if total == 0 { 0.0 } else { weighted / total as f64 },
            macro_f1: if present == 0 { 0.0 } else { macro_sum / present as f64 },
            per_class_f1,
            support,
            samples: total,
        }
    }
}

/// Accuracy, weighted F1 and macro F1 of `preds` against `refs`.
pub fn classification_metrics(refs: &[Label], preds: &[Label]) -> Result<ClassMetrics> {
    Ok(ClassMetrics::from_confusion(&confusion_matrix(refs, preds)?))
}
