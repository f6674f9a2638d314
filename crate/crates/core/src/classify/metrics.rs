use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with AD as the positive class. Ratios with a
/// zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        EvalMetrics {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<EvalMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, l) in predictions.iter().zip(labels) {
        match (p, l) {
            (Label::Ad, Label::Ad) => tp += 1,
            (Label::Ad, Label::Control) => fp += 1,
            (Label::Control, Label::Control) => tn += 1,
            (Label::Control, Label::Ad) => fn_ += 1,
        }
    }
    Ok(EvalMetrics::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Ad, Control};

    #[test]
    fn fixed_case() {
        // TP=2, FN=1, TN=3, FP=1
        let pred = [Ad, Ad, Control, Control, Control, Control, Ad];
        let gold = [Ad, Ad, Ad, Control, Control, Control, Control];
        let m = evaluate(&pred, &gold).unwrap();
        assert_eq!((m.tp, m.fn_, m.tn, m.fp), (2, 1, 3, 1));
        assert_eq!(m.sensitivity, Some(2.0 / 3.0));
        assert_eq!(m.specificity, Some(3.0 / 4.0));
        assert_eq!(m.accuracy, Some(5.0 / 7.0));
    }

    #[test]
    fn perfect_predictions() {
        let gold = [Ad, Control, Ad];
        let m = evaluate(&gold, &gold).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn undefined_ratios() {
        let m = evaluate(&[Control, Ad], &[Control, Control]).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.accuracy, Some(0.5));
        let empty = evaluate(&[], &[]).unwrap();
        assert_eq!(empty.accuracy, None);
        assert!(evaluate(&[Ad], &[]).is_err());
    }
}
