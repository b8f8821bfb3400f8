//! Matching-accuracy metrics, attribute coverage reports, and synthetic
//! labelled fixtures.

pub mod coverage;
pub mod fixture;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coverage::{coverage_report, CoverageReport, CoverageRow, ATTRIBUTES};
pub use fixture::{generate_fixture, Fixture, FixtureConfig, Perturbation};

use crate::matcher::{FeaturePair, Label, LabeledPair};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("predictions ({0}) and labels ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("no instances to evaluate")]
    Empty,
    #[error("labels contain a single class; balanced accuracy is undefined")]
    SingleClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, predicted: Label, actual: Label) {
        match (predicted.is_match(), actual.is_match()) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// Mean of match recall and non-match recall.
    pub fn balanced_accuracy(&self) -> Result<f64, EvalError> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        if pos == 0 && neg == 0 {
            return Err(EvalError::Empty);
        }
        if pos == 0 || neg == 0 {
            return Err(EvalError::SingleClass);
        }
        Ok((self.tp as f64 / pos as f64 + self.tn as f64 / neg as f64) / 2.0)
    }
}

/// Counts with "match" as the positive class.
pub fn confusion_counts(predictions: &[Label], labels: &[Label]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        c.add(p, l);
    }
    Ok(c)
}

/// Fraction of correct decisions.
pub fn overall_accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    match c.total() {
        0 => Err(EvalError::Empty),
        t => Ok((c.tp + c.tn) as f64 / t as f64),
    }
}

/// Mean per-class recall.
pub fn balanced_accuracy(predictions: &[Label], labels: &[Label]) -> Result<f64, EvalError> {
    confusion_counts(predictions, labels)?.balanced_accuracy()
}

/// Scores decided pairs against ground truth. A labelled pair with no
/// decision counts as predicted non-match (it was never a candidate);
/// decided pairs without ground truth are ignored and counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub counts: ConfusionCounts,
    pub overall_accuracy: f64,
    pub balanced_accuracy: Option<f64>,
    pub undecided_labelled: usize,
    pub unlabelled_decided: usize,
}

pub fn evaluate_pairs(decided: &[FeaturePair], truth: &[LabeledPair]) -> Result<PairEvaluation, EvalError> {
    let predicted: HashMap<(&str, &str), Label> =
        decided.iter().filter_map(|p| p.label.map(|l| (p.key(), l))).collect();
    let mut counts = ConfusionCounts::default();
    let mut undecided = 0;
    let mut seen = 0;
    for t in truth {
        let actual = t.label;
        let p = match predicted.get(&t.key()) {
            Some(&l) => {
                seen += 1;
                l
            }
            None => {
                undecided += 1;
                Label::NonMatch
            }
        };
        counts.add(p, actual);
    }
    Ok(PairEvaluation {
        counts,
        overall_accuracy: overall_accuracy(&counts)?,
        balanced_accuracy: counts.balanced_accuracy().ok(),
        undecided_labelled: undecided,
        unlabelled_decided: predicted.len() - seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Match as M, NonMatch as N};

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        std::iter::repeat_n(M, pos).chain(std::iter::repeat_n(N, neg)).collect()
    }

    #[test]
    fn confusion_examples() {
        let y = labels(3, 7);
        let c = confusion_counts(&y, &y).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 3, tn: 7, fp: 0, fn_: 0 });
        let none = vec![N; 10];
        assert_eq!(confusion_counts(&none, &y).unwrap(), ConfusionCounts { tp: 0, tn: 7, fp: 0, fn_: 3 });
        assert_eq!(confusion_counts(&[], &[]), Err(EvalError::Empty));
        assert_eq!(confusion_counts(&[M], &[]), Err(EvalError::LengthMismatch(1, 0)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(overall_accuracy(&ConfusionCounts { tp: 1, tn: 1, fp: 0, fn_: 0 }), Ok(1.0));
        assert_eq!(overall_accuracy(&ConfusionCounts { tp: 0, tn: 0, fp: 1, fn_: 1 }), Ok(0.0));
        assert_eq!(overall_accuracy(&ConfusionCounts::default()), Err(EvalError::Empty));
        let y = labels(200, 8498);
        let none = vec![N; y.len()];
        let c = confusion_counts(&none, &y).unwrap();
        assert!((overall_accuracy(&c).unwrap() - 8498.0 / 8698.0).abs() < 1e-15);
        assert_eq!(balanced_accuracy(&none, &y), Ok(0.5));
        assert_eq!(balanced_accuracy(&y, &y), Ok(1.0));
        assert_eq!(balanced_accuracy(&[M, M], &[M, M]), Err(EvalError::SingleClass));
    }

    #[test]
    fn balanced_from_constructed_recalls() {
        // 10 matches with 9 found; 50 non-matches with 49 rejected.
        let y = labels(10, 50);
        let mut pred = y.clone();
        pred[0] = N;
        pred[10] = M;
        let oracle = (9.0 / 10.0 + 49.0 / 50.0) / 2.0;
        assert!((balanced_accuracy(&pred, &y).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.94).abs() < 1e-12);
    }

    #[test]
    fn balanced_equals_overall_when_balanced_and_symmetric() {
        let y = labels(20, 20);
        let mut pred = y.clone();
        for i in [0, 1, 2, 20, 21, 22] {
            pred[i] = if pred[i] == M { N } else { M };
        }
        let c = confusion_counts(&pred, &y).unwrap();
        assert!((c.balanced_accuracy().unwrap() - overall_accuracy(&c).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pair_evaluation_joins_on_canonical_keys() {
        let truth = vec![
            LabeledPair::new("a", "b", M),
            LabeledPair::new("a", "c", N),
            LabeledPair::new("b", "c", M),
        ];
        let decided = vec![
            FeaturePair::new("b", "a", 0.9, 0.9, Some(M)),
            FeaturePair::new("a", "c", 0.1, 0.1, Some(N)),
            FeaturePair::new("c", "d", 0.1, 0.1, Some(N)),
        ];
        let e = evaluate_pairs(&decided, &truth).unwrap();
        assert_eq!(e.counts, ConfusionCounts { tp: 1, tn: 1, fp: 0, fn_: 1 });
        assert_eq!(e.undecided_labelled, 1);
        assert_eq!(e.unlabelled_decided, 1);
        assert_eq!(e.balanced_accuracy, Some(0.75));
    }
}
