use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::genre::{Genre, N_GENRES};

/// One model's scores, all in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall (any common unit); 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy plus precision and recall macro-averaged over the genres that
/// occur in the true labels. A genre never predicted has precision 0. F1
/// is taken from the averaged precision and recall.
pub fn compute_metrics(model: &str, pairs: &[(Genre, Genre)]) -> Result<MetricsRow, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPredictions);
    }
    let mut tp = [0usize; N_GENRES];
    let mut predicted = [0usize; N_GENRES];
    let mut actual = [0usize; N_GENRES];
    for (p, t) in pairs {
        predicted[p.code()] += 1;
        actual[t.code()] += 1;
        if p == t {
            tp[p.code()] += 1;
        }
    }
    let present: Vec<usize> = (0..N_GENRES).filter(|&c| actual[c] > 0).collect();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let k = present.len() as f64;
    let precision = present.iter().map(|&c| ratio(tp[c], predicted[c])).sum::<f64>() / k;
    let recall = present.iter().map(|&c| ratio(tp[c], actual[c])).sum::<f64>() / k;
    let correct: usize = tp.iter().sum();
    Ok(MetricsRow {
        model: model.to_string(),
        accuracy: 100.0 * ratio(correct, pairs.len()),
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        f1: 100.0 * f1_score(precision, recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_class_confusion() {
        use Genre::{Blues as A, Classical as B};
        // rows = truth, cols = prediction: [[2, 1], [0, 1]]
        let pairs = [(A, A), (A, A), (B, A), (B, B)];
        let m = compute_metrics("hand", &pairs).unwrap();
        assert!((m.accuracy - 75.0).abs() < 1e-12);
        assert!((m.precision - 75.0).abs() < 1e-12);
        assert!((m.recall - 250.0 / 3.0).abs() < 1e-12);
        // 2 * 0.75 * (5/6) / (0.75 + 5/6) = 15/19
        assert!((m.f1 - 1500.0 / 19.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_predictions() {
        let pairs: Vec<_> = Genre::ALL.iter().map(|g| (*g, *g)).collect();
        let m = compute_metrics("p", &pairs).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (100.0, 100.0, 100.0, 100.0));
    }

    #[test]
    fn never_predicted_genre_scores_zero_precision() {
        use Genre::*;
        let m = compute_metrics("z", &[(Rock, Rock), (Rock, Pop)]).unwrap();
        // Rock: P 1/2, R 1; Pop: P 0 (never predicted), R 0
        assert!((m.precision - 25.0).abs() < 1e-12);
        assert!((m.recall - 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(compute_metrics("e", &[]), Err(EvalError::EmptyPredictions)));
    }

    proptest! {
        #[test]
        fn f1_identity(pairs in proptest::collection::vec((0usize..11, 0usize..11), 1..200)) {
            let pairs: Vec<(Genre, Genre)> = pairs
                .into_iter()
                .map(|(p, t)| (Genre::ALL[p], Genre::ALL[t]))
                .collect();
            let m = compute_metrics("r", &pairs).unwrap();
            let expect = if m.precision + m.recall > 0.0 {
                2.0 * m.precision * m.recall / (m.precision + m.recall)
            } else {
                0.0
            };
            prop_assert!((m.f1 - expect).abs() < 1e-9);
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-9);
        }
    }
}
