use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ClassifyError, Distribution};
use crate::genre::{Genre, N_GENRES};

/// Relative smoothing added to every variance: `SMOOTHING * max column variance`.
const SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub genre: Genre,
    pub prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Gaussian naive Bayes with empirical priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub classes: Vec<ClassStats>,
    pub epsilon: f64,
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn train_gnb(rows: &[Vec<f64>], labels: &[Genre]) -> Result<GaussianNb, ClassifyError> {
    let dim = check_training_set(rows, labels)?;
    let n = rows.len() as f64;
    let max_var = (0..dim)
        .map(|j| population_variance(rows.iter().map(move |r| r[j])).1)
        .fold(0.0, f64::max);
    // A dataset with no spread at all would leave zero variances.
    let epsilon = if max_var > 0.0 { SMOOTHING * max_var } else { SMOOTHING };

    let classes = Genre::ALL
        .iter()
        .filter_map(|&g| {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == g)
                .map(|(r, _)| r)
                .collect();
            if members.is_empty() {
                return None;
            }
            let (means, variances) = (0..dim)
                .map(|j| {
                    let (m, v) = population_variance(members.iter().map(move |r| r[j]));
                    (m, v + epsilon)
                })
                .unzip();
            Some(ClassStats {
                genre: g,
                prior: members.len() as f64 / n,
                means,
                variances,
            })
        })
        .collect();
    Ok(GaussianNb { classes, epsilon })
}

impl GaussianNb {
    fn log_joint(&self, stats: &ClassStats, x: &[f64]) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(stats.means.iter().zip(&stats.variances))
            .map(|(v, (m, var))| -0.5 * (2.0 * PI * var).ln() - (v - m).powi(2) / (2.0 * var))
            .sum();
        stats.prior.ln() + ll
    }
}

impl Classifier for GaussianNb {
    fn n_features(&self) -> usize {
        self.classes.first().map_or(0, |c| c.means.len())
    }

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution {
        let joints: Vec<f64> = self.classes.iter().map(|c| self.log_joint(c, x)).collect();
        let top = joints.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights = [0.0; N_GENRES];
        for (c, j) in self.classes.iter().zip(&joints) {
            weights[c.genre.code()] = (j - top).exp();
        }
        Distribution::from_weights(weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> GaussianNb {
        let rows = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let labels = vec![Genre::Blues, Genre::Blues, Genre::Classical, Genre::Classical];
        train_gnb(&rows, &labels).unwrap()
    }

    #[test]
    fn symmetric_query_splits_evenly() {
        let d = two_class().predict_proba(&[3.0]).unwrap();
        assert!((d.prob(Genre::Blues) - 0.5).abs() < 1e-9);
        assert!((d.prob(Genre::Classical) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn posterior_matches_hand_computed_densities() {
        let model = two_class();
        // overall variance of {0,2,4,6} is 5, so each class variance is 1 + 5e-9
        assert!((model.epsilon - 5e-9).abs() < 1e-20);
        let var = 1.0 + 5e-9;
        let density = |x: f64, m: f64| (-(x - m).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        let (a, b) = (density(1.0, 1.0), density(1.0, 5.0));
        let expected = a / (a + b);
        let d = model.predict_proba(&[1.0]).unwrap();
        assert!((d.prob(Genre::Blues) - expected).abs() < 1e-12);
        assert!((d.prob(Genre::Blues) - 0.99966).abs() < 1e-5);
    }

    #[test]
    fn single_class_is_certain() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![1.0, 0.5]];
        let labels = vec![Genre::Folk; 3];
        let model = train_gnb(&rows, &labels).unwrap();
        for q in [[0.0, 0.0], [100.0, -50.0]] {
            assert_eq!(model.predict_proba(&q).unwrap().prob(Genre::Folk), 1.0);
        }
    }

    #[test]
    fn rejects_empty() {
        assert_eq!(train_gnb(&[], &[]), Err(ClassifyError::DegenerateLabels));
    }
}
