//! The five genre classifiers behind one contract.
//!
//! Every model consumes standardized feature rows and returns a
//! [`Distribution`] over all eleven genres. Training is deterministic: the
//! same rows, labels and seed always give bit-identical models.

mod bundle;
mod forest;
mod gnb;
mod knn;
mod mlp;
mod scaler;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::genre::{Genre, N_GENRES};

pub use bundle::{train_all, BundleError, ModelBundle, Models, SCHEMA_VERSION};
pub use forest::{train_forest, Forest, ForestParams};
pub use gnb::{train_gnb, GaussianNb};
pub use knn::{train_knn, Knn, DEFAULT_K};
pub use mlp::{train_mlp, Gradients, Mlp, MlpParams};
pub use scaler::{fit_scaler, Scaler, STD_FLOOR};
pub use tree::{gini, train_tree, DecisionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("label set is empty")]
    DegenerateLabels,
    #[error("model has not been trained")]
    ModelNotTrained,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Probability mass over the eleven genres, indexed by genre code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: [f64; N_GENRES],
}

impl Distribution {
    /// Wraps raw probabilities. Callers guarantee entries in [0, 1]
    /// summing to one.
    pub fn from_probs(probs: [f64; N_GENRES]) -> Self {
        debug_assert!(probs.iter().all(|p| (-1e-12..=1.0 + 1e-12).contains(p)));
        Self { probs }
    }

    pub fn uniform() -> Self {
        Self { probs: [1.0 / N_GENRES as f64; N_GENRES] }
    }

    pub fn one_hot(genre: Genre) -> Self {
        let mut probs = [0.0; N_GENRES];
        probs[genre.code()] = 1.0;
        Self { probs }
    }

    /// Normalizes non-negative weights. All-zero weights give the uniform
    /// distribution.
    pub fn from_weights(weights: [f64; N_GENRES]) -> Self {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Self::uniform();
        }
        Self { probs: weights.map(|w| w / total) }
    }

    /// Arithmetic mean, summed in slice order.
    pub fn mean(dists: &[Distribution]) -> Self {
        let mut acc = [0.0; N_GENRES];
        for d in dists {
            for (a, p) in acc.iter_mut().zip(d.probs) {
                *a += p;
            }
        }
        let n = dists.len() as f64;
        Self { probs: acc.map(|a| a / n) }
    }

    pub fn probs(&self) -> &[f64; N_GENRES] {
        &self.probs
    }

    pub fn prob(&self, genre: Genre) -> f64 {
        self.probs[genre.code()]
    }

    /// Most probable genre; ties go to the lowest code.
    pub fn argmax(&self) -> Genre {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        Genre::ALL[best]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax().code()]
    }
}

/// The five model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Knn,
    Gnb,
    Tree,
    Forest,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Knn,
        Algorithm::Gnb,
        Algorithm::Tree,
        Algorithm::Forest,
        Algorithm::Mlp,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Gnb => "gnb",
            Algorithm::Tree => "tree",
            Algorithm::Forest => "forest",
            Algorithm::Mlp => "mlp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Knn => "k-Nearest Neighbor",
            Algorithm::Gnb => "Naive Bayes",
            Algorithm::Tree => "Decision Tree",
            Algorithm::Forest => "Random Forest",
            Algorithm::Mlp => "Neural Network",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Uniform prediction contract shared by all five models.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution;

    fn predict_proba(&self, x: &[f64]) -> Result<Distribution, ClassifyError> {
        check_dim(self.n_features(), x)?;
        Ok(self.predict_proba_unchecked(x))
    }

    /// Top-1 label. Defaults to the distribution's argmax.
    fn predict(&self, x: &[f64]) -> Result<Genre, ClassifyError> {
        Ok(self.predict_proba(x)?.argmax())
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), ClassifyError> {
    if expected == 0 {
        return Err(ClassifyError::ModelNotTrained);
    }
    if x.len() != expected {
        return Err(ClassifyError::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Shared training-input checks; returns the feature dimension.
pub(crate) fn check_training_set(rows: &[Vec<f64>], labels: &[Genre]) -> Result<usize, ClassifyError> {
    if labels.is_empty() && rows.is_empty() {
        return Err(ClassifyError::DegenerateLabels);
    }
    if rows.len() != labels.len() {
        return Err(ClassifyError::InsufficientData(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.len() < 2 {
        return Err(ClassifyError::InsufficientData(format!(
            "need at least 2 rows, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if dim == 0 {
        return Err(ClassifyError::InsufficientData("rows have no features".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(ClassifyError::DimensionMismatch { expected: dim, got: r.len() });
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_to_lowest_code() {
        let mut probs = [0.0; N_GENRES];
        probs[3] = 0.5;
        probs[7] = 0.5;
        assert_eq!(Distribution::from_probs(probs).argmax(), Genre::Electronic);
        assert_eq!(Distribution::uniform().argmax(), Genre::Blues);
    }

    #[test]
    fn consensus_arithmetic() {
        let g = Genre::Jazz;
        let dists = [
            Distribution::one_hot(g),
            Distribution::one_hot(g),
            Distribution::one_hot(g),
            Distribution::one_hot(g),
            Distribution::uniform(),
        ];
        let mean = Distribution::mean(&dists);
        assert!((mean.prob(g) - (4.0 + 1.0 / 11.0) / 5.0).abs() < 1e-12);
        assert!((mean.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn algorithm_keys_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.key().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.key()));
        }
    }
}
