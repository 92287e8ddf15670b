use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ClassifyError, Distribution};
use crate::genre::{Genre, N_GENRES};

pub const DEFAULT_K: usize = 5;

/// k-nearest-neighbour vote over Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Genre>,
}

pub fn train_knn(rows: &[Vec<f64>], labels: &[Genre], k: usize) -> Result<Knn, ClassifyError> {
    check_training_set(rows, labels)?;
    if k == 0 {
        return Err(ClassifyError::InsufficientData("k must be at least 1".into()));
    }
    Ok(Knn { k, rows: rows.to_vec(), labels: labels.to_vec() })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Knn {
    /// Indices of the `k` nearest rows, ordered by (distance, index).
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, x), i))
            .collect();
        let k = self.k.min(scored.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_distance);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_distance);
        scored.into_iter().map(|(_, i)| i).collect()
    }

    fn votes(&self, neighbours: &[usize]) -> [f64; N_GENRES] {
        let mut votes = [0.0; N_GENRES];
        for &i in neighbours {
            votes[self.labels[i].code()] += 1.0;
        }
        votes
    }
}

impl Classifier for Knn {
    fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution {
        let nn = self.neighbours(x);
        let n = nn.len() as f64;
        Distribution::from_probs(self.votes(&nn).map(|v| v / n))
    }

    /// Majority vote; among tied classes the one owning the nearest
    /// neighbour wins.
    fn predict(&self, x: &[f64]) -> Result<Genre, ClassifyError> {
        super::check_dim(self.n_features(), x)?;
        let nn = self.neighbours(x);
        let votes = self.votes(&nn);
        let top = votes.iter().cloned().fold(0.0, f64::max);
        let winner = nn
            .iter()
            .map(|&i| self.labels[i])
            .find(|g| votes[g.code()] == top)
            .expect("at least one neighbour");
        Ok(winner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 5.0]];
        let labels = vec![Genre::Rock, Genre::Pop, Genre::Jazz];
        let knn = train_knn(&rows, &labels, 1).unwrap();
        let d = knn.predict_proba(&[1.0, 1.0]).unwrap();
        assert_eq!(d.prob(Genre::Pop), 1.0);
    }

    #[test]
    fn vote_fractions_and_nearest_tiebreak() {
        // k = 4 splits 2-2 between Blues and Jazz; the nearest point is Jazz.
        let rows = vec![vec![3.0], vec![1.0], vec![2.0], vec![4.0], vec![100.0]];
        let labels = vec![Genre::Blues, Genre::Jazz, Genre::Blues, Genre::Jazz, Genre::Rock];
        let knn = train_knn(&rows, &labels, 4).unwrap();
        let d = knn.predict_proba(&[0.0]).unwrap();
        assert_eq!(d.prob(Genre::Jazz), 0.5);
        assert_eq!(d.prob(Genre::Blues), 0.5);
        // distribution argmax picks the lower code; predict picks the nearest
        assert_eq!(d.argmax(), Genre::Blues);
        assert_eq!(knn.predict(&[0.0]).unwrap(), Genre::Jazz);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let rows = vec![vec![1.0], vec![-1.0], vec![1.0]];
        let labels = vec![Genre::Pop, Genre::Rock, Genre::Metal];
        let knn = train_knn(&rows, &labels, 1).unwrap();
        assert_eq!(knn.neighbours(&[0.0]), vec![0]);
        let knn = train_knn(&rows, &labels, 2).unwrap();
        assert_eq!(knn.neighbours(&[0.0]), vec![0, 1]);
    }

    #[test]
    fn dimension_mismatch() {
        let knn = train_knn(&[vec![0.0], vec![1.0]], &[Genre::Pop, Genre::Rock], 1).unwrap();
        assert!(matches!(knn.predict_proba(&[0.0, 1.0]), Err(ClassifyError::DimensionMismatch { .. })));
    }
}
