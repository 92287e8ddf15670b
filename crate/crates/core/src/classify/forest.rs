use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RandomColumns};
use super::{check_training_set, Classifier, ClassifyError, DecisionTree, Distribution, TreeParams};
use crate::genre::{Genre, N_GENRES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Columns per split; `None` means `ceil(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub subsample_columns: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            bootstrap: true,
            max_features: None,
            subsample_columns: true,
            tree: TreeParams::default(),
        }
    }
}

/// Bagged CART ensemble; predicts the mean of its trees' leaf distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
}

/// Tree `i` draws its bootstrap sample and split columns from an RNG seeded
/// with `seed + i`, so trees are independent of training order.
pub fn train_forest(
    rows: &[Vec<f64>],
    labels: &[Genre],
    seed: u64,
    params: ForestParams,
) -> Result<Forest, ClassifyError> {
    let dim = check_training_set(rows, labels)?;
    if params.n_trees == 0 {
        return Err(ClassifyError::InsufficientData("forest needs at least one tree".into()));
    }
    let max_features = if params.subsample_columns {
        Some(params.max_features.unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize))
    } else {
        None
    };
    let tree_params = TreeParams { max_features, ..params.tree };
    let n = rows.len();
    let trees = (0..params.n_trees)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(rows, labels, &indices, tree_params, &mut RandomColumns(&mut rng))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest { trees })
}

impl Classifier for Forest {
    fn n_features(&self) -> usize {
        self.trees.first().map_or(0, |t| t.n_features)
    }

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution {
        let mut acc = [0.0; N_GENRES];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.leaf(x).probs()) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        Distribution::from_probs(acc.map(|a| a / n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::train_tree;

    fn blobs() -> (Vec<Vec<f64>>, Vec<Genre>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, g) in [Genre::Rock, Genre::Pop, Genre::Jazz].iter().enumerate() {
            for _ in 0..20 {
                rows.push((0..5).map(|j| if j == c { 3.0 } else { 0.0 } + rng.random_range(-1.5..1.5)).collect());
                labels.push(*g);
            }
        }
        (rows, labels)
    }

    #[test]
    fn single_full_tree_reduces_to_cart() {
        let (rows, labels) = blobs();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            subsample_columns: false,
            ..ForestParams::default()
        };
        let forest = train_forest(&rows, &labels, 11, params).unwrap();
        let tree = train_tree(&rows, &labels).unwrap();
        assert_eq!(forest.trees[0], tree);
        for r in &rows {
            assert_eq!(forest.predict_proba(r).unwrap(), tree.predict_proba(r).unwrap());
        }
    }

    #[test]
    fn prediction_is_the_mean_of_trees() {
        let (rows, labels) = blobs();
        let forest = train_forest(&rows, &labels, 5, ForestParams { n_trees: 7, ..Default::default() }).unwrap();
        let q = vec![0.5, 1.0, -0.2, 0.0, 0.3];
        let mut acc = [0.0; N_GENRES];
        for t in &forest.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(&q).unwrap().probs()) {
                *a += p;
            }
        }
        assert_eq!(forest.predict_proba(&q).unwrap().probs(), &acc.map(|a| a / 7.0));
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let (rows, labels) = blobs();
        let a = train_forest(&rows, &labels, 42, ForestParams::default()).unwrap();
        let b = train_forest(&rows, &labels, 42, ForestParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trees.len(), 50);
        let c = train_forest(&rows, &labels, 43, ForestParams::default()).unwrap();
        assert_ne!(a, c);
    }
}
