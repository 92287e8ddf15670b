use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ClassifyError, Distribution};
use crate::genre::{Genre, N_GENRES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Nodes with fewer rows become leaves.
    pub min_samples_split: usize,
    /// Columns drawn at random per split; `None` searches all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 12, min_samples_split: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf { dist: Distribution },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// CART classification tree (Gini impurity). Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

/// `1 - sum p_c^2` over the class counts.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

pub fn train_tree(rows: &[Vec<f64>], labels: &[Genre]) -> Result<DecisionTree, ClassifyError> {
    let indices: Vec<usize> = (0..rows.len()).collect();
    fit_tree(rows, labels, &indices, TreeParams::default(), &mut NoColumnSampling)
}

/// Source of per-split column subsets.
pub(crate) trait ColumnSampler {
    fn columns(&mut self, dim: usize, max_features: Option<usize>) -> Vec<usize>;
}

pub(crate) struct NoColumnSampling;

impl ColumnSampler for NoColumnSampling {
    fn columns(&mut self, dim: usize, _: Option<usize>) -> Vec<usize> {
        (0..dim).collect()
    }
}

/// Draws a fresh sorted column subset from the wrapped RNG at every split.
pub(crate) struct RandomColumns<'a, R>(pub &'a mut R);

impl<R: Rng> ColumnSampler for RandomColumns<'_, R> {
    fn columns(&mut self, dim: usize, max_features: Option<usize>) -> Vec<usize> {
        match max_features {
            Some(m) if m < dim => {
                let mut cols = sample(self.0, dim, m.max(1)).into_vec();
                cols.sort_unstable();
                cols
            }
            _ => (0..dim).collect(),
        }
    }
}

/// Trains on `indices` (duplicates allowed, as in a bootstrap sample).
pub(crate) fn fit_tree(
    rows: &[Vec<f64>],
    labels: &[Genre],
    indices: &[usize],
    params: TreeParams,
    sampler: &mut dyn ColumnSampler,
) -> Result<DecisionTree, ClassifyError> {
    let dim = check_training_set(rows, labels)?;
    let mut builder = Builder { rows, labels, params, dim, nodes: Vec::new(), sampler };
    builder.grow(indices.to_vec(), 0);
    Ok(DecisionTree { n_features: dim, nodes: builder.nodes })
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [Genre],
    params: TreeParams,
    dim: usize,
    nodes: Vec<Node>,
    sampler: &'a mut dyn ColumnSampler,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; N_GENRES] {
        let mut counts = [0; N_GENRES];
        for &i in idx {
            counts[self.labels[i].code()] += 1;
        }
        counts
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            dist: Distribution::from_weights(counts.map(|c| c as f64)),
        };
        self.nodes.push(leaf);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || idx.len() < self.params.min_samples_split {
            return id;
        }
        let Some(split) = self.best_split(&idx, &counts) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    /// Highest Gini gain; ties keep the lowest column, then lowest threshold.
    fn best_split(&mut self, idx: &[usize], counts: &[usize; N_GENRES]) -> Option<Split> {
        let parent = gini(counts);
        let n = idx.len() as f64;
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for feature in self.sampler.columns(self.dim, self.params.max_features) {
            order.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
            let mut left = [0usize; N_GENRES];
            let mut right = *counts;
            for w in 0..order.len() - 1 {
                let code = self.labels[order[w]].code();
                left[code] += 1;
                right[code] -= 1;
                let (lo, hi) = (self.rows[order[w]][feature], self.rows[order[w + 1]][feature]);
                if lo == hi {
                    continue;
                }
                let nl = (w + 1) as f64;
                let weighted = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
                let gain = parent - weighted;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Split { feature, threshold, gain });
                }
            }
        }
        best
    }
}

impl DecisionTree {
    pub fn leaf(&self, x: &[f64]) -> &Distribution {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { dist } => return dist,
                Node::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { feature, threshold, left, right } = node {
                if *feature >= self.n_features || !threshold.is_finite() {
                    return Err(format!("node {i}: bad split"));
                }
                // children always come after their parent
                if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(format!("node {i}: bad child index"));
                }
            }
        }
        Ok(())
    }
}

impl Classifier for DecisionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba_unchecked(&self, x: &[f64]) -> Distribution {
        *self.leaf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_reference_values() {
        assert_eq!(gini(&[4, 0, 0]), 0.0);
        assert_eq!(gini(&[3, 3]), 0.5);
        assert!((gini(&[1, 1, 1]) - 2.0 / 3.0).abs() < 1e-15);
    }

    /// Candidate thresholds 0.5, 1.5, 2.5 give weighted child Gini
    /// 1/3, 0, 1/3; only 1.5 separates the classes.
    #[test]
    fn one_dimensional_split_at_midpoint() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = vec![Genre::Blues, Genre::Blues, Genre::Classical, Genre::Classical];
        let tree = train_tree(&rows, &labels).unwrap();
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.predict_proba(&[0.2]).unwrap().prob(Genre::Blues), 1.0);
        assert_eq!(tree.predict_proba(&[2.9]).unwrap().prob(Genre::Classical), 1.0);
    }

    #[test]
    fn equal_gain_prefers_lowest_column() {
        // both columns separate perfectly
        let rows = vec![vec![0.0, 10.0], vec![1.0, 20.0]];
        let labels = vec![Genre::Pop, Genre::Rock];
        let tree = train_tree(&rows, &labels).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn duplicate_points_with_mixed_labels_make_a_leaf() {
        let rows = vec![vec![1.0], vec![1.0], vec![1.0]];
        let labels = vec![Genre::Pop, Genre::Rock, Genre::Rock];
        let tree = train_tree(&rows, &labels).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        let d = tree.predict_proba(&[1.0]).unwrap();
        assert!((d.prob(Genre::Rock) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn depth_is_capped() {
        // alternating labels on a line need one split per point
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let labels: Vec<Genre> = (0..100)
            .map(|i| if i % 2 == 0 { Genre::Jazz } else { Genre::Metal })
            .collect();
        let tree = train_tree(&rows, &labels).unwrap();
        assert!(tree.depth() <= 12);
        tree.validate().unwrap();
    }
}
