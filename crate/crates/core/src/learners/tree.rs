//! CART classification tree on weighted Gini impurity, shared by the random
//! forest (depth-limited, random feature subsets) and AdaBoost (stumps).

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Weighted class frequencies, summing to one.
        probs: [f64; 2],
    },
}

/// Flattened tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    pub nodes: Vec<Node>,
}

impl ClassificationTree {
    pub fn leaf_probs(&self, row: &[f64]) -> [f64; 2] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { probs } => return *probs,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Hard class under the 0.5 rule, ties to class 0.
    pub fn predict_class(&self, row: &[f64]) -> u8 {
        u8::from(self.leaf_probs(row)[1] > self.leaf_probs(row)[0])
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Smallest row count that reached any leaf during the fit; used by the
    /// structural audit.
    pub fn min_leaf_count(&self, rows: &[Vec<f64>], indices: &[usize]) -> usize {
        let mut counts = vec![0usize; self.nodes.len()];
        for &i in indices {
            let mut idx = 0;
            loop {
                match &self.nodes[idx] {
                    Node::Leaf { .. } => {
                        counts[idx] += 1;
                        break;
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        idx = if rows[i][*feature] <= *threshold {
                            *left
                        } else {
                            *right
                        };
                    }
                }
            }
        }
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(i, _)| counts[i])
            .filter(|&c| c > 0)
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FeatureSubset {
    All,
    /// floor(sqrt(d)) random candidates per node.
    Sqrt,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub feature_subset: FeatureSubset,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    weights: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
}

/// Fit a tree on the rows named by `indices` (duplicates allowed, as in a
/// bootstrap resample).
pub fn fit_classification_tree(
    rows: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    indices: &[usize],
    params: TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> ClassificationTree {
    let mut builder = Builder {
        rows,
        labels,
        weights,
        params,
        rng,
        nodes: Vec::new(),
    };
    let mut indices = indices.to_vec();
    builder.build(&mut indices, 0);
    ClassificationTree {
        nodes: builder.nodes,
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let (w0, w1) = self.class_sums(indices);
        let total = w0 + w1;
        let leaf = Node::Leaf {
            probs: [w0 / total, w1 / total],
        };

        let stop = depth >= self.params.max_depth
            || indices.len() < self.params.min_samples_split
            || w0 == 0.0
            || w1 == 0.0;
        if stop {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        }

        let Some(split) = self.best_split(indices, w0, w1) else {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        };

        let mid = partition(self.rows, indices, split.feature, split.threshold);
        let node_idx = self.nodes.len();
        // placeholder; children are built next and patched in
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let (left_indices, right_indices) = indices.split_at_mut(mid);
        let left = self.build(left_indices, depth + 1);
        let right = self.build(right_indices, depth + 1);
        self.nodes[node_idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        node_idx
    }

    fn class_sums(&self, indices: &[usize]) -> (f64, f64) {
        let mut sums = [0.0; 2];
        for &i in indices {
            sums[self.labels[i] as usize] += self.weights[i];
        }
        (sums[0], sums[1])
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.rows[0].len();
        match (self.params.feature_subset, self.rng.as_deref_mut()) {
            (FeatureSubset::All, _) | (_, None) => (0..d).collect(),
            (FeatureSubset::Sqrt, Some(rng)) => {
                let k = ((d as f64).sqrt().floor() as usize).clamp(1, d);
                let mut all: Vec<usize> = (0..d).collect();
                all.shuffle(rng);
                let mut picked = all[..k].to_vec();
                // ascending order keeps the tie-break deterministic
                picked.sort_unstable();
                picked
            }
        }
    }

    fn best_split(&mut self, indices: &[usize], w0: f64, w1: f64) -> Option<BestSplit> {
        let total = w0 + w1;
        let parent_score = total - (w0 * w0 + w1 * w1) / total;
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<BestSplit> = None;

        for feature in self.candidate_features() {
            let mut order: Vec<usize> = indices.to_vec();
            order.sort_unstable_by(|&a, &b| {
                self.rows[a][feature]
                    .partial_cmp(&self.rows[b][feature])
                    .unwrap()
            });

            let mut left = [0.0f64; 2];
            for (pos, &i) in order.iter().enumerate() {
                if pos > 0 {
                    let prev = self.rows[order[pos - 1]][feature];
                    let cur = self.rows[i][feature];
                    if cur > prev && pos >= min_leaf && order.len() - pos >= min_leaf {
                        let threshold = 0.5 * (prev + cur);
                        let wl = left[0] + left[1];
                        let wr = total - wl;
                        let score = (wl - (left[0] * left[0] + left[1] * left[1]) / wl)
                            + (wr
                                - ((w0 - left[0]) * (w0 - left[0])
                                    + (w1 - left[1]) * (w1 - left[1]))
                                    / wr);
                        let improves = score < parent_score - 1e-12 * parent_score.max(1.0);
                        if improves && best.as_ref().is_none_or(|b| score < b.score) {
                            best = Some(BestSplit {
                                feature,
                                threshold,
                                score,
                            });
                        }
                    }
                }
                left[self.labels[i] as usize] += self.weights[i];
            }
        }
        best
    }
}

fn partition(rows: &[Vec<f64>], indices: &mut [usize], feature: usize, threshold: f64) -> usize {
    let mut mid = 0;
    for i in 0..indices.len() {
        if rows[indices[i]][feature] <= threshold {
            indices.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    const PARAMS: TreeParams = TreeParams {
        max_depth: 3,
        min_samples_split: 2,
        min_samples_leaf: 1,
        feature_subset: FeatureSubset::All,
    };

    #[test]
    fn splits_separable_data_at_midpoint() {
        let rows = one_d(&[1.0, 2.0, 8.0, 9.0]);
        let labels = [0, 0, 1, 1];
        let weights = [1.0; 4];
        let indices = [0, 1, 2, 3];
        let tree =
            fit_classification_tree(&rows, &labels, &weights, &indices, PARAMS, None);
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 5.0),
            other => panic!("expected split at root, got {other:?}"),
        }
        assert_eq!(tree.predict_class(&[1.5]), 0);
        assert_eq!(tree.predict_class(&[8.5]), 1);
    }

    #[test]
    fn pure_node_stays_leaf() {
        let rows = one_d(&[1.0, 2.0, 3.0]);
        let labels = [1, 1, 1];
        let weights = [1.0; 3];
        let tree =
            fit_classification_tree(&rows, &labels, &weights, &[0, 1, 2], PARAMS, None);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.leaf_probs(&[2.0]), [0.0, 1.0]);
    }

    #[test]
    fn min_samples_leaf_larger_than_data_gives_single_leaf() {
        let rows = one_d(&[1.0, 2.0, 8.0, 9.0]);
        let labels = [0, 0, 1, 1];
        let weights = [1.0; 4];
        let params = TreeParams {
            min_samples_leaf: 10,
            ..PARAMS
        };
        let tree =
            fit_classification_tree(&rows, &labels, &weights, &[0, 1, 2, 3], params, None);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.leaf_probs(&[0.0]), [0.5, 0.5]);
    }

    #[test]
    fn respects_max_depth() {
        let values: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..32).map(|i| (i % 2) as u8).collect();
        let rows = one_d(&values);
        let weights = vec![1.0; 32];
        let indices: Vec<usize> = (0..32).collect();
        let params = TreeParams {
            max_depth: 2,
            ..PARAMS
        };
        let tree = fit_classification_tree(&rows, &labels, &weights, &indices, params, None);
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn weighted_majority_decides_leaf() {
        // single minority row outweighs the rest
        let rows = one_d(&[1.0, 1.0, 1.0]);
        let labels = [0, 0, 1];
        let weights = [1.0, 1.0, 5.0];
        let tree =
            fit_classification_tree(&rows, &labels, &weights, &[0, 1, 2], PARAMS, None);
        let probs = tree.leaf_probs(&[1.0]);
        assert!(probs[1] > probs[0]);
    }

    #[test]
    fn leaf_size_floor_is_respected() {
        let mut rng = crate::rng::derive_rng(17, &[5]);
        use rand::Rng;
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
            .collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0] > 0.2)).collect();
        let weights = vec![1.0; 60];
        let indices: Vec<usize> = (0..60).collect();
        let params = TreeParams {
            max_depth: 6,
            min_samples_split: 2,
            min_samples_leaf: 4,
            feature_subset: FeatureSubset::All,
        };
        let tree = fit_classification_tree(&rows, &labels, &weights, &indices, params, None);
        assert!(tree.depth() <= 6);
        assert!(tree.min_leaf_count(&rows, &indices) >= 4);
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // identical separating power on both features
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        ];
        let labels = [0, 0, 1, 1];
        let weights = [1.0; 4];
        let tree =
            fit_classification_tree(&rows, &labels, &weights, &[0, 1, 2, 3], PARAMS, None);
        match &tree.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }
}
