//! Deliberately simple base classifiers for the semi-supervised harness:
//! softmax regression trained by gradient descent, nearest centroid, and a
//! depth-2 axis-aligned decision tree.

use super::Dataset2D;
use crate::error::{Error, Result};
use crate::math::softmax_into;
use crate::scalar::{lit, Real};
use crate::types::argmax_row;
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeakKind {
    Logistic,
    NearestCentroid,
    DepthTwoTree,
}

/// All three kinds, in the order the experiment harness uses them.
pub const DEFAULT_KINDS: [WeakKind; 3] = [
    WeakKind::Logistic,
    WeakKind::NearestCentroid,
    WeakKind::DepthTwoTree,
];

#[derive(Debug, Clone)]
pub enum WeakClassifier<F: Real> {
    /// Per-class weight rows over (x, y, 1).
    Logistic { weights: Array2<F> },
    NearestCentroid { centroids: Array2<F> },
    Tree(TreeNode<F>),
}

#[derive(Debug, Clone)]
pub enum TreeNode<F: Real> {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: F,
        left: Box<TreeNode<F>>,
        right: Box<TreeNode<F>>,
    },
}

impl<F: Real> WeakClassifier<F> {
    pub fn predict(&self, point: &[F]) -> usize {
        match self {
            WeakClassifier::Logistic { weights } => {
                let k = weights.nrows();
                let scores: Vec<F> = (0..k)
                    .map(|c| {
                        weights[[c, 0]] * point[0] + weights[[c, 1]] * point[1] + weights[[c, 2]]
                    })
                    .collect();
                argmax_row(scores)
            }
            WeakClassifier::NearestCentroid { centroids } => {
                let mut best = 0;
                let mut best_d = F::infinity();
                for c in 0..centroids.nrows() {
                    let dx = point[0] - centroids[[c, 0]];
                    let dy = point[1] - centroids[[c, 1]];
                    let d2 = dx * dx + dy * dy;
                    if d2 < best_d {
                        best_d = d2;
                        best = c;
                    }
                }
                best
            }
            WeakClassifier::Tree(root) => {
                let mut node = root;
                loop {
                    match node {
                        TreeNode::Leaf(c) => return *c,
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            node = if point[*feature] <= *threshold { left } else { right };
                        }
                    }
                }
            }
        }
    }
}

/// Train the requested base classifiers. Fails if any class has no training
/// example. Training is deterministic (gradient descent from zero weights;
/// exhaustive split search), so the seed only namespaces future stochastic
/// learners.
pub fn train_weak_classifiers<F: Real>(
    train: &Dataset2D<F>,
    kinds: &[WeakKind],
    _seed: u64,
) -> Result<Vec<WeakClassifier<F>>> {
    let k = train.n_classes;
    let mut present = vec![false; k];
    for &l in &train.labels {
        present[l] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(Error::invalid_argument(format!(
            "class {missing} absent from the training data"
        )));
    }
    kinds
        .iter()
        .map(|kind| match kind {
            WeakKind::Logistic => Ok(train_logistic(train)),
            WeakKind::NearestCentroid => Ok(train_nearest_centroid(train)),
            WeakKind::DepthTwoTree => Ok(WeakClassifier::Tree(train_tree(train))),
        })
        .collect()
}

fn train_logistic<F: Real>(train: &Dataset2D<F>) -> WeakClassifier<F> {
    let (n, k) = (train.len(), train.n_classes);
    let mut weights = Array2::<F>::zeros((k, 3));
    let lr = lit::<F>(0.5);
    let nf = lit::<F>(n as f64);
    let mut probs = vec![F::zero(); k];
    let iterations = 500;
    for _ in 0..iterations {
        let mut grad = Array2::<F>::zeros((k, 3));
        for obj in 0..n {
            let feats = [train.points[[obj, 0]], train.points[[obj, 1]], F::one()];
            let scores: Vec<F> = (0..k)
                .map(|c| {
                    weights[[c, 0]] * feats[0] + weights[[c, 1]] * feats[1] + weights[[c, 2]]
                })
                .collect();
            softmax_into(scores.iter().copied(), &mut probs);
            for c in 0..k {
                let err = probs[c] - if train.labels[obj] == c { F::one() } else { F::zero() };
                for d in 0..3 {
                    grad[[c, d]] = grad[[c, d]] + err * feats[d];
                }
            }
        }
        for c in 0..k {
            for d in 0..3 {
                weights[[c, d]] = weights[[c, d]] - lr * grad[[c, d]] / nf;
            }
        }
    }
    WeakClassifier::Logistic { weights }
}

fn train_nearest_centroid<F: Real>(train: &Dataset2D<F>) -> WeakClassifier<F> {
    let k = train.n_classes;
    let mut centroids = Array2::<F>::zeros((k, 2));
    let mut counts = vec![0usize; k];
    for obj in 0..train.len() {
        let c = train.labels[obj];
        counts[c] += 1;
        centroids[[c, 0]] = centroids[[c, 0]] + train.points[[obj, 0]];
        centroids[[c, 1]] = centroids[[c, 1]] + train.points[[obj, 1]];
    }
    for c in 0..k {
        let cf = lit::<F>(counts[c] as f64);
        centroids[[c, 0]] = centroids[[c, 0]] / cf;
        centroids[[c, 1]] = centroids[[c, 1]] / cf;
    }
    WeakClassifier::NearestCentroid { centroids }
}

fn majority<F: Real>(train: &Dataset2D<F>, idx: &[usize]) -> (usize, usize) {
    let mut counts = vec![0usize; train.n_classes];
    for &i in idx {
        counts[train.labels[i]] += 1;
    }
    let maj = argmax_row(counts.iter().map(|&c| c as f64));
    (maj, idx.len() - counts[maj])
}

/// Candidate thresholds: midpoints of consecutive distinct sorted values.
fn candidate_splits<F: Real>(train: &Dataset2D<F>, idx: &[usize]) -> Vec<(usize, F)> {
    let mut out = vec![];
    for feature in 0..2 {
        let mut vals: Vec<F> = idx.iter().map(|&i| train.points[[i, feature]]).collect();
        vals.sort_unstable_by(|a, b| a.total_order(b));
        vals.dedup_by(|a, b| a == b);
        for w in vals.windows(2) {
            out.push((feature, (w[0] + w[1]) / lit::<F>(2.0)));
        }
    }
    out
}

fn partition<F: Real>(train: &Dataset2D<F>, idx: &[usize], feature: usize, thr: F) -> (Vec<usize>, Vec<usize>) {
    let mut l = vec![];
    let mut r = vec![];
    for &i in idx {
        if train.points[[i, feature]] <= thr {
            l.push(i);
        } else {
            r.push(i);
        }
    }
    (l, r)
}

/// Best single split of `idx` by misclassification count, compared against
/// leaving the node a leaf. Ties keep the earliest candidate.
fn best_depth1<F: Real>(train: &Dataset2D<F>, idx: &[usize]) -> (usize, TreeNode<F>) {
    let (maj, leaf_err) = majority(train, idx);
    let mut best = (leaf_err, TreeNode::Leaf(maj));
    for (feature, thr) in candidate_splits(train, idx) {
        let (l, r) = partition(train, idx, feature, thr);
        if l.is_empty() || r.is_empty() {
            continue;
        }
        let (lm, le) = majority(train, &l);
        let (rm, re) = majority(train, &r);
        if le + re < best.0 {
            best = (
                le + re,
                TreeNode::Split {
                    feature,
                    threshold: thr,
                    left: Box::new(TreeNode::Leaf(lm)),
                    right: Box::new(TreeNode::Leaf(rm)),
                },
            );
        }
    }
    best
}

/// Exact depth-2 tree: enumerate every root split, solve each child
/// optimally, keep the combination with the fewest training errors.
/// Training sets here are tiny, so exhaustive search is cheap and, unlike
/// greedy impurity descent, it handles XOR-style layouts.
fn train_tree<F: Real>(train: &Dataset2D<F>) -> TreeNode<F> {
    let idx: Vec<usize> = (0..train.len()).collect();
    let (mut best_err, mut best_node) = best_depth1(train, &idx);
    for (feature, thr) in candidate_splits(train, &idx) {
        let (l, r) = partition(train, &idx, feature, thr);
        if l.is_empty() || r.is_empty() {
            continue;
        }
        let (le, ln) = best_depth1(train, &l);
        let (re, rn) = best_depth1(train, &r);
        if le + re < best_err {
            best_err = le + re;
            best_node = TreeNode::Split {
                feature,
                threshold: thr,
                left: Box::new(ln),
                right: Box::new(rn),
            };
        }
    }
    best_node
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> Dataset2D<f64> {
        let points = array![
            [-2.0, 0.0],
            [-2.2, 0.3],
            [-1.8, -0.2],
            [-2.1, 0.1],
            [2.0, 0.0],
            [2.2, -0.3],
            [1.8, 0.2],
            [2.1, -0.1],
        ];
        Dataset2D {
            points,
            labels: vec![0, 0, 0, 0, 1, 1, 1, 1],
            n_classes: 2,
        }
    }

    #[test]
    fn logistic_separates_blobs_perfectly() {
        let d = blobs();
        let clfs = train_weak_classifiers(&d, &[WeakKind::Logistic], 0).unwrap();
        for obj in 0..d.len() {
            let p = [d.points[[obj, 0]], d.points[[obj, 1]]];
            assert_eq!(clfs[0].predict(&p), d.labels[obj]);
        }
    }

    #[test]
    fn nearest_centroid_boundary_is_perpendicular_bisector() {
        let d = blobs();
        let clfs = train_weak_classifiers(&d, &[WeakKind::NearestCentroid], 0).unwrap();
        // Centroids sit at roughly (+-2.025, ~0); probe points around x = 0.
        for &(x, y, want) in &[
            (-0.5, 1.0, 0usize),
            (-0.1, -2.0, 0),
            (0.1, 2.0, 1),
            (0.5, -1.0, 1),
            (-3.0, 0.0, 0),
        ] {
            assert_eq!(clfs[0].predict(&[x, y]), want, "probe ({x},{y})");
        }
    }

    #[test]
    fn depth_two_tree_solves_xor_quadrants() {
        let points = array![
            [-1.0, -1.0],
            [-1.2, -0.8],
            [1.0, 1.0],
            [0.8, 1.2],
            [-1.0, 1.0],
            [-0.8, 1.2],
            [1.0, -1.0],
            [1.2, -0.8],
        ];
        let d = Dataset2D {
            points,
            labels: vec![0, 0, 0, 0, 1, 1, 1, 1],
            n_classes: 2,
        };
        let clfs = train_weak_classifiers(&d, &[WeakKind::DepthTwoTree], 0).unwrap();
        for obj in 0..d.len() {
            let p = [d.points[[obj, 0]], d.points[[obj, 1]]];
            assert_eq!(clfs[0].predict(&p), d.labels[obj], "object {obj}");
        }
    }

    #[test]
    fn missing_class_is_invalid_argument() {
        let mut d = blobs();
        d.labels = vec![0; 8];
        assert!(train_weak_classifiers(&d, &DEFAULT_KINDS, 0).is_err());
    }
}
