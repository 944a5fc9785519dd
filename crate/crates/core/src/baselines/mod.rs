//! Desk-scale benchmark machinery: 2-D dataset generators, a seeded Lloyd's
//! k-means for the cluster ensembles, simple base classifiers, and the
//! semi-supervised experiment harness that ties them together.

pub mod experiment;
pub mod generators;
pub mod kmeans;
pub mod weak;

pub use experiment::{run_semi_supervised_experiment, ExperimentConfig, TrialOutcome};
pub use generators::{make_circles, make_half_moons};
pub use kmeans::{kmeans, KMeansResult};
pub use weak::{train_weak_classifiers, WeakClassifier, WeakKind};

use crate::scalar::Real;
use ndarray::Array2;

/// A labeled 2-D point set. Labels are 0-based.
#[derive(Debug, Clone)]
pub struct Dataset2D<F: Real> {
    /// N x 2 coordinates.
    pub points: Array2<F>,
    /// 0-based class labels, length N.
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl<F: Real> Dataset2D<F> {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fraction of positions where the two label sequences agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
