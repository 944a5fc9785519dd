//! Domain types shared by every stage of the pipeline.
//!
//! Label convention: all in-memory labels are 0-based (class `i` of `k`
//! means `i` in `0..k`). Files and CLI surfaces use 1-based labels; the io
//! layer converts at the boundary.

use crate::error::{Error, Result};
use crate::exact::stable_sum;
use crate::math::softmax_into;
use crate::scalar::Real;
use ndarray::{Array1, Array2};

/// Dimensions of a combination problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemShape {
    /// Number of target objects N.
    pub n_objects: usize,
    /// Number of classes k.
    pub n_classes: usize,
    /// Number of classifiers r1 (each contributes one label column).
    pub n_classifiers: usize,
    /// Number of clusterings r2.
    pub n_clusterings: usize,
    /// Clusters per clustering, `k_m`, one entry per clustering.
    pub clusters_per_clustering: Vec<usize>,
}

impl ProblemShape {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects < 1 {
            return Err(Error::invalid_argument("need at least one object"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid_argument("need at least two classes"));
        }
        if self.clusters_per_clustering.len() != self.n_clusterings {
            return Err(Error::invalid_argument(format!(
                "clusters_per_clustering has {} entries for {} clusterings",
                self.clusters_per_clustering.len(),
                self.n_clusterings
            )));
        }
        if self.clusters_per_clustering.iter().any(|&km| km < 1) {
            return Err(Error::invalid_argument("every clustering needs >= 1 cluster"));
        }
        if self.n_classifiers + self.n_clusterings < 1 {
            return Err(Error::invalid_argument(
                "need at least one classifier or clustering column",
            ));
        }
        Ok(())
    }
}

/// The observed label matrix W: per object, `r1` hard class labels and `r2`
/// cluster labels. Entries are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelObservations {
    /// N x r1, entries in `0..k`.
    pub class_labels: Array2<usize>,
    /// N x r2, column m entries in `0..k_m[m]`.
    pub cluster_labels: Array2<usize>,
}

impl LabelObservations {
    pub fn validate(&self, shape: &ProblemShape) -> Result<()> {
        shape.validate()?;
        let (n1, r1) = self.class_labels.dim();
        let (n2, r2) = self.cluster_labels.dim();
        if n1 != shape.n_objects || r1 != shape.n_classifiers {
            return Err(Error::invalid_argument(format!(
                "class label matrix is {n1}x{r1}, expected {}x{}",
                shape.n_objects, shape.n_classifiers
            )));
        }
        if n2 != shape.n_objects || r2 != shape.n_clusterings {
            return Err(Error::invalid_argument(format!(
                "cluster label matrix is {n2}x{r2}, expected {}x{}",
                shape.n_objects, shape.n_clusterings
            )));
        }
        if self.class_labels.iter().any(|&w| w >= shape.n_classes) {
            return Err(Error::invalid_argument("class label out of range"));
        }
        for m in 0..r2 {
            let km = shape.clusters_per_clustering[m];
            if self.cluster_labels.column(m).iter().any(|&w| w >= km) {
                return Err(Error::invalid_argument(format!(
                    "cluster label out of range in clustering {m}"
                )));
            }
        }
        Ok(())
    }

    /// Per-object class vote counts from the classifier columns (N x k).
    pub fn vote_counts(&self, n_classes: usize) -> Array2<u32> {
        let (n, r1) = self.class_labels.dim();
        let mut counts = Array2::zeros((n, n_classes));
        for obj in 0..n {
            for l in 0..r1 {
                counts[[obj, self.class_labels[[obj, l]]]] += 1;
            }
        }
        counts
    }
}

/// Global model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F: Real> {
    /// Prior mean over the latent class-score vector (length k).
    pub mu: Array1<F>,
    /// Diagonal of the prior covariance (length k, strictly positive).
    pub sigma2: Array1<F>,
    /// Coupling variance between the class-score and cluster-score latents.
    pub delta2: F,
    /// Per clustering m, a k x k_m row-stochastic emission matrix.
    pub beta: Vec<Array2<F>>,
}

impl<F: Real> ModelParams<F> {
    pub fn validate(&self, shape: &ProblemShape) -> Result<()> {
        let k = shape.n_classes;
        if self.mu.len() != k || self.sigma2.len() != k {
            return Err(Error::invalid_argument("mu/sigma2 length != k"));
        }
        if self.sigma2.iter().any(|v| !(*v > F::zero())) {
            return Err(Error::invalid_state("sigma2 must be strictly positive"));
        }
        if !(self.delta2 > F::zero()) {
            return Err(Error::invalid_state("delta2 must be strictly positive"));
        }
        if self.beta.len() != shape.n_clusterings {
            return Err(Error::invalid_argument("beta count != r2"));
        }
        let tol = crate::scalar::lit::<F>(1e-9);
        for (m, b) in self.beta.iter().enumerate() {
            let (rows, cols) = b.dim();
            if rows != k || cols != shape.clusters_per_clustering[m] {
                return Err(Error::invalid_argument(format!(
                    "beta[{m}] is {rows}x{cols}, expected {k}x{}",
                    shape.clusters_per_clustering[m]
                )));
            }
            for row in b.rows() {
                if row.iter().any(|v| *v < F::zero()) {
                    return Err(Error::invalid_state("beta entries must be >= 0"));
                }
                let s = stable_sum(row.iter().copied());
                if (s - F::one()).abs() > tol {
                    return Err(Error::invalid_state(format!(
                        "beta[{m}] row does not sum to 1 (sum = {s})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-object variational parameters plus the two Taylor scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState<F: Real> {
    /// N x k mean of the class-score posterior factor.
    pub mu_n: Array2<F>,
    /// N x k variance diagonal of the class-score factor (positive).
    pub sigma_n2: Array2<F>,
    /// N x k mean of the cluster-score factor.
    pub eps_n: Array2<F>,
    /// N x k variance diagonal of the cluster-score factor (positive).
    pub delta_n2: Array2<F>,
    /// Per clustering m, an N x k matrix of assignment probabilities
    /// (`phi[m]` row n is the object's soft class assignment for clustering m).
    pub phi: Vec<Array2<F>>,
    /// Taylor point for the class-score softmax normalizer (length N, positive).
    pub kappa: Array1<F>,
    /// Taylor point for the cluster-score softmax normalizer (length N, positive).
    pub xi: Array1<F>,
}

impl<F: Real> VariationalState<F> {
    pub fn validate(&self, shape: &ProblemShape) -> Result<()> {
        let (n, k) = (shape.n_objects, shape.n_classes);
        for (name, m) in [
            ("mu_n", &self.mu_n),
            ("sigma_n2", &self.sigma_n2),
            ("eps_n", &self.eps_n),
            ("delta_n2", &self.delta_n2),
        ] {
            if m.dim() != (n, k) {
                return Err(Error::invalid_argument(format!("{name} has wrong shape")));
            }
        }
        if self.sigma_n2.iter().chain(self.delta_n2.iter()).any(|v| !(*v > F::zero())) {
            return Err(Error::invalid_state("variational variances must be positive"));
        }
        if self.kappa.len() != n || self.xi.len() != n {
            return Err(Error::invalid_argument("kappa/xi length != N"));
        }
        if self.kappa.iter().chain(self.xi.iter()).any(|v| !(*v > F::zero())) {
            return Err(Error::invalid_state("kappa and xi must be positive"));
        }
        if self.phi.len() != shape.n_clusterings {
            return Err(Error::invalid_argument("phi count != r2"));
        }
        let tol = crate::scalar::lit::<F>(1e-9);
        for (m, p) in self.phi.iter().enumerate() {
            if p.dim() != (n, k) {
                return Err(Error::invalid_argument(format!("phi[{m}] has wrong shape")));
            }
            for row in p.rows() {
                if row.iter().any(|v| *v < F::zero()) {
                    return Err(Error::invalid_state("phi entries must be >= 0"));
                }
                let s = stable_sum(row.iter().copied());
                if (s - F::one()).abs() > tol {
                    return Err(Error::invalid_state("phi row does not sum to 1"));
                }
            }
        }
        Ok(())
    }
}

/// Refined per-object class distributions and the fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult<F: Real> {
    /// N x k row-stochastic matrix, row n = softmax(mu_n[n]).
    pub class_posteriors: Array2<F>,
    /// 0-based argmax labels, ties broken toward the lowest class index.
    pub hard_labels: Vec<usize>,
    pub final_elbo: F,
    pub n_outer_iterations: usize,
}

/// Latent draws produced by the sampler alongside the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTruth<F: Real> {
    /// N x k class-score vectors.
    pub y: Array2<F>,
    /// N x k cluster-score vectors.
    pub theta: Array2<F>,
    /// N x r2 0-based latent class assignments per clustering.
    pub z: Array2<usize>,
}

impl<F: Real> LatentTruth<F> {
    /// Ground-truth hard label per object: argmax of the class-score vector
    /// (equivalently of its softmax).
    pub fn true_labels(&self) -> Vec<usize> {
        self.y.rows().into_iter().map(|r| argmax_row(r.iter().copied())).collect()
    }
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax_row<F: Real>(vals: impl IntoIterator<Item = F>) -> usize {
    let mut best = 0usize;
    let mut best_val = None;
    for (i, v) in vals.into_iter().enumerate() {
        match best_val {
            None => {
                best = i;
                best_val = Some(v);
            }
            Some(bv) => {
                if v > bv {
                    best = i;
                    best_val = Some(v);
                }
            }
        }
    }
    best
}

/// Softmax of each `mu_n` row plus argmax labels.
pub fn posterior_from_state<F: Real>(vs: &VariationalState<F>) -> PosteriorResult<F> {
    let (n, k) = vs.mu_n.dim();
    let mut post = Array2::zeros((n, k));
    let mut hard = Vec::with_capacity(n);
    let mut buf = vec![F::zero(); k];
    for obj in 0..n {
        softmax_into(vs.mu_n.row(obj).iter().copied(), &mut buf);
        for (i, &p) in buf.iter().enumerate() {
            post[[obj, i]] = p;
        }
        hard.push(argmax_row(buf.iter().copied()));
    }
    PosteriorResult {
        class_posteriors: post,
        hard_labels: hard,
        final_elbo: F::nan(),
        n_outer_iterations: 0,
    }
}
