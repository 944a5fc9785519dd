//! Initialization of model and variational parameters from the raw label
//! matrix.

use super::updates::{
    beta_count_accs, mstep_beta_from_counts, mu_sum_acc, mstep_mu_from_sums, update_kappa,
    update_xi,
};
use super::FitConfig;
use crate::error::Result;
use crate::exact::stable_sum;
use crate::math::softmax_into;
use crate::scalar::{lit, Real};
use crate::types::{LabelObservations, ModelParams, ProblemShape, VariationalState};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Build the starting point: class-score means from Laplace-smoothed vote
/// frequencies (uniform when there are no classifiers), unit variances,
/// vote-softmax assignments with a +-1% multiplicative seeded jitter, and
/// emission rows fitted to those assignments.
pub fn initialize<F: Real>(
    w: &LabelObservations,
    shape: &ProblemShape,
    cfg: &FitConfig,
) -> Result<(ModelParams<F>, VariationalState<F>)> {
    w.validate(shape)?;
    cfg.validate()?;
    let (n, k, r1, r2) = (
        shape.n_objects,
        shape.n_classes,
        shape.n_classifiers,
        shape.n_clusterings,
    );

    let mut mu_n = Array2::<F>::zeros((n, k));
    if r1 > 0 {
        let votes = w.vote_counts(k);
        for obj in 0..n {
            for i in 0..k {
                let freq = (votes[[obj, i]] as f64 + 1.0) / (r1 + k) as f64;
                mu_n[[obj, i]] = lit::<F>(freq.ln());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut base = vec![F::zero(); k];
    let phi: Vec<Array2<F>> = (0..r2)
        .map(|_| {
            let mut p = Array2::<F>::zeros((n, k));
            for obj in 0..n {
                softmax_into(mu_n.row(obj).iter().copied(), &mut base);
                for i in 0..k {
                    let u: f64 = rng.gen_range(-1.0..1.0);
                    p[[obj, i]] = base[i] * lit::<F>(1.0 + 0.01 * u);
                }
                let denom = stable_sum(p.row(obj).iter().copied());
                for i in 0..k {
                    p[[obj, i]] = p[[obj, i]] / denom;
                }
            }
            p
        })
        .collect();

    let mut vs = VariationalState {
        eps_n: mu_n.clone(),
        mu_n,
        sigma_n2: Array2::ones((n, k)),
        delta_n2: Array2::ones((n, k)),
        phi,
        kappa: Array1::ones(n),
        xi: Array1::ones(n),
    };
    update_kappa(&mut vs);
    update_xi(&mut vs);

    let clusterings: Vec<usize> = (0..r2).collect();
    let grids = beta_count_accs(
        w,
        &vs,
        0..n,
        &clusterings,
        k,
        &shape.clusters_per_clustering,
    );
    let beta = grids
        .iter()
        .map(|g| mstep_beta_from_counts(g, cfg.beta_floor))
        .collect();

    let mu_accs = mu_sum_acc(&vs, 0..n, k);
    let params = ModelParams {
        mu: Array1::from_vec(mstep_mu_from_sums::<F>(&mu_accs, n)),
        sigma2: Array1::ones(k),
        delta2: F::one(),
        beta,
    };
    Ok((params, vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shape(n: usize, k: usize, r1: usize, km: Vec<usize>) -> ProblemShape {
        ProblemShape {
            n_objects: n,
            n_classes: k,
            n_classifiers: r1,
            n_clusterings: km.len(),
            clusters_per_clustering: km,
        }
    }

    #[test]
    fn smoothed_vote_frequencies() {
        let w = LabelObservations {
            class_labels: Array2::zeros((1, 2)), // both classifiers vote class 0
            cluster_labels: Array2::zeros((1, 0)),
        };
        let (_, vs) = initialize::<f64>(&w, &shape(1, 2, 2, vec![]), &FitConfig::default()).unwrap();
        assert_relative_eq!(vs.mu_n[[0, 0]], (3.0f64 / 4.0).ln(), max_relative = 1e-15);
        assert_relative_eq!(vs.mu_n[[0, 1]], (1.0f64 / 4.0).ln(), max_relative = 1e-15);
        assert_eq!(vs.eps_n, vs.mu_n);
    }

    #[test]
    fn identical_objects_get_identical_rows() {
        let w = LabelObservations {
            class_labels: Array2::from_shape_vec((3, 2), vec![1, 0, 1, 0, 1, 0]).unwrap(),
            cluster_labels: Array2::zeros((3, 0)),
        };
        let (_, vs) = initialize::<f64>(&w, &shape(3, 2, 2, vec![]), &FitConfig::default()).unwrap();
        for obj in 1..3 {
            for i in 0..2 {
                assert_eq!(vs.mu_n[[obj, i]], vs.mu_n[[0, i]]);
            }
        }
    }

    #[test]
    fn no_classifiers_fall_back_to_uniform() {
        let w = LabelObservations {
            class_labels: Array2::zeros((2, 0)),
            cluster_labels: Array2::zeros((2, 1)),
        };
        let (_, vs) = initialize::<f64>(&w, &shape(2, 3, 0, vec![2]), &FitConfig::default()).unwrap();
        assert!(vs.mu_n.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seed_changes_only_jitter_within_bound() {
        let w = LabelObservations {
            class_labels: Array2::from_shape_vec((4, 2), vec![0, 1, 1, 1, 0, 0, 1, 0]).unwrap(),
            cluster_labels: Array2::from_shape_vec((4, 2), vec![0, 1, 1, 0, 0, 0, 1, 1]).unwrap(),
        };
        let sh = shape(4, 2, 2, vec![2, 2]);
        let mut cfg_a = FitConfig::default();
        cfg_a.seed = 1;
        let mut cfg_b = FitConfig::default();
        cfg_b.seed = 2;
        let (pa, va) = initialize::<f64>(&w, &sh, &cfg_a).unwrap();
        let (_, vb) = initialize::<f64>(&w, &sh, &cfg_b).unwrap();
        assert_eq!(va.mu_n, vb.mu_n);
        assert_eq!(va.sigma_n2, vb.sigma_n2);
        let mut max_diff = 0.0f64;
        for m in 0..2 {
            for (a, b) in va.phi[m].iter().zip(vb.phi[m].iter()) {
                max_diff = max_diff.max((a - b).abs());
            }
        }
        assert!(max_diff > 0.0, "jitter must actually depend on the seed");
        assert!(max_diff <= 0.02, "jitter too large: {max_diff}");
        // beta rows on the simplex
        for b in &pa.beta {
            for row in b.rows() {
                let s: f64 = row.sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-9);
            }
        }
    }
}
