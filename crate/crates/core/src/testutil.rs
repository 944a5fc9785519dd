//! Small instance builders shared by the test suites.
#![doc(hidden)]

use crate::math::sum_exp_half_var;
use crate::types::{LabelObservations, ModelParams, VariationalState};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random valid (observations, params, variational state) triple with the
/// Taylor scalars set by their closed forms.
pub fn random_instance(
    n: usize,
    k: usize,
    r1: usize,
    km: Vec<usize>,
    seed: u64,
) -> (LabelObservations, ModelParams<f64>, VariationalState<f64>) {
    let r2 = km.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mat = |rows: usize, cols: usize, lo: f64, hi: f64| {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
    };
    let mu_n = mat(n, k, -1.0, 1.0);
    let sigma_n2 = mat(n, k, 0.2, 1.5);
    let eps_n = mat(n, k, -1.0, 1.0);
    let delta_n2 = mat(n, k, 0.2, 1.5);
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let phi: Vec<Array2<f64>> = (0..r2)
        .map(|_| {
            let mut p = Array2::from_shape_fn((n, k), |_| rng2.gen_range(0.05..1.0));
            for mut row in p.rows_mut() {
                let s: f64 = row.iter().sum();
                row.mapv_inplace(|x| x / s);
            }
            p
        })
        .collect();
    let beta: Vec<Array2<f64>> = km
        .iter()
        .map(|&c| {
            let mut b = Array2::from_shape_fn((k, c), |_| rng2.gen_range(0.05..1.0));
            for mut row in b.rows_mut() {
                let s: f64 = row.iter().sum();
                row.mapv_inplace(|x| x / s);
            }
            b
        })
        .collect();
    let kappa = Array1::from_shape_fn(n, |obj| {
        sum_exp_half_var(&mu_n.row(obj).to_vec(), &sigma_n2.row(obj).to_vec())
    });
    let xi = Array1::from_shape_fn(n, |obj| {
        sum_exp_half_var(&eps_n.row(obj).to_vec(), &delta_n2.row(obj).to_vec())
    });
    let w = LabelObservations {
        class_labels: Array2::from_shape_fn((n, r1), |_| rng2.gen_range(0..k)),
        cluster_labels: Array2::from_shape_fn((n, r2), |(_, m)| rng2.gen_range(0..km[m])),
    };
    let params = ModelParams {
        mu: Array1::from_shape_fn(k, |_| rng2.gen_range(-0.5..0.5)),
        sigma2: Array1::from_shape_fn(k, |_| rng2.gen_range(0.5..1.5)),
        delta2: rng2.gen_range(0.4..1.2),
        beta,
    };
    let vs = VariationalState {
        mu_n,
        sigma_n2,
        eps_n,
        delta_n2,
        phi,
        kappa,
        xi,
    };
    (w, params, vs)
}

/// Deterministic sampler parameters with near-diagonal emissions: classes
/// separate cleanly, classifiers are informative but imperfect, clusterings
/// carry real signal. Used by the recovery and distributed batteries.
pub fn generative_params(
    k: usize,
    km: &[usize],
    class_spread: f64,
    delta2: f64,
    emission_purity: f64,
) -> ModelParams<f64> {
    let beta = km
        .iter()
        .map(|&c| {
            let mut b = Array2::zeros((k, c));
            for i in 0..k {
                for j in 0..c {
                    b[[i, j]] = if j == i % c {
                        emission_purity
                    } else {
                        (1.0 - emission_purity) / (c - 1).max(1) as f64
                    };
                }
                if c == 1 {
                    b[[i, 0]] = 1.0;
                }
            }
            b
        })
        .collect();
    ModelParams {
        mu: Array1::zeros(k),
        sigma2: Array1::from_elem(k, class_spread),
        delta2,
        beta,
    }
}
