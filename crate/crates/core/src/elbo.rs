//! The evidence lower bound that every update ascends.
//!
//! The bound is E_q[log p(W, latents)] + H(q) with the two intractable
//! softmax log-normalizers replaced by their first-order surrogate
//! `log sum(exp v) <= sum E_q[exp v]/c + log c - 1`, one auxiliary scalar per
//! object and per normalizer (`kappa` for the class-score side, `xi` for the
//! cluster-score side). With that substitution every parameter update in the
//! fit loop is an exact coordinate maximizer or a monotone ascent step of
//! this one function.
//!
//! Reduction discipline: sums over class coordinates use `stable_sum`
//! (canonical order); sums over clusterings and over objects — the ones a
//! distributed partition can split — use `ExactAcc`, so ELBO values are
//! bit-identical no matter how the work is partitioned.

use crate::error::{Error, Result};
use crate::exact::{exact_sum, stable_sum, ExactAcc};
use crate::scalar::{lit, Real};
use crate::types::{LabelObservations, ModelParams, VariationalState};
use ndarray::Array2;
use smallvec::SmallVec;

const LN_2PI: f64 = 1.8378770664093453;

type Buf<F> = SmallVec<[F; 8]>;

/// Per-term totals, for diagnostics. `total` recomposes the terms and may
/// differ from [`elbo`] in the last bits (different reduction grouping).
#[derive(Debug, Clone)]
pub struct ElboBreakdown<F: Real> {
    /// E_q[log p(y | mu, sigma2)]
    pub y_prior: F,
    /// E_q[log p(theta | y, delta2)]
    pub theta_coupling: F,
    /// Surrogate-bounded E_q[log p(class labels | softmax(y))]
    pub classifier: F,
    /// Surrogate-bounded E_q[log p(assignments | softmax(theta))]
    pub cluster_assign: F,
    /// E_q[log p(cluster labels | beta, assignments)]
    pub cluster_emit: F,
    /// H(q)
    pub entropy: F,
}

impl<F: Real> ElboBreakdown<F> {
    pub fn total(&self) -> F {
        self.y_prior
            + self.theta_coupling
            + self.classifier
            + self.cluster_assign
            + self.cluster_emit
            + self.entropy
    }
}

/// `x * ln(y)` with the `x == 0` convention mapping to 0.
#[inline]
fn xlny<F: Real>(x: F, y: F) -> F {
    if x == F::zero() {
        F::zero()
    } else {
        x * y.ln()
    }
}

/// Per-object soft class mass `p[n][i] = sum_m phi[m][n][i]`, the statistic
/// the cluster-score mean update needs. Exact over clusterings (this sum is
/// split across sites in column/arbitrary distribution).
pub fn phi_class_mass<F: Real>(vs: &VariationalState<F>) -> Array2<F> {
    let (n, k) = vs.mu_n.dim();
    let mut mass = Array2::zeros((n, k));
    for obj in 0..n {
        for i in 0..k {
            mass[[obj, i]] = exact_sum(vs.phi.iter().map(|p| p[[obj, i]]));
        }
    }
    mass
}

/// Cluster-emission plus assignment-entropy contribution of one object, for
/// one clustering: `sum_i phi * ln(beta[., w2]) - sum_i phi * ln(phi)`.
pub fn zw2h_term<F: Real>(
    obj: usize,
    m: usize,
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
) -> F {
    let k = vs.mu_n.ncols();
    let j = w.cluster_labels[[obj, m]];
    let emit = stable_sum((0..k).map(|i| xlny(vs.phi[m][[obj, i]], params.beta[m][[i, j]])));
    let ent = stable_sum((0..k).map(|i| {
        let p = vs.phi[m][[obj, i]];
        -xlny(p, p)
    }));
    emit + ent
}

/// Sum of [`zw2h_term`] over all clusterings of one object (exact over m).
pub fn zw2h_object<F: Real>(
    obj: usize,
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
) -> F {
    exact_sum((0..vs.phi.len()).map(|m| zw2h_term(obj, m, w, params, vs)))
}

/// One object's bound contribution from aggregates: classifier vote counts
/// instead of raw labels, and caller-supplied cross-clustering pieces.
/// Distributed nodes feed in their exactly merged aggregates and reproduce
/// centralized values bit-for-bit.
#[allow(clippy::too_many_arguments)]
pub fn elbo_object_from_parts<F: Real>(
    obj: usize,
    votes: &[F],
    r1: usize,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
    class_mass_row: &[F],
    zw2h: F,
) -> F {
    let k = vs.mu_n.ncols();
    let r2 = vs.phi.len();
    let half = lit::<F>(0.5);
    let ln2pi = lit::<F>(LN_2PI);
    let one = F::one();

    let ln_delta2 = params.delta2.ln();
    let y_prior = -half
        * stable_sum((0..k).map(|i| {
            let d = vs.mu_n[[obj, i]] - params.mu[i];
            ln2pi + params.sigma2[i].ln() + (vs.sigma_n2[[obj, i]] + d * d) / params.sigma2[i]
        }));
    let theta_coupling = -half
        * stable_sum((0..k).map(|i| {
            let d = vs.eps_n[[obj, i]] - vs.mu_n[[obj, i]];
            ln2pi
                + ln_delta2
                + (vs.delta_n2[[obj, i]] + vs.sigma_n2[[obj, i]] + d * d) / params.delta2
        }));

    let classifier = if r1 > 0 {
        let linear = stable_sum((0..k).map(|i| votes[i] * vs.mu_n[[obj, i]]));
        let ln_kappa = vs.kappa[obj].ln();
        let ratio = stable_sum(
            (0..k).map(|i| (vs.mu_n[[obj, i]] + half * vs.sigma_n2[[obj, i]] - ln_kappa).exp()),
        );
        linear - lit::<F>(r1 as f64) * (ratio + ln_kappa - one)
    } else {
        F::zero()
    };

    let cluster_assign = if r2 > 0 {
        let linear = stable_sum((0..k).map(|i| class_mass_row[i] * vs.eps_n[[obj, i]]));
        let ln_xi = vs.xi[obj].ln();
        let ratio = stable_sum(
            (0..k).map(|i| (vs.eps_n[[obj, i]] + half * vs.delta_n2[[obj, i]] - ln_xi).exp()),
        );
        linear - lit::<F>(r2 as f64) * (ratio + ln_xi - one)
    } else {
        F::zero()
    };

    let entropy_gauss = half
        * stable_sum((0..k).map(|i| ln2pi + one + vs.sigma_n2[[obj, i]].ln()))
        + half * stable_sum((0..k).map(|i| ln2pi + one + vs.delta_n2[[obj, i]].ln()));

    y_prior + theta_coupling + classifier + cluster_assign + zw2h + entropy_gauss
}

/// One object's bound contribution, computing all aggregates in place.
pub fn elbo_object<F: Real>(
    obj: usize,
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
) -> F {
    let k = vs.mu_n.ncols();
    let r1 = w.class_labels.ncols();
    let mut votes: Buf<F> = SmallVec::from_elem(F::zero(), k);
    for l in 0..r1 {
        votes[w.class_labels[[obj, l]]] += F::one();
    }
    let mass: Buf<F> = (0..k)
        .map(|i| exact_sum(vs.phi.iter().map(|p| p[[obj, i]])))
        .collect();
    let zw2h = zw2h_object(obj, w, params, vs);
    elbo_object_from_parts(obj, &votes, r1, params, vs, &mass, zw2h)
}

/// The full bound (exact sum of per-object contributions).
pub fn elbo<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
) -> Result<F> {
    let n = vs.mu_n.nrows();
    if vs
        .sigma_n2
        .iter()
        .chain(vs.delta_n2.iter())
        .any(|v| !(*v > F::zero()))
        || params.sigma2.iter().any(|v| !(*v > F::zero()))
        || !(params.delta2 > F::zero())
    {
        return Err(Error::invalid_state("non-positive variance in ELBO input"));
    }
    Ok(elbo_unchecked(w, params, vs, n))
}

pub(crate) fn elbo_unchecked<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
    n: usize,
) -> F {
    let mut acc = ExactAcc::new();
    for obj in 0..n {
        acc.add(elbo_object(obj, w, params, vs).to_f64().unwrap_or(f64::NAN));
    }
    F::from_f64(acc.value()).expect("elbo representable")
}

/// Per-term totals across all objects, for diagnostics.
pub fn elbo_breakdown<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &VariationalState<F>,
) -> ElboBreakdown<F> {
    let (n, k) = vs.mu_n.dim();
    let r1 = w.class_labels.ncols();
    let r2 = vs.phi.len();
    let half = lit::<F>(0.5);
    let ln2pi = lit::<F>(LN_2PI);
    let one = F::one();
    let ln_delta2 = params.delta2.ln();

    let mut y_prior = ExactAcc::new();
    let mut theta_coupling = ExactAcc::new();
    let mut classifier = ExactAcc::new();
    let mut cluster_assign = ExactAcc::new();
    let mut cluster_emit = ExactAcc::new();
    let mut entropy = ExactAcc::new();
    let to = |x: F| x.to_f64().unwrap_or(f64::NAN);

    for obj in 0..n {
        y_prior.add(to(-half
            * stable_sum((0..k).map(|i| {
                let d = vs.mu_n[[obj, i]] - params.mu[i];
                ln2pi + params.sigma2[i].ln() + (vs.sigma_n2[[obj, i]] + d * d) / params.sigma2[i]
            }))));
        theta_coupling.add(to(-half
            * stable_sum((0..k).map(|i| {
                let d = vs.eps_n[[obj, i]] - vs.mu_n[[obj, i]];
                ln2pi
                    + ln_delta2
                    + (vs.delta_n2[[obj, i]] + vs.sigma_n2[[obj, i]] + d * d) / params.delta2
            }))));
        if r1 > 0 {
            let mut counts: Buf<F> = SmallVec::from_elem(F::zero(), k);
            for l in 0..r1 {
                counts[w.class_labels[[obj, l]]] += one;
            }
            let linear = stable_sum((0..k).map(|i| counts[i] * vs.mu_n[[obj, i]]));
            let ln_kappa = vs.kappa[obj].ln();
            let ratio = stable_sum(
                (0..k)
                    .map(|i| (vs.mu_n[[obj, i]] + half * vs.sigma_n2[[obj, i]] - ln_kappa).exp()),
            );
            classifier.add(to(linear - lit::<F>(r1 as f64) * (ratio + ln_kappa - one)));
        }
        if r2 > 0 {
            let mass: Buf<F> = (0..k)
                .map(|i| exact_sum(vs.phi.iter().map(|p| p[[obj, i]])))
                .collect();
            let linear = stable_sum((0..k).map(|i| mass[i] * vs.eps_n[[obj, i]]));
            let ln_xi = vs.xi[obj].ln();
            let ratio = stable_sum(
                (0..k).map(|i| (vs.eps_n[[obj, i]] + half * vs.delta_n2[[obj, i]] - ln_xi).exp()),
            );
            cluster_assign.add(to(linear - lit::<F>(r2 as f64) * (ratio + ln_xi - one)));
            for m in 0..r2 {
                let j = w.cluster_labels[[obj, m]];
                cluster_emit.add(to(stable_sum(
                    (0..k).map(|i| xlny(vs.phi[m][[obj, i]], params.beta[m][[i, j]])),
                )));
                entropy.add(to(stable_sum((0..k).map(|i| {
                    let p = vs.phi[m][[obj, i]];
                    -xlny(p, p)
                }))));
            }
        }
        entropy.add(to(half
            * stable_sum((0..k).map(|i| ln2pi + one + vs.sigma_n2[[obj, i]].ln()))
            + half * stable_sum((0..k).map(|i| ln2pi + one + vs.delta_n2[[obj, i]].ln()))));
    }

    let f = |acc: &ExactAcc| F::from_f64(acc.value()).expect("term representable");
    ElboBreakdown {
        y_prior: f(&y_prior),
        theta_coupling: f(&theta_coupling),
        classifier: f(&classifier),
        cluster_assign: f(&cluster_assign),
        cluster_emit: f(&cluster_emit),
        entropy: f(&entropy),
    }
}
