//! The eleven parameter updates: closed forms where they exist, gradient
//! ascent on the block objectives otherwise.
//!
//! Every function here either exactly maximizes the bound over its block or
//! monotonically improves it, so the full bound is non-decreasing across any
//! sequence of these updates.
//!
//! M-step reductions over objects are computed through `ExactAcc` and split
//! into `*_from_*` halves: centralized callers feed one accumulator with all
//! objects, distributed servers merge per-site accumulators — both paths
//! produce identical bits.

use super::objectives;
use super::{FitConfig, PhiUpdate};
use crate::error::Result;
use crate::exact::{exact_sum, stable_sum, ExactAcc};
use crate::math::{softmax_into, sum_exp_half_var};
use crate::numopt::maximize_warm;
use crate::scalar::{lit, Real};
use crate::types::{LabelObservations, ModelParams, VariationalState};
use ndarray::Array2;
use smallvec::SmallVec;

pub const VARIANCE_FLOOR: f64 = 1e-10;
/// Ascent settings for the per-block maximizations.
pub const ASCENT_REL_TOL: f64 = 1e-8;
pub const ASCENT_MAX_ITER: usize = 100;

type Buf<F> = SmallVec<[F; 8]>;

/// kappa_n = sum_i exp(mu_n[i] + sigma_n2[i]/2), via shifted log space.
pub fn update_kappa_object<F: Real>(vs: &mut VariationalState<F>, obj: usize) {
    let k = vs.mu_n.ncols();
    let means: Buf<F> = (0..k).map(|i| vs.mu_n[[obj, i]]).collect();
    let vars: Buf<F> = (0..k).map(|i| vs.sigma_n2[[obj, i]]).collect();
    vs.kappa[obj] = sum_exp_half_var(&means, &vars);
}

/// xi_n = sum_i exp(eps_n[i] + delta_n2[i]/2).
pub fn update_xi_object<F: Real>(vs: &mut VariationalState<F>, obj: usize) {
    let k = vs.mu_n.ncols();
    let means: Buf<F> = (0..k).map(|i| vs.eps_n[[obj, i]]).collect();
    let vars: Buf<F> = (0..k).map(|i| vs.delta_n2[[obj, i]]).collect();
    vs.xi[obj] = sum_exp_half_var(&means, &vars);
}

pub fn update_kappa<F: Real>(vs: &mut VariationalState<F>) {
    for obj in 0..vs.mu_n.nrows() {
        update_kappa_object(vs, obj);
    }
}

pub fn update_xi<F: Real>(vs: &mut VariationalState<F>) {
    for obj in 0..vs.mu_n.nrows() {
        update_xi_object(vs, obj);
    }
}

/// Assignment update for one (object, clustering) pair. The exact coordinate
/// maximizer uses log-emission scores; the printed variant uses the raw
/// emission probability in the exponent.
pub fn update_phi_object<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    obj: usize,
    m: usize,
    cfg: &FitConfig,
) {
    let k = vs.mu_n.ncols();
    let j = w.cluster_labels[[obj, m]];
    let scores: Buf<F> = (0..k)
        .map(|i| {
            let b = params.beta[m][[i, j]];
            match cfg.phi_update {
                PhiUpdate::Elbo => vs.eps_n[[obj, i]] + b.ln(),
                PhiUpdate::Printed => vs.eps_n[[obj, i]] + b,
            }
        })
        .collect();
    let mut probs: Buf<F> = SmallVec::from_elem(F::zero(), k);
    softmax_into(scores.iter().copied(), &mut probs);
    let floor = lit::<F>(cfg.phi_floor);
    for p in probs.iter_mut() {
        if *p < floor {
            *p = floor;
        }
    }
    let denom = stable_sum(probs.iter().copied());
    for (i, p) in probs.iter().enumerate() {
        vs.phi[m][[obj, i]] = *p / denom;
    }
}

pub fn update_phi<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    cfg: &FitConfig,
) {
    for m in 0..vs.phi.len() {
        for obj in 0..vs.mu_n.nrows() {
            update_phi_object(w, params, vs, obj, m, cfg);
        }
    }
}

/// Class vote counts of one object as scalars.
pub fn vote_row<F: Real>(w: &LabelObservations, obj: usize, k: usize) -> Vec<F> {
    let mut counts = vec![F::zero(); k];
    for l in 0..w.class_labels.ncols() {
        counts[w.class_labels[[obj, l]]] += F::one();
    }
    counts
}

/// Ascend the class-score mean block of one object from aggregate votes.
pub fn ascend_mu_with_votes<F: Real>(
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    obj: usize,
    votes: Vec<F>,
    r1: usize,
    warm_step: &mut F,
) -> Result<()> {
    let obj_spec = objectives::mu_n_objective(
        params.mu.to_vec(),
        params.sigma2.to_vec(),
        params.delta2,
        vs.eps_n.row(obj).to_vec(),
        vs.sigma_n2.row(obj).to_vec(),
        votes,
        r1,
        vs.kappa[obj],
    );
    let x0 = vs.mu_n.row(obj).to_vec();
    let report = maximize_warm(
        &obj_spec,
        &x0,
        lit::<F>(ASCENT_REL_TOL),
        ASCENT_MAX_ITER,
        warm_step,
    )?;
    for (i, v) in report.argmax.into_iter().enumerate() {
        vs.mu_n[[obj, i]] = v;
    }
    Ok(())
}

/// Ascend the class-score mean block of one object.
pub fn ascend_mu_n<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    obj: usize,
    warm_step: &mut F,
) -> Result<()> {
    let k = vs.mu_n.ncols();
    ascend_mu_with_votes(
        params,
        vs,
        obj,
        vote_row(w, obj, k),
        w.class_labels.ncols(),
        warm_step,
    )
}

/// Ascend the class-score variance block of one object.
pub fn ascend_sigma_n2<F: Real>(
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    obj: usize,
    r1: usize,
    warm_step: &mut F,
) -> Result<()> {
    let obj_spec = objectives::sigma_n2_objective(
        params.sigma2.to_vec(),
        params.delta2,
        vs.mu_n.row(obj).to_vec(),
        r1,
        vs.kappa[obj],
    );
    let x0 = vs.sigma_n2.row(obj).to_vec();
    let report = maximize_warm(
        &obj_spec,
        &x0,
        lit::<F>(ASCENT_REL_TOL),
        ASCENT_MAX_ITER,
        warm_step,
    )?;
    for (i, v) in report.argmax.into_iter().enumerate() {
        vs.sigma_n2[[obj, i]] = v;
    }
    Ok(())
}

/// Ascend the cluster-score mean block with a caller-supplied class mass row
/// (the per-class assignment totals across clusterings).
pub fn ascend_epsilon_with_mass<F: Real>(
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    obj: usize,
    class_mass: Vec<F>,
    warm_step: &mut F,
) -> Result<()> {
    let obj_spec = objectives::epsilon_n_objective(
        class_mass,
        vs.delta_n2.row(obj).to_vec(),
        vs.mu_n.row(obj).to_vec(),
        params.delta2,
        vs.phi.len(),
        vs.xi[obj],
    );
    let x0 = vs.eps_n.row(obj).to_vec();
    let report = maximize_warm(
        &obj_spec,
        &x0,
        lit::<F>(ASCENT_REL_TOL),
        ASCENT_MAX_ITER,
        warm_step,
    )?;
    for (i, v) in report.argmax.into_iter().enumerate() {
        vs.eps_n[[obj, i]] = v;
    }
    Ok(())
}

/// Ascend the cluster-score mean block of one object.
pub fn ascend_epsilon_n<F: Real>(
    vs: &mut VariationalState<F>,
    params: &ModelParams<F>,
    obj: usize,
    warm_step: &mut F,
) -> Result<()> {
    let k = vs.mu_n.ncols();
    let mass: Vec<F> = (0..k)
        .map(|i| exact_sum(vs.phi.iter().map(|p| p[[obj, i]])))
        .collect();
    ascend_epsilon_with_mass(params, vs, obj, mass, warm_step)
}

/// Ascend the cluster-score variance block of one object.
pub fn ascend_delta_n2<F: Real>(
    vs: &mut VariationalState<F>,
    params: &ModelParams<F>,
    obj: usize,
    warm_step: &mut F,
) -> Result<()> {
    let obj_spec = objectives::delta_n2_objective(
        params.delta2,
        vs.eps_n.row(obj).to_vec(),
        vs.phi.len(),
        vs.xi[obj],
    );
    let x0 = vs.delta_n2.row(obj).to_vec();
    let report = maximize_warm(
        &obj_spec,
        &x0,
        lit::<F>(ASCENT_REL_TOL),
        ASCENT_MAX_ITER,
        warm_step,
    )?;
    for (i, v) in report.argmax.into_iter().enumerate() {
        vs.delta_n2[[obj, i]] = v;
    }
    Ok(())
}

// ---- M-step: per-site statistics and the closed-form finishers ----

/// Per-class accumulators of `mu_n` rows over a set of objects.
pub fn mu_sum_acc<F: Real>(vs: &VariationalState<F>, objects: impl Iterator<Item = usize>, k: usize) -> Vec<ExactAcc> {
    let mut accs: Vec<ExactAcc> = (0..k).map(|_| ExactAcc::new()).collect();
    for obj in objects {
        for i in 0..k {
            accs[i].add(vs.mu_n[[obj, i]].to_f64().unwrap());
        }
    }
    accs
}

pub fn mstep_mu_from_sums<F: Real>(accs: &[ExactAcc], n_objects: usize) -> Vec<F> {
    let nf = lit::<F>(n_objects as f64);
    accs.iter()
        .map(|a| F::from_f64(a.value()).unwrap() / nf)
        .collect()
}

/// mu = mean of the per-object class-score means.
pub fn mstep_mu<F: Real>(vs: &VariationalState<F>, params: &mut ModelParams<F>) {
    let (n, k) = vs.mu_n.dim();
    let accs = mu_sum_acc(vs, 0..n, k);
    for (i, v) in mstep_mu_from_sums::<F>(&accs, n).into_iter().enumerate() {
        params.mu[i] = v;
    }
}

/// Accumulator of the coupling-variance statistic over a set of objects:
/// per object, `sum_i [(eps - mu_n)^2 + sigma_n2 + delta_n2]`.
pub fn delta2_sum_acc<F: Real>(vs: &VariationalState<F>, objects: impl Iterator<Item = usize>) -> ExactAcc {
    let k = vs.mu_n.ncols();
    let mut acc = ExactAcc::new();
    for obj in objects {
        let t = stable_sum((0..k).map(|i| {
            let d = vs.eps_n[[obj, i]] - vs.mu_n[[obj, i]];
            d * d + vs.sigma_n2[[obj, i]] + vs.delta_n2[[obj, i]]
        }));
        acc.add(t.to_f64().unwrap());
    }
    acc
}

pub fn mstep_delta2_from_sum<F: Real>(acc: &ExactAcc, n_objects: usize, k: usize) -> F {
    let total = F::from_f64(acc.value()).unwrap();
    let val = total / lit::<F>((n_objects * k) as f64);
    val.max(lit::<F>(VARIANCE_FLOOR))
}

/// delta2 = mean over objects and classes of the coupling statistic.
pub fn mstep_delta2<F: Real>(vs: &VariationalState<F>, params: &mut ModelParams<F>) {
    let (n, k) = vs.mu_n.dim();
    let acc = delta2_sum_acc(vs, 0..n);
    params.delta2 = mstep_delta2_from_sum(&acc, n, k);
}

/// Per-clustering emission-count accumulators over a set of objects:
/// `counts[m][i][j] = sum_n phi[m][n][i] * [w2[n][m] == j]`.
pub fn beta_count_accs<F: Real>(
    w: &LabelObservations,
    vs: &VariationalState<F>,
    objects: impl Iterator<Item = usize> + Clone,
    clusterings: &[usize],
    k: usize,
    k_m: &[usize],
) -> Vec<Vec<Vec<ExactAcc>>> {
    clusterings
        .iter()
        .map(|&m| {
            let mut grid: Vec<Vec<ExactAcc>> = (0..k)
                .map(|_| (0..k_m[m]).map(|_| ExactAcc::new()).collect())
                .collect();
            for obj in objects.clone() {
                let j = w.cluster_labels[[obj, m]];
                for (i, row) in grid.iter_mut().enumerate() {
                    row[j].add(vs.phi[m][[obj, i]].to_f64().unwrap());
                }
            }
            grid
        })
        .collect()
}

/// Normalize floored emission counts into a row-stochastic matrix.
pub fn mstep_beta_from_counts<F: Real>(grid: &[Vec<ExactAcc>], beta_floor: f64) -> Array2<F> {
    let k = grid.len();
    let km = grid[0].len();
    let floor = lit::<F>(beta_floor);
    let mut out = Array2::zeros((k, km));
    for i in 0..k {
        let row: Vec<F> = (0..km)
            .map(|j| F::from_f64(grid[i][j].value()).unwrap() + floor)
            .collect();
        let denom = stable_sum(row.iter().copied());
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v / denom;
        }
    }
    out
}

/// beta row update from the current assignments.
pub fn mstep_beta<F: Real>(
    w: &LabelObservations,
    vs: &VariationalState<F>,
    params: &mut ModelParams<F>,
    beta_floor: f64,
) {
    let (n, k) = vs.mu_n.dim();
    let k_m: Vec<usize> = params.beta.iter().map(|b| b.ncols()).collect();
    let clusterings: Vec<usize> = (0..vs.phi.len()).collect();
    let grids = beta_count_accs(w, vs, 0..n, &clusterings, k, &k_m);
    for (m, grid) in clusterings.into_iter().zip(&grids) {
        params.beta[m] = mstep_beta_from_counts(grid, beta_floor);
    }
}

/// Per-class accumulators of the prior-variance statistic over objects:
/// `sum_n (sigma_n2[n,i] + (mu_n[n,i] - mu[i])^2)`.
pub fn sigma2_stat_accs<F: Real>(
    vs: &VariationalState<F>,
    mu: &[F],
    objects: impl Iterator<Item = usize>,
    k: usize,
) -> Vec<ExactAcc> {
    let mut accs: Vec<ExactAcc> = (0..k).map(|_| ExactAcc::new()).collect();
    for obj in objects {
        for i in 0..k {
            let d = vs.mu_n[[obj, i]] - mu[i];
            accs[i].add((vs.sigma_n2[[obj, i]] + d * d).to_f64().unwrap());
        }
    }
    accs
}

pub fn mstep_sigma2_from_stats<F: Real>(accs: &[ExactAcc], n_objects: usize) -> Vec<F> {
    let nf = lit::<F>(n_objects as f64);
    let floor = lit::<F>(VARIANCE_FLOOR);
    accs.iter()
        .map(|a| (F::from_f64(a.value()).unwrap() / nf).max(floor))
        .collect()
}

/// Closed-form stationary point of the prior-variance objective. In debug
/// builds the result is verified to be a maximizer by restarting the ascent
/// there and asserting no further improvement.
pub fn mstep_sigma2<F: Real>(vs: &VariationalState<F>, params: &mut ModelParams<F>) {
    let (n, k) = vs.mu_n.dim();
    let mu: Vec<F> = params.mu.to_vec();
    let accs = sigma2_stat_accs(vs, &mu, 0..n, k);
    let new = mstep_sigma2_from_stats::<F>(&accs, n);

    #[cfg(debug_assertions)]
    {
        let stat: Vec<F> = accs.iter().map(|a| F::from_f64(a.value()).unwrap()).collect();
        let obj = objectives::sigma2_objective(stat, n);
        let f0 = (obj.eval)(&new);
        if f0.is_finite() {
            let r = maximize_warm(&obj, &new, lit::<F>(1e-10), 50, &mut F::one())
                .expect("verification ascent");
            debug_assert!(
                r.value - f0 <= lit::<F>(1e-9) * (F::one() + f0.abs()),
                "closed-form prior variance is not a maximizer: {f0} -> {}",
                r.value
            );
        }
    }

    for (i, v) in new.into_iter().enumerate() {
        params.sigma2[i] = v;
    }
}
