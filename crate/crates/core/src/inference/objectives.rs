//! Per-block objective functions for the gradient-ascended updates.
//!
//! Each builder captures copies of the quantities the block update holds
//! fixed and returns an [`ObjectiveSpec`] over the free block. Values fold
//! per-coordinate terms through `stable_sum`, so class relabelings permute
//! results bit-exactly.
//!
//! The `*_printed` variants reproduce alternative published forms of four
//! rows (a kappa/xi pairing swap, a dropped clustering multiplicity, and a
//! flipped entropy sign). They exist for comparison only: the fit loop
//! always uses the forms consistent with the bound in [`crate::elbo`],
//! which are the ones that make every update a coordinate ascent step.

use crate::exact::stable_sum;
use crate::numopt::ObjectiveSpec;
use crate::scalar::{lit, Real};
use std::sync::Arc;

struct MuInputs<F> {
    prior_mu: Vec<F>,
    prior_sigma2: Vec<F>,
    delta2: F,
    eps_row: Vec<F>,
    sigma_n2_row: Vec<F>,
    counts: Vec<F>,
    multiplier: F, // r1 / (taylor point)
    r1: usize,
}

fn mu_objective_from<F: Real>(inp: MuInputs<F>) -> ObjectiveSpec<'static, F> {
    let half = lit::<F>(0.5);
    let a = Arc::new(inp);
    let b = a.clone();
    ObjectiveSpec::unconstrained(
        a.prior_mu.len(),
        move |x: &[F]| {
            stable_sum((0..x.len()).map(|i| {
                let dp = x[i] - a.prior_mu[i];
                let de = x[i] - a.eps_row[i];
                let mut t = -half * dp * dp / a.prior_sigma2[i] - half * de * de / a.delta2
                    + a.counts[i] * x[i];
                if a.r1 > 0 {
                    t = t - a.multiplier * (x[i] + half * a.sigma_n2_row[i]).exp();
                }
                t
            }))
        },
        move |x: &[F]| {
            (0..x.len())
                .map(|i| {
                    let mut g = -(x[i] - b.prior_mu[i]) / b.prior_sigma2[i]
                        - (x[i] - b.eps_row[i]) / b.delta2
                        + b.counts[i];
                    if b.r1 > 0 {
                        g = g - b.multiplier * (x[i] + half * b.sigma_n2_row[i]).exp();
                    }
                    g
                })
                .collect()
        },
    )
}

/// Objective over one object's class-score mean block.
#[allow(clippy::too_many_arguments)]
pub fn mu_n_objective<F: Real>(
    prior_mu: Vec<F>,
    prior_sigma2: Vec<F>,
    delta2: F,
    eps_row: Vec<F>,
    sigma_n2_row: Vec<F>,
    counts: Vec<F>,
    r1: usize,
    kappa: F,
) -> ObjectiveSpec<'static, F> {
    mu_objective_from(MuInputs {
        prior_mu,
        prior_sigma2,
        delta2,
        eps_row,
        sigma_n2_row,
        counts,
        multiplier: lit::<F>(r1 as f64) / kappa,
        r1,
    })
}

/// Published form of the class-score mean row: divides the exponential term
/// by the cluster-side Taylor point.
#[allow(clippy::too_many_arguments)]
pub fn mu_n_objective_printed<F: Real>(
    prior_mu: Vec<F>,
    prior_sigma2: Vec<F>,
    delta2: F,
    eps_row: Vec<F>,
    sigma_n2_row: Vec<F>,
    counts: Vec<F>,
    r1: usize,
    xi: F,
) -> ObjectiveSpec<'static, F> {
    mu_objective_from(MuInputs {
        prior_mu,
        prior_sigma2,
        delta2,
        eps_row,
        sigma_n2_row,
        counts,
        multiplier: lit::<F>(r1 as f64) / xi,
        r1,
    })
}

struct SigmaNInputs<F> {
    prior_sigma2: Vec<F>,
    delta2: F,
    mu_row: Vec<F>,
    multiplier: F, // r1 / kappa
    r1: usize,
    entropy_sign: F,
}

fn sigma_n2_objective_from<F: Real>(inp: SigmaNInputs<F>) -> ObjectiveSpec<'static, F> {
    let half = lit::<F>(0.5);
    let a = Arc::new(inp);
    let b = a.clone();
    ObjectiveSpec::positive(
        a.prior_sigma2.len(),
        move |x: &[F]| {
            stable_sum((0..x.len()).map(|i| {
                let mut t = -half * x[i] / a.prior_sigma2[i]
                    + a.entropy_sign * half * x[i].ln()
                    - half * x[i] / a.delta2;
                if a.r1 > 0 {
                    t = t - a.multiplier * (a.mu_row[i] + half * x[i]).exp();
                }
                t
            }))
        },
        move |x: &[F]| {
            (0..x.len())
                .map(|i| {
                    let mut g = -half / b.prior_sigma2[i] + b.entropy_sign * half / x[i]
                        - half / b.delta2;
                    if b.r1 > 0 {
                        g = g - half * b.multiplier * (b.mu_row[i] + half * x[i]).exp();
                    }
                    g
                })
                .collect()
        },
    )
}

/// Objective over one object's class-score variance block (positive).
pub fn sigma_n2_objective<F: Real>(
    prior_sigma2: Vec<F>,
    delta2: F,
    mu_row: Vec<F>,
    r1: usize,
    kappa: F,
) -> ObjectiveSpec<'static, F> {
    sigma_n2_objective_from(SigmaNInputs {
        prior_sigma2,
        delta2,
        mu_row,
        multiplier: lit::<F>(r1 as f64) / kappa,
        r1,
        entropy_sign: F::one(),
    })
}

/// Published form: the log-variance term enters with a negative sign.
pub fn sigma_n2_objective_printed<F: Real>(
    prior_sigma2: Vec<F>,
    delta2: F,
    mu_row: Vec<F>,
    r1: usize,
    kappa: F,
) -> ObjectiveSpec<'static, F> {
    sigma_n2_objective_from(SigmaNInputs {
        prior_sigma2,
        delta2,
        mu_row,
        multiplier: lit::<F>(r1 as f64) / kappa,
        r1,
        entropy_sign: -F::one(),
    })
}

struct EpsInputs<F> {
    class_mass: Vec<F>,
    delta_n2_row: Vec<F>,
    mu_row: Vec<F>,
    delta2: F,
    multiplier: F,
    r2: usize,
}

fn epsilon_objective_from<F: Real>(inp: EpsInputs<F>) -> ObjectiveSpec<'static, F> {
    let half = lit::<F>(0.5);
    let a = Arc::new(inp);
    let b = a.clone();
    ObjectiveSpec::unconstrained(
        a.class_mass.len(),
        move |x: &[F]| {
            stable_sum((0..x.len()).map(|i| {
                let d = x[i] - a.mu_row[i];
                let mut t = a.class_mass[i] * x[i] - half * d * d / a.delta2;
                if a.r2 > 0 {
                    t = t - a.multiplier * (x[i] + half * a.delta_n2_row[i]).exp();
                }
                t
            }))
        },
        move |x: &[F]| {
            (0..x.len())
                .map(|i| {
                    let mut g = b.class_mass[i] - (x[i] - b.mu_row[i]) / b.delta2;
                    if b.r2 > 0 {
                        g = g - b.multiplier * (x[i] + half * b.delta_n2_row[i]).exp();
                    }
                    g
                })
                .collect()
        },
    )
}

/// Objective over one object's cluster-score mean block. `class_mass` is the
/// per-class sum of assignment probabilities across clusterings.
pub fn epsilon_n_objective<F: Real>(
    class_mass: Vec<F>,
    delta_n2_row: Vec<F>,
    mu_row: Vec<F>,
    delta2: F,
    r2: usize,
    xi: F,
) -> ObjectiveSpec<'static, F> {
    epsilon_objective_from(EpsInputs {
        class_mass,
        delta_n2_row,
        mu_row,
        delta2,
        multiplier: lit::<F>(r2 as f64) / xi,
        r2,
    })
}

/// Published form: unit multiplier on the exponential term instead of the
/// clustering count.
pub fn epsilon_n_objective_printed<F: Real>(
    class_mass: Vec<F>,
    delta_n2_row: Vec<F>,
    mu_row: Vec<F>,
    delta2: F,
    r2: usize,
    xi: F,
) -> ObjectiveSpec<'static, F> {
    epsilon_objective_from(EpsInputs {
        class_mass,
        delta_n2_row,
        mu_row,
        delta2,
        multiplier: F::one() / xi,
        r2,
    })
}

struct DeltaNInputs<F> {
    delta2: F,
    eps_row: Vec<F>,
    multiplier: F,
    r2: usize,
    entropy_sign: F,
}

fn delta_n2_objective_from<F: Real>(inp: DeltaNInputs<F>) -> ObjectiveSpec<'static, F> {
    let half = lit::<F>(0.5);
    let a = Arc::new(inp);
    let b = a.clone();
    ObjectiveSpec::positive(
        a.eps_row.len(),
        move |x: &[F]| {
            stable_sum((0..x.len()).map(|i| {
                let mut t = -half * x[i] / a.delta2 + a.entropy_sign * half * x[i].ln();
                if a.r2 > 0 {
                    t = t - a.multiplier * (a.eps_row[i] + half * x[i]).exp();
                }
                t
            }))
        },
        move |x: &[F]| {
            (0..x.len())
                .map(|i| {
                    let mut g = -half / b.delta2 + b.entropy_sign * half / x[i];
                    if b.r2 > 0 {
                        g = g - half * b.multiplier * (b.eps_row[i] + half * x[i]).exp();
                    }
                    g
                })
                .collect()
        },
    )
}

/// Objective over one object's cluster-score variance block (positive).
pub fn delta_n2_objective<F: Real>(
    delta2: F,
    eps_row: Vec<F>,
    r2: usize,
    xi: F,
) -> ObjectiveSpec<'static, F> {
    delta_n2_objective_from(DeltaNInputs {
        delta2,
        eps_row,
        multiplier: lit::<F>(r2 as f64) / xi,
        r2,
        entropy_sign: F::one(),
    })
}

/// Published form: negative sign on the log-variance term.
pub fn delta_n2_objective_printed<F: Real>(
    delta2: F,
    eps_row: Vec<F>,
    r2: usize,
    xi: F,
) -> ObjectiveSpec<'static, F> {
    delta_n2_objective_from(DeltaNInputs {
        delta2,
        eps_row,
        multiplier: lit::<F>(r2 as f64) / xi,
        r2,
        entropy_sign: -F::one(),
    })
}

/// Objective over the global prior variance diagonal. `stat[i]` is the
/// precomputed `sum_n (sigma_n2[n,i] + (mu_n[n,i] - mu[i])^2)`.
pub fn sigma2_objective<F: Real>(stat: Vec<F>, n_objects: usize) -> ObjectiveSpec<'static, F> {
    let half = lit::<F>(0.5);
    let nf = lit::<F>(n_objects as f64);
    let a = Arc::new(stat);
    let b = a.clone();
    ObjectiveSpec::positive(
        a.len(),
        move |x: &[F]| {
            stable_sum((0..x.len()).map(|i| -half * nf * x[i].ln() - half * a[i] / x[i]))
        },
        move |x: &[F]| {
            (0..x.len())
                .map(|i| -half * nf / x[i] + half * b[i] / (x[i] * x[i]))
                .collect()
        },
    )
}
