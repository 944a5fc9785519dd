//! The variational EM loop: per-object coordinate updates swept to
//! convergence (E-step), closed-form global parameter updates (M-step),
//! repeated until the bound stabilizes.

pub mod init;
pub mod objectives;
pub mod updates;

pub use init::initialize;

use crate::elbo::{elbo, elbo_object};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::types::{
    posterior_from_state, LabelObservations, ModelParams, PosteriorResult, ProblemShape,
    VariationalState,
};
use serde::{Deserialize, Serialize};
use updates::*;

/// Which assignment update to run: the coordinate maximizer of the bound
/// (log-emission scores) or the published linear-emission variant, kept for
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PhiUpdate {
    #[default]
    Elbo,
    Printed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub outer_max_iter: usize,
    /// Relative bound change below which the outer loop stops.
    pub outer_rel_tol: f64,
    pub estep_max_sweeps: usize,
    /// Relative per-object bound change below which an object stops sweeping.
    pub estep_rel_tol: f64,
    pub seed: u64,
    pub phi_floor: f64,
    pub beta_floor: f64,
    pub phi_update: PhiUpdate,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            outer_max_iter: 50,
            outer_rel_tol: 1e-6,
            estep_max_sweeps: 20,
            estep_rel_tol: 1e-7,
            seed: 0,
            phi_floor: 1e-12,
            beta_floor: 1e-12,
            phi_update: PhiUpdate::Elbo,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_rel_tol > 0.0) || !(self.estep_rel_tol > 0.0) {
            return Err(Error::invalid_argument("tolerances must be positive"));
        }
        for (name, f) in [("phi_floor", self.phi_floor), ("beta_floor", self.beta_floor)] {
            if !(f > 0.0 && f < 1e-3) {
                return Err(Error::invalid_argument(format!(
                    "{name} must lie in (0, 1e-3), got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// The eleven update kinds, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateKind {
    Kappa,
    Xi,
    Phi,
    MuN,
    SigmaN2,
    EpsN,
    DeltaN2,
    MStepMu,
    MStepDelta2,
    MStepBeta,
    MStepSigma2,
}

/// Callback fired after each update kind has been applied to every (active)
/// object; receives the state so it can evaluate the bound.
pub type Observer<'a, F> = dyn FnMut(UpdateKind, &ModelParams<F>, &VariationalState<F>) + 'a;

pub struct EStepReport<F: Real> {
    pub sweeps: usize,
    /// Per-object bound contributions at exit.
    pub per_object_elbo: Vec<F>,
}

/// Sweep the seven per-object updates in order until each object's bound
/// contribution stabilizes (objects converge independently) or the sweep
/// budget runs out. Objects are independent given the model parameters, so
/// the result does not depend on object order.
pub fn e_step<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    cfg: &FitConfig,
) -> Result<EStepReport<F>> {
    e_step_observed(w, params, vs, cfg, &mut |_, _, _| {})
}

pub fn e_step_observed<F: Real>(
    w: &LabelObservations,
    params: &ModelParams<F>,
    vs: &mut VariationalState<F>,
    cfg: &FitConfig,
    observer: &mut Observer<'_, F>,
) -> Result<EStepReport<F>> {
    let n = vs.mu_n.nrows();
    let r1 = w.class_labels.ncols();
    let r2 = vs.phi.len();
    let tol = lit::<F>(cfg.estep_rel_tol);

    let mut warm: Vec<[F; 4]> = vec![[F::one(); 4]; n];
    let mut prev: Vec<F> = (0..n).map(|obj| elbo_object(obj, w, params, vs)).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut sweeps = 0usize;

    while sweeps < cfg.estep_max_sweeps && active.iter().any(|&a| a) {
        sweeps += 1;
        for obj in 0..n {
            if active[obj] {
                update_kappa_object(vs, obj);
            }
        }
        observer(UpdateKind::Kappa, params, vs);
        for obj in 0..n {
            if active[obj] {
                update_xi_object(vs, obj);
            }
        }
        observer(UpdateKind::Xi, params, vs);
        if r2 > 0 {
            for m in 0..r2 {
                for obj in 0..n {
                    if active[obj] {
                        update_phi_object(w, params, vs, obj, m, cfg);
                    }
                }
            }
        }
        observer(UpdateKind::Phi, params, vs);
        for obj in 0..n {
            if active[obj] {
                ascend_mu_n(w, params, vs, obj, &mut warm[obj][0])?;
            }
        }
        observer(UpdateKind::MuN, params, vs);
        for obj in 0..n {
            if active[obj] {
                ascend_sigma_n2(params, vs, obj, r1, &mut warm[obj][1])?;
            }
        }
        observer(UpdateKind::SigmaN2, params, vs);
        for obj in 0..n {
            if active[obj] {
                ascend_epsilon_n(vs, params, obj, &mut warm[obj][2])?;
            }
        }
        observer(UpdateKind::EpsN, params, vs);
        for obj in 0..n {
            if active[obj] {
                ascend_delta_n2(vs, params, obj, &mut warm[obj][3])?;
            }
        }
        observer(UpdateKind::DeltaN2, params, vs);

        for obj in 0..n {
            if active[obj] {
                let cur = elbo_object(obj, w, params, vs);
                if (cur - prev[obj]).abs() <= tol * (F::one() + cur.abs()) {
                    active[obj] = false;
                }
                prev[obj] = cur;
            }
        }
    }
    Ok(EStepReport {
        sweeps,
        per_object_elbo: prev,
    })
}

#[derive(Debug, Clone)]
pub struct FitResult<F: Real> {
    pub params: ModelParams<F>,
    pub state: VariationalState<F>,
    pub posterior: PosteriorResult<F>,
    /// Bound value after each outer iteration.
    pub elbo_trace: Vec<F>,
}

/// Initialize from the label matrix and run the EM loop to convergence.
pub fn fit<F: Real>(
    w: &LabelObservations,
    shape: &ProblemShape,
    cfg: &FitConfig,
) -> Result<FitResult<F>> {
    fit_observed(w, shape, cfg, &mut |_, _, _| {})
}

pub fn fit_observed<F: Real>(
    w: &LabelObservations,
    shape: &ProblemShape,
    cfg: &FitConfig,
    observer: &mut Observer<'_, F>,
) -> Result<FitResult<F>> {
    let (params, vs) = initialize(w, shape, cfg)?;
    fit_from(w, shape, cfg, params, vs, observer)
}

/// Run the EM loop from an explicit starting point.
pub fn fit_from<F: Real>(
    w: &LabelObservations,
    shape: &ProblemShape,
    cfg: &FitConfig,
    mut params: ModelParams<F>,
    mut vs: VariationalState<F>,
    observer: &mut Observer<'_, F>,
) -> Result<FitResult<F>> {
    w.validate(shape)?;
    cfg.validate()?;
    params.validate(shape)?;
    vs.validate(shape)?;

    let mut trace: Vec<F> = Vec::new();
    let attach_trace = |err: Error, trace: &[F]| -> Error {
        match err {
            Error::NumericalFailure {
                message,
                last_feasible,
                ..
            } => Error::NumericalFailure {
                message,
                last_feasible,
                trace_so_far: trace.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            },
            other => other,
        }
    };

    let mut prev = elbo(w, &params, &vs)?;
    let mut iterations = 0usize;
    let r2 = vs.phi.len();
    for _ in 0..cfg.outer_max_iter {
        iterations += 1;
        e_step_observed(w, &params, &mut vs, cfg, observer)
            .map_err(|e| attach_trace(e, &trace))?;

        mstep_mu(&vs, &mut params);
        observer(UpdateKind::MStepMu, &params, &vs);
        mstep_delta2(&vs, &mut params);
        observer(UpdateKind::MStepDelta2, &params, &vs);
        if r2 > 0 {
            mstep_beta(w, &vs, &mut params, cfg.beta_floor);
        }
        observer(UpdateKind::MStepBeta, &params, &vs);
        mstep_sigma2(&vs, &mut params);
        observer(UpdateKind::MStepSigma2, &params, &vs);

        let cur = elbo(w, &params, &vs)?;
        trace.push(cur);
        let denom = cur.abs().max(F::min_positive_value());
        let done = (cur - prev).abs() / denom < lit::<F>(cfg.outer_rel_tol);
        prev = cur;
        if done {
            break;
        }
    }

    let mut posterior = posterior_from_state(&vs);
    posterior.final_elbo = prev;
    posterior.n_outer_iterations = iterations;
    Ok(FitResult {
        params,
        state: vs,
        posterior,
        elbo_trace: trace,
    })
}
