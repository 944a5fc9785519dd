//! Monotone maximization of smooth objectives with optional positivity
//! constraints, plus a finite-difference gradient checker.
//!
//! Plain gradient ascent with Armijo backtracking. Positivity-constrained
//! coordinates are reparametrized as `x = exp(u)` and optimized in log
//! space, so feasibility holds by construction. The objectives this engine
//! sees are low-dimensional (one block per object) and are called millions
//! of times, which is why the method stays deliberately simple.

use crate::error::{Error, Result};
use crate::exact::stable_sum;
use crate::scalar::{lit, Real};

/// A maximization target: value, gradient, and per-coordinate positivity.
pub struct ObjectiveSpec<'a, F: Real> {
    pub dim: usize,
    pub eval: Box<dyn Fn(&[F]) -> F + 'a>,
    pub grad: Box<dyn Fn(&[F]) -> Vec<F> + 'a>,
    /// `true` marks a coordinate that must stay strictly positive.
    pub positivity_mask: Vec<bool>,
}

impl<'a, F: Real> ObjectiveSpec<'a, F> {
    pub fn unconstrained(
        dim: usize,
        eval: impl Fn(&[F]) -> F + 'a,
        grad: impl Fn(&[F]) -> Vec<F> + 'a,
    ) -> Self {
        ObjectiveSpec {
            dim,
            eval: Box::new(eval),
            grad: Box::new(grad),
            positivity_mask: vec![false; dim],
        }
    }

    pub fn positive(
        dim: usize,
        eval: impl Fn(&[F]) -> F + 'a,
        grad: impl Fn(&[F]) -> Vec<F> + 'a,
    ) -> Self {
        ObjectiveSpec {
            dim,
            eval: Box::new(eval),
            grad: Box::new(grad),
            positivity_mask: vec![true; dim],
        }
    }
}

/// Outcome of one ascent run.
#[derive(Debug, Clone)]
pub struct AscentReport<F: Real> {
    pub argmax: Vec<F>,
    pub value: F,
    pub n_iterations: usize,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Gradient ascent with backtracking until the relative objective change
/// drops below `rel_tol` or `max_iter` iterations. The accepted iterate
/// sequence is non-decreasing in objective value.
pub fn maximize<F: Real>(
    obj: &ObjectiveSpec<'_, F>,
    x0: &[F],
    rel_tol: F,
    max_iter: usize,
) -> Result<AscentReport<F>> {
    let mut warm = F::one();
    maximize_warm(obj, x0, rel_tol, max_iter, &mut warm)
}

/// Like [`maximize`], reusing a caller-held initial step size. The final
/// accepted step is written back so successive sweeps over the same block
/// skip most backtracking.
pub fn maximize_warm<F: Real>(
    obj: &ObjectiveSpec<'_, F>,
    x0: &[F],
    rel_tol: F,
    max_iter: usize,
    warm_step: &mut F,
) -> Result<AscentReport<F>> {
    let d = obj.dim;
    if x0.len() != d || obj.positivity_mask.len() != d {
        return Err(Error::invalid_argument("dimension mismatch in maximize"));
    }
    if !(rel_tol > F::zero()) {
        return Err(Error::invalid_argument("rel_tol must be positive"));
    }
    for (i, &x) in x0.iter().enumerate() {
        if obj.positivity_mask[i] && !(x > F::zero()) {
            return Err(Error::invalid_argument(format!(
                "infeasible start: coordinate {i} must be > 0"
            )));
        }
        if !x.is_finite() {
            return Err(Error::invalid_argument("non-finite start point"));
        }
    }

    // Work in z space: z_i = ln(x_i) for positive coordinates.
    let to_z = |x: &[F]| -> Vec<F> {
        x.iter()
            .zip(&obj.positivity_mask)
            .map(|(&v, &m)| if m { v.ln() } else { v })
            .collect()
    };
    let to_x = |z: &[F]| -> Vec<F> {
        z.iter()
            .zip(&obj.positivity_mask)
            .map(|(&v, &m)| if m { v.exp() } else { v })
            .collect()
    };

    let mut z = to_z(x0);
    let mut x = to_x(&z);
    let mut f_cur = (obj.eval)(&x);
    if !f_cur.is_finite() {
        return Err(Error::NumericalFailure {
            message: "objective non-finite at start point".into(),
            last_feasible: x0.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            trace_so_far: vec![],
        });
    }

    let armijo = lit::<F>(ARMIJO_C);
    let min_step = lit::<F>(MIN_STEP);
    let half = lit::<F>(0.5);
    let two = lit::<F>(2.0);
    let max_step = lit::<F>(1e8);
    let mut iterations = 0usize;
    let mut converged = false;
    // A single small accepted step can be a backtracking artifact rather
    // than convergence; require two in a row.
    let mut small_changes = 0u32;

    for _ in 0..max_iter {
        let gx = (obj.grad)(&x);
        if gx.len() != d {
            return Err(Error::invalid_argument("gradient has wrong dimension"));
        }
        if gx.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure {
                message: "non-finite gradient".into(),
                last_feasible: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                trace_so_far: vec![],
            });
        }
        // Chain rule for the log reparametrization.
        let gz: Vec<F> = gx
            .iter()
            .zip(x.iter().zip(&obj.positivity_mask))
            .map(|(&g, (&xi, &m))| if m { g * xi } else { g })
            .collect();
        let gnorm2 = stable_sum(gz.iter().map(|&g| g * g));
        if gnorm2 == F::zero() {
            converged = true;
            break;
        }

        let mut t = *warm_step;
        let mut accepted = false;
        while t >= min_step {
            let z_trial: Vec<F> = z.iter().zip(&gz).map(|(&zi, &gi)| zi + t * gi).collect();
            let x_trial = to_x(&z_trial);
            let f_trial = (obj.eval)(&x_trial);
            if f_trial.is_finite() && f_trial >= f_cur + armijo * t * gnorm2 {
                z = z_trial;
                x = x_trial;
                let prev = f_cur;
                f_cur = f_trial;
                iterations += 1;
                // Allow the step to regrow between iterations.
                *warm_step = (t * two).min(max_step);
                accepted = true;
                let change = (f_cur - prev).abs();
                if change <= rel_tol * (F::one() + f_cur.abs()) {
                    small_changes += 1;
                    if small_changes >= 2 {
                        converged = true;
                    }
                } else {
                    small_changes = 0;
                }
                break;
            }
            t = t * half;
        }
        if !accepted {
            // No improving step exists at representable sizes.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(AscentReport {
        argmax: x,
        value: f_cur,
        n_iterations: iterations,
        converged,
    })
}

/// Max relative disagreement between the analytic gradient and central
/// differences: `max_i |g_i - fd_i| / (|g_i| + 1e-8)`.
pub fn grad_check<F: Real>(obj: &ObjectiveSpec<'_, F>, x: &[F], h: F) -> F {
    let g = (obj.grad)(x);
    let mut worst = F::zero();
    let mut xp = x.to_vec();
    let eps = lit::<F>(1e-8);
    let two = lit::<F>(2.0);
    for i in 0..obj.dim {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = (obj.eval)(&xp);
        xp[i] = orig - h;
        let fm = (obj.eval)(&xp);
        xp[i] = orig;
        let fd = (fp - fm) / (two * h);
        let rel = (g[i] - fd).abs() / (g[i].abs() + eps);
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_vertex() {
        let obj = ObjectiveSpec::unconstrained(
            1,
            |x: &[f64]| -(x[0] - 3.0).powi(2),
            |x: &[f64]| vec![-2.0 * (x[0] - 3.0)],
        );
        let r = maximize(&obj, &[0.0], 1e-15, 2000).unwrap();
        assert!((r.argmax[0] - 3.0).abs() <= 1e-6, "got {}", r.argmax[0]);
        assert!(r.converged);
    }

    #[test]
    fn log_barrier_stationary_point() {
        // max log(x) - x over x > 0 has its stationary point at x = 1.
        let obj = ObjectiveSpec::positive(
            1,
            |x: &[f64]| x[0].ln() - x[0],
            |x: &[f64]| vec![1.0 / x[0] - 1.0],
        );
        let r = maximize(&obj, &[5.0], 1e-15, 2000).unwrap();
        assert!((r.argmax[0] - 1.0).abs() <= 1e-6, "got {}", r.argmax[0]);
        assert!(r.argmax[0] > 0.0);
    }

    #[test]
    fn report_value_matches_eval_exactly() {
        let obj = ObjectiveSpec::unconstrained(
            2,
            |x: &[f64]| -(x[0] * x[0] + 2.0 * x[1] * x[1]) + x[0],
            |x: &[f64]| vec![-2.0 * x[0] + 1.0, -4.0 * x[1]],
        );
        let r = maximize(&obj, &[4.0, -3.0], 1e-12, 500).unwrap();
        assert_eq!(r.value.to_bits(), (obj.eval)(&r.argmax).to_bits());
        assert!(r.value >= (obj.eval)(&[4.0, -3.0]) - 1e-12);
    }

    #[test]
    fn monotone_accepted_values() {
        // Track the accepted sequence through a wrapper objective.
        use std::cell::RefCell;
        let seen: RefCell<Vec<f64>> = RefCell::new(vec![]);
        let obj = ObjectiveSpec::unconstrained(
            1,
            |x: &[f64]| -(x[0] - 2.0).powi(4),
            |x: &[f64]| vec![-4.0 * (x[0] - 2.0).powi(3)],
        );
        let mut warm = 1.0f64;
        let mut x = vec![-1.0f64];
        for _ in 0..40 {
            let r = maximize_warm(&obj, &x, 1e-16, 1, &mut warm).unwrap();
            seen.borrow_mut().push(r.value);
            x = r.argmax;
        }
        let vals = seen.borrow();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0], "sequence decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn infeasible_start_rejected() {
        let obj = ObjectiveSpec::positive(1, |x: &[f64]| x[0].ln() - x[0], |x: &[f64]| {
            vec![1.0 / x[0] - 1.0]
        });
        assert!(matches!(
            maximize(&obj, &[-1.0], 1e-8, 10),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn non_finite_start_is_numerical_failure() {
        let obj = ObjectiveSpec::unconstrained(1, |x: &[f64]| x[0].ln(), |x: &[f64]| {
            vec![1.0 / x[0]]
        });
        let err = maximize(&obj, &[-2.0], 1e-8, 10).unwrap_err();
        match err {
            Error::NumericalFailure { last_feasible, .. } => {
                assert_eq!(last_feasible, vec![-2.0])
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn log_space_and_direct_agree() {
        // Optimizing f over x > 0 directly (log space) and optimizing
        // g(u) = f(exp(u)) unconstrained reach the same value.
        let f = |x: &[f64]| 2.0 * x[0].ln() - x[0] - 0.5 * x[0] * x[0];
        let fg = |x: &[f64]| vec![2.0 / x[0] - 1.0 - x[0]];
        let obj_pos = ObjectiveSpec::positive(1, f, fg);
        let r1 = maximize(&obj_pos, &[3.0], 1e-13, 2000).unwrap();
        let obj_u = ObjectiveSpec::unconstrained(
            1,
            move |u: &[f64]| f(&[u[0].exp()]),
            move |u: &[f64]| {
                let x = u[0].exp();
                vec![fg(&[x])[0] * x]
            },
        );
        let r2 = maximize(&obj_u, &[3.0f64.ln()], 1e-13, 2000).unwrap();
        assert!((r1.value - r2.value).abs() <= 1e-10 * (1.0 + r1.value.abs()));
    }

    #[test]
    fn grad_check_exact_for_quadratics() {
        let obj = ObjectiveSpec::unconstrained(
            2,
            |x: &[f64]| -(x[0] * x[0] + 3.0 * x[1] * x[1]) + 2.0 * x[0],
            |x: &[f64]| vec![-2.0 * x[0] + 2.0, -6.0 * x[1]],
        );
        let err = grad_check(&obj, &[0.7, -1.3], 1e-4);
        assert!(err <= 1e-9, "error {err}");
    }

    #[test]
    fn grad_check_flags_wrong_gradient() {
        let obj = ObjectiveSpec::unconstrained(
            1,
            |x: &[f64]| -(x[0] - 1.0).powi(2),
            // Deliberately doubled gradient.
            |x: &[f64]| vec![-4.0 * (x[0] - 1.0)],
        );
        let err = grad_check(&obj, &[3.0], 1e-5);
        assert!(err > 0.4, "detector missed the bad gradient: {err}");
    }
}
