//! Softmax and log-sum-exp primitives.
//!
//! All reductions over class coordinates go through [`stable_sum`] so that
//! relabeling classes permutes every downstream quantity bit-exactly.

use crate::error::{Error, Result};
use crate::exact::stable_sum;
use crate::scalar::Real;

/// Overflow-safe softmax. Entries are positive and renormalized to sum to 1.
pub fn softmax<F: Real>(v: &[F]) -> Result<Vec<F>> {
    if v.is_empty() {
        return Err(Error::invalid_argument("softmax of empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_argument("softmax input must be finite"));
    }
    let mut out = vec![F::zero(); v.len()];
    softmax_into(v.iter().copied(), &mut out);
    Ok(out)
}

/// Softmax into a caller-provided buffer; input is assumed finite.
pub fn softmax_into<F: Real>(v: impl IntoIterator<Item = F>, out: &mut [F]) {
    let mut max = F::neg_infinity();
    let mut n = 0usize;
    for (slot, x) in out.iter_mut().zip(v) {
        *slot = x;
        if x > max {
            max = x;
        }
        n += 1;
    }
    debug_assert_eq!(n, out.len());
    for slot in out.iter_mut() {
        *slot = (*slot - max).exp();
    }
    let denom = stable_sum(out.iter().copied());
    for slot in out.iter_mut() {
        *slot = *slot / denom;
    }
    // Renormalize once more so the row sums to 1 to within 1e-12 even after
    // the individual divisions round.
    let s = stable_sum(out.iter().copied());
    for slot in out.iter_mut() {
        *slot = *slot / s;
    }
}

/// log(sum_i exp(x_i)) with max-subtraction.
pub fn log_sum_exp<F: Real>(v: impl IntoIterator<Item = F> + Clone) -> F {
    let mut max = F::neg_infinity();
    for x in v.clone() {
        if x > max {
            max = x;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let s = stable_sum(v.into_iter().map(|x| (x - max).exp()));
    max + s.ln()
}

/// `sum_i exp(m_i + v_i / 2)` computed through shifted log space so it stays
/// finite for |m| up to ~700 (the k/xi Taylor points and their gradients).
pub fn sum_exp_half_var<F: Real>(means: &[F], vars: &[F]) -> F {
    let half = crate::scalar::lit::<F>(0.5);
    log_sum_exp(
        means
            .iter()
            .zip(vars)
            .map(|(&m, &v)| m + half * v)
            .collect::<smallvec::SmallVec<[F; 8]>>(),
    )
    .exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn softmax_symmetric() {
        let p = softmax(&[0.0f64, 0.0, 0.0]).unwrap();
        for &x in &p {
            assert_relative_eq!(x, 1.0 / 3.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn softmax_ln2() {
        let p = softmax(&[2.0f64.ln(), 0.0]).unwrap();
        assert_relative_eq!(p[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p[1], 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn softmax_no_overflow() {
        let p = softmax(&[1000.0f64, 0.0]).unwrap();
        assert!(p[0] > 1.0 - 1e-12);
        assert!(p[1] < 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn softmax_simplex_tight() {
        // Invariant: output on the simplex to 1e-12 after renormalization.
        let cases: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 3.0, -4.0],
            vec![700.0, -700.0],
            vec![0.1; 7],
            vec![-3.5, 2.2, 0.0, 9.9, -100.0],
        ];
        for v in cases {
            let p = softmax(&v).unwrap();
            let s: f64 = crate::exact::stable_sum(p.iter().copied());
            assert!((s - 1.0).abs() <= 1e-12, "sum = {s}");
            assert!(p.iter().all(|&x| x > 0.0 || x == 0.0));
        }
    }

    #[test]
    fn lse_matches_direct() {
        let v = [0.3f64, -1.0, 2.5];
        let direct = (v.iter().map(|x| x.exp()).sum::<f64>()).ln();
        assert_relative_eq!(log_sum_exp(v), direct, max_relative = 1e-14);
    }

    #[test]
    fn sum_exp_half_var_large_means_stay_finite() {
        let m = [700.0f64, 699.0];
        let v = [1.0f64, 1.0];
        let s = sum_exp_half_var(&m, &v);
        assert!(s.is_finite());
        assert!(s > 0.0);
    }
}
