//! Order-invariant summation.
//!
//! Two cooperating mechanisms keep every multi-term reduction in this crate a
//! pure function of the *multiset* of addends, independent of evaluation
//! order or of how the addends are partitioned across call sites:
//!
//! * [`ExactAcc`] — a fixed-point superaccumulator that adds f64 values
//!   exactly (no rounding until the final extraction). Two accumulators can
//!   be merged, and `merge(a, b).value() == acc_of_all_terms.value()`
//!   bit-for-bit. This is what lets a sum over objects be split into
//!   per-site partial sums without perturbing the total: partial-sum
//!   messages carry the accumulator state, not a rounded scalar.
//! * [`stable_sum`] — for small, strictly node-local sums (e.g. over class
//!   coordinates): sorts the addends into IEEE total order and folds. Not
//!   exact, but canonical, so permuting class indices permutes results
//!   exactly.
//!
//! Every reduction that can cross a site boundary in any distributed mode
//! goes through `ExactAcc` (in centralized execution too, so the two paths
//! produce identical bits).

use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Number of 64-bit limbs. Limb `j` carries weight `2^(64*j - 1074)`.
/// 33 limbs cover every finite f64 bit position (2^-1074 .. 2^1023 with a
/// 53-bit mantissa tops out below bit 2098 = 64*32.8); two more give carry
/// headroom so totals up to ~2^1150 stay representable before extraction.
const LIMBS: usize = 35;

/// Exact, mergeable accumulator for f64 sums.
///
/// The represented value is `sum_j limbs[j] * 2^(64*j - 1074)` (plus
/// infinity/NaN flags). Each `add` deposits at most `2^64` per limb, and
/// limbs are 128-bit, so ~2^62 additions are safe without renormalization —
/// far beyond anything this crate does.
#[derive(Clone, Serialize, Deserialize)]
pub struct ExactAcc {
    limbs: Vec<i128>,
    pos_inf: bool,
    neg_inf: bool,
    nan: bool,
    nonempty: bool,
    /// Every addend so far was -0.0 (IEEE: such a sum is -0.0).
    all_neg_zero: bool,
}

impl Default for ExactAcc {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for ExactAcc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ExactAcc({})", self.value())
    }
}

impl ExactAcc {
    pub fn new() -> Self {
        ExactAcc {
            limbs: vec![0; LIMBS],
            pos_inf: false,
            neg_inf: false,
            nan: false,
            nonempty: false,
            all_neg_zero: true,
        }
    }

    /// Add a single f64 exactly.
    pub fn add(&mut self, x: f64) {
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);

        self.nonempty = true;
        if bits != (-0.0f64).to_bits() {
            self.all_neg_zero = false;
        }

        if biased == 0x7ff {
            if frac != 0 {
                self.nan = true;
            } else if negative {
                self.neg_inf = true;
            } else {
                self.pos_inf = true;
            }
            return;
        }
        let (mantissa, exp) = if biased == 0 {
            if frac == 0 {
                return; // +-0
            }
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), biased - 1023 - 52)
        };

        // Bit position of the mantissa's least significant bit.
        let pos = (exp + 1074) as usize;
        let (limb, shift) = (pos / 64, pos % 64);
        let wide = (mantissa as u128) << shift;
        let lo = (wide & u128::from(u64::MAX)) as u64;
        let hi = (wide >> 64) as u64;
        if negative {
            self.limbs[limb] -= lo as i128;
            self.limbs[limb + 1] -= hi as i128;
        } else {
            self.limbs[limb] += lo as i128;
            self.limbs[limb + 1] += hi as i128;
        }
    }

    /// Fold another accumulator into this one. Exact: the merged state
    /// represents the sum of both multisets.
    pub fn merge(&mut self, other: &ExactAcc) {
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a += *b;
        }
        self.pos_inf |= other.pos_inf;
        self.neg_inf |= other.neg_inf;
        self.nan |= other.nan;
        self.nonempty |= other.nonempty;
        self.all_neg_zero &= other.all_neg_zero;
    }

    /// Round the exact total to the nearest f64 (ties to even).
    pub fn value(&self) -> f64 {
        if self.nan || (self.pos_inf && self.neg_inf) {
            return f64::NAN;
        }
        if self.pos_inf {
            return f64::INFINITY;
        }
        if self.neg_inf {
            return f64::NEG_INFINITY;
        }

        // Normalize to canonical base-2^64 digits plus a sign.
        let mut digits = [0u64; LIMBS];
        let mut carry: i128 = 0;
        for (j, &l) in self.limbs.iter().enumerate() {
            let v = l + carry;
            let d = v.rem_euclid(1i128 << 64);
            digits[j] = d as u64;
            carry = (v - d) >> 64;
        }
        let negative = match carry {
            0 => false,
            -1 => true,
            _ => unreachable!("accumulator overflow"),
        };
        if negative {
            // Two's complement -> magnitude.
            let mut borrow = true;
            for d in digits.iter_mut() {
                *d = !*d;
                if borrow {
                    let (nd, overflow) = d.overflowing_add(1);
                    *d = nd;
                    borrow = overflow;
                }
            }
        }

        // Most significant bit.
        let mut top = None;
        for j in (0..LIMBS).rev() {
            if digits[j] != 0 {
                top = Some(64 * j + 63 - digits[j].leading_zeros() as usize);
                break;
            }
        }
        let msb = match top {
            None => {
                return if self.nonempty && self.all_neg_zero { -0.0 } else { 0.0 };
            }
            Some(p) => p,
        };

        // Unbiased exponent of the leading bit.
        let exp = msb as i64 - 1074;
        // ulp position of the result: 53 significant bits for normals,
        // clamped at 2^-1074 for subnormals (which are then exact: the
        // accumulator has no bits below 2^-1074).
        let ulp = if exp - 52 < -1074 { -1074 } else { exp - 52 };
        let lsb_pos = (ulp + 1074) as usize;

        let mut mantissa = extract_bits(&digits, lsb_pos, msb);
        if lsb_pos > 0 {
            let round = bit_at(&digits, lsb_pos - 1);
            let sticky = any_bit_below(&digits, lsb_pos - 1);
            if round && (sticky || mantissa & 1 == 1) {
                mantissa += 1;
            }
        }
        let mut ulp = ulp;
        if mantissa == 1u64 << 53 {
            mantissa >>= 1;
            ulp += 1;
        }
        // Overflow to infinity.
        if ulp > 971 || (ulp == 971 && mantissa > (1u64 << 53) - 1) {
            return if negative { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        let magnitude = compose(mantissa, ulp);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }

    /// True if no finite or non-finite contribution has been recorded.
    pub fn is_zero_state(&self) -> bool {
        !self.nan && !self.pos_inf && !self.neg_inf && self.limbs.iter().all(|&l| l == 0)
    }
}

/// `mantissa * 2^ulp` with `mantissa < 2^53`, exact by construction.
fn compose(mantissa: u64, ulp: i64) -> f64 {
    debug_assert!(mantissa < (1u64 << 53));
    if mantissa == 0 {
        return 0.0;
    }
    let m = mantissa as f64;
    if ulp >= -1022 {
        // 2^ulp is a normal number here because ulp <= 971 at call sites.
        m * f64::from_bits(((ulp + 1023) as u64) << 52)
    } else if ulp >= -1074 {
        // Split the scale so each factor is representable and exact.
        m * f64::from_bits(1u64 << (ulp + 1074)) // subnormal power of two
    } else {
        unreachable!("ulp below representable range")
    }
}

fn bit_at(digits: &[u64; LIMBS], pos: usize) -> bool {
    digits[pos / 64] >> (pos % 64) & 1 == 1
}

fn any_bit_below(digits: &[u64; LIMBS], pos: usize) -> bool {
    let (limb, shift) = (pos / 64, pos % 64);
    for &d in digits.iter().take(limb) {
        if d != 0 {
            return true;
        }
    }
    if shift == 0 {
        false
    } else {
        digits[limb] & ((1u64 << shift) - 1) != 0
    }
}

/// Bits `lsb..=msb` of the digit string as an integer (width <= 53).
fn extract_bits(digits: &[u64; LIMBS], lsb: usize, msb: usize) -> u64 {
    debug_assert!(msb - lsb < 54);
    let mut out = 0u64;
    for p in (lsb..=msb).rev() {
        out = (out << 1) | (digits[p / 64] >> (p % 64) & 1);
    }
    out
}

/// Exact order-invariant sum of f64 terms.
pub fn exact_sum_f64(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = ExactAcc::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Exact order-invariant sum for any `Real` scalar (exactness in the f64
/// carrier; f32 results are the f64 total rounded once more).
pub fn exact_sum<F: Real>(terms: impl IntoIterator<Item = F>) -> F {
    let mut acc = ExactAcc::new();
    for t in terms {
        acc.add(t.to_f64().unwrap_or(f64::NAN));
    }
    F::from_f64(acc.value()).expect("sum representable")
}

/// Canonical-order fold: sorts the addends into IEEE total order and sums.
/// Deterministic under any permutation of the inputs; used for small
/// node-local reductions (e.g. over the k class coordinates) so that class
/// relabelings permute results bit-exactly.
pub fn stable_sum<F: Real>(terms: impl IntoIterator<Item = F>) -> F {
    let mut buf: SmallVec<[F; 8]> = terms.into_iter().collect();
    buf.sort_unstable_by(|a, b| a.total_order(b));
    let mut s = F::zero();
    for t in buf {
        s = s + t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn acc_of(xs: &[f64]) -> f64 {
        exact_sum_f64(xs.iter().copied())
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(acc_of(&[]), 0.0);
        assert!(ExactAcc::new().is_zero_state());
    }

    #[test]
    fn single_values_round_trip() {
        let cases = [
            0.0,
            -0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1e308,
            -1e308,
            f64::MIN_POSITIVE,
            f64::MIN_POSITIVE / 2048.0, // subnormal
            5e-324,                     // smallest subnormal
            -5e-324,
            123456.789,
            f64::MAX,
            f64::MIN,
        ];
        for &x in &cases {
            let got = acc_of(&[x]);
            assert_eq!(got.to_bits(), x.to_bits(), "round trip of {x:e}");
        }
    }

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(acc_of(&[1e16, 1.0, -1e16]), 1.0);
        assert_eq!(acc_of(&[1e308, -1e308, 1.0]), 1.0);
        let tiny = (2.0f64).powi(-60);
        assert_eq!(acc_of(&[1.0, tiny, -1.0]), tiny);
        assert_eq!(acc_of(&[3.5, -3.5]), 0.0);
    }

    #[test]
    fn infinities_and_nan() {
        assert_eq!(acc_of(&[f64::INFINITY, 1.0]), f64::INFINITY);
        assert_eq!(acc_of(&[f64::NEG_INFINITY, 1.0]), f64::NEG_INFINITY);
        assert!(acc_of(&[f64::INFINITY, f64::NEG_INFINITY]).is_nan());
        assert!(acc_of(&[f64::NAN, 1.0]).is_nan());
    }

    #[test]
    fn overflow_rounds_to_infinity() {
        assert_eq!(acc_of(&[f64::MAX, f64::MAX]), f64::INFINITY);
        assert_eq!(acc_of(&[f64::MIN, f64::MIN]), f64::NEG_INFINITY);
        // ... but cancelling back down stays finite and exact.
        assert_eq!(acc_of(&[f64::MAX, f64::MAX, -f64::MAX]), f64::MAX);
    }

    /// Independent oracle: exact integer arithmetic over a common 2^-1074 grid,
    /// rounded to nearest-even by a separate implementation.
    fn bigint_oracle(xs: &[f64]) -> f64 {
        if !xs.is_empty() && xs.iter().all(|x| x.to_bits() == (-0.0f64).to_bits()) {
            return -0.0;
        }
        let mut total = BigInt::from(0);
        for &x in xs {
            let bits = x.to_bits();
            let neg = bits >> 63 == 1;
            let biased = ((bits >> 52) & 0x7ff) as i64;
            let frac = bits & ((1u64 << 52) - 1);
            assert_ne!(biased, 0x7ff, "oracle handles finite values only");
            let (m, e) = if biased == 0 {
                (frac, -1074i64)
            } else {
                (frac | (1u64 << 52), biased - 1023 - 52)
            };
            let term = BigInt::from(m) << ((e + 1074) as u32);
            if neg {
                total -= term;
            } else {
                total += term;
            }
        }
        use num_bigint::Sign;
        let (sign, mag) = total.into_parts();
        if mag == 0u32.into() {
            return 0.0;
        }
        let bits = mag.bits() as i64; // msb index + 1
        let ulp = if bits - 53 - 1074 < -1074 { -1074 } else { bits - 53 - 1074 };
        let shift = (ulp + 1074) as u64;
        let kept: BigInt = BigInt::from(mag.clone()) >> shift;
        let mut mant = u64::try_from(&kept).unwrap();
        if shift > 0 {
            let rem: BigInt = BigInt::from(mag) - (kept << shift);
            let half: BigInt = BigInt::from(1u64) << (shift - 1);
            if rem > half || (rem == half && mant & 1 == 1) {
                mant += 1;
            }
        }
        let mut ulp = ulp;
        if mant == 1u64 << 53 {
            mant >>= 1;
            ulp += 1;
        }
        let v = compose(mant, ulp);
        if sign == Sign::Minus {
            -v
        } else {
            v
        }
    }

    fn arb_double() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
            (-1000i64..1000).prop_map(|m| m as f64),
            (any::<u64>(), -300i32..300).prop_map(|(m, e)| (m as f64) * 2f64.powi(e)),
            Just(5e-324),
            Just(-5e-324),
            Just(0.0),
            Just(-0.0),
        ]
    }

    proptest! {
        #[test]
        fn pair_sum_matches_hardware(a in arb_double(), b in arb_double()) {
            // Hardware addition is correctly rounded, so it is the oracle for pairs.
            prop_assert_eq!(acc_of(&[a, b]).to_bits(), (a + b).to_bits());
        }

        #[test]
        fn matches_bigint_oracle(xs in prop::collection::vec(arb_double(), 0..40)) {
            prop_assert_eq!(acc_of(&xs).to_bits(), bigint_oracle(&xs).to_bits());
        }

        #[test]
        fn permutation_invariant(mut xs in prop::collection::vec(arb_double(), 0..30), seed in any::<u64>()) {
            let base = acc_of(&xs);
            // Deterministic shuffle.
            let mut s = seed;
            for i in (1..xs.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                xs.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(acc_of(&xs).to_bits(), base.to_bits());
        }

        #[test]
        fn merge_equals_flat_sum(xs in prop::collection::vec(arb_double(), 0..30), cut in any::<prop::sample::Index>()) {
            let k = if xs.is_empty() { 0 } else { cut.index(xs.len()) };
            let mut left = ExactAcc::new();
            for &x in &xs[..k] { left.add(x); }
            let mut right = ExactAcc::new();
            for &x in &xs[k..] { right.add(x); }
            left.merge(&right);
            prop_assert_eq!(left.value().to_bits(), acc_of(&xs).to_bits());
        }

        #[test]
        fn stable_sum_permutation_invariant(mut xs in prop::collection::vec(-1e6f64..1e6, 0..12), seed in any::<u64>()) {
            let base = stable_sum(xs.iter().copied());
            let mut s = seed;
            for i in (1..xs.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                xs.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(stable_sum(xs.iter().copied()).to_bits(), base.to_bits());
        }
    }
}
