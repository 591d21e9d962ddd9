//! Exact summation of finite doubles.
//!
//! Every finite f64 is an integer multiple of 2^-1074, so a sum of them is an
//! integer in that unit. It is kept in base 2^32 digits held by i64 limbs,
//! which leaves room to add many values before carries must be propagated.
//! Merging two sums is plain limb addition, so the result is independent of
//! the order and grouping of the additions.

use serde::{Deserialize, Serialize};

const DIGIT_BITS: u32 = 32;
const DIGIT_MASK: i64 = (1 << DIGIT_BITS) - 1;
/// Bit 0 of the integer is worth 2^-1074.
const BIAS: i32 = 1074;
/// 2098 significant bit positions plus carry headroom.
const LIMBS: usize = 70;
/// Each addition changes a limb by less than 2^32; normalize well before i64 overflow.
const MAX_PENDING: u32 = 1 << 29;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactSum {
    limbs: Vec<i64>,
    pending: u32,
    non_finite: bool,
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum { limbs: vec![0; LIMBS], pending: 0, non_finite: false }
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.limbs == b.limbs && a.non_finite == b.non_finite
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        if !x.is_finite() {
            self.non_finite = true;
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let exp_bits = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1 << 52) - 1);
        let (mantissa, position) = if exp_bits == 0 {
            (frac, 0)
        } else {
            (frac | (1 << 52), exp_bits - 1075 + BIAS)
        };
        let limb = (position as u32 / DIGIT_BITS) as usize;
        let shifted = u128::from(mantissa) << (position as u32 % DIGIT_BITS);
        let sign = if negative { -1 } else { 1 };
        for k in 0..3 {
            let digit = ((shifted >> (DIGIT_BITS * k)) as i64) & DIGIT_MASK;
            self.limbs[limb + k as usize] += sign * digit;
        }
        self.pending += 1;
        if self.pending >= MAX_PENDING {
            self.normalize();
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.normalize();
        let other = other.canonical();
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a += b;
        }
        self.non_finite |= other.non_finite;
        self.pending = 1;
        self.normalize();
    }

    /// Carries propagated upwards: every limb but the top one in [0, 2^32).
    fn normalize(&mut self) {
        for i in 0..LIMBS - 1 {
            let carry = self.limbs[i] >> DIGIT_BITS;
            self.limbs[i] -= carry << DIGIT_BITS;
            self.limbs[i + 1] += carry;
        }
        self.pending = 0;
    }

    fn canonical(&self) -> ExactSum {
        let mut c = self.clone();
        c.normalize();
        c
    }

    /// The exact sum rounded to the nearest double (ties to even).
    pub fn value(&self) -> f64 {
        if self.non_finite {
            return f64::NAN;
        }
        let mut c = self.canonical();
        let negative = c.limbs[LIMBS - 1] < 0;
        if negative {
            for l in c.limbs.iter_mut() {
                *l = -*l;
            }
            c.normalize();
        }
        let Some(top) = c.limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        // top three digits carry at least 65 significant bits; anything below
        // only matters as a sticky bit for rounding
        let low = top.saturating_sub(2);
        let mut m = (low..=top).rev().fold(0u128, |acc, i| (acc << DIGIT_BITS) | c.limbs[i] as u128);
        if c.limbs[..low].iter().any(|&l| l != 0) {
            m |= 1;
        }
        let scale = (DIGIT_BITS as i32) * low as i32 - BIAS;
        let v = ldexp(m as f64, scale);
        if negative {
            -v
        } else {
            v
        }
    }
}

fn ldexp(mut x: f64, mut e: i32) -> f64 {
    let step = 1000;
    while e > step {
        x *= 2f64.powi(step);
        e -= step;
    }
    while e < -step {
        x *= 2f64.powi(-step);
        e += step;
    }
    x * 2f64.powi(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sum_of(values: &[f64]) -> f64 {
        let mut s = ExactSum::new();
        values.iter().for_each(|&v| s.add(v));
        s.value()
    }

    #[test]
    fn small_cases() {
        assert_eq!(sum_of(&[]), 0.0);
        assert_eq!(sum_of(&[1.5]), 1.5);
        assert_eq!(sum_of(&[-2.25]), -2.25);
        assert_eq!(sum_of(&[1e100, 1.0, -1e100]), 1.0);
        // naive left-to-right summation gives 0.6000000000000001
        assert_eq!(sum_of(&[0.1, 0.2, 0.3]), 0.6);
        assert_eq!(sum_of(&[f64::MIN_POSITIVE / 8.0, f64::MIN_POSITIVE / 8.0]), f64::MIN_POSITIVE / 4.0);
        assert_eq!(sum_of(&[f64::MAX, -f64::MAX, 3.0]), 3.0);
        assert!(sum_of(&[1.0, f64::NAN]).is_nan());
    }

    #[test]
    fn correctly_rounded_against_integers() {
        // 2^53 + 1 is not representable: ties to even gives 2^53
        let big = 2f64.powi(53);
        assert_eq!(sum_of(&[big, 1.0]), big);
        assert_eq!(sum_of(&[big, 1.0, 1.0]), big + 2.0);
        assert_eq!(sum_of(&[big, 1.0, 2f64.powi(-60)]), big + 2.0);
    }

    #[test]
    fn many_additions_normalize() {
        let mut s = ExactSum::new();
        for _ in 0..3_000_000 {
            s.add(1.0);
        }
        assert_eq!(s.value(), 3_000_000.0);
    }

    proptest! {
        #[test]
        fn order_and_grouping_do_not_matter(
            values in proptest::collection::vec(-1e6..1e6f64, 0..80),
            split in 0usize..80,
        ) {
            let split = split.min(values.len());
            let whole = sum_of(&values);
            let mut rev = values.clone();
            rev.reverse();
            prop_assert_eq!(whole.to_bits(), sum_of(&rev).to_bits());
            let mut a = ExactSum::new();
            let mut b = ExactSum::new();
            values[..split].iter().for_each(|&v| a.add(v));
            values[split..].iter().for_each(|&v| b.add(v));
            a.merge(&b);
            prop_assert_eq!(whole.to_bits(), a.value().to_bits());
        }

        #[test]
        fn matches_naive_sum_closely(values in proptest::collection::vec(0.0..1e4f64, 1..200)) {
            let naive: f64 = values.iter().sum();
            let exact = sum_of(&values);
            prop_assert!((naive - exact).abs() <= 1e-12 * naive.abs().max(1.0));
        }

        #[test]
        fn two_values_round_like_ieee(a in any::<f64>(), b in any::<f64>()) {
            prop_assume!(a.is_finite() && b.is_finite() && (a + b).is_finite());
            prop_assert_eq!(sum_of(&[a, b]), a + b);
        }
    }
}
