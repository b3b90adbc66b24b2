//! Exact integer evaluation of fixed-point dot products.
//!
//! Mantissa products are accumulated in `i128`; on overflow the same sum is
//! redone with arbitrary-precision integers, so results never depend on the
//! accumulator width.

use num_bigint::BigInt;
use num_traits::ToPrimitive;

/// `Σ a_c·x_c + offset·2^shift` as an exact integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactSum {
    Small(i128),
    Big(BigInt),
}

impl ExactSum {
    pub fn compute(a: &[i64], x: &[i64], offset: i128, shift: u32) -> Self {
        match small(a, x, offset, shift) {
            Some(v) => ExactSum::Small(v),
            None => {
                let mut acc = BigInt::from(offset) << shift as usize;
                for (ac, xc) in a.iter().zip(x) {
                    acc += BigInt::from(*ac) * BigInt::from(*xc);
                }
                ExactSum::Big(acc)
            }
        }
    }

    pub fn is_nonpositive(&self) -> bool {
        match self {
            ExactSum::Small(v) => *v <= 0,
            ExactSum::Big(v) => v.sign() != num_bigint::Sign::Plus,
        }
    }

    /// Value scaled by `2^-scale`, rounded once to the nearest `f64`.
    pub fn to_f64_scaled(&self, scale: u32) -> f64 {
        let v = match self {
            ExactSum::Small(v) => *v as f64,
            ExactSum::Big(v) => v.to_f64().unwrap_or(f64::NAN),
        };
        v * 2f64.powi(-(scale as i32))
    }
}

fn small(a: &[i64], x: &[i64], offset: i128, shift: u32) -> Option<i128> {
    if shift >= 126 {
        return None;
    }
    let mut acc = offset.checked_mul(1i128 << shift)?;
    for (ac, xc) in a.iter().zip(x) {
        acc = acc.checked_add((*ac as i128) * (*xc as i128))?;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_and_big_agree() {
        let a = [i64::MAX, i64::MAX, i64::MAX];
        let big = ExactSum::compute(&a, &a, 1, 63);
        assert!(matches!(big, ExactSum::Big(_)));
        assert!(!big.is_nonpositive());
        let cancel = ExactSum::compute(&[i64::MIN, i64::MIN, i64::MIN], &a, 0, 0);
        assert!(cancel.is_nonpositive());
        let s = ExactSum::compute(&[3, -4], &[2, 1], -1, 2);
        assert_eq!(s, ExactSum::Small(6 - 4 - 4));
        assert!(s.is_nonpositive());
        assert_eq!(ExactSum::compute(&[1], &[3], 0, 0).to_f64_scaled(1), 1.5);
    }
}
