use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed fixed-point format with `a` total bits (one of them the sign) and
/// `b` fraction bits. The grid step is `2^-b` and the representable range is
/// `[−2^(a−1−b), 2^(a−1−b) − 2^-b]`.
///
/// Values are stored as integer mantissas `m` with value `m · 2^-b`, so the
/// total width is capped at 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFormat", into = "RawFormat")]
pub struct FixedPointFormat {
    a: u32,
    b: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormat {
    a: u32,
    b: u32,
}

impl TryFrom<RawFormat> for FixedPointFormat {
    type Error = Error;
    fn try_from(raw: RawFormat) -> Result<Self> {
        FixedPointFormat::new(raw.a, raw.b)
    }
}

impl From<FixedPointFormat> for RawFormat {
    fn from(f: FixedPointFormat) -> Self {
        RawFormat { a: f.a, b: f.b }
    }
}

impl std::fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "fix(a={}, b={})", self.a, self.b)
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

impl FixedPointFormat {
    pub const MAX_BITS: u32 = 64;

    pub fn new(a: u32, b: u32) -> Result<Self> {
        if !(2..=Self::MAX_BITS).contains(&a) || b > a - 1 {
            return Err(Error::InvalidFormat { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn total_bits(&self) -> u32 {
        self.a
    }

    pub fn frac_bits(&self) -> u32 {
        self.b
    }

    /// Grid step `ε = 2^-b`.
    pub fn step(&self) -> f64 {
        pow2(-(self.b as i32))
    }

    pub fn min_value(&self) -> f64 {
        -pow2(self.a as i32 - 1 - self.b as i32)
    }

    /// `2^(a−1−b) − 2^-b`. Above 54 bits this is not an `f64`; the largest
    /// in-range `f64` is returned instead.
    pub fn max_value(&self) -> f64 {
        if self.a <= 54 {
            self.max_mantissa() as f64 * self.step()
        } else {
            (-self.min_value()).next_down()
        }
    }

    pub fn min_mantissa(&self) -> i64 {
        if self.a == 64 {
            i64::MIN
        } else {
            -(1i64 << (self.a - 1))
        }
    }

    pub fn max_mantissa(&self) -> i64 {
        if self.a == 64 {
            i64::MAX
        } else {
            (1i64 << (self.a - 1)) - 1
        }
    }

    /// Whether `z` lies in the representable range (exactly, without rounding).
    pub fn in_range(&self, z: f64) -> bool {
        if !z.is_finite() {
            return false;
        }
        // Scaling by a power of two is exact.
        let scaled = z * pow2(self.b as i32);
        let top = pow2(self.a as i32 - 1);
        if scaled < -top || scaled >= top {
            return false;
        }
        // Below 2^53 the bound top − 1 is exact; above it every float under
        // `top` is an integer no larger than top − 1.
        !(self.a <= 54 && scaled > top - 1.0)
    }

    /// Round-to-nearest mantissa (ties to even).
    pub fn mantissa(&self, z: f64) -> Result<i64> {
        if !self.in_range(z) {
            return Err(Error::Overflow { value: z, fmt: *self });
        }
        Ok((z * pow2(self.b as i32)).round_ties_even() as i64)
    }

    /// `m · 2^-b`. Exact for every mantissa produced by [`Self::mantissa`].
    pub fn value_of(&self, m: i64) -> f64 {
        m as f64 * self.step()
    }

    pub fn quantize(&self, z: f64) -> Result<f64> {
        Ok(self.value_of(self.mantissa(z)?))
    }
}

/// Snaps `z` to the nearest multiple of `2^-b` (ties to even mantissa).
///
/// Fails when `z` is outside the representable range; saturating would break
/// the `|Δz| <= ε` premise that every bound relies on.
pub fn quantize_scalar(z: f64, fmt: FixedPointFormat) -> Result<f64> {
    fmt.quantize(z)
}

pub fn quantize_vector(v: &DVector<f64>, fmt: FixedPointFormat) -> Result<DVector<f64>> {
    let data = v.iter().map(|z| fmt.quantize(*z)).collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(data))
}

pub fn quantize_matrix(m: &DMatrix<f64>, fmt: FixedPointFormat) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for z in out.iter_mut() {
        *z = fmt.quantize(*z)?;
    }
    Ok(out)
}
