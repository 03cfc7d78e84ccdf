//! Exact signed fixed-point arithmetic with explicit bit widths.
//!
//! Every quantized quantity in the simulator is an integer inside a
//! register of known width. This module owns the width bookkeeping: the
//! representable-range checks, the accumulator sizing math, and the
//! opt-in saturating clamp. Scales are exact rationals so that
//! raw-to-real conversion is bit-reproducible.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Narrowest register width the model accepts.
pub const MIN_WIDTH: u32 = 2;
/// Widest register width the model accepts (raw values are stored in i64).
pub const MAX_WIDTH: u32 = 64;

/// Interpretation of a register's bit pattern when computing ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signedness {
    Signed,
    Unsigned,
}

impl Signedness {
    /// Inclusive representable range of a `width`-bit register.
    pub fn range(self, width: u32) -> (i128, i128) {
        debug_assert!(width >= 1 && width <= MAX_WIDTH);
        match self {
            Signedness::Signed => (-(1i128 << (width - 1)), (1i128 << (width - 1)) - 1),
            Signedness::Unsigned => (0, (1i128 << width) - 1),
        }
    }

    /// Minimal width whose range covers every value in `[-max_abs, max_abs]`
    /// (signed) or `[0, max_abs]` (unsigned).
    pub fn min_width_for(self, max_abs: u128) -> u32 {
        let bits = 128 - max_abs.leading_zeros();
        match self {
            Signedness::Unsigned => bits.max(1),
            // The positive end binds: +max_abs needs a sign bit on top.
            Signedness::Signed => bits + 1,
        }
    }
}

/// A signed two's-complement integer of configurable bit width, together
/// with an exact rational scale mapping raw units to real values.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointValue {
    raw: i64,
    width: u32,
    scale: BigRational,
}

impl FixedPointValue {
    /// Builds a value, checking that `raw` fits `width` bits signed and
    /// that the scale is positive.
    pub fn new(raw: i64, width: u32, scale: BigRational) -> Result<Self> {
        check_width(width)?;
        if scale <= BigRational::zero() {
            return Err(Error::InvalidConfig(format!(
                "scale must be positive, got {scale}"
            )));
        }
        let (lo, hi) = Signedness::Signed.range(width);
        let v = raw as i128;
        if v < lo || v > hi {
            return Err(Error::Overflow {
                what: "fixed-point raw value",
                value: v,
                width,
            });
        }
        Ok(Self { raw, width, scale })
    }

    /// Integer-scaled value (scale = 1).
    pub fn integer(raw: i64, width: u32) -> Result<Self> {
        Self::new(raw, width, BigRational::from_integer(1.into()))
    }

    /// Clamps an arbitrary integer into the signed `width`-bit range.
    ///
    /// This is the opt-in saturating construction; the default datapath
    /// policy is [`add_exact`]'s error-on-overflow.
    pub fn saturating(value: i128, width: u32, scale: BigRational) -> Result<Self> {
        check_width(width)?;
        let clamped = saturate(value, width, Signedness::Signed);
        Self::new(clamped as i64, width, scale)
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn scale(&self) -> &BigRational {
        &self.scale
    }

    /// Real value represented: `raw × scale`, exactly.
    pub fn to_real(&self) -> BigRational {
        &self.scale * BigRational::from_integer(self.raw.into())
    }
}

fn check_width(width: u32) -> Result<()> {
    if !(MIN_WIDTH..=MAX_WIDTH).contains(&width) {
        return Err(Error::InvalidConfig(format!(
            "width {width} outside {MIN_WIDTH}..={MAX_WIDTH}"
        )));
    }
    Ok(())
}

/// Exact addition of two matched-scale values into a register of
/// `out_width` bits. Overflow is an error, never a silent wrap.
pub fn add_exact(a: &FixedPointValue, b: &FixedPointValue, out_width: u32) -> Result<FixedPointValue> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch {
            left: a.scale.to_string(),
            right: b.scale.to_string(),
        });
    }
    check_width(out_width)?;
    let sum = a.raw as i128 + b.raw as i128;
    let (lo, hi) = Signedness::Signed.range(out_width);
    if sum < lo || sum > hi {
        return Err(Error::Overflow {
            what: "sum",
            value: sum,
            width: out_width,
        });
    }
    FixedPointValue::new(sum as i64, out_width, a.scale.clone())
}

/// Worst-case sizing of an accumulator that sums `terms` inputs whose
/// magnitude is at most `term_max_abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthReport {
    pub terms: u64,
    /// Bits needed for a single worst-case term.
    pub term_width: u32,
    /// Bits needed for the worst-case sum.
    pub required_width: u32,
    pub max_abs_sum: u128,
    pub signedness: Signedness,
}

/// Computes the worst-case sum magnitude `terms × term_max_abs` and the
/// minimal register width that holds it under the given signedness.
pub fn required_accumulator_width(
    terms: u64,
    term_max_abs: u64,
    signedness: Signedness,
) -> WidthReport {
    let max_abs_sum = terms as u128 * term_max_abs as u128;
    WidthReport {
        terms,
        term_width: signedness.min_width_for(term_max_abs as u128),
        required_width: signedness.min_width_for(max_abs_sum),
        max_abs_sum,
        signedness,
    }
}

/// Clamps `value` to the representable range of a `width`-bit register.
pub fn saturate(value: i128, width: u32, signedness: Signedness) -> i128 {
    let (lo, hi) = signedness.range(width);
    value.clamp(lo, hi)
}
