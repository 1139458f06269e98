//! Binary floating point with a configurable significand width, correctly
//! rounded to nearest-even after every operation.
//!
//! A value is `(-1)^neg * mant * 2^exp`, with `mant` an arbitrary-size
//! unsigned integer kept odd (or zero) so every value has one representation.
//! Precision is a property of each operation, not of the value.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Exponents (of the leading bit) beyond this magnitude count as overflow
/// or underflow of the working range.
pub const EXP_LIMIT: i64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigFloat {
    neg: bool,
    mant: BigUint,
    exp: i64,
}

/// Exponent-range exhaustion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeError;

pub type BfResult = Result<BigFloat, RangeError>;

fn bits(m: &BigUint) -> i64 {
    m.bits() as i64
}

impl BigFloat {
    pub fn zero() -> Self {
        BigFloat {
            neg: false,
            mant: BigUint::zero(),
            exp: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg && !self.is_zero()
    }

    /// Exponent of the leading bit plus one: the value lies in
    /// `[2^(top-1), 2^top)` in magnitude.
    fn top(&self) -> i64 {
        self.exp + bits(&self.mant)
    }

    fn canonical(neg: bool, mant: BigUint, exp: i64) -> Self {
        if mant.is_zero() {
            return BigFloat::zero();
        }
        let tz = mant.trailing_zeros().unwrap_or(0);
        BigFloat {
            neg,
            mant: mant >> tz,
            exp: exp + tz as i64,
        }
    }

    /// Rounds `(-1)^neg * (mant + sticky*eps) * 2^exp` to `prec` bits. When
    /// `sticky` is set the caller guarantees `mant` carries at least two bits
    /// below the rounding position.
    fn round(neg: bool, mant: BigUint, exp: i64, sticky: bool, prec: u32) -> BfResult {
        let n = bits(&mant);
        let prec = prec as i64;
        let (mant, exp) = if n > prec {
            let shift = n - prec;
            let keep = &mant >> (shift as usize);
            let half = mant.bit((shift - 1) as u64);
            let below_half = {
                let mask = (BigUint::one() << ((shift - 1) as usize)) - 1u32;
                !(&mant & mask).is_zero()
            };
            let up = half && (below_half || sticky || keep.bit(0));
            (if up { keep + 1u32 } else { keep }, exp + shift)
        } else {
            (mant, exp)
        };
        let out = BigFloat::canonical(neg, mant, exp);
        if !out.is_zero() && out.top().abs() > EXP_LIMIT {
            return Err(RangeError);
        }
        Ok(out)
    }

    /// Exact value of a finite binary64, rounded to `prec` bits.
    pub fn from_f64(x: f64, prec: u32) -> BfResult {
        assert!(x.is_finite(), "non-finite value has no big-float image");
        let b = x.to_bits();
        let neg = b >> 63 == 1;
        let e = ((b >> 52) & 0x7ff) as i64;
        let f = b & ((1u64 << 52) - 1);
        let (m, exp) = if e == 0 {
            (f, -1074)
        } else {
            (f | (1u64 << 52), e - 1075)
        };
        BigFloat::round(neg, BigUint::from(m), exp, false, prec)
    }

    /// Exact conversion; binary64 values need at most 53 bits.
    pub fn from_f64_exact(x: f64) -> BigFloat {
        BigFloat::from_f64(x, 53).expect("binary64 exponents are in range")
    }

    pub fn neg(&self) -> BigFloat {
        BigFloat {
            neg: !self.neg && !self.is_zero(),
            ..self.clone()
        }
    }

    pub fn abs(&self) -> BigFloat {
        BigFloat {
            neg: false,
            ..self.clone()
        }
    }

    pub fn add(&self, other: &BigFloat, prec: u32) -> BfResult {
        if other.is_zero() {
            return BigFloat::round(self.neg, self.mant.clone(), self.exp, false, prec);
        }
        if self.is_zero() {
            return BigFloat::round(other.neg, other.mant.clone(), other.exp, false, prec);
        }
        let (big, small) = if self.top() >= other.top() {
            (self, other)
        } else {
            (other, self)
        };
        let guard = prec as i64 + 3;
        if small.top() < big.exp && small.top() < big.top() - guard {
            // The smaller operand only decides the direction of rounding.
            let k = (guard - bits(&big.mant)).max(0) as usize + 2;
            let shifted = &big.mant << k;
            let mant = if big.neg == small.neg {
                shifted
            } else {
                shifted - 1u32
            };
            return BigFloat::round(big.neg, mant, big.exp - k as i64, true, prec);
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << ((self.exp - e) as usize);
        let b = &other.mant << ((other.exp - e) as usize);
        if self.neg == other.neg {
            return BigFloat::round(self.neg, a + b, e, false, prec);
        }
        match a.cmp(&b) {
            Ordering::Equal => Ok(BigFloat::zero()),
            Ordering::Greater => BigFloat::round(self.neg, a - b, e, false, prec),
            Ordering::Less => BigFloat::round(other.neg, b - a, e, false, prec),
        }
    }

    pub fn sub(&self, other: &BigFloat, prec: u32) -> BfResult {
        self.add(&other.neg(), prec)
    }

    pub fn mul(&self, other: &BigFloat, prec: u32) -> BfResult {
        BigFloat::round(
            self.neg != other.neg,
            &self.mant * &other.mant,
            self.exp + other.exp,
            false,
            prec,
        )
    }

    /// Division; `None` for a zero divisor.
    pub fn div(&self, other: &BigFloat, prec: u32) -> Option<BfResult> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Ok(BigFloat::zero()));
        }
        let s = (prec as i64 + 2 + bits(&other.mant) - bits(&self.mant)).max(0) + 1;
        let num = &self.mant << (s as usize);
        let q = &num / &other.mant;
        let sticky = !(num - &q * &other.mant).is_zero();
        Some(BigFloat::round(
            self.neg != other.neg,
            q,
            self.exp - other.exp - s,
            sticky,
            prec,
        ))
    }

    /// Square root; `None` for negative operands.
    pub fn sqrt(&self, prec: u32) -> Option<BfResult> {
        if self.is_zero() {
            return Some(Ok(BigFloat::zero()));
        }
        if self.neg {
            return None;
        }
        let want = 2 * (prec as i64 + 2);
        let mut s = (want - bits(&self.mant)).max(0) + 2;
        if (self.exp - s) % 2 != 0 {
            s += 1;
        }
        let m = &self.mant << (s as usize);
        let r = m.sqrt();
        let sticky = &r * &r != m;
        Some(BigFloat::round(false, r, (self.exp - s) / 2, sticky, prec))
    }

    /// Rounds to an IEEE format with `p` significand bits whose smallest
    /// quantum is `2^min_q` and whose largest finite values are below
    /// `2^max_top`. Returns `(negative, significand, quantum exponent)`, or
    /// `None` on overflow.
    fn round_ieee(&self, p: i64, min_q: i64, max_top: i64) -> Option<(bool, u64, i64)> {
        if self.is_zero() {
            return Some((self.neg, 0, min_q));
        }
        let q = (self.top() - p).max(min_q);
        let shift = q - self.exp;
        let m = if shift <= 0 {
            &self.mant << ((-shift) as usize)
        } else {
            let keep = &self.mant >> (shift as usize);
            let half = self.mant.bit((shift - 1) as u64);
            let mask = (BigUint::one() << ((shift - 1) as usize)) - 1u32;
            let rest = !(&self.mant & mask).is_zero();
            if half && (rest || keep.bit(0)) {
                keep + 1u32
            } else {
                keep
            }
        };
        let m = m.to_u64().expect("significand fits the format");
        if m != 0 && q + 64 - m.leading_zeros() as i64 > max_top {
            return None;
        }
        Some((self.neg, m, q))
    }

    /// Nearest binary64 (ties to even), with gradual underflow; overflow
    /// gives an infinity.
    pub fn to_f64(&self) -> f64 {
        match self.round_ieee(53, -1074, 1024) {
            None => {
                if self.neg {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            Some((neg, m, q)) => {
                let v = m as f64 * pow2_f64(q);
                if neg {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Nearest binary32, widened.
    pub fn to_f32(&self) -> f32 {
        match self.round_ieee(24, -149, 128) {
            None => {
                if self.neg {
                    f32::NEG_INFINITY
                } else {
                    f32::INFINITY
                }
            }
            Some((neg, m, q)) => {
                let v = (m as f64 * pow2_f64(q)) as f32;
                if neg {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Rounds to the nearest multiple of `2^q` (ties to even multiple).
    pub fn round_to_quantum(&self, q: i64) -> BigFloat {
        if self.is_zero() || self.exp >= q {
            return self.clone();
        }
        let shift = (q - self.exp) as usize;
        let keep = &self.mant >> shift;
        let half = self.mant.bit(shift as u64 - 1);
        let mask = (BigUint::one() << (shift - 1)) - 1u32;
        let rest = !(&self.mant & mask).is_zero();
        let m = if half && (rest || keep.bit(0)) {
            keep + 1u32
        } else {
            keep
        };
        BigFloat::canonical(self.neg, m, q)
    }

    /// Significand and exponent: `value = (-1)^neg * mant * 2^exp`, `mant` odd.
    pub fn parts(&self) -> (bool, &BigUint, i64) {
        (self.neg, &self.mant, self.exp)
    }
}

/// `2^q` for `q` in the binary64 range, including subnormal powers.
fn pow2_f64(q: i64) -> f64 {
    if q > 1023 {
        // Only reached with m < 2^53 and a value below 2^1024.
        return 2f64.powi(1023) * pow2_f64(q - 1023);
    }
    if q >= -1022 {
        f64::from_bits(((q + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (q + 1074))
    }
}
