//! Error-free transformations and rounding-error estimates for single
//! machine operations.
//!
//! Sign convention: `mu = exact - computed`, so `computed + mu` is the exact
//! result for add/sub/mul. Division and square root use the FMA residual of
//! the computed result instead (see [`div_residual`] and [`sqrt_residual`]);
//! the residue functions are written in terms of that residual.

use std::sync::OnceLock;

use crate::lang::{FpOp, OpId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EftResult {
    pub result: f64,
    pub mu: f64,
}

impl EftResult {
    fn poisoned(result: f64) -> Self {
        EftResult {
            result,
            mu: f64::NAN,
        }
    }
}

/// True for values the residue machinery cannot reason about: NaN, infinities
/// and subnormals.
#[inline]
pub fn out_of_range(v: f64) -> bool {
    !v.is_finite() || v.is_subnormal()
}

/// Knuth's branch-free TwoSum.
pub fn two_sum(a: f64, b: f64) -> EftResult {
    let s = a + b;
    if out_of_range(s) || !a.is_finite() || !b.is_finite() {
        return EftResult::poisoned(s);
    }
    let bb = s - a;
    let mu = (a - (s - bb)) + (b - bb);
    if !mu.is_finite() {
        return EftResult::poisoned(s);
    }
    EftResult { result: s, mu }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProdStrategy {
    Fma,
    Dekker,
}

/// Veltkamp splitting constant for binary64.
const SPLITTER: f64 = 134217729.0; // 2^27 + 1

fn split(a: f64) -> (f64, f64) {
    let c = SPLITTER * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

pub fn two_prod_fma(a: f64, b: f64) -> f64 {
    a.mul_add(b, -(a * b))
}

pub fn two_prod_dekker(a: f64, b: f64) -> f64 {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// Picks the product strategy once per process. FMA is used only if it passes
/// a fixed battery of single-rounding checks, so the choice never depends on
/// timing or input data.
pub fn prod_strategy() -> ProdStrategy {
    static STRATEGY: OnceLock<ProdStrategy> = OnceLock::new();
    *STRATEGY.get_or_init(|| {
        let cases = [
            (1.0 + f64::EPSILON, 1.0 + f64::EPSILON),
            (0.1, 0.3),
            (3.0 * 2f64.powi(-27) + 1.0, 3.0 * 2f64.powi(-27) + 1.0),
            (1e300, 1e-300),
            (-7.0 / 3.0, 11.0 / 7.0),
        ];
        let fma_ok = cases
            .iter()
            .all(|&(a, b)| two_prod_fma(a, b) == two_prod_dekker(a, b));
        if fma_ok {
            ProdStrategy::Fma
        } else {
            ProdStrategy::Dekker
        }
    })
}

/// `a * b = result + mu` exactly when the product is in range.
pub fn two_prod(a: f64, b: f64) -> EftResult {
    let p = a * b;
    if out_of_range(p) || !a.is_finite() || !b.is_finite() || (p == 0.0 && a != 0.0 && b != 0.0)
    {
        return EftResult::poisoned(p);
    }
    let mu = match prod_strategy() {
        ProdStrategy::Fma => two_prod_fma(a, b),
        ProdStrategy::Dekker => {
            // Splitting overflows near the top of the range; FMA is exact there.
            if a.abs() > 1e150 || b.abs() > 1e150 {
                two_prod_fma(a, b)
            } else {
                two_prod_dekker(a, b)
            }
        }
    };
    if !mu.is_finite() || (mu != 0.0 && mu.is_subnormal()) {
        return EftResult::poisoned(p);
    }
    EftResult { result: p, mu }
}

/// Exact residual `q*y - x` of a computed quotient; NaN when out of range.
pub fn div_residual(x: f64, y: f64, q: f64) -> f64 {
    if y == 0.0 || out_of_range(q) || !x.is_finite() || (q == 0.0 && x != 0.0) {
        return f64::NAN;
    }
    q.mul_add(y, -x)
}

/// Estimated quotient error `x/y - q`.
pub fn div_err(x: f64, y: f64, q: f64) -> f64 {
    -div_residual(x, y, q) / y
}

/// Exact residual `x - s*s` of a computed square root; NaN when out of range.
pub fn sqrt_residual(x: f64, s: f64) -> f64 {
    if x.is_nan() || x < 0.0 || out_of_range(s) && s != 0.0 || x.is_infinite() {
        return f64::NAN;
    }
    (-s).mul_add(s, x)
}

/// Estimated root error `sqrt(x) - s`.
pub fn sqrt_err(x: f64, s: f64) -> f64 {
    let r = sqrt_residual(x, s);
    if s == 0.0 && r == 0.0 {
        return 0.0;
    }
    r / (2.0 * s)
}

/// Narrowing cast and its exact error, recovered by widening the result back
/// and subtracting (exact by Sterbenz).
pub fn cast_err_64to32(x: f64) -> (f32, f64) {
    let x32 = x as f32;
    let w = x32 as f64;
    if !x32.is_finite() || x32.is_subnormal() || (x32 == 0.0 && x != 0.0) || out_of_range(x) {
        return (x32, f64::NAN);
    }
    (x32, x - w)
}

/// Rounding-error estimate of a single operation in the engine's convention:
/// exact error for add/sub/mul/cast, the FMA residual for div/sqrt, zero for
/// the exact operators.
pub fn local_error(op: FpOp, args: &[f64], result: f64) -> f64 {
    match op {
        FpOp::Add => two_sum(args[0], args[1]).mu,
        FpOp::Sub => two_sum(args[0], -args[1]).mu,
        FpOp::Mul => two_prod(args[0], args[1]).mu,
        FpOp::Div => div_residual(args[0], args[1], result),
        FpOp::Sqrt => sqrt_residual(args[0], result),
        FpOp::Cast64To32 => cast_err_64to32(args[0]).1,
        FpOp::Fabs | FpOp::Neg | FpOp::Cast32To64 => {
            if out_of_range(result) && result != 0.0 {
                f64::NAN
            } else {
                0.0
            }
        }
    }
}

/// Magic rounding constants: adding and subtracting one of these rounds to an
/// integer in binary64 (`1.5 * 2^52`) or binary32 (`1.5 * 2^23`, widened).
pub const ROUND_MAGIC_64: f64 = 6755399441055744.0;
pub const ROUND_MAGIC_32: f64 = 12582912.0;

fn is_round_magic(c: f64) -> bool {
    let a = c.abs();
    a == ROUND_MAGIC_64 || a == ROUND_MAGIC_32
}

/// Which side of a binary operator a literal operand sat on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpProvenance {
    pub op: FpOp,
    pub id: OpId,
    /// Literal operand of the producing operation, bit-exact.
    pub constant: Option<(f64, Side)>,
}

impl OpProvenance {
    /// Provenance of an add/sub whose operands are described by `lhs_lit` and
    /// `rhs_lit` (literal values, if the operand was a literal).
    pub fn new(op: FpOp, id: OpId, lhs_lit: Option<f64>, rhs_lit: Option<f64>) -> Self {
        let constant = match (lhs_lit, rhs_lit) {
            (_, Some(c)) => Some((c, Side::Right)),
            (Some(c), None) => Some((c, Side::Left)),
            _ => None,
        };
        OpProvenance { op, id, constant }
    }

    /// Signed amount this add/sub contributed through its constant operand.
    fn shift(&self) -> Option<f64> {
        let (c, side) = self.constant?;
        match (self.op, side) {
            (FpOp::Add, _) => Some(c),
            (FpOp::Sub, Side::Right) => Some(-c),
            _ => None,
        }
    }
}

/// Shape of one operand as seen by the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operand<'a> {
    Literal(f64),
    Value(Option<&'a OpProvenance>),
}

/// Recognizes the second half of `(x + C) - C` and its sign variants, with
/// `C` one of the magic constants. `op` is the current operation with operands
/// `lhs` and `rhs`. Returns the OpId of the first half on a match.
///
/// The check is purely structural: the magnitude of `x` is the programmer's
/// business, and the intermediate may have other uses.
pub fn detect_round_trick(op: FpOp, lhs: Operand<'_>, rhs: Operand<'_>) -> Option<OpId> {
    let (prev, shift) = match (op, lhs, rhs) {
        (FpOp::Add, Operand::Value(p), Operand::Literal(c))
        | (FpOp::Add, Operand::Literal(c), Operand::Value(p)) => (p?, c),
        (FpOp::Sub, Operand::Value(p), Operand::Literal(c)) => (p?, -c),
        _ => return None,
    };
    let first = prev.shift()?;
    if is_round_magic(first) && first.to_bits() == (-shift).to_bits() {
        Some(prev.id)
    } else {
        None
    }
}

/// Signed constant added by the second half of a matched rounding trick.
pub fn trick_shift(op: FpOp, lhs: Operand<'_>, rhs: Operand<'_>) -> f64 {
    match (op, lhs, rhs) {
        (FpOp::Add, _, Operand::Literal(c)) | (FpOp::Add, Operand::Literal(c), _) => c,
        (FpOp::Sub, _, Operand::Literal(c)) => -c,
        _ => 0.0,
    }
}

/// Spacing of the binary64 grid at `x`: `2^(exponent(x) - 52)`, or the
/// smallest subnormal for zero and subnormals.
pub fn ulp_of(x: f64) -> f64 {
    let bits = x.abs().to_bits();
    let exp = (bits >> 52) as i32;
    if exp == 0 {
        f64::from_bits(1)
    } else if exp >= 0x7ff {
        f64::NAN
    } else if exp > 52 {
        f64::from_bits(((exp - 52) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (exp - 1))
    }
}

/// `log2(ulp_of(x))` for finite `x`.
pub fn ulp_exponent(x: f64) -> i64 {
    let exp = ((x.to_bits() >> 52) & 0x7ff) as i64;
    if exp == 0 {
        -1074
    } else {
        exp - 1075
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn q(x: f64) -> BigRational {
        BigRational::from_float(x).unwrap()
    }

    /// Decimal-free rational for `m * 2^e`.
    fn pow2(e: i32) -> BigRational {
        if e >= 0 {
            BigRational::from_integer(BigInt::from(1) << e as usize)
        } else {
            BigRational::new(BigInt::from(1), BigInt::from(1) << (-e) as usize)
        }
    }

    /// Deterministic stream of normal doubles with exponents in `[-ex, ex]`.
    fn normals(seed: u64, ex: i32, n: usize) -> Vec<f64> {
        use rand_core::{RngCore, SeedableRng};
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let e = (rng.next_u64() % (2 * ex as u64 + 1)) as i32 - ex;
                let s = rng.next_u64() >> 63;
                f64::from_bits((s << 63) | (((e + 1023) as u64) << 52) | (rng.next_u64() >> 12))
            })
            .collect()
    }

    #[test]
    fn two_sum_examples() {
        assert_eq!(two_sum(1e99, 1.0), EftResult { result: 1e99, mu: 1.0 });
        assert_eq!(two_sum(1.0, 2.0), EftResult { result: 3.0, mu: 0.0 });
        let r = two_sum(0.1, 0.2);
        assert_eq!(q(r.result) + q(r.mu), q(0.1) + q(0.2));
        assert!(r.mu != 0.0);
    }

    #[test]
    fn two_prod_examples() {
        assert_eq!(two_prod(2.0, 3.0), EftResult { result: 6.0, mu: 0.0 });
        let a = 1.0 + f64::EPSILON;
        assert_eq!(two_prod(a, a).mu, 2f64.powi(-104));
        let b = 3.0 * 2f64.powi(-27) + 1.0;
        let r = two_prod(b, b);
        assert_eq!(q(r.result) + q(r.mu), q(b) * q(b));
        assert_eq!(two_prod_fma(b, b), two_prod_dekker(b, b));
    }

    #[test]
    fn exactness_against_rationals() {
        let xs = normals(11, 60, 20_000);
        let ys = normals(12, 60, 20_000);
        for (&a, &b) in xs.iter().zip(&ys) {
            let s = two_sum(a, b);
            assert_eq!(q(s.result) + q(s.mu), q(a) + q(b), "{a:e} + {b:e}");
            let p = two_prod(a, b);
            assert_eq!(q(p.result) + q(p.mu), q(a) * q(b), "{a:e} * {b:e}");
            assert_eq!(two_prod_fma(a, b), two_prod_dekker(a, b));
        }
    }

    #[test]
    fn strategy_is_stable() {
        assert_eq!(prod_strategy(), prod_strategy());
    }

    #[test]
    fn poisoning() {
        assert!(two_sum(f64::MAX, f64::MAX).mu.is_nan());
        assert!(two_sum(f64::INFINITY, 1.0).mu.is_nan());
        assert!(two_prod(1e300, 1e300).mu.is_nan());
        assert!(two_prod(1e-300, 1e-300).mu.is_nan());
        assert!(div_err(1.0, 0.0, f64::INFINITY).is_nan());
        assert!(sqrt_err(-1.0, f64::NAN).is_nan());
        assert!(cast_err_64to32(1e300).1.is_nan());
        assert!(cast_err_64to32(1e-300).1.is_nan());
        assert!(local_error(FpOp::Neg, &[f64::INFINITY], f64::NEG_INFINITY).is_nan());
    }

    #[test]
    fn div_examples() {
        assert_eq!(div_err(6.0, 3.0, 2.0), 0.0);
        let third = 1.0 / 3.0;
        let mu = div_err(1.0, 3.0, third);
        let exact = q(1.0) / q(3.0) - q(third);
        let ulp_mu = q(ulp_of(mu));
        assert!((q(mu) - exact).abs() <= ulp_mu);
        let fifth = 2.0 / 10.0;
        let mu = div_err(2.0, 10.0, fifth);
        let exact = q(2.0) / q(10.0) - q(fifth);
        assert_eq!(mu > 0.0, exact > q(0.0));
        assert_eq!(div_residual(1.0, 3.0, third), third.mul_add(3.0, -1.0));
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(sqrt_err(4.0, 2.0), 0.0);
        assert_eq!(sqrt_err(0.0, 0.0), 0.0);
        let s = 1e99f64.sqrt();
        assert_eq!(sqrt_err(1e99, s), 1.3144752779492117e32);
    }

    #[test]
    fn cast_examples() {
        assert_eq!(cast_err_64to32(1.0), (1.0f32, 0.0));
        let x = 1.0 + 2f64.powi(-24);
        assert_eq!(cast_err_64to32(x), (1.0f32, 2f64.powi(-24)));
        let (x32, mu) = cast_err_64to32(0.1);
        assert_eq!(q(mu) + q(x32 as f64), q(0.1));
        assert_eq!(mu, 0.1 - (0.1f32 as f64));
    }

    #[test]
    fn cast_round_trip() {
        for x in normals(5, 100, 5000) {
            let (x32, mu) = cast_err_64to32(x);
            assert_eq!(x32, x as f32);
            assert_eq!(q(mu) + q(x32 as f64), q(x));
        }
    }

    #[test]
    fn ulp_values() {
        assert_eq!(ulp_of(1.0), f64::EPSILON);
        assert_eq!(ulp_of(-1.5), f64::EPSILON);
        assert_eq!(ulp_of(0.0), f64::from_bits(1));
        assert_eq!(ulp_of(f64::MIN_POSITIVE), f64::from_bits(1));
        assert_eq!(ulp_of(2f64.powi(-1022) * 2.0), f64::from_bits(2));
        assert_eq!(q(ulp_of(1e99)), pow2(276));
        for x in [1.0, 1e99, 3.0e-310, 0.0, 6755399441055744.5] {
            assert_eq!(ulp_of(x), 2f64.powi(ulp_exponent(x) as i32));
        }
    }

    fn prov(op: FpOp, id: u64, l: Option<f64>, r: Option<f64>) -> OpProvenance {
        OpProvenance::new(op, OpId(id), l, r)
    }

    #[test]
    fn round_trick_patterns() {
        let c = ROUND_MAGIC_64;
        let t = prov(FpOp::Add, 4, None, Some(c));
        let v = Operand::Value(Some(&t));
        assert_eq!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c)), Some(OpId(4)));
        assert_eq!(detect_round_trick(FpOp::Add, v, Operand::Literal(-c)), Some(OpId(4)));
        assert_eq!(detect_round_trick(FpOp::Add, Operand::Literal(-c), v), Some(OpId(4)));
        assert_eq!(detect_round_trick(FpOp::Sub, v, Operand::Literal(1.0)), None);
        assert_eq!(detect_round_trick(FpOp::Sub, Operand::Literal(c), v), None);
        assert_eq!(detect_round_trick(FpOp::Add, v, Operand::Literal(c)), None);

        let t = prov(FpOp::Add, 0, Some(c), None);
        let v = Operand::Value(Some(&t));
        assert!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c)).is_some());

        let t = prov(FpOp::Sub, 1, None, Some(c));
        let v = Operand::Value(Some(&t));
        assert!(detect_round_trick(FpOp::Add, v, Operand::Literal(c)).is_some());
        assert!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c)).is_none());

        let c32 = ROUND_MAGIC_32 as f32 as f64;
        let t = prov(FpOp::Add, 2, None, Some(c32));
        let v = Operand::Value(Some(&t));
        assert!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c32)).is_some());
        assert!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c)).is_none());

        let t = prov(FpOp::Mul, 3, None, Some(c));
        let v = Operand::Value(Some(&t));
        assert!(detect_round_trick(FpOp::Sub, v, Operand::Literal(c)).is_none());
        assert!(detect_round_trick(FpOp::Sub, Operand::Value(None), Operand::Literal(c)).is_none());
    }

    #[test]
    fn round_trick_actual_values() {
        let c = ROUND_MAGIC_64;
        assert_eq!((3.7 + c) - c, 4.0);
        let big = 2f64.powi(53);
        assert_eq!((big + c) - c, big);
        assert_eq!(two_sum(big, c).mu, 0.0);
        assert_eq!(two_sum(big + c, -c).mu, 0.0);
    }

    proptest! {
        #[test]
        fn div_sqrt_error_matches_wide_oracle(
            m1 in 1u64..(1u64 << 52), m2 in 1u64..(1u64 << 52), e in -40i32..40
        ) {
            let x = f64::from_bits(((1023 + e) as u64) << 52 | m1);
            let y = f64::from_bits(1023u64 << 52 | m2);
            let qv = x / y;
            let mu = div_err(x, y, qv);
            let exact = q(x) / q(y) - q(qv);
            prop_assert!((q(mu) - exact).abs() <= q(ulp_of(mu)));

            let s = x.sqrt();
            let mu = sqrt_err(x, s);
            // (sqrt(x) - s) = (x - s^2) / (sqrt(x) + s); bound the gap to the
            // exact value through the residual, which is exact in rationals.
            let r = q(x) - q(s) * q(s);
            prop_assert_eq!(q(sqrt_residual(x, s)), r.clone());
            let lo = r.clone() / (q(s) * q(2.0) + q(ulp_of(s)));
            let hi = r / (q(s) * q(2.0) - q(ulp_of(s)));
            let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
            let slack = q(ulp_of(mu));
            prop_assert!(q(mu) >= lo - slack.clone() && q(mu) <= hi + slack);
        }
    }
}
