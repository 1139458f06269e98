//! Double-double arithmetic: an unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi)/2`, giving roughly 106 significant bits.

use crate::eft::two_prod_fma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = fast_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn is_finite(&self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }

    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = fast_two_sum(s, e + t);
        DoubleDouble::renorm(s, e + f)
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = two_prod_fma(self.hi, o.hi) + (self.hi * o.lo + self.lo * o.hi);
        DoubleDouble::renorm(p, e)
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q2));
        let q3 = r.hi / o.hi;
        DoubleDouble::renorm(q1, q2).add(DoubleDouble::from_f64(q3))
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = self.hi * b;
        let e = two_prod_fma(self.hi, b) + self.lo * b;
        DoubleDouble::renorm(p, e)
    }

    /// One Newton step from the binary64 root.
    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble {
                hi: if self.hi == 0.0 { 0.0 } else { f64::NAN },
                lo: 0.0,
            };
        }
        let s = self.hi.sqrt();
        let sq = DoubleDouble::from_f64(s).mul_f64(s);
        let r = self.sub(sq);
        let corr = r.hi / (2.0 * s);
        DoubleDouble::renorm(s, corr)
    }

    /// Rounds to the nearest multiple of `q` (a power of two), ties to even.
    pub fn round_to_quantum(self, q: f64) -> Self {
        let n = (self.hi / q).round_ties_even();
        let base = n * q;
        let r = self.hi - base;
        let half = q / 2.0;
        let odd = (n % 2.0) != 0.0;
        let up = if r == half {
            self.lo > 0.0 || (self.lo == 0.0 && odd)
        } else {
            r + self.lo > half
        };
        let down = if r == -half {
            self.lo < 0.0 || (self.lo == 0.0 && odd)
        } else {
            r + self.lo < -half
        };
        let adj = if up {
            q
        } else if down {
            -q
        } else {
            0.0
        };
        DoubleDouble::from_f64(base + adj)
    }

    /// `fl((hi - actual) + lo)`.
    pub fn residue(self, actual: f64) -> f64 {
        (self.hi - actual) + self.lo
    }
}
