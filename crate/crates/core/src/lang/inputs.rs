//! Seeded input generation and the input-vector file format.
//!
//! Generation uses SplitMix64 (Steele, Lea and Flood's 64-bit mixer, the
//! `rand_xoshiro` implementation). For every vector, for every parameter in
//! order, the generator draws:
//!
//! 1. one word for the exponent: `e_min + (w % (e_max - e_min + 1))`;
//! 2. one word for the significand: its top 52 bits;
//! 3. one word for the sign, only under [`SignPolicy::Mixed`]: bit 63.
//!
//! The value is assembled from those bit fields, so it is always a normal
//! binary64 number and the sequence is identical on every platform.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use super::InputError;
use crate::lang::parse::parse_literal;

pub const MIN_NORMAL_EXP: i32 = -1022;
pub const MAX_NORMAL_EXP: i32 = 1023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignPolicy {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub exp_min: i32,
    pub exp_max: i32,
    pub sign: SignPolicy,
}

impl ParamSpec {
    pub fn new(exp_min: i32, exp_max: i32, sign: SignPolicy) -> Self {
        ParamSpec {
            exp_min,
            exp_max,
            sign,
        }
    }

    pub fn positive(exp_min: i32, exp_max: i32) -> Self {
        Self::new(exp_min, exp_max, SignPolicy::Positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub seed: u64,
    pub count: usize,
    /// One entry per entry-function parameter.
    pub params: Vec<ParamSpec>,
}

impl InputSpec {
    pub fn validate(&self) -> Result<(), InputError> {
        if self.count == 0 {
            return Err(InputError::ZeroCount);
        }
        for (index, p) in self.params.iter().enumerate() {
            let in_range = |e: i32| (MIN_NORMAL_EXP..=MAX_NORMAL_EXP).contains(&e);
            if p.exp_min > p.exp_max || !in_range(p.exp_min) || !in_range(p.exp_max) {
                return Err(InputError::ExponentRange {
                    index,
                    exp_min: p.exp_min,
                    exp_max: p.exp_max,
                });
            }
        }
        Ok(())
    }
}

/// Generates `spec.count` input vectors.
pub fn generate_inputs(spec: &InputSpec) -> Result<Vec<Vec<f64>>, InputError> {
    spec.validate()?;
    let mut rng = SplitMix64::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut v = Vec::with_capacity(spec.params.len());
        for p in &spec.params {
            let span = (p.exp_max - p.exp_min) as u64 + 1;
            let exp = p.exp_min + (rng.next_u64() % span) as i32;
            let frac = rng.next_u64() >> 12;
            let negative = match p.sign {
                SignPolicy::Positive => false,
                SignPolicy::Negative => true,
                SignPolicy::Mixed => rng.next_u64() >> 63 == 1,
            };
            let bits = ((negative as u64) << 63) | (((exp + 1023) as u64) << 52) | frac;
            v.push(f64::from_bits(bits));
        }
        out.push(v);
    }
    Ok(out)
}

fn is_bit_pattern(tok: &str) -> bool {
    tok.len() == 16 && tok.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Parses an input file: one vector per line, values separated by
/// whitespace. A token of exactly 16 hex digits is a binary64 bit pattern;
/// anything else is a decimal literal. Blank lines and `#` comments are
/// skipped.
pub fn parse_input_file(text: &str) -> Result<Vec<Vec<f64>>, InputError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut v = Vec::new();
        for tok in line.split_whitespace() {
            let value = if is_bit_pattern(tok) {
                u64::from_str_radix(tok, 16).ok().map(f64::from_bits)
            } else {
                parse_literal(tok)
            };
            v.push(value.ok_or_else(|| InputError::BadValue {
                line: lineno + 1,
                token: tok.to_string(),
            })?);
        }
        out.push(v);
    }
    Ok(out)
}

/// Formats vectors as bit patterns, one vector per line.
pub fn format_input_file(vectors: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for v in vectors {
        let line: Vec<String> = v.iter().map(|x| format!("{:016X}", x.to_bits())).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}
