//! Residue functions in the form `e_z = A*mu + B*e_x + C*e_y`, contributor
//! tracking, and the cancellation/absorption flags that trigger residue
//! override.

mod flags;
mod ops;

use serde::{Deserialize, Serialize};

use crate::lang::OpId;

pub use flags::{detect_absorption, set_flags, update_contributors};
pub use ops::{
    residue_abs, residue_add, residue_cast, residue_div, residue_mul, residue_neg, residue_sqrt,
    residue_sub, terms_for,
};

/// Residue of one value plus the bookkeeping used to resolve absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residue {
    pub value: f64,
    /// `None` plays the role of the dummy contributor `-1`.
    pub max_err_op: Option<OpId>,
    pub snd_err_op: Option<OpId>,
    pub is_absorbed: bool,
    pub is_zero: bool,
}

impl Residue {
    /// Residue of an exactly known value.
    pub const EXACT: Residue = Residue {
        value: 0.0,
        max_err_op: None,
        snd_err_op: None,
        is_absorbed: false,
        is_zero: true,
    };

    pub const POISONED: Residue = Residue {
        value: f64::NAN,
        max_err_op: None,
        snd_err_op: None,
        is_absorbed: false,
        is_zero: false,
    };

    pub fn is_poisoned(&self) -> bool {
        self.value.is_nan()
    }

    /// Residue whose entire value is attributed to `op`, as used for
    /// overridden residues.
    pub fn introduced(op: OpId, value: f64, cfg: &EngineConfig) -> Residue {
        let d = TermDecomposition {
            intro: value,
            amp1: 0.0,
            amp2: 0.0,
        };
        set_flags(op, &d, &Residue::EXACT, &Residue::EXACT, cfg)
    }
}

/// The three signed terms of a residue function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermDecomposition {
    /// `A * mu`
    pub intro: f64,
    /// `B * e_x`
    pub amp1: f64,
    /// `C * e_y`; zero for unary operators.
    pub amp2: f64,
}

impl TermDecomposition {
    pub fn value(&self) -> f64 {
        (self.intro + self.amp1) + self.amp2
    }

    pub fn abs_intro_err(&self) -> f64 {
        self.intro.abs()
    }

    pub fn abs_amp_err1(&self) -> f64 {
        self.amp1.abs()
    }

    pub fn abs_amp_err2(&self) -> f64 {
        self.amp2.abs()
    }

    pub fn is_finite(&self) -> bool {
        self.intro.is_finite() && self.amp1.is_finite() && self.amp2.is_finite()
    }
}

/// `(i_x*, j_x*, i_y*, j_y*, k)`: the two leading contributors of each input
/// residue of the detecting operation `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbsorptionRecord {
    pub ix: Option<OpId>,
    pub jx: Option<OpId>,
    pub iy: Option<OpId>,
    pub jy: Option<OpId>,
    pub k: OpId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Condition number `(|A mu| + |B e_x| + |C e_y|) / |e_z|` above which a
    /// residue counts as cancelled.
    pub cond_threshold: f64,
    /// Slack, in ULPs of the residue, within which the largest term alone
    /// explains the residue.
    pub absorb_ulps: f64,
    /// Warnings fire at `2^warn_ulps` ULPs.
    pub warn_ulps: i32,
    pub max_dyn_ops: u64,
    /// Propagate `is_absorbed` from the input that supplies `max_err_op`.
    pub inherit_absorbed: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            cond_threshold: 2f64.powi(40),
            absorb_ulps: 4.0,
            warn_ulps: 45,
            max_dyn_ops: 10_000_000,
            inherit_absorbed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("condition threshold must be greater than 1")]
    CondThreshold,
    #[error("absorption slack must be at least 1 ULP")]
    AbsorbUlps,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.cond_threshold > 1.0) {
            return Err(ConfigError::CondThreshold);
        }
        if !(self.absorb_ulps >= 1.0) {
            return Err(ConfigError::AbsorbUlps);
        }
        Ok(())
    }
}

/// Residue-function variants. The presets reproduce the full engine and the
/// two reimplemented sanitizer baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    /// Subtraction computes `mu + e_x + e_y`.
    pub sub_bug: bool,
    /// Division adds the rounding term instead of subtracting it.
    pub div_bug: bool,
    /// Keep the `e_x * e_y` term of multiplication.
    pub higher_order_mul: bool,
    /// Sign-aware absolute value.
    pub sign_aware_abs: bool,
    /// Square-root denominator `sqrt(x) + sqrt(x + e_x)` instead of `2z`.
    pub root_sum_sqrt: bool,
    /// Instrument narrowing casts.
    pub cast_errors: bool,
    /// Recognize the add/subtract rounding trick.
    pub round_trick: bool,
}

impl Mode {
    pub const REPO: Mode = Mode {
        sub_bug: false,
        div_bug: false,
        higher_order_mul: true,
        sign_aware_abs: true,
        root_sum_sqrt: true,
        cast_errors: true,
        round_trick: true,
    };

    pub const EFTSAN_FIXED: Mode = Mode {
        sub_bug: false,
        div_bug: false,
        higher_order_mul: false,
        sign_aware_abs: false,
        root_sum_sqrt: false,
        cast_errors: false,
        round_trick: false,
    };

    pub const EFTSAN_BUGGY: Mode = Mode {
        sub_bug: true,
        div_bug: true,
        ..Mode::EFTSAN_FIXED
    };
}
