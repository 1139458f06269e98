use crate::lang::{FpOp, OpId};

use super::{set_flags, EngineConfig, Mode, Residue, TermDecomposition};

fn poisoned(ex: &Residue, ey: &Residue, mu: f64) -> bool {
    mu.is_nan() || ex.is_poisoned() || ey.is_poisoned()
}

fn td(intro: f64, amp1: f64, amp2: f64) -> Option<TermDecomposition> {
    Some(TermDecomposition { intro, amp1, amp2 })
}

/// Terms of the residue function for `op`.
///
/// `mu` is the local error in the engine's convention: the exact rounding
/// error for add/sub/mul/cast, the FMA residual for div and sqrt (see
/// `eft::local_error`). `args` and `result` are actual values. Returns `None`
/// when the residue is poisoned.
pub fn terms_for(
    op: FpOp,
    mode: &Mode,
    args: &[f64],
    result: f64,
    mu: f64,
    ex: &Residue,
    ey: &Residue,
) -> Option<TermDecomposition> {
    if poisoned(ex, ey, mu) {
        return None;
    }
    let (x, e_x, e_y) = (args[0], ex.value, ey.value);
    match op {
        FpOp::Add => td(mu, e_x, e_y),
        FpOp::Sub => td(mu, e_x, if mode.sub_bug { e_y } else { -e_y }),
        FpOp::Mul => {
            let y = args[1];
            let (b, c) = if mode.higher_order_mul {
                (y + e_y / 2.0, x + e_x / 2.0)
            } else {
                (y, x)
            };
            td(mu, b * e_x, c * e_y)
        }
        FpOp::Div => {
            let d = args[1] + e_y;
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            let intro = if mode.div_bug { mu / d } else { -mu / d };
            td(intro, e_x / d, -result * e_y / d)
        }
        FpOp::Sqrt => {
            let d = if mode.root_sum_sqrt {
                let shifted = x + e_x;
                if shifted < 0.0 {
                    return None;
                }
                x.sqrt() + shifted.sqrt()
            } else {
                2.0 * result
            };
            if d == 0.0 {
                return if mu == 0.0 && e_x == 0.0 {
                    td(0.0, 0.0, 0.0)
                } else {
                    None
                };
            }
            td(mu / d, e_x / d, 0.0)
        }
        FpOp::Fabs => {
            let shifted = x + e_x;
            let amp = if mode.sign_aware_abs && x.is_sign_negative() == shifted.is_sign_negative()
            {
                1f64.copysign(x) * e_x
            } else {
                shifted.abs() - x.abs()
            };
            td(0.0, amp, 0.0)
        }
        FpOp::Neg => td(0.0, -e_x, 0.0),
        FpOp::Cast64To32 => td(if mode.cast_errors { mu } else { 0.0 }, e_x, 0.0),
        FpOp::Cast32To64 => td(0.0, e_x, 0.0),
    }
}

fn finish(
    op: FpOp,
    mode: &Mode,
    cur: OpId,
    args: &[f64],
    result: f64,
    mu: f64,
    ex: &Residue,
    ey: &Residue,
    cfg: &EngineConfig,
) -> Residue {
    match terms_for(op, mode, args, result, mu, ex, ey) {
        Some(d) => set_flags(cur, &d, ex, ey, cfg),
        None => Residue::POISONED,
    }
}

pub fn residue_add(cur: OpId, mu: f64, ex: &Residue, ey: &Residue, cfg: &EngineConfig) -> Residue {
    finish(FpOp::Add, &Mode::REPO, cur, &[0.0, 0.0], 0.0, mu, ex, ey, cfg)
}

pub fn residue_sub(
    cur: OpId,
    mu: f64,
    ex: &Residue,
    ey: &Residue,
    mode: &Mode,
    cfg: &EngineConfig,
) -> Residue {
    finish(FpOp::Sub, mode, cur, &[0.0, 0.0], 0.0, mu, ex, ey, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn residue_mul(
    cur: OpId,
    x: f64,
    y: f64,
    mu: f64,
    ex: &Residue,
    ey: &Residue,
    mode: &Mode,
    cfg: &EngineConfig,
) -> Residue {
    finish(FpOp::Mul, mode, cur, &[x, y], x * y, mu, ex, ey, cfg)
}

/// `r` is the residual `z*y - x` of the computed quotient `z`.
#[allow(clippy::too_many_arguments)]
pub fn residue_div(
    cur: OpId,
    x: f64,
    y: f64,
    z: f64,
    r: f64,
    ex: &Residue,
    ey: &Residue,
    mode: &Mode,
    cfg: &EngineConfig,
) -> Residue {
    finish(FpOp::Div, mode, cur, &[x, y], z, r, ex, ey, cfg)
}

/// `r` is the residual `x - z*z` of the computed root `z`.
pub fn residue_sqrt(
    cur: OpId,
    x: f64,
    z: f64,
    r: f64,
    ex: &Residue,
    mode: &Mode,
    cfg: &EngineConfig,
) -> Residue {
    finish(FpOp::Sqrt, mode, cur, &[x], z, r, ex, &Residue::EXACT, cfg)
}

pub fn residue_abs(cur: OpId, x: f64, ex: &Residue, mode: &Mode, cfg: &EngineConfig) -> Residue {
    finish(FpOp::Fabs, mode, cur, &[x], x.abs(), 0.0, ex, &Residue::EXACT, cfg)
}

pub fn residue_neg(cur: OpId, ex: &Residue, cfg: &EngineConfig) -> Residue {
    finish(FpOp::Neg, &Mode::REPO, cur, &[0.0], 0.0, 0.0, ex, &Residue::EXACT, cfg)
}

/// Narrowing (`narrow = true`, error `mu`) or widening cast.
pub fn residue_cast(
    cur: OpId,
    narrow: bool,
    mu: f64,
    ex: &Residue,
    mode: &Mode,
    cfg: &EngineConfig,
) -> Residue {
    let op = if narrow {
        FpOp::Cast64To32
    } else {
        FpOp::Cast32To64
    };
    finish(op, mode, cur, &[0.0], 0.0, mu, ex, &Residue::EXACT, cfg)
}
