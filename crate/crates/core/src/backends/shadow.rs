//! High-precision shadow backends: residues are the rounded difference
//! between a shadow of the ideal value and the actual value.

use super::bigfloat::BigFloat;
use super::dd::DoubleDouble;
use super::engine::{match_trick, Origin};
use crate::eft::{self, ulp_exponent, ulp_of};
use crate::lang::{FpOp, OpEvent, ShadowHook};

/// Ideal value under the rounding trick: the intermediate's shadow rounded
/// to the grid the machine used, then shifted by the second constant.
fn trick_shift(event: &OpEvent, trick_operand: usize) -> f64 {
    let c = event.args()[1 - trick_operand];
    match event.op {
        FpOp::Sub => -c,
        _ => c,
    }
}

#[derive(Debug, Clone)]
pub struct OracleShadow {
    /// `None` once poisoned.
    pub value: Option<BigFloat>,
    pub origin: Origin,
    residue: f64,
}

pub struct OracleHook {
    prec: u32,
}

impl OracleHook {
    pub fn new(prec: u32) -> Self {
        OracleHook { prec }
    }

    fn exact(&self, v: f64, origin: Origin) -> OracleShadow {
        OracleShadow {
            value: BigFloat::from_f64(v, self.prec).ok(),
            origin,
            residue: 0.0,
        }
    }

    fn ideal(&self, event: &OpEvent, operands: &[&OracleShadow], origins: &[&Origin]) -> Option<BigFloat> {
        let p = self.prec;
        let vals: Option<Vec<&BigFloat>> = operands.iter().map(|s| s.value.as_ref()).collect();
        let vals = vals?;
        if eft::local_error(event.op, event.args(), event.result).is_nan() {
            return None;
        }
        if let Some(i) = match_trick(event, origins) {
            let q_exp = ulp_exponent(event.args()[i]);
            let shift = BigFloat::from_f64(trick_shift(event, i), p).ok()?;
            return vals[i].round_to_quantum(q_exp).add(&shift, p).ok();
        }
        match event.op {
            FpOp::Add => vals[0].add(vals[1], p).ok(),
            FpOp::Sub => vals[0].sub(vals[1], p).ok(),
            FpOp::Mul => vals[0].mul(vals[1], p).ok(),
            FpOp::Div => vals[0].div(vals[1], p)?.ok(),
            FpOp::Sqrt => vals[0].sqrt(p)?.ok(),
            FpOp::Fabs => Some(vals[0].abs()),
            FpOp::Neg => Some(vals[0].neg()),
            FpOp::Cast64To32 | FpOp::Cast32To64 => Some(vals[0].clone()),
        }
    }
}

impl ShadowHook for OracleHook {
    type Shadow = OracleShadow;

    fn constant(&mut self, value: f64) -> OracleShadow {
        self.exact(value, Origin::literal(value))
    }

    fn input(&mut self, _: usize, value: f64) -> OracleShadow {
        self.exact(value, Origin::default())
    }

    fn operation(&mut self, event: &OpEvent, operands: &[&OracleShadow]) -> OracleShadow {
        let origins: Vec<&Origin> = operands.iter().map(|s| &s.origin).collect();
        let value = self.ideal(event, operands, &origins);
        let residue = match &value {
            Some(v) => v
                .sub(&BigFloat::from_f64_exact(event.result), self.prec + 128)
                .map_or(f64::NAN, |d| d.to_f64()),
            None => f64::NAN,
        };
        OracleShadow {
            value,
            origin: Origin::produced(event, &origins),
            residue,
        }
    }

    fn residue(&self, shadow: &OracleShadow) -> f64 {
        shadow.residue
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DdShadow {
    pub value: Option<DoubleDouble>,
    pub origin: Origin,
    residue: f64,
}

#[derive(Debug, Default)]
pub struct DdHook;

impl DdHook {
    fn ideal(event: &OpEvent, operands: &[&DdShadow], origins: &[&Origin]) -> Option<DoubleDouble> {
        let a = operands[0].value?;
        let b = match operands.get(1) {
            Some(s) => s.value?,
            None => DoubleDouble::from_f64(0.0),
        };
        if eft::local_error(event.op, event.args(), event.result).is_nan() {
            return None;
        }
        if let Some(i) = match_trick(event, origins) {
            let t = if i == 0 { a } else { b };
            let shift = DoubleDouble::from_f64(trick_shift(event, i));
            return Some(t.round_to_quantum(ulp_of(event.args()[i])).add(shift));
        }
        let v = match event.op {
            FpOp::Add => a.add(b),
            FpOp::Sub => a.sub(b),
            FpOp::Mul => a.mul(b),
            FpOp::Div => a.div(b),
            FpOp::Sqrt => a.sqrt(),
            FpOp::Fabs => a.abs(),
            FpOp::Neg => a.neg(),
            FpOp::Cast64To32 | FpOp::Cast32To64 => a,
        };
        v.is_finite().then_some(v)
    }
}

impl ShadowHook for DdHook {
    type Shadow = DdShadow;

    fn constant(&mut self, value: f64) -> DdShadow {
        DdShadow {
            value: Some(DoubleDouble::from_f64(value)),
            origin: Origin::literal(value),
            residue: 0.0,
        }
    }

    fn input(&mut self, _: usize, value: f64) -> DdShadow {
        DdShadow {
            value: Some(DoubleDouble::from_f64(value)),
            origin: Origin::default(),
            residue: 0.0,
        }
    }

    fn operation(&mut self, event: &OpEvent, operands: &[&DdShadow]) -> DdShadow {
        let origins: Vec<&Origin> = operands.iter().map(|s| &s.origin).collect();
        let value = DdHook::ideal(event, operands, &origins);
        DdShadow {
            value,
            origin: Origin::produced(event, &origins),
            residue: value.map_or(f64::NAN, |v| v.residue(event.result)),
        }
    }

    fn residue(&self, shadow: &DdShadow) -> f64 {
        shadow.residue
    }
}
