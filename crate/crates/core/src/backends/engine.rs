//! Residue-engine hook: the full debugger and the sanitizer baselines, with
//! the per-run silence/probe/override controls.

use std::collections::{BTreeMap, BTreeSet};

use crate::eft::{self, detect_round_trick, OpProvenance, Operand};
use crate::lang::{FpOp, OpEvent, OpId, ShadowHook};
use crate::residue::{
    detect_absorption, set_flags, terms_for, AbsorptionRecord, EngineConfig, Mode, Residue,
    TermDecomposition,
};

/// What the rounding-trick detector needs to know about a value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Origin {
    pub literal: Option<f64>,
    pub prov: Option<OpProvenance>,
}

impl Origin {
    pub fn literal(v: f64) -> Self {
        Origin {
            literal: Some(v),
            prov: None,
        }
    }

    pub fn operand(&self) -> Operand<'_> {
        match self.literal {
            Some(v) => Operand::Literal(v),
            None => Operand::Value(self.prov.as_ref()),
        }
    }

    /// Provenance of the value produced by `event` from operands with these
    /// origins.
    pub fn produced(event: &OpEvent, operands: &[&Origin]) -> Self {
        let lit = |i: usize| operands.get(i).and_then(|o| o.literal);
        let (l, r) = if event.op.arity() == 2 {
            (lit(0), lit(1))
        } else {
            (None, None)
        };
        Origin {
            literal: None,
            prov: Some(OpProvenance::new(event.op, event.id, l, r)),
        }
    }
}

/// Matches the second half of a rounding trick; returns the index of the
/// operand produced by the first half.
pub fn match_trick(event: &OpEvent, origins: &[&Origin]) -> Option<usize> {
    if !matches!(event.op, FpOp::Add | FpOp::Sub) {
        return None;
    }
    let (l, r) = (origins[0].operand(), origins[1].operand());
    detect_round_trick(event.op, l, r)?;
    Some(if origins[0].literal.is_some() { 1 } else { 0 })
}

/// Silence/probe/override sets for one execution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoControls {
    pub silent: BTreeSet<OpId>,
    pub probe: BTreeSet<OpId>,
    pub overrides: BTreeMap<OpId, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineShadow {
    pub residue: Residue,
    pub origin: Origin,
    /// Residue this add/sub would have without its own rounding error; read
    /// by a matching second half of the rounding trick.
    trick_base: Option<Residue>,
}

pub struct EngineHook<'a> {
    mode: Mode,
    cfg: EngineConfig,
    ro: Option<&'a RoControls>,
    pub residues: Vec<Residue>,
    pub absorptions: Vec<AbsorptionRecord>,
    pub temp_overrides: BTreeMap<OpId, f64>,
}

impl<'a> EngineHook<'a> {
    pub fn new(mode: Mode, cfg: EngineConfig, ro: Option<&'a RoControls>) -> Self {
        EngineHook {
            mode,
            cfg,
            ro,
            residues: Vec::new(),
            absorptions: Vec::new(),
            temp_overrides: BTreeMap::new(),
        }
    }

    fn exact(origin: Origin) -> EngineShadow {
        EngineShadow {
            residue: Residue::EXACT,
            origin,
            trick_base: None,
        }
    }

    fn build(&self, cur: OpId, d: Option<TermDecomposition>, ex: &Residue, ey: &Residue) -> Residue {
        match d {
            Some(d) => set_flags(cur, &d, ex, ey, &self.cfg),
            None => Residue::POISONED,
        }
    }
}

impl ShadowHook for EngineHook<'_> {
    type Shadow = EngineShadow;

    fn constant(&mut self, value: f64) -> EngineShadow {
        EngineHook::exact(Origin::literal(value))
    }

    fn input(&mut self, _: usize, _: f64) -> EngineShadow {
        EngineHook::exact(Origin::default())
    }

    fn operation(&mut self, event: &OpEvent, operands: &[&EngineShadow]) -> EngineShadow {
        let cur = event.id;
        let (op, args, result) = (event.op, event.args(), event.result);
        let ex = operands[0].residue;
        let ey = operands.get(1).map_or(Residue::EXACT, |s| s.residue);
        let origins: Vec<&Origin> = operands.iter().map(|s| &s.origin).collect();

        let mut mu = eft::local_error(op, args, result);
        let silenced = self.ro.is_some_and(|ro| ro.silent.contains(&cur));
        if silenced && !mu.is_nan() {
            mu = 0.0;
        }

        let trick = if self.mode.round_trick {
            match_trick(event, &origins)
        } else {
            None
        };
        let mut residue = match trick {
            Some(i) if !mu.is_nan() => {
                let base = operands[i].trick_base.unwrap_or(operands[i].residue);
                let d = (!base.is_poisoned()).then_some(TermDecomposition {
                    intro: 0.0,
                    amp1: base.value,
                    amp2: 0.0,
                });
                self.build(cur, d, &base, &Residue::EXACT)
            }
            _ => {
                let d = terms_for(op, &self.mode, args, result, mu, &ex, &ey);
                self.build(cur, d, &ex, &ey)
            }
        };

        let trick_base = (self.mode.round_trick
            && matches!(op, FpOp::Add | FpOp::Sub)
            && origins.iter().any(|o| o.literal.is_some())
            && !mu.is_nan())
        .then(|| {
            let d = terms_for(op, &self.mode, args, result, 0.0, &ex, &ey);
            self.build(cur, d, &ex, &ey)
        });

        if let Some(ro) = self.ro {
            if let Some(&v) = ro.overrides.get(&cur) {
                residue = if residue.is_poisoned() {
                    Residue::POISONED
                } else {
                    Residue::introduced(cur, v, &self.cfg)
                };
            }
        }
        if let Some(rec) = detect_absorption(cur, &residue, &ex, &ey) {
            self.absorptions.push(rec);
        }
        if self.ro.is_some_and(|ro| ro.probe.contains(&cur)) {
            self.temp_overrides.insert(cur, residue.value);
        }
        self.residues.push(residue);
        EngineShadow {
            residue,
            origin: Origin::produced(event, &origins),
            trick_base,
        }
    }

    fn residue(&self, shadow: &EngineShadow) -> f64 {
        shadow.residue.value
    }
}
