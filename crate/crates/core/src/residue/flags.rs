use crate::eft::ulp_of;
use crate::lang::OpId;

use super::{AbsorptionRecord, EngineConfig, Residue, TermDecomposition};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Term {
    Intro,
    Amp1,
    Amp2,
}

fn largest(d: &TermDecomposition) -> Term {
    let (i, a1, a2) = (d.abs_intro_err(), d.abs_amp_err1(), d.abs_amp_err2());
    if i >= a1.max(a2) {
        Term::Intro
    } else if a1 >= a2 {
        Term::Amp1
    } else {
        Term::Amp2
    }
}

/// Largest and second-largest contributors. Ties go to `e_z`, then `e_x`,
/// then `e_y`. A term of magnitude zero contributes nothing, and the second
/// slot never repeats the first.
pub fn update_contributors(
    d: &TermDecomposition,
    cur: OpId,
    ex: &Residue,
    ey: &Residue,
) -> (Option<OpId>, Option<OpId>) {
    let (i, a1, a2) = (d.abs_intro_err(), d.abs_amp_err1(), d.abs_amp_err2());
    let id = |t: Term| match t {
        Term::Intro if i > 0.0 => Some(cur),
        Term::Amp1 if a1 > 0.0 => ex.max_err_op,
        Term::Amp2 if a2 > 0.0 => ey.max_err_op,
        _ => None,
    };
    let max = largest(d);
    let (snd, third) = match max {
        Term::Intro if a1 >= a2 => (Term::Amp1, Term::Amp2),
        Term::Intro => (Term::Amp2, Term::Amp1),
        Term::Amp1 if i >= a2 => (Term::Intro, Term::Amp2),
        Term::Amp1 => (Term::Amp2, Term::Intro),
        Term::Amp2 if i >= a1 => (Term::Intro, Term::Amp1),
        Term::Amp2 => (Term::Amp1, Term::Intro),
    };
    let max_id = id(max);
    let snd_id = match id(snd) {
        Some(s) if Some(s) != max_id => Some(s),
        _ => id(third).filter(|t| Some(*t) != max_id),
    };
    (max_id, snd_id)
}

/// Builds the residue for `d`: value, contributors and both flags.
pub fn set_flags(
    cur: OpId,
    d: &TermDecomposition,
    ex: &Residue,
    ey: &Residue,
    cfg: &EngineConfig,
) -> Residue {
    let value = d.value();
    if value.is_nan() || !d.is_finite() || !value.is_finite() {
        return Residue::POISONED;
    }
    let (max_err_op, snd_err_op) = update_contributors(d, cur, ex, ey);
    let total = d.abs_intro_err() + d.abs_amp_err1() + d.abs_amp_err2();
    let is_zero = value == 0.0 || total / value.abs() > cfg.cond_threshold;

    let top = largest(d);
    let (lead, others_nonzero) = match top {
        Term::Intro => (d.intro, d.amp1 != 0.0 || d.amp2 != 0.0),
        Term::Amp1 => (d.amp1, d.intro != 0.0 || d.amp2 != 0.0),
        Term::Amp2 => (d.amp2, d.intro != 0.0 || d.amp1 != 0.0),
    };
    let direct = others_nonzero && (value - lead).abs() <= cfg.absorb_ulps * ulp_of(value);
    let inherited = cfg.inherit_absorbed
        && match top {
            Term::Intro => false,
            Term::Amp1 => d.amp1 != 0.0 && ex.is_absorbed,
            Term::Amp2 => d.amp2 != 0.0 && ey.is_absorbed,
        };
    Residue {
        value,
        max_err_op,
        snd_err_op,
        is_absorbed: direct || inherited,
        is_zero,
    }
}

/// Fires when the fresh residue looks cancelled and absorbed, unless both
/// inputs were clean (a benign cancellation).
pub fn detect_absorption(
    cur: OpId,
    ez: &Residue,
    ex: &Residue,
    ey: &Residue,
) -> Option<AbsorptionRecord> {
    if ez.is_poisoned() || !(ez.is_zero && ez.is_absorbed) {
        return None;
    }
    if !ex.is_absorbed && !ey.is_absorbed {
        return None;
    }
    Some(AbsorptionRecord {
        ix: ex.max_err_op,
        jx: ex.snd_err_op,
        iy: ey.max_err_op,
        jy: ey.snd_err_op,
        k: cur,
    })
}
