//! Numerical warnings and false-report scoring.

use serde::{Deserialize, Serialize};

use crate::eft::ulp_of;
use crate::lang::{FpOp, OpId, Trace};

pub const DEFAULT_WARN_ULPS: i32 = 45;

/// How to measure a nonzero residue on a zero actual value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroActual {
    /// The residue is infinitely many ulps away; always warns.
    #[default]
    Infinite,
    /// Use the smallest subnormal as the ulp of zero.
    MinSubnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarnConfig {
    /// Warn when `|residue| >= 2^warn_ulps * ulp(actual)`.
    pub warn_ulps: i32,
    pub zero_actual: ZeroActual,
}

impl Default for WarnConfig {
    fn default() -> Self {
        WarnConfig {
            warn_ulps: DEFAULT_WARN_ULPS,
            zero_actual: ZeroActual::Infinite,
        }
    }
}

/// `|residue| / ulp(actual)`; NaN for poisoned residues.
pub fn ulp_count(actual: f64, residue: f64, zero: ZeroActual) -> f64 {
    if residue.is_nan() || !actual.is_finite() {
        return f64::NAN;
    }
    if residue == 0.0 {
        return 0.0;
    }
    if actual == 0.0 && zero == ZeroActual::Infinite {
        return f64::INFINITY;
    }
    residue.abs() / ulp_of(actual)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub op_id: OpId,
    pub op: FpOp,
    pub actual: f64,
    pub residue: f64,
    pub ulp_count: f64,
}

/// Warnings of one trace, plus the ulp count of every op so that scoring
/// can apply a threshold band.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WarningSet {
    pub threshold: f64,
    pub warnings: Vec<Warning>,
    pub ulp_counts: Vec<f64>,
    pub ops: Vec<FpOp>,
}

impl WarningSet {
    pub fn len(&self) -> usize {
        self.warnings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = OpId> + '_ {
        self.warnings.iter().map(|w| w.op_id)
    }

    pub fn contains(&self, id: OpId) -> bool {
        self.warnings.binary_search_by_key(&id, |w| w.op_id).is_ok()
    }

    fn warns(&self, i: usize) -> bool {
        self.ulp_counts[i] >= self.threshold
    }
}

pub fn compute_warnings(trace: &Trace, cfg: &WarnConfig) -> WarningSet {
    let threshold = 2f64.powi(cfg.warn_ulps);
    let mut set = WarningSet {
        threshold,
        warnings: Vec::new(),
        ulp_counts: Vec::with_capacity(trace.len()),
        ops: Vec::with_capacity(trace.len()),
    };
    for r in &trace.records {
        let n = ulp_count(r.result, r.residue, cfg.zero_actual);
        if n >= threshold {
            set.warnings.push(Warning {
                op_id: r.id,
                op: r.op,
                actual: r.result,
                residue: r.residue,
                ulp_count: n,
            });
        }
        set.ulp_counts.push(n);
        set.ops.push(r.op);
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffKind {
    FalsePositive,
    FalseNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpDiff {
    /// Index of the input vector, when scores are aggregated over inputs.
    pub input: usize,
    pub op_id: OpId,
    pub op: FpOp,
    pub kind: DiffKind,
    pub test_ulps: f64,
    pub truth_ulps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreCard {
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Ops skipped because the truth sits near the threshold.
    pub excluded: usize,
    pub diffs: Vec<OpDiff>,
}

impl ScoreCard {
    pub fn total(&self) -> usize {
        self.false_positives + self.false_negatives
    }

    pub fn merge(&mut self, other: &ScoreCard) {
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.excluded += other.excluded;
        self.diffs.extend_from_slice(&other.diffs);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("warning sets come from different traces ({test} vs {truth} ops)")]
pub struct TraceMismatch {
    pub test: usize,
    pub truth: usize,
}

/// Compares `test` against `truth` op by op. With a margin `m`, ops whose
/// truth ulp count lies within `2^±m` of the threshold count for neither side.
pub fn score(test: &WarningSet, truth: &WarningSet, margin: Option<i32>) -> Result<ScoreCard, TraceMismatch> {
    if test.ops != truth.ops {
        return Err(TraceMismatch {
            test: test.ops.len(),
            truth: truth.ops.len(),
        });
    }
    let band = margin.map(|m| (truth.threshold * 2f64.powi(-m), truth.threshold * 2f64.powi(m)));
    let mut card = ScoreCard::default();
    for i in 0..truth.ops.len() {
        let (t, o) = (test.warns(i), truth.warns(i));
        if t == o {
            continue;
        }
        let n = truth.ulp_counts[i];
        if band.is_some_and(|(lo, hi)| n >= lo && n <= hi) {
            card.excluded += 1;
            continue;
        }
        let kind = if t {
            card.false_positives += 1;
            DiffKind::FalsePositive
        } else {
            card.false_negatives += 1;
            DiffKind::FalseNegative
        };
        card.diffs.push(OpDiff {
            input: 0,
            op_id: OpId(i as u64),
            op: truth.ops[i],
            kind,
            test_ulps: test.ulp_counts[i],
            truth_ulps: n,
        });
    }
    Ok(card)
}
