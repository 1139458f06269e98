//! Scoring backends against the oracle over a set of inputs.

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::Serialize;

use super::warnings::{compute_warnings, score, ScoreCard, TraceMismatch, WarnConfig, WarningSet};
use crate::backends::{run_backend, BackendId, RunOptions};
use crate::lang::{ExecError, OpId, Program};
use crate::par::{self, Schedule};
use crate::residue::EngineConfig;
use crate::ro::{repo_drive, DriverConfig, RoError, DEFAULT_CAP};

/// A backend, optionally driven by re-execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Subject {
    pub backend: BackendId,
    pub ro: bool,
}

impl Subject {
    pub fn plain(backend: BackendId) -> Self {
        Subject { backend, ro: false }
    }

    pub fn with_ro(backend: BackendId) -> Self {
        Subject { backend, ro: true }
    }

    /// The three engine configurations compared on the corpus.
    pub fn standard() -> Vec<Subject> {
        vec![
            Subject::with_ro(BackendId::Repo),
            Subject::plain(BackendId::EftsanFixed),
            Subject::plain(BackendId::EftsanBuggy),
        ]
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.backend)?;
        if self.ro {
            f.write_str("+ro")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub engine: EngineConfig,
    pub warn: WarnConfig,
    pub round_trick: bool,
    pub oracle: BackendId,
    /// Threshold band, in powers of two, excluded from scoring.
    pub margin: Option<i32>,
    pub cap: u32,
    pub state_dir: Option<PathBuf>,
    pub timing: bool,
    pub schedule: Schedule,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            engine: EngineConfig::default(),
            warn: WarnConfig::default(),
            round_trick: true,
            oracle: BackendId::ORACLE,
            margin: None,
            cap: DEFAULT_CAP,
            state_dir: None,
            timing: false,
            schedule: Schedule::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Ro(#[from] RoError),
    #[error(transparent)]
    Mismatch(#[from] TraceMismatch),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SubjectScore {
    pub subject: String,
    pub card: ScoreCard,
    /// Score of the first, uncorrected run (re-executed subjects only).
    pub initial: Option<ScoreCard>,
    pub warnings: usize,
    pub executions: u64,
    pub max_executions: u32,
    pub truncated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hook_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    pub name: String,
    pub inputs: usize,
    pub oracle: String,
    pub oracle_warnings: usize,
    pub margin: Option<i32>,
    pub subjects: Vec<SubjectScore>,
}

impl EntryReport {
    pub fn subject(&self, name: &str) -> Option<&SubjectScore> {
        self.subjects.iter().find(|s| s.subject == name)
    }
}

struct InputScore {
    card: ScoreCard,
    initial: Option<ScoreCard>,
    warnings: usize,
    executions: u32,
    truncated: bool,
    hook_time: Option<Duration>,
}

fn tag(mut card: ScoreCard, input: usize) -> ScoreCard {
    for d in &mut card.diffs {
        d.input = input;
    }
    card
}

fn run_subject(
    program: &Program,
    name: &str,
    source: &str,
    x: &[f64],
    subject: Subject,
    truth: &WarningSet,
    cfg: &EvalConfig,
) -> Result<InputScore, EvalError> {
    if subject.ro && subject.backend.mode().is_some() {
        let dcfg = DriverConfig {
            backend: subject.backend,
            engine: cfg.engine,
            round_trick: cfg.round_trick,
            warn: cfg.warn,
            cap: cfg.cap,
            state_dir: cfg.state_dir.clone().map(|d| (d, name.to_string())),
        };
        let r = repo_drive(program, source, x, &dcfg)?;
        Ok(InputScore {
            card: score(&r.outcome.warnings, truth, cfg.margin)?,
            initial: Some(score(&r.initial.warnings, truth, cfg.margin)?),
            warnings: r.outcome.warnings.len(),
            executions: r.executions,
            truncated: r.truncated,
            hook_time: None,
        })
    } else {
        let opts = RunOptions {
            engine: cfg.engine,
            round_trick: cfg.round_trick,
            ro: None,
            timing: cfg.timing,
        };
        let run = run_backend(program, x, subject.backend, &opts)?;
        let w = compute_warnings(&run.trace, &cfg.warn);
        Ok(InputScore {
            card: score(&w, truth, cfg.margin)?,
            initial: None,
            warnings: w.len(),
            executions: 1,
            truncated: false,
            hook_time: run.hook_time,
        })
    }
}

/// Oracle warnings for one input.
pub fn oracle_warnings(program: &Program, x: &[f64], cfg: &EvalConfig) -> Result<WarningSet, ExecError> {
    let opts = RunOptions {
        engine: cfg.engine,
        ..RunOptions::default()
    };
    let run = run_backend(program, x, cfg.oracle, &opts)?;
    Ok(compute_warnings(&run.trace, &cfg.warn))
}

/// Scores every subject against the oracle on every input. False reports
/// are summed over inputs.
pub fn evaluate(
    name: &str,
    source: &str,
    program: &Program,
    inputs: &[Vec<f64>],
    subjects: &[Subject],
    cfg: &EvalConfig,
) -> Result<EntryReport, EvalError> {
    let indexed: Vec<(usize, &Vec<f64>)> = inputs.iter().enumerate().collect();
    let per_input = par::map(cfg.schedule, &indexed, |&(i, x)| {
        let truth = oracle_warnings(program, x, cfg)?;
        let scores = subjects
            .iter()
            .map(|&s| run_subject(program, name, source, x, s, &truth, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        Ok::<_, EvalError>((i, truth.len(), scores))
    });

    let mut report = EntryReport {
        name: name.to_string(),
        inputs: inputs.len(),
        oracle: cfg.oracle.to_string(),
        oracle_warnings: 0,
        margin: cfg.margin,
        subjects: subjects
            .iter()
            .map(|s| SubjectScore {
                subject: s.to_string(),
                initial: s.ro.then(ScoreCard::default),
                hook_time: cfg.timing.then_some(Duration::ZERO),
                ..SubjectScore::default()
            })
            .collect(),
    };
    for r in per_input {
        let (i, truth_len, scores) = r?;
        report.oracle_warnings += truth_len;
        for (acc, s) in report.subjects.iter_mut().zip(scores) {
            acc.card.merge(&tag(s.card, i));
            if let (Some(a), Some(b)) = (acc.initial.as_mut(), s.initial) {
                a.merge(&tag(b, i));
            }
            acc.warnings += s.warnings;
            acc.executions += s.executions as u64;
            acc.max_executions = acc.max_executions.max(s.executions);
            acc.truncated += s.truncated as usize;
            if let (Some(a), Some(b)) = (acc.hook_time.as_mut(), s.hook_time) {
                *a += b;
            }
        }
    }
    Ok(report)
}

/// Oracle precision check: warning sets and residues at `bits` and `2*bits`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub bits: u32,
    pub inputs: usize,
    /// (input index, ops warned at one precision only)
    pub warning_mismatches: Vec<(usize, Vec<OpId>)>,
    /// Ops whose binary64 residue differs between the precisions.
    pub residue_mismatches: usize,
}

impl OracleCheck {
    pub fn stable(&self) -> bool {
        self.warning_mismatches.is_empty()
    }
}

pub fn oracle_check(
    name: &str,
    program: &Program,
    inputs: &[Vec<f64>],
    bits: u32,
    cfg: &EvalConfig,
) -> Result<OracleCheck, ExecError> {
    let opts = RunOptions {
        engine: cfg.engine,
        ..RunOptions::default()
    };
    let per_input = par::map(cfg.schedule, inputs, |x| {
        let lo = run_backend(program, x, BackendId::Oracle(bits), &opts)?;
        let hi = run_backend(program, x, BackendId::Oracle(2 * bits), &opts)?;
        let (wl, wh) = (compute_warnings(&lo.trace, &cfg.warn), compute_warnings(&hi.trace, &cfg.warn));
        let mut diff: Vec<OpId> = wl.ids().filter(|&i| !wh.contains(i)).collect();
        diff.extend(wh.ids().filter(|&i| !wl.contains(i)));
        diff.sort();
        let residues = lo
            .trace
            .records
            .iter()
            .zip(&hi.trace.records)
            .filter(|(a, b)| a.residue.to_bits() != b.residue.to_bits())
            .count();
        Ok::<_, ExecError>((diff, residues))
    });
    let mut check = OracleCheck {
        name: name.to_string(),
        bits,
        inputs: inputs.len(),
        warning_mismatches: Vec::new(),
        residue_mismatches: 0,
    };
    for (i, r) in per_input.into_iter().enumerate() {
        let (diff, residues) = r?;
        if !diff.is_empty() {
            check.warning_mismatches.push((i, diff));
        }
        check.residue_mismatches += residues;
    }
    Ok(check)
}
