//! Single-program runs as reported by the `run` subcommand.

use std::time::Duration;

use serde::Serialize;

use super::eval::{oracle_warnings, EvalConfig, EvalError};
use super::warnings::{compute_warnings, score, ScoreCard, Warning};
use crate::backends::{run_backend, BackendId, RunOptions};
use crate::lang::Program;
use crate::par;
use crate::ro::{repo_drive, DriverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct InputRun {
    pub index: usize,
    pub inputs: Vec<f64>,
    pub output: f64,
    pub executions: u32,
    pub truncated: bool,
    pub warnings: Vec<Warning>,
    pub score: ScoreCard,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hook_time: Option<Duration>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub program: String,
    pub backend: String,
    pub ro: bool,
    pub oracle: String,
    pub margin: Option<i32>,
    pub total: ScoreCard,
    pub executions: u64,
    pub runs: Vec<InputRun>,
}

impl RunReport {
    pub fn false_reports(&self) -> usize {
        self.total.total()
    }
}

/// Runs `program` on every input vector under `backend` and scores each run
/// against the oracle. Re-execution applies to the engine backends only.
pub fn run_program(
    name: &str,
    source: &str,
    program: &Program,
    inputs: &[Vec<f64>],
    backend: BackendId,
    ro: bool,
    cfg: &EvalConfig,
) -> Result<RunReport, EvalError> {
    let ro = ro && backend.mode().is_some();
    let indexed: Vec<(usize, &Vec<f64>)> = inputs.iter().enumerate().collect();
    let runs = par::map(cfg.schedule, &indexed, |&(index, x)| {
        let truth = oracle_warnings(program, x, cfg)?;
        let (output, warnings, executions, truncated, hook_time) = if ro {
            let dcfg = DriverConfig {
                backend,
                engine: cfg.engine,
                round_trick: cfg.round_trick,
                warn: cfg.warn,
                cap: cfg.cap,
                state_dir: cfg.state_dir.clone().map(|d| (d, name.to_string())),
            };
            let r = repo_drive(program, source, x, &dcfg)?;
            (r.outcome.output, r.outcome.warnings, r.executions, r.truncated, None)
        } else {
            let opts = RunOptions {
                engine: cfg.engine,
                round_trick: cfg.round_trick,
                ro: None,
                timing: cfg.timing,
            };
            let run = run_backend(program, x, backend, &opts)?;
            let w = compute_warnings(&run.trace, &cfg.warn);
            (run.output, w, 1, false, run.hook_time)
        };
        let mut card = score(&warnings, &truth, cfg.margin)?;
        for d in &mut card.diffs {
            d.input = index;
        }
        Ok::<_, EvalError>(InputRun {
            index,
            inputs: x.clone(),
            output,
            executions,
            truncated,
            warnings: warnings.warnings,
            score: card,
            hook_time,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut total = ScoreCard::default();
    for r in &runs {
        total.merge(&r.score);
    }
    Ok(RunReport {
        program: name.to_string(),
        backend: backend.to_string(),
        ro,
        oracle: cfg.oracle.to_string(),
        margin: cfg.margin,
        executions: runs.iter().map(|r| r.executions as u64).sum(),
        total,
        runs,
    })
}
