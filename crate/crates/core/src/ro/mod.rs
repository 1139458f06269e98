//! Re-execution orchestration: detect absorbed residues, silence their
//! largest contributors, probe the affected ops, and override their
//! residues in a final run.

mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

pub use state::{input_key, load_state, save_state, state_path, StateError, STATE_VERSION};

use crate::backends::{run_backend, BackendId, RoControls, RunOptions};
use crate::lang::{ExecError, FpOp, OpId, Program, Trace};
use crate::report::{compute_warnings, WarnConfig, WarningSet};
use crate::residue::{AbsorptionRecord, EngineConfig, Residue};

pub const DEFAULT_CAP: u32 = 20;

/// Everything the driver knows about one (program, input) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunState {
    pub silent_ops: BTreeSet<OpId>,
    pub probe_ops: BTreeSet<OpId>,
    pub temp_res_override: BTreeMap<OpId, f64>,
    pub res_override: BTreeMap<OpId, f64>,
    pub max_err_ops: BTreeSet<OpId>,
    pub snd_err_ops: BTreeSet<OpId>,
    pub run_count: u64,
    pub input_key: String,
}

impl RunState {
    pub fn new(input_key: impl Into<String>) -> Self {
        RunState {
            input_key: input_key.into(),
            ..RunState::default()
        }
    }

    fn controls(&self) -> RoControls {
        RoControls {
            silent: self.silent_ops.clone(),
            probe: self.probe_ops.clone(),
            overrides: self.res_override.clone(),
        }
    }

    /// Guard shared by the driver and RESOLVE: no largest contributor
    /// is already someone's second-largest and vice versa.
    fn admissible(&self, a: &AbsorptionRecord) -> bool {
        let hit = |set: &BTreeSet<OpId>, ids: [Option<OpId>; 2]| ids.iter().flatten().any(|i| set.contains(i));
        !hit(&self.snd_err_ops, [a.ix, a.iy]) && !hit(&self.max_err_ops, [a.jx, a.jy])
    }

    /// Records the contributors of `a`; true if a new op got silenced.
    fn silence(&mut self, a: &AbsorptionRecord) -> bool {
        let mut grew = false;
        for i in [a.ix, a.iy].into_iter().flatten() {
            grew |= self.silent_ops.insert(i);
            self.max_err_ops.insert(i);
        }
        self.snd_err_ops.extend([a.jx, a.jy].into_iter().flatten());
        grew
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output: f64,
    pub trace: Trace,
    pub residues: Vec<Residue>,
    /// Ordered by detecting op.
    pub absorptions: Vec<AbsorptionRecord>,
    pub temp_res_override: BTreeMap<OpId, f64>,
    pub warnings: WarningSet,
}

#[derive(Debug, thiserror::Error)]
pub enum RoError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("nondeterministic program: op {op} was {expected} in the first run but {found} now")]
    Nondeterminism {
        op: u64,
        expected: String,
        found: String,
    },
    #[error("backend {0} has no residue engine to re-execute")]
    Backend(BackendId),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("state file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct DriverConfig {
    pub backend: BackendId,
    pub engine: EngineConfig,
    pub round_trick: bool,
    pub warn: WarnConfig,
    /// Maximum number of executions, detection runs included.
    pub cap: u32,
    /// Where to persist state between runs, and the program name used as the
    /// subdirectory.
    pub state_dir: Option<(PathBuf, String)>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            backend: BackendId::Repo,
            engine: EngineConfig::default(),
            round_trick: true,
            warn: WarnConfig::default(),
            cap: DEFAULT_CAP,
            state_dir: None,
        }
    }
}

/// Executes one program on one input vector repeatedly, checking that every
/// run performs the same operations as the first.
pub struct Session<'a> {
    program: &'a Program,
    inputs: &'a [f64],
    cfg: &'a DriverConfig,
    reference: Option<Vec<FpOp>>,
    pub executions: u32,
}

impl<'a> Session<'a> {
    pub fn new(program: &'a Program, inputs: &'a [f64], cfg: &'a DriverConfig) -> Result<Self, RoError> {
        if cfg.backend.mode().is_none() {
            return Err(RoError::Backend(cfg.backend));
        }
        Ok(Session {
            program,
            inputs,
            cfg,
            reference: None,
            executions: 0,
        })
    }

    fn persist(&self, state: &RunState) -> Result<RunState, RoError> {
        let Some((dir, name)) = &self.cfg.state_dir else {
            return Ok(state.clone());
        };
        let path = state_path(dir, name, &state.input_key);
        let io = |source| RoError::Io {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(path.parent().unwrap()).map_err(io)?;
        std::fs::write(&path, save_state(state)).map_err(io)?;
        let text = std::fs::read_to_string(&path).map_err(io)?;
        Ok(load_state(&text)?)
    }

    /// One EXECUTE: persists `state`, reloads it, and runs with its sets.
    pub fn execute(&mut self, state: &mut RunState) -> Result<RunOutcome, RoError> {
        state.run_count += 1;
        let loaded = self.persist(state)?;
        let ro = loaded.controls();
        let opts = RunOptions {
            engine: self.cfg.engine,
            round_trick: self.cfg.round_trick,
            ro: Some(&ro),
            timing: false,
        };
        let run = run_backend(self.program, self.inputs, self.cfg.backend, &opts)?;
        self.executions += 1;

        let ops: Vec<FpOp> = run.trace.ops().collect();
        match &self.reference {
            None => self.reference = Some(ops),
            Some(first) => {
                if let Some(i) = (0..first.len().max(ops.len())).find(|&i| first.get(i) != ops.get(i)) {
                    let name = |o: Option<&FpOp>| o.map_or("absent".to_string(), |o| o.to_string());
                    return Err(RoError::Nondeterminism {
                        op: i as u64,
                        expected: name(first.get(i)),
                        found: name(ops.get(i)),
                    });
                }
            }
        }
        let mut absorptions = run.absorptions;
        absorptions.sort_by_key(|a| a.k);
        let warnings = compute_warnings(&run.trace, &self.cfg.warn);
        Ok(RunOutcome {
            output: run.output,
            trace: run.trace,
            residues: run.residues,
            absorptions,
            temp_res_override: run.temp_overrides,
            warnings,
        })
    }

    /// RESOLVE: re-executes with the current silence/probe sets until no
    /// probed op is still absorbed. Stops early, returning the last probes
    /// and `true`, once only `budget_end` executions remain.
    pub fn resolve(&mut self, state: &mut RunState, budget_end: u32) -> Result<(BTreeMap<OpId, f64>, bool), RoError> {
        loop {
            state.max_err_ops.clear();
            state.snd_err_ops.clear();
            let out = self.execute(state)?;
            state.temp_res_override = out.temp_res_override.clone();
            let mut still_cancel = false;
            for a in &out.absorptions {
                if state.probe_ops.contains(&a.k) && state.admissible(a) {
                    still_cancel |= state.silence(a);
                }
            }
            if !still_cancel {
                return Ok((out.temp_res_override, false));
            }
            if self.executions >= budget_end {
                return Ok((out.temp_res_override, true));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveResult {
    /// The first, uncorrected run.
    pub initial: RunOutcome,
    /// The last run; its residues carry every override found.
    pub outcome: RunOutcome,
    pub executions: u32,
    /// Override phases completed.
    pub phases: u32,
    /// The cap or a RESOLVE budget cut the search short.
    pub truncated: bool,
    pub state: RunState,
}

/// Single execution under `state`.
pub fn execute_run(program: &Program, inputs: &[f64], state: &mut RunState, cfg: &DriverConfig) -> Result<RunOutcome, RoError> {
    Session::new(program, inputs, cfg)?.execute(state)
}

/// The full driver for one input vector. `program_text` keys the state.
pub fn repo_drive(program: &Program, program_text: &str, inputs: &[f64], cfg: &DriverConfig) -> Result<DriveResult, RoError> {
    let cap = cfg.cap.max(1);
    let mut session = Session::new(program, inputs, cfg)?;
    let mut state = RunState::new(input_key(program_text, inputs));
    let mut initial = None;
    let mut phases = 0;
    let mut truncated = false;
    let outcome = loop {
        let out = session.execute(&mut state)?;
        if initial.is_none() {
            initial = Some(out.clone());
        }
        let mut has_cancel = false;
        for a in &out.absorptions {
            if state.admissible(a) {
                has_cancel = true;
                state.silence(a);
                state.probe_ops.insert(a.k);
            }
        }
        if !has_cancel {
            break out;
        }
        // A phase needs one RESOLVE run and one more detection run.
        if session.executions + 2 > cap {
            truncated = true;
            break out;
        }
        let (temp, cut) = session.resolve(&mut state, cap - 1)?;
        truncated |= cut;
        state.res_override.extend(temp);
        state.silent_ops.clear();
        state.probe_ops.clear();
        state.max_err_ops.clear();
        state.snd_err_ops.clear();
        state.temp_res_override.clear();
        phases += 1;
    };
    Ok(DriveResult {
        initial: initial.unwrap(),
        outcome,
        executions: session.executions,
        phases,
        truncated,
        state,
    })
}

#[cfg(test)]
mod tests;
