//! Interchangeable residue backends behind the interpreter's shadow hook.

pub mod bigfloat;
pub mod dd;
mod engine;
mod shadow;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::lang::{execute, ExecConfig, ExecError, OpEvent, OpId, Program, ShadowHook, Trace};
use crate::residue::{AbsorptionRecord, EngineConfig, Mode, Residue};

pub use engine::{match_trick, EngineHook, EngineShadow, Origin, RoControls};
pub use shadow::{DdHook, DdShadow, OracleHook, OracleShadow};

pub const DEFAULT_ORACLE_BITS: u32 = 512;
pub const MIN_ORACLE_BITS: u32 = 128;
pub const MAX_ORACLE_BITS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BackendId {
    Repo,
    EftsanFixed,
    EftsanBuggy,
    Oracle(u32),
    DoubleDouble,
}

impl BackendId {
    pub const ORACLE: BackendId = BackendId::Oracle(DEFAULT_ORACLE_BITS);

    /// Residue-function mode of the engine-based backends.
    pub fn mode(self) -> Option<Mode> {
        match self {
            BackendId::Repo => Some(Mode::REPO),
            BackendId::EftsanFixed => Some(Mode::EFTSAN_FIXED),
            BackendId::EftsanBuggy => Some(Mode::EFTSAN_BUGGY),
            _ => None,
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendId::Repo => f.write_str("repo"),
            BackendId::EftsanFixed => f.write_str("eftsan-fixed"),
            BackendId::EftsanBuggy => f.write_str("eftsan-buggy"),
            BackendId::Oracle(p) => write!(f, "oracle:{p}"),
            BackendId::DoubleDouble => f.write_str("dd"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendParseError {
    #[error("unknown backend '{0}' (expected repo, eftsan-fixed, eftsan-buggy, oracle[:BITS], dd)")]
    Unknown(String),
    #[error("oracle precision {0} outside [{MIN_ORACLE_BITS}, {MAX_ORACLE_BITS}]")]
    Precision(u32),
}

impl FromStr for BackendId {
    type Err = BackendParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "repo" => return Ok(BackendId::Repo),
            "eftsan-fixed" => return Ok(BackendId::EftsanFixed),
            "eftsan-buggy" => return Ok(BackendId::EftsanBuggy),
            "oracle" => return Ok(BackendId::ORACLE),
            "dd" | "double-double" => return Ok(BackendId::DoubleDouble),
            _ => {}
        }
        let bits = lower
            .strip_prefix("oracle:")
            .and_then(|p| p.parse::<u32>().ok())
            .ok_or_else(|| BackendParseError::Unknown(s.to_string()))?;
        if !(MIN_ORACLE_BITS..=MAX_ORACLE_BITS).contains(&bits) {
            return Err(BackendParseError::Precision(bits));
        }
        Ok(BackendId::Oracle(bits))
    }
}

/// Per-execution knobs shared by all backends.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions<'a> {
    pub engine: EngineConfig,
    /// Rounding-trick recognition in the residue engine; the shadow backends
    /// always treat the trick as intended rounding.
    pub round_trick: bool,
    pub ro: Option<&'a RoControls>,
    pub timing: bool,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            engine: EngineConfig::default(),
            round_trick: true,
            ro: None,
            timing: false,
        }
    }
}

/// Everything one execution produced.
#[derive(Debug, Clone, Default)]
pub struct BackendRun {
    pub output: f64,
    pub trace: Trace,
    /// Full residue records (engine backends only).
    pub residues: Vec<Residue>,
    pub absorptions: Vec<AbsorptionRecord>,
    pub temp_overrides: BTreeMap<OpId, f64>,
    /// Time spent inside the shadow hook, if requested.
    pub hook_time: Option<Duration>,
}

/// Wraps a hook and accumulates the wall time spent in its operation
/// callback.
pub struct Timed<H> {
    pub inner: H,
    pub elapsed: Duration,
}

impl<H: ShadowHook> ShadowHook for Timed<H> {
    type Shadow = H::Shadow;

    fn constant(&mut self, value: f64) -> H::Shadow {
        self.inner.constant(value)
    }

    fn input(&mut self, index: usize, value: f64) -> H::Shadow {
        self.inner.input(index, value)
    }

    fn operation(&mut self, event: &OpEvent, operands: &[&H::Shadow]) -> H::Shadow {
        let start = Instant::now();
        let s = self.inner.operation(event, operands);
        self.elapsed += start.elapsed();
        s
    }

    fn residue(&self, shadow: &H::Shadow) -> f64 {
        self.inner.residue(shadow)
    }
}

fn exec_with<H: ShadowHook>(
    program: &Program,
    inputs: &[f64],
    hook: H,
    opts: &RunOptions<'_>,
) -> Result<(f64, Trace, H, Option<Duration>), ExecError> {
    let cfg = ExecConfig {
        max_dyn_ops: opts.engine.max_dyn_ops,
    };
    if opts.timing {
        let mut timed = Timed {
            inner: hook,
            elapsed: Duration::ZERO,
        };
        let ex = execute(program, inputs, &mut timed, &cfg)?;
        Ok((ex.output, ex.trace, timed.inner, Some(timed.elapsed)))
    } else {
        let mut hook = hook;
        let ex = execute(program, inputs, &mut hook, &cfg)?;
        Ok((ex.output, ex.trace, hook, None))
    }
}

/// Runs `program` once under `backend`.
pub fn run_backend(
    program: &Program,
    inputs: &[f64],
    backend: BackendId,
    opts: &RunOptions<'_>,
) -> Result<BackendRun, ExecError> {
    match backend {
        BackendId::Oracle(p) => {
            let (output, trace, _, hook_time) = exec_with(program, inputs, OracleHook::new(p), opts)?;
            Ok(BackendRun {
                output,
                trace,
                hook_time,
                ..BackendRun::default()
            })
        }
        BackendId::DoubleDouble => {
            let (output, trace, _, hook_time) = exec_with(program, inputs, DdHook, opts)?;
            Ok(BackendRun {
                output,
                trace,
                hook_time,
                ..BackendRun::default()
            })
        }
        engine => {
            let mut mode = engine.mode().expect("engine backend");
            mode.round_trick &= opts.round_trick;
            let hook = EngineHook::new(mode, opts.engine, opts.ro);
            let (output, trace, hook, hook_time) = exec_with(program, inputs, hook, opts)?;
            Ok(BackendRun {
                output,
                trace,
                residues: hook.residues,
                absorptions: hook.absorptions,
                temp_overrides: hook.temp_overrides,
                hook_time,
            })
        }
    }
}

#[cfg(test)]
mod tests;
