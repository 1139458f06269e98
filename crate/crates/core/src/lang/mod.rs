//! The kernel language: parsing, validation, and deterministic execution.

mod ast;
mod inputs;
mod interp;
mod parse;

use thiserror::Error;

pub use ast::{CmpOp, Cond, Expr, FpOp, Function, LoopVar, Program, Slot};
pub use inputs::{
    format_input_file, generate_inputs, parse_input_file, InputSpec, ParamSpec, SignPolicy,
};
pub use interp::{
    execute, ExecConfig, Execution, NullHook, OpEvent, OpId, ShadowHook, Trace, TraceRecord,
};
pub use parse::{parse_literal, parse_program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unbound variable '{name}'")]
    UnboundVariable { name: String, line: usize, col: usize },
    #[error("{line}:{col}: unknown operator or function '{name}'")]
    UnknownOperator { name: String, line: usize, col: usize },
    #[error("{line}:{col}: '{name}' expects {expected} argument(s), found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        line: usize,
        col: usize,
    },
    #[error("recursive call cycle: {}", cycle.join(" -> "))]
    RecursiveCall { cycle: Vec<String> },
    #[error("program defines no functions")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("entry function takes {expected} input(s), got {found}")]
    InputArity { expected: usize, found: usize },
    #[error("dynamic step limit of {limit} exceeded after {ops} floating-point operations")]
    StepLimit { limit: u64, ops: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("parameter {index}: invalid exponent range [{exp_min}, {exp_max}]")]
    ExponentRange { index: usize, exp_min: i32, exp_max: i32 },
    #[error("input count must be positive")]
    ZeroCount,
    #[error("line {line}: cannot parse value '{token}'")]
    BadValue { line: usize, token: String },
}
