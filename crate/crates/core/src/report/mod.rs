//! Warnings, scoring against the oracle, reports, and the bundled corpus.

mod corpus;
mod eval;
mod render;
mod run;
mod warnings;

pub use corpus::{bundled_corpus, corpus_entry, CorpusEntry, CORPUS_INPUTS, CORPUS_SEED};
pub use eval::{
    evaluate, oracle_check, oracle_warnings, EntryReport, EvalConfig, EvalError, OracleCheck, Subject, SubjectScore,
};
pub use render::{render_entry, render_oracle_check, render_run, render_summary};
pub use run::{run_program, InputRun, RunReport};
pub use warnings::{
    compute_warnings, score, ulp_count, DiffKind, OpDiff, ScoreCard, TraceMismatch, WarnConfig, Warning,
    WarningSet, ZeroActual, DEFAULT_WARN_ULPS,
};
