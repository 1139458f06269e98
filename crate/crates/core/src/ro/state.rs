//! Versioned, line-oriented persistence of [`RunState`].
//!
//! ```text
//! resdbg-state v1
//! key 3f2a9c0d17e4b6a1
//! runs 2
//! silent 1
//! silent 2
//! probe 3
//! temp 3 3597A9B873C4B28B
//! ```
//!
//! Sections appear in the order silent, probe, temp, override, maxerr,
//! snderr; ids ascend within a section; values are the big-endian hex of
//! the binary64 bit pattern. Only this canonical form is accepted.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::RunState;
use crate::lang::OpId;

pub const STATE_HEADER: &str = "resdbg-state";
pub const STATE_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("state file version '{0}' is not supported (expected {STATE_VERSION})")]
    Version(String),
    #[error("corrupt state file at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

const SECTIONS: [&str; 6] = ["silent", "probe", "temp", "override", "maxerr", "snderr"];

pub fn save_state(s: &RunState) -> String {
    let mut out = format!("{STATE_HEADER} {STATE_VERSION}\nkey {}\nruns {}\n", s.input_key, s.run_count);
    let mut ids = |tag: &str, set: &BTreeSet<OpId>| {
        for id in set {
            out.push_str(&format!("{tag} {}\n", id.0));
        }
    };
    ids("silent", &s.silent_ops);
    ids("probe", &s.probe_ops);
    let mut vals = |tag: &str, map: &BTreeMap<OpId, f64>| {
        for (id, v) in map {
            out.push_str(&format!("{tag} {} {:016X}\n", id.0, v.to_bits()));
        }
    };
    vals("temp", &s.temp_res_override);
    vals("override", &s.res_override);
    let mut ids = |tag: &str, set: &BTreeSet<OpId>| {
        for id in set {
            out.push_str(&format!("{tag} {}\n", id.0));
        }
    };
    ids("maxerr", &s.max_err_ops);
    ids("snderr", &s.snd_err_ops);
    out
}

fn canonical_u64(tok: &str) -> Option<u64> {
    let n: u64 = tok.parse().ok()?;
    (n.to_string() == tok).then_some(n)
}

pub fn load_state(text: &str) -> Result<RunState, StateError> {
    let corrupt = |line: usize, msg: &str| StateError::Corrupt {
        line,
        msg: msg.to_string(),
    };
    if !text.ends_with('\n') {
        return Err(corrupt(text.lines().count().max(1), "missing final newline"));
    }
    let lines: Vec<&str> = text[..text.len() - 1].split('\n').collect();
    match lines[0].split_once(' ') {
        Some((STATE_HEADER, STATE_VERSION)) => {}
        Some((STATE_HEADER, v)) => return Err(StateError::Version(v.to_string())),
        _ => return Err(corrupt(1, "missing header")),
    }
    let key = lines
        .get(1)
        .and_then(|l| l.strip_prefix("key "))
        .filter(|k| !k.is_empty() && !k.contains(char::is_whitespace))
        .ok_or_else(|| corrupt(2, "expected 'key <id>'"))?;
    let runs = lines
        .get(2)
        .and_then(|l| l.strip_prefix("runs "))
        .and_then(canonical_u64)
        .ok_or_else(|| corrupt(3, "expected 'runs <n>'"))?;
    let mut state = RunState::new(key);
    state.run_count = runs;

    let mut section = 0;
    let mut last: Option<OpId> = None;
    for (i, line) in lines.iter().enumerate().skip(3) {
        let n = i + 1;
        let mut toks = line.split(' ');
        let tag = toks.next().unwrap_or("");
        let pos = SECTIONS
            .iter()
            .position(|s| *s == tag)
            .ok_or_else(|| corrupt(n, "unknown record"))?;
        if pos < section {
            return Err(corrupt(n, "section out of order"));
        }
        if pos > section {
            section = pos;
            last = None;
        }
        let id = toks
            .next()
            .and_then(canonical_u64)
            .map(OpId)
            .ok_or_else(|| corrupt(n, "bad op id"))?;
        if last.is_some_and(|l| l >= id) {
            return Err(corrupt(n, "ids not strictly ascending"));
        }
        last = Some(id);
        let value = match tag {
            "temp" | "override" => {
                let hex = toks.next().ok_or_else(|| corrupt(n, "missing value"))?;
                if hex.len() != 16 || !hex.bytes().all(|b| b.is_ascii_digit() || (b'A'..=b'F').contains(&b)) {
                    return Err(corrupt(n, "value must be 16 uppercase hex digits"));
                }
                Some(f64::from_bits(u64::from_str_radix(hex, 16).unwrap()))
            }
            _ => None,
        };
        if toks.next().is_some() {
            return Err(corrupt(n, "trailing fields"));
        }
        match (tag, value) {
            ("silent", _) => state.silent_ops.insert(id),
            ("probe", _) => state.probe_ops.insert(id),
            ("temp", Some(v)) => state.temp_res_override.insert(id, v).is_none(),
            ("override", Some(v)) => state.res_override.insert(id, v).is_none(),
            ("maxerr", _) => state.max_err_ops.insert(id),
            _ => state.snd_err_ops.insert(id),
        };
    }
    Ok(state)
}

/// Identifies a (program, input vector) pair: a hex prefix of the SHA-256
/// of the program text and the input bit patterns.
pub fn input_key(program_text: &str, inputs: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(program_text.as_bytes());
    h.update([0u8]);
    for x in inputs {
        h.update(x.to_bits().to_be_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `<dir>/<program>/<key>.v1`
pub fn state_path(dir: &Path, program: &str, key: &str) -> PathBuf {
    dir.join(program).join(format!("{key}.{STATE_VERSION}"))
}
