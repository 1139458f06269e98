//! Deterministic tree-walking interpreter with a shadow hook on every
//! floating-point operation.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Cond, Expr, FpOp, Program};
use super::ExecError;

/// Dynamic operation identifier: a counter that starts at zero for every
/// execution and increments once per executed floating-point operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub u64);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One executed floating-point operation, as seen by a hook.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpEvent {
    pub id: OpId,
    pub op: FpOp,
    args: [f64; 2],
    pub result: f64,
}

impl OpEvent {
    pub fn new(id: OpId, op: FpOp, args: &[f64], result: f64) -> Self {
        let mut a = [0.0; 2];
        a[..args.len()].copy_from_slice(args);
        OpEvent {
            id,
            op,
            args: a,
            result,
        }
    }

    /// Actual operand values.
    pub fn args(&self) -> &[f64] {
        &self.args[..self.op.arity()]
    }
}

/// Shadow-execution callbacks.
///
/// A hook attaches a shadow (a residue, a high-precision mirror, ...) to every
/// numeric value. It can never influence actual values or control flow.
pub trait ShadowHook {
    type Shadow: Clone;

    /// Shadow for a literal constant in the program text.
    fn constant(&mut self, value: f64) -> Self::Shadow;

    /// Shadow for the `index`-th entry parameter.
    fn input(&mut self, index: usize, value: f64) -> Self::Shadow;

    /// Called exactly once per executed floating-point operation.
    fn operation(&mut self, event: &OpEvent, operands: &[&Self::Shadow]) -> Self::Shadow;

    /// Residue carried by a shadow, recorded into the trace.
    fn residue(&self, shadow: &Self::Shadow) -> f64;
}

/// Hook that tracks nothing; residues are always zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullHook;

impl ShadowHook for NullHook {
    type Shadow = ();
    fn constant(&mut self, _: f64) {}
    fn input(&mut self, _: usize, _: f64) {}
    fn operation(&mut self, _: &OpEvent, _: &[&()]) {}
    fn residue(&self, _: &()) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub id: OpId,
    pub op: FpOp,
    args: [f64; 2],
    pub result: f64,
    pub residue: f64,
}

impl TraceRecord {
    pub fn new(id: OpId, op: FpOp, args: &[f64], result: f64, residue: f64) -> Self {
        let mut a = [0.0; 2];
        a[..args.len()].copy_from_slice(args);
        TraceRecord {
            id,
            op,
            args: a,
            result,
            residue,
        }
    }

    pub fn args(&self) -> &[f64] {
        &self.args[..self.op.arity()]
    }

    /// True if operator and all actual values are bit-identical.
    pub fn same_actuals(&self, other: &TraceRecord) -> bool {
        self.id == other.id
            && self.op == other.op
            && self.result.to_bits() == other.result.to_bits()
            && self
                .args()
                .iter()
                .zip(other.args())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Per-operation records in execution order; `records[i].id == OpId(i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: OpId) -> Option<&TraceRecord> {
        self.records.get(id.0 as usize)
    }

    /// True if both traces have the same operators and actual values.
    pub fn same_actuals(&self, other: &Trace) -> bool {
        self.len() == other.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_actuals(b))
    }

    pub fn ops(&self) -> impl Iterator<Item = FpOp> + '_ {
        self.records.iter().map(|r| r.op)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecConfig {
    /// Abort once this many floating-point operations plus loop iterations
    /// have executed.
    pub max_dyn_ops: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_dyn_ops: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Execution<S> {
    pub output: f64,
    pub output_shadow: S,
    pub trace: Trace,
}

struct Machine<'p, H: ShadowHook> {
    program: &'p Program,
    hook: &'p mut H,
    trace: Trace,
    next_id: u64,
    steps: u64,
    limit: u64,
}

type Frame<S> = Vec<Option<(f64, S)>>;

impl<H: ShadowHook> Machine<'_, H> {
    fn step(&mut self) -> Result<(), ExecError> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(ExecError::StepLimit {
                limit: self.limit,
                ops: self.next_id,
            });
        }
        Ok(())
    }

    fn num(&mut self, e: &Expr, frame: &mut Frame<H::Shadow>) -> Result<(f64, H::Shadow), ExecError> {
        match e {
            Expr::Num(v) => Ok((*v, self.hook.constant(*v))),
            Expr::Var(slot) => Ok(frame[*slot]
                .clone()
                .expect("resolver guarantees bound slots")),
            Expr::Op(op, args) => {
                let mut vals = [0.0f64; 2];
                let mut shadows = Vec::with_capacity(2);
                for (i, a) in args.iter().enumerate() {
                    let (v, s) = self.num(a, frame)?;
                    vals[i] = v;
                    shadows.push(s);
                }
                self.step()?;
                let vals = &vals[..args.len()];
                let result = op.apply(vals);
                let id = OpId(self.next_id);
                self.next_id += 1;
                let event = OpEvent::new(id, *op, vals, result);
                let refs: Vec<&H::Shadow> = shadows.iter().collect();
                let shadow = self.hook.operation(&event, &refs);
                let residue = self.hook.residue(&shadow);
                self.trace.records.push(TraceRecord {
                    id,
                    op: *op,
                    args: event.args,
                    result,
                    residue,
                });
                Ok((result, shadow))
            }
            Expr::Let { bindings, body } => {
                for (slot, value) in bindings {
                    let v = self.num(value, frame)?;
                    frame[*slot] = Some(v);
                }
                self.num(body, frame)
            }
            Expr::If {
                cond,
                then,
                otherwise,
            } => {
                if self.cond(cond, frame)? {
                    self.num(then, frame)
                } else {
                    self.num(otherwise, frame)
                }
            }
            Expr::While {
                cond,
                vars,
                body,
                sequential,
            } => {
                if *sequential {
                    for v in vars {
                        let x = self.num(&v.init, frame)?;
                        frame[v.slot] = Some(x);
                    }
                } else {
                    let mut inits = Vec::with_capacity(vars.len());
                    for v in vars {
                        inits.push(self.num(&v.init, frame)?);
                    }
                    for (v, x) in vars.iter().zip(inits) {
                        frame[v.slot] = Some(x);
                    }
                }
                while self.cond(cond, frame)? {
                    self.step()?;
                    if *sequential {
                        for v in vars {
                            let x = self.num(&v.update, frame)?;
                            frame[v.slot] = Some(x);
                        }
                    } else {
                        let mut next = Vec::with_capacity(vars.len());
                        for v in vars {
                            next.push(self.num(&v.update, frame)?);
                        }
                        for (v, x) in vars.iter().zip(next) {
                            frame[v.slot] = Some(x);
                        }
                    }
                }
                self.num(body, frame)
            }
            Expr::Call { func, args } => {
                let callee = &self.program.functions[*func];
                let mut callee_frame: Frame<H::Shadow> = vec![None; callee.slots];
                for (i, a) in args.iter().enumerate() {
                    callee_frame[i] = Some(self.num(a, frame)?);
                }
                self.num(&callee.body, &mut callee_frame)
            }
        }
    }

    fn cond(&mut self, c: &Cond, frame: &mut Frame<H::Shadow>) -> Result<bool, ExecError> {
        Ok(match c {
            Cond::Const(b) => *b,
            Cond::Cmp(op, a, b) => {
                let (x, _) = self.num(a, frame)?;
                let (y, _) = self.num(b, frame)?;
                op.eval(x, y)
            }
            Cond::And(cs) => {
                for c in cs {
                    if !self.cond(c, frame)? {
                        return Ok(false);
                    }
                }
                true
            }
            Cond::Or(cs) => {
                for c in cs {
                    if self.cond(c, frame)? {
                        return Ok(true);
                    }
                }
                false
            }
            Cond::Not(c) => !self.cond(c, frame)?,
        })
    }
}

/// Runs the entry function of `program` on `inputs`.
///
/// Operands are evaluated left to right and control flow follows actual
/// binary64 values only, so the trace's operator sequence and actual values
/// do not depend on the hook.
pub fn execute<H: ShadowHook>(
    program: &Program,
    inputs: &[f64],
    hook: &mut H,
    config: &ExecConfig,
) -> Result<Execution<H::Shadow>, ExecError> {
    let entry = program.entry_function();
    if inputs.len() != entry.params.len() {
        return Err(ExecError::InputArity {
            expected: entry.params.len(),
            found: inputs.len(),
        });
    }
    let mut frame: Frame<H::Shadow> = vec![None; entry.slots];
    for (i, &v) in inputs.iter().enumerate() {
        frame[i] = Some((v, hook.input(i, v)));
    }
    let mut machine = Machine {
        program,
        hook,
        trace: Trace::default(),
        next_id: 0,
        steps: 0,
        limit: config.max_dyn_ops,
    };
    let (output, output_shadow) = machine.num(&entry.body, &mut frame)?;
    Ok(Execution {
        output,
        output_shadow,
        trace: machine.trace,
    })
}
