//! Resolved program representation.
//!
//! Variables are resolved to per-function frame slots at parse time, so the
//! interpreter never does name lookups.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a variable slot inside a function frame.
pub type Slot = usize;

/// Floating-point operators. Every evaluation of one of these is a dynamic
/// operation with its own [`OpId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FpOp {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Fabs,
    Neg,
    /// Round a binary64 value to binary32 (the result is kept widened).
    Cast64To32,
    /// Widen a binary32 value; exact.
    Cast32To64,
}

impl FpOp {
    pub fn arity(self) -> usize {
        match self {
            FpOp::Add | FpOp::Sub | FpOp::Mul | FpOp::Div => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FpOp::Add => "+",
            FpOp::Sub => "-",
            FpOp::Mul => "*",
            FpOp::Div => "/",
            FpOp::Sqrt => "sqrt",
            FpOp::Fabs => "fabs",
            FpOp::Neg => "neg",
            FpOp::Cast64To32 => "cast64to32",
            FpOp::Cast32To64 => "cast32to64",
        }
    }

    /// Machine (binary64) semantics of the operator.
    pub fn apply(self, args: &[f64]) -> f64 {
        match self {
            FpOp::Add => args[0] + args[1],
            FpOp::Sub => args[0] - args[1],
            FpOp::Mul => args[0] * args[1],
            FpOp::Div => args[0] / args[1],
            FpOp::Sqrt => args[0].sqrt(),
            FpOp::Fabs => args[0].abs(),
            FpOp::Neg => -args[0],
            FpOp::Cast64To32 => args[0] as f32 as f64,
            FpOp::Cast32To64 => args[0],
        }
    }

    pub const ALL: [FpOp; 9] = [
        FpOp::Add,
        FpOp::Sub,
        FpOp::Mul,
        FpOp::Div,
        FpOp::Sqrt,
        FpOp::Fabs,
        FpOp::Neg,
        FpOp::Cast64To32,
        FpOp::Cast32To64,
    ];
}

impl fmt::Display for FpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn eval(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

/// Numeric expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Slot),
    Op(FpOp, Vec<Expr>),
    /// Bindings are stored in evaluation order; scoping (parallel or
    /// sequential) was already applied during resolution.
    Let {
        bindings: Vec<(Slot, Expr)>,
        body: Box<Expr>,
    },
    If {
        cond: Box<Cond>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    While {
        cond: Box<Cond>,
        vars: Vec<LoopVar>,
        body: Box<Expr>,
        sequential: bool,
    },
    Call {
        func: usize,
        args: Vec<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopVar {
    pub slot: Slot,
    pub init: Expr,
    pub update: Expr,
}

/// Boolean expression. Conditions only ever look at actual values.
#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Const(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    /// Number of frame slots, parameters first.
    pub slots: usize,
    pub body: Expr,
}

/// A validated kernel program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: Vec<Function>,
    pub entry: usize,
}

impl Program {
    pub fn entry_function(&self) -> &Function {
        &self.functions[self.entry]
    }

    pub fn entry_name(&self) -> &str {
        &self.entry_function().name
    }

    pub fn params(&self) -> &[String] {
        &self.entry_function().params
    }

    pub fn function(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Returns a copy of the program whose entry point is `name`.
    pub fn with_entry(&self, name: &str) -> Option<Program> {
        let entry = self.function(name)?;
        Some(Program {
            functions: self.functions.clone(),
            entry,
        })
    }

    /// Number of floating-point operator nodes in the entry body, not counting
    /// operations inside callees.
    pub fn static_op_count(&self) -> usize {
        fn count(e: &Expr) -> usize {
            match e {
                Expr::Num(_) | Expr::Var(_) => 0,
                Expr::Op(_, args) => 1 + args.iter().map(count).sum::<usize>(),
                Expr::Let { bindings, body } => {
                    bindings.iter().map(|(_, e)| count(e)).sum::<usize>() + count(body)
                }
                Expr::If {
                    cond,
                    then,
                    otherwise,
                } => count_cond(cond) + count(then) + count(otherwise),
                Expr::While {
                    cond, vars, body, ..
                } => {
                    count_cond(cond)
                        + vars
                            .iter()
                            .map(|v| count(&v.init) + count(&v.update))
                            .sum::<usize>()
                        + count(body)
                }
                Expr::Call { args, .. } => args.iter().map(count).sum(),
            }
        }
        fn count_cond(c: &Cond) -> usize {
            match c {
                Cond::Const(_) => 0,
                Cond::Cmp(_, a, b) => count(a) + count(b),
                Cond::And(cs) | Cond::Or(cs) => cs.iter().map(count_cond).sum(),
                Cond::Not(c) => count_cond(c),
            }
        }
        count(&self.entry_function().body)
    }
}
