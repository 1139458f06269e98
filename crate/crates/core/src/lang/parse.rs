//! S-expression surface syntax.
//!
//! ```text
//! program  := form*
//! form     := (define (name param*) expr) | (entry name)
//! expr     := number | #x<16 hex digits> | var
//!           | (op expr+) | (name expr*)
//!           | (let ((var expr)*) expr) | (let* ((var expr)*) expr)
//!           | (if cond expr expr)
//!           | (while cond ((var init update)*) expr)
//!           | (while* cond ((var init update)*) expr)
//! cond     := TRUE | FALSE | (cmp expr expr+) | (and cond*) | (or cond*) | (not cond)
//! ```
//!
//! Square brackets may be used in place of parentheses. `;` starts a comment.

use std::collections::HashMap;

use super::ast::{CmpOp, Cond, Expr, FpOp, Function, LoopVar, Program, Slot};
use super::LangError;

#[derive(Debug, Clone)]
enum Node {
    Atom(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone)]
struct Sexp {
    node: Node,
    line: usize,
    col: usize,
}

impl Sexp {
    fn syntax(&self, msg: impl Into<String>) -> LangError {
        LangError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn atom(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(s) => Some(s),
            Node::List(_) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match &self.node {
            Node::List(items) => Some(items),
            Node::Atom(_) => None,
        }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read_all(&mut self) -> Result<Vec<Sexp>, LangError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            match self.chars.peek() {
                None => return Ok(out),
                Some(')') | Some(']') => {
                    return Err(LangError::Syntax {
                        line: self.line,
                        col: self.col,
                        msg: "unexpected closing bracket".into(),
                    })
                }
                Some(_) => out.push(self.read()?),
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, LangError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        match self.chars.peek().copied() {
            None => Err(LangError::Syntax {
                line,
                col,
                msg: "unexpected end of input".into(),
            }),
            Some(open @ ('(' | '[')) => {
                self.bump();
                let close = if open == '(' { ')' } else { ']' };
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek().copied() {
                        None => {
                            return Err(LangError::Syntax {
                                line,
                                col,
                                msg: format!("unclosed '{open}'"),
                            })
                        }
                        Some(c @ (')' | ']')) => {
                            if c != close {
                                return Err(LangError::Syntax {
                                    line: self.line,
                                    col: self.col,
                                    msg: format!("expected '{close}', found '{c}'"),
                                });
                            }
                            self.bump();
                            break;
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
                Ok(Sexp {
                    node: Node::List(items),
                    line,
                    col,
                })
            }
            Some(_) => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | ';') {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Ok(Sexp {
                    node: Node::Atom(s),
                    line,
                    col,
                })
            }
        }
    }
}

/// Parses a numeric literal: a decimal float or `#x` followed by the 16 hex
/// digits of a binary64 bit pattern.
pub fn parse_literal(tok: &str) -> Option<f64> {
    if let Some(hex) = tok.strip_prefix("#x").or_else(|| tok.strip_prefix("#X")) {
        if hex.len() == 16 {
            return u64::from_str_radix(hex, 16).ok().map(f64::from_bits);
        }
        return None;
    }
    let first = tok.chars().next()?;
    if !(first.is_ascii_digit() || first == '.' || first == '-' || first == '+') {
        return None;
    }
    let v: f64 = tok.parse().ok()?;
    v.is_finite().then_some(v)
}

fn is_identifier(tok: &str) -> bool {
    let mut chars = tok.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '?' | '!'))
}

const RESERVED: &[&str] = &[
    "define", "entry", "let", "let*", "if", "while", "while*", "and", "or", "not", "TRUE",
    "FALSE", "sqrt", "fabs", "neg", "cast64to32", "cast32to64",
];

fn fp_op(name: &str, nargs: usize) -> Option<FpOp> {
    Some(match (name, nargs) {
        ("+", _) => FpOp::Add,
        ("-", 1) => FpOp::Neg,
        ("-", _) => FpOp::Sub,
        ("*", _) => FpOp::Mul,
        ("/", _) => FpOp::Div,
        ("sqrt", _) => FpOp::Sqrt,
        ("fabs", _) => FpOp::Fabs,
        ("neg", _) => FpOp::Neg,
        ("cast64to32", _) => FpOp::Cast64To32,
        ("cast32to64", _) => FpOp::Cast32To64,
        _ => return None,
    })
}

fn cmp_op(name: &str) -> Option<CmpOp> {
    Some(match name {
        "<" => CmpOp::Lt,
        ">" => CmpOp::Gt,
        "<=" => CmpOp::Le,
        ">=" => CmpOp::Ge,
        "==" => CmpOp::Eq,
        "!=" => CmpOp::Ne,
        _ => return None,
    })
}

struct Signature {
    name: String,
    arity: usize,
}

struct FnBuilder<'a> {
    sigs: &'a [Signature],
    by_name: &'a HashMap<String, usize>,
    scope: Vec<(String, Slot)>,
    next_slot: Slot,
    calls: Vec<usize>,
}

impl FnBuilder<'_> {
    fn fresh(&mut self) -> Slot {
        let s = self.next_slot;
        self.next_slot += 1;
        s
    }

    fn lookup(&self, name: &str) -> Option<Slot> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
    }

    fn binder<'s>(&self, s: &'s Sexp) -> Result<&'s str, LangError> {
        match s.atom() {
            Some(name) if is_identifier(name) && !RESERVED.contains(&name) => Ok(name),
            _ => Err(s.syntax("expected a variable name")),
        }
    }

    fn expr(&mut self, s: &Sexp) -> Result<Expr, LangError> {
        match &s.node {
            Node::Atom(tok) => {
                if let Some(v) = parse_literal(tok) {
                    return Ok(Expr::Num(v));
                }
                if tok == "TRUE" || tok == "FALSE" {
                    return Err(s.syntax("boolean used where a number is expected"));
                }
                if !is_identifier(tok) {
                    return Err(s.syntax(format!("malformed token '{tok}'")));
                }
                self.lookup(tok)
                    .map(Expr::Var)
                    .ok_or_else(|| LangError::UnboundVariable {
                        name: tok.clone(),
                        line: s.line,
                        col: s.col,
                    })
            }
            Node::List(items) => {
                let Some((head, rest)) = items.split_first() else {
                    return Err(s.syntax("empty expression"));
                };
                let Some(name) = head.atom() else {
                    return Err(head.syntax("expected an operator name"));
                };
                match name {
                    "let" | "let*" => self.let_form(s, rest, name == "let*"),
                    "if" => {
                        if rest.len() != 3 {
                            return Err(arity(s, "if", 3, rest.len()));
                        }
                        let cond = self.cond(&rest[0])?;
                        let then = self.expr(&rest[1])?;
                        let otherwise = self.expr(&rest[2])?;
                        Ok(Expr::If {
                            cond: Box::new(cond),
                            then: Box::new(then),
                            otherwise: Box::new(otherwise),
                        })
                    }
                    "while" | "while*" => self.while_form(s, rest, name == "while*"),
                    _ if cmp_op(name).is_some() || matches!(name, "and" | "or" | "not") => {
                        Err(s.syntax(format!("'{name}' yields a boolean where a number is expected")))
                    }
                    _ => {
                        if let Some(op) = fp_op(name, rest.len()) {
                            if rest.len() != op.arity() {
                                return Err(arity(s, name, op.arity(), rest.len()));
                            }
                            let args = rest
                                .iter()
                                .map(|a| self.expr(a))
                                .collect::<Result<Vec<_>, _>>()?;
                            return Ok(Expr::Op(op, args));
                        }
                        let Some(&func) = self.by_name.get(name) else {
                            return Err(LangError::UnknownOperator {
                                name: name.to_string(),
                                line: head.line,
                                col: head.col,
                            });
                        };
                        let expected = self.sigs[func].arity;
                        if rest.len() != expected {
                            return Err(arity(s, name, expected, rest.len()));
                        }
                        let args = rest
                            .iter()
                            .map(|a| self.expr(a))
                            .collect::<Result<Vec<_>, _>>()?;
                        self.calls.push(func);
                        Ok(Expr::Call { func, args })
                    }
                }
            }
        }
    }

    fn let_form(&mut self, s: &Sexp, rest: &[Sexp], sequential: bool) -> Result<Expr, LangError> {
        if rest.len() != 2 {
            return Err(arity(s, "let", 2, rest.len()));
        }
        let Some(pairs) = rest[0].list() else {
            return Err(rest[0].syntax("expected a binding list"));
        };
        let depth = self.scope.len();
        let mut bindings = Vec::with_capacity(pairs.len());
        let mut pending = Vec::new();
        for pair in pairs {
            let items = match pair.list() {
                Some(items) if items.len() == 2 => items,
                _ => return Err(pair.syntax("expected (name expr)")),
            };
            let name = self.binder(&items[0])?.to_string();
            let value = self.expr(&items[1])?;
            let slot = self.fresh();
            bindings.push((slot, value));
            if sequential {
                self.scope.push((name, slot));
            } else {
                pending.push((name, slot));
            }
        }
        self.scope.extend(pending);
        let body = self.expr(&rest[1])?;
        self.scope.truncate(depth);
        Ok(Expr::Let {
            bindings,
            body: Box::new(body),
        })
    }

    fn while_form(&mut self, s: &Sexp, rest: &[Sexp], sequential: bool) -> Result<Expr, LangError> {
        if rest.len() != 3 {
            return Err(arity(s, "while", 3, rest.len()));
        }
        let Some(specs) = rest[1].list() else {
            return Err(rest[1].syntax("expected a loop variable list"));
        };
        let depth = self.scope.len();
        let mut names = Vec::with_capacity(specs.len());
        let mut inits = Vec::with_capacity(specs.len());
        let mut pending = Vec::new();
        for spec in specs {
            let items = match spec.list() {
                Some(items) if items.len() == 3 => items,
                _ => return Err(spec.syntax("expected (name init update)")),
            };
            let name = self.binder(&items[0])?.to_string();
            let init = self.expr(&items[1])?;
            let slot = self.fresh();
            if sequential {
                self.scope.push((name.clone(), slot));
            } else {
                pending.push((name.clone(), slot));
            }
            names.push(slot);
            inits.push(init);
        }
        self.scope.extend(pending);
        let cond = self.cond(&rest[0])?;
        let mut vars = Vec::with_capacity(specs.len());
        for ((spec, slot), init) in specs.iter().zip(names).zip(inits) {
            let update = self.expr(&spec.list().expect("checked above")[2])?;
            vars.push(LoopVar { slot, init, update });
        }
        let body = self.expr(&rest[2])?;
        self.scope.truncate(depth);
        Ok(Expr::While {
            cond: Box::new(cond),
            vars,
            body: Box::new(body),
            sequential,
        })
    }

    fn cond(&mut self, s: &Sexp) -> Result<Cond, LangError> {
        match &s.node {
            Node::Atom(tok) if tok == "TRUE" => Ok(Cond::Const(true)),
            Node::Atom(tok) if tok == "FALSE" => Ok(Cond::Const(false)),
            Node::Atom(_) => Err(s.syntax("expected a condition")),
            Node::List(items) => {
                let Some((head, rest)) = items.split_first() else {
                    return Err(s.syntax("empty condition"));
                };
                let name = head.atom().unwrap_or("");
                if let Some(op) = cmp_op(name) {
                    if rest.len() < 2 {
                        return Err(arity(s, name, 2, rest.len()));
                    }
                    let args = rest
                        .iter()
                        .map(|a| self.expr(a))
                        .collect::<Result<Vec<_>, _>>()?;
                    let mut pairs: Vec<Cond> = args
                        .windows(2)
                        .map(|w| Cond::Cmp(op, w[0].clone(), w[1].clone()))
                        .collect();
                    return Ok(if pairs.len() == 1 {
                        pairs.pop().expect("one pair")
                    } else {
                        Cond::And(pairs)
                    });
                }
                match name {
                    "and" | "or" => {
                        let cs = rest
                            .iter()
                            .map(|c| self.cond(c))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(if name == "and" {
                            Cond::And(cs)
                        } else {
                            Cond::Or(cs)
                        })
                    }
                    "not" => {
                        if rest.len() != 1 {
                            return Err(arity(s, "not", 1, rest.len()));
                        }
                        Ok(Cond::Not(Box::new(self.cond(&rest[0])?)))
                    }
                    _ => Err(s.syntax("expected a condition")),
                }
            }
        }
    }
}

fn arity(s: &Sexp, name: &str, expected: usize, found: usize) -> LangError {
    LangError::Arity {
        name: name.to_string(),
        expected,
        found,
        line: s.line,
        col: s.col,
    }
}

/// Parses and validates a kernel program.
///
/// The entry point is the function named by an `(entry name)` form, or the
/// last defined function when no such form is present.
pub fn parse_program(text: &str) -> Result<Program, LangError> {
    let forms = Reader::new(text).read_all()?;

    struct Def<'a> {
        form: &'a Sexp,
        params: Vec<String>,
        body: &'a Sexp,
    }

    let mut sigs = Vec::new();
    let mut defs = Vec::new();
    let mut by_name = HashMap::new();
    let mut entry_name: Option<(String, &Sexp)> = None;

    for form in &forms {
        let Some(items) = form.list() else {
            return Err(form.syntax("expected a top-level form"));
        };
        match items.first().and_then(Sexp::atom) {
            Some("define") => {
                if items.len() != 3 {
                    return Err(form.syntax("expected (define (name params...) body)"));
                }
                let header = match items[1].list() {
                    Some(h) if !h.is_empty() => h,
                    _ => return Err(items[1].syntax("expected (name params...)")),
                };
                let name = match header[0].atom() {
                    Some(n) if is_identifier(n) && !RESERVED.contains(&n) => n.to_string(),
                    _ => return Err(header[0].syntax("expected a function name")),
                };
                if fp_op(&name, 1).is_some() {
                    return Err(header[0].syntax("function name shadows an operator"));
                }
                let mut params: Vec<String> = Vec::new();
                for p in &header[1..] {
                    match p.atom() {
                        Some(n) if is_identifier(n) && !RESERVED.contains(&n) => {
                            if params.iter().any(|q| q == n) {
                                return Err(p.syntax(format!("duplicate parameter '{n}'")));
                            }
                            params.push(n.to_string());
                        }
                        _ => return Err(p.syntax("expected a parameter name")),
                    }
                }
                if by_name.insert(name.clone(), sigs.len()).is_some() {
                    return Err(header[0].syntax(format!("duplicate function '{name}'")));
                }
                sigs.push(Signature {
                    name,
                    arity: params.len(),
                });
                defs.push(Def {
                    form,
                    params,
                    body: &items[2],
                });
            }
            Some("entry") => {
                match (items.len(), items.get(1).and_then(Sexp::atom)) {
                    (2, Some(n)) => entry_name = Some((n.to_string(), &items[1])),
                    _ => return Err(form.syntax("expected (entry name)")),
                }
            }
            _ => return Err(form.syntax("expected (define ...) or (entry ...)")),
        }
    }

    if defs.is_empty() {
        return Err(LangError::Empty);
    }

    let mut functions = Vec::with_capacity(defs.len());
    let mut call_graph = Vec::with_capacity(defs.len());
    for (idx, def) in defs.iter().enumerate() {
        let mut b = FnBuilder {
            sigs: &sigs,
            by_name: &by_name,
            scope: Vec::new(),
            next_slot: 0,
            calls: Vec::new(),
        };
        for p in &def.params {
            let slot = b.fresh();
            b.scope.push((p.clone(), slot));
        }
        let body = b.expr(def.body)?;
        let _ = def.form;
        functions.push(Function {
            name: sigs[idx].name.clone(),
            params: def.params.clone(),
            slots: b.next_slot,
            body,
        });
        let mut calls = b.calls;
        calls.sort_unstable();
        calls.dedup();
        call_graph.push(calls);
    }

    if let Some(cycle) = find_cycle(&call_graph) {
        return Err(LangError::RecursiveCall {
            cycle: cycle.into_iter().map(|i| sigs[i].name.clone()).collect(),
        });
    }

    let entry = match entry_name {
        Some((name, at)) => *by_name.get(&name).ok_or(LangError::UnknownOperator {
            name,
            line: at.line,
            col: at.col,
        })?,
        None => functions.len() - 1,
    };

    Ok(Program { functions, entry })
}

fn find_cycle(graph: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    fn visit(n: usize, g: &[Vec<usize>], marks: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[n] = Mark::Grey;
        stack.push(n);
        for &m in &g[n] {
            match marks[m] {
                Mark::Grey => {
                    let start = stack.iter().position(|&s| s == m).expect("on stack");
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(m);
                    return Some(cycle);
                }
                Mark::White => {
                    if let Some(c) = visit(m, g, marks, stack) {
                        return Some(c);
                    }
                }
                Mark::Black => {}
            }
        }
        stack.pop();
        marks[n] = Mark::Black;
        None
    }
    let mut marks = vec![Mark::White; graph.len()];
    let mut stack = Vec::new();
    for n in 0..graph.len() {
        if marks[n] == Mark::White {
            if let Some(c) = visit(n, graph, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}
