//! Prolog-style logical forms: AST, parser, canonical printer and the
//! conversions logical form ↔ semantic graph ↔ action sequence.
//!
//! ```text
//! answer(A,(state(A),next_to(A,stateid(texas))))
//! answer(A,count(B,(state(B),next_to(C,B),const(C,stateid(iowa))),A))
//! ```

mod canon;
mod convert;
mod parse;

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::action::ActionError;
use crate::graph::GraphError;

pub use canon::canonicalize;
pub use convert::{actions_to_lf, graph_to_lf, lf_to_actions, lf_to_graph};
pub use parse::{parse_lf, parse_lf_strict};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    /// An entity literal `<ty>id(<name>)`.
    Entity {
        ty: String,
        name: String,
    },
}

impl Term {
    pub fn entity(ty: &str, name: &str) -> Self {
        Term::Entity {
            ty: ty.to_string(),
            name: name.to_string(),
        }
    }

    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Conj(Vec<Formula>),
    TypePred {
        ty: String,
        arg: Term,
    },
    Relation {
        rel: String,
        arg1: Term,
        arg2: Term,
    },
    /// `const(V, <ty>id(<name>))`
    Const {
        var: String,
        ty: String,
        name: String,
    },
    Operator {
        op: String,
        /// `(role, variable)` pairs in declaration order.
        roles: Vec<(String, String)>,
        /// Position of the body among the printed arguments.
        body_index: usize,
        body: Box<Formula>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogicalForm {
    pub answer: String,
    pub body: Formula,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LfError {
    #[error("syntax error at byte {pos}: {message}")]
    SyntaxError { pos: usize, message: String },
    #[error("unknown symbol `{name}` at byte {pos}")]
    UnknownSymbol { pos: usize, name: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("graph has no variable return node")]
    NoReturnNode,
    #[error("cannot convert graph: {0}")]
    NotConvertible(String),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl LfError {
    /// Stable name of the error kind, used in per-line reports.
    pub fn kind(&self) -> &'static str {
        match self {
            LfError::SyntaxError { .. } => "SyntaxError",
            LfError::UnknownSymbol { .. } => "UnknownSymbol",
            LfError::UnboundVariable(_) => "UnboundVariable",
            LfError::NoReturnNode => "NoReturnNode",
            LfError::NotConvertible(_) => "NotConvertible",
            LfError::Action(_) => "InvalidAction",
            LfError::Graph(_) => "GraphError",
        }
    }
}

impl Formula {
    /// Flattens nested conjunctions into a list of non-conjunction items.
    pub fn items(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::Conj(items) => items.iter().for_each(|i| walk(i, out)),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub(crate) fn from_items(mut items: Vec<Formula>) -> Formula {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Formula::Conj(items)
        }
    }

    /// Variable names in textual order, with repeats.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a str>) {
            match f {
                Formula::Conj(items) => items.iter().for_each(|i| walk(i, out)),
                Formula::TypePred { arg, .. } => {
                    if let Term::Var(v) = arg {
                        out.push(v);
                    }
                }
                Formula::Relation { arg1, arg2, .. } => {
                    for t in [arg1, arg2] {
                        if let Term::Var(v) = t {
                            out.push(v);
                        }
                    }
                }
                Formula::Const { var, .. } => out.push(var),
                Formula::Operator {
                    roles,
                    body_index,
                    body,
                    ..
                } => {
                    for (i, (_, v)) in roles.iter().enumerate() {
                        if i == *body_index {
                            walk(body, out);
                        }
                        out.push(v);
                    }
                    if *body_index >= roles.len() {
                        walk(body, out);
                    }
                }
            }
        }
        walk(self, &mut out);
        out
    }
}

fn write_term(out: &mut String, t: &Term) {
    match t {
        Term::Var(v) => out.push_str(v),
        Term::Entity { ty, name } => {
            let _ = write!(out, "{ty}id({name})");
        }
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::Conj(items) => {
            out.push('(');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_formula(out, item);
            }
            out.push(')');
        }
        Formula::TypePred { ty, arg } => {
            out.push_str(ty);
            out.push('(');
            write_term(out, arg);
            out.push(')');
        }
        Formula::Relation { rel, arg1, arg2 } => {
            out.push_str(rel);
            out.push('(');
            write_term(out, arg1);
            out.push(',');
            write_term(out, arg2);
            out.push(')');
        }
        Formula::Const { var, ty, name } => {
            let _ = write!(out, "const({var},{ty}id({name}))");
        }
        Formula::Operator {
            op,
            roles,
            body_index,
            body,
        } => {
            out.push_str(op);
            out.push('(');
            let total = roles.len() + 1;
            let mut role_iter = roles.iter();
            for i in 0..total {
                if i > 0 {
                    out.push(',');
                }
                if i == *body_index {
                    write_formula(out, body);
                } else if let Some((_, v)) = role_iter.next() {
                    out.push_str(v);
                }
            }
            out.push(')');
        }
    }
}

impl LogicalForm {
    /// Prints the form as stored, without canonical reordering.
    pub fn to_raw_string(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "answer({},", self.answer);
        write_formula(&mut out, &self.body);
        out.push(')');
        out
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_lf(self))
    }
}

/// Canonical text: conjuncts in depth-first order of first mention,
/// variables renamed `A, B, C, …` in order of appearance, no whitespace.
pub fn print_lf(lf: &LogicalForm) -> String {
    canonicalize(lf).to_raw_string()
}

/// Symbols, parentheses and commas of the canonical text.
pub fn linearize(lf: &LogicalForm) -> Vec<String> {
    tokenize_text(&print_lf(lf))
}

/// Splits logical-form text into symbol, parenthesis and comma tokens.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' | ',' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
