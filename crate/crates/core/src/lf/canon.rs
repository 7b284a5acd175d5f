//! Canonical ordering and naming.
//!
//! Conjuncts are emitted by a depth-first walk from the answer variable.
//! At each node the remaining conjunct that mentions it with the smallest
//! key goes next, where the key masks not-yet-named variables so that the
//! choice does not depend on input order. Variables are renamed in the
//! order they are first printed.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::{Formula, LogicalForm, Term};

fn canonical_name(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("V{i}")
    }
}

fn rank(f: &Formula) -> u8 {
    match f {
        Formula::TypePred { .. } => 0,
        Formula::Const { .. } => 1,
        Formula::Relation { .. } => 2,
        Formula::Operator { .. } | Formula::Conj(_) => 3,
    }
}

fn nodes_of(f: &Formula) -> Vec<Term> {
    let mut out = Vec::new();
    fn walk(f: &Formula, out: &mut Vec<Term>) {
        match f {
            Formula::Conj(items) => items.iter().for_each(|i| walk(i, out)),
            Formula::TypePred { arg, .. } => out.push(arg.clone()),
            Formula::Relation { arg1, arg2, .. } => {
                out.push(arg1.clone());
                out.push(arg2.clone());
            }
            Formula::Const { var, ty, name } => {
                out.push(Term::Var(var.clone()));
                out.push(Term::entity(ty, name));
            }
            Formula::Operator { roles, body, .. } => {
                out.extend(roles.iter().map(|(_, v)| Term::Var(v.clone())));
                walk(body, out);
            }
        }
    }
    walk(f, &mut out);
    out
}

#[derive(Default)]
struct Canon {
    names: HashMap<String, String>,
    seen_entities: HashSet<(String, String)>,
}

impl Canon {
    fn name(&mut self, v: &str, fresh: &mut Vec<Term>) -> String {
        if let Some(n) = self.names.get(v) {
            return n.clone();
        }
        let n = canonical_name(self.names.len());
        self.names.insert(v.to_string(), n.clone());
        fresh.push(Term::Var(v.to_string()));
        n
    }

    fn term(&mut self, t: &Term, fresh: &mut Vec<Term>) -> Term {
        match t {
            Term::Var(v) => Term::Var(self.name(v, fresh)),
            Term::Entity { ty, name } => {
                if self.seen_entities.insert((ty.clone(), name.clone())) {
                    fresh.push(t.clone());
                }
                t.clone()
            }
        }
    }

    fn mask_var(&self, out: &mut String, v: &str) {
        match self.names.get(v) {
            Some(n) => out.push_str(n),
            None => out.push('_'),
        }
    }

    fn mask_term(&self, out: &mut String, t: &Term) {
        match t {
            Term::Var(v) => self.mask_var(out, v),
            Term::Entity { ty, name } => {
                let _ = write!(out, "{ty}:{name}");
            }
        }
    }

    /// Order-free description of `f` with unnamed variables hidden.
    fn key(&self, f: &Formula) -> String {
        let mut out = String::new();
        out.push(char::from(b'0' + rank(f)));
        match f {
            Formula::TypePred { ty, arg } => {
                let _ = write!(out, "{ty}(");
                self.mask_term(&mut out, arg);
            }
            Formula::Const { var, ty, name } => {
                out.push_str("const(");
                self.mask_var(&mut out, var);
                let _ = write!(out, ",{ty}:{name}");
            }
            Formula::Relation { rel, arg1, arg2 } => {
                let _ = write!(out, "{rel}(");
                self.mask_term(&mut out, arg1);
                out.push(',');
                self.mask_term(&mut out, arg2);
            }
            Formula::Operator {
                op, roles, body, ..
            } => {
                let _ = write!(out, "{op}(");
                for (_, v) in roles {
                    self.mask_var(&mut out, v);
                    out.push(',');
                }
                let mut inner: Vec<String> =
                    body.items().into_iter().map(|i| self.key(i)).collect();
                inner.sort();
                out.push('[');
                out.push_str(&inner.join(";"));
                out.push(']');
            }
            Formula::Conj(items) => {
                let mut inner: Vec<String> = items.iter().map(|i| self.key(i)).collect();
                inner.sort();
                out.push_str(&inner.join(";"));
            }
        }
        out.push(')');
        out
    }

    /// Index of the smallest item among those accepted by `filter`.
    fn pick(&self, items: &[Formula], filter: impl Fn(&Formula) -> bool) -> Option<usize> {
        #[allow(clippy::type_complexity)]
        let mut best: Option<(String, Vec<(usize, String)>, usize)> = None;
        for (i, f) in items.iter().enumerate() {
            if !filter(f) {
                continue;
            }
            let key = self.key(f);
            let tie: Vec<(usize, String)> = f
                .variables()
                .into_iter()
                .map(|v| (v.len(), v.to_string()))
                .collect();
            let better = match &best {
                None => true,
                Some((bk, bt, _)) => (&key, &tie) < (bk, bt),
            };
            if better {
                best = Some((key, tie, i));
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Renames `f`, reordering operator bodies. Nodes met for the first
    /// time are appended to `fresh` in printing order.
    fn emit(&mut self, f: Formula, fresh: &mut Vec<Term>) -> Formula {
        match f {
            Formula::TypePred { ty, arg } => Formula::TypePred {
                ty,
                arg: self.term(&arg, fresh),
            },
            Formula::Relation { rel, arg1, arg2 } => {
                let arg1 = self.term(&arg1, fresh);
                let arg2 = self.term(&arg2, fresh);
                Formula::Relation { rel, arg1, arg2 }
            }
            Formula::Const { var, ty, name } => {
                let var = self.name(&var, fresh);
                self.term(&Term::entity(&ty, &name), fresh);
                Formula::Const { var, ty, name }
            }
            Formula::Operator {
                op,
                roles,
                body_index,
                body,
            } => {
                let mut renamed = Vec::with_capacity(roles.len());
                for (r, v) in roles.iter().take(body_index) {
                    renamed.push((r.clone(), self.name(v, fresh)));
                }
                let focus: Vec<Term> = roles
                    .iter()
                    .filter(|(_, v)| self.names.contains_key(v))
                    .map(|(_, v)| Term::Var(v.clone()))
                    .collect();
                let items = body.items().into_iter().cloned().collect();
                let body = self.order(items, &focus, fresh);
                for (r, v) in roles.iter().skip(body_index) {
                    renamed.push((r.clone(), self.name(v, fresh)));
                }
                Formula::Operator {
                    op,
                    roles: renamed,
                    body_index,
                    body: Box::new(Formula::from_items(body)),
                }
            }
            Formula::Conj(items) => {
                let body = self.order(items, &[], fresh);
                Formula::Conj(body)
            }
        }
    }

    fn visit(
        &mut self,
        node: &Term,
        items: &mut Vec<Formula>,
        out: &mut Vec<Formula>,
        fresh: &mut Vec<Term>,
    ) {
        while let Some(i) = self.pick(items, |f| nodes_of(f).contains(node)) {
            let f = items.remove(i);
            let mut found = Vec::new();
            out.push(self.emit(f, &mut found));
            for n in &found {
                self.visit(n, items, out, fresh);
            }
            fresh.extend(found);
        }
    }

    fn order(
        &mut self,
        mut items: Vec<Formula>,
        focus: &[Term],
        fresh: &mut Vec<Term>,
    ) -> Vec<Formula> {
        let mut out = Vec::with_capacity(items.len());
        for node in focus {
            self.visit(node, &mut items, &mut out, fresh);
        }
        while let Some(i) = self.pick(&items, |_| true) {
            let f = items.remove(i);
            let mut found = Vec::new();
            out.push(self.emit(f, &mut found));
            for n in &found {
                self.visit(n, &mut items, &mut out, fresh);
            }
            fresh.extend(found);
        }
        out
    }
}

/// Reorders conjuncts and renames variables into the canonical form. The
/// result is invariant under conjunct permutation and idempotent.
pub fn canonicalize(lf: &LogicalForm) -> LogicalForm {
    let mut canon = Canon::default();
    let mut fresh = Vec::new();
    let answer = canon.name(&lf.answer, &mut fresh);
    let items = lf.body.items().into_iter().cloned().collect();
    let body = canon.order(items, &[Term::Var(lf.answer.clone())], &mut fresh);
    LogicalForm {
        answer,
        body: Formula::from_items(body),
    }
}
