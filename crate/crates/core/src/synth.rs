//! Synthetic geography data: the bundled toy schema, a templated corpus,
//! random logical forms and random controller-guided action walks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::action::{Action, PartialGraphState, Role};
use crate::controller::Controller;
use crate::lf::{Formula, LogicalForm, Term};
use crate::schema::{KbSchema, OperationSlot, CONST_RELATION};

pub const TOY_SCHEMA: &str = "\
# Toy geography schema.
type state
type city
type river
type mountain
type lake

entity texas : state
entity iowa : state
entity ohio : state
entity utah : state
entity nevada : state
entity oregon : state
entity kansas : state
entity maine : state
entity idaho : state
entity alabama : state
entity arizona : state
entity georgia : state
entity montana : state
entity new_mexico : state
entity south_dakota : state

entity austin : city
entity dallas : city
entity houston : city
entity boston : city
entity chicago : city
entity seattle : city
entity denver : city
entity miami : city
entity phoenix : city
entity salt_lake_city : city

entity rio_grande : river
entity red : river
entity platte : river
entity hudson : river
entity snake : river
entity potomac : river

entity mckinley : mountain
entity whitney : mountain
entity rainier : mountain
entity elbert : mountain

entity tahoe : lake
entity erie : lake
entity superior : lake
entity champlain : lake

relation next_to(state, state)
relation loc(city, state)
relation capital(city, state)
relation traverse(river, state)
relation located_in(mountain, state)
relation lake_in(lake, state)

operation count(arg-for, body, arg-return)
operation largest(arg-for, body)
operation smallest(arg-for, body)
operation not(body)
";

/// Utterance and logical-form patterns. `{s0}`, `{c0}`, `{r0}`, `{m0}` and
/// `{l0}` stand for distinct state, city, river, mountain and lake names.
pub const TEMPLATES: &[(&str, &str)] = &[
    (
        "which states border {s0}",
        "answer(A,(state(A),next_to(A,stateid({s0}))))",
    ),
    (
        "what states are next to {s0}",
        "answer(A,(state(A),next_to(A,stateid({s0}))))",
    ),
    (
        "how many states border {s0}",
        "answer(A,count(B,(state(B),next_to(B,stateid({s0}))),A))",
    ),
    (
        "how many states border the state of {s0}",
        "answer(A,count(B,(state(B),next_to(C,B),const(C,stateid({s0}))),A))",
    ),
    (
        "what is the capital of {s0}",
        "answer(A,(city(A),capital(A,stateid({s0}))))",
    ),
    (
        "which cities are in {s0}",
        "answer(A,(city(A),loc(A,stateid({s0}))))",
    ),
    (
        "how many cities are in {s0}",
        "answer(A,count(B,(city(B),loc(B,stateid({s0}))),A))",
    ),
    (
        "what state is {c0} in",
        "answer(A,(state(A),loc(cityid({c0}),A)))",
    ),
    (
        "which rivers run through {s0}",
        "answer(A,(river(A),traverse(A,stateid({s0}))))",
    ),
    (
        "which states does the {r0} river run through",
        "answer(A,(state(A),traverse(riverid({r0}),A)))",
    ),
    (
        "how many rivers run through {s0}",
        "answer(A,count(B,(river(B),traverse(B,stateid({s0}))),A))",
    ),
    (
        "what mountains are in {s0}",
        "answer(A,(mountain(A),located_in(A,stateid({s0}))))",
    ),
    (
        "where is mount {m0}",
        "answer(A,(state(A),located_in(mountainid({m0}),A)))",
    ),
    (
        "which lakes are in {s0}",
        "answer(A,(lake(A),lake_in(A,stateid({s0}))))",
    ),
    (
        "where is lake {l0}",
        "answer(A,(state(A),lake_in(lakeid({l0}),A)))",
    ),
    (
        "what is the largest city in {s0}",
        "answer(A,largest(A,(city(A),loc(A,stateid({s0})))))",
    ),
    (
        "what is the largest state bordering {s0}",
        "answer(A,largest(A,(state(A),next_to(A,stateid({s0})))))",
    ),
    (
        "what is the smallest state bordering {s0}",
        "answer(A,smallest(A,(state(A),next_to(A,stateid({s0})))))",
    ),
    (
        "which states do not border {s0}",
        "answer(A,(state(A),not(next_to(A,stateid({s0})))))",
    ),
    (
        "which states does the {r0} river not run through",
        "answer(A,(state(A),not(traverse(riverid({r0}),A))))",
    ),
    (
        "which states border {s0} and {s1}",
        "answer(A,(state(A),next_to(A,stateid({s0})),next_to(A,stateid({s1}))))",
    ),
    (
        "which rivers run through states bordering {s0}",
        "answer(A,(river(A),traverse(A,B),state(B),next_to(B,stateid({s0}))))",
    ),
    (
        "what is the capital of the state bordering {s0}",
        "answer(A,(city(A),capital(A,B),state(B),next_to(B,stateid({s0}))))",
    ),
    (
        "which states border the state whose capital is {c0}",
        "answer(A,(state(A),next_to(A,B),state(B),capital(cityid({c0}),B)))",
    ),
    (
        "which rivers run through {s0} and {s1}",
        "answer(A,(river(A),traverse(A,stateid({s0})),traverse(A,stateid({s1}))))",
    ),
];

const SLOTS: &[(char, &str)] = &[
    ('s', "state"),
    ('c', "city"),
    ('r', "river"),
    ('m', "mountain"),
    ('l', "lake"),
];

fn names_of<'a>(schema: &'a KbSchema, ty: &str) -> Vec<&'a str> {
    schema
        .entities
        .iter()
        .filter(|(_, t)| t.as_str() == ty)
        .map(|(n, _)| n.as_str())
        .collect()
}

/// Fills one template with distinct random entities of each slot type.
pub fn instantiate(
    template: (&str, &str),
    schema: &KbSchema,
    rng: &mut impl Rng,
) -> (String, String) {
    let (mut text, mut lf) = (template.0.to_string(), template.1.to_string());
    for &(tag, ty) in SLOTS {
        let mut pool = names_of(schema, ty);
        pool.shuffle(rng);
        for (k, name) in pool.into_iter().enumerate() {
            let slot = format!("{{{tag}{k}}}");
            if !lf.contains(&slot) {
                break;
            }
            text = text.replace(&slot, &name.replace('_', " "));
            lf = lf.replace(&slot, name);
        }
    }
    (text, lf)
}

/// `n` `(utterance, logical form)` pairs cycling through every template
/// before repeating one, then shuffled.
pub fn toy_corpus(n: usize, schema: &KbSchema, rng: &mut impl Rng) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = (0..n)
        .map(|i| instantiate(TEMPLATES[i % TEMPLATES.len()], schema, rng))
        .collect();
    out.shuffle(rng);
    out
}

pub fn to_tsv(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(u, l)| format!("{u}\t{l}\n")).collect()
}

struct LfGen<'a, R> {
    schema: &'a KbSchema,
    rng: &'a mut R,
    vars: usize,
    types: Vec<String>,
    /// Entities already mentioned; a second mention would close a cycle.
    used: BTreeSet<String>,
}

impl<R: Rng> LfGen<'_, R> {
    fn fresh(&mut self, ty: &str) -> String {
        let name = format!("V{}", self.vars);
        self.vars += 1;
        self.types.push(ty.to_string());
        name
    }

    fn type_of(&self, var: &str) -> String {
        self.types[var[1..].parse::<usize>().unwrap()].clone()
    }

    fn random_type(&mut self) -> String {
        let all: Vec<&String> = self.schema.types.iter().collect();
        all.choose(self.rng).unwrap().to_string()
    }

    /// `(relation, focus is arg1, other type)` for relations touching `ty`.
    fn links(&self, ty: &str) -> Vec<(String, bool, String)> {
        let mut out = Vec::new();
        for (r, (a, b)) in &self.schema.relations {
            if a == ty {
                out.push((r.clone(), true, b.clone()));
            }
            if b == ty {
                out.push((r.clone(), false, a.clone()));
            }
        }
        out
    }

    fn entity(&mut self, ty: &str) -> Option<String> {
        let free: Vec<&str> = names_of(self.schema, ty)
            .into_iter()
            .filter(|n| !self.used.contains(*n))
            .collect();
        let e = free.choose(self.rng)?.to_string();
        self.used.insert(e.clone());
        Some(e)
    }

    fn relation(rel: &str, focus_first: bool, focus: Term, other: Term) -> Formula {
        let (arg1, arg2) = if focus_first {
            (focus, other)
        } else {
            (other, focus)
        };
        Formula::Relation {
            rel: rel.to_string(),
            arg1,
            arg2,
        }
    }

    fn operator(&mut self, op: &str, role_vars: &[String], body: Formula) -> Formula {
        let decl = self.schema.operation(op).expect("declared operation");
        let roles = decl
            .roles()
            .map(str::to_string)
            .zip(role_vars.iter().cloned())
            .collect();
        let body_index = decl
            .layout
            .iter()
            .position(|s| *s == OperationSlot::Body)
            .unwrap();
        Formula::Operator {
            op: op.to_string(),
            roles,
            body_index,
            body: Box::new(body),
        }
    }

    /// Conjuncts about `focus`, recursing at most `depth` levels.
    fn items(&mut self, focus: &str, depth: usize, out: &mut Vec<Formula>) {
        let ty = self.type_of(focus);
        let start = out.len();
        if self.rng.gen_bool(0.7) {
            out.push(Formula::TypePred {
                ty: ty.clone(),
                arg: Term::var(focus),
            });
        }
        let extra = self.rng.gen_range(0..=2);
        for _ in 0..extra {
            let links = self.links(&ty);
            let choice = self.rng.gen_range(0..if depth > 0 { 4 } else { 2 });
            match choice {
                0 | 1 if links.is_empty() => {}
                0 => {
                    let (rel, first, other) = links.choose(self.rng).unwrap().clone();
                    if let Some(e) = self.entity(&other) {
                        out.push(Self::relation(
                            &rel,
                            first,
                            Term::var(focus),
                            Term::entity(&other, &e),
                        ));
                    }
                }
                1 => {
                    let (rel, first, other) = links.choose(self.rng).unwrap().clone();
                    let w = self.fresh(&other);
                    out.push(Self::relation(&rel, first, Term::var(focus), Term::var(&w)));
                    let constant = if self.rng.gen_bool(0.3) {
                        self.entity(&other)
                    } else {
                        None
                    };
                    match constant {
                        Some(e) => out.push(Formula::Const {
                            var: w,
                            ty: other,
                            name: e,
                        }),
                        _ if depth > 0 => self.items(&w, depth - 1, out),
                        _ => {}
                    }
                }
                2 => {
                    let t = self.random_type();
                    let b = self.fresh(&t);
                    let body = self.body(&b, depth - 1);
                    out.push(self.operator("count", &[b, focus.to_string()], body));
                }
                _ => {
                    let op = ["largest", "smallest", "not"]
                        .choose(self.rng)
                        .unwrap()
                        .to_string();
                    let body = self.body(focus, depth - 1);
                    let roles = if op == "not" {
                        vec![]
                    } else {
                        vec![focus.to_string()]
                    };
                    out.push(self.operator(&op, &roles, body));
                }
            }
        }
        if out.len() == start {
            out.push(Formula::TypePred {
                ty,
                arg: Term::var(focus),
            });
        }
    }

    fn body(&mut self, focus: &str, depth: usize) -> Formula {
        let mut items = Vec::new();
        self.items(focus, depth, &mut items);
        Formula::from_items(items)
    }
}

/// A random logical form over `schema` with recursion depth at most
/// `depth`. Relations respect their declared argument types. Expects a
/// schema declaring `count`, `largest`, `smallest` and `not` like
/// [`TOY_SCHEMA`].
pub fn random_lf(schema: &KbSchema, depth: usize, rng: &mut impl Rng) -> LogicalForm {
    let mut g = LfGen {
        schema,
        rng,
        vars: 0,
        types: Vec::new(),
        used: BTreeSet::new(),
    };
    let t = g.random_type();
    let answer = g.fresh(&t);
    let body = g.body(&answer, depth);
    LogicalForm { answer, body }
}

/// Candidate actions for random walks: every schema action, plus nodes,
/// references and role bindings for the given variable labels and every
/// schema entity.
pub fn walk_universe(schema: &KbSchema, variables: &[&str]) -> Vec<Action> {
    let mut out = Vec::new();
    let mut labels: Vec<String> = variables.iter().map(|v| v.to_string()).collect();
    labels.extend(schema.entities.keys().cloned());
    for v in variables {
        out.push(Action::AddVariable(v.to_string()));
    }
    for e in schema.entities.keys() {
        out.push(Action::AddEntity(e.clone()));
    }
    for t in &schema.types {
        out.push(Action::AddType(t.clone()));
    }
    out.push(Action::AddEdge(CONST_RELATION.to_string()));
    for r in schema.relations.keys() {
        out.push(Action::AddEdge(r.clone()));
    }
    for op in schema.operations.keys() {
        out.push(Action::StartOperation(op.clone()));
        out.push(Action::EndOperation(op.clone()));
    }
    let mut roles = vec![Role::TypeArg, Role::Arg1, Role::Arg2];
    roles.extend(schema.operation_roles().into_iter().map(Role::Op));
    for l in &labels {
        for r in &roles {
            out.push(Action::Argument(r.clone(), l.clone()));
        }
    }
    out
}

/// Closing priority: bindings and scope ends first, then edges, then
/// variables, then the rest.
fn closing_rank(a: &Action) -> u8 {
    match a {
        Action::Argument(..) | Action::EndOperation(_) => 0,
        Action::AddEdge(_) => 1,
        Action::AddVariable(_) => 2,
        _ => 3,
    }
}

/// Walks by picking uniformly among controller-legal actions. After each
/// step the walk starts closing with probability `stop`: from then on it
/// picks uniformly among legal actions of the best closing rank and
/// finishes as soon as that is legal. Returns `None` if no finish happens
/// within `max_len` actions.
pub fn random_walk(
    controller: &Controller,
    universe: &[Action],
    max_len: usize,
    stop: f64,
    rng: &mut impl Rng,
) -> Option<Vec<Action>> {
    let mut state = PartialGraphState::new();
    let mut seq = Vec::new();
    let mut closing = false;
    loop {
        let a = controller.analyze(&state);
        if closing && controller.check_finish_with(&state, &a).allowed {
            return Some(seq);
        }
        let mut legal: Vec<&Action> = universe
            .iter()
            .filter(|x| controller.check_with(&state, &a, x).allowed)
            .collect();
        if closing {
            if let Some(best) = legal.iter().map(|x| closing_rank(x)).min() {
                legal.retain(|x| closing_rank(x) == best);
            }
        }
        if seq.len() == max_len {
            return None;
        }
        let Some(next) = legal.choose(rng).map(|x| (*x).clone()) else {
            return controller
                .check_finish_with(&state, &a)
                .allowed
                .then_some(seq);
        };
        state
            .apply(&next, controller.schema)
            .expect("legal actions apply");
        seq.push(next);
        closing |= rng.gen_bool(stop);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::{lf_to_actions, parse_lf};
    use crate::schema::load_schema;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn templates_convert() {
        let s = load_schema(TOY_SCHEMA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in TEMPLATES {
            let (u, l) = instantiate(*t, &s, &mut rng);
            assert!(!u.contains('{'), "{u}");
            let lf = parse_lf(&l, &s).unwrap_or_else(|e| panic!("{l}: {e}"));
            lf_to_actions(&lf, &s).unwrap();
        }
    }

    #[test]
    fn random_forms_convert() {
        let s = load_schema(TOY_SCHEMA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let lf = random_lf(&s, 4, &mut rng);
            lf_to_actions(&lf, &s).unwrap_or_else(|e| panic!("{lf}: {e}"));
        }
    }
}
