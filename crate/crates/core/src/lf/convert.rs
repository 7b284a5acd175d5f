use std::collections::{HashMap, HashSet};

use crate::action::{build_graph, Action, ActionError, PartialGraphState, Role};
use crate::graph::{Element, GraphError, NodeId, NodeKind, SemanticGraph};
use crate::schema::{KbSchema, OperationSlot, CONST_RELATION};

use super::{canonicalize, Formula, LfError, LogicalForm, Term};

/// Whether any variable or entity occurs in `f`.
fn mentions_terms(f: &Formula) -> bool {
    match f {
        Formula::Conj(items) => items.iter().any(mentions_terms),
        Formula::Operator { roles, body, .. } => !roles.is_empty() || mentions_terms(body),
        _ => true,
    }
}

/// The answer variable must occur in the body unless nothing else does,
/// as with empty bodies and empty operation scopes.
fn check_bound(lf: &LogicalForm) -> Result<(), LfError> {
    if mentions_terms(&lf.body) && !lf.body.variables().contains(&lf.answer.as_str()) {
        return Err(LfError::UnboundVariable(lf.answer.clone()));
    }
    Ok(())
}

fn check_entity(schema: &KbSchema, ty: &str, name: &str) -> Result<(), LfError> {
    match schema.entity_type(name) {
        None => Err(GraphError::UnknownEntity(name.to_string()).into()),
        Some(t) if t != ty => Err(LfError::NotConvertible(format!(
            "entity `{name}` has type `{t}`, not `{ty}`"
        ))),
        Some(_) => Ok(()),
    }
}

fn term_label(t: &Term) -> &str {
    match t {
        Term::Var(v) => v,
        Term::Entity { name, .. } => name,
    }
}

struct Linearizer<'a> {
    schema: &'a KbSchema,
    seen: HashSet<String>,
    out: Vec<Action>,
}

impl Linearizer<'_> {
    fn ensure(&mut self, t: &Term) -> Result<(), LfError> {
        let label = term_label(t);
        if self.seen.contains(label) {
            return Ok(());
        }
        match t {
            Term::Var(v) => self.out.push(Action::AddVariable(v.clone())),
            Term::Entity { ty, name } => {
                check_entity(self.schema, ty, name)?;
                self.out.push(Action::AddEntity(name.clone()));
            }
        }
        self.seen.insert(label.to_string());
        Ok(())
    }

    fn formula(&mut self, f: &Formula) -> Result<(), LfError> {
        match f {
            Formula::Conj(items) => {
                for item in items {
                    self.formula(item)?;
                }
            }
            Formula::TypePred { ty, arg } => {
                self.ensure(arg)?;
                self.out.push(Action::AddType(ty.clone()));
                self.out
                    .push(Action::Argument(Role::TypeArg, term_label(arg).to_string()));
            }
            Formula::Relation { rel, arg1, arg2 } => {
                self.ensure(arg1)?;
                self.ensure(arg2)?;
                self.out.push(Action::AddEdge(rel.clone()));
                self.out
                    .push(Action::Argument(Role::Arg1, term_label(arg1).to_string()));
                self.out
                    .push(Action::Argument(Role::Arg2, term_label(arg2).to_string()));
            }
            Formula::Const { var, ty, name } => {
                let entity = Term::entity(ty, name);
                self.ensure(&Term::Var(var.clone()))?;
                self.ensure(&entity)?;
                self.out.push(Action::AddEdge(CONST_RELATION.to_string()));
                self.out.push(Action::Argument(Role::Arg1, var.clone()));
                self.out.push(Action::Argument(Role::Arg2, name.clone()));
            }
            Formula::Operator {
                op, roles, body, ..
            } => {
                let inside = body.variables();
                for (_, v) in roles {
                    if !inside.contains(&v.as_str()) {
                        self.ensure(&Term::Var(v.clone()))?;
                    }
                }
                self.out.push(Action::StartOperation(op.clone()));
                self.formula(body)?;
                self.out.push(Action::EndOperation(op.clone()));
                for (r, v) in roles {
                    self.out
                        .push(Action::Argument(Role::Op(r.clone()), v.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Action sequence for the canonical form of `lf`. Every action is checked
/// against the interpreter; structural well-formedness is not required.
pub fn lf_to_actions(lf: &LogicalForm, schema: &KbSchema) -> Result<Vec<Action>, LfError> {
    check_bound(lf)?;
    let lf = canonicalize(lf);
    let mut lin = Linearizer {
        schema,
        seen: HashSet::new(),
        out: Vec::new(),
    };
    lin.ensure(&Term::Var(lf.answer.clone()))?;
    lin.formula(&lf.body)?;
    let mut state = PartialGraphState::new();
    for a in &lin.out {
        state.apply(a, schema)?;
    }
    if let Some(p) = &state.pending {
        return Err(ActionError::Incomplete(format!("{p:?}")).into());
    }
    Ok(lin.out)
}

struct GraphBuilder<'a> {
    schema: &'a KbSchema,
    graph: SemanticGraph,
    ids: HashMap<String, NodeId>,
}

impl GraphBuilder<'_> {
    fn node(&mut self, t: &Term) -> Result<NodeId, LfError> {
        let label = term_label(t);
        if let Some(id) = self.ids.get(label) {
            return Ok(*id);
        }
        let kind = match t {
            Term::Var(_) => NodeKind::Variable,
            Term::Entity { ty, name } => {
                check_entity(self.schema, ty, name)?;
                NodeKind::Entity
            }
        };
        let id = self.graph.add_node(kind, label, Some(self.schema))?;
        self.ids.insert(label.to_string(), id);
        Ok(id)
    }

    fn formula(&mut self, f: &Formula) -> Result<(), LfError> {
        match f {
            Formula::Conj(items) => {
                for item in items {
                    self.formula(item)?;
                }
            }
            Formula::TypePred { ty, arg } => {
                let n = self.node(arg)?;
                self.graph.attach_type(ty, n, Some(self.schema))?;
            }
            Formula::Relation { rel, arg1, arg2 } => {
                if self.schema.relation(rel).is_none() {
                    return Err(ActionError::UnknownRelation(rel.clone()).into());
                }
                let a = self.node(arg1)?;
                let b = self.node(arg2)?;
                self.graph.add_edge(rel, a, b)?;
            }
            Formula::Const { var, ty, name } => {
                let a = self.node(&Term::Var(var.clone()))?;
                let b = self.node(&Term::entity(ty, name))?;
                self.graph.add_edge(CONST_RELATION, a, b)?;
            }
            Formula::Operator {
                op, roles, body, ..
            } => {
                let decl = self
                    .schema
                    .operation(op)
                    .ok_or_else(|| ActionError::UnknownOperation(op.clone()))?;
                let expected: Vec<String> = decl.roles().map(str::to_string).collect();
                let inside = body.variables();
                for (_, v) in roles {
                    if !inside.contains(&v.as_str()) {
                        self.node(&Term::Var(v.clone()))?;
                    }
                }
                self.graph.open_scope(op, expected);
                self.formula(body)?;
                let scope = self.graph.close_scope()?;
                for (r, v) in roles {
                    let n = self.node(&Term::Var(v.clone()))?;
                    self.graph.bind_role(scope, r, n)?;
                }
            }
        }
        Ok(())
    }
}

/// Builds the graph of `lf` directly, without going through actions.
pub fn lf_to_graph(lf: &LogicalForm, schema: &KbSchema) -> Result<SemanticGraph, LfError> {
    check_bound(lf)?;
    let lf = canonicalize(lf);
    let mut b = GraphBuilder {
        schema,
        graph: SemanticGraph::new(),
        ids: HashMap::new(),
    };
    b.node(&Term::Var(lf.answer.clone()))?;
    b.formula(&lf.body)?;
    Ok(b.graph)
}

fn graph_term(g: &SemanticGraph, schema: &KbSchema, id: NodeId) -> Result<Term, LfError> {
    let n = g.node(id).ok_or(GraphError::DanglingEndpoint(id))?;
    match n.kind {
        NodeKind::Variable => Ok(Term::Var(n.label.clone())),
        NodeKind::Entity => {
            let ty = schema
                .entity_type(&n.label)
                .ok_or_else(|| GraphError::UnknownEntity(n.label.clone()))?;
            Ok(Term::entity(ty, &n.label))
        }
        NodeKind::Type => Err(GraphError::TypeNodeArgument(id).into()),
    }
}

fn graph_items(
    g: &SemanticGraph,
    schema: &KbSchema,
    elements: &[Element],
) -> Result<Vec<Formula>, LfError> {
    let mut out = Vec::new();
    for el in elements {
        match *el {
            Element::Node(_) => {}
            Element::Attachment(i) => {
                let a = &g.attachments[i];
                out.push(Formula::TypePred {
                    ty: g.nodes[a.type_node.0].label.clone(),
                    arg: graph_term(g, schema, a.constrained_node)?,
                });
            }
            Element::Edge(i) => {
                let e = &g.edges[i];
                let arg1 = graph_term(g, schema, e.arg1)?;
                let arg2 = graph_term(g, schema, e.arg2)?;
                if e.relation == CONST_RELATION {
                    match (arg1, arg2) {
                        (Term::Var(var), Term::Entity { ty, name }) => {
                            out.push(Formula::Const { var, ty, name })
                        }
                        _ => {
                            return Err(LfError::NotConvertible(
                                "const edge must join a variable to an entity".into(),
                            ))
                        }
                    }
                } else {
                    out.push(Formula::Relation {
                        rel: e.relation.clone(),
                        arg1,
                        arg2,
                    });
                }
            }
            Element::Scope(s) => {
                let scope = &g.scopes[s.0];
                if !scope.closed || scope.roles.len() != scope.expected_roles.len() {
                    return Err(LfError::NotConvertible(format!(
                        "operation `{}` is incomplete",
                        scope.operation
                    )));
                }
                let decl = schema
                    .operation(&scope.operation)
                    .ok_or_else(|| ActionError::UnknownOperation(scope.operation.clone()))?;
                let body_index = decl
                    .layout
                    .iter()
                    .position(|s| *s == OperationSlot::Body)
                    .expect("layout has a body");
                let mut roles = Vec::with_capacity(scope.roles.len());
                for (r, n) in &scope.roles {
                    match graph_term(g, schema, *n)? {
                        Term::Var(v) => roles.push((r.clone(), v)),
                        Term::Entity { .. } => {
                            return Err(LfError::NotConvertible(format!(
                                "role `{r}` bound to an entity"
                            )))
                        }
                    }
                }
                let body = graph_items(g, schema, &scope.elements)?;
                out.push(Formula::Operator {
                    op: scope.operation.clone(),
                    roles,
                    body_index,
                    body: Box::new(Formula::from_items(body)),
                });
            }
        }
    }
    Ok(out)
}

/// Reads a logical form off `graph`, conjuncts in creation order.
pub fn graph_to_lf(graph: &SemanticGraph, schema: &KbSchema) -> Result<LogicalForm, LfError> {
    let ret = graph.return_node.ok_or(LfError::NoReturnNode)?;
    let answer = match graph.node(ret) {
        Some(n) if n.kind == NodeKind::Variable => n.label.clone(),
        _ => return Err(LfError::NoReturnNode),
    };
    let body = graph_items(graph, schema, &graph.root)?;
    Ok(LogicalForm {
        answer,
        body: Formula::from_items(body),
    })
}

/// Interprets `seq`, requires a well-formed graph and reads it back.
pub fn actions_to_lf(seq: &[Action], schema: &KbSchema) -> Result<LogicalForm, LfError> {
    let g = build_graph(seq, schema)?;
    graph_to_lf(&g, schema)
}
