//! Legality of candidate actions under structure (C1) and semantic (C2)
//! constraints.
//!
//! C1 admits an action exactly when the interpreter accepts it and the
//! resulting state can still be completed into a well-formed graph. C2
//! additionally keeps every node's implied type set free of disjoint
//! pairs, with relation argument types taken from the schema.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionError, PartialGraphState, Pending, Role};
use crate::graph::{GraphError, NodeId, NodeKind, SemanticGraph};
use crate::schema::{extract_constraints, KbSchema, SemanticConstraintTable, CONST_RELATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintLevel {
    None,
    C1,
    C1plusC2,
}

impl ConstraintLevel {
    pub fn structure(self) -> bool {
        self >= ConstraintLevel::C1
    }

    pub fn semantic(self) -> bool {
        self == ConstraintLevel::C1plusC2
    }
}

impl fmt::Display for ConstraintLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintLevel::None => "none",
            ConstraintLevel::C1 => "c1",
            ConstraintLevel::C1plusC2 => "c1c2",
        })
    }
}

impl FromStr for ConstraintLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ConstraintLevel::None),
            "c1" => Ok(ConstraintLevel::C1),
            "c1c2" | "c1+c2" | "c1plusc2" => Ok(ConstraintLevel::C1plusC2),
            other => Err(format!("unknown constraint level `{other}`")),
        }
    }
}

/// Stable identifiers of the rule that rejected a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    OrphanArgument,
    ArityOrder,
    UnbalancedOperation,
    UnknownLabel,
    DuplicateLabel,
    UnknownSymbol,
    RoleNotVariable,
    ConstArgument,
    SelfLoop,
    Cyclic,
    /// The pending main action could no longer receive legal arguments.
    NoCandidate,
    Disconnected,
    Incomplete,
    SelectionalPreference,
    TypeConflict,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::OrphanArgument => "OrphanArgument",
            Rule::ArityOrder => "ArityOrder",
            Rule::UnbalancedOperation => "UnbalancedOperation",
            Rule::UnknownLabel => "UnknownLabel",
            Rule::DuplicateLabel => "DuplicateLabel",
            Rule::UnknownSymbol => "UnknownSymbol",
            Rule::RoleNotVariable => "RoleNotVariable",
            Rule::ConstArgument => "ConstArgument",
            Rule::SelfLoop => "SelfLoop",
            Rule::Cyclic => "Cyclic",
            Rule::NoCandidate => "NoCandidate",
            Rule::Disconnected => "Disconnected",
            Rule::Incomplete => "Incomplete",
            Rule::SelectionalPreference => "SelectionalPreference",
            Rule::TypeConflict => "TypeConflict",
        }
    }

    fn from_error(e: &ActionError) -> Rule {
        match e {
            ActionError::OrphanArgument(_) => Rule::OrphanArgument,
            ActionError::ArityViolation { .. } => Rule::ArityOrder,
            ActionError::UnbalancedOperation { .. } => Rule::UnbalancedOperation,
            ActionError::UnknownLabel(_) => Rule::UnknownLabel,
            ActionError::DuplicateLabel(_) => Rule::DuplicateLabel,
            ActionError::RoleNotVariable { .. } => Rule::RoleNotVariable,
            ActionError::ConstArgument(_) => Rule::ConstArgument,
            ActionError::Graph(GraphError::SelfLoop { .. }) => Rule::SelfLoop,
            ActionError::Incomplete(_) | ActionError::IllFormedResult(_) => Rule::Incomplete,
            ActionError::UnknownRelation(_)
            | ActionError::UnknownOperation(_)
            | ActionError::Graph(_) => Rule::UnknownSymbol,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityVerdict {
    pub allowed: bool,
    pub violated_rule: Option<Rule>,
}

impl LegalityVerdict {
    pub const ALLOWED: LegalityVerdict = LegalityVerdict {
        allowed: true,
        violated_rule: None,
    };

    pub fn denied(rule: Rule) -> Self {
        LegalityVerdict {
            allowed: false,
            violated_rule: Some(rule),
        }
    }
}

/// Types each node is committed to: an entity's declared type, attached
/// type nodes, the argument types of incident relations and, through
/// `const`, the type of the bound entity. Role bindings imply nothing.
pub fn implied_types(graph: &SemanticGraph, schema: &KbSchema) -> Vec<BTreeSet<String>> {
    let mut types = vec![BTreeSet::new(); graph.nodes.len()];
    for n in &graph.nodes {
        if n.kind == NodeKind::Entity {
            if let Some(t) = schema.entity_type(&n.label) {
                types[n.id.0].insert(t.to_string());
            }
        }
    }
    for a in &graph.attachments {
        types[a.constrained_node.0].insert(graph.nodes[a.type_node.0].label.clone());
    }
    for e in &graph.edges {
        if e.relation == CONST_RELATION {
            if let Some(t) = schema.entity_type(&graph.nodes[e.arg2.0].label) {
                types[e.arg1.0].insert(t.to_string());
            }
        } else if let Some((t1, t2)) = schema.relation(&e.relation) {
            types[e.arg1.0].insert(t1.to_string());
            types[e.arg2.0].insert(t2.to_string());
        }
    }
    types
}

/// Facts about a state shared by every candidate checked against it.
#[derive(Debug, Clone)]
pub struct StateAnalysis {
    /// Relation-forest component of every node.
    component: Vec<usize>,
    cyclic: bool,
    connected: bool,
    types: Vec<BTreeSet<String>>,
    /// Variable and entity nodes.
    arguments: Vec<NodeId>,
    has_variable: bool,
}

impl StateAnalysis {
    pub fn new(state: &PartialGraphState, schema: &KbSchema) -> Self {
        let g = &state.graph;
        let (mut forest, cyclic) = g.relation_forest();
        let component = (0..g.nodes.len()).map(|i| forest.find(i)).collect();
        let arguments: Vec<NodeId> = g.argument_nodes().map(|n| n.id).collect();
        StateAnalysis {
            component,
            cyclic,
            connected: g.is_connected(),
            types: implied_types(g, schema),
            has_variable: g.nodes.iter().any(|n| n.kind == NodeKind::Variable),
            arguments,
        }
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn types_of(&self, node: NodeId) -> &BTreeSet<String> {
        &self.types[node.0]
    }
}

/// A schema bound to a constraint level, with the derived tables cached.
#[derive(Debug, Clone)]
pub struct Controller<'a> {
    pub schema: &'a KbSchema,
    pub level: ConstraintLevel,
    table: SemanticConstraintTable,
}

impl<'a> Controller<'a> {
    pub fn new(schema: &'a KbSchema, level: ConstraintLevel) -> Self {
        Controller {
            schema,
            level,
            table: extract_constraints(schema),
        }
    }

    pub fn analyze(&self, state: &PartialGraphState) -> StateAnalysis {
        StateAnalysis::new(state, self.schema)
    }

    fn fits(&self, a: &StateAnalysis, node: NodeId, ty: &str) -> bool {
        !self.level.semantic()
            || a.types[node.0]
                .iter()
                .all(|u| !self.table.conflicting(u, ty))
    }

    fn entity_type(&self, g: &SemanticGraph, node: NodeId) -> Option<&str> {
        self.schema.entity_type(&g.nodes[node.0].label)
    }

    /// Whether `x`, `y` may become the endpoints of a new `relation` edge.
    fn endpoints_ok(
        &self,
        g: &SemanticGraph,
        a: &StateAnalysis,
        relation: &str,
        x: NodeId,
        y: NodeId,
    ) -> bool {
        if x == y || a.component[x.0] == a.component[y.0] {
            return false;
        }
        if relation == CONST_RELATION {
            if g.nodes[x.0].kind != NodeKind::Variable || g.nodes[y.0].kind != NodeKind::Entity {
                return false;
            }
            return match self.entity_type(g, y) {
                Some(t) => self.fits(a, x, t),
                None => false,
            };
        }
        match self.schema.relation(relation) {
            Some((t1, t2)) => self.fits(a, x, t1) && self.fits(a, y, t2),
            None => false,
        }
    }

    fn has_partner(&self, g: &SemanticGraph, a: &StateAnalysis, relation: &str, x: NodeId) -> bool {
        a.arguments
            .iter()
            .any(|&y| self.endpoints_ok(g, a, relation, x, y))
    }

    /// Verdict for `action` in `state`, using a precomputed analysis.
    pub fn check_with(
        &self,
        state: &PartialGraphState,
        a: &StateAnalysis,
        action: &Action,
    ) -> LegalityVerdict {
        if let Err(e) = state.check(action, self.schema) {
            return LegalityVerdict::denied(Rule::from_error(&e));
        }
        if !self.level.structure() {
            return LegalityVerdict::ALLOWED;
        }
        if a.cyclic {
            return LegalityVerdict::denied(Rule::Cyclic);
        }
        let g = &state.graph;
        let node = |label: &str| state.symbols[label];
        let verdict = |ok: bool, rule: Rule| {
            if ok {
                LegalityVerdict::ALLOWED
            } else {
                LegalityVerdict::denied(rule)
            }
        };
        match (&state.pending, action) {
            (None, Action::AddVariable(_) | Action::AddEntity(_) | Action::StartOperation(_)) => {
                LegalityVerdict::ALLOWED
            }
            (None, Action::EndOperation(op)) => {
                let needs_roles = self
                    .schema
                    .operation(op)
                    .is_some_and(|d| d.role_count() > 0);
                verdict(!needs_roles || a.has_variable, Rule::NoCandidate)
            }
            (None, Action::AddType(ty)) => verdict(
                a.arguments.iter().any(|&n| self.fits(a, n, ty)),
                Rule::NoCandidate,
            ),
            (None, Action::AddEdge(rel)) => verdict(
                a.arguments.iter().any(|&x| self.has_partner(g, a, rel, x)),
                Rule::NoCandidate,
            ),
            (Some(Pending::Type { ty }), Action::Argument(Role::TypeArg, label)) => {
                verdict(self.fits(a, node(label), ty), Rule::TypeConflict)
            }
            (
                Some(Pending::Edge {
                    relation,
                    arg1: None,
                }),
                Action::Argument(Role::Arg1, label),
            ) => {
                let x = node(label);
                if relation != CONST_RELATION {
                    if let Some((t1, _)) = self.schema.relation(relation) {
                        if !self.fits(a, x, t1) {
                            return LegalityVerdict::denied(Rule::SelectionalPreference);
                        }
                    }
                }
                verdict(self.has_partner(g, a, relation, x), Rule::NoCandidate)
            }
            (
                Some(Pending::Edge {
                    relation,
                    arg1: Some(x),
                }),
                Action::Argument(Role::Arg2, label),
            ) => {
                let y = node(label);
                if a.component[x.0] == a.component[y.0] {
                    return LegalityVerdict::denied(Rule::Cyclic);
                }
                verdict(
                    self.endpoints_ok(g, a, relation, *x, y),
                    Rule::SelectionalPreference,
                )
            }
            // Remaining role slots can always reuse the variable just bound.
            (Some(Pending::Roles { .. }), Action::Argument(Role::Op(_), _)) => {
                LegalityVerdict::ALLOWED
            }
            _ => unreachable!("interpreter accepted {action} in an incompatible state"),
        }
    }

    pub fn check(&self, state: &PartialGraphState, action: &Action) -> LegalityVerdict {
        self.check_with(state, &self.analyze(state), action)
    }

    /// Whether the sequence may end here.
    pub fn check_finish_with(
        &self,
        state: &PartialGraphState,
        a: &StateAnalysis,
    ) -> LegalityVerdict {
        if state.pending.is_some() || state.graph.return_node.is_none() {
            return LegalityVerdict::denied(Rule::Incomplete);
        }
        if !state.graph.open.is_empty() {
            return LegalityVerdict::denied(Rule::UnbalancedOperation);
        }
        if !self.level.structure() {
            return LegalityVerdict::ALLOWED;
        }
        if a.cyclic {
            return LegalityVerdict::denied(Rule::Cyclic);
        }
        if !a.connected {
            return LegalityVerdict::denied(Rule::Disconnected);
        }
        LegalityVerdict::ALLOWED
    }

    pub fn check_finish(&self, state: &PartialGraphState) -> LegalityVerdict {
        self.check_finish_with(state, &self.analyze(state))
    }

    /// One flag per vocabulary entry.
    pub fn legal_mask(&self, state: &PartialGraphState, vocabulary: &[Action]) -> Vec<bool> {
        let a = self.analyze(state);
        vocabulary
            .iter()
            .map(|act| self.check_with(state, &a, act).allowed)
            .collect()
    }
}

pub fn check_action(
    state: &PartialGraphState,
    action: &Action,
    schema: &KbSchema,
    level: ConstraintLevel,
) -> LegalityVerdict {
    Controller::new(schema, level).check(state, action)
}

/// End-of-sequence legality: nothing pending, all operations closed, a
/// return node and, from C1 on, a connected acyclic graph.
pub fn can_finish(
    state: &PartialGraphState,
    schema: &KbSchema,
    level: ConstraintLevel,
) -> LegalityVerdict {
    Controller::new(schema, level).check_finish(state)
}

/// The entries of `vocabulary` allowed in `state`, in vocabulary order.
pub fn legal_actions(
    state: &PartialGraphState,
    vocabulary: &[Action],
    schema: &KbSchema,
    level: ConstraintLevel,
) -> Vec<Action> {
    let c = Controller::new(schema, level);
    let mask = c.legal_mask(state, vocabulary);
    vocabulary
        .iter()
        .zip(mask)
        .filter(|(_, ok)| *ok)
        .map(|(a, _)| a.clone())
        .collect()
}
