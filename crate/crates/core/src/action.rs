//! Graph-construction actions and the interpreter that folds them into a
//! [`SemanticGraph`].
//!
//! Every action has a structure part (its tag) and a semantic part (its
//! label); the text form is `<structure>:<semantic>`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, NodeKind, ScopeId, SemanticGraph, Violation};
use crate::schema::{KbSchema, CONST_RELATION};

pub const ADD_VARIABLE: &str = "add_variable";
pub const ADD_ENTITY: &str = "add_entity_node";
pub const ADD_TYPE: &str = "add_type_node";
pub const ADD_EDGE: &str = "add_edge";
pub const START_OPERATION: &str = "start_operation";
pub const END_OPERATION: &str = "end_operation";
pub const TYPE_ARG: &str = "arg";
pub const ARG1: &str = "arg1_node";
pub const ARG2: &str = "arg2_node";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// `arg`: the node a type node constrains.
    TypeArg,
    Arg1,
    Arg2,
    /// An operation role such as `arg-for`.
    Op(String),
}

impl Role {
    pub fn as_str(&self) -> &str {
        match self {
            Role::TypeArg => TYPE_ARG,
            Role::Arg1 => ARG1,
            Role::Arg2 => ARG2,
            Role::Op(r) => r,
        }
    }

    fn from_tag(tag: &str) -> Option<Role> {
        match tag {
            TYPE_ARG => Some(Role::TypeArg),
            ARG1 => Some(Role::Arg1),
            ARG2 => Some(Role::Arg2),
            t if t.starts_with("arg")
                && t.len() > 3
                && t.chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') =>
            {
                Some(Role::Op(t.to_string()))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    AddVariable(String),
    AddEntity(String),
    AddType(String),
    AddEdge(String),
    StartOperation(String),
    EndOperation(String),
    Argument(Role, String),
}

impl Action {
    pub fn structure(&self) -> &str {
        match self {
            Action::AddVariable(_) => ADD_VARIABLE,
            Action::AddEntity(_) => ADD_ENTITY,
            Action::AddType(_) => ADD_TYPE,
            Action::AddEdge(_) => ADD_EDGE,
            Action::StartOperation(_) => START_OPERATION,
            Action::EndOperation(_) => END_OPERATION,
            Action::Argument(role, _) => role.as_str(),
        }
    }

    pub fn semantic(&self) -> &str {
        match self {
            Action::AddVariable(s)
            | Action::AddEntity(s)
            | Action::AddType(s)
            | Action::AddEdge(s)
            | Action::StartOperation(s)
            | Action::EndOperation(s)
            | Action::Argument(_, s) => s,
        }
    }

    pub fn is_argument(&self) -> bool {
        matches!(self, Action::Argument(..))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse action `{text}`: {reason}")]
pub struct ActionParseError {
    pub text: String,
    pub reason: &'static str,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.structure(), self.semantic())
    }
}

impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason| ActionParseError {
            text: text.to_string(),
            reason,
        };
        let (tag, label) = text.split_once(':').ok_or_else(|| err("missing `:`"))?;
        if label.is_empty() {
            return Err(err("empty semantic part"));
        }
        if label.chars().any(|c| c.is_whitespace()) {
            return Err(err("whitespace in semantic part"));
        }
        let label = label.to_string();
        Ok(match tag {
            ADD_VARIABLE => Action::AddVariable(label),
            ADD_ENTITY | "add_entity" => Action::AddEntity(label),
            ADD_TYPE | "add_type" => Action::AddType(label),
            ADD_EDGE => Action::AddEdge(label),
            START_OPERATION => Action::StartOperation(label),
            END_OPERATION => Action::EndOperation(label),
            other => match Role::from_tag(other) {
                Some(role) => Action::Argument(role, label),
                None => return Err(err("unknown structure part")),
            },
        })
    }
}

pub fn action_to_string(action: &Action) -> String {
    action.to_string()
}

pub fn string_to_action(text: &str) -> Result<Action, ActionParseError> {
    text.parse()
}

/// Whitespace-separated action tokens.
pub fn format_sequence(seq: &[Action]) -> String {
    seq.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_sequence(text: &str) -> Result<Vec<Action>, ActionParseError> {
    text.split_whitespace().map(str::parse).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("argument `{0}` has no pending main action")]
    OrphanArgument(String),
    #[error("expected argument `{expected}`, found `{found}`")]
    ArityViolation { expected: String, found: String },
    #[error("unbalanced operation: `{found}` does not close {expected:?}")]
    UnbalancedOperation {
        expected: Option<String>,
        found: String,
    },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("label `{0}` is already bound")]
    DuplicateLabel(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("role `{role}` needs a variable, `{label}` is not one")]
    RoleNotVariable { role: String, label: String },
    #[error("`const` binds a variable to an entity; `{0}` does not fit")]
    ConstArgument(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("sequence ends while `{0}` still awaits arguments")]
    Incomplete(String),
    #[error("resulting graph is not well formed: {0:?}")]
    IllFormedResult(Vec<Violation>),
}

/// A main action still waiting for its argument actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pending {
    Type {
        ty: String,
    },
    Edge {
        relation: String,
        arg1: Option<NodeId>,
    },
    Roles {
        scope: ScopeId,
        operation: String,
        /// Roles not yet bound, in declaration order.
        remaining: Vec<String>,
    },
}

impl Pending {
    pub fn expected_role(&self) -> Role {
        match self {
            Pending::Type { .. } => Role::TypeArg,
            Pending::Edge { arg1: None, .. } => Role::Arg1,
            Pending::Edge { arg1: Some(_), .. } => Role::Arg2,
            Pending::Roles { remaining, .. } => Role::Op(remaining[0].clone()),
        }
    }

    fn describe(&self) -> String {
        match self {
            Pending::Type { ty } => format!("{ADD_TYPE}:{ty}"),
            Pending::Edge { relation, .. } => format!("{ADD_EDGE}:{relation}"),
            Pending::Roles { operation, .. } => format!("{END_OPERATION}:{operation}"),
        }
    }
}

/// The controller's view of a partially decoded sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialGraphState {
    pub graph: SemanticGraph,
    pub pending: Option<Pending>,
    /// Variable and entity labels bound so far.
    pub symbols: BTreeMap<String, NodeId>,
}

/// What an accepted action does to the state.
enum Effect {
    NewNode(NodeKind, String),
    SetPending(Pending),
    CommitType {
        ty: String,
        node: NodeId,
    },
    EdgeArg1 {
        relation: String,
        node: NodeId,
    },
    CommitEdge {
        relation: String,
        arg1: NodeId,
        arg2: NodeId,
    },
    OpenScope {
        operation: String,
        roles: Vec<String>,
    },
    CloseScope {
        operation: String,
        roles: Vec<String>,
    },
    BindRole {
        scope: ScopeId,
        operation: String,
        remaining: Vec<String>,
        node: NodeId,
    },
}

impl PartialGraphState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_kind(&self, label: &str) -> Option<NodeKind> {
        self.symbols
            .get(label)
            .and_then(|id| self.graph.node(*id))
            .map(|n| n.kind)
    }

    pub fn open_operations(&self) -> impl Iterator<Item = &str> {
        self.graph
            .open
            .iter()
            .map(|s| self.graph.scopes[s.0].operation.as_str())
    }

    /// No pending arguments, no open operations and a return node exists.
    pub fn is_closed(&self) -> bool {
        self.pending.is_none() && self.graph.open.is_empty() && self.graph.return_node.is_some()
    }

    fn plan(&self, action: &Action, schema: &KbSchema) -> Result<Effect, ActionError> {
        if let Some(p) = &self.pending {
            let Action::Argument(role, label) = action else {
                return Err(ActionError::ArityViolation {
                    expected: p.expected_role().as_str().to_string(),
                    found: action.to_string(),
                });
            };
            let expected = p.expected_role();
            if *role != expected {
                return Err(ActionError::ArityViolation {
                    expected: expected.as_str().to_string(),
                    found: action.to_string(),
                });
            }
            let node = *self
                .symbols
                .get(label)
                .ok_or_else(|| ActionError::UnknownLabel(label.clone()))?;
            let kind = self.graph.nodes[node.0].kind;
            return match p {
                Pending::Type { ty } => Ok(Effect::CommitType {
                    ty: ty.clone(),
                    node,
                }),
                Pending::Edge {
                    relation,
                    arg1: None,
                } => {
                    if relation == CONST_RELATION && kind != NodeKind::Variable {
                        return Err(ActionError::ConstArgument(label.clone()));
                    }
                    Ok(Effect::EdgeArg1 {
                        relation: relation.clone(),
                        node,
                    })
                }
                Pending::Edge {
                    relation,
                    arg1: Some(first),
                } => {
                    if *first == node {
                        return Err(GraphError::SelfLoop {
                            relation: relation.clone(),
                            node,
                        }
                        .into());
                    }
                    if relation == CONST_RELATION && kind != NodeKind::Entity {
                        return Err(ActionError::ConstArgument(label.clone()));
                    }
                    Ok(Effect::CommitEdge {
                        relation: relation.clone(),
                        arg1: *first,
                        arg2: node,
                    })
                }
                Pending::Roles {
                    scope,
                    operation,
                    remaining,
                } => {
                    if kind != NodeKind::Variable {
                        return Err(ActionError::RoleNotVariable {
                            role: remaining[0].clone(),
                            label: label.clone(),
                        });
                    }
                    Ok(Effect::BindRole {
                        scope: *scope,
                        operation: operation.clone(),
                        remaining: remaining[1..].to_vec(),
                        node,
                    })
                }
            };
        }
        match action {
            Action::Argument(_, label) => Err(ActionError::OrphanArgument(label.clone())),
            Action::AddVariable(label) => {
                if self.symbols.contains_key(label) {
                    return Err(ActionError::DuplicateLabel(label.clone()));
                }
                if !label.starts_with(|c: char| c.is_ascii_uppercase()) {
                    return Err(GraphError::InvalidLabel(label.clone()).into());
                }
                Ok(Effect::NewNode(NodeKind::Variable, label.clone()))
            }
            Action::AddEntity(label) => {
                if self.symbols.contains_key(label) {
                    return Err(ActionError::DuplicateLabel(label.clone()));
                }
                if schema.entity_type(label).is_none() {
                    return Err(GraphError::UnknownEntity(label.clone()).into());
                }
                Ok(Effect::NewNode(NodeKind::Entity, label.clone()))
            }
            Action::AddType(ty) => {
                if !schema.has_type(ty) {
                    return Err(GraphError::UnknownType(ty.clone()).into());
                }
                Ok(Effect::SetPending(Pending::Type { ty: ty.clone() }))
            }
            Action::AddEdge(rel) => {
                if !schema.is_relation(rel) {
                    return Err(ActionError::UnknownRelation(rel.clone()));
                }
                Ok(Effect::SetPending(Pending::Edge {
                    relation: rel.clone(),
                    arg1: None,
                }))
            }
            Action::StartOperation(op) => {
                let decl = schema
                    .operation(op)
                    .ok_or_else(|| ActionError::UnknownOperation(op.clone()))?;
                Ok(Effect::OpenScope {
                    operation: op.clone(),
                    roles: decl.roles().map(str::to_string).collect(),
                })
            }
            Action::EndOperation(op) => {
                let top = self.open_operations().last();
                if top != Some(op.as_str()) {
                    return Err(ActionError::UnbalancedOperation {
                        expected: top.map(str::to_string),
                        found: op.clone(),
                    });
                }
                let scope = &self.graph.scopes[self.graph.open.last().unwrap().0];
                Ok(Effect::CloseScope {
                    operation: op.clone(),
                    roles: scope.expected_roles.clone(),
                })
            }
        }
    }

    fn commit(&mut self, effect: Effect, schema: &KbSchema) -> Result<(), ActionError> {
        match effect {
            Effect::NewNode(kind, label) => {
                let id = self.graph.add_node(kind, &label, Some(schema))?;
                self.symbols.insert(label, id);
            }
            Effect::SetPending(p) => self.pending = Some(p),
            Effect::CommitType { ty, node } => {
                self.graph.attach_type(&ty, node, Some(schema))?;
                self.pending = None;
            }
            Effect::EdgeArg1 { relation, node } => {
                self.pending = Some(Pending::Edge {
                    relation,
                    arg1: Some(node),
                });
            }
            Effect::CommitEdge {
                relation,
                arg1,
                arg2,
            } => {
                self.graph.add_edge(&relation, arg1, arg2)?;
                self.pending = None;
            }
            Effect::OpenScope { operation, roles } => {
                self.graph.open_scope(&operation, roles);
            }
            Effect::CloseScope { operation, roles } => {
                let scope = self.graph.close_scope()?;
                self.pending = (!roles.is_empty()).then_some(Pending::Roles {
                    scope,
                    operation,
                    remaining: roles,
                });
            }
            Effect::BindRole {
                scope,
                operation,
                remaining,
                node,
            } => {
                let role = match &self.pending {
                    Some(Pending::Roles { remaining, .. }) => remaining[0].clone(),
                    _ => unreachable!("role binding without pending roles"),
                };
                self.graph.bind_role(scope, &role, node)?;
                self.pending = (!remaining.is_empty()).then_some(Pending::Roles {
                    scope,
                    operation,
                    remaining,
                });
            }
        }
        Ok(())
    }

    /// Rejects `action` exactly when [`apply_action`] would, without
    /// touching the state.
    pub fn check(&self, action: &Action, schema: &KbSchema) -> Result<(), ActionError> {
        self.plan(action, schema).map(|_| ())
    }

    /// Applies `action` in place. On error the state is unchanged.
    pub fn apply(&mut self, action: &Action, schema: &KbSchema) -> Result<(), ActionError> {
        let effect = self.plan(action, schema)?;
        self.commit(effect, schema)
    }
}

pub fn apply_action(
    state: &PartialGraphState,
    action: &Action,
    schema: &KbSchema,
) -> Result<PartialGraphState, ActionError> {
    let mut next = state.clone();
    next.apply(action, schema)?;
    Ok(next)
}

/// Folds `seq` from the empty state and requires a well-formed result.
pub fn build_graph(seq: &[Action], schema: &KbSchema) -> Result<SemanticGraph, ActionError> {
    let mut state = PartialGraphState::new();
    for action in seq {
        state.apply(action, schema)?;
    }
    if let Some(p) = &state.pending {
        return Err(ActionError::Incomplete(p.describe()));
    }
    let violations = state.graph.validate_wellformed();
    if !violations.is_empty() {
        return Err(ActionError::IllFormedResult(violations));
    }
    Ok(state.graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> KbSchema {
        KbSchema::parse(
            "type state\ntype city\nentity texas : state\nrelation next_to(state, state)\n\
             operation count(arg-for, body, arg-return)\noperation most(arg-for, arg-for, body)",
        )
        .unwrap()
    }

    fn seq(text: &str) -> Vec<Action> {
        parse_sequence(text).unwrap()
    }

    #[test]
    fn text_forms() {
        assert_eq!(
            Action::AddEdge("next_to".into()).to_string(),
            "add_edge:next_to"
        );
        assert_eq!(
            string_to_action("arg:A").unwrap(),
            Action::Argument(Role::TypeArg, "A".into())
        );
        assert!(string_to_action("add_edge").is_err());
        assert!(string_to_action("add_edge:").is_err());
        assert!(string_to_action("frob:x").is_err());
        assert_eq!(
            string_to_action("add_type:state").unwrap(),
            string_to_action("add_type_node:state").unwrap()
        );
        assert_eq!(
            string_to_action("add_entity:texas").unwrap(),
            Action::AddEntity("texas".into())
        );
        assert_eq!(
            string_to_action("arg-for:B").unwrap(),
            Action::Argument(Role::Op("arg-for".into()), "B".into())
        );
        assert_eq!(
            string_to_action("add_entity_node:<state:0>").unwrap(),
            Action::AddEntity("<state:0>".into())
        );
    }

    #[test]
    fn add_variable_binds_symbol() {
        let s = schema();
        let st = apply_action(
            &PartialGraphState::new(),
            &Action::AddVariable("A".into()),
            &s,
        )
        .unwrap();
        assert_eq!(st.graph.nodes.len(), 1);
        assert_eq!(st.symbols.get("A"), Some(&NodeId(0)));
    }

    #[test]
    fn edge_commits_after_both_arguments() {
        let s = schema();
        let mut st = PartialGraphState::new();
        for a in seq("add_variable:A add_entity_node:texas add_edge:next_to arg1_node:A") {
            st.apply(&a, &s).unwrap();
        }
        assert!(st.graph.edges.is_empty());
        st.apply(&"arg2_node:texas".parse().unwrap(), &s).unwrap();
        assert_eq!(st.graph.edges.len(), 1);
        assert_eq!(st.graph.edges[0].relation, "next_to");
        assert!(st.pending.is_none());
    }

    #[test]
    fn orphan_argument() {
        let s = schema();
        let err = apply_action(
            &PartialGraphState::new(),
            &"arg1_node:A".parse().unwrap(),
            &s,
        )
        .unwrap_err();
        assert_eq!(err, ActionError::OrphanArgument("A".into()));
    }

    #[test]
    fn failed_apply_leaves_state_untouched() {
        let s = schema();
        let mut st = PartialGraphState::new();
        for a in seq("add_variable:A add_edge:next_to arg1_node:A") {
            st.apply(&a, &s).unwrap();
        }
        let before = st.clone();
        assert!(matches!(
            st.apply(&"arg2_node:A".parse().unwrap(), &s),
            Err(ActionError::Graph(GraphError::SelfLoop { .. }))
        ));
        assert_eq!(st, before);
    }

    #[test]
    fn build_fig1() {
        let s = schema();
        let g = build_graph(
            &seq("add_variable:A add_type_node:state arg:A add_entity_node:texas add_edge:next_to arg1_node:A arg2_node:texas"),
            &s,
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.attachments.len(), 1);
        assert_eq!(g.return_node, Some(NodeId(0)));
    }

    #[test]
    fn single_variable_graph() {
        let g = build_graph(&seq("add_variable:A"), &schema()).unwrap();
        assert_eq!(g.return_node, Some(NodeId(0)));
    }

    #[test]
    fn mismatched_operation_end() {
        let err =
            build_graph(&seq("start_operation:count end_operation:most"), &schema()).unwrap_err();
        assert!(matches!(err, ActionError::UnbalancedOperation { .. }));
    }

    #[test]
    fn operation_roles_follow_end() {
        let s = schema();
        let g = build_graph(
            &seq("add_variable:A start_operation:count add_variable:B add_type_node:state arg:B end_operation:count arg-for:B arg-return:A"),
            &s,
        )
        .unwrap();
        assert_eq!(g.scopes.len(), 1);
        assert_eq!(g.scopes[0].roles.len(), 2);
        // The first variable stays the return node.
        assert_eq!(g.return_node, Some(NodeId(0)));
    }

    #[test]
    fn hard_errors() {
        let s = schema();
        let run = |text: &str| build_graph(&seq(text), &s).unwrap_err();
        assert!(matches!(
            run("add_variable:A add_variable:A"),
            ActionError::DuplicateLabel(_)
        ));
        assert!(matches!(
            run("add_entity_node:atlantis"),
            ActionError::Graph(GraphError::UnknownEntity(_))
        ));
        assert!(matches!(
            run("add_variable:A add_edge:borders"),
            ActionError::UnknownRelation(_)
        ));
        assert!(matches!(
            run("add_variable:A add_edge:next_to add_variable:B"),
            ActionError::ArityViolation { .. }
        ));
        assert!(matches!(
            run("add_variable:A add_edge:next_to arg2_node:A"),
            ActionError::ArityViolation { .. }
        ));
        assert!(matches!(
            run("add_variable:A add_edge:next_to arg1_node:Z"),
            ActionError::UnknownLabel(_)
        ));
        assert!(matches!(
            run("add_variable:A add_edge:next_to"),
            ActionError::Incomplete(_)
        ));
        assert!(matches!(
            run("add_variable:A add_entity_node:texas start_operation:count end_operation:count arg-for:texas"),
            ActionError::RoleNotVariable { .. }
        ));
        assert!(matches!(
            run("add_variable:A add_entity_node:texas add_edge:const arg1_node:texas"),
            ActionError::ConstArgument(_)
        ));
        assert!(matches!(
            run("add_variable:A add_entity_node:texas"),
            ActionError::IllFormedResult(ref v) if v == &[Violation::Disconnected]
        ));
        assert!(matches!(
            run("add_variable:a"),
            ActionError::Graph(GraphError::InvalidLabel(_))
        ));
    }
}
