//! Semantic graphs: variable, entity and type nodes joined by binary
//! relation edges, type attachments and operation scopes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{KbSchema, CONST_RELATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScopeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Variable,
    Entity,
    Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub relation: String,
    pub arg1: NodeId,
    pub arg2: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeAttachment {
    pub type_node: NodeId,
    pub constrained_node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationScope {
    pub operation: String,
    /// Elements created between the start and the end of the operation.
    pub elements: Vec<Element>,
    pub expected_roles: Vec<String>,
    pub roles: Vec<(String, NodeId)>,
    pub closed: bool,
}

/// A reference to something committed to the graph, in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Element {
    Node(NodeId),
    Edge(usize),
    Attachment(usize),
    Scope(ScopeId),
}

/// Owning scopes of edges, attachments and scopes, in that order.
type Containers = (
    Vec<Option<ScopeId>>,
    Vec<Option<ScopeId>>,
    Vec<Option<ScopeId>>,
);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub attachments: Vec<TypeAttachment>,
    pub scopes: Vec<OperationScope>,
    /// Top-level elements, in creation order.
    pub root: Vec<Element>,
    /// Scopes started but not yet ended, innermost last.
    pub open: Vec<ScopeId>,
    pub return_node: Option<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("invalid variable label `{0}`")]
    InvalidLabel(String),
    #[error("edge endpoint {0} does not exist")]
    DanglingEndpoint(NodeId),
    #[error("edge `{relation}` would connect {node} to itself")]
    SelfLoop { relation: String, node: NodeId },
    #[error("node {0} is a type node and cannot be used here")]
    TypeNodeArgument(NodeId),
    #[error("no open operation to end")]
    NoOpenScope,
    #[error("scope {0:?} does not exist")]
    UnknownScope(ScopeId),
}

/// Structural problems reported by [`SemanticGraph::validate_wellformed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    Disconnected,
    Cyclic,
    DanglingEndpoint,
    ScopeImbalance,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::Disconnected => "Disconnected",
            Violation::Cyclic => "Cyclic",
            Violation::DanglingEndpoint => "DanglingEndpoint",
            Violation::ScopeImbalance => "ScopeImbalance",
        };
        f.write_str(s)
    }
}

/// Schema problems reported by [`SemanticGraph::schema_violations`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaViolation {
    SelectionalPreference {
        relation: String,
        node: NodeId,
        expected: String,
        found: String,
    },
    TypeConflict {
        node: NodeId,
        types: Vec<String>,
    },
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaViolation::SelectionalPreference {
                relation,
                node,
                expected,
                found,
            } => write!(
                f,
                "SelectionalPreference: `{relation}` expects {expected} at {node}, found {found}"
            ),
            SchemaViolation::TypeConflict { node, types } => {
                write!(f, "TypeConflict: {node} has types {}", types.join(", "))
            }
        }
    }
}

/// Plain union-find over dense indices.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

impl SemanticGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.0)
    }

    fn push_element(&mut self, element: Element) {
        match self.open.last() {
            Some(scope) => self.scopes[scope.0].elements.push(element),
            None => self.root.push(element),
        }
    }

    /// Appends a node. Entity and type labels are checked against `schema`
    /// when one is supplied. The first variable becomes the return node.
    pub fn add_node(
        &mut self,
        kind: NodeKind,
        label: &str,
        schema: Option<&KbSchema>,
    ) -> Result<NodeId, GraphError> {
        match kind {
            NodeKind::Variable => {
                if !label.starts_with(|c: char| c.is_ascii_uppercase())
                    || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Err(GraphError::InvalidLabel(label.to_string()));
                }
            }
            NodeKind::Entity => {
                if let Some(s) = schema {
                    if s.entity_type(label).is_none() {
                        return Err(GraphError::UnknownEntity(label.to_string()));
                    }
                }
            }
            NodeKind::Type => {
                if let Some(s) = schema {
                    if !s.has_type(label) {
                        return Err(GraphError::UnknownType(label.to_string()));
                    }
                }
            }
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            kind,
            label: label.to_string(),
        });
        if kind == NodeKind::Variable && self.return_node.is_none() {
            self.return_node = Some(id);
        }
        self.push_element(Element::Node(id));
        Ok(id)
    }

    fn check_endpoint(&self, id: NodeId) -> Result<(), GraphError> {
        match self.node(id) {
            None => Err(GraphError::DanglingEndpoint(id)),
            Some(n) if n.kind == NodeKind::Type => Err(GraphError::TypeNodeArgument(id)),
            Some(_) => Ok(()),
        }
    }

    pub fn add_edge(
        &mut self,
        relation: &str,
        arg1: NodeId,
        arg2: NodeId,
    ) -> Result<(), GraphError> {
        self.check_endpoint(arg1)?;
        self.check_endpoint(arg2)?;
        if arg1 == arg2 {
            return Err(GraphError::SelfLoop {
                relation: relation.to_string(),
                node: arg1,
            });
        }
        self.edges.push(Edge {
            relation: relation.to_string(),
            arg1,
            arg2,
        });
        self.push_element(Element::Edge(self.edges.len() - 1));
        Ok(())
    }

    /// Creates a fresh type node labelled `ty` constraining `node`.
    pub fn attach_type(
        &mut self,
        ty: &str,
        node: NodeId,
        schema: Option<&KbSchema>,
    ) -> Result<NodeId, GraphError> {
        self.check_endpoint(node)?;
        let type_node = self.add_node(NodeKind::Type, ty, schema)?;
        self.attachments.push(TypeAttachment {
            type_node,
            constrained_node: node,
        });
        self.push_element(Element::Attachment(self.attachments.len() - 1));
        Ok(type_node)
    }

    pub fn open_scope(&mut self, operation: &str, expected_roles: Vec<String>) -> ScopeId {
        let id = ScopeId(self.scopes.len());
        self.scopes.push(OperationScope {
            operation: operation.to_string(),
            elements: Vec::new(),
            expected_roles,
            roles: Vec::new(),
            closed: false,
        });
        self.push_element(Element::Scope(id));
        self.open.push(id);
        id
    }

    /// Ends the innermost open scope. Roles are bound afterwards.
    pub fn close_scope(&mut self) -> Result<ScopeId, GraphError> {
        let id = self.open.pop().ok_or(GraphError::NoOpenScope)?;
        self.scopes[id.0].closed = true;
        Ok(id)
    }

    pub fn bind_role(
        &mut self,
        scope: ScopeId,
        role: &str,
        node: NodeId,
    ) -> Result<(), GraphError> {
        self.check_endpoint(node)?;
        let s = self
            .scopes
            .get_mut(scope.0)
            .ok_or(GraphError::UnknownScope(scope))?;
        s.roles.push((role.to_string(), node));
        Ok(())
    }

    /// Variable and entity nodes; type nodes hang off attachments.
    pub fn argument_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind != NodeKind::Type)
    }

    fn valid(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    /// Components under relation edges, type attachments and shared scope
    /// roles.
    pub(crate) fn connectivity(&self) -> DisjointSets {
        let mut sets = DisjointSets::new(self.nodes.len());
        for e in &self.edges {
            if self.valid(e.arg1) && self.valid(e.arg2) {
                sets.union(e.arg1.0, e.arg2.0);
            }
        }
        for a in &self.attachments {
            if self.valid(a.type_node) && self.valid(a.constrained_node) {
                sets.union(a.type_node.0, a.constrained_node.0);
            }
        }
        for s in &self.scopes {
            let mut bound = s.roles.iter().map(|(_, n)| *n).filter(|n| self.valid(*n));
            if let Some(first) = bound.next() {
                for n in bound {
                    sets.union(first.0, n.0);
                }
            }
        }
        sets
    }

    /// Components under relation edges alone. Returns the sets and whether
    /// any edge closed a cycle.
    pub(crate) fn relation_forest(&self) -> (DisjointSets, bool) {
        let mut sets = DisjointSets::new(self.nodes.len());
        let mut cyclic = false;
        for e in &self.edges {
            if self.valid(e.arg1) && self.valid(e.arg2) && !sets.union(e.arg1.0, e.arg2.0) {
                cyclic = true;
            }
        }
        (sets, cyclic)
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut sets = self.connectivity();
        let root = sets.find(0);
        (1..self.nodes.len()).all(|i| sets.find(i) == root)
    }

    /// Lists violations in a fixed order: connectivity, cycles, dangling
    /// references, scope imbalance. An empty list means well formed.
    pub fn validate_wellformed(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.is_connected() {
            out.push(Violation::Disconnected);
        }
        if self.relation_forest().1 {
            out.push(Violation::Cyclic);
        }
        let dangling = self
            .edges
            .iter()
            .any(|e| !self.valid(e.arg1) || !self.valid(e.arg2))
            || self
                .attachments
                .iter()
                .any(|a| !self.valid(a.type_node) || !self.valid(a.constrained_node))
            || self
                .scopes
                .iter()
                .any(|s| s.roles.iter().any(|(_, n)| !self.valid(*n)))
            || self.return_node.is_some_and(|n| !self.valid(n));
        if dangling {
            out.push(Violation::DanglingEndpoint);
        }
        let imbalance = !self.open.is_empty()
            || self
                .scopes
                .iter()
                .any(|s| !s.closed || s.roles.len() != s.expected_roles.len());
        if imbalance {
            out.push(Violation::ScopeImbalance);
        }
        out
    }

    /// Type violations against the schema, computed on the finished graph.
    /// `const` edges make both ends one node for typing. Every class of
    /// nodes may carry at most one type, counting attached types, entity
    /// types and the types relation signatures demand of their endpoints.
    pub fn schema_violations(&self, schema: &KbSchema) -> Vec<SchemaViolation> {
        let mut sets = DisjointSets::new(self.nodes.len());
        for e in &self.edges {
            if e.relation == CONST_RELATION && self.valid(e.arg1) && self.valid(e.arg2) {
                sets.union(e.arg1.0, e.arg2.0);
            }
        }
        let mut own: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for n in &self.nodes {
            if n.kind == NodeKind::Entity {
                if let Some(t) = schema.entity_type(&n.label) {
                    own.entry(sets.find(n.id.0))
                        .or_default()
                        .insert(t.to_string());
                }
            }
        }
        for a in &self.attachments {
            if let (Some(t), true) = (self.node(a.type_node), self.valid(a.constrained_node)) {
                own.entry(sets.find(a.constrained_node.0))
                    .or_default()
                    .insert(t.label.clone());
            }
        }
        let mut out = Vec::new();
        let mut demanded: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for e in &self.edges {
            let Some((t1, t2)) = schema.relation(&e.relation) else {
                continue;
            };
            for (node, expected) in [(e.arg1, t1), (e.arg2, t2)] {
                if !self.valid(node) {
                    continue;
                }
                let class = sets.find(node.0);
                demanded
                    .entry(class)
                    .or_default()
                    .insert(expected.to_string());
                for found in own.get(&class).into_iter().flatten() {
                    if found != expected {
                        out.push(SchemaViolation::SelectionalPreference {
                            relation: e.relation.clone(),
                            node,
                            expected: expected.to_string(),
                            found: found.clone(),
                        });
                    }
                }
            }
        }
        let classes: BTreeSet<usize> = own.keys().chain(demanded.keys()).copied().collect();
        for c in classes {
            let types: BTreeSet<String> = own
                .get(&c)
                .into_iter()
                .chain(demanded.get(&c))
                .flatten()
                .cloned()
                .collect();
            if types.len() > 1 {
                out.push(SchemaViolation::TypeConflict {
                    node: NodeId(c),
                    types: types.into_iter().collect(),
                });
            }
        }
        out
    }

    /// Owning scope of every edge, attachment and scope (`None` = top level).
    fn containers(&self) -> Containers {
        let mut edge_c = vec![None; self.edges.len()];
        let mut att_c = vec![None; self.attachments.len()];
        let mut scope_c = vec![None; self.scopes.len()];
        for (sid, scope) in self.scopes.iter().enumerate() {
            for el in &scope.elements {
                match *el {
                    Element::Edge(i) if i < edge_c.len() => edge_c[i] = Some(ScopeId(sid)),
                    Element::Attachment(i) if i < att_c.len() => att_c[i] = Some(ScopeId(sid)),
                    Element::Scope(s) if s.0 < scope_c.len() => scope_c[s.0] = Some(ScopeId(sid)),
                    _ => {}
                }
            }
        }
        (edge_c, att_c, scope_c)
    }

    /// Order-free description of the graph under a naming of its variables.
    /// Two graphs with the same description are equal up to element order.
    pub(crate) fn describe(&self, var_name: &dyn Fn(NodeId) -> String) -> String {
        let name = |id: NodeId| -> String {
            match self.node(id) {
                Some(n) if n.kind == NodeKind::Variable => var_name(id),
                Some(n) if n.kind == NodeKind::Entity => format!("'{}", n.label),
                Some(n) => format!("#{}", n.label),
                None => format!("?{}", id.0),
            }
        };
        let (edge_c, att_c, scope_c) = self.containers();
        fn level(
            g: &SemanticGraph,
            at: Option<ScopeId>,
            name: &dyn Fn(NodeId) -> String,
            containers: &Containers,
        ) -> String {
            let mut items = Vec::new();
            for (i, e) in g.edges.iter().enumerate() {
                if containers.0[i] == at {
                    items.push(format!("{}({},{})", e.relation, name(e.arg1), name(e.arg2)));
                }
            }
            for (i, a) in g.attachments.iter().enumerate() {
                if containers.1[i] == at {
                    let label = g.node(a.type_node).map(|n| n.label.as_str()).unwrap_or("?");
                    items.push(format!("{}[{}]", label, name(a.constrained_node)));
                }
            }
            for (i, s) in g.scopes.iter().enumerate() {
                if containers.2[i] == at {
                    let roles: Vec<String> = s
                        .roles
                        .iter()
                        .map(|(r, n)| format!("{r}={}", name(*n)))
                        .collect();
                    items.push(format!(
                        "{}<{}>{}{{{}}}",
                        s.operation,
                        roles.join(","),
                        if s.closed { "" } else { "~" },
                        level(g, Some(ScopeId(i)), name, containers)
                    ));
                }
            }
            items.sort();
            items.join(";")
        }
        let containers = (edge_c, att_c, scope_c);
        let mut vars: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Variable)
            .map(|n| var_name(n.id))
            .collect();
        vars.sort();
        let mut entities: Vec<&str> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Entity)
            .map(|n| n.label.as_str())
            .collect();
        entities.sort();
        let mut types: Vec<&str> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Type)
            .map(|n| n.label.as_str())
            .collect();
        types.sort();
        format!(
            "V[{}] E[{}] T[{}] R[{}] {{{}}} open={}",
            vars.join(","),
            entities.join(","),
            types.join(","),
            self.return_node.map(name).unwrap_or_default(),
            level(self, None, &name, &containers),
            self.open.len()
        )
    }
}

/// Incidence summary of one variable that any isomorphism must preserve.
fn variable_invariant(g: &SemanticGraph, v: NodeId) -> Vec<String> {
    let mut inv = Vec::new();
    for e in &g.edges {
        if e.arg1 == v {
            inv.push(format!("{}/1", e.relation));
        }
        if e.arg2 == v {
            inv.push(format!("{}/2", e.relation));
        }
    }
    for a in &g.attachments {
        if a.constrained_node == v {
            let label = g
                .node(a.type_node)
                .map(|n| n.label.clone())
                .unwrap_or_default();
            inv.push(format!("type:{label}"));
        }
    }
    for s in &g.scopes {
        for (r, n) in &s.roles {
            if *n == v {
                inv.push(format!("role:{}:{r}", s.operation));
            }
        }
    }
    if g.return_node == Some(v) {
        inv.push("return".into());
    }
    inv.sort();
    inv
}

type Adjacency = HashMap<(usize, usize), Vec<String>>;

fn adjacency(g: &SemanticGraph) -> Adjacency {
    let mut adj: Adjacency = HashMap::new();
    for e in &g.edges {
        adj.entry((e.arg1.0, e.arg2.0))
            .or_default()
            .push(e.relation.clone());
    }
    for v in adj.values_mut() {
        v.sort();
    }
    adj
}

/// True iff some renaming of variables maps `g1` onto `g2`, preserving node
/// kinds, entity and type labels, edges, attachments, scopes and the return
/// node. Element order is ignored.
pub fn graphs_isomorphic(g1: &SemanticGraph, g2: &SemanticGraph) -> bool {
    let vars = |g: &SemanticGraph| -> Vec<NodeId> {
        g.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Variable)
            .map(|n| n.id)
            .collect()
    };
    let (v1, v2) = (vars(g1), vars(g2));
    if v1.len() != v2.len()
        || g1.nodes.len() != g2.nodes.len()
        || g1.edges.len() != g2.edges.len()
        || g1.attachments.len() != g2.attachments.len()
        || g1.scopes.len() != g2.scopes.len()
    {
        return false;
    }
    let entity_index = |g: &SemanticGraph| -> BTreeMap<String, usize> {
        g.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Entity)
            .map(|n| (n.label.clone(), n.id.0))
            .collect()
    };
    let (e1, e2) = (entity_index(g1), entity_index(g2));
    if e1.keys().ne(e2.keys()) {
        return false;
    }
    let inv1: Vec<Vec<String>> = v1.iter().map(|v| variable_invariant(g1, *v)).collect();
    let inv2: Vec<Vec<String>> = v2.iter().map(|v| variable_invariant(g2, *v)).collect();
    {
        let (mut a, mut b) = (inv1.clone(), inv2.clone());
        a.sort();
        b.sort();
        if a != b {
            return false;
        }
    }
    let target = g2.describe(&|id| format!("x{}", id.0));
    let (adj1, adj2) = (adjacency(g1), adjacency(g2));
    // Entities map to the equally-labelled entity.
    let mut fixed: HashMap<usize, usize> = HashMap::new();
    for (label, i) in &e1 {
        fixed.insert(*i, e2[label]);
    }

    struct Search<'a> {
        g1: &'a SemanticGraph,
        v1: &'a [NodeId],
        v2: &'a [NodeId],
        inv1: &'a [Vec<String>],
        inv2: &'a [Vec<String>],
        adj1: &'a Adjacency,
        adj2: &'a Adjacency,
        target: &'a str,
        map: HashMap<usize, usize>,
        used: Vec<bool>,
    }

    impl Search<'_> {
        fn consistent(&self, a: usize, b: usize) -> bool {
            let empty = Vec::new();
            for (&x, &y) in &self.map {
                let f1 = self.adj1.get(&(a, x)).unwrap_or(&empty);
                let f2 = self.adj2.get(&(b, y)).unwrap_or(&empty);
                let r1 = self.adj1.get(&(x, a)).unwrap_or(&empty);
                let r2 = self.adj2.get(&(y, b)).unwrap_or(&empty);
                if f1 != f2 || r1 != r2 {
                    return false;
                }
            }
            true
        }

        fn run(&mut self, k: usize) -> bool {
            if k == self.v1.len() {
                let map = &self.map;
                let desc = self.g1.describe(&|id| format!("x{}", map[&id.0]));
                return desc == self.target;
            }
            let a = self.v1[k].0;
            for j in 0..self.v2.len() {
                if self.used[j] || self.inv1[k] != self.inv2[j] {
                    continue;
                }
                let b = self.v2[j].0;
                if !self.consistent(a, b) {
                    continue;
                }
                self.used[j] = true;
                self.map.insert(a, b);
                if self.run(k + 1) {
                    return true;
                }
                self.map.remove(&a);
                self.used[j] = false;
            }
            false
        }
    }

    // Entity-to-entity adjacency must agree before any variable is placed.
    let mut search = Search {
        g1,
        v1: &v1,
        v2: &v2,
        inv1: &inv1,
        inv2: &inv2,
        adj1: &adj1,
        adj2: &adj2,
        target: &target,
        map: fixed,
        used: vec![false; v2.len()],
    };
    search.run(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> KbSchema {
        KbSchema::parse(
            "type state\ntype city\nentity texas : state\nentity austin : city\nrelation next_to(state, state)\nrelation loc(city, state)",
        )
        .unwrap()
    }

    /// Which states border Texas.
    fn fig1() -> SemanticGraph {
        let s = schema();
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", Some(&s)).unwrap();
        g.attach_type("state", a, Some(&s)).unwrap();
        let t = g.add_node(NodeKind::Entity, "texas", Some(&s)).unwrap();
        g.add_edge("next_to", a, t).unwrap();
        g
    }

    #[test]
    fn first_allocation_is_zero() {
        let mut g = SemanticGraph::new();
        assert_eq!(
            g.add_node(NodeKind::Variable, "A", None).unwrap(),
            NodeId(0)
        );
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.return_node, Some(NodeId(0)));
    }

    #[test]
    fn fig1_nodes_and_edge() {
        let s = schema();
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", Some(&s)).unwrap();
        let t = g.add_node(NodeKind::Entity, "texas", Some(&s)).unwrap();
        let ty = g.add_node(NodeKind::Type, "state", Some(&s)).unwrap();
        let kinds: Vec<NodeKind> = g.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            [NodeKind::Variable, NodeKind::Entity, NodeKind::Type]
        );
        assert_eq!(g.node(ty).unwrap().label, "state");
        g.add_edge("next_to", a, t).unwrap();
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn schema_lookup_failures() {
        let s = schema();
        let mut g = SemanticGraph::new();
        assert_eq!(
            g.add_node(NodeKind::Entity, "atlantis", Some(&s)),
            Err(GraphError::UnknownEntity("atlantis".into()))
        );
        assert_eq!(
            g.add_node(NodeKind::Type, "river", Some(&s)),
            Err(GraphError::UnknownType("river".into()))
        );
        assert!(g.nodes.is_empty());
    }

    #[test]
    fn edge_errors() {
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", None).unwrap();
        assert!(matches!(
            g.add_edge("next_to", a, a),
            Err(GraphError::SelfLoop { .. })
        ));
        assert_eq!(
            g.add_edge("next_to", a, NodeId(7)),
            Err(GraphError::DanglingEndpoint(NodeId(7)))
        );
        assert!(g.edges.is_empty());
    }

    #[test]
    fn fig1_is_wellformed() {
        assert!(fig1().validate_wellformed().is_empty());
    }

    #[test]
    fn two_components_disconnected() {
        let mut g = SemanticGraph::new();
        g.add_node(NodeKind::Variable, "A", None).unwrap();
        g.add_node(NodeKind::Entity, "texas", None).unwrap();
        assert_eq!(g.validate_wellformed(), vec![Violation::Disconnected]);
    }

    #[test]
    fn triangle_is_cyclic() {
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", None).unwrap();
        let b = g.add_node(NodeKind::Variable, "B", None).unwrap();
        let c = g.add_node(NodeKind::Variable, "C", None).unwrap();
        g.add_edge("next_to", a, b).unwrap();
        g.add_edge("next_to", b, c).unwrap();
        g.add_edge("next_to", c, a).unwrap();
        assert_eq!(g.validate_wellformed(), vec![Violation::Cyclic]);
    }

    #[test]
    fn shared_type_labels_are_not_cycles() {
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", None).unwrap();
        let b = g.add_node(NodeKind::Variable, "B", None).unwrap();
        g.attach_type("state", a, None).unwrap();
        g.attach_type("state", b, None).unwrap();
        g.add_edge("next_to", a, b).unwrap();
        assert!(g.validate_wellformed().is_empty());
    }

    #[test]
    fn open_scope_is_imbalanced() {
        let mut g = SemanticGraph::new();
        g.add_node(NodeKind::Variable, "A", None).unwrap();
        g.open_scope("count", vec!["arg-for".into(), "arg-return".into()]);
        assert_eq!(g.validate_wellformed(), vec![Violation::ScopeImbalance]);
        let s = g.close_scope().unwrap();
        assert_eq!(g.validate_wellformed(), vec![Violation::ScopeImbalance]);
        g.bind_role(s, "arg-for", NodeId(0)).unwrap();
        g.bind_role(s, "arg-return", NodeId(0)).unwrap();
        assert!(g.validate_wellformed().is_empty());
    }

    #[test]
    fn roles_join_components() {
        let mut g = SemanticGraph::new();
        let a = g.add_node(NodeKind::Variable, "A", None).unwrap();
        let s = g.open_scope("count", vec!["arg-for".into(), "arg-return".into()]);
        let b = g.add_node(NodeKind::Variable, "B", None).unwrap();
        g.attach_type("state", b, None).unwrap();
        g.close_scope().unwrap();
        assert_eq!(
            g.validate_wellformed(),
            vec![Violation::Disconnected, Violation::ScopeImbalance]
        );
        g.bind_role(s, "arg-for", b).unwrap();
        g.bind_role(s, "arg-return", a).unwrap();
        assert!(g.validate_wellformed().is_empty());
    }

    #[test]
    fn dangling_reference_reported() {
        let mut g = fig1();
        g.edges.push(Edge {
            relation: "loc".into(),
            arg1: NodeId(0),
            arg2: NodeId(40),
        });
        assert_eq!(g.validate_wellformed(), vec![Violation::DanglingEndpoint]);
    }

    #[test]
    fn isomorphism_examples() {
        let g = fig1();
        assert!(graphs_isomorphic(&g, &g));

        let mut renamed = fig1();
        renamed.nodes[0].label = "B".into();
        assert!(graphs_isomorphic(&g, &renamed));

        let mut loc = fig1();
        loc.edges[0].relation = "loc".into();
        assert!(!graphs_isomorphic(&g, &loc));

        let mut flipped = fig1();
        let e = &mut flipped.edges[0];
        std::mem::swap(&mut e.arg1, &mut e.arg2);
        assert!(!graphs_isomorphic(&g, &flipped));
    }

    #[test]
    fn isomorphism_ignores_element_order() {
        let s = schema();
        let mut g = SemanticGraph::new();
        let t = g.add_node(NodeKind::Entity, "texas", Some(&s)).unwrap();
        let a = g.add_node(NodeKind::Variable, "Q", Some(&s)).unwrap();
        g.add_edge("next_to", a, t).unwrap();
        g.attach_type("state", a, Some(&s)).unwrap();
        assert!(graphs_isomorphic(&fig1(), &g));
    }
}
