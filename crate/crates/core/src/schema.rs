//! Knowledge-base schema: declared types, typed entities, relation
//! signatures and operation role lists.
//!
//! The file format is line oriented:
//!
//! ```text
//! # comment
//! type state
//! entity texas : state
//! relation next_to(state, state)
//! operation count(arg-for, body, arg-return)
//! ```
//!
//! `body` inside an operation declaration marks where the scoped sub-query
//! sits in the logical-form surface syntax; every other entry is a role.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relation name reserved for `const(Var, entity)` bindings.
pub const CONST_RELATION: &str = "const";

/// Marker for the scoped body inside an operation declaration.
pub const BODY_MARKER: &str = "body";

const RESERVED: &[&str] = &["answer", CONST_RELATION, BODY_MARKER];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: undeclared type `{name}`")]
    UndeclaredType { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { line: usize, name: String },
    #[error("line {line}: `{name}` is a reserved name")]
    Reserved { line: usize, name: String },
}

/// One slot in an operation's surface layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperationSlot {
    Role(String),
    Body,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationDecl {
    pub layout: Vec<OperationSlot>,
}

impl OperationDecl {
    /// Roles in declaration order, excluding the body marker.
    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.layout.iter().filter_map(|s| match s {
            OperationSlot::Role(r) => Some(r.as_str()),
            OperationSlot::Body => None,
        })
    }

    pub fn role_count(&self) -> usize {
        self.roles().count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbSchema {
    pub types: BTreeSet<String>,
    pub entities: BTreeMap<String, String>,
    pub relations: BTreeMap<String, (String, String)>,
    pub operations: BTreeMap<String, OperationDecl>,
}

/// Rules the controller derives from a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticConstraintTable {
    pub selectional_preference: BTreeMap<String, (String, String)>,
    /// Unordered pairs of distinct types, stored with the smaller name first.
    pub disjoint_types: BTreeSet<(String, String)>,
}

impl SemanticConstraintTable {
    pub fn conflicting(&self, a: &str, b: &str) -> bool {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.disjoint_types.contains(&key)
    }
}

/// Parses a placeholder of the form `<type:k>` into `(type, k)`.
pub fn parse_placeholder(label: &str) -> Option<(&str, usize)> {
    let inner = label.strip_prefix('<')?.strip_suffix('>')?;
    let (ty, idx) = inner.split_once(':')?;
    if ty.is_empty() || !is_identifier(ty) {
        return None;
    }
    Some((ty, idx.parse().ok()?))
}

pub fn placeholder(ty: &str, index: usize) -> String {
    format!("<{ty}:{index}>")
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_role_name(s: &str) -> bool {
    s.starts_with("arg")
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl KbSchema {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        load_schema(text)
    }

    /// Type of an entity label. Placeholders `<t:k>` resolve to `t` when `t`
    /// is a declared type.
    pub fn entity_type(&self, label: &str) -> Option<&str> {
        if let Some(ty) = self.entities.get(label) {
            return Some(ty.as_str());
        }
        let (ty, _) = parse_placeholder(label)?;
        self.types.get(ty).map(String::as_str)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        self.types.contains(ty)
    }

    /// Signature of a relation; `const` has none.
    pub fn relation(&self, name: &str) -> Option<(&str, &str)> {
        self.relations
            .get(name)
            .map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn is_relation(&self, name: &str) -> bool {
        name == CONST_RELATION || self.relations.contains_key(name)
    }

    pub fn operation(&self, name: &str) -> Option<&OperationDecl> {
        self.operations.get(name)
    }

    /// Entity literal constructor for a type, e.g. `state` → `stateid`.
    pub fn constructor_for(ty: &str) -> String {
        format!("{ty}id")
    }

    /// Inverse of [`KbSchema::constructor_for`] restricted to declared types.
    pub fn type_for_constructor(&self, ctor: &str) -> Option<&str> {
        let ty = ctor.strip_suffix("id")?;
        self.types.get(ty).map(String::as_str)
    }

    /// All role names declared by any operation, deduplicated and sorted.
    pub fn operation_roles(&self) -> BTreeSet<String> {
        self.operations
            .values()
            .flat_map(|d| d.roles().map(str::to_string))
            .collect()
    }
}

impl fmt::Display for KbSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.types {
            writeln!(f, "type {t}")?;
        }
        for (e, t) in &self.entities {
            writeln!(f, "entity {e} : {t}")?;
        }
        for (r, (a, b)) in &self.relations {
            writeln!(f, "relation {r}({a}, {b})")?;
        }
        for (op, decl) in &self.operations {
            let slots: Vec<&str> = decl
                .layout
                .iter()
                .map(|s| match s {
                    OperationSlot::Role(r) => r.as_str(),
                    OperationSlot::Body => BODY_MARKER,
                })
                .collect();
            writeln!(f, "operation {op}({})", slots.join(", "))?;
        }
        Ok(())
    }
}

fn parse_call(line: usize, rest: &str) -> Result<(String, Vec<String>), SchemaError> {
    let err = |m: &str| SchemaError::Parse {
        line,
        message: m.to_string(),
    };
    let open = rest.find('(').ok_or_else(|| err("expected `(`"))?;
    let name = rest[..open].trim();
    let inner = rest[open + 1..]
        .trim_end()
        .strip_suffix(')')
        .ok_or_else(|| err("expected `)` at end of line"))?;
    if name.is_empty() {
        return Err(err("missing name"));
    }
    let args = inner
        .split(',')
        .map(|a| a.trim().to_string())
        .collect::<Vec<_>>();
    if args.iter().any(String::is_empty) {
        return Err(err("empty argument"));
    }
    Ok((name.to_string(), args))
}

pub fn load_schema(text: &str) -> Result<KbSchema, SchemaError> {
    let mut schema = KbSchema::default();
    // Every name shares one namespace so that predicate application in
    // logical forms is unambiguous.
    let mut names: BTreeSet<String> = BTreeSet::new();
    // Type references are resolved after all `type` lines are seen.
    let mut type_refs: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((content, ""));
        let parse_err = |m: String| SchemaError::Parse { line, message: m };
        let mut declare = |name: &str| -> Result<(), SchemaError> {
            if !is_identifier(name) {
                return Err(SchemaError::Parse {
                    line,
                    message: format!("invalid name `{name}`"),
                });
            }
            if RESERVED.contains(&name) {
                return Err(SchemaError::Reserved {
                    line,
                    name: name.to_string(),
                });
            }
            if !names.insert(name.to_string()) {
                return Err(SchemaError::DuplicateDeclaration {
                    line,
                    name: name.to_string(),
                });
            }
            Ok(())
        };
        match keyword {
            "type" => {
                if rest.contains(char::is_whitespace) || rest.is_empty() {
                    return Err(parse_err("expected `type <name>`".into()));
                }
                declare(rest)?;
                schema.types.insert(rest.to_string());
            }
            "entity" => {
                let (name, ty) = rest
                    .split_once(':')
                    .map(|(a, b)| (a.trim(), b.trim()))
                    .ok_or_else(|| parse_err("expected `entity <name> : <type>`".into()))?;
                declare(name)?;
                type_refs.push((line, ty.to_string()));
                schema.entities.insert(name.to_string(), ty.to_string());
            }
            "relation" => {
                let (name, args) = parse_call(line, rest)?;
                if args.len() != 2 {
                    return Err(parse_err(format!(
                        "relation `{name}` must take exactly two types"
                    )));
                }
                declare(&name)?;
                type_refs.push((line, args[0].clone()));
                type_refs.push((line, args[1].clone()));
                schema
                    .relations
                    .insert(name, (args[0].clone(), args[1].clone()));
            }
            "operation" => {
                let (name, args) = parse_call(line, rest)?;
                declare(&name)?;
                let mut layout = Vec::with_capacity(args.len());
                for a in args {
                    if a == BODY_MARKER {
                        layout.push(OperationSlot::Body);
                    } else if is_role_name(&a) {
                        layout.push(OperationSlot::Role(a));
                    } else {
                        return Err(parse_err(format!(
                            "role `{a}` must be `body` or start with `arg`"
                        )));
                    }
                }
                let bodies = layout.iter().filter(|s| **s == OperationSlot::Body).count();
                if bodies != 1 {
                    return Err(parse_err(format!(
                        "operation `{name}` must list `body` exactly once"
                    )));
                }
                schema.operations.insert(name, OperationDecl { layout });
            }
            other => return Err(parse_err(format!("unknown keyword `{other}`"))),
        }
    }

    for (line, ty) in type_refs {
        if !schema.types.contains(&ty) {
            return Err(SchemaError::UndeclaredType { line, name: ty });
        }
    }
    Ok(schema)
}

pub fn extract_constraints(schema: &KbSchema) -> SemanticConstraintTable {
    let selectional_preference = schema.relations.clone();
    let types: Vec<&String> = schema.types.iter().collect();
    let mut disjoint_types = BTreeSet::new();
    for (i, a) in types.iter().enumerate() {
        for b in &types[i + 1..] {
            disjoint_types.insert(((*a).clone(), (*b).clone()));
        }
    }
    SemanticConstraintTable {
        selectional_preference,
        disjoint_types,
    }
}
