//! Word and action vocabularies. Both serialize as their token lists and
//! rebuild every index on load, so equal lists mean equal vocabularies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::{Action, Role};
use crate::schema::{KbSchema, CONST_RELATION};

pub const UNK: &str = "<unk>";
/// Structure and semantic part of the begin-of-sequence input.
pub const BOS: &str = "<s>";
/// Display name of the end-of-sequence output.
pub const EOS: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for WordVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        WordVocab { tokens, index }
    }
}

impl From<WordVocab> for Vec<String> {
    fn from(v: WordVocab) -> Self {
        v.tokens
    }
}

impl WordVocab {
    /// `<unk>` first, then every word seen at least `min_count` times,
    /// sorted.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a [String]>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sentences {
            for w in s {
                *counts.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut tokens = vec![UNK.to_string()];
        tokens.extend(
            counts
                .into_iter()
                .filter(|(w, c)| *c >= min_count && *w != UNK)
                .map(|(w, _)| w.to_string()),
        );
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| self.id(w)).collect()
    }
}

/// Output actions plus the factored structure/semantic part tables used
/// for input embeddings. Output id `len()` is end-of-sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ActionVocab {
    actions: Vec<Action>,
    index: HashMap<Action, usize>,
    structures: Vec<String>,
    semantics: Vec<String>,
    struct_of: Vec<usize>,
    sem_of: Vec<usize>,
}

impl TryFrom<Vec<String>> for ActionVocab {
    type Error = String;

    fn try_from(texts: Vec<String>) -> Result<Self, String> {
        let actions = texts
            .iter()
            .map(|t| t.parse::<Action>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ActionVocab::from_actions(actions))
    }
}

impl From<ActionVocab> for Vec<String> {
    fn from(v: ActionVocab) -> Self {
        v.actions.iter().map(Action::to_string).collect()
    }
}

impl ActionVocab {
    /// Keeps the given order; parts are sorted with `<s>` first.
    pub fn from_actions(actions: Vec<Action>) -> Self {
        let mut structures: BTreeSet<String> =
            actions.iter().map(|a| a.structure().to_string()).collect();
        let mut semantics: BTreeSet<String> =
            actions.iter().map(|a| a.semantic().to_string()).collect();
        structures.remove(BOS);
        semantics.remove(BOS);
        let structures: Vec<String> = std::iter::once(BOS.to_string()).chain(structures).collect();
        let semantics: Vec<String> = std::iter::once(BOS.to_string()).chain(semantics).collect();
        let s_idx: HashMap<&str, usize> = structures
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let m_idx: HashMap<&str, usize> = semantics
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let struct_of = actions.iter().map(|a| s_idx[a.structure()]).collect();
        let sem_of = actions.iter().map(|a| m_idx[a.semantic()]).collect();
        let index = actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        ActionVocab {
            actions,
            index,
            structures,
            semantics,
            struct_of,
            sem_of,
        }
    }

    /// Actions seen in `sequences`, every schema relation, type and
    /// operation, and each argument role over every label seen. Sorted by
    /// text.
    pub fn build(sequences: &[Vec<Action>], schema: &KbSchema) -> Self {
        let mut set: BTreeSet<Action> = BTreeSet::new();
        let mut labels: BTreeSet<String> = BTreeSet::new();
        for seq in sequences {
            for a in seq {
                set.insert(a.clone());
                match a {
                    Action::AddVariable(l) | Action::AddEntity(l) | Action::Argument(_, l) => {
                        labels.insert(l.clone());
                    }
                    _ => {}
                }
            }
        }
        set.insert(Action::AddEdge(CONST_RELATION.to_string()));
        for r in schema.relations.keys() {
            set.insert(Action::AddEdge(r.clone()));
        }
        for t in &schema.types {
            set.insert(Action::AddType(t.clone()));
        }
        for op in schema.operations.keys() {
            set.insert(Action::StartOperation(op.clone()));
            set.insert(Action::EndOperation(op.clone()));
        }
        let mut roles = vec![Role::TypeArg, Role::Arg1, Role::Arg2];
        roles.extend(schema.operation_roles().into_iter().map(Role::Op));
        for l in &labels {
            for r in &roles {
                set.insert(Action::Argument(r.clone(), l.clone()));
            }
        }
        let mut actions: Vec<Action> = set.into_iter().collect();
        actions.sort_by_cached_key(|a| a.to_string());
        ActionVocab::from_actions(actions)
    }

    /// Number of real actions; the output layer has one more row for
    /// end-of-sequence.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn eos(&self) -> usize {
        self.actions.len()
    }

    pub fn outputs(&self) -> usize {
        self.actions.len() + 1
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, id: usize) -> Option<&Action> {
        self.actions.get(id)
    }

    pub fn id(&self, action: &Action) -> Option<usize> {
        self.index.get(action).copied()
    }

    /// Text of an output id, `</s>` for end-of-sequence.
    pub fn text(&self, id: usize) -> String {
        self.action(id)
            .map_or_else(|| EOS.to_string(), Action::to_string)
    }

    pub fn structures(&self) -> &[String] {
        &self.structures
    }

    pub fn semantics(&self) -> &[String] {
        &self.semantics
    }

    /// Structure and semantic part ids of an input: an action id, or
    /// `None` for begin-of-sequence.
    pub fn parts(&self, prev: Option<usize>) -> (usize, usize) {
        match prev {
            None => (0, 0),
            Some(id) => (self.struct_of[id], self.sem_of[id]),
        }
    }
}

/// SHA-256 over both token lists, hex encoded.
pub fn vocab_hash(words: &WordVocab, actions: &ActionVocab) -> String {
    let mut h = Sha256::new();
    for t in words.tokens() {
        h.update(t.as_bytes());
        h.update([0]);
    }
    h.update([1]);
    for a in actions.actions() {
        h.update(a.to_string().as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}
