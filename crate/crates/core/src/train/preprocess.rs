//! Corpus reading and entity replacement.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::lf::{
    actions_to_lf, canonicalize, lf_to_actions, parse_lf, print_lf, Formula, LogicalForm, Term,
};
use crate::schema::{parse_placeholder, placeholder, KbSchema};
use crate::vocab::{ActionVocab, WordVocab};

use super::TrainError;

/// One `utterance<TAB>logical form` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub line: usize,
    pub utterance: String,
    pub logical_form: String,
}

/// Reads TSV lines, skipping blank ones and `#` comments.
pub fn read_corpus(text: &str) -> Result<Vec<RawExample>, TrainError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((u, lf)) = line.split_once('\t') else {
            return Err(TrainError::Format {
                line: i + 1,
                message: "expected `utterance<TAB>logical form`".into(),
            });
        };
        out.push(RawExample {
            line: i + 1,
            utterance: u.trim().to_string(),
            logical_form: lf.trim().to_string(),
        });
    }
    Ok(out)
}

/// Lower-cases and splits on whitespace, detaching trailing punctuation.
/// Placeholder tokens pass through untouched.
pub fn tokenize_utterance(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        if parse_placeholder(raw).is_some() {
            out.push(raw.to_string());
            continue;
        }
        let word = raw.trim_matches(|c: char| matches!(c, '?' | '.' | ',' | '!' | ';' | '"'));
        if !word.is_empty() {
            out.push(word.to_lowercase());
        }
    }
    out
}

/// Longest-match entity finder over schema entity names, reading `_` in a
/// name as a word break.
#[derive(Debug, Clone)]
pub struct EntityMatcher {
    phrases: HashMap<Vec<String>, String>,
    longest: usize,
}

impl EntityMatcher {
    pub fn new(schema: &KbSchema) -> Self {
        let mut phrases = HashMap::new();
        let mut longest = 1;
        for name in schema.entities.keys() {
            let words: Vec<String> = name.split('_').map(str::to_lowercase).collect();
            longest = longest.max(words.len());
            phrases.insert(words, name.clone());
        }
        EntityMatcher { phrases, longest }
    }

    /// Replaces entity mentions by `<type:k>` placeholders, numbered per
    /// type in order of first mention. Existing placeholders count as
    /// mentions of themselves. Returns the new tokens and the map from
    /// placeholder to entity.
    pub fn replace(
        &self,
        tokens: &[String],
        schema: &KbSchema,
    ) -> (Vec<String>, BTreeMap<String, String>) {
        let mut out = Vec::with_capacity(tokens.len());
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        let mut assigned: HashMap<String, String> = HashMap::new();
        let mut counters: HashMap<String, usize> = HashMap::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut hit = None;
            if let Some((ty, _)) = parse_placeholder(&tokens[i]) {
                hit = Some((1, tokens[i].clone(), ty.to_string()));
            } else {
                for len in (1..=self.longest.min(tokens.len() - i)).rev() {
                    if let Some(name) = self.phrases.get(&tokens[i..i + len]) {
                        let ty = schema.entity_type(name).expect("matcher built from schema");
                        hit = Some((len, name.clone(), ty.to_string()));
                        break;
                    }
                }
            }
            match hit {
                Some((len, entity, ty)) => {
                    let ph = assigned
                        .entry(entity.clone())
                        .or_insert_with(|| {
                            let k = counters.entry(ty.clone()).or_default();
                            *k += 1;
                            placeholder(&ty, *k - 1)
                        })
                        .clone();
                    map.insert(ph.clone(), entity);
                    out.push(ph);
                    i += len;
                }
                None => {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
        }
        (out, map)
    }
}

fn map_entities(
    f: &Formula,
    rename: &mut dyn FnMut(&str) -> Result<String, String>,
) -> Result<Formula, String> {
    let term = |t: &Term,
                rename: &mut dyn FnMut(&str) -> Result<String, String>|
     -> Result<Term, String> {
        Ok(match t {
            Term::Entity { ty, name } => Term::Entity {
                ty: ty.clone(),
                name: rename(name)?,
            },
            v => v.clone(),
        })
    };
    Ok(match f {
        Formula::Conj(items) => Formula::Conj(
            items
                .iter()
                .map(|i| map_entities(i, rename))
                .collect::<Result<_, _>>()?,
        ),
        Formula::TypePred { ty, arg } => Formula::TypePred {
            ty: ty.clone(),
            arg: term(arg, rename)?,
        },
        Formula::Relation { rel, arg1, arg2 } => Formula::Relation {
            rel: rel.clone(),
            arg1: term(arg1, rename)?,
            arg2: term(arg2, rename)?,
        },
        Formula::Const { var, ty, name } => Formula::Const {
            var: var.clone(),
            ty: ty.clone(),
            name: rename(name)?,
        },
        Formula::Operator {
            op,
            roles,
            body_index,
            body,
        } => Formula::Operator {
            op: op.clone(),
            roles: roles.clone(),
            body_index: *body_index,
            body: Box::new(map_entities(body, rename)?),
        },
    })
}

/// Puts entity names back in place of placeholders. Placeholders missing
/// from `map` are left as they are.
pub fn restore_entities(lf: &LogicalForm, map: &BTreeMap<String, String>) -> LogicalForm {
    let body = map_entities(&lf.body, &mut |name| {
        Ok(map.get(name).cloned().unwrap_or_else(|| name.to_string()))
    })
    .expect("restoring never fails");
    LogicalForm {
        answer: lf.answer.clone(),
        body,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusExample {
    pub line: usize,
    pub utterance: Vec<String>,
    /// Canonical text with placeholders.
    pub logical_form: String,
    pub actions: Vec<Action>,
    /// Placeholder to entity name.
    pub entities: BTreeMap<String, String>,
}

impl CorpusExample {
    pub fn restored_logical_form(&self, schema: &KbSchema) -> LogicalForm {
        let lf = parse_lf(&self.logical_form, schema).expect("stored form parses");
        restore_entities(&lf, &self.entities)
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub examples: Vec<CorpusExample>,
    pub words: WordVocab,
    pub actions: ActionVocab,
}

/// Replaces entities in one example and derives its action sequence.
pub fn preprocess_example(
    raw: &RawExample,
    schema: &KbSchema,
    matcher: &EntityMatcher,
) -> Result<CorpusExample, TrainError> {
    let at = |source| TrainError::Example {
        line: raw.line,
        source,
    };
    let tokens = tokenize_utterance(&raw.utterance);
    if tokens.is_empty() {
        return Err(TrainError::Format {
            line: raw.line,
            message: "empty utterance".into(),
        });
    }
    let (utterance, entities) = matcher.replace(&tokens, schema);
    let lf = parse_lf(&raw.logical_form, schema).map_err(at)?;
    let by_entity: HashMap<&str, &str> = entities
        .iter()
        .map(|(p, e)| (e.as_str(), p.as_str()))
        .collect();
    let replaced = map_entities(&lf.body, &mut |name| {
        by_entity
            .get(name)
            .map(|p| p.to_string())
            .ok_or_else(|| name.to_string())
    })
    .map_err(|entity| TrainError::UnresolvableEntity {
        line: raw.line,
        entity,
    })?;
    let lf = canonicalize(&LogicalForm {
        answer: lf.answer,
        body: replaced,
    });
    let actions = lf_to_actions(&lf, schema).map_err(at)?;
    let back = actions_to_lf(&actions, schema).map_err(at)?;
    debug_assert_eq!(print_lf(&back), print_lf(&lf));
    Ok(CorpusExample {
        line: raw.line,
        utterance,
        logical_form: lf.to_raw_string(),
        actions,
        entities,
    })
}

/// Entity replacement, action derivation and vocabulary construction.
/// Words seen fewer than `min_word_count` times map to `<unk>`.
pub fn preprocess(
    corpus: &[RawExample],
    schema: &KbSchema,
    min_word_count: usize,
) -> Result<Preprocessed, TrainError> {
    let matcher = EntityMatcher::new(schema);
    let examples = corpus
        .iter()
        .map(|r| preprocess_example(r, schema, &matcher))
        .collect::<Result<Vec<_>, _>>()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let words = WordVocab::build(
        examples.iter().map(|e| e.utterance.as_slice()),
        min_word_count,
    );
    let seqs: Vec<Vec<Action>> = examples.iter().map(|e| e.actions.clone()).collect();
    let actions = ActionVocab::build(&seqs, schema);
    Ok(Preprocessed {
        examples,
        words,
        actions,
    })
}
