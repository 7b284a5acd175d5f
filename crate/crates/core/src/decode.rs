//! Constrained beam search.
//!
//! Illegal candidates are dropped before ranking and the surviving scores
//! are not renormalized. Finished items are set aside; the search stops
//! once no live item scores above the best finished one, or when the step
//! budget runs out.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{build_graph, Action, ActionError, PartialGraphState};
use crate::controller::{ConstraintLevel, Controller, LegalityVerdict, Rule};
use crate::graph::SemanticGraph;
use crate::lf::{graph_to_lf, print_lf, LfError};
use crate::model::{DecoderState, EncodedSentence, ModelError, Seq2Act};
use crate::schema::{parse_placeholder, KbSchema};
use crate::train::{restore_entities, tokenize_utterance, EntityMatcher};

/// Budget used when the model does not know its longest training target.
pub const FALLBACK_STEPS: usize = 100;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("no complete parse within {steps} steps")]
    NoCompleteParse { steps: usize },
    #[error("empty sentence")]
    EmptySentence,
    #[error("decoded sequence does not form a valid graph: {0}")]
    Invalid(#[from] ActionError),
    #[error(transparent)]
    Lf(#[from] LfError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DecodeError {
    pub fn kind(&self) -> &'static str {
        match self {
            DecodeError::NoCompleteParse { .. } => "NoCompleteParse",
            DecodeError::EmptySentence => "EmptySentence",
            DecodeError::Invalid(_) => "InvalidSequence",
            DecodeError::Lf(e) => e.kind(),
            DecodeError::Model(_) => "ModelError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam_size: usize,
    pub level: ConstraintLevel,
    /// Output steps including the end marker. `None` means three times the
    /// longest training target.
    pub max_steps: Option<usize>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam_size: 5,
            level: ConstraintLevel::C1plusC2,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone)]
struct BeamItem {
    ids: Vec<usize>,
    texts: Vec<String>,
    score: f64,
    state: DecoderState,
    graph: PartialGraphState,
}

/// A finished hypothesis: output ids without the end marker.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub ids: Vec<usize>,
    pub score: f64,
}

/// Per-step record along a decoded path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub chosen: String,
    pub log_prob: f64,
    /// Best legal candidates with their log-probabilities.
    pub top: Vec<(String, f64)>,
    /// Every rejected candidate with the rule that rejected it.
    pub filtered: Vec<(String, Rule)>,
    pub filtered_by_rule: BTreeMap<Rule, usize>,
    pub attention: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParseResult {
    pub actions: Vec<Action>,
    pub score: f64,
    pub graph: SemanticGraph,
    /// Canonical logical form with entity names restored.
    pub logical_form: String,
    /// Canonical logical form over placeholders.
    pub placeholder_form: String,
    pub entities: BTreeMap<String, String>,
    pub diagnostics: Vec<StepDiagnostics>,
}

fn cmp_texts(a: &[String], a_last: &str, b: &[String], b_last: &str) -> Ordering {
    a.iter()
        .map(String::as_str)
        .chain(std::iter::once(a_last))
        .cmp(b.iter().map(String::as_str).chain(std::iter::once(b_last)))
}

/// Shared by search and diagnostics: the verdict for every output id.
struct Filter<'a> {
    model: &'a Seq2Act,
    controller: Controller<'a>,
    /// Placeholders that may be introduced; `None` allows all.
    placeholders: Option<&'a BTreeSet<String>>,
}

impl Filter<'_> {
    fn verdicts(&self, graph: &PartialGraphState) -> Vec<LegalityVerdict> {
        let a = self.controller.analyze(graph);
        let mut out: Vec<LegalityVerdict> = self
            .model
            .actions
            .actions()
            .iter()
            .map(|act| {
                if let (Action::AddEntity(l), Some(allowed)) = (act, self.placeholders) {
                    if parse_placeholder(l).is_some() && !allowed.contains(l) {
                        return LegalityVerdict::denied(Rule::UnknownSymbol);
                    }
                }
                self.controller.check_with(graph, &a, act)
            })
            .collect();
        out.push(self.controller.check_finish_with(graph, &a));
        out
    }
}

fn budget(model: &Seq2Act, opts: &DecodeOptions) -> usize {
    opts.max_steps.unwrap_or(if model.max_sequence_len == 0 {
        FALLBACK_STEPS
    } else {
        3 * model.max_sequence_len
    })
}

fn search(
    filter: &Filter,
    enc: &EncodedSentence,
    opts: &DecodeOptions,
) -> Result<Option<Hypothesis>, DecodeError> {
    let model = filter.model;
    let eos = model.actions.eos();
    let k = opts.beam_size.max(1);
    let mut live = vec![BeamItem {
        ids: Vec::new(),
        texts: Vec::new(),
        score: 0.0,
        state: model.initial_state(enc)?,
        graph: PartialGraphState::new(),
    }];
    let mut best: Option<(f64, Vec<String>, Vec<usize>)> = None;
    let texts: Vec<String> = (0..model.actions.outputs())
        .map(|i| model.actions.text(i))
        .collect();

    for _ in 0..budget(model, opts) {
        if live.is_empty() {
            break;
        }
        // (score, parent, output id, next decoder state index)
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (pi, item) in live.iter().enumerate() {
            let out = model.decode_step(enc, &item.state, item.ids.last().copied())?;
            for (id, v) in filter.verdicts(&item.graph).into_iter().enumerate() {
                if v.allowed {
                    cands.push((item.score + out.log_probs[id], pi, id));
                }
            }
            next_states.push(out.state);
        }
        cands.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| {
                cmp_texts(&live[a.1].texts, &texts[a.2], &live[b.1].texts, &texts[b.2])
            })
        });
        cands.truncate(k);
        let mut next = Vec::with_capacity(k);
        for (score, pi, id) in cands {
            let parent = &live[pi];
            if id == eos {
                let better = match &best {
                    None => true,
                    Some((bs, bt, _)) => {
                        score > *bs
                            || (score == *bs
                                && parent.texts.iter().cmp(bt.iter()) == Ordering::Less)
                    }
                };
                if better {
                    best = Some((score, parent.texts.clone(), parent.ids.clone()));
                }
                continue;
            }
            let action = model.actions.action(id).expect("non-end output").clone();
            let mut graph = parent.graph.clone();
            graph.apply(&action, filter.controller.schema)?;
            let mut ids = parent.ids.clone();
            ids.push(id);
            let mut t = parent.texts.clone();
            t.push(texts[id].clone());
            next.push(BeamItem {
                ids,
                texts: t,
                score,
                state: next_states[pi].clone(),
                graph,
            });
        }
        live = next;
        if let Some((bs, _, _)) = &best {
            if live.iter().all(|i| i.score <= *bs) {
                break;
            }
        }
    }
    Ok(best.map(|(score, _, ids)| Hypothesis { ids, score }))
}

/// Best finished output sequence for already-encoded word ids.
pub fn decode_ids(
    model: &Seq2Act,
    schema: &KbSchema,
    word_ids: &[usize],
    opts: &DecodeOptions,
    placeholders: Option<&BTreeSet<String>>,
) -> Result<Hypothesis, DecodeError> {
    let enc = model.encode(word_ids)?;
    let filter = Filter {
        model,
        controller: Controller::new(schema, opts.level),
        placeholders,
    };
    search(&filter, &enc, opts)?.ok_or(DecodeError::NoCompleteParse {
        steps: budget(model, opts),
    })
}

/// Replays `ids` (end marker implied) and records what the filter and the
/// model saw at each step.
pub fn explain_path(
    model: &Seq2Act,
    schema: &KbSchema,
    word_ids: &[usize],
    ids: &[usize],
    opts: &DecodeOptions,
    placeholders: Option<&BTreeSet<String>>,
) -> Result<Vec<StepDiagnostics>, DecodeError> {
    let enc = model.encode(word_ids)?;
    let filter = Filter {
        model,
        controller: Controller::new(schema, opts.level),
        placeholders,
    };
    let mut state = model.initial_state(&enc)?;
    let mut graph = PartialGraphState::new();
    let mut prev = None;
    let mut out = Vec::with_capacity(ids.len() + 1);
    for (step, &id) in ids
        .iter()
        .chain(std::iter::once(&model.actions.eos()))
        .enumerate()
    {
        let o = model.decode_step(&enc, &state, prev)?;
        let verdicts = filter.verdicts(&graph);
        let mut legal: Vec<(String, f64)> = Vec::new();
        let mut filtered = Vec::new();
        let mut by_rule: BTreeMap<Rule, usize> = BTreeMap::new();
        for (i, v) in verdicts.iter().enumerate() {
            match v.violated_rule {
                None => legal.push((model.actions.text(i), o.log_probs[i])),
                Some(r) => {
                    filtered.push((model.actions.text(i), r));
                    *by_rule.entry(r).or_default() += 1;
                }
            }
        }
        legal.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        legal.truncate(opts.beam_size.max(1));
        out.push(StepDiagnostics {
            step,
            chosen: model.actions.text(id),
            log_prob: o.log_probs[id],
            top: legal,
            filtered,
            filtered_by_rule: by_rule,
            attention: o.state.attention.clone(),
        });
        if let Some(a) = model.actions.action(id) {
            graph.apply(a, schema)?;
        }
        state = o.state;
        prev = Some(id);
    }
    Ok(out)
}

/// Tokenizes `sentence`, replaces entity mentions, decodes and restores
/// entity names in the resulting logical form.
pub fn parse(
    model: &Seq2Act,
    schema: &KbSchema,
    sentence: &str,
    opts: &DecodeOptions,
) -> Result<ParseResult, DecodeError> {
    let tokens = tokenize_utterance(sentence);
    if tokens.is_empty() {
        return Err(DecodeError::EmptySentence);
    }
    let (tokens, entities) = EntityMatcher::new(schema).replace(&tokens, schema);
    parse_tokens(model, schema, &tokens, &entities, opts)
}

/// Decodes an utterance whose entities are already placeholders.
pub fn parse_tokens(
    model: &Seq2Act,
    schema: &KbSchema,
    tokens: &[String],
    entities: &BTreeMap<String, String>,
    opts: &DecodeOptions,
) -> Result<ParseResult, DecodeError> {
    if tokens.is_empty() {
        return Err(DecodeError::EmptySentence);
    }
    let word_ids = model.words.ids(tokens);
    let allowed: BTreeSet<String> = entities.keys().cloned().collect();
    let hyp = decode_ids(model, schema, &word_ids, opts, Some(&allowed))?;
    let actions: Vec<Action> = hyp
        .ids
        .iter()
        .map(|&i| model.actions.action(i).expect("non-end output").clone())
        .collect();
    let graph = build_graph(&actions, schema)?;
    let lf = graph_to_lf(&graph, schema)?;
    let diagnostics = explain_path(model, schema, &word_ids, &hyp.ids, opts, Some(&allowed))?;
    Ok(ParseResult {
        score: hyp.score,
        placeholder_form: print_lf(&lf),
        logical_form: print_lf(&restore_entities(&lf, entities)),
        graph,
        actions,
        entities: entities.clone(),
        diagnostics,
    })
}
