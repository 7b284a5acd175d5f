//! Attention encoder-decoder over factored action embeddings.
//!
//! Encoder: bidirectional LSTM, `b_i = [hF_i; hB_i]`. The decoder starts
//! from `s = tanh(W_s [hF_m; hB_1])` with a zero cell, and each step feeds
//! `[φ_struct(y); φ_sem(y); c]` of the previous action (begin-of-sequence
//! first) and the previous context into the decoder LSTM. Attention is
//! bilinear, `e_i = sᵀ W_a b_i`, and the output distribution is
//! `softmax(U [s; c])` over all actions plus end-of-sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;
use crate::nn::{
    cell_backward, cell_forward, dot, log_softmax, softmax, CellCache, LstmParams, NnError, Tensor,
};
use crate::vocab::{ActionVocab, WordVocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub word_embed_dim: usize,
    pub struct_embed_dim: usize,
    pub sem_embed_dim: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 200,
            word_embed_dim: 100,
            struct_embed_dim: 50,
            sem_embed_dim: 50,
            init_scale: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("word id {0} is outside the vocabulary")]
    UnknownWord(usize),
    #[error("action id {0} is outside the vocabulary")]
    UnknownAction(usize),
    #[error("no embedding for action part `{0}`")]
    UnknownActionPart(String),
    #[error("target sequence must end with end-of-sequence")]
    MissingEnd,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Every trainable tensor. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub word_emb: Tensor,
    pub struct_emb: Tensor,
    pub sem_emb: Tensor,
    pub enc_fwd: LstmParams,
    pub enc_bwd: LstmParams,
    pub dec: LstmParams,
    /// Initial decoder state map, `[h, 2h]`.
    pub w_s: Tensor,
    /// Attention map, `[h, 2h]`.
    pub w_a: Tensor,
    /// Output map, `[actions + 1, 3h]`.
    pub u: Tensor,
}

pub const BLOCK_NAMES: [&str; 12] = [
    "word_emb",
    "struct_emb",
    "sem_emb",
    "enc_fwd.w",
    "enc_fwd.b",
    "enc_bwd.w",
    "enc_bwd.b",
    "dec.w",
    "dec.b",
    "w_s",
    "w_a",
    "u",
];

impl ModelParameters {
    /// Block shapes in [`BLOCK_NAMES`] order.
    pub fn shapes(
        c: &ModelConfig,
        words: usize,
        structures: usize,
        semantics: usize,
        outputs: usize,
    ) -> Vec<Vec<usize>> {
        let h = c.hidden_size;
        let dec_in = c.struct_embed_dim + c.sem_embed_dim + 2 * h;
        vec![
            vec![words, c.word_embed_dim],
            vec![structures, c.struct_embed_dim],
            vec![semantics, c.sem_embed_dim],
            vec![4 * h, c.word_embed_dim + h],
            vec![4 * h],
            vec![4 * h, c.word_embed_dim + h],
            vec![4 * h],
            vec![4 * h, dec_in + h],
            vec![4 * h],
            vec![h, 2 * h],
            vec![h, 2 * h],
            vec![outputs, 3 * h],
        ]
    }

    /// Builds parameters from tensors in [`BLOCK_NAMES`] order.
    pub fn from_blocks(mut blocks: Vec<Tensor>) -> Result<Self, ModelError> {
        if blocks.len() != BLOCK_NAMES.len() {
            return Err(ModelError::Config(format!(
                "expected {} blocks",
                BLOCK_NAMES.len()
            )));
        }
        let mut next = || blocks.remove(0);
        Ok(ModelParameters {
            word_emb: next(),
            struct_emb: next(),
            sem_emb: next(),
            enc_fwd: LstmParams {
                w: next(),
                b: next(),
            },
            enc_bwd: LstmParams {
                w: next(),
                b: next(),
            },
            dec: LstmParams {
                w: next(),
                b: next(),
            },
            w_s: next(),
            w_a: next(),
            u: next(),
        })
    }

    pub fn blocks(&self) -> [&Tensor; 12] {
        [
            &self.word_emb,
            &self.struct_emb,
            &self.sem_emb,
            &self.enc_fwd.w,
            &self.enc_fwd.b,
            &self.enc_bwd.w,
            &self.enc_bwd.b,
            &self.dec.w,
            &self.dec.b,
            &self.w_s,
            &self.w_a,
            &self.u,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.word_emb,
            &mut self.struct_emb,
            &mut self.sem_emb,
            &mut self.enc_fwd.w,
            &mut self.enc_fwd.b,
            &mut self.enc_bwd.w,
            &mut self.enc_bwd.b,
            &mut self.dec.w,
            &mut self.dec.b,
            &mut self.w_s,
            &mut self.w_a,
            &mut self.u,
        ]
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill_zero();
        z
    }

    pub fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(0.0);
        }
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParameters) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_scaled(scale, b).expect("parameter layouts agree");
        }
    }

    pub fn count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// Euclidean norm over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.data().iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Context vectors of an input sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
    /// `b_i = [hF_i; hB_i]`
    pub contexts: Vec<Vec<f64>>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    /// Attention context computed from `h`.
    pub context: Vec<f64>,
    /// Attention weights behind `context`.
    pub attention: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Log-probabilities over all actions, end-of-sequence last.
    pub log_probs: Vec<f64>,
    pub state: DecoderState,
}

impl StepOutput {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }
}

/// Teacher-forced statistics of one example.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForcedStats {
    pub loss: f64,
    /// Steps where the gold action was the argmax.
    pub correct: usize,
    pub steps: usize,
}

struct Attention {
    q: Vec<f64>,
    weights: Vec<f64>,
    context: Vec<f64>,
}

struct StepTrace {
    input: Vec<f64>,
    cell: CellCache,
    prev: Option<usize>,
    h: Vec<f64>,
    attn: Attention,
    probs: Vec<f64>,
    target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2Act {
    pub config: ModelConfig,
    pub words: WordVocab,
    pub actions: ActionVocab,
    pub params: ModelParameters,
    /// Longest training target, end marker included; 0 when unknown.
    #[serde(default)]
    pub max_sequence_len: usize,
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend_from_slice(p);
    }
    out
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Seq2Act {
    /// Fresh model with every parameter drawn from U[-init_scale, init_scale].
    pub fn new(
        config: ModelConfig,
        words: WordVocab,
        actions: ActionVocab,
    ) -> Result<Self, ModelError> {
        if config.hidden_size == 0
            || config.word_embed_dim == 0
            || config.struct_embed_dim == 0
            || config.sem_embed_dim == 0
        {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let shapes = ModelParameters::shapes(
            &config,
            words.len(),
            actions.structures().len(),
            actions.semantics().len(),
            actions.outputs(),
        );
        let blocks = shapes
            .iter()
            .map(|s| Tensor::uniform(s, config.init_scale, &mut rng))
            .collect();
        let params = ModelParameters::from_blocks(blocks)?;
        Ok(Seq2Act {
            config,
            words,
            actions,
            params,
            max_sequence_len: 0,
        })
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden_size
    }

    fn check_words(&self, ids: &[usize]) -> Result<(), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        match ids.iter().find(|&&i| i >= self.words.len()) {
            Some(&bad) => Err(ModelError::UnknownWord(bad)),
            None => Ok(()),
        }
    }

    fn encode_traced(
        &self,
        ids: &[usize],
    ) -> Result<(EncodedSentence, Vec<CellCache>, Vec<CellCache>), ModelError> {
        self.check_words(ids)?;
        let h = self.hidden();
        let m = ids.len();
        let p = &self.params;
        let mut fwd = Vec::with_capacity(m);
        let mut fwd_cache = Vec::with_capacity(m);
        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        for &w in ids {
            let (nh, nc, cache) = cell_forward(&p.enc_fwd, p.word_emb.row(w), &hs, &cs)?;
            fwd.push(nh.clone());
            fwd_cache.push(cache);
            (hs, cs) = (nh, nc);
        }
        let mut bwd = vec![Vec::new(); m];
        let mut bwd_cache = Vec::with_capacity(m);
        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        for i in (0..m).rev() {
            let (nh, nc, cache) = cell_forward(&p.enc_bwd, p.word_emb.row(ids[i]), &hs, &cs)?;
            bwd[i] = nh.clone();
            bwd_cache.push(cache);
            (hs, cs) = (nh, nc);
        }
        // bwd_cache is in processing order: position m-1 first.
        let contexts = (0..m).map(|i| concat(&[&fwd[i], &bwd[i]])).collect();
        Ok((
            EncodedSentence {
                forward: fwd,
                backward: bwd,
                contexts,
            },
            fwd_cache,
            bwd_cache,
        ))
    }

    pub fn encode(&self, word_ids: &[usize]) -> Result<EncodedSentence, ModelError> {
        self.encode_traced(word_ids).map(|(e, _, _)| e)
    }

    fn attend(&self, enc: &EncodedSentence, s: &[f64]) -> Result<Attention, ModelError> {
        let q = self.params.w_a.matvec_t(s)?;
        let scores: Vec<f64> = enc.contexts.iter().map(|b| dot(&q, b)).collect();
        let weights = softmax(&scores)?;
        let mut context = vec![0.0; q.len()];
        for (a, b) in weights.iter().zip(&enc.contexts) {
            for (c, x) in context.iter_mut().zip(b) {
                *c += a * x;
            }
        }
        Ok(Attention {
            q,
            weights,
            context,
        })
    }

    fn init_input(enc: &EncodedSentence) -> Vec<f64> {
        concat(&[enc.forward.last().expect("non-empty"), &enc.backward[0]])
    }

    pub fn initial_state(&self, enc: &EncodedSentence) -> Result<DecoderState, ModelError> {
        if enc.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        let s: Vec<f64> = self
            .params
            .w_s
            .matvec(&Self::init_input(enc))?
            .into_iter()
            .map(f64::tanh)
            .collect();
        let attn = self.attend(enc, &s)?;
        Ok(DecoderState {
            c: vec![0.0; s.len()],
            h: s,
            context: attn.context,
            attention: attn.weights,
        })
    }

    /// `[φ_struct; φ_sem]` of an input, `None` being begin-of-sequence.
    pub fn input_embedding(&self, prev: Option<usize>) -> Result<Vec<f64>, ModelError> {
        if let Some(id) = prev {
            if id >= self.actions.len() {
                return Err(ModelError::UnknownAction(id));
            }
        }
        let (s, m) = self.actions.parts(prev);
        Ok(concat(&[
            self.params.struct_emb.row(s),
            self.params.sem_emb.row(m),
        ]))
    }

    /// Embedding of any action whose parts are both known, in the
    /// vocabulary or not.
    pub fn action_embedding(&self, action: &Action) -> Result<Vec<f64>, ModelError> {
        let s = self
            .actions
            .structures()
            .iter()
            .position(|x| x == action.structure())
            .ok_or_else(|| ModelError::UnknownActionPart(action.structure().to_string()))?;
        let m = self
            .actions
            .semantics()
            .iter()
            .position(|x| x == action.semantic())
            .ok_or_else(|| ModelError::UnknownActionPart(action.semantic().to_string()))?;
        Ok(concat(&[
            self.params.struct_emb.row(s),
            self.params.sem_emb.row(m),
        ]))
    }

    fn step_input(
        &self,
        state: &DecoderState,
        prev: Option<usize>,
    ) -> Result<Vec<f64>, ModelError> {
        Ok(concat(&[&self.input_embedding(prev)?, &state.context]))
    }

    /// Consumes the previous output (`None` at the first step) and returns
    /// the distribution over the next one.
    pub fn decode_step(
        &self,
        enc: &EncodedSentence,
        state: &DecoderState,
        prev: Option<usize>,
    ) -> Result<StepOutput, ModelError> {
        let x = self.step_input(state, prev)?;
        let (h, c, _) = cell_forward(&self.params.dec, &x, &state.h, &state.c)?;
        let attn = self.attend(enc, &h)?;
        let logits = self.params.u.matvec(&concat(&[&h, &attn.context]))?;
        Ok(StepOutput {
            log_probs: log_softmax(&logits)?,
            state: DecoderState {
                h,
                c,
                context: attn.context,
                attention: attn.weights,
            },
        })
    }

    /// `log P(Y | X)` as a sum of per-step log-probabilities. `targets`
    /// must end with end-of-sequence.
    pub fn sequence_log_prob(
        &self,
        word_ids: &[usize],
        targets: &[usize],
    ) -> Result<f64, ModelError> {
        if targets.last() != Some(&self.actions.eos()) {
            return Err(ModelError::MissingEnd);
        }
        let enc = self.encode(word_ids)?;
        let mut state = self.initial_state(&enc)?;
        let mut prev = None;
        let mut total = 0.0;
        for &y in targets {
            let out = self.decode_step(&enc, &state, prev)?;
            total += out.log_probs.get(y).ok_or(ModelError::UnknownAction(y))?;
            state = out.state;
            prev = Some(y);
        }
        Ok(total)
    }

    /// Negative log-likelihood of `targets` with its gradient added into
    /// `grad`.
    pub fn loss_and_grad(
        &self,
        word_ids: &[usize],
        targets: &[usize],
        grad: &mut ModelParameters,
    ) -> Result<ForcedStats, ModelError> {
        if targets.last() != Some(&self.actions.eos()) {
            return Err(ModelError::MissingEnd);
        }
        if let Some(&bad) = targets.iter().find(|&&y| y >= self.actions.outputs()) {
            return Err(ModelError::UnknownAction(bad));
        }
        let p = &self.params;
        let h = self.hidden();
        let (enc, fwd_cache, bwd_cache) = self.encode_traced(word_ids)?;
        let m = enc.len();

        // Forward.
        let u_in = Self::init_input(&enc);
        let s0: Vec<f64> = p.w_s.matvec(&u_in)?.into_iter().map(f64::tanh).collect();
        let attn0 = self.attend(&enc, &s0)?;
        let mut steps: Vec<StepTrace> = Vec::with_capacity(targets.len());
        let mut stats = ForcedStats::default();
        {
            let (mut hs, mut cs) = (s0.clone(), vec![0.0; h]);
            let mut ctx = attn0.context.clone();
            let mut prev = None;
            for &y in targets {
                let input = concat(&[&self.input_embedding(prev)?, &ctx]);
                let (nh, nc, cell) = cell_forward(&p.dec, &input, &hs, &cs)?;
                let attn = self.attend(&enc, &nh)?;
                let logits = p.u.matvec(&concat(&[&nh, &attn.context]))?;
                let lp = log_softmax(&logits)?;
                stats.loss -= lp[y];
                stats.steps += 1;
                let best = lp
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, v)| if *v > lp[b] { i } else { b });
                if best == y {
                    stats.correct += 1;
                }
                ctx = attn.context.clone();
                steps.push(StepTrace {
                    input,
                    cell,
                    prev,
                    h: nh.clone(),
                    attn,
                    probs: lp.iter().map(|v| v.exp()).collect(),
                    target: y,
                });
                (hs, cs) = (nh, nc);
                prev = Some(y);
            }
        }
        if !stats.loss.is_finite() {
            return Err(NnError::NonFiniteLoss.into());
        }

        // Backward.
        let mut d_b = vec![vec![0.0; 2 * h]; m];
        let attend_back = |attn: &Attention,
                           s: &[f64],
                           d_ctx: &[f64],
                           d_b: &mut [Vec<f64>],
                           d_wa: &mut Tensor|
         -> Vec<f64> {
            let da: Vec<f64> = enc.contexts.iter().map(|b| dot(d_ctx, b)).collect();
            let mean: f64 = attn.weights.iter().zip(&da).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; attn.q.len()];
            for i in 0..m {
                let a = attn.weights[i];
                let de = a * (da[i] - mean);
                for k in 0..dq.len() {
                    d_b[i][k] += a * d_ctx[k] + de * attn.q[k];
                    dq[k] += de * enc.contexts[i][k];
                }
            }
            d_wa.add_outer(1.0, s, &dq).expect("attention shapes");
            p.w_a.matvec(&dq).expect("attention shapes")
        };

        let ds = self.config.struct_embed_dim;
        let dm = self.config.sem_embed_dim;
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dctx_next = vec![0.0; 2 * h];
        for (j, st) in steps.iter().enumerate().rev() {
            let mut dlogits = st.probs.clone();
            dlogits[st.target] -= 1.0;
            let z = concat(&[&st.h, &st.attn.context]);
            grad.u.add_outer(1.0, &dlogits, &z)?;
            let dz = p.u.matvec_t(&dlogits)?;
            let mut dh = dh_next.clone();
            add_into(&mut dh, &dz[..h]);
            let mut dctx = dctx_next.clone();
            add_into(&mut dctx, &dz[h..]);
            let dh_attn = attend_back(&st.attn, &st.h, &dctx, &mut d_b, &mut grad.w_a);
            add_into(&mut dh, &dh_attn);
            let (dx, dh_prev, dc_prev) =
                cell_backward(&p.dec, &st.cell, &dh, &dc_next, &mut grad.dec);
            let (sp, mp) = self.actions.parts(st.prev);
            add_into(grad.struct_emb.row_mut(sp), &dx[..ds]);
            add_into(grad.sem_emb.row_mut(mp), &dx[ds..ds + dm]);
            dctx_next = dx[ds + dm..].to_vec();
            dh_next = dh_prev;
            dc_next = dc_prev;
            debug_assert_eq!(st.input.len(), dx.len(), "step {j}");
        }
        // The zero initial cell carries no parameters; dc_next is dropped.
        let dh_attn0 = attend_back(&attn0, &s0, &dctx_next, &mut d_b, &mut grad.w_a);
        add_into(&mut dh_next, &dh_attn0);
        let dpre: Vec<f64> = dh_next
            .iter()
            .zip(&s0)
            .map(|(d, s)| d * (1.0 - s * s))
            .collect();
        grad.w_s.add_outer(1.0, &dpre, &u_in)?;
        let du = p.w_s.matvec_t(&dpre)?;

        // Encoder, forward direction: last position first.
        let mut dh = du[..h].to_vec();
        let mut dc = vec![0.0; h];
        for i in (0..m).rev() {
            add_into(&mut dh, &d_b[i][..h]);
            let (dx, dhp, dcp) =
                cell_backward(&p.enc_fwd, &fwd_cache[i], &dh, &dc, &mut grad.enc_fwd);
            add_into(grad.word_emb.row_mut(word_ids[i]), &dx);
            dh = dhp;
            dc = dcp;
        }
        // Backward direction ran from position m-1 down to 0.
        let mut dh = vec![0.0; h];
        let mut dc = vec![0.0; h];
        for (k, i) in (0..m).enumerate() {
            add_into(&mut dh, &d_b[i][h..]);
            if i == 0 {
                add_into(&mut dh, &du[h..]);
            }
            let cache = &bwd_cache[m - 1 - k];
            let (dx, dhp, dcp) = cell_backward(&p.enc_bwd, cache, &dh, &dc, &mut grad.enc_bwd);
            add_into(grad.word_emb.row_mut(word_ids[i]), &dx);
            dh = dhp;
            dc = dcp;
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::parse_sequence;

    pub(crate) fn toy(hidden: usize, seed: u64) -> Seq2Act {
        let words: WordVocab = vec!["<unk>", "which", "states", "border", "<state:0>"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
            .into();
        let actions = ActionVocab::from_actions(
            parse_sequence(
                "add_variable:A add_type_node:state arg:A add_entity_node:<state:0> \
                 add_edge:next_to arg1_node:A arg2_node:<state:0>",
            )
            .unwrap(),
        );
        let config = ModelConfig {
            hidden_size: hidden,
            word_embed_dim: 5,
            struct_embed_dim: 3,
            sem_embed_dim: 4,
            init_scale: 0.5,
            seed,
        };
        Seq2Act::new(config, words, actions).unwrap()
    }

    #[test]
    fn distributions_normalised() {
        let m = toy(6, 7);
        let enc = m.encode(&[1, 2, 3, 4]).unwrap();
        let mut st = m.initial_state(&enc).unwrap();
        assert!((st.attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut prev = None;
        for y in [0, 1, 2] {
            let out = m.decode_step(&enc, &st, prev).unwrap();
            assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((out.state.attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            st = out.state;
            prev = Some(y);
        }
    }

    #[test]
    fn zero_attention_map_is_uniform() {
        let mut m = toy(4, 1);
        m.params.w_a.fill(0.0);
        let enc = m.encode(&[1, 2, 3]).unwrap();
        let st = m.initial_state(&enc).unwrap();
        for a in st.attention {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_matches_log_prob() {
        let m = toy(5, 3);
        let targets = [0, 1, 2, m.actions.eos()];
        let lp = m.sequence_log_prob(&[1, 2, 4], &targets).unwrap();
        let mut g = m.params.zeros_like();
        let stats = m.loss_and_grad(&[1, 2, 4], &targets, &mut g).unwrap();
        assert!((stats.loss + lp).abs() < 1e-12);
        assert!(lp < 0.0);
        assert_eq!(stats.steps, 4);
    }

    #[test]
    fn empty_and_unterminated() {
        let m = toy(3, 0);
        assert_eq!(m.encode(&[]).unwrap_err(), ModelError::EmptySentence);
        assert_eq!(
            m.sequence_log_prob(&[1], &[0]).unwrap_err(),
            ModelError::MissingEnd
        );
        assert_eq!(m.encode(&[99]).unwrap_err(), ModelError::UnknownWord(99));
    }

    #[test]
    fn gradient_small_model() {
        use crate::nn::grad_check;
        let m = toy(3, 11);
        let words = [1, 3, 4];
        let targets = [0, 1, 2, 5, m.actions.eos()];
        let mut g = m.params.zeros_like();
        m.loss_and_grad(&words, &targets, &mut g).unwrap();
        for (b, name) in BLOCK_NAMES.iter().enumerate() {
            let flat = m.params.blocks()[b].data().to_vec();
            let analytic = g.blocks()[b].data().to_vec();
            let coords: Vec<usize> = (0..flat.len()).collect();
            let err = grad_check(
                |q| {
                    let mut mm = m.clone();
                    mm.params.blocks_mut()[b].data_mut().copy_from_slice(q);
                    -mm.sequence_log_prob(&words, &targets).unwrap()
                },
                &flat,
                &analytic,
                1e-5,
                &coords,
            )
            .unwrap();
            assert!(err < 1e-5, "{name}: {err}");
        }
    }
}
