//! Maximum-likelihood training with per-example SGD.

mod checkpoint;
mod preprocess;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lf::LfError;
use crate::model::{ModelConfig, ModelError, Seq2Act};
use crate::vocab::{ActionVocab, WordVocab};

pub use checkpoint::{
    from_bytes, load_checkpoint, load_expecting, save_checkpoint, to_bytes, CheckpointError,
    FORMAT_VERSION, MAGIC,
};
pub use preprocess::{
    preprocess, preprocess_example, read_corpus, restore_entities, tokenize_utterance,
    CorpusExample, EntityMatcher, Preprocessed, RawExample,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {source}")]
    Example {
        line: usize,
        #[source]
        source: LfError,
    },
    #[error("line {line}: entity `{entity}` is not mentioned in the utterance")]
    UnresolvableEntity { line: usize, entity: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("loss diverged at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Constant rate, then halved every `decay_every` epochs after
/// `decay_after`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub initial_lr: f64,
    pub decay_after: usize,
    pub decay_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 30,
            initial_lr: 0.1,
            decay_after: 15,
            decay_every: 5,
        }
    }
}

impl TrainSchedule {
    /// Rate for 1-based `epoch`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch <= self.decay_after {
            return self.initial_lr;
        }
        let halvings = 1 + (epoch - self.decay_after - 1) / self.decay_every.max(1);
        self.initial_lr / f64::powi(2.0, halvings as i32)
    }

    pub fn trace(&self) -> Vec<f64> {
        (1..=self.epochs).map(|e| self.learning_rate(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub schedule: TrainSchedule,
    /// Rescale each example's gradient to at most this norm. Off by default.
    pub clip_norm: Option<f64>,
    /// Held-out share of the corpus, scored each epoch but never trained on.
    pub validation_fraction: f64,
    pub min_word_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            schedule: TrainSchedule::default(),
            clip_norm: None,
            validation_fraction: 0.0,
            min_word_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean negative log-likelihood per example, measured before each
    /// example's update.
    pub loss: f64,
    /// Share of target actions that were the argmax under teacher forcing.
    pub accuracy: f64,
    pub validation_loss: Option<f64>,
}

/// Word ids and output ids (end marker appended) of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub words: Vec<usize>,
    pub targets: Vec<usize>,
}

pub fn encode_example(
    ex: &CorpusExample,
    words: &WordVocab,
    actions: &ActionVocab,
) -> EncodedExample {
    let mut targets: Vec<usize> = ex
        .actions
        .iter()
        .map(|a| {
            actions
                .id(a)
                .expect("training actions are in the vocabulary")
        })
        .collect();
    targets.push(actions.eos());
    EncodedExample {
        words: words.ids(&ex.utterance),
        targets,
    }
}

/// Seeded shuffle generator, distinct from the initialization stream.
pub fn order_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed)
}

/// One pass of per-example SGD in an order drawn from `rng`.
pub fn run_epoch(
    model: &mut Seq2Act,
    data: &[EncodedExample],
    epoch: usize,
    lr: f64,
    clip_norm: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<EpochMetrics, TrainError> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut grad = model.params.zeros_like();
    let (mut loss, mut correct, mut steps) = (0.0, 0, 0);
    for i in order {
        grad.fill_zero();
        let ex = &data[i];
        let stats = model
            .loss_and_grad(&ex.words, &ex.targets, &mut grad)
            .map_err(|e| match e {
                ModelError::Nn(crate::nn::NnError::NonFiniteLoss) => {
                    TrainError::DivergenceDetected { epoch }
                }
                other => other.into(),
            })?;
        loss += stats.loss;
        correct += stats.correct;
        steps += stats.steps;
        let mut scale = lr;
        if let Some(max) = clip_norm {
            let n = grad.norm();
            if n > max {
                scale *= max / n;
            }
        }
        model.params.add_scaled(-scale, &grad);
    }
    if !loss.is_finite() {
        return Err(TrainError::DivergenceDetected { epoch });
    }
    Ok(EpochMetrics {
        epoch,
        lr,
        loss: loss / data.len().max(1) as f64,
        accuracy: correct as f64 / steps.max(1) as f64,
        validation_loss: None,
    })
}

/// Mean negative log-likelihood, scored in parallel.
pub fn mean_loss(model: &Seq2Act, data: &[EncodedExample]) -> Result<f64, ModelError> {
    let losses = crate::par::map(data, |ex| model.sequence_log_prob(&ex.words, &ex.targets));
    let mut total = 0.0;
    for l in losses {
        total -= l?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Trains a fresh model on `data`, calling `on_epoch` after every epoch.
pub fn train_with(
    config: &TrainConfig,
    data: &Preprocessed,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Seq2Act, Vec<EpochMetrics>), TrainError> {
    if data.examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut model = Seq2Act::new(
        config.model.clone(),
        data.words.clone(),
        data.actions.clone(),
    )?;
    let encoded: Vec<EncodedExample> = data
        .examples
        .iter()
        .map(|e| encode_example(e, &data.words, &data.actions))
        .collect();
    model.max_sequence_len = encoded.iter().map(|e| e.targets.len()).max().unwrap_or(0);
    let mut rng = order_rng(config.model.seed);
    let mut idx: Vec<usize> = (0..encoded.len()).collect();
    let n_val = ((encoded.len() as f64) * config.validation_fraction).floor() as usize;
    let n_val = n_val.min(encoded.len().saturating_sub(1));
    idx.shuffle(&mut rng);
    let (val_idx, train_idx) = idx.split_at(n_val);
    let train: Vec<EncodedExample> = train_idx.iter().map(|&i| encoded[i].clone()).collect();
    let val: Vec<EncodedExample> = val_idx.iter().map(|&i| encoded[i].clone()).collect();

    let mut metrics = Vec::with_capacity(config.schedule.epochs);
    for epoch in 1..=config.schedule.epochs {
        let lr = config.schedule.learning_rate(epoch);
        let mut m = run_epoch(&mut model, &train, epoch, lr, config.clip_norm, &mut rng)?;
        if !val.is_empty() {
            m.validation_loss = Some(mean_loss(&model, &val)?);
        }
        log::info!(
            "epoch {epoch:>2} lr {lr:.5} loss {:.4} acc {:.4}{}",
            m.loss,
            m.accuracy,
            m.validation_loss
                .map(|v| format!(" val {v:.4}"))
                .unwrap_or_default()
        );
        on_epoch(&m);
        metrics.push(m);
    }
    Ok((model, metrics))
}

pub fn train(
    config: &TrainConfig,
    data: &Preprocessed,
) -> Result<(Seq2Act, Vec<EpochMetrics>), TrainError> {
    train_with(config, data, |_| {})
}
