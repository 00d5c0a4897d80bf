//! Mini-batch gradient descent over encoder and heads.
//!
//! Checkpoints are a single JSON document:
//!
//! ```text
//! {
//!   "format": "bioqa-checkpoint/1",
//!   "config": { "vocab_size": .., "hidden": .., "layers": .., "heads": .., "ffn": .., "max_positions": .. },
//!   "arrays": { "<name>": { "shape": [..], "data": [..] }, .. }
//! }
//! ```
//!
//! Array names are those of [`EncoderParams::tensors`] plus `heads.start`,
//! `heads.end` and `heads.yes`; data is row-major. Floats are written in
//! shortest round-trip form, so save/load is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{ArrayViewD, ArrayViewMutD};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{self, EncoderConfig, EncoderOutput, EncoderParams, NamedArray};
use crate::heads::{self, HeadParams, SpanDistributions};
use crate::tokenizer::Feature;
use crate::{Error, QuestionType, Result};

pub const CHECKPOINT_FORMAT: &str = "bioqa-checkpoint/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: EncoderParams,
    pub heads: HeadParams,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: EncoderConfig,
    arrays: BTreeMap<String, NamedArray>,
}

impl Model {
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::init_with(config, &mut rng);
        let heads = HeadParams::init_with(config.hidden, &mut rng);
        Ok(Model { encoder, heads })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.encoder.config
    }

    pub fn zeros_like(&self) -> Self {
        Model {
            encoder: self.encoder.zeros_like(),
            heads: HeadParams::zeros(self.heads.hidden()),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut t = self.encoder.tensors();
        t.extend(self.heads.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.heads.tensors_mut());
        t
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut arrays = self.encoder.to_arrays();
        for (name, t) in self.heads.tensors() {
            arrays.insert(name, NamedArray::from_view(&t));
        }
        Ok(serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: *self.config(),
            arrays,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidInput(format!("unsupported checkpoint format {:?}", ck.format)));
        }
        let encoder = EncoderParams::from_arrays(ck.config, &ck.arrays)?;
        let mut heads = HeadParams::zeros(ck.config.hidden);
        for (name, mut t) in heads.tensors_mut() {
            let a = ck
                .arrays
                .get(&name)
                .ok_or_else(|| Error::Shape(format!("checkpoint lacks {name}")))?;
            a.copy_into(&name, &mut t)?;
        }
        Ok(Model { encoder, heads })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn encode(&self, feature: &Feature) -> Result<EncoderOutput> {
        encoder::forward(feature, &self.encoder)
    }
}

/// Which loss a batch is scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Span start/end negative log-likelihood.
    Span,
    /// Binary cross-entropy on the yes probability.
    YesNo,
    /// Sum of both; used to check gradients through both heads at once.
    Both,
}

impl From<QuestionType> for Objective {
    fn from(q: QuestionType) -> Self {
        if q.is_extractive() {
            Objective::Span
        } else {
            Objective::YesNo
        }
    }
}

impl Objective {
    fn uses_span(self) -> bool {
        matches!(self, Objective::Span | Objective::Both)
    }

    fn uses_yesno(self) -> bool {
        matches!(self, Objective::YesNo | Objective::Both)
    }
}

fn check_supervision(f: &Feature, objective: Objective) -> Result<()> {
    if objective.uses_span() && !f.has_span() {
        return Err(Error::InvalidInput(format!("feature {}#{} has no span label", f.pair_id, f.window_index)));
    }
    if objective.uses_yesno() && f.yes_label.is_none() {
        return Err(Error::InvalidInput(format!("feature {}#{} has no yes/no label", f.pair_id, f.window_index)));
    }
    Ok(())
}

struct ItemLoss {
    span: Option<(SpanDistributions, usize, usize)>,
    yes: Option<(f64, u8)>,
}

fn batch_loss(items: Vec<ItemLoss>) -> Result<f64> {
    let n = items.len() as f64;
    let mut total = 0.0;
    let spans: Vec<_> = items.iter().filter_map(|i| i.span.clone()).collect();
    if !spans.is_empty() {
        total += heads::span_loss(&spans)?;
    }
    let yes: Vec<_> = items.iter().filter_map(|i| i.yes).collect();
    if !yes.is_empty() {
        total += yes.iter().map(|&(p, y)| heads::yesno_loss(p, y)).sum::<f64>() / n;
    }
    Ok(total)
}

/// Mean batch loss without gradients.
pub fn loss(model: &Model, batch: &[&Feature], objective: Objective) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut items = Vec::with_capacity(batch.len());
    for f in batch {
        check_supervision(f, objective)?;
        let out = model.encode(f)?;
        items.push(item_loss(model, f, &out, objective)?);
    }
    batch_loss(items)
}

fn item_loss(model: &Model, f: &Feature, out: &EncoderOutput, objective: Objective) -> Result<ItemLoss> {
    let span = if objective.uses_span() {
        let d = heads::span_distributions(out, &model.heads, &f.passage_mask())?;
        Some((d, f.start_position.unwrap(), f.end_position.unwrap()))
    } else {
        None
    };
    let yes = objective
        .uses_yesno()
        .then(|| (heads::yes_probability(out, &model.heads), f.yes_label.unwrap()));
    Ok(ItemLoss { span, yes })
}

/// Mean batch loss and its gradient with respect to every parameter.
/// Items are processed in order, so the summation order is fixed.
pub fn loss_and_gradients(model: &Model, batch: &[&Feature], objective: Objective) -> Result<(f64, Model)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = batch.len();
    let mut grads = model.zeros_like();
    let mut items = Vec::with_capacity(n);
    for f in batch {
        check_supervision(f, objective)?;
        let (out, cache) = encoder::forward_ids(&model.encoder, &f.input_ids, &f.segment_ids, f.seq_len)?;
        let item = item_loss(model, f, &out, objective)?;
        let mut d_out = ndarray::Array2::zeros(out.token_reps.raw_dim());
        if let Some((d, ys, ye)) = &item.span {
            d_out += &heads::span_backward(&out, &model.heads, d, (*ys, *ye), n, &mut grads.heads);
        }
        if let Some((_, y)) = item.yes {
            d_out += &heads::yesno_backward(&out, &model.heads, y, n, &mut grads.heads);
        }
        encoder::backward(&model.encoder, &cache, &d_out, &mut grads.encoder);
        items.push(item);
    }
    Ok((batch_loss(items)?, grads))
}

/// `model -= lr * grads`.
pub fn apply_update(model: &mut Model, grads: &Model, lr: f64) {
    for ((_, mut p), (_, g)) in model.tensors_mut().into_iter().zip(grads.tensors()) {
        p.scaled_add(-lr, &g);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub question_type: QuestionType,
}

impl TrainConfig {
    pub fn new(question_type: QuestionType) -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            learning_rate: 0.05,
            seed: 42,
            question_type,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// 1-based epoch counter running across stages.
    pub epoch: usize,
    /// 0-based stage index.
    pub stage: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<EpochLoss>,
}

/// Trains on each stage in order, carrying parameters (and the shuffling
/// stream) from one stage to the next. Every stage runs `cfg.epochs`
/// epochs; each epoch shuffles its stage's features under the seeded
/// stream and takes one gradient step per mini-batch.
pub fn train(stages: &[Vec<Feature>], cfg: &TrainConfig, init: Model) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    if stages.is_empty() || stages.iter().any(Vec::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let objective = Objective::from(cfg.question_type);
    for f in stages.iter().flatten() {
        check_supervision(f, objective)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init;
    let mut trace = Vec::new();
    let mut epoch = 0;
    for (stage, features) in stages.iter().enumerate() {
        let mut order: Vec<usize> = (0..features.len()).collect();
        for _ in 0..cfg.epochs {
            epoch += 1;
            order.sort_unstable();
            order.shuffle(&mut rng);
            let mut sum = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let batch: Vec<&Feature> = chunk.iter().map(|&i| &features[i]).collect();
                let (l, grads) = loss_and_gradients(&model, &batch, objective)?;
                if !l.is_finite() {
                    log::error!("non-finite loss {l} at stage {stage} epoch {epoch} batch {b}");
                    return Err(Error::NonFiniteLoss { stage, epoch, batch: b });
                }
                sum += l * batch.len() as f64;
                apply_update(&mut model, &grads, cfg.learning_rate);
            }
            let mean_loss = sum / features.len() as f64;
            log::info!("stage {stage} epoch {epoch}: mean loss {mean_loss:.6}");
            trace.push(EpochLoss { epoch, stage, mean_loss });
        }
    }
    Ok(TrainOutcome { model, trace })
}

/// Loss trace as CSV with header `epoch,stage,mean_loss`.
pub fn trace_csv(trace: &[EpochLoss]) -> String {
    let mut s = String::from("epoch,stage,mean_loss\n");
    for e in trace {
        let _ = writeln!(s, "{},{},{}", e.epoch, e.stage, e.mean_loss);
    }
    s
}
