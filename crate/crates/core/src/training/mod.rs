//! Optimization loop, configuration presets, and checkpoints.

mod adam;
mod checkpoint;
mod config;

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::{zero_buffers, Gradients, Tape};
use crate::corpus::{EmbeddingTable, SentenceRecord, Vocabulary};
use crate::evaluation::evaluate;
use crate::model::{sentence_objective, EncodedSentence, ModelError, ModelParams};

pub use adam::{AdamState, NonFiniteGradient, BETA1, BETA2, EPSILON};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CheckpointError,
    FORMAT_VERSION, MAGIC,
};
pub use config::{
    domain_lambda, parse_config_text, ConfigError, TrainConfig, DEFAULT_BATCH, DEFAULT_DEV_FRACTION, DEFAULT_EPOCHS, DEFAULT_GAMMA,
    DEFAULT_HIDDEN, DEFAULT_LR, DEFAULT_PATIENCE, DEFAULT_SEED,
};

const DEV_STREAM: u64 = 0x0000_de51;
const SHUFFLE_STREAM: u64 = 0x0005_4aff;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no training sentences")]
    EmptyCorpus,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean objective per aspect group over the epoch.
    pub train_loss: f64,
    pub dev_acc: Option<f64>,
    /// Sentences dropped for a non-finite loss or gradient.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    /// One `epoch\ttrain_loss\tdev_acc` line per epoch.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let dev = e.dev_acc.map_or_else(|| "-".to_string(), |a| format!("{a:.6}"));
            let _ = writeln!(out, "{}\t{:.6}\t{}", e.epoch, e.train_loss, dev);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub log: TrainLog,
    /// Indices into the training records held out for model selection.
    pub dev_indices: Vec<usize>,
}

pub fn encode_all(records: &[SentenceRecord], vocab: &Vocabulary) -> Vec<EncodedSentence> {
    records.iter().map(|r| EncodedSentence::from_record(r, vocab)).collect()
}

/// Seeded dev split drawn separately from single- and multi-aspect
/// sentences. Returns `(train, dev)` indices, each ascending.
pub fn split_dev(records: &[SentenceRecord], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DEV_STREAM);
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for multi in [false, true] {
        let mut idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].is_multi_aspect() == multi).collect();
        idx.shuffle(&mut rng);
        let n_dev = (fraction * idx.len() as f64).round() as usize;
        dev.extend_from_slice(&idx[..n_dev]);
        train.extend_from_slice(&idx[n_dev..]);
    }
    train.sort_unstable();
    dev.sort_unstable();
    (train, dev)
}

/// Epoch-level driver over already encoded sentences.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: ModelParams<f32>,
    pub adam: AdamState<f32>,
    train: Vec<EncodedSentence>,
    dev: Vec<EncodedSentence>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    frozen: Vec<bool>,
    epoch: usize,
}

struct SentenceStep {
    loss: f64,
    groups: usize,
    grads: Gradients<f32>,
}

impl Trainer {
    pub fn new(config: TrainConfig, model: ModelParams<f32>, train: Vec<EncodedSentence>, dev: Vec<EncodedSentence>) -> Result<Self, TrainError> {
        config.validate()?;
        if train.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM);
        let mut frozen = vec![false; model.store.len()];
        frozen[model.layout.embedding.index()] = config.freeze_embeddings;
        let adam = AdamState::new(&model.store, config.lr);
        let order = (0..train.len()).collect();
        Ok(Self { config, model, adam, train, dev, order, rng, frozen, epoch: 0 })
    }

    pub fn dev_accuracy(&self) -> Result<Option<f64>, TrainError> {
        if self.dev.is_empty() {
            return Ok(None);
        }
        let r = evaluate(&self.model, self.config.forward_options(), &self.dev, "", "")?;
        Ok(r.total().accuracy())
    }

    fn sentence_step(&self, s: &EncodedSentence) -> Result<SentenceStep, ModelError> {
        let mut tape = Tape::new(&self.model.store);
        let (obj, _) = sentence_objective(&mut tape, &self.model, self.config.forward_options(), self.config.loss(), s)?;
        let loss = tape.scalar(obj) as f64;
        let grads = tape.backward(obj)?;
        Ok(SentenceStep { loss, groups: s.aspects.len(), grads })
    }

    /// One pass over shuffled sentence batches.
    pub fn run_epoch(&mut self) -> Result<EpochRecord, TrainError> {
        self.epoch += 1;
        let epoch = self.epoch;
        self.order.shuffle(&mut self.rng);
        let order = self.order.clone();
        let mut buffers = zero_buffers(&self.model.store);
        let (mut loss_sum, mut group_sum, mut skipped) = (0.0f64, 0usize, 0usize);

        for batch in order.chunks(self.config.batch_size) {
            let steps: Vec<Result<SentenceStep, ModelError>> = batch.par_iter().map(|&i| self.sentence_step(&self.train[i])).collect();
            let mut kept = Vec::with_capacity(steps.len());
            for (&i, step) in batch.iter().zip(steps) {
                let step = step?;
                if step.loss.is_finite() && step.grads.all_finite() {
                    kept.push(step);
                } else {
                    log::warn!("epoch {epoch}: skipping training sentence {i} (non-finite loss or gradient)");
                    skipped += 1;
                }
            }
            let groups: usize = kept.iter().map(|s| s.groups).sum();
            if groups == 0 {
                continue;
            }
            for b in &mut buffers {
                b.iter_mut().for_each(|v| *v = 0.0);
            }
            let scale = 1.0 / groups as f32;
            for s in &kept {
                s.grads.accumulate_into(&mut buffers, scale);
                loss_sum += s.loss;
            }
            group_sum += groups;
            if let Err(e) = self.adam.step(&mut self.model.store, &buffers, &self.frozen) {
                log::warn!("epoch {epoch}: skipped update, non-finite gradient in block {} entry {}", e.block, e.index);
            }
        }

        if group_sum == 0 || !loss_sum.is_finite() {
            return Err(TrainError::Diverged { epoch, reason: format!("no finite loss in any of {} sentences", self.train.len()) });
        }
        if !self.model.store.all_finite() {
            return Err(TrainError::Diverged { epoch, reason: "parameters became non-finite".into() });
        }
        let dev_acc = self.dev_accuracy()?;
        let record = EpochRecord { epoch, train_loss: loss_sum / group_sum as f64, dev_acc, skipped };
        log::info!("epoch {epoch}: loss {:.6} dev {:?} skipped {skipped}", record.train_loss, record.dev_acc);
        Ok(record)
    }

    /// Runs up to `config.epochs` epochs with early stopping on dev accuracy
    /// and keeps the best-dev parameters. Without a dev set the last epoch is
    /// kept. `patience = 0` disables early stopping.
    pub fn fit(mut self) -> Result<(ModelParams<f32>, TrainLog), TrainError> {
        let mut log = TrainLog::default();
        let mut best: Option<(f64, ModelParams<f32>)> = None;
        let mut since_best = 0;
        for _ in 0..self.config.epochs {
            let rec = self.run_epoch()?;
            let epoch = rec.epoch;
            let dev_acc = rec.dev_acc;
            log.epochs.push(rec);
            let Some(acc) = dev_acc else {
                log.best_epoch = epoch;
                continue;
            };
            if best.as_ref().map_or(true, |(b, _)| acc > *b) {
                best = Some((acc, self.model.clone()));
                log.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if self.config.patience > 0 && since_best >= self.config.patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
        let params = best.map_or(self.model, |(_, p)| p);
        Ok((params, log))
    }
}

/// Trains on `records` with a held-out dev split. `table` supplies the
/// vocabulary and initial embedding matrix.
pub fn train(config: &TrainConfig, records: &[SentenceRecord], table: &EmbeddingTable) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if records.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let (train_idx, dev_idx) = split_dev(records, config.dev_fraction, config.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| EncodedSentence::from_record(&records[i], &table.vocab)).collect::<Vec<_>>();
    let model = ModelParams::from_embeddings(table, config.hidden, config.seed);
    let trainer = Trainer::new(config.clone(), model, pick(&train_idx), pick(&dev_idx))?;
    let (params, log) = trainer.fit()?;
    Ok(TrainOutcome { params, log, dev_indices: dev_idx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AspectSpan, Polarity};

    fn record(id: usize, aspects: usize) -> SentenceRecord {
        let tokens: Vec<String> = ["the", "food", "was", "good", "but", "slow", "service"].iter().map(|s| s.to_string()).collect();
        let aspects = (0..aspects)
            .map(|k| AspectSpan {
                term: tokens[k * 2 + 1].clone(),
                char_start: 0,
                char_end: 1,
                tok_start: k * 2 + 1,
                tok_len: 1,
                polarity: Polarity::from_index(k % 3).unwrap(),
            })
            .collect();
        SentenceRecord { id: id.to_string(), text: tokens.join(" "), tokens, aspects }
    }

    #[test]
    fn dev_split_is_stratified_and_seeded() {
        let records: Vec<_> = (0..40).map(|i| record(i, if i < 30 { 1 } else { 2 })).collect();
        let (train, dev) = split_dev(&records, 0.1, 3);
        assert_eq!(dev.len(), 4);
        assert_eq!(dev.iter().filter(|&&i| i >= 30).count(), 1);
        assert_eq!(train.len() + dev.len(), 40);
        assert_eq!(split_dev(&records, 0.1, 3), (train.clone(), dev.clone()));
        assert_ne!(split_dev(&records, 0.1, 4).1, dev);
        assert!(split_dev(&records, 0.0, 3).1.is_empty());
    }

    #[test]
    fn log_format() {
        let log = TrainLog {
            epochs: vec![
                EpochRecord { epoch: 1, train_loss: 1.25, dev_acc: Some(0.5), skipped: 0 },
                EpochRecord { epoch: 2, train_loss: 0.75, dev_acc: None, skipped: 0 },
            ],
            best_epoch: 2,
            stopped_early: false,
        };
        assert_eq!(log.render(), "1\t1.250000\t0.500000\n2\t0.750000\t-\n");
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let vocab = Vocabulary::new();
        let table = EmbeddingTable::random(vocab, 4, 1);
        let cfg = TrainConfig::preset(crate::corpus::Domain::Restaurant, crate::model::Variant::Miad);
        assert!(matches!(train(&cfg, &[], &table), Err(TrainError::EmptyCorpus)));
    }
}
