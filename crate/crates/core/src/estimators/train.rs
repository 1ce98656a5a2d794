//! Mini-batch Adagrad ascent on total log evidence.

use serde::{Deserialize, Serialize};

use crate::consensus::VoteCount;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

use super::network::{adagrad_step, NetworkGrad};
use super::{encode_alien, AlienVoteVector, Estimator, EstimatorSpec, TokenBag};

/// One observed pair as the estimator sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub tokens: TokenBag,
    pub alien: Option<AlienVoteVector>,
    pub attribute: usize,
    pub votes: VoteCount,
}

impl TrainingExample {
    /// Every voted pair of `data`, in location-major order.
    pub fn from_dataset(spec: &EstimatorSpec, data: &Dataset) -> Result<Vec<Self>> {
        if data.num_attributes() != spec.attribute_count {
            return Err(Error::Contract(format!(
                "dataset has {} attributes, spec expects {}",
                data.num_attributes(),
                spec.attribute_count
            )));
        }
        let mut out = Vec::new();
        for (l, record) in data.locations().iter().enumerate() {
            let row = data.location_votes(l);
            if row.iter().all(VoteCount::is_empty) {
                continue;
            }
            let tokens = TokenBag::from_tokens(&record.tokens, spec.vocab_buckets);
            for (a, votes) in row.iter().enumerate() {
                if votes.is_empty() {
                    continue;
                }
                let alien = if spec.architecture.uses_alien_votes() {
                    Some(encode_alien(row, a, spec.alien_encoding)?)
                } else {
                    None
                };
                out.push(Self {
                    tokens: tokens.clone(),
                    alien,
                    attribute: a,
                    votes: *votes,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adagrad_init: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 256,
            epochs: 15,
            seed: 0,
            adagrad_init: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(
                "learning_rate",
                "must be positive and finite",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.adagrad_init.is_finite() && self.adagrad_init > 0.0) {
            return Err(Error::config("adagrad_init", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Mean log evidence over the training set after an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_log_evidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean log evidence before the first update.
    pub initial: f64,
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_mean(&self) -> f64 {
        self.epochs
            .last()
            .map_or(self.initial, |e| e.mean_log_evidence)
    }
}

impl Estimator {
    /// Mean log evidence of `examples` under the current parameters.
    pub fn mean_log_evidence(&self, examples: &[TrainingExample]) -> Result<f64> {
        if examples.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for ex in examples {
            let belief = self.forward(&ex.tokens, ex.alien.as_ref(), ex.attribute)?;
            total += crate::consensus::log_evidence(&belief, ex.votes);
        }
        Ok(total / examples.len() as f64)
    }

    /// Runs `cfg.epochs` epochs over `examples`, calling `on_epoch` after each.
    pub fn train(
        &mut self,
        cfg: &TrainConfig,
        examples: &[TrainingExample],
        mut on_epoch: impl FnMut(&EpochStats),
    ) -> Result<TrainReport> {
        cfg.validate()?;
        if let Some(i) = examples.iter().position(|e| e.votes.is_empty()) {
            return Err(Error::Contract(format!(
                "training example {i} has no votes"
            )));
        }
        let initial = self.mean_log_evidence(examples)?;
        let mut report = TrainReport {
            initial,
            epochs: Vec::with_capacity(cfg.epochs),
        };
        if cfg.epochs == 0 || examples.is_empty() {
            return Ok(report);
        }
        if self.accumulators.is_none() {
            self.accumulators = Some(
                self.networks
                    .iter()
                    .map(|n| n.filled(cfg.adagrad_init))
                    .collect(),
            );
        }

        let mut rng = RngStream::new(cfg.seed, 1);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        for epoch in 1..=cfg.epochs {
            rng.shuffle(&mut order);
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                self.batch_step(cfg, examples, chunk, epoch, b)?;
            }
            let mean = self.mean_log_evidence(examples)?;
            if !mean.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: usize::MAX,
                    norms: self.parameter_norms(),
                });
            }
            let stats = EpochStats {
                epoch,
                mean_log_evidence: mean,
            };
            on_epoch(&stats);
            report.epochs.push(stats);
        }
        Ok(report)
    }

    fn batch_step(
        &mut self,
        cfg: &TrainConfig,
        examples: &[TrainingExample],
        batch: &[usize],
        epoch: usize,
        index: usize,
    ) -> Result<()> {
        let mut grads: Vec<NetworkGrad> =
            self.networks.iter().map(NetworkGrad::zeros_like).collect();
        let scale = 1.0 / batch.len() as f64;
        let total = self.accumulate(batch.iter().map(|&i| &examples[i]), scale, &mut grads)?;
        let grad_ok = grads.iter().all(|g| g.squared_norm().is_finite());
        if !total.is_finite() || !grad_ok {
            return Err(Error::NonFinite {
                epoch,
                batch: index,
                norms: self.parameter_norms(),
            });
        }
        let accs = self
            .accumulators
            .as_mut()
            .expect("accumulators initialized");
        for ((net, acc), grad) in self.networks.iter_mut().zip(accs.iter_mut()).zip(&grads) {
            if !grad.is_zero() {
                adagrad_step(net, acc, grad, cfg.learning_rate);
            }
        }
        self.step += 1;
        Ok(())
    }
}
