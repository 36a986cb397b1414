use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{Dropout, EditModel, Instance};
use super::tape::{lit, Params, Scalar, Tensor};
use crate::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &Params<T>, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.zero_grads(),
            v: params.zero_grads(),
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &[Tensor<T>]) {
        self.t += 1;
        let (b1, b2): (T, T) = (lit(self.beta1), lit(self.beta2));
        let c1: T = lit(1.0 - self.beta1.powi(self.t));
        let c2: T = lit(1.0 - self.beta2.powi(self.t));
        let (lr, eps): (T, T) = (lit(self.learning_rate), lit(self.eps));
        for (((p, g), m), v) in params
            .values
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (T::one() - b1) * gi;
                v.data[i] = b2 * v.data[i] + (T::one() - b2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] = p.data[i] - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub(crate) fn clip_gradients<T: Scalar>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data.iter())
        .map(|x| x.to_f64().unwrap_or(0.0).powi(2))
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s: T = lit(max_norm / norm);
        for g in grads.iter_mut() {
            g.data.iter_mut().for_each(|x| *x = *x * s);
        }
    }
    norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub best: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("serializable record") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::Io(e.to_string()))
    }
}

/// Patience-based stopping on a loss that should decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<f64>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    /// Records one epoch's loss; returns whether it is a new best.
    pub fn observe(&mut self, loss: f64) -> bool {
        if self.best.is_none_or(|b| loss < b) {
            self.best = Some(loss);
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

/// Mini-batch trainer with early stopping on validation loss.
pub struct Trainer<T> {
    pub model: EditModel<T>,
    pub log: TrainingLog,
    adam: Adam<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: EditModel<T>) -> Self {
        let adam = Adam::new(&model.params, model.config.learning_rate);
        let rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
        Trainer {
            model,
            log: TrainingLog::default(),
            adam,
            rng,
        }
    }

    /// One pass over `train` in shuffled mini-batches; returns the mean
    /// per-token training loss.
    pub fn train_epoch(&mut self, train: &[Instance]) -> f64 {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut tokens = 0usize;
        for chunk in order.chunks(self.model.config.batch_size) {
            let batch: Vec<&Instance> = chunk.iter().map(|&i| &train[i]).collect();
            let n: usize = batch.iter().map(|i| i.target.len() + 1).sum();
            let mut grads = self.model.params.zero_grads();
            let drop = Dropout {
                rate: self.model.config.dropout,
                rng: Some(&mut self.rng),
            };
            let loss = self
                .model
                .accumulate_gradients(&batch, n as f64, &mut grads, drop);
            clip_gradients(&mut grads, self.model.config.grad_clip);
            self.adam.step(&mut self.model.params, &grads);
            total += loss * n as f64;
            tokens += n;
        }
        total / tokens.max(1) as f64
    }

    /// Trains until `max_epochs` or until validation loss has not improved
    /// for `early_stop_patience` epochs, then restores the best parameters.
    pub fn fit(&mut self, train: &[Instance], valid: &[Instance]) -> Result<&TrainingLog> {
        self.fit_until(train, valid, |_, _| false)
    }

    /// Like [`Trainer::fit`]; `stop` is called after every epoch and ends
    /// training when it returns true.
    pub fn fit_until(
        &mut self,
        train: &[Instance],
        valid: &[Instance],
        mut stop: impl FnMut(usize, &EditModel<T>) -> bool,
    ) -> Result<&TrainingLog> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut stopping = EarlyStopping::new(self.model.config.early_stop_patience);
        let mut best: Option<Vec<Tensor<T>>> = None;
        for epoch in 1..=self.model.config.max_epochs {
            let started = Instant::now();
            let train_loss = self.train_epoch(train);
            let valid_loss = if valid.is_empty() {
                self.model.loss(train)
            } else {
                self.model.loss(valid)
            };
            let improved = stopping.observe(valid_loss);
            if improved {
                best = Some(self.model.params.values.clone());
                self.log.best_epoch = Some(epoch);
            }
            let record = EpochRecord {
                epoch,
                train_loss,
                valid_loss,
                best: improved,
                seconds: started.elapsed().as_secs_f64(),
            };
            log::info!("epoch {epoch}: train {train_loss:.4} valid {valid_loss:.4}");
            self.log.epochs.push(record);
            if stop(epoch, &self.model) {
                return Ok(&self.log);
            }
            if stopping.should_stop() {
                self.log.stopped_early = true;
                break;
            }
        }
        if let Some(values) = best {
            self.model.params.values = values;
        }
        Ok(&self.log)
    }

    pub fn into_model(self) -> EditModel<T> {
        self.model
    }
}
