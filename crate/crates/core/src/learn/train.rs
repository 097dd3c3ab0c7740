use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, ClassifierHead, LearnError, LrSchedule, Objective, OptimState, SgdConfig};
use crate::encoding::{encode_leaf, encode_subgraph};
use crate::ontology::Ontology;
use crate::synthetic::SyntheticSample;

/// Features with both target encodings, aligned row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub leaf_targets: Vec<Vec<f64>>,
    pub subgraph_targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn from_labels(ont: &Ontology, features: Vec<Vec<f64>>, labels: &[BTreeSet<String>]) -> Result<Self, LearnError> {
        check_len("labels", features.len(), labels.len())?;
        let mut leaf_targets = Vec::with_capacity(labels.len());
        let mut subgraph_targets = Vec::with_capacity(labels.len());
        for l in labels {
            let ids = || l.iter().map(String::as_str);
            leaf_targets.push(encode_leaf(ont, ids())?.to_f64());
            subgraph_targets.push(encode_subgraph(ont, ids())?.to_f64());
        }
        let d = Self {
            features,
            leaf_targets,
            subgraph_targets,
        };
        d.check()?;
        Ok(d)
    }

    pub fn from_synthetic(ont: &Ontology, samples: &[SyntheticSample]) -> Result<Self, LearnError> {
        let leaf_ids = ont.leaf_ids();
        let labels: Vec<BTreeSet<String>> = samples
            .iter()
            .map(|s| BTreeSet::from([String::from(leaf_ids[s.leaf])]))
            .collect();
        Self::from_labels(ont, samples.iter().map(|s| s.features.clone()).collect(), &labels)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<(), LearnError> {
        let d = self.input_dim();
        for f in &self.features {
            check_len("features", d, f.len())?;
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            leaf_targets: idx.iter().map(|&i| self.leaf_targets[i].clone()).collect(),
            subgraph_targets: idx.iter().map(|&i| self.subgraph_targets[i].clone()).collect(),
        }
    }
}

/// Mean loss over `idx` and its gradient with respect to the head weights
/// and bias. Samples are reduced in index order.
pub fn batch_gradient(
    head: &ClassifierHead,
    objective: &Objective,
    data: &Dataset,
    idx: &[usize],
) -> Result<(f64, Vec<f64>, Vec<f64>), LearnError> {
    if idx.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    check_len("head output", objective.output_dim(), head.output_dim)?;
    let scale = 1.0 / idx.len() as f64;
    let mut gw = vec![0.0; head.weights.len()];
    let mut gb = vec![0.0; head.bias.len()];
    let mut total = 0.0;
    for &i in idx {
        let x = &data.features[i];
        let y_hat = head.forward(x)?;
        let (l, d_out) = objective.loss_and_grad(&y_hat, &data.leaf_targets[i], &data.subgraph_targets[i])?;
        total += l;
        head.backward_into(x, &y_hat, &d_out, scale, &mut gw, &mut gb);
    }
    Ok((total * scale, gw, gb))
}

pub fn mean_loss(head: &ClassifierHead, objective: &Objective, data: &Dataset) -> Result<f64, LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let mut total = 0.0;
    for i in 0..data.len() {
        let y_hat = head.forward(&data.features[i])?;
        total += objective.loss(&y_hat, &data.leaf_targets[i], &data.subgraph_targets[i])?;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: u64,
    pub seed: u64,
    pub sgd: SgdConfig,
    pub schedule: LrSchedule,
    /// Validation and trace interval.
    pub eval_every: u64,
}

impl TrainConfig {
    /// Default optimizer with the schedule compressed to `iters`.
    pub fn desk(iters: u64, seed: u64) -> Self {
        Self {
            iters,
            seed,
            sgd: SgdConfig::default(),
            schedule: LrSchedule::scaled(iters),
            eval_every: (iters / 20).max(1),
        }
    }

    fn check(&self) -> Result<(), LearnError> {
        self.schedule.check()?;
        if self.iters > self.schedule.total_iters {
            return Err(LearnError::Config("more iterations than the schedule covers"));
        }
        if self.sgd.batch_size == 0 || self.eval_every == 0 {
            return Err(LearnError::Config("batch size and eval interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    pub lr: f64,
    /// Mean batch loss since the previous row; the full training loss on
    /// the first row.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best_head: ClassifierHead,
    pub best_iter: u64,
    pub best_val_loss: f64,
    pub final_head: ClassifierHead,
    pub trace: Vec<TraceRow>,
}

/// Complete training state. Batches are drawn from a generator keyed by
/// seed and iteration, so a trainer restored from a checkpoint continues on
/// exactly the trajectory it would have followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub head: ClassifierHead,
    pub optim: OptimState,
    pub objective: Objective,
    pub config: TrainConfig,
    pub iter: u64,
    pub best_head: ClassifierHead,
    pub best_iter: u64,
    pub best_val_loss: Option<f64>,
    pub trace: Vec<TraceRow>,
    running_loss: f64,
    running_count: u64,
}

impl Trainer {
    pub fn new(objective: Objective, input_dim: usize, config: TrainConfig) -> Result<Self, LearnError> {
        let head = ClassifierHead::init(input_dim, objective.output_dim(), config.seed);
        Self::with_head(head, objective, config)
    }

    pub fn with_head(head: ClassifierHead, objective: Objective, config: TrainConfig) -> Result<Self, LearnError> {
        config.check()?;
        check_len("head output", objective.output_dim(), head.output_dim)?;
        Ok(Self {
            optim: OptimState::new(&head),
            best_head: head.clone(),
            head,
            objective,
            config,
            iter: 0,
            best_iter: 0,
            best_val_loss: None,
            trace: Vec::new(),
            running_loss: 0.0,
            running_count: 0,
        })
    }

    pub fn ontology_hash(&self) -> &str {
        self.objective.ontology_hash()
    }

    pub fn is_finished(&self) -> bool {
        self.iter >= self.config.iters
    }

    fn batch(&self, n: usize) -> Vec<usize> {
        let b = self.config.sgd.batch_size;
        if b >= n {
            return (0..n).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.iter);
        rand::seq::index::sample(&mut rng, n, b).into_vec()
    }

    /// One optimizer step; returns the batch loss.
    pub fn step(&mut self, train: &Dataset) -> Result<f64, LearnError> {
        if train.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let idx = self.batch(train.len());
        let lr = self.config.schedule.lr_at(self.iter)?;
        let (loss, gw, gb) = batch_gradient(&self.head, &self.objective, train, &idx)?;
        if !loss.is_finite() {
            return Err(self.diverged());
        }
        self.optim.step(&mut self.head, &gw, &gb, lr, &self.config.sgd);
        if !self.head.is_finite() {
            return Err(self.diverged());
        }
        self.iter += 1;
        self.running_loss += loss;
        self.running_count += 1;
        Ok(loss)
    }

    fn diverged(&self) -> LearnError {
        LearnError::Diverged {
            iter: self.iter,
            trace: self.trace.clone(),
        }
    }

    fn evaluate(&mut self, train: &Dataset, val: Option<&Dataset>) -> Result<(), LearnError> {
        let val_loss = mean_loss(&self.head, &self.objective, val.unwrap_or(train))?;
        if !val_loss.is_finite() {
            return Err(self.diverged());
        }
        let lr = self.config.schedule.lr_at(self.iter)?;
        let train_loss = match (self.running_count, val) {
            (0, Some(_)) => mean_loss(&self.head, &self.objective, train)?,
            (0, None) => val_loss,
            (n, _) => self.running_loss / n as f64,
        };
        self.trace.push(TraceRow {
            iter: self.iter,
            lr,
            train_loss,
            val_loss,
        });
        self.running_loss = 0.0;
        self.running_count = 0;
        if self.best_val_loss.is_none_or(|b| val_loss < b) {
            self.best_val_loss = Some(val_loss);
            self.best_head = self.head.clone();
            self.best_iter = self.iter;
        }
        Ok(())
    }

    /// Trains up to iteration `stop` (capped at the configured total).
    pub fn run_until(&mut self, stop: u64, train: &Dataset, val: Option<&Dataset>) -> Result<(), LearnError> {
        if self.iter == 0 && self.trace.is_empty() {
            self.evaluate(train, val)?;
        }
        let stop = stop.min(self.config.iters);
        while self.iter < stop {
            self.step(train)?;
            if self.iter.is_multiple_of(self.config.eval_every) || self.iter == self.config.iters {
                self.evaluate(train, val)?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self, train: &Dataset, val: Option<&Dataset>) -> Result<TrainOutcome, LearnError> {
        self.run_until(self.config.iters, train, val)?;
        Ok(self.outcome())
    }

    pub fn outcome(&self) -> TrainOutcome {
        TrainOutcome {
            best_head: self.best_head.clone(),
            best_iter: self.best_iter,
            best_val_loss: self.best_val_loss.unwrap_or(f64::INFINITY),
            final_head: self.head.clone(),
            trace: self.trace.clone(),
        }
    }
}
