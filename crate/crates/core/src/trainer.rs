//! The training loop.
//!
//! Each epoch resamples which missing entries take part in the loss,
//! walks shuffled mini-batches with batch-level `α/β` and an epoch-level
//! `d`, refreshes pseudo-labels from a full forward pass, then decays the
//! learning rate geometrically.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataset::{round_count, Dataset, LabelMatrix};
use crate::error::{Error, Result};
use crate::loss::{self, Baseline, BatchView, LossConfig, LossOutput};
use crate::metrics;
use crate::model::{ModelConfig, ModelParams, Sgd};
use crate::pseudo::PseudoLabelStore;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LossKind {
    /// Pseudo-labels with the balanced, dynamically weighted, subsampled loss.
    Proposed,
    An,
    Wan,
    BceFull,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Proposed => "PROPOSED",
            LossKind::An => "AN",
            LossKind::Wan => "WAN",
            LossKind::BceFull => "BCE_FULL",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub loss: LossConfig,
    pub loss_kind: LossKind,
    /// WAN negative weight; `None` means `1 / (L - 1)`.
    pub wan_weight: Option<f64>,
    pub seed: u64,
    /// Record wall-clock per epoch. Off keeps reports reproducible bit for bit.
    pub record_timings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        Self {
            epochs: loss.total_epochs,
            batch_size: 32,
            base_lr: 0.1,
            lr_decay: 0.95,
            momentum: 0.9,
            loss,
            loss_kind: LossKind::Proposed,
            wan_weight: None,
            seed: 0,
            record_timings: false,
        }
    }
}

impl TrainConfig {
    /// Sets the epoch count on both the loop and the loss schedule.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.loss.total_epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::validation("base_lr", format!("must be finite and > 0, got {}", self.base_lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::validation("lr_decay", format!("must lie in (0, 1], got {}", self.lr_decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation("momentum", format!("must lie in [0, 1), got {}", self.momentum)));
        }
        if let Some(w) = self.wan_weight {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::validation("wan_weight", format!("must lie in (0, 1], got {w}")));
            }
        }
        // The balanced-loss settings only matter for the proposed loss.
        if self.loss_kind != LossKind::Proposed {
            return Ok(());
        }
        if self.loss.total_epochs != self.epochs {
            return Err(Error::validation(
                "loss.total_epochs",
                format!("must equal epochs = {}, got {}", self.epochs, self.loss.total_epochs),
            ));
        }
        self.loss.validate()
    }

    /// Learning rate used during `epoch`: `base_lr · lr_decay^epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.base_lr * self.lr_decay.powi(epoch as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    /// Validation mAP, when a validation split was supplied.
    pub val_map: Option<f64>,
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub d: f64,
    /// Instances whose all-negative penalty fired during the epoch.
    pub penalized_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_secs: Option<f64>,
}

/// Picks `round(q · N_ne)` missing entries per row uniformly at random.
pub fn sample_picked_mask(labels: &LabelMatrix, q_fraction: f64, seed: u64) -> Array2<bool> {
    let mut rng = seed::rng(seed);
    let mut picked = Array2::from_elem(labels.dim(), false);
    for (i, row) in labels.entries().outer_iter().enumerate() {
        let missing: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, z)| z.is_missing())
            .map(|(j, _)| j)
            .collect();
        let k = round_count(q_fraction, missing.len());
        for idx in index::sample(&mut rng, missing.len(), k) {
            picked[[i, missing[idx]]] = true;
        }
    }
    picked
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub reports: Vec<EpochReport>,
    pub pseudo: Option<PseudoLabelStore>,
}

/// Epoch-at-a-time training state.
pub struct Trainer<'a> {
    features: &'a Array2<f64>,
    labels: &'a LabelMatrix,
    validation: Option<&'a Dataset>,
    config: TrainConfig,
    params: ModelParams,
    optimizer: Sgd,
    pseudo: Option<PseudoLabelStore>,
    epoch: usize,
    last_picked: Option<Array2<bool>>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        features: &'a Array2<f64>,
        labels: &'a LabelMatrix,
        validation: Option<&'a Dataset>,
        model: &ModelConfig,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if features.nrows() != labels.n_rows() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} label rows",
                features.nrows(),
                labels.n_rows()
            )));
        }
        if model.input_dim != features.ncols() || model.output_dim != labels.n_cols() {
            return Err(Error::Shape(format!(
                "model is {}→{} but data is {}→{}",
                model.input_dim,
                model.output_dim,
                features.ncols(),
                labels.n_cols()
            )));
        }
        if let Some(v) = validation {
            if v.n_features() != features.ncols() || v.n_classes() != labels.n_cols() {
                return Err(Error::Shape("validation split has different dimensions".into()));
            }
        }
        if config.loss_kind == LossKind::BceFull && labels.has_missing() {
            return Err(Error::Config("BCE_FULL needs fully annotated labels".into()));
        }
        let params = ModelParams::init(model)?;
        let optimizer = Sgd::new(&params, config.momentum)?;
        let pseudo = (config.loss_kind == LossKind::Proposed).then(|| PseudoLabelStore::init(labels));
        Ok(Self {
            features,
            labels,
            validation,
            config,
            params,
            optimizer,
            pseudo,
            epoch: 0,
            last_picked: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pseudo(&self) -> Option<&PseudoLabelStore> {
        self.pseudo.as_ref()
    }

    /// Mask of missing entries used in the most recent epoch.
    pub fn last_picked(&self) -> Option<&Array2<bool>> {
        self.last_picked.as_ref()
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn batch_loss(&self, rows: &[usize], predictions: Array2<f64>, picked: Option<&Array2<bool>>) -> Result<LossOutput> {
        let observed = self.labels.select_rows(rows).entries().clone();
        let l = self.labels.n_cols();
        let cfg = &self.config;
        let eps = cfg.loss.epsilon_clamp;
        let wan = cfg.wan_weight.unwrap_or_else(|| loss::default_wan_weight(l));
        let mut pseudo = Array2::zeros((rows.len(), l));
        if let Some(store) = &self.pseudo {
            for (b, &i) in rows.iter().enumerate() {
                let (cols, vals) = store.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    pseudo[[b, j]] = v;
                }
            }
        }
        let batch = BatchView {
            predictions,
            observed,
            pseudo,
            picked: picked.map(|p| p.select(Axis(0), rows)),
            epoch: self.epoch,
        };
        match cfg.loss_kind {
            LossKind::Proposed => loss::final_loss(&batch, &cfg.loss),
            LossKind::An => loss::baseline_loss(Baseline::AssumeNegative, &batch, wan, eps),
            LossKind::Wan => loss::baseline_loss(Baseline::WeightedAssumeNegative, &batch, wan, eps),
            LossKind::BceFull => loss::baseline_loss(Baseline::FullBce, &batch, wan, eps),
        }
    }

    /// Runs one epoch and returns its report.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        if self.is_finished() {
            return Err(Error::Config(format!("all {} epochs already ran", self.config.epochs)));
        }
        let start = Instant::now();
        let epoch = self.epoch;
        let cfg = self.config;
        let lr = cfg.lr_at(epoch);
        let n = self.features.nrows();

        let picked = (cfg.loss_kind == LossKind::Proposed).then(|| {
            sample_picked_mask(
                self.labels,
                cfg.loss.q_fraction,
                seed::derive_epoch(cfg.seed, Stream::Pick, epoch),
            )
        });
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed::derive_epoch(cfg.seed, Stream::Shuffle, epoch)));

        let (mut loss_sum, mut alpha_sum, mut beta_sum) = (0.0, 0.0, 0.0);
        let mut penalized_rows = 0;
        let mut d = 1.0;
        let n_batches = order.len().div_ceil(cfg.batch_size);
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let x = self.features.select(Axis(0), rows);
            let fwd = self.params.forward(&x)?;
            let out = self
                .batch_loss(rows, fwd.predictions.clone(), picked.as_ref())
                .map_err(|e| match e {
                    Error::Numeric(message) => Error::Divergence { epoch, batch: b, message },
                    other => other,
                })?;
            let grads = self.params.backward_from(&x, &fwd, &out.grad_wrt_logits)?;
            self.optimizer
                .step(&mut self.params, &grads, lr)
                .map_err(|e| Error::Divergence {
                    epoch,
                    batch: b,
                    message: e.to_string(),
                })?;
            loss_sum += out.value * rows.len() as f64;
            alpha_sum += out.alpha;
            beta_sum += out.beta;
            d = out.d;
            penalized_rows += out.p_per_row.iter().filter(|&&p| p > 1.0).count();
        }

        let predictions = self.params.predict(self.features)?;
        if let Some(store) = &mut self.pseudo {
            store.update(&predictions).map_err(|e| Error::Divergence {
                epoch,
                batch: n_batches,
                message: e.to_string(),
            })?;
        }
        let val_map = match self.validation {
            Some(v) => Some(metrics::evaluate(&self.params.predict(v.features())?, v.labels())?.map),
            None => None,
        };
        self.last_picked = picked;
        self.epoch += 1;
        Ok(EpochReport {
            epoch,
            lr,
            mean_loss: loss_sum / n as f64,
            val_map,
            alpha_mean: alpha_sum / n_batches as f64,
            beta_mean: beta_sum / n_batches as f64,
            d,
            penalized_rows,
            wall_clock_secs: cfg.record_timings.then(|| start.elapsed().as_secs_f64()),
        })
    }

    pub fn into_outcome(self, reports: Vec<EpochReport>) -> TrainOutcome {
        TrainOutcome {
            params: self.params,
            reports,
            pseudo: self.pseudo,
        }
    }
}

/// Trains for `config.epochs` epochs.
pub fn train(
    features: &Array2<f64>,
    labels: &LabelMatrix,
    validation: Option<&Dataset>,
    model: &ModelConfig,
    config: TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(features, labels, validation, model, config)?;
    let mut reports = Vec::with_capacity(config.epochs);
    while !trainer.is_finished() {
        reports.push(trainer.run_epoch()?);
    }
    Ok(trainer.into_outcome(reports))
}
