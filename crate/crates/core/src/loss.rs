//! Loss functions with analytic gradients with respect to the logits.
//!
//! Every loss here is evaluated on a [`BatchView`]: sigmoid outputs of a
//! mini-batch together with the observed labels, the current pseudo-labels
//! and the subsample of missing entries that takes part in this epoch.
//! Per-instance losses are averaged over the batch, so gradients carry a
//! `1 / B` factor and callers must not divide again.
//!
//! The balanced loss for instance `i` is
//!
//! ```text
//! p_i * [ α * ( 1/N_e Σ_{observed pos} -ln ŷ   + d/|S_i| Σ_{S_i} -ỹ ln ŷ )
//!       + β * ( 1/N_e Σ_{observed neg} -ln(1-ŷ) + d/|S_i| Σ_{S_i} -(1-ỹ) ln(1-ŷ) ) ]
//! ```
//!
//! where `S_i` is the set of missing entries picked for the epoch,
//! `β = max(P/T, γ)`, `α = 1 - β`, `d` grows with the epoch index and
//! `p_i ∈ {1, 2}` doubles the loss for rows predicted all-negative.
//! Missing entries outside `S_i` contribute nothing.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_M: usize = 3;
pub const DEFAULT_EPSILON: f64 = 1e-7;
/// Predictions below this level count as negative for the penalty term.
pub const NEGATIVE_THRESHOLD: f64 = 0.1;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How the non-existing part is weighted across epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicSchedule {
    /// `d = exp((e_c + m) / e_T)`.
    #[default]
    Exponential,
    /// `d = exp((e_c + m - e_T) / e_T)`, which equals 1 at epoch `e_T - m`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub gamma: f64,
    pub m: usize,
    pub total_epochs: usize,
    pub q_fraction: f64,
    pub epsilon_clamp: f64,
    pub schedule: DynamicSchedule,
    /// Enables the all-negative penalty `p`. When false `p = 1` everywhere.
    pub penalty: bool,
    /// Replaces the batch statistic `β = max(P/T, γ)` with a fixed value.
    pub beta_override: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            m: DEFAULT_M,
            total_epochs: 20,
            q_fraction: 0.5,
            epsilon_clamp: DEFAULT_EPSILON,
            schedule: DynamicSchedule::Exponential,
            penalty: true,
            beta_override: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.q_fraction > 0.0 && self.q_fraction <= 1.0) {
            return Err(Error::validation(
                "q_fraction",
                format!("must lie in (0, 1], got {}", self.q_fraction),
            ));
        }
        if self.total_epochs == 0 {
            return Err(Error::validation("total_epochs", "must be positive"));
        }
        if self.m >= self.total_epochs {
            return Err(Error::validation(
                "m",
                format!("must be below total_epochs = {}, got {}", self.total_epochs, self.m),
            ));
        }
        if !(self.epsilon_clamp > 0.0 && self.epsilon_clamp < 0.5) {
            return Err(Error::validation(
                "epsilon_clamp",
                format!("must lie in (0, 0.5), got {}", self.epsilon_clamp),
            ));
        }
        if let Some(b) = self.beta_override {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::validation("beta_override", format!("must lie in [0, 1], got {b}")));
            }
        }
        Ok(())
    }
}

/// One mini-batch as seen by the loss.
#[derive(Debug, Clone)]
pub struct BatchView {
    /// Sigmoid outputs, `B × L`.
    pub predictions: Array2<f64>,
    pub observed: Array2<Label>,
    /// Pseudo-labels; only read at missing positions.
    pub pseudo: Array2<f64>,
    /// Missing entries taking part in the loss. `None` means all of them.
    pub picked: Option<Array2<bool>>,
    pub epoch: usize,
}

impl BatchView {
    fn validate(&self) -> Result<()> {
        let dim = self.predictions.dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if self.observed.dim() != dim || self.pseudo.dim() != dim {
            return Err(Error::Shape(format!(
                "predictions {:?}, observed {:?}, pseudo {:?}",
                dim,
                self.observed.dim(),
                self.pseudo.dim()
            )));
        }
        if let Some(picked) = &self.picked {
            if picked.dim() != dim {
                return Err(Error::Shape(format!("picked {:?} vs predictions {dim:?}", picked.dim())));
            }
            if let Some(((i, j), _)) = picked
                .indexed_iter()
                .find(|&((i, j), &p)| p && !self.observed[[i, j]].is_missing())
            {
                return Err(Error::Config(format!("picked entry ({i}, {j}) is observed")));
            }
        }
        if let Some(((i, j), v)) = self
            .predictions
            .indexed_iter()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::Numeric(format!("prediction {v} at ({i}, {j})")));
        }
        Ok(())
    }

    fn is_picked(&self, i: usize, j: usize) -> bool {
        match &self.picked {
            Some(p) => p[[i, j]],
            None => self.observed[[i, j]].is_missing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad_wrt_logits: Array2<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub d: f64,
    pub p_per_row: Vec<f64>,
    /// Per-instance losses; `value` is their mean.
    pub row_losses: Vec<f64>,
}

impl LossOutput {
    fn check_finite(self) -> Result<Self> {
        if !self.value.is_finite() {
            return Err(Error::Numeric(format!("loss value {}", self.value)));
        }
        if self.grad_wrt_logits.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok(self)
    }
}

fn clamp(y: f64, eps: f64) -> f64 {
    y.clamp(eps, 1.0 - eps)
}

/// Mean binary cross-entropy over one label vector with soft targets.
///
/// Returns the loss and its gradient with respect to the logits,
/// `(ŷ - t) / L`.
pub fn bce(predictions: &[f64], targets: &[f64], eps: f64) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("bce input".into()));
    }
    let n = predictions.len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(predictions.len());
    for (&y, &t) in predictions.iter().zip(targets) {
        let c = clamp(y, eps);
        sum -= t * c.ln() + (1.0 - t) * (1.0 - c).ln();
        grad.push((y - t) / n);
    }
    Ok((sum / n, grad))
}

/// `(α, β)` from the observed positives of a batch: `β = max(P / T, γ)`
/// with `P` the observed positive count and `T = B · L`.
pub fn compute_beta(observed: ArrayView2<'_, Label>, gamma: f64) -> (f64, f64) {
    let total = observed.len();
    let positives = observed.iter().filter(|&&z| z == Label::Pos).count();
    let ratio = if total == 0 {
        0.0
    } else {
        positives as f64 / total as f64
    };
    let beta = ratio.max(gamma);
    (1.0 - beta, beta)
}

pub fn dynamic_coefficient(epoch: usize, config: &LossConfig) -> f64 {
    debug_assert!(epoch < config.total_epochs);
    let e_t = config.total_epochs as f64;
    let shift = (epoch + config.m) as f64;
    match config.schedule {
        DynamicSchedule::Exponential => (shift / e_t).exp(),
        DynamicSchedule::Normalized => ((shift - e_t) / e_t).exp(),
    }
}

/// All-negative penalty for one instance: 2 when no prediction in the row
/// exceeds 0.1 (so `Σ max(ŷ - 0.1, 0) = 0`, including the all-0.1 boundary),
/// else 1.
pub fn all_negative_penalty(row: ArrayView1<'_, f64>) -> f64 {
    let excess: f64 = row.iter().map(|&y| (y - NEGATIVE_THRESHOLD).max(0.0)).sum();
    if excess > 0.0 {
        1.0
    } else {
        2.0
    }
}

/// The balanced split loss with pseudo-labels, dynamic weighting, the
/// all-negative penalty and (when `batch.picked` is set) subsampling of
/// missing entries.
pub fn final_loss(batch: &BatchView, config: &LossConfig) -> Result<LossOutput> {
    config.validate()?;
    batch.validate()?;
    if batch.epoch >= config.total_epochs {
        return Err(Error::Config(format!(
            "epoch {} outside 0..{}",
            batch.epoch, config.total_epochs
        )));
    }
    let (b, l) = batch.predictions.dim();
    let (alpha, beta) = match config.beta_override {
        Some(beta) => (1.0 - beta, beta),
        None => compute_beta(batch.observed.view(), config.gamma),
    };
    let d = dynamic_coefficient(batch.epoch, config);
    let eps = config.epsilon_clamp;
    let inv_b = 1.0 / b as f64;

    let mut grad = Array2::zeros((b, l));
    let mut p_per_row = Vec::with_capacity(b);
    let mut row_losses = Vec::with_capacity(b);
    for i in 0..b {
        let yhat = batch.predictions.row(i);
        let p = if config.penalty {
            all_negative_penalty(yhat)
        } else {
            1.0
        };

        let mut n_existing = 0usize;
        let mut n_picked = 0usize;
        for j in 0..l {
            if !batch.observed[[i, j]].is_missing() {
                n_existing += 1;
            } else if batch.is_picked(i, j) {
                n_picked += 1;
            }
        }
        // Rows with nothing observed (or nothing picked) drop that part.
        let w_exist = if n_existing > 0 {
            1.0 / n_existing as f64
        } else {
            0.0
        };
        let w_picked = if n_picked > 0 {
            d / n_picked as f64
        } else {
            0.0
        };

        let (mut exist_pos, mut exist_neg, mut ne_pos, mut ne_neg) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..l {
            let y = yhat[j];
            let c = clamp(y, eps);
            // d(-ln ŷ)/ds = ŷ - 1 and d(-ln(1 - ŷ))/ds = ŷ.
            let g = match batch.observed[[i, j]] {
                Label::Pos => {
                    exist_pos -= c.ln();
                    alpha * w_exist * (y - 1.0)
                }
                Label::Neg => {
                    exist_neg -= (1.0 - c).ln();
                    beta * w_exist * y
                }
                Label::Missing if batch.is_picked(i, j) => {
                    let t = batch.pseudo[[i, j]];
                    ne_pos -= t * c.ln();
                    ne_neg -= (1.0 - t) * (1.0 - c).ln();
                    w_picked * (alpha * t * (y - 1.0) + beta * (1.0 - t) * y)
                }
                Label::Missing => 0.0,
            };
            grad[[i, j]] = p * inv_b * g;
        }
        let loss = p
            * (alpha * (w_exist * exist_pos + w_picked * ne_pos)
                + beta * (w_exist * exist_neg + w_picked * ne_neg));
        p_per_row.push(p);
        row_losses.push(loss);
    }
    let value = row_losses.iter().sum::<f64>() * inv_b;
    LossOutput {
        value,
        grad_wrt_logits: grad,
        alpha,
        beta,
        d,
        p_per_row,
        row_losses,
    }
    .check_finite()
}

/// Reference losses that do not use pseudo-labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    /// Missing labels are taken as negatives.
    AssumeNegative,
    /// As [`Baseline::AssumeNegative`] with every negative term down-weighted.
    WeightedAssumeNegative,
    /// Plain BCE; requires fully observed labels.
    FullBce,
}

/// Default WAN weight, `1 / (L - 1)`.
pub fn default_wan_weight(n_classes: usize) -> f64 {
    1.0 / (n_classes.max(2) - 1) as f64
}

pub fn baseline_loss(
    kind: Baseline,
    batch: &BatchView,
    wan_weight: f64,
    eps: f64,
) -> Result<LossOutput> {
    batch.validate()?;
    let (b, l) = batch.predictions.dim();
    let neg_weight = match kind {
        Baseline::AssumeNegative => 1.0,
        Baseline::WeightedAssumeNegative => {
            if !(wan_weight > 0.0 && wan_weight <= 1.0) {
                return Err(Error::validation(
                    "wan_weight",
                    format!("must lie in (0, 1], got {wan_weight}"),
                ));
            }
            wan_weight
        }
        Baseline::FullBce => {
            if batch.observed.iter().any(|z| z.is_missing()) {
                return Err(Error::Config(
                    "full BCE needs fully observed labels, found missing entries".into(),
                ));
            }
            1.0
        }
    };
    let scale = 1.0 / (b as f64 * l as f64);
    let mut grad = Array2::zeros((b, l));
    let mut row_losses = Vec::with_capacity(b);
    for i in 0..b {
        let mut sum = 0.0;
        for j in 0..l {
            let y = batch.predictions[[i, j]];
            let c = clamp(y, eps);
            if batch.observed[[i, j]] == Label::Pos {
                sum -= c.ln();
                grad[[i, j]] = scale * (y - 1.0);
            } else {
                sum -= neg_weight * (1.0 - c).ln();
                grad[[i, j]] = scale * neg_weight * y;
            }
        }
        row_losses.push(sum / l as f64);
    }
    let value = row_losses.iter().sum::<f64>() / b as f64;
    LossOutput {
        value,
        grad_wrt_logits: grad,
        alpha: 0.5,
        beta: 0.5,
        d: 1.0,
        p_per_row: vec![1.0; b],
        row_losses,
    }
    .check_finite()
}
