use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Ablation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mae,
    Mse,
    Huber,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mae, LossKind::Mse, LossKind::Huber];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
            LossKind::Huber => "huber",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss kind `{s}` (expected mae, mse or huber)")))
    }
}

/// Optimisation settings. Layer widths live in [`crate::model::ModelSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// A record is trusted when `|y - ŷ1| < delta`.
    pub delta: f64,
    /// KL weights of the three prior levels.
    pub lambdas: [f64; 3],
    pub loss_kind: LossKind,
    pub huber_delta: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub eval_use_mean: bool,
    /// Treat the posterior as a fixed target inside the KL terms.
    pub stop_posterior_grad: bool,
    /// Weight of the task losses for untrusted records.
    pub untrusted_task_weight: f64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            delta: 0.5,
            lambdas: [1.0, 0.5, 0.25],
            loss_kind: LossKind::Mae,
            huber_delta: 1.0,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 100,
            seed: 0,
            ablation: Ablation::Full,
            eval_use_mean: false,
            stop_posterior_grad: true,
            untrusted_task_weight: 0.0,
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.delta > 0.0) {
            return fail(format!("delta must be > 0, got {}", self.delta));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return fail(format!("lambdas must be finite and >= 0, got {:?}", self.lambdas));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return fail("Nadam needs 0 <= beta1, beta2 < 1 and epsilon > 0".into());
        }
        if !(self.huber_delta > 0.0) {
            return fail(format!("huber_delta must be > 0, got {}", self.huber_delta));
        }
        if !(self.untrusted_task_weight >= 0.0) {
            return fail("untrusted_task_weight must be >= 0".into());
        }
        Ok(())
    }
}
