//! Losses, the trusted/untrusted conditional objective, prior-to-posterior
//! alignment, the Nadam optimiser and the training loop.

mod check;
mod config;
mod loss;
mod nadam;
mod trainer;

pub use check::loss_gradcheck;
pub use config::{LossKind, TrainConfig};
pub use loss::{h_loss, noise_resilient_align, task_loss, task_loss_per_record, AlignTerms, HLoss, MaskStats};
pub use nadam::{nadam_step, NadamState};
pub use trainer::{train, train_with, EpochRecord, History, TrainData, HISTORY_HEADER};

#[cfg(test)]
mod tests;
