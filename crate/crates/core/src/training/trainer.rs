use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::loss::h_loss;
use super::nadam::{nadam_step, NadamState};
use crate::dataio::{EncodedRecord, VocabSizes};
use crate::error::{Error, Result};
use crate::eval::{labels, mae, rmse};
use crate::model::{Architecture, Batch, ForwardOptions, ModelSpec, PdsNet};

const SAMPLING_STREAM: u64 = 0x7361_6d70_6c65;
const EVAL_STREAM: u64 = 0x6576_616c;

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_mae,val_rmse,trusted_fraction";

/// Encoded splits plus the vocabulary sizes that shape the embeddings.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub train: &'a [EncodedRecord],
    /// Used for model selection; when empty the training split stands in.
    pub validation: &'a [EncodedRecord],
    pub vocab: VocabSizes,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_rmse: f64,
    pub trusted_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{HISTORY_HEADER}\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.10},{:.10},{:.10},{:.6}",
                e.epoch, e.train_loss, e.val_mae, e.val_rmse, e.trusted_fraction
            );
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn train(data: &TrainData<'_>, spec: &ModelSpec, config: &TrainConfig) -> Result<(PdsNet, History)> {
    train_with(data, spec, config, &mut |_| {})
}

/// Mini-batch training with per-epoch validation; returns the parameters of
/// the best validation epoch. `on_epoch` sees every history row as it lands.
pub fn train_with(
    data: &TrainData<'_>,
    spec: &ModelSpec,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(PdsNet, History)> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let arch = Architecture::new(spec.clone(), data.vocab)?;
    let mut net = PdsNet::init(arch, config.seed)?;
    let mut history = History::default();
    if config.epochs == 0 {
        return Ok((net, history));
    }

    let validation = if data.validation.is_empty() { data.train } else { data.validation };
    let val_labels = labels(validation);
    let train_opts = ForwardOptions::train(config.ablation);
    let eval_opts = ForwardOptions::eval(config.ablation, config.eval_use_mean);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SAMPLING_STREAM);
    let mut state = NadamState::new(config.beta1, config.beta2, config.epsilon);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best: Option<(f64, crate::autodiff::ParamStore)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut trusted = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = Batch::from_records(chunk.iter().map(|i| &data.train[*i]));
            let diverged = |detail: String| Error::Divergence {
                epoch,
                batch: b + 1,
                detail,
            };
            let as_divergence = |e: Error| match e {
                Error::NonFinite(d) => diverged(d),
                other => other,
            };
            let grads = {
                let mut g = net.graph();
                let trace = net.forward(&mut g, &batch, &mut rng, &train_opts).map_err(as_divergence)?;
                let out = h_loss(&mut g, &trace, &batch.labels(), config).map_err(as_divergence)?;
                let loss = g.value(out.loss).item()?;
                if !loss.is_finite() {
                    return Err(diverged(format!("loss is {loss}")));
                }
                loss_sum += loss * batch.len() as f64;
                trusted += out.stats.trusted;
                g.backward(out.loss)?
            };
            nadam_step(net.params_mut(), &grads, &mut state, config.lr).map_err(as_divergence)?;
        }

        let pred = net
            .predict(validation, &eval_opts, config.seed ^ EVAL_STREAM)
            .map_err(|e| match e {
                Error::NonFinite(detail) => Error::Divergence { epoch, batch: 0, detail },
                other => other,
            })?;
        let val_mae = mae(&val_labels, &pred)?;
        let row = EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val_mae,
            val_rmse: rmse(&val_labels, &pred)?,
            trusted_fraction: trusted as f64 / data.train.len() as f64,
        };
        if !val_mae.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                detail: format!("validation MAE is {val_mae}"),
            });
        }
        history.epochs.push(row);
        on_epoch(&row);

        if best.as_ref().is_none_or(|(b, _)| val_mae < *b) {
            best = Some((val_mae, net.params().clone()));
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, store)) = best {
        net.load_from(&store)?;
    }
    Ok((net, history))
}
