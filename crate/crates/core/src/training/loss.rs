use super::config::{LossKind, TrainConfig};
use crate::autodiff::{Graph, Tensor, Var};
use crate::distributions::kl_per_record;
use crate::error::{Error, Result};
use crate::model::{Ablation, ForwardTrace};

/// Per-record task loss `[B, 1]`.
pub fn task_loss_per_record(g: &mut Graph<'_>, y: Var, y_hat: Var, kind: LossKind, huber_delta: f64) -> Result<Var> {
    if g.shape(y).first() == Some(&0) {
        return Err(Error::InvalidArgument("task loss over an empty batch".into()));
    }
    let d = g.sub(y_hat, y)?;
    Ok(match kind {
        LossKind::Mae => g.abs(d),
        LossKind::Mse => g.square(d),
        LossKind::Huber => g.huber(d, huber_delta),
    })
}

/// Batch-mean task loss.
pub fn task_loss(g: &mut Graph<'_>, y: Var, y_hat: Var, kind: LossKind, huber_delta: f64) -> Result<Var> {
    let per = task_loss_per_record(g, y, y_hat, kind, huber_delta)?;
    Ok(g.mean(per))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaskStats {
    pub trusted: usize,
    pub untrusted: usize,
}

impl MaskStats {
    pub fn total(&self) -> usize {
        self.trusted + self.untrusted
    }

    pub fn trusted_fraction(&self) -> f64 {
        self.trusted as f64 / self.total().max(1) as f64
    }
}

/// Masked KL terms aligning each prior level with the posterior.
#[derive(Clone, Debug)]
pub struct AlignTerms {
    /// Unmasked `KL(P_r || P_i)` per record, one `[B, 1]` node per level.
    pub kl: Vec<Var>,
    /// `Σ_i λ_i · u_r · KL_i,r`, shape `[B, 1]`.
    pub weighted: Var,
}

/// KL alignment of every enabled prior level with the posterior, restricted
/// to records flagged in `untrusted`.
pub fn noise_resilient_align(
    g: &mut Graph<'_>,
    trace: &ForwardTrace,
    untrusted: &[bool],
    config: &TrainConfig,
) -> Result<AlignTerms> {
    if !untrusted.iter().any(|u| *u) {
        return Err(Error::Contract("alignment needs at least one untrusted record".into()));
    }
    let post = trace
        .posterior
        .as_ref()
        .ok_or_else(|| Error::Contract("alignment needs a training-mode trace with the posterior branch".into()))?;
    let target = if config.stop_posterior_grad {
        post.dist.detached(g)
    } else {
        post.dist
    };
    let mask = g.constant(mask_column(untrusted));
    let levels = trace.priors.len().min(config.ablation.levels());
    let mut kl = Vec::with_capacity(levels);
    let mut weighted: Option<Var> = None;
    for (prior, lambda) in trace.priors[..levels].iter().zip(config.lambdas) {
        let k = kl_per_record(g, &target, prior)?;
        kl.push(k);
        let masked = g.mul(mask, k)?;
        let term = g.scale(masked, lambda);
        weighted = Some(match weighted {
            Some(acc) => g.add(acc, term)?,
            None => term,
        });
    }
    Ok(AlignTerms {
        kl,
        weighted: weighted.expect("at least one prior level"),
    })
}

/// The conditional objective and the nodes needed to inspect it.
#[derive(Clone, Debug)]
pub struct HLoss {
    pub loss: Var,
    pub stats: MaskStats,
    /// `T(ŷ1) + T(ŷ2)` per record (or `T(ŷ1)` without the posterior branch).
    pub task: Var,
    pub align: Option<AlignTerms>,
}

fn mask_column(mask: &[bool]) -> Tensor {
    Tensor::column(&mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect::<Vec<_>>())
}

/// Per-record conditional loss: trusted records (`|y - ŷ1| < δ`) pay the
/// task losses of both branches, untrusted ones the weighted KL divergences.
/// Without deep supervision every record pays `T(ŷ1)`.
pub fn h_loss(g: &mut Graph<'_>, trace: &ForwardTrace, y: &Tensor, config: &TrainConfig) -> Result<HLoss> {
    if !(config.delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {}", config.delta)));
    }
    let pred = g.value(trace.y1);
    if pred.shape() != y.shape() {
        return Err(Error::Shape {
            op: "h_loss",
            lhs: y.shape().to_vec(),
            rhs: pred.shape().to_vec(),
        });
    }
    let trusted: Vec<bool> = y
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| (a - b).abs() < config.delta)
        .collect();
    let stats = MaskStats {
        trusted: trusted.iter().filter(|t| **t).count(),
        untrusted: trusted.iter().filter(|t| !**t).count(),
    };
    let yv = g.constant(y.clone());
    let t1 = task_loss_per_record(g, yv, trace.y1, config.loss_kind, config.huber_delta)?;

    if config.ablation == Ablation::NoDeepSup {
        let loss = g.mean(t1);
        return Ok(HLoss {
            loss,
            stats,
            task: t1,
            align: None,
        });
    }
    let post = trace
        .posterior
        .as_ref()
        .ok_or_else(|| Error::Contract("conditional loss needs the posterior branch".into()))?;
    let t2 = task_loss_per_record(g, yv, post.y2, config.loss_kind, config.huber_delta)?;
    let task = g.add(t1, t2)?;

    let untrusted: Vec<bool> = trusted.iter().map(|t| !t).collect();
    let weights: Vec<f64> = untrusted
        .iter()
        .map(|u| if *u { config.untrusted_task_weight } else { 1.0 })
        .collect();
    let w = g.constant(Tensor::column(&weights));
    let mut per_record = g.mul(w, task)?;
    let align = if stats.untrusted > 0 {
        let terms = noise_resilient_align(g, trace, &untrusted, config)?;
        per_record = g.add(per_record, terms.weighted)?;
        Some(terms)
    } else {
        None
    };
    let loss = g.mean(per_record);
    Ok(HLoss {
        loss,
        stats,
        task,
        align,
    })
}
