use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{Ablation, Architecture};
use crate::autodiff::{Activation, Graph, ParamId, ParamStore, Tensor, Var};
use crate::dataio::{EncodedRecord, Feature};
use crate::distributions::DiagGaussian;
use crate::error::{Error, Result};

/// Number of prior levels in the hierarchy.
pub const LEVELS: usize = 3;

const INIT_STD: f64 = 0.05;
const EMBED_RANGE: f64 = 0.05;
const PREDICT_CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardOptions {
    pub mode: Mode,
    pub ablation: Ablation,
    /// In eval mode, use the prior mean instead of a draw.
    pub eval_use_mean: bool,
}

impl ForwardOptions {
    pub fn train(ablation: Ablation) -> Self {
        ForwardOptions {
            mode: Mode::Train,
            ablation,
            eval_use_mean: false,
        }
    }

    pub fn eval(ablation: Ablation, eval_use_mean: bool) -> Self {
        ForwardOptions {
            mode: Mode::Eval,
            ablation,
            eval_use_mean,
        }
    }
}

/// Column-major view of a batch: one id list per feature plus the labels.
#[derive(Clone, Debug)]
pub struct Batch {
    pub ids: [Vec<usize>; 6],
    pub y: Vec<f64>,
}

impl Batch {
    pub fn from_records<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a EncodedRecord>,
    {
        let mut ids: [Vec<usize>; 6] = Default::default();
        let mut y = Vec::new();
        for r in records {
            for (col, id) in ids.iter_mut().zip(r.ids) {
                col.push(id);
            }
            y.push(r.rt);
        }
        Batch { ids, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn labels(&self) -> Tensor {
        Tensor::column(&self.y)
    }
}

/// Outputs of the label-driven branch.
#[derive(Clone, Debug)]
pub struct PosteriorOutput {
    pub dist: DiagGaussian,
    pub z: Var,
    pub hidden: [Var; 3],
    pub y2: Var,
}

/// Every intermediate node of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub c: Var,
    /// `P1` always; `P2`, `P3` only in training mode with deep supervision.
    pub priors: Vec<DiagGaussian>,
    pub z1: Var,
    pub hidden: [Var; 3],
    pub y1: Var,
    pub posterior: Option<PosteriorOutput>,
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct GaussianNet {
    hidden: Dense,
    out: Dense,
    mu: Dense,
    sigma: Dense,
}

/// Network parameters together with the layout that addresses them.
#[derive(Clone, Debug)]
pub struct PdsNet {
    arch: Architecture,
    store: ParamStore,
    embeddings: [ParamId; 6],
    priors: [GaussianNet; LEVELS],
    posterior: GaussianNet,
    head: [Dense; 3],
    out: Dense,
}

struct Init {
    store: ParamStore,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Init {
    fn truncated(&mut self) -> f64 {
        loop {
            let x = self.normal.sample(&mut self.rng);
            if x.abs() <= 2.0 * INIT_STD {
                return x;
            }
        }
    }

    fn dense(&mut self, name: &str, inputs: usize, outputs: usize) -> Result<Dense> {
        let w: Vec<f64> = (0..inputs * outputs).map(|_| self.truncated()).collect();
        Ok(Dense {
            w: self.store.add(format!("{name}.w"), Tensor::new(vec![inputs, outputs], w)?)?,
            b: self.store.add(format!("{name}.b"), Tensor::zeros(&[outputs]))?,
        })
    }

    fn gaussian(&mut self, name: &str, inputs: usize, hidden: usize, latent: usize) -> Result<GaussianNet> {
        Ok(GaussianNet {
            hidden: self.dense(&format!("{name}.hidden"), inputs, hidden)?,
            out: self.dense(&format!("{name}.out"), hidden, 2 * latent)?,
            mu: self.dense(&format!("{name}.mu"), 2 * latent, latent)?,
            sigma: self.dense(&format!("{name}.sigma"), 2 * latent, latent)?,
        })
    }
}

impl PdsNet {
    /// Fresh parameters: truncated normal dense weights, zero biases and
    /// uniform embeddings (including the trainable MISSING row).
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        let s = arch.spec.clone();
        let mut init = Init {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, INIT_STD).expect("positive std"),
        };
        let d = s.embed_dim();
        let mut embeddings = Vec::with_capacity(6);
        for (f, v) in Feature::ALL.iter().zip(arch.vocab) {
            let data: Vec<f64> = (0..v * d).map(|_| init.rng.random_range(-EMBED_RANGE..EMBED_RANGE)).collect();
            embeddings.push(init.store.add(format!("embed.{}", f.name()), Tensor::new(vec![v, d], data)?)?);
        }
        let prior_inputs = [s.fused_dim(), s.head_widths[0], s.head_widths[1]];
        let mut priors = Vec::with_capacity(LEVELS);
        for (level, inputs) in prior_inputs.iter().enumerate() {
            priors.push(init.gaussian(&format!("prior{}", level + 1), *inputs, s.prior_hidden, s.latent_dim)?);
        }
        let posterior = init.gaussian("posterior", 1, s.posterior_hidden, s.latent_dim)?;
        let [h1, h2, h3] = s.head_widths;
        let head = [
            init.dense("head.1", s.latent_dim + s.fused_dim(), h1)?,
            init.dense("head.2", h1, h2)?,
            init.dense("head.3", h2, h3)?,
        ];
        let out = init.dense("head.out", h3, 1)?;
        Ok(PdsNet {
            arch,
            store: init.store,
            embeddings: embeddings.try_into().expect("six features"),
            priors: priors.try_into().expect("three levels"),
            posterior,
            head,
            out,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn graph(&self) -> Graph<'_> {
        Graph::with_params(&self.store)
    }

    fn dense(&self, g: &mut Graph<'_>, x: Var, layer: Dense, act: Activation) -> Result<Var> {
        let w = g.param(layer.w);
        let b = g.param(layer.b);
        g.dense(x, w, b, act)
    }

    fn gaussian(&self, g: &mut Graph<'_>, net: GaussianNet, x: Var, probabilistic: bool) -> Result<DiagGaussian> {
        let h = self.dense(g, x, net.hidden, Activation::Relu)?;
        let e = self.dense(g, h, net.out, Activation::Linear)?;
        let mu = self.dense(g, e, net.mu, Activation::Linear)?;
        if probabilistic {
            let sigma = self.dense(g, e, net.sigma, Activation::Softplus)?;
            DiagGaussian::new(g, mu, sigma)
        } else {
            let ones = g.constant(Tensor::full(g.shape(mu), 1.0));
            DiagGaussian::new(g, mu, ones)
        }
    }

    /// Six embedding lookups concatenated into `C: [B, 6·2^E]`.
    pub fn embed_concat(&self, g: &mut Graph<'_>, batch: &Batch) -> Result<Var> {
        let mut parts = Vec::with_capacity(6);
        for (table, ids) in self.embeddings.iter().zip(&batch.ids) {
            let t = g.param(*table);
            parts.push(g.embed(t, ids)?);
        }
        g.concat(&parts)
    }

    /// Prior at `level` (1-based) from `C`, `x1` or `x2`.
    pub fn prior_forward(&self, g: &mut Graph<'_>, h: Var, level: usize) -> Result<DiagGaussian> {
        self.prior(g, h, level, true)
    }

    fn prior(&self, g: &mut Graph<'_>, h: Var, level: usize, probabilistic: bool) -> Result<DiagGaussian> {
        if !(1..=LEVELS).contains(&level) {
            return Err(Error::InvalidArgument(format!("prior level {level} outside 1..={LEVELS}")));
        }
        self.gaussian(g, self.priors[level - 1], h, probabilistic)
    }

    /// Posterior `P_r` from raw labels `y: [B, 1]`.
    pub fn posterior_forward(&self, g: &mut Graph<'_>, y: Var) -> Result<DiagGaussian> {
        self.gaussian(g, self.posterior, y, true)
    }

    /// Shared head: three relu layers then a linear scalar output.
    pub fn head(&self, g: &mut Graph<'_>, z: Var) -> Result<([Var; 3], Var)> {
        let x1 = self.dense(g, z, self.head[0], Activation::Relu)?;
        let x2 = self.dense(g, x1, self.head[1], Activation::Relu)?;
        let x3 = self.dense(g, x2, self.head[2], Activation::Relu)?;
        let y = self.dense(g, x3, self.out, Activation::Linear)?;
        Ok(([x1, x2, x3], y))
    }

    fn latent<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        dist: &DiagGaussian,
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<Var> {
        let use_mean = opts.ablation == Ablation::NoProb || (opts.mode == Mode::Eval && opts.eval_use_mean);
        if use_mean {
            Ok(dist.mu)
        } else {
            dist.sample(g, rng)
        }
    }

    /// Main branch: features to `ŷ1`, plus the deep priors when training.
    pub fn predict_main<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        batch: &Batch,
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<ForwardTrace> {
        let probabilistic = opts.ablation != Ablation::NoProb;
        let c = self.embed_concat(g, batch)?;
        let p1 = self.prior(g, c, 1, probabilistic)?;
        let z1 = self.latent(g, &p1, rng, opts)?;
        let z = g.concat(&[z1, c])?;
        let (hidden, y1) = self.head(g, z)?;
        let mut priors = vec![p1];
        if opts.mode == Mode::Train && opts.ablation.levels() == LEVELS {
            priors.push(self.prior(g, hidden[0], 2, probabilistic)?);
            priors.push(self.prior(g, hidden[1], 3, probabilistic)?);
        }
        Ok(ForwardTrace {
            c,
            priors,
            z1,
            hidden,
            y1,
            posterior: None,
        })
    }

    /// Label branch `ŷ2 = head([Z_r | C])`; only defined while training.
    pub fn predict_posterior<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        c: Var,
        batch: &Batch,
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<PosteriorOutput> {
        if opts.mode != Mode::Train {
            return Err(Error::Contract("the posterior branch is only evaluated in training mode".into()));
        }
        if !opts.ablation.uses_posterior() {
            return Err(Error::Contract(format!("ablation {} has no posterior branch", opts.ablation)));
        }
        let y = g.constant(batch.labels());
        let dist = if opts.ablation == Ablation::NoProb {
            self.gaussian(g, self.posterior, y, false)?
        } else {
            self.posterior_forward(g, y)?
        };
        let z = self.latent(g, &dist, rng, opts)?;
        let fused = g.concat(&[z, c])?;
        let (hidden, y2) = self.head(g, fused)?;
        Ok(PosteriorOutput { dist, z, hidden, y2 })
    }

    /// Both branches in training mode, the main branch alone in eval mode.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<'_>,
        batch: &Batch,
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<ForwardTrace> {
        let mut trace = self.predict_main(g, batch, rng, opts)?;
        if opts.mode == Mode::Train && opts.ablation.uses_posterior() {
            trace.posterior = Some(self.predict_posterior(g, trace.c, batch, rng, opts)?);
        }
        Ok(trace)
    }

    /// Eval-mode `ŷ1` for every record, in order.
    pub fn predict(&self, records: &[EncodedRecord], opts: &ForwardOptions, seed: u64) -> Result<Vec<f64>> {
        let opts = ForwardOptions {
            mode: Mode::Eval,
            ..*opts
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(records.len());
        for chunk in records.chunks(PREDICT_CHUNK) {
            let batch = Batch::from_records(chunk);
            let mut g = self.graph();
            let trace = self.predict_main(&mut g, &batch, &mut rng, &opts)?;
            out.extend_from_slice(g.value(trace.y1).data());
        }
        Ok(out)
    }

    /// Replaces every tensor from `other`, which must have identical layout.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.len() != self.store.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} tensors, found {}",
                self.store.len(),
                other.len()
            )));
        }
        let ids: Vec<ParamId> = self.store.ids().collect();
        for id in ids {
            let name = self.store.name(id).to_string();
            let src = other
                .id(&name)
                .ok_or_else(|| Error::ConfigMismatch(format!("missing tensor `{name}`")))?;
            let value = other.get(src);
            if value.shape() != self.store.get(id).shape() {
                return Err(Error::ConfigMismatch(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    value.shape(),
                    self.store.get(id).shape()
                )));
            }
            *self.store.get_mut(id) = value.clone();
        }
        Ok(())
    }

    /// Redraws every parameter at a generic point for derivative checks:
    /// embeddings with std 0.5, biases with std 0.1 and weights with std
    /// `1/sqrt(fan_in)`. Activations stay O(1) and away from relu kinks.
    pub fn randomize_generic(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<ParamId> = self.store.ids().collect();
        for id in ids {
            let name = self.store.name(id).to_string();
            let t = self.store.get_mut(id);
            let std = if name.starts_with("embed") {
                0.5
            } else if name.ends_with(".b") {
                0.1
            } else {
                1.0 / (t.shape()[0] as f64).sqrt()
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in t.data_mut() {
                *v = normal.sample(&mut rng);
            }
        }
    }
}
