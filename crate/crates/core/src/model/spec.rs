use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{Feature, VocabSizes};
use crate::error::{Error, Result};

/// Layer widths of the network. Vocabulary sizes come from the data and are
/// carried separately in [`Architecture`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// Embedding width is `2^embed_exp`.
    pub embed_exp: u32,
    /// Latent dimension `N`; prior and posterior nets emit `2N` values.
    pub latent_dim: usize,
    /// Hidden width `k` of every prior net.
    pub prior_hidden: usize,
    pub posterior_hidden: usize,
    pub head_widths: [usize; 3],
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            embed_exp: 10,
            latent_dim: 64,
            prior_hidden: 512,
            posterior_hidden: 512,
            head_widths: [1024, 512, 256],
        }
    }
}

impl ModelSpec {
    pub fn embed_dim(&self) -> usize {
        1usize << self.embed_exp
    }

    /// Width of the fused feature `C`.
    pub fn fused_dim(&self) -> usize {
        Feature::ALL.len() * self.embed_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_exp > 16 {
            return Err(Error::Config(format!("embed_exp {} is too large (max 16)", self.embed_exp)));
        }
        let widths = [self.latent_dim, self.prior_hidden, self.posterior_hidden];
        if widths.iter().chain(self.head_widths.iter()).any(|w| *w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Training-time variant of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Probabilistic latents, all three prior levels, posterior branch.
    #[default]
    Full,
    /// Latents are the mean projections, no sampling and unit scales.
    NoProb,
    /// Only the level-1 prior, no posterior branch and no KL terms.
    NoDeepSup,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::Full, Ablation::NoProb, Ablation::NoDeepSup];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoProb => "no_prob",
            Ablation::NoDeepSup => "no_deep_sup",
        }
    }

    pub fn uses_posterior(self) -> bool {
        self != Ablation::NoDeepSup
    }

    pub fn levels(self) -> usize {
        match self {
            Ablation::NoDeepSup => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation `{s}` (expected full, no_prob or no_deep_sup)")))
    }
}

/// Everything that fixes the parameter shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub spec: ModelSpec,
    pub vocab: VocabSizes,
}

impl Architecture {
    pub fn new(spec: ModelSpec, vocab: VocabSizes) -> Result<Self> {
        spec.validate()?;
        if let Some(i) = vocab.iter().position(|v| *v == 0) {
            return Err(Error::Config(format!("vocabulary for {} is empty", Feature::ALL[i].name())));
        }
        Ok(Architecture { spec, vocab })
    }

    /// Number of scalar parameters, from layer arithmetic alone.
    pub fn parameter_count(&self) -> usize {
        let s = &self.spec;
        let n2 = 2 * s.latent_dim;
        let dense = |i: usize, o: usize| i * o + o;
        let gaussian_heads = 2 * dense(n2, s.latent_dim);
        let embeddings: usize = self.vocab.iter().map(|v| v * s.embed_dim()).sum();
        let prior_inputs = [s.fused_dim(), s.head_widths[0], s.head_widths[1]];
        let priors: usize = prior_inputs
            .iter()
            .map(|i| dense(*i, s.prior_hidden) + dense(s.prior_hidden, n2) + gaussian_heads)
            .sum();
        let posterior = dense(1, s.posterior_hidden) + dense(s.posterior_hidden, n2) + gaussian_heads;
        let [h1, h2, h3] = s.head_widths;
        let head = dense(s.latent_dim + s.fused_dim(), h1) + dense(h1, h2) + dense(h2, h3) + dense(h3, 1);
        embeddings + priors + posterior + head
    }

    /// One-line description stored in checkpoints and reports.
    pub fn fingerprint(&self) -> String {
        let s = &self.spec;
        let join = |xs: &[usize]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "E={} N={} k={} posterior={} head={} vocab={}",
            s.embed_exp,
            s.latent_dim,
            s.prior_hidden,
            s.posterior_hidden,
            join(&s.head_widths),
            join(&self.vocab)
        )
    }

    pub fn from_fingerprint(text: &str) -> Result<Self> {
        let mut spec = ModelSpec::default();
        let mut vocab = None;
        let bad = |what: &str| Error::Data(format!("malformed fingerprint field `{what}`"));
        let list = |v: &str| -> Option<Vec<usize>> { v.split(',').map(|x| x.parse().ok()).collect() };
        for field in text.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(field))?;
            match key {
                "E" => spec.embed_exp = value.parse().map_err(|_| bad(field))?,
                "N" => spec.latent_dim = value.parse().map_err(|_| bad(field))?,
                "k" => spec.prior_hidden = value.parse().map_err(|_| bad(field))?,
                "posterior" => spec.posterior_hidden = value.parse().map_err(|_| bad(field))?,
                "head" => {
                    spec.head_widths = list(value)
                        .and_then(|v| v.try_into().ok())
                        .ok_or_else(|| bad(field))?
                }
                "vocab" => vocab = Some(list(value).and_then(|v| v.try_into().ok()).ok_or_else(|| bad(field))?),
                _ => return Err(bad(field)),
            }
        }
        let vocab = vocab.ok_or_else(|| bad("vocab"))?;
        Architecture::new(spec, vocab).map_err(|e| Error::Data(e.to_string()))
    }
}
