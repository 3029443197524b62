//! Isolation forest over scalar values.
//!
//! The raw isolation score is `s = 2^(-E[h(x)] / c(ψ))`. A point outside the
//! value range of a node's training sample would, had it been part of that
//! sample, be split off at that node with probability `gap / widened range`;
//! path lengths account for that, so extremes absent from a subsample still
//! isolate quickly instead of sharing the edge leaf.
//!
//! Filtering uses the outlier score `max(0, (s - s_edge) / (1 - s_edge))`
//! where `s_edge = 2^(-H(ψ-1) / c(ψ))` is the expected score of the extreme
//! of an evenly spread sample (isolating a maximum by uniform splits takes
//! `H(ψ-1)` steps on average). The outlier score lies in `[0, 1]`: 0 for
//! points no easier to isolate than the edge of a uniform sample, growing
//! towards 1 for extremes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::QoSRecord;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

/// `H(n) = 1 + 1/2 + … + 1/n`.
pub fn harmonic(n: usize) -> f64 {
    if n < 64 {
        (1..=n).map(|k| 1.0 / k as f64).sum()
    } else {
        let n = n as f64;
        n.ln() + EULER_GAMMA + 1.0 / (2.0 * n) - 1.0 / (12.0 * n * n)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        size: usize,
        lo: f64,
        hi: f64,
    },
    Split {
        at: f64,
        lo: f64,
        hi: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn build<R: Rng>(values: &mut [f64], depth: usize, limit: usize, rng: &mut R) -> Node {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if values.len() <= 1 || depth >= limit || lo == hi {
            return Node::Leaf {
                size: values.len(),
                lo,
                hi,
            };
        }
        let at = rng.random_range(lo..hi);
        // Partition in place: values < at first.
        let mut k = 0;
        for i in 0..values.len() {
            if values[i] < at {
                values.swap(i, k);
                k += 1;
            }
        }
        let (l, r) = values.split_at_mut(k);
        Node::Split {
            at,
            lo,
            hi,
            left: Box::new(Node::build(l, depth + 1, limit, rng)),
            right: Box::new(Node::build(r, depth + 1, limit, rng)),
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            Node::Leaf { lo, hi, .. } | Node::Split { lo, hi, .. } => (*lo, *hi),
        }
    }

    fn path_length(&self, x: f64, depth: f64) -> f64 {
        let (lo, hi) = self.range();
        let out_of_range = if x < lo {
            (lo - x) / (hi - x)
        } else if x > hi {
            (x - hi) / (x - lo)
        } else {
            0.0
        };
        let onward = match self {
            Node::Leaf { size, .. } => depth + average_path_length(*size),
            Node::Split { at, left, right, .. } => {
                let child = if x < *at { left } else { right };
                child.path_length(x, depth + 1.0)
            }
        };
        out_of_range * (depth + 1.0) + (1.0 - out_of_range) * onward
    }
}

/// Ensemble of isolation trees fit on one-dimensional data.
#[derive(Clone, Debug)]
pub struct IsolationForest {
    trees: Vec<Node>,
    sample_size: usize,
}

impl IsolationForest {
    /// Fits `n_trees` trees on random subsamples of `subsample` values, or on
    /// all values when fewer are available.
    pub fn fit(values: &[f64], n_trees: usize, subsample: usize, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data("isolation forest needs at least one value".into()));
        }
        if n_trees == 0 || subsample < 2 {
            return Err(Error::InvalidArgument(
                "isolation forest needs >= 1 tree and subsample >= 2".into(),
            ));
        }
        let psi = subsample.min(values.len());
        let limit = (psi as f64).log2().ceil().max(1.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees)
            .map(|_| {
                let mut sub: Vec<f64> = if psi == values.len() {
                    values.to_vec()
                } else {
                    sample(&mut rng, values.len(), psi).iter().map(|i| values[i]).collect()
                };
                Node::build(&mut sub, 0, limit, &mut rng)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            sample_size: psi,
        })
    }

    /// Mean path length across trees.
    pub fn mean_path_length(&self, x: f64) -> f64 {
        self.trees.iter().map(|t| t.path_length(x, 0.0)).sum::<f64>() / self.trees.len() as f64
    }

    /// Raw isolation score `2^(-E[h(x)] / c(ψ))` in `(0, 1]`.
    pub fn isolation_score(&self, x: f64) -> f64 {
        let c = average_path_length(self.sample_size).max(f64::MIN_POSITIVE);
        2f64.powf(-self.mean_path_length(x) / c)
    }

    /// Expected isolation score of the extreme of an evenly spread sample.
    pub fn edge_score(&self) -> f64 {
        let c = average_path_length(self.sample_size).max(f64::MIN_POSITIVE);
        2f64.powf(-harmonic(self.sample_size.saturating_sub(1)) / c)
    }

    /// Outlier score in `[0, 1]`, zero up to [`Self::edge_score`].
    pub fn outlier_score(&self, x: f64) -> f64 {
        let edge = self.edge_score();
        ((self.isolation_score(x) - edge) / (1.0 - edge)).clamp(0.0, 1.0)
    }
}

/// Removes records whose response-time outlier score exceeds `threshold`.
pub fn filter_outliers_iforest(
    records: &[QoSRecord],
    threshold: f64,
    trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<Vec<QoSRecord>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "outlier threshold must be in (0, 1], got {threshold}"
        )));
    }
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let rts: Vec<f64> = records.iter().map(|r| r.rt).collect();
    let forest = IsolationForest::fit(&rts, trees, subsample, seed)?;
    Ok(records
        .iter()
        .filter(|r| forest.outlier_score(r.rt) <= threshold)
        .cloned()
        .collect())
}
