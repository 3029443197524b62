use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/test/validation fractions plus the shuffling seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, test: f64, validation: f64, seed: u64) -> Result<Self> {
        let ok = [train, test, validation].iter().all(|f| (0.0..=1.0).contains(f));
        if !ok || (train + test + validation - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be in [0,1] and sum to 1, got {train}:{test}:{validation}"
            )));
        }
        Ok(SplitSpec {
            train,
            test,
            validation,
            seed,
        })
    }

    /// `density : (0.8 - density) : 0.2`, the layout of every density case.
    pub fn density(density: f64, seed: u64) -> Result<Self> {
        Self::new(density, 0.8 - density, 0.2, seed)
    }
}

/// Record indices of each partition, each list sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl Split {
    pub fn total(&self) -> usize {
        self.train.len() + self.test.len() + self.validation.len()
    }

    pub fn select<'a, T>(indices: &[usize], items: &'a [T]) -> Vec<&'a T> {
        indices.iter().map(|&i| &items[i]).collect()
    }
}

fn partition(n: usize, n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut train = idx[..n_train].to_vec();
    let mut validation = idx[n_train..n_train + n_val].to_vec();
    let mut test = idx[n_train + n_val..n_train + n_val + n_test].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Split {
        train,
        test,
        validation,
    }
}

/// Uniform per-record partition of `n_records` indices.
///
/// Train and validation sizes are `round(fraction · n)`; test takes the rest.
pub fn split_by_density(n_records: usize, spec: &SplitSpec) -> Result<Split> {
    if n_records == 0 {
        return Err(Error::Data("cannot split an empty record set".into()));
    }
    SplitSpec::new(spec.train, spec.test, spec.validation, spec.seed)?;
    let n = n_records as f64;
    let n_train = ((spec.train * n).round() as usize).min(n_records);
    let n_val = ((spec.validation * n).round() as usize).min(n_records - n_train);
    let n_test = n_records - n_train - n_val;
    Ok(partition(n_records, n_train, n_val, n_test, spec.seed))
}

/// Partition with explicit sizes; records beyond their sum are left out.
pub fn split_by_counts(n_records: usize, train: usize, test: usize, validation: usize, seed: u64) -> Result<Split> {
    if train + test + validation > n_records {
        return Err(Error::Data(format!(
            "requested {train}+{test}+{validation} records but only {n_records} exist"
        )));
    }
    Ok(partition(n_records, train, validation, test, seed))
}

/// One row of the standard WS-Dream density cases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityCase {
    pub name: &'static str,
    pub density: f64,
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

pub const DENSITY_CASES: [DensityCase; 9] = [
    DensityCase { name: "D1.1", density: 0.05, train: 98_721, test: 1_399_535, validation: 374_564 },
    DensityCase { name: "D1.2", density: 0.10, train: 197_440, test: 1_301_602, validation: 374_564 },
    DensityCase { name: "D1.3", density: 0.15, train: 296_182, test: 1_203_007, validation: 374_564 },
    DensityCase { name: "D1.4", density: 0.20, train: 394_926, test: 1_104_303, validation: 374_564 },
    DensityCase { name: "D2.1", density: 0.02, train: 37_375, test: 1_310_535, validation: 369_638 },
    DensityCase { name: "D2.2", density: 0.04, train: 74_969, test: 1_572_292, validation: 369_638 },
    DensityCase { name: "D2.3", density: 0.06, train: 112_016, test: 1_206_517, validation: 369_638 },
    DensityCase { name: "D2.4", density: 0.08, train: 150_071, test: 1_172_461, validation: 369_638 },
    DensityCase { name: "D2.5", density: 0.10, train: 186_059, test: 1_140_269, validation: 369_638 },
];

pub fn density_case(name: &str) -> Option<DensityCase> {
    DENSITY_CASES.iter().copied().find(|c| c.name.eq_ignore_ascii_case(name))
}

/// On-disk description of a split: seed, fractions and the index lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl SplitManifest {
    pub fn new(spec: &SplitSpec, split: &Split) -> Self {
        SplitManifest {
            seed: spec.seed,
            fractions: [spec.train, spec.test, spec.validation],
            train: split.train.clone(),
            test: split.test.clone(),
            validation: split.validation.clone(),
        }
    }

    pub fn split(&self) -> Split {
        Split {
            train: self.train.clone(),
            test: self.test.clone(),
            validation: self.validation.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Data(format!("serialising manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Data(format!("parsing manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
