//! Config-driven orchestration: data preparation, multi-seed training and
//! evaluation, baselines, ablations and one-parameter sweeps.
//!
//! A config file has four sections:
//!
//! ```toml
//! [data]              # where records come from and how they are split
//! source = "synth"    # "synth", "csv" or "wsdream"
//! fractions = [0.3, 0.6, 0.1]
//! [data.synth]
//! n_users = 50
//! [model]             # layer widths
//! embed_exp = 3
//! [train]             # optimisation
//! delta = 0.5
//! [run]               # repetition
//! seeds = [0, 1, 2]
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{CfMethod, CfPredictor, RatingMatrix, DEFAULT_TOP_K};
use crate::dataio::{
    density_case, inject_feature_noise, load_records, load_wsdream, split_by_counts, split_by_density, synth_generate,
    EncodedRecord, Encoder, QoSRecord, Split, SplitManifest, SplitSpec, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::{labels, EvalReport, SubsetMasks};
use crate::model::{Ablation, Architecture, ForwardOptions, ModelSpec, PdsNet};
use crate::training::{train, History, TrainConfig, TrainData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synth,
    Csv,
    Wsdream,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Tag written into reports; defaults to the source name.
    pub dataset: Option<String>,
    /// Canonical record CSV (source = "csv").
    pub records: Option<PathBuf>,
    /// Directory holding `rtMatrix.txt`, `userlist.txt`, `wslist.txt`.
    pub wsdream_dir: Option<PathBuf>,
    /// Train/test/validation fractions.
    pub fractions: [f64; 3],
    /// Overrides `fractions` with `density : 0.8 − density : 0.2`.
    pub density: Option<f64>,
    /// Named density case with exact record counts, e.g. "D1.1".
    pub case: Option<String>,
    /// Existing split manifest; overrides the fractions.
    pub split_manifest: Option<PathBuf>,
    /// File listing corrupted user ids, one per line, as written by `noise`.
    pub corrupted_users: Option<PathBuf>,
    pub split_seed: u64,
    /// Users whose location features are forged before splitting.
    pub noise_user_fraction: f64,
    pub noise_seed: u64,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synth,
            dataset: None,
            records: None,
            wsdream_dir: None,
            fractions: [0.3, 0.6, 0.1],
            density: None,
            case: None,
            split_manifest: None,
            corrupted_users: None,
            split_seed: 0,
            noise_user_fraction: 0.0,
            noise_seed: 0,
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// One training run per seed; each seed drives init, shuffling and sampling.
    pub seeds: Vec<u64>,
    pub top_k: usize,
    pub uipcc_weight: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![0, 1, 2],
            top_k: DEFAULT_TOP_K,
            uipcc_weight: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.run.seeds.is_empty() {
            return Err(Error::Config("run.seeds must list at least one seed".into()));
        }
        if !(0.0..=1.0).contains(&self.run.uipcc_weight) {
            return Err(Error::Config("run.uipcc_weight must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Sets one key, given as `section.field` or one of the short aliases
    /// `delta`, `N`, `E`, `lambdas`, `loss_kind`, `ablation`, `lr`,
    /// `batch_size`, `epochs`. The value is parsed as a TOML literal and
    /// taken as a bare string when that fails.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = resolve_key(key);
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = parse_literal(value);
        let (last, parents) = path.split_last().ok_or_else(|| Error::Config("empty key".into()))?;
        let mut table = &mut doc;
        for p in parents {
            table = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{p}` is not a section")))?;
        }
        table.insert(last.to_string(), parsed);
        let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        *self = ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("setting `{key}`: {m}")),
            other => other,
        })?;
        Ok(())
    }

    /// Reproducible identifier of the model and training settings.
    pub fn fingerprint(&self) -> String {
        let text = toml::to_string(&(&self.model, &self.train)).unwrap_or_default();
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x1000_0000_01b3))
}

fn resolve_key(key: &str) -> Vec<String> {
    let alias = match key {
        "N" => Some("model.latent_dim"),
        "E" => Some("model.embed_exp"),
        "k" => Some("model.prior_hidden"),
        "delta" | "lambdas" | "loss_kind" | "ablation" | "lr" | "batch_size" | "epochs" | "huber_delta"
        | "eval_use_mean" | "stop_posterior_grad" | "untrusted_task_weight" | "patience" => None,
        _ => Some(key),
    };
    match alias {
        Some(path) => path.split('.').map(str::to_string).collect(),
        None => vec!["train".into(), key.into()],
    }
}

fn parse_literal(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Records, their encoding and the split, ready for every method.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub dataset: String,
    pub records: Vec<QoSRecord>,
    pub encoder: Encoder,
    pub encoded: Vec<EncodedRecord>,
    pub split: Split,
    pub corrupted_users: Vec<u32>,
    /// Known only for synthetic data: MAE of the clean signal on the test split.
    pub noise_floor: Option<f64>,
}

impl PreparedData {
    pub fn encoded_subset(&self, indices: &[usize]) -> Vec<EncodedRecord> {
        indices.iter().map(|i| self.encoded[*i]).collect()
    }

    pub fn records_subset(&self, indices: &[usize]) -> Vec<QoSRecord> {
        indices.iter().map(|i| self.records[*i].clone()).collect()
    }

    pub fn test_masks(&self) -> SubsetMasks {
        SubsetMasks::from_records(&self.records_subset(&self.split.test), &self.corrupted_users)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("data.{what} is required for this source")))
}

pub fn prepare(cfg: &DataConfig) -> Result<PreparedData> {
    let mut noise_floor_source = None;
    let mut corrupted_users = Vec::new();
    let mut records = match cfg.source {
        DataSource::Synth => {
            let (records, truth) = synth_generate(&cfg.synth)?;
            corrupted_users = truth.corrupted_users.clone();
            noise_floor_source = Some(truth);
            records
        }
        DataSource::Csv => load_records(required(&cfg.records, "records")?)?,
        DataSource::Wsdream => {
            let dir = required(&cfg.wsdream_dir, "wsdream_dir")?;
            load_wsdream(&dir.join("rtMatrix.txt"), &dir.join("userlist.txt"), &dir.join("wslist.txt"))?
        }
    };
    if records.is_empty() {
        return Err(Error::Data("no records to work with".into()));
    }
    if let Some(path) = &cfg.corrupted_users {
        corrupted_users.extend(read_user_list(path)?);
    }
    if cfg.noise_user_fraction > 0.0 {
        let noisy = inject_feature_noise(&records, cfg.noise_user_fraction, cfg.noise_seed)?;
        records = noisy.records;
        corrupted_users.extend(noisy.corrupted_users);
    }
    corrupted_users.sort_unstable();
    corrupted_users.dedup();

    let split = if let Some(path) = &cfg.split_manifest {
        let split = SplitManifest::load(path)?.split();
        if split.total() != records.len() || split.train.iter().chain(&split.test).chain(&split.validation).any(|i| *i >= records.len()) {
            return Err(Error::Data(format!("{} does not match the {} loaded records", path.display(), records.len())));
        }
        split
    } else if let Some(name) = &cfg.case {
        let case = density_case(name).ok_or_else(|| Error::Config(format!("unknown density case `{name}`")))?;
        split_by_counts(records.len(), case.train, case.test, case.validation, cfg.split_seed)?
    } else {
        split_by_density(records.len(), &spec_of(cfg)?)?
    };

    let encoder = Encoder::fit(&records);
    let encoded = encoder.encode_all(&records)?;
    let noise_floor = noise_floor_source.map(|t| t.noise_floor_mae(&records, &split.test));
    let dataset = cfg.dataset.clone().unwrap_or_else(|| {
        match cfg.source {
            DataSource::Synth => "synth",
            DataSource::Csv => "csv",
            DataSource::Wsdream => "wsdream",
        }
        .to_string()
    });
    Ok(PreparedData {
        dataset,
        records,
        encoder,
        encoded,
        split,
        corrupted_users,
        noise_floor,
    })
}

/// Reads one user id per line; blank lines are skipped.
pub fn read_user_list(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().map_err(|_| Error::Data(format!("{}: bad user id `{l}`", path.display()))))
        .collect()
}

pub fn write_user_list(users: &[u32], path: &Path) -> Result<()> {
    let text: String = users.iter().map(|u| format!("{u}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Split fractions implied by the data section.
pub fn spec_of(cfg: &DataConfig) -> Result<SplitSpec> {
    match cfg.density {
        Some(d) => SplitSpec::density(d, cfg.split_seed),
        None => {
            let [a, b, c] = cfg.fractions;
            SplitSpec::new(a, b, c, cfg.split_seed)
        }
    }
    .map_err(|e| Error::Config(e.to_string()))
}

/// Outcome of one seed of one PDS configuration.
#[derive(Clone, Debug)]
pub struct PdsRun {
    pub report: EvalReport,
    pub history: History,
    pub net: PdsNet,
}

pub fn method_name(train: &TrainConfig) -> String {
    format!("pds-{}", train.ablation)
}

/// Trains on the training split and evaluates on the test split.
pub fn run_pds(data: &PreparedData, model: &ModelSpec, train_cfg: &TrainConfig, seed: u64) -> Result<PdsRun> {
    let start = Instant::now();
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    let train_set = data.encoded_subset(&data.split.train);
    let validation = data.encoded_subset(&data.split.validation);
    let test = data.encoded_subset(&data.split.test);
    let td = TrainData {
        train: &train_set,
        validation: &validation,
        vocab: data.encoder.sizes(),
    };
    let (net, history) = train(&td, model, &cfg)?;
    let report = evaluate_net(data, &net, &cfg, &method_name(&cfg), &test, start)?;
    Ok(PdsRun { report, history, net })
}

/// Test-split report of an already trained network.
pub fn evaluate_checkpoint(data: &PreparedData, net: &PdsNet, train_cfg: &TrainConfig) -> Result<EvalReport> {
    let expected = Architecture::new(net.arch().spec.clone(), data.encoder.sizes())?;
    if &expected != net.arch() {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint `{}` does not fit data `{}`",
            net.arch().fingerprint(),
            expected.fingerprint()
        )));
    }
    let test = data.encoded_subset(&data.split.test);
    evaluate_net(data, net, train_cfg, &method_name(train_cfg), &test, Instant::now())
}

fn evaluate_net(
    data: &PreparedData,
    net: &PdsNet,
    cfg: &TrainConfig,
    method: &str,
    test: &[EncodedRecord],
    start: Instant,
) -> Result<EvalReport> {
    let pred = net.predict(test, &ForwardOptions::eval(cfg.ablation, cfg.eval_use_mean), cfg.seed)?;
    let fingerprint = format!("{} {}", net.arch().fingerprint(), fnv_hex_of(cfg));
    let mut report = EvalReport::compute(&data.dataset, method, &fingerprint, cfg.seed, &labels(test), &pred, &data.test_masks())?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

fn fnv_hex_of(cfg: &TrainConfig) -> String {
    format!("train={:016x}", fnv1a(toml::to_string(cfg).unwrap_or_default().as_bytes()))
}

/// Memory-based baseline on the same split.
pub fn run_baseline(data: &PreparedData, method: CfMethod, top_k: usize) -> Result<EvalReport> {
    let start = Instant::now();
    let users = data.records.iter().map(|r| r.user_id as usize + 1).max().unwrap_or(0);
    let services = data.records.iter().map(|r| r.service_id as usize + 1).max().unwrap_or(0);
    let matrix = RatingMatrix::from_records(data.split.train.iter().map(|i| &data.records[*i]), users, services)?;
    let queries: Vec<(usize, usize)> = data
        .split
        .test
        .iter()
        .map(|i| (data.records[*i].user_id as usize, data.records[*i].service_id as usize))
        .collect();
    let pred = CfPredictor::new(matrix, top_k).predict(&queries, method)?;
    let y: Vec<f64> = data.split.test.iter().map(|i| data.records[*i].rt).collect();
    let mut report = EvalReport::compute(
        &data.dataset,
        &method.name(),
        &format!("top_k={top_k}"),
        0,
        &y,
        &pred,
        &data.test_masks(),
    )?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Every seed of one configuration, run in parallel, reports in seed order.
pub fn run_seeds(data: &PreparedData, cfg: &ExperimentConfig) -> Result<Vec<PdsRun>> {
    cfg.run
        .seeds
        .par_iter()
        .map(|seed| run_pds(data, &cfg.model, &cfg.train, *seed))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PdsRun>> {
    cfg.validate()?;
    let data = prepare(&cfg.data)?;
    run_seeds(&data, cfg)
}

/// All three network variants on the same data and seeds.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let data = prepare(&cfg.data)?;
    let mut reports = Vec::new();
    for ablation in Ablation::ALL {
        let mut c = cfg.clone();
        c.train.ablation = ablation;
        reports.extend(run_seeds(&data, &c)?.into_iter().map(|r| r.report));
    }
    Ok(reports)
}

/// One configuration per value of `param`; reports are labelled
/// `pds-<ablation> <param>=<value>`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(param, v)?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let data_changes = configs.iter().any(|c| c.data != cfg.data);
    let shared = if data_changes { None } else { Some(prepare(&cfg.data)?) };
    let mut reports = Vec::new();
    for (c, v) in configs.iter().zip(values) {
        let local;
        let data = match &shared {
            Some(d) => d,
            None => {
                local = prepare(&c.data)?;
                &local
            }
        };
        for run in run_seeds(data, c)? {
            let mut r = run.report;
            r.method = format!("{} {param}={v}", r.method);
            reports.push(r);
        }
    }
    Ok(reports)
}
