use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pdsnet::baselines::CfMethod;
use pdsnet::dataio::{
    filter_outliers_iforest, inject_feature_noise, load_records, save_records, synth_generate, EncodedRecord,
    SplitManifest, SynthConfig,
};
use pdsnet::eval::{reports_to_csv, summary_table, EvalReport};
use pdsnet::experiment::{self, ExperimentConfig};
use pdsnet::model::{load_params, save_params, Ablation, Architecture, Batch, ModelSpec, PdsNet};
use pdsnet::training::{loss_gradcheck, TrainConfig};
use pdsnet::{Error, Result};

#[derive(Parser)]
#[command(name = "pdsnet", version, about = "Noise-resilient QoS response-time prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides one key, e.g. `--set delta=0.3` or `--set data.synth.n_users=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`--set {o}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ReportOut {
    /// Writes the report CSV here; the summary table always goes to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Upcc,
    Ipcc,
    Uipcc,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Loads and splits the configured data; writes records and a split manifest.
    Prepare {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Forges location features for a fraction of users.
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes the corrupted user ids, one per line.
        #[arg(long)]
        corrupted_out: Option<PathBuf>,
    },
    /// Drops response-time outliers with an isolation forest.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long, default_value_t = 256)]
        subsample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generates a synthetic corpus with known ground truth.
    Synth {
        /// TOML table of generator settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        services: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        missing: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes the corrupted user ids, one per line.
        #[arg(long)]
        corrupted_out: Option<PathBuf>,
    },
    /// Trains one network per configured seed and evaluates it on the test split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Receives `seed<S>.ckpt`, `seed<S>-history.csv` and `report.csv`.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluates a saved checkpoint on the configured test split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Runs the collaborative-filtering baselines on the configured split.
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "all")]
        method: BaselineKind,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Runs the full model and both ablations over every seed.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Runs one configuration per value of a single key.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `0.1,0.3,0.5`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        report: ReportOut,
    },
    /// Compares backpropagated and finite-difference gradients of the objective.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(reports: &[EvalReport], out: &ReportOut) -> Result<()> {
    if let Some(path) = &out.out {
        write_text(path, &reports_to_csv(reports))?;
    }
    print!("{}", summary_table(reports));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { cfg, out_dir } => {
            let cfg = cfg.load()?;
            let data = experiment::prepare(&cfg.data)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            save_records(&data.records, &out_dir.join("records.csv"))?;
            let spec = experiment::spec_of(&cfg.data)?;
            SplitManifest::new(&spec, &data.split).save(&out_dir.join("split.toml"))?;
            experiment::write_user_list(&data.corrupted_users, &out_dir.join("corrupted_users.txt"))?;
            println!(
                "{} records: train {}, test {}, validation {}",
                data.records.len(),
                data.split.train.len(),
                data.split.test.len(),
                data.split.validation.len()
            );
        }
        Command::Noise {
            input,
            output,
            fraction,
            seed,
            corrupted_out,
        } => {
            let noisy = inject_feature_noise(&load_records(&input)?, fraction, seed)?;
            save_records(&noisy.records, &output)?;
            if let Some(p) = corrupted_out {
                experiment::write_user_list(&noisy.corrupted_users, &p)?;
            }
            println!("corrupted {} users", noisy.corrupted_users.len());
        }
        Command::Filter {
            input,
            output,
            threshold,
            trees,
            subsample,
            seed,
        } => {
            let records = load_records(&input)?;
            let kept = filter_outliers_iforest(&records, threshold, trees, subsample, seed)?;
            save_records(&kept, &output)?;
            println!("kept {} of {} records", kept.len(), records.len());
        }
        Command::Synth {
            config,
            output,
            users,
            services,
            noise,
            missing,
            seed,
            corrupted_out,
        } => {
            let mut sc = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    toml::from_str::<SynthConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => SynthConfig::default(),
            };
            sc.n_users = users.unwrap_or(sc.n_users);
            sc.n_services = services.unwrap_or(sc.n_services);
            sc.noise_user_fraction = noise.unwrap_or(sc.noise_user_fraction);
            sc.missing_fraction = missing.unwrap_or(sc.missing_fraction);
            sc.seed = seed.unwrap_or(sc.seed);
            let (records, truth) = synth_generate(&sc)?;
            save_records(&records, &output)?;
            if let Some(p) = corrupted_out {
                experiment::write_user_list(&truth.corrupted_users, &p)?;
            }
            let all: Vec<usize> = (0..records.len()).collect();
            println!(
                "{} records, {} corrupted users, noise floor MAE {:.4}",
                records.len(),
                truth.corrupted_users.len(),
                truth.noise_floor_mae(&records, &all)
            );
        }
        Command::Train { cfg, out_dir } => {
            let cfg = cfg.load()?;
            let data = experiment::prepare(&cfg.data)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let runs = experiment::run_seeds(&data, &cfg)?;
            for (seed, run) in cfg.run.seeds.iter().zip(&runs) {
                save_params(&run.net, &out_dir.join(format!("seed{seed}.ckpt")))?;
                run.history.save_csv(&out_dir.join(format!("seed{seed}-history.csv")))?;
            }
            let reports: Vec<EvalReport> = runs.into_iter().map(|r| r.report).collect();
            write_text(&out_dir.join("report.csv"), &reports_to_csv(&reports))?;
            if let Some(floor) = data.noise_floor {
                println!("label noise floor (test MAE of the clean signal): {floor:.4}");
            }
            print!("{}", summary_table(&reports));
        }
        Command::Eval { cfg, checkpoint, report } => {
            let cfg = cfg.load()?;
            let data = experiment::prepare(&cfg.data)?;
            let arch = Architecture::new(cfg.model.clone(), data.encoder.sizes())?;
            let net = load_params(&checkpoint, Some(&arch))?;
            let train = TrainConfig {
                seed: cfg.run.seeds[0],
                ..cfg.train.clone()
            };
            emit(&[experiment::evaluate_checkpoint(&data, &net, &train)?], &report)?;
        }
        Command::Baseline { cfg, method, report } => {
            let cfg = cfg.load()?;
            let data = experiment::prepare(&cfg.data)?;
            let w = cfg.run.uipcc_weight;
            let methods = match method {
                BaselineKind::Upcc => vec![CfMethod::Upcc],
                BaselineKind::Ipcc => vec![CfMethod::Ipcc],
                BaselineKind::Uipcc => vec![CfMethod::Uipcc(w)],
                BaselineKind::All => vec![CfMethod::Upcc, CfMethod::Ipcc, CfMethod::Uipcc(w)],
            };
            let reports = methods
                .into_iter()
                .map(|m| experiment::run_baseline(&data, m, cfg.run.top_k))
                .collect::<Result<Vec<_>>>()?;
            emit(&reports, &report)?;
        }
        Command::Ablate { cfg, report } => emit(&experiment::ablate(&cfg.load()?)?, &report)?,
        Command::Sweep {
            cfg,
            param,
            values,
            report,
        } => emit(&experiment::sweep(&cfg.load()?, &param, &values)?, &report)?,
        Command::Gradcheck { seed, eps, tolerance } => gradcheck(seed, eps, tolerance)?,
    }
    Ok(())
}

/// Toy instance: vocabulary 4 per feature, E = 2, N = 4, batch of 4.
fn gradcheck(seed: u64, eps: f64, tolerance: f64) -> Result<()> {
    let spec = ModelSpec {
        embed_exp: 2,
        latent_dim: 4,
        prior_hidden: 6,
        posterior_hidden: 6,
        head_widths: [8, 6, 5],
    };
    let arch = Architecture::new(spec, [4; 6])?;
    let records: Vec<EncodedRecord> = (0..4)
        .map(|i| EncodedRecord {
            ids: std::array::from_fn(|f| (i * 3 + f * 5 + seed as usize) % 4),
            rt: 0.3 + 0.7 * i as f64,
        })
        .collect();
    let batch = Batch::from_records(&records);
    let mut worst = 0.0f64;
    for ablation in Ablation::ALL {
        let mut net = PdsNet::init(arch.clone(), seed)?;
        net.randomize_generic(seed);
        let cfg = TrainConfig {
            ablation,
            delta: 1.0,
            ..TrainConfig::default()
        };
        let err = loss_gradcheck(&net, &batch, &cfg, seed.wrapping_add(1), eps)?;
        println!("{:<12} max relative error {err:.3e}", ablation.name());
        worst = worst.max(err);
    }
    if worst > tolerance {
        return Err(Error::NonFinite(format!(
            "gradient check failed: {worst:.3e} exceeds tolerance {tolerance:.1e}"
        )));
    }
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
