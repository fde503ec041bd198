//! `fedhd`: train, encode, evaluate and sweep federated HD classifiers.

mod config;
mod experiment;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fedhd::channel::decode_model;
use fedhd::data::{save_binary, Standardizer};
use fedhd::hdc::ClassPrototypes;
use fedhd::strategy::{decode_sparse, SPARSE_MAGIC};
use fedhd::Exec;

use config::Settings;
use experiment::ExperimentConfig;

#[derive(Parser)]
#[command(name = "fedhd", version, about = "Federated hyperdimensional classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines, optional `[section]` headers).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set fed.rounds=20` or `--set d=4000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run seed; takes precedence over the config file and FEDHD_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Run single-threaded.
    #[arg(long)]
    serial: bool,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        for o in &self.overrides {
            s.set_arg(o)?;
        }
        if let Some(seed) = self.seed {
            s.insert("seed", &seed.to_string(), "--seed")?;
        }
        if self.serial {
            s.insert("exec", "serial", "--serial")?;
        }
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run federated training and write per-round metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// Metrics CSV (overrides output.metrics).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Final model in HDFM float32 format (overrides output.model).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Final model in HDSP sparse format (overrides output.sparse_model).
        #[arg(long)]
        sparse_model: Option<PathBuf>,
    },
    /// Normalize and project a feature file into an HDDS hypervector file.
    Encode {
        #[command(flatten)]
        common: Common,
        /// Input dataset (CSV or HDDS).
        #[arg(long)]
        data: PathBuf,
        /// Output HDDS file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report accuracy of a saved model on a dataset.
    ///
    /// The data are encoded with the configured encoder. Normalization
    /// statistics come from `data.train` when set, else from the evaluated file.
    Eval {
        #[command(flatten)]
        common: Common,
        /// HDFM or HDSP model file.
        #[arg(long)]
        model: PathBuf,
        /// Dataset to evaluate (CSV or HDDS).
        #[arg(long)]
        data: PathBuf,
    },
    /// Train once per cell of a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid axis `name=v1,v2,...`; names: E, B, C, snr_db, p_e, rate, S, d.
        #[arg(long = "grid", required = true, value_name = "NAME=VALUES")]
        grid: Vec<String>,
        /// Directory for per-cell metrics and summary.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { common, metrics, model, sparse_model } => {
            let mut s = common.settings()?;
            for (key, path) in [("output.metrics", metrics), ("output.model", model), ("output.sparse_model", sparse_model)] {
                if let Some(p) = path {
                    s.insert(key, &p.display().to_string(), "command line")?;
                }
            }
            train(&s)?;
        }
        Command::Encode { common, data, out } => encode(&common.settings()?, &data, &out)?,
        Command::Eval { common, model, data } => eval(&common.settings()?, &model, &data)?,
        Command::Sweep { common, grid, out_dir } => {
            let s = common.settings()?;
            let axes = grid.iter().map(|g| sweep::parse_axis(g)).collect::<Result<Vec<_>>>()?;
            let failed = sweep::sweep(&s, &axes, &out_dir, |line| eprintln!("{line}"))?;
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see {}", out_dir.join("summary.csv").display());
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn train(s: &Settings) -> Result<()> {
    let cfg = ExperimentConfig::from_settings(s)?;
    let (train, test) = experiment::load_data(&cfg)?;
    let (train, test) = experiment::encode_splits(&cfg, train, test)?;
    let (r, _) = experiment::run(&cfg, &train, test.as_ref())?;
    println!(
        "rounds {} final_accuracy {:.4} best_accuracy {:.4} uplink_bytes {} downlink_bytes {}",
        r.rounds, r.final_accuracy, r.best_accuracy, r.uplink_bytes, r.downlink_bytes
    );
    if let (Some(t), Some(round)) = (cfg.target_accuracy, r.target_round) {
        println!("target_accuracy {t} reached at round {round}");
    }
    Ok(())
}

fn encode(s: &Settings, data: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_settings(s)?;
    let ds = experiment::load_dataset(data, cfg.data.format, cfg.data.has_header)
        .with_context(|| format!("loading {}", data.display()))?;
    let ds = if cfg.data.normalize { Standardizer::fit(&ds).apply(&ds) } else { ds };
    let enc = cfg.encoder(ds.input_dim());
    let set = ds.encode(&enc.projection()?, enc.quantize, cfg.exec)?;
    save_binary(&fedhd::data::Dataset::from_encoded(&set)?, out).with_context(|| format!("writing {}", out.display()))?;
    println!("encoded {} samples to d = {}", set.len(), set.hd_dim());
    Ok(())
}

fn load_model(path: &Path) -> Result<ClassPrototypes> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let model = if bytes.starts_with(SPARSE_MAGIC) {
        decode_sparse(&bytes)?.0.to_dense()?
    } else {
        decode_model(&bytes)?
    };
    Ok(model)
}

fn eval(s: &Settings, model_path: &Path, data: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let mut s = s.clone();
    if !s.contains("encoder.dim") {
        s.insert("encoder.dim", &model.hd_dim().to_string(), "model file")?;
    }
    let cfg = ExperimentConfig::from_settings(&s)?;
    if cfg.hd_dim != model.hd_dim() {
        bail!("encoder.dim = {} but the model has d = {}", cfg.hd_dim, model.hd_dim());
    }
    let mut ds = experiment::load_dataset(data, cfg.data.format, cfg.data.has_header)
        .with_context(|| format!("loading {}", data.display()))?;
    if ds.num_classes() > model.num_classes() {
        bail!("data has {} classes but the model only {}", ds.num_classes(), model.num_classes());
    }
    ds.set_num_classes(model.num_classes())?;
    let set = if cfg.data.encoded {
        ds.into_encoded()?
    } else {
        let ds = if cfg.data.normalize {
            let stats = match &cfg.data.source {
                experiment::DataSource::Files { train, .. } => {
                    let tr = experiment::load_dataset(train, cfg.data.format, cfg.data.has_header)
                        .with_context(|| format!("loading {}", train.display()))?;
                    Standardizer::fit(&tr)
                }
                experiment::DataSource::Synthetic(_) => Standardizer::fit(&ds),
            };
            stats.apply(&ds)
        } else {
            ds
        };
        let enc = cfg.encoder(ds.input_dim());
        ds.encode(&enc.projection()?, enc.quantize, cfg.exec)?
    };
    if set.hd_dim() != model.hd_dim() {
        bail!("data hypervectors have d = {} but the model has d = {}", set.hd_dim(), model.hd_dim());
    }
    let exec: Exec = cfg.exec;
    println!("accuracy {:.4} samples {}", set.accuracy(&model, exec)?, set.len());
    for (k, a) in set.per_class_accuracy(&model, exec)?.into_iter().enumerate() {
        match a {
            Some(a) => println!("class {k} {a:.4}"),
            None => println!("class {k} -"),
        }
    }
    Ok(())
}
