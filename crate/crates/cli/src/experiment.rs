//! Typed experiment configuration, data preparation and the training run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use fedhd::channel::{encode_model, ChannelConfig, ChannelKind, CodecConfig, PacketLoss, Representation};
use fedhd::data::{load_binary, load_delimited, Dataset, GaussianMixture, Split, Standardizer};
use fedhd::fed::{
    partition_iid, partition_noniid, Aggregation, BatchSize, Federation, Initialization, LearningRateSchedule,
    Partition, RoundConfig, RoundRecord,
};
use fedhd::hdc::{ClassPrototypes, EncodedSet, EncoderConfig, DEFAULT_HD_DIM};
use fedhd::rng::derive_seed;
use fedhd::strategy::{encode_sparse, sparsify, StrategyConfig};
use fedhd::Exec;

use crate::config::Settings;

pub const METRICS_HEADER: &str = "round,accuracy,train_loss,uplink_bytes_cum,downlink_bytes_cum,participants,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Delimited,
    Binary,
}

impl Format {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" | "delimited" => Ok(Format::Delimited),
            "hdds" | "binary" => Ok(Format::Binary),
            other => bail!("unknown data format `{other}` (expected csv or hdds)"),
        }
    }

    /// `.hdds` and `.bin` are binary, anything else delimited text.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("hdds") | Some("bin") => Format::Binary,
            _ => Format::Delimited,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
    pub nuisance_rank: usize,
    pub nuisance_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { train: PathBuf, test: Option<PathBuf> },
    Synthetic(Synthetic),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub format: Option<Format>,
    pub has_header: bool,
    pub normalize: bool,
    /// Rows are hypervectors already; skip normalization and projection.
    pub encoded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    Iid,
    NonIid { shards_per_client: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub metrics: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sparse_model: Option<PathBuf>,
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub hd_dim: usize,
    pub encoder_seed: u64,
    pub quantize: bool,
    pub round: RoundConfig,
    pub partition: PartitionKind,
    pub partition_seed: u64,
    pub channel: ChannelConfig,
    pub strategy: StrategyConfig,
    pub output: Output,
    pub target_accuracy: Option<f64>,
    pub exec: Exec,
}

impl ExperimentConfig {
    /// Builds and validates everything that can be checked without reading
    /// data, so a bad config fails before any work starts.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let seed = s.seed()?;
        let data = data_config(s)?;
        let hd_dim = s.get_or("encoder.dim", DEFAULT_HD_DIM)?;
        if hd_dim == 0 {
            bail!("encoder.dim must be positive");
        }
        let strategy = strategy_config(s)?;
        let round = round_config(s, seed, &strategy)?;
        let partition = match s.raw("partition.kind").unwrap_or("iid") {
            "iid" => PartitionKind::Iid,
            "noniid" | "non_iid" => PartitionKind::NonIid { shards_per_client: s.get_or("partition.shards_per_client", 2)? },
            other => bail!("unknown partition.kind `{other}` (expected iid or noniid)"),
        };
        let channel = channel_config(s)?;
        let target_accuracy = s.get::<f64>("target_accuracy")?;
        if let Some(t) = target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                bail!("target_accuracy must be in [0, 1], got {t}");
            }
        }
        let exec = match s.raw("exec") {
            None => Exec::default(),
            Some("serial") => Exec::Serial,
            Some("parallel") => Exec::Parallel,
            Some(other) => bail!("unknown exec `{other}` (expected serial or parallel)"),
        };
        Ok(Self {
            seed,
            data,
            hd_dim,
            encoder_seed: s.get_or("encoder.seed", seed)?,
            quantize: s.bool_or("encoder.quantize", false)?,
            round,
            partition,
            partition_seed: s.get_or("partition.seed", seed)?,
            channel,
            strategy,
            output: Output {
                metrics: s.get("output.metrics")?,
                model: s.get("output.model")?,
                sparse_model: s.get("output.sparse_model")?,
                wall_clock: s.bool_or("output.wall_clock", true)?,
            },
            target_accuracy,
            exec,
        })
    }

    pub fn encoder(&self, input_dim: usize) -> EncoderConfig {
        EncoderConfig { input_dim, hd_dim: self.hd_dim, seed: self.encoder_seed, quantize: self.quantize }
    }
}

fn data_config(s: &Settings) -> Result<DataConfig> {
    let source = match s.get::<PathBuf>("data.train")? {
        Some(train) => {
            let test = s.get::<PathBuf>("data.test")?;
            for p in std::iter::once(&train).chain(test.iter()) {
                if !p.is_file() {
                    bail!("data file {} does not exist", p.display());
                }
            }
            DataSource::Files { train, test }
        }
        None => DataSource::Synthetic(Synthetic {
            classes: s.get_or("data.synthetic.classes", 10)?,
            features: s.get_or("data.synthetic.features", 32)?,
            per_class: s.get_or("data.synthetic.per_class", 100)?,
            test_per_class: s.get_or("data.synthetic.test_per_class", 50)?,
            separation: s.get_or("data.synthetic.separation", 3.0)?,
            nuisance_rank: s.get_or("data.synthetic.nuisance_rank", 0)?,
            nuisance_scale: s.get_or("data.synthetic.nuisance_scale", 0.0)?,
        }),
    };
    Ok(DataConfig {
        source,
        format: s.raw("data.format").map(Format::parse).transpose()?,
        has_header: s.bool_or("data.has_header", false)?,
        normalize: s.bool_or("data.normalize", true)?,
        encoded: s.bool_or("data.encoded", false)?,
    })
}

fn strategy_config(s: &Settings) -> Result<StrategyConfig> {
    let st = match s.raw("strategy.kind").unwrap_or("none") {
        "none" => StrategyConfig::None,
        "binary_diff" => StrategyConfig::BinaryDiff { step: s.get_or("strategy.step", 1.0)? },
        "subsample" => StrategyConfig::Subsample { rate: s.get_or("strategy.rate", 0.1)? },
        "sparsify" => StrategyConfig::Sparsify { sparsity: s.get_or("strategy.sparsity", 0.9)? },
        other => bail!("unknown strategy.kind `{other}` (expected none, binary_diff, subsample or sparsify)"),
    };
    st.validate()?;
    Ok(st)
}

fn round_config(s: &Settings, seed: u64, strategy: &StrategyConfig) -> Result<RoundConfig> {
    let d = RoundConfig::default();
    // Differencing against a stale global model desynchronizes clients, so
    // binary-diff runs use every client unless participation is given.
    let participation_default = match strategy {
        StrategyConfig::BinaryDiff { .. } => 1.0,
        _ => d.participation,
    };
    let batch = match s.raw("fed.batch") {
        None => d.batch,
        Some("full") => BatchSize::Full,
        Some(_) => BatchSize::Size(s.get("fed.batch")?.unwrap_or(10)),
    };
    let aggregation = match s.raw("fed.aggregation").unwrap_or("weighted") {
        "weighted" => Aggregation::Weighted,
        "sum" => Aggregation::Sum,
        other => bail!("unknown fed.aggregation `{other}` (expected weighted or sum)"),
    };
    let init = match s.raw("fed.init").unwrap_or("one_shot") {
        "one_shot" => Initialization::OneShot,
        "zeros" => Initialization::Zeros,
        other => bail!("unknown fed.init `{other}` (expected one_shot or zeros)"),
    };
    let schedule = match s.raw("fed.schedule").unwrap_or("constant") {
        "constant" => LearningRateSchedule::Constant,
        "decaying" => LearningRateSchedule::Decaying { mu: s.get_or("fed.mu", 1.0)?, gamma: s.get_or("fed.gamma", 8.0)? },
        other => bail!("unknown fed.schedule `{other}` (expected constant or decaying)"),
    };
    let round = RoundConfig {
        num_clients: s.get_or("fed.clients", d.num_clients)?,
        participation: s.get_or("fed.participation", participation_default)?,
        local_epochs: s.get_or("fed.epochs", d.local_epochs)?,
        batch,
        learning_rate: s.get_or("fed.learning_rate", d.learning_rate)?,
        rounds: s.get_or("fed.rounds", d.rounds)?,
        seed,
        aggregation,
        init,
        schedule,
        track_train_loss: s.bool_or("fed.track_train_loss", d.track_train_loss)?,
    };
    round.validate()?;
    Ok(round)
}

fn channel_config(s: &Settings) -> Result<ChannelConfig> {
    let codec = match s.raw("channel.codec") {
        None => CodecConfig::FLOAT32,
        Some(name) => match name.parse::<Representation>()? {
            Representation::QuantizedInt => CodecConfig::quantized(s.get_or("channel.bitwidth", 16)?)?,
            Representation::Sign => bail!("the sign codec is internal to binary_diff and cannot be selected"),
            r => CodecConfig::new(r, 32)?,
        },
    };
    let need = |key: &str| -> Result<f64> {
        s.get(key)?.ok_or_else(|| anyhow!("channel.kind = {} needs `{key}`", s.raw("channel.kind").unwrap_or("")))
    };
    let kind = match s.raw("channel.kind").unwrap_or("ideal") {
        "ideal" => ChannelKind::Ideal,
        "awgn" => ChannelKind::Awgn { snr_db: need("channel.snr_db")? },
        "bsc" => ChannelKind::Bsc { p_e: need("channel.bit_error_rate")? },
        "packet_loss" => {
            let loss = match (s.get::<f64>("channel.drop_probability")?, s.get::<f64>("channel.bit_error_rate")?) {
                (Some(p), None) => PacketLoss::DropProbability(p),
                (None, Some(p)) => PacketLoss::BitErrorRate(p),
                (Some(_), Some(_)) => bail!("packet_loss takes drop_probability or bit_error_rate, not both"),
                (None, None) => bail!("channel.kind = packet_loss needs drop_probability or bit_error_rate"),
            };
            ChannelKind::PacketLoss { loss, packet_bits: s.get_or("channel.packet_bits", 1000)? }
        }
        other => bail!("unknown channel.kind `{other}` (expected ideal, awgn, bsc or packet_loss)"),
    };
    let ch = ChannelConfig { kind, codec };
    ch.validate()?;
    Ok(ch)
}

/// Reads a dataset in the given or inferred format.
pub fn load_dataset(path: &Path, format: Option<Format>, has_header: bool) -> Result<Dataset> {
    let ds = match format.unwrap_or_else(|| Format::infer(path)) {
        Format::Delimited => load_delimited(path, has_header)?,
        Format::Binary => load_binary(path)?,
    };
    Ok(ds)
}

/// Gives both splits the larger class count.
pub fn align_classes(a: &mut Dataset, b: &mut Dataset) -> Result<()> {
    let k = a.num_classes().max(b.num_classes());
    a.set_num_classes(k)?;
    b.set_num_classes(k)?;
    Ok(())
}

/// Raw train and optional test splits.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Option<Dataset>)> {
    let data = &cfg.data;
    match &data.source {
        DataSource::Files { train, test } => {
            let mut tr = load_dataset(train, data.format, data.has_header)
                .with_context(|| format!("loading {}", train.display()))?;
            let te = match test {
                Some(p) => {
                    let mut te = load_dataset(p, data.format, data.has_header)
                        .with_context(|| format!("loading {}", p.display()))?
                        .with_split(Split::Test);
                    align_classes(&mut tr, &mut te)?;
                    Some(te)
                }
                None => None,
            };
            Ok((tr, te))
        }
        DataSource::Synthetic(sy) => {
            let mix = GaussianMixture::new(sy.classes, sy.features, sy.separation, derive_seed(cfg.seed, &[1]))?
                .with_nuisance(sy.nuisance_rank, sy.nuisance_scale, derive_seed(cfg.seed, &[2]))?;
            let tr = mix.sample(sy.per_class, derive_seed(cfg.seed, &[3]))?;
            let te = if sy.test_per_class > 0 {
                Some(mix.sample(sy.test_per_class, derive_seed(cfg.seed, &[4]))?.with_split(Split::Test))
            } else {
                None
            };
            Ok((tr, te))
        }
    }
}

/// Normalizes with train statistics (unless disabled) and encodes.
pub fn encode_splits(cfg: &ExperimentConfig, train: Dataset, test: Option<Dataset>) -> Result<(EncodedSet, Option<EncodedSet>)> {
    if cfg.data.encoded {
        return Ok((train.into_encoded()?, test.map(Dataset::into_encoded).transpose()?));
    }
    let (train, test) = if cfg.data.normalize {
        let st = Standardizer::fit(&train);
        let te = test.as_ref().map(|t| st.apply(t));
        (st.apply(&train), te)
    } else {
        (train, test)
    };
    let enc = cfg.encoder(train.input_dim());
    let phi = enc.projection()?;
    let tr = train.encode(&phi, enc.quantize, cfg.exec)?;
    let te = test.map(|t| t.encode(&phi, enc.quantize, cfg.exec)).transpose()?;
    Ok((tr, te))
}

pub fn make_partition(cfg: &ExperimentConfig, train: &EncodedSet) -> Result<Partition> {
    let n = cfg.round.num_clients;
    let p = match cfg.partition {
        PartitionKind::Iid => partition_iid(train.len(), n, cfg.partition_seed)?,
        PartitionKind::NonIid { shards_per_client } => partition_noniid(train.labels(), n, shards_per_client, cfg.partition_seed)?,
    };
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rounds: usize,
    pub final_accuracy: f64,
    pub best_accuracy: f64,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    /// First round whose accuracy reached `target_accuracy`.
    pub target_round: Option<usize>,
    /// Cumulative uplink and downlink bytes at `target_round`.
    pub target_bytes: (u64, u64),
}

/// Streams one metrics row per round.
struct MetricsWriter {
    out: Option<BufWriter<File>>,
    wall_clock: bool,
    start: Instant,
    uplink: u64,
    downlink: u64,
    error: Option<std::io::Error>,
}

impl MetricsWriter {
    fn create(path: Option<&Path>, wall_clock: bool) -> Result<Self> {
        let out = match path {
            Some(p) => {
                let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
                writeln!(w, "{METRICS_HEADER}")?;
                Some(w)
            }
            None => None,
        };
        Ok(Self { out, wall_clock, start: Instant::now(), uplink: 0, downlink: 0, error: None })
    }

    fn row(&mut self, r: &RoundRecord) {
        self.uplink += r.uplink_bytes;
        self.downlink += r.downlink_bytes;
        let Some(w) = self.out.as_mut() else { return };
        if self.error.is_some() {
            return;
        }
        let loss = r.train_loss.map(|l| format!("{l:.6}")).unwrap_or_default();
        let wall = if self.wall_clock { self.start.elapsed().as_millis() } else { 0 };
        if let Err(e) = writeln!(
            w,
            "{},{:.6},{loss},{},{},{},{wall}",
            r.round,
            r.accuracy,
            self.uplink,
            self.downlink,
            r.participants.len()
        ) {
            self.error = Some(e);
        }
    }

    fn finish(mut self, summary: &RunSummary, target: Option<f64>) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        if let Some(mut w) = self.out.take() {
            if let (Some(t), Some(r)) = (target, summary.target_round) {
                let (up, down) = summary.target_bytes;
                writeln!(w, "# target_accuracy={t} round={r} uplink_bytes_cum={up} downlink_bytes_cum={down}")?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Trains on prepared data, writing metrics and model files as configured.
pub fn run(cfg: &ExperimentConfig, train: &EncodedSet, test: Option<&EncodedSet>) -> Result<(RunSummary, ClassPrototypes)> {
    let partition = make_partition(cfg, train)?;
    let fed = Federation {
        train,
        test,
        partition: &partition,
        round: cfg.round,
        channel: cfg.channel,
        strategy: cfg.strategy,
        exec: cfg.exec,
    };
    fed.validate()?;
    let mut writer = MetricsWriter::create(cfg.output.metrics.as_deref(), cfg.output.wall_clock)?;
    let mut best = 0.0f64;
    let mut target_round = None;
    let mut target_bytes = (0, 0);
    let outcome = fed.run_with(|r, _| {
        writer.row(r);
        best = best.max(r.accuracy);
        if target_round.is_none() && cfg.target_accuracy.is_some_and(|t| r.accuracy >= t) {
            target_round = Some(r.round);
            target_bytes = (writer.uplink, writer.downlink);
        }
    })?;
    let summary = RunSummary {
        rounds: outcome.records.len(),
        final_accuracy: outcome.records.last().map_or(0.0, |r| r.accuracy),
        best_accuracy: best,
        uplink_bytes: writer.uplink,
        downlink_bytes: writer.downlink,
        target_round,
        target_bytes,
    };
    writer.finish(&summary, cfg.target_accuracy)?;
    if let Some(p) = &cfg.output.model {
        std::fs::write(p, encode_model(&outcome.model, &CodecConfig::FLOAT32)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &cfg.output.sparse_model {
        let s = match cfg.strategy {
            StrategyConfig::Sparsify { sparsity } => sparsity,
            _ => 0.0,
        };
        let sparse = sparsify(&outcome.model, s)?;
        std::fs::write(p, encode_sparse(&sparse, &CodecConfig::FLOAT32)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok((summary, outcome.model))
}
