//! Federated training: partitioning, client sampling, local retraining and
//! server aggregation over an unreliable uplink.

mod aggregate;
mod client;
mod partition;
pub mod surrogate;

pub use aggregate::{aggregate_sum, aggregate_weighted};
pub use client::{local_update, ClientState};
pub use partition::{clients_per_round, partition_iid, partition_noniid, sample_clients, Partition};

use crate::channel::{hdfm_size, ChannelConfig, CodecConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hdc::{ClassPrototypes, EncodedSet};
use crate::rng::{rng_from, stream};
use crate::strategy::{encode_upload, StrategyConfig, SubsampleSums, Upload, WireSize};

use aggregate::Accumulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

/// How the server combines dense client models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// `Σ p_k M_k` with weights renormalized over the round's participants.
    #[default]
    Weighted,
    /// Plain element-wise sum.
    Sum,
}

/// Starting point of local training when the broadcast model is all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// Bundle the local data into prototypes first, then retrain.
    #[default]
    OneShot,
    /// Retrain from the zero model.
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LearningRateSchedule {
    #[default]
    Constant,
    /// `η_t = 2 / (µ (γ + t))`.
    Decaying { mu: f64, gamma: f64 },
}

impl LearningRateSchedule {
    pub fn rate(&self, base: f64, t: usize) -> f64 {
        match *self {
            LearningRateSchedule::Constant => base,
            LearningRateSchedule::Decaying { mu, gamma } => 2.0 / (mu * (gamma + t as f64)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LearningRateSchedule::Decaying { mu, gamma } if !(mu > 0.0 && gamma > 0.0) => {
                Err(Error::InvalidArgument("decaying schedule needs mu > 0 and gamma > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundConfig {
    pub num_clients: usize,
    pub participation: f64,
    pub local_epochs: usize,
    pub batch: BatchSize,
    pub learning_rate: f64,
    pub rounds: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub init: Initialization,
    pub schedule: LearningRateSchedule,
    /// Evaluate the loss over the full training set each round.
    pub track_train_loss: bool,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            num_clients: 100,
            participation: 0.2,
            local_epochs: 1,
            batch: BatchSize::Size(10),
            learning_rate: 1.0,
            rounds: 100,
            seed: 0,
            aggregation: Aggregation::Weighted,
            init: Initialization::OneShot,
            schedule: LearningRateSchedule::Constant,
            track_train_loss: true,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_clients == 0 {
            return bad("num_clients must be positive".into());
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return bad(format!("participation {} outside (0, 1]", self.participation));
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be positive".into());
        }
        if self.batch == BatchSize::Size(0) {
            return bad("batch size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        self.schedule.validate()
    }
}

/// Metrics for one communication round. Byte counts are for this round only.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub participants: Vec<usize>,
    pub accuracy: f64,
    pub train_loss: Option<f64>,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    /// Uplink size split into header, metadata and parameter payload.
    pub uplink: WireSize,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub records: Vec<RoundRecord>,
    pub model: ClassPrototypes,
}

/// Everything a training run needs. Accuracy is measured on `test` when
/// given, otherwise on `train`.
#[derive(Debug, Clone, Copy)]
pub struct Federation<'a> {
    pub train: &'a EncodedSet,
    pub test: Option<&'a EncodedSet>,
    pub partition: &'a Partition,
    pub round: RoundConfig,
    pub channel: ChannelConfig,
    pub strategy: StrategyConfig,
    pub exec: Exec,
}

/// Clients trained together before their uploads are folded into the
/// aggregate; bounds peak memory when many clients participate.
const CLIENT_CHUNK: usize = 16;

enum ServerState {
    Dense(Accumulator, Aggregation),
    Signs(Accumulator, f64),
    Subsample(SubsampleSums),
}

impl<'a> Federation<'a> {
    pub fn validate(&self) -> Result<()> {
        self.round.validate()?;
        self.channel.validate()?;
        self.strategy.validate()?;
        if self.partition.num_clients() != self.round.num_clients {
            return Err(Error::mismatch(self.round.num_clients, self.partition.num_clients()));
        }
        if self.partition.sizes().iter().sum::<usize>() != self.train.len() {
            return Err(Error::mismatch(self.train.len(), self.partition.sizes().iter().sum()));
        }
        if let Some(t) = self.test {
            if t.hd_dim() != self.train.hd_dim() || t.num_classes() != self.train.num_classes() {
                return Err(Error::mismatch(self.train.hd_dim(), t.hd_dim()));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<TrainingOutcome> {
        self.run_with(|_, _| {})
    }

    /// Runs all rounds, calling `on_round` after each with the record and the
    /// new global model.
    pub fn run_with(&self, mut on_round: impl FnMut(&RoundRecord, &ClassPrototypes)) -> Result<TrainingOutcome> {
        self.validate()?;
        let cfg = &self.round;
        let k = self.train.num_classes();
        let d = self.train.hd_dim();
        let mut global = ClassPrototypes::zeros(k, d)?;
        let mut records = Vec::with_capacity(cfg.rounds);
        let downlink_each = hdfm_size(k, d, &CodecConfig::FLOAT32) as u64;

        for t in 0..cfg.rounds {
            let participants = sample_clients(cfg.num_clients, cfg.participation, t, cfg.seed)?;
            let weights = self.partition.renormalized(&participants);
            let mut state = match self.strategy {
                StrategyConfig::BinaryDiff { step } => ServerState::Signs(Accumulator::new(k, d), step),
                StrategyConfig::Subsample { .. } => ServerState::Subsample(SubsampleSums::new(k * d)),
                _ => ServerState::Dense(Accumulator::new(k, d), cfg.aggregation),
            };
            let mut uplink = WireSize::default();
            let mut uplink_bytes = 0u64;

            for (chunk_no, chunk) in participants.chunks(CLIENT_CHUNK).enumerate() {
                let received = self.exec.map_slice(chunk, |&c| self.client_round(c, &global, t));
                for (j, r) in received.into_iter().enumerate() {
                    let (upload, size) = r?;
                    uplink += size;
                    uplink_bytes += size.total_bytes() as u64;
                    let w = weights[chunk_no * CLIENT_CHUNK + j];
                    match (&mut state, upload) {
                        (ServerState::Dense(acc, agg), Upload::Dense(m)) => {
                            acc.add(&m, (*agg == Aggregation::Weighted).then_some(w))?
                        }
                        (ServerState::Dense(acc, agg), Upload::Sparse(s)) => {
                            acc.add(&s.to_dense()?, (*agg == Aggregation::Weighted).then_some(w))?
                        }
                        (ServerState::Signs(acc, _), Upload::Signs(s)) => acc.add_values(s.values(), None)?,
                        (ServerState::Subsample(sums), Upload::Subsampled { sample, .. }) => sums.add(&sample)?,
                        _ => unreachable!("upload kind follows the strategy"),
                    }
                }
            }

            global = match state {
                ServerState::Dense(acc, _) => acc.finish()?,
                ServerState::Signs(acc, step) => {
                    let mut g = global;
                    g.as_mut_slice().iter_mut().zip(acc.values()).for_each(|(w, a)| *w += step * a);
                    g
                }
                ServerState::Subsample(sums) => sums.finish(&global)?,
            };

            let eval = self.test.unwrap_or(self.train);
            let accuracy = eval.accuracy(&global, self.exec)?;
            let train_loss = if cfg.track_train_loss { Some(self.train.mean_loss(&global, self.exec)?) } else { None };
            let record = RoundRecord {
                round: t + 1,
                downlink_bytes: downlink_each * participants.len() as u64,
                participants,
                accuracy,
                train_loss,
                uplink_bytes,
                uplink,
            };
            on_round(&record, &global);
            records.push(record);
        }
        Ok(TrainingOutcome { records, model: global })
    }

    /// Local training, strategy encoding and channel corruption for one client.
    fn client_round(&self, client: usize, global: &ClassPrototypes, t: usize) -> Result<(Upload, WireSize)> {
        let cfg = &self.round;
        let local = client::train_local(client, self.partition.client(client), self.train, global, cfg, t)?;
        let ctx = [t as u64, client as u64];
        let mut srng = rng_from(cfg.seed, &[stream::SUBSAMPLE, ctx[0], ctx[1]]);
        let upload = encode_upload(&self.strategy, &local, global, &mut srng)?;
        let size = upload.wire_size(&self.channel.codec);
        let mut crng = rng_from(cfg.seed, &[stream::CHANNEL, ctx[0], ctx[1]]);
        let received = upload.transmit(&self.channel, &mut crng)?;
        Ok((received, size))
    }
}

/// Runs `T` rounds of federated HD training.
pub fn run_training(
    train: &EncodedSet,
    test: Option<&EncodedSet>,
    partition: &Partition,
    round: RoundConfig,
    channel: ChannelConfig,
    strategy: StrategyConfig,
    exec: Exec,
) -> Result<TrainingOutcome> {
    Federation { train, test, partition, round, channel, strategy, exec }.run()
}
