use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hdc::{one_shot_train, retrain_epoch, ClassPrototypes, EncodedSet};
use crate::rng::{rng_from, stream};

use super::{BatchSize, Initialization, RoundConfig};

/// One client: its id, the indices of its local samples and the last model it
/// trained.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub indices: Vec<usize>,
    pub model: Option<ClassPrototypes>,
}

impl ClientState {
    pub fn new(id: usize, indices: Vec<usize>) -> Self {
        Self { id, indices, model: None }
    }
}

/// Copies the broadcast model and retrains it for `E` epochs on the client's
/// data. The client's stored model is replaced by the result.
pub fn local_update(
    client: &mut ClientState,
    data: &EncodedSet,
    global: &ClassPrototypes,
    cfg: &RoundConfig,
    round: usize,
) -> Result<ClassPrototypes> {
    let model = train_local(client.id, &client.indices, data, global, cfg, round)?;
    client.model = Some(model.clone());
    Ok(model)
}

/// Local samples are cut into fixed batches of `B` in stored order. Each epoch
/// visits the batches in a freshly shuffled order and the samples inside a
/// batch one at a time, so `B = full` keeps the stored order and `B = 1`
/// shuffles individual samples.
pub(crate) fn train_local(
    id: usize,
    indices: &[usize],
    data: &EncodedSet,
    global: &ClassPrototypes,
    cfg: &RoundConfig,
    round: usize,
) -> Result<ClassPrototypes> {
    if global.hd_dim() != data.hd_dim() || global.num_classes() != data.num_classes() {
        return Err(Error::mismatch(global.hd_dim(), data.hd_dim()));
    }
    if indices.is_empty() {
        return Ok(global.clone());
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(Error::InvalidArgument(format!("client {id} holds sample {bad} outside the dataset")));
    }
    let mut model = if cfg.init == Initialization::OneShot && global.is_zero() {
        one_shot_train(data.select(indices), data.num_classes())?
    } else {
        global.clone()
    };
    // Counts describe the local data, so the server's sum counts the samples
    // behind this round's participants instead of compounding every round.
    let counts = model.counts_mut();
    counts.iter_mut().for_each(|c| *c = 0);
    for &i in indices {
        counts[data.labels()[i]] += 1;
    }
    if cfg.local_epochs == 0 {
        return Ok(model);
    }
    let alpha = cfg.schedule.rate(cfg.learning_rate, round);
    let batch = match cfg.batch {
        BatchSize::Full => indices.len(),
        BatchSize::Size(b) => b.max(1),
    };
    let batches: Vec<&[usize]> = indices.chunks(batch).collect();
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut rng = rng_from(cfg.seed, &[stream::LOCAL_ORDER, round as u64, id as u64]);
    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        let seq = order.iter().flat_map(|&b| batches[b].iter().map(|&i| data.sample(i)));
        retrain_epoch(&mut model, seq, alpha)?;
    }
    Ok(model)
}
