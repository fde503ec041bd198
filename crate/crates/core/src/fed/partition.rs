use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::rng::{rng_from, stream};

/// Disjoint per-client index lists covering the dataset, with weights
/// `p_k = n_k / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignments: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl Partition {
    /// Checks that the lists are disjoint and cover `0..n_samples`.
    pub fn new(assignments: Vec<Vec<usize>>, n_samples: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidArgument("partition needs at least one client".into()));
        }
        let mut seen = vec![false; n_samples];
        for &i in assignments.iter().flatten() {
            if i >= n_samples || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("sample {i} is out of range or assigned twice")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("partition does not cover every sample".into()));
        }
        let n = n_samples as f64;
        let weights = assignments.iter().map(|a| a.len() as f64 / n).collect();
        Ok(Self { assignments, weights })
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client(&self, k: usize) -> &[usize] {
        &self.assignments[k]
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    /// Weights of `clients` rescaled to sum to one.
    pub fn renormalized(&self, clients: &[usize]) -> Vec<f64> {
        let total: f64 = clients.iter().map(|&k| self.weights[k]).sum();
        if total == 0.0 {
            return vec![1.0 / clients.len() as f64; clients.len()];
        }
        clients.iter().map(|&k| self.weights[k] / total).collect()
    }
}

/// Shuffles `0..n` and deals it into `N` contiguous chunks whose sizes differ
/// by at most one (larger chunks first).
pub fn partition_iid(n_samples: usize, num_clients: usize, seed: u64) -> Result<Partition> {
    if num_clients == 0 {
        return Err(Error::InvalidArgument("number of clients must be positive".into()));
    }
    if n_samples < num_clients {
        return Err(Error::InvalidArgument(format!("{n_samples} samples cannot serve {num_clients} clients")));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng_from(seed, &[stream::PARTITION, 0]));
    let base = n_samples / num_clients;
    let extra = n_samples % num_clients;
    let mut start = 0;
    let assignments = (0..num_clients)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let chunk = order[start..start + len].to_vec();
            start += len;
            chunk
        })
        .collect();
    Partition::new(assignments, n_samples)
}

/// Sorts indices by label, cuts them into `N * shards_per_client` contiguous
/// shards (the remainder goes to the last shard) and deals the shards out at
/// random, `shards_per_client` to each client.
pub fn partition_noniid(labels: &[usize], num_clients: usize, shards_per_client: usize, seed: u64) -> Result<Partition> {
    if num_clients == 0 || shards_per_client == 0 {
        return Err(Error::InvalidArgument("clients and shards per client must be positive".into()));
    }
    let n = labels.len();
    let shards = num_clients * shards_per_client;
    if shards > n {
        return Err(Error::InvalidArgument(format!("{shards} shards do not fit {n} samples")));
    }
    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by_key(|&i| (labels[i], i));
    let size = n / shards;
    let bounds = |s: usize| (s * size, if s + 1 == shards { n } else { (s + 1) * size });
    let mut order: Vec<usize> = (0..shards).collect();
    order.shuffle(&mut rng_from(seed, &[stream::PARTITION, 1]));
    let assignments = order
        .chunks(shards_per_client)
        .map(|owned| {
            owned
                .iter()
                .flat_map(|&s| {
                    let (a, b) = bounds(s);
                    sorted[a..b].iter().copied()
                })
                .collect()
        })
        .collect();
    Partition::new(assignments, n)
}

/// Number of clients drawn per round: `max(1, round(C * N))`.
pub fn clients_per_round(num_clients: usize, fraction: f64) -> usize {
    ((fraction * num_clients as f64).round() as usize).clamp(1, num_clients.max(1))
}

/// Uniform sample without replacement, sorted, from a stream keyed on
/// `(seed, round)`.
pub fn sample_clients(num_clients: usize, fraction: f64, round: usize, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("participation fraction {fraction} outside (0, 1]")));
    }
    if num_clients == 0 {
        return Err(Error::InvalidArgument("number of clients must be positive".into()));
    }
    let m = clients_per_round(num_clients, fraction);
    if m == num_clients {
        return Ok((0..num_clients).collect());
    }
    let mut rng = rng_from(seed, &[stream::CLIENT_SAMPLING, round as u64]);
    let mut ids = index::sample(&mut rng, num_clients, m).into_vec();
    ids.sort_unstable();
    Ok(ids)
}
