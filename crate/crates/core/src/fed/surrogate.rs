//! A strongly convex stand-in for the HD training objective, used to check
//! the `O(1/t)` convergence shape of federated averaging under non-IID data
//! and partial participation.
//!
//! Client `k` minimises `F_k(w) = -mean_{i∈D_k} y_i⟨w, h_i⟩ + (µ/2)‖w‖²`:
//! the linear perceptron objective plus a quadratic penalty. The global
//! optimum is `w* = ḡ/µ` with `ḡ = mean_i y_i h_i`, so the optimality gap has
//! the closed form `(µ/2)‖w - w*‖²`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hdc::EncodedSet;
use crate::rng::{rng_from, stream};

use super::{sample_clients, LearningRateSchedule, Partition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub mu: f64,
    pub gamma: f64,
    /// Single-sample SGD steps each participant takes per round.
    pub local_steps: usize,
    pub rounds: usize,
    pub participation: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { mu: 1.0, gamma: 8.0, local_steps: 5, rounds: 80, participation: 0.2, seed: 0 }
    }
}

fn signed_label(label: usize) -> f64 {
    if label == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `ḡ / µ`.
pub fn surrogate_optimum(data: &EncodedSet, mu: f64) -> Vec<f64> {
    let mut g = vec![0.0f64; data.hd_dim()];
    for (h, y) in data.iter() {
        let y = signed_label(y);
        g.iter_mut().zip(h).for_each(|(a, &v)| *a += y * v as f64);
    }
    let scale = 1.0 / (data.len() as f64 * mu);
    g.iter_mut().for_each(|a| *a *= scale);
    g
}

/// `F(w) - F(w*)`.
pub fn surrogate_gap(w: &[f64], optimum: &[f64], mu: f64) -> f64 {
    0.5 * mu * w.iter().zip(optimum).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Federated averaging on the surrogate with `η_t = 2/(µ(γ+t))`, `t` counting
/// local steps. Returns the gap before the first round and after each round.
pub fn fedavg_surrogate(data: &EncodedSet, partition: &Partition, cfg: &SurrogateConfig) -> Result<Vec<f64>> {
    if data.num_classes() != 2 {
        return Err(Error::InvalidArgument("surrogate needs a two-class dataset".into()));
    }
    if !(cfg.mu > 0.0 && cfg.gamma > 0.0) || cfg.local_steps == 0 {
        return Err(Error::InvalidArgument("surrogate needs mu, gamma and local_steps positive".into()));
    }
    let schedule = LearningRateSchedule::Decaying { mu: cfg.mu, gamma: cfg.gamma };
    let d = data.hd_dim();
    let opt = surrogate_optimum(data, cfg.mu);
    let mut w = vec![0.0f64; d];
    let mut gaps = vec![surrogate_gap(&w, &opt, cfg.mu)];
    for r in 0..cfg.rounds {
        let clients = sample_clients(partition.num_clients(), cfg.participation, r, cfg.seed)?;
        let weights = partition.renormalized(&clients);
        let mut next = vec![0.0f64; d];
        for (&c, &p) in clients.iter().zip(&weights) {
            let local_idx = partition.client(c);
            let mut local = w.clone();
            if !local_idx.is_empty() {
                let mut rng = rng_from(cfg.seed, &[stream::LOCAL_ORDER, r as u64, c as u64]);
                for j in 0..cfg.local_steps {
                    let eta = schedule.rate(0.0, r * cfg.local_steps + j);
                    let (h, y) = data.sample(local_idx[rng.random_range(0..local_idx.len())]);
                    let y = signed_label(y);
                    local.iter_mut().zip(h).for_each(|(wi, &hi)| *wi -= eta * (cfg.mu * *wi - y * hi as f64));
                }
            }
            next.iter_mut().zip(&local).for_each(|(a, b)| *a += p * b);
        }
        w = next;
        gaps.push(surrogate_gap(&w, &opt, cfg.mu));
    }
    Ok(gaps)
}
