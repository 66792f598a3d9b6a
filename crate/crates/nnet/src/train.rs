use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{average_layers, LayeredNet};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows, {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature".into()));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Splits into `e` disjoint shards of near-equal size after a seeded
    /// shuffle.
    pub fn shards(&self, e: usize, seed: u64) -> Result<Vec<Dataset>> {
        if e == 0 || e > self.len() {
            return Err(Error::Config(format!(
                "cannot split {} rows into {e} shards",
                self.len()
            )));
        }
        let mut rows: Vec<usize> = (0..self.len()).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let base = self.len() / e;
        let extra = self.len() % e;
        let mut out = Vec::with_capacity(e);
        let mut start = 0;
        for i in 0..e {
            let len = base + usize::from(i < extra);
            out.push(self.select(&rows[start..start + len]));
            start += len;
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    /// Minibatch updates per round.
    pub steps: usize,
    pub batch: usize,
}

/// Combines seed components into one RNG seed (splitmix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// Plain minibatch SGD: batches are consecutive slices of a shuffled order,
/// reshuffled after every pass over the data.
pub fn sgd(net: &mut LayeredNet, data: &Dataset, cfg: &SgdConfig, seed: u64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("empty training data".into()));
    }
    let batch = cfg.batch.clamp(1, data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut pos = 0;
    for _ in 0..cfg.steps {
        if pos + batch > order.len() {
            order.shuffle(&mut rng);
            pos = 0;
        }
        let b = data.select(&order[pos..pos + batch]);
        pos += batch;
        let (_, g) = net.backward(b.features.view(), &b.labels)?;
        net.sgd_step(&g, cfg.lr);
    }
    Ok(())
}

/// Trains one copy of `net` per shard (job `i` seeded from `(seed, i)`)
/// and returns their uniform parameter average.
pub fn parallel_sgd_round(
    net: &LayeredNet,
    shards: &[Dataset],
    cfg: &SgdConfig,
    seed: u64,
) -> Result<LayeredNet> {
    if shards.is_empty() {
        return Err(Error::Config("need at least one shard".into()));
    }
    let copies = shards
        .par_iter()
        .enumerate()
        .map(|(i, shard)| {
            let mut copy = net.clone();
            sgd(&mut copy, shard, cfg, derive_seed(&[seed, i as u64]))?;
            Ok(copy)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(average_nets(&copies, None))
}

/// Layer-wise average of nets with identical architecture.
pub fn average_nets(nets: &[LayeredNet], weights: Option<&[f64]>) -> LayeredNet {
    let layers = (0..nets[0].layers.len())
        .map(|i| {
            let ls: Vec<_> = nets.iter().map(|n| &n.layers[i]).collect();
            average_layers(&ls, weights)
        })
        .collect();
    LayeredNet { layers }
}
