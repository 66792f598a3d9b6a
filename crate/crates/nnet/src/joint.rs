use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::net::{average_layers, Activation, LayerSpec, LayeredNet};
use crate::priors::estimate_priors_marginal;
use crate::toy::ToyCorpus;
use crate::train::{derive_seed, parallel_sgd_round, Dataset, SgdConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SharingStrategy {
    ShareAll,
    ShareAllButLast,
    ShareAllButFirst,
    ShareAllButFirstAndLast,
}

impl SharingStrategy {
    pub const ALL: [SharingStrategy; 4] = [
        SharingStrategy::ShareAll,
        SharingStrategy::ShareAllButLast,
        SharingStrategy::ShareAllButFirst,
        SharingStrategy::ShareAllButFirstAndLast,
    ];

    /// Which of `num_layers` layers are kept identical across corpora.
    pub fn mask(self, num_layers: usize) -> Vec<bool> {
        (0..num_layers)
            .map(|i| {
                let first = i == 0;
                let last = i + 1 == num_layers;
                match self {
                    SharingStrategy::ShareAll => true,
                    SharingStrategy::ShareAllButLast => !last,
                    SharingStrategy::ShareAllButFirst => !first,
                    SharingStrategy::ShareAllButFirstAndLast => !first && !last,
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Averaging {
    Uniform,
    /// Corpora weighted by their number of training frames.
    DataSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    pub input_dim: usize,
    /// Affine output width of every p-norm layer.
    pub hidden_dim: usize,
    pub group: usize,
    pub p: f64,
    pub num_layers: usize,
    pub num_classes: usize,
    pub strategy: SharingStrategy,
    pub averaging: Averaging,
    /// Parallel jobs (data shards) per corpus and round.
    pub jobs: usize,
    pub lr: f64,
    pub per_corpus_lr: Option<Vec<f64>>,
    pub steps: usize,
    pub batch: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            input_dim: 20,
            hidden_dim: 100,
            group: 10,
            p: 2.0,
            num_layers: 7,
            num_classes: 6,
            strategy: SharingStrategy::ShareAllButFirstAndLast,
            averaging: Averaging::Uniform,
            jobs: 2,
            lr: 0.004,
            per_corpus_lr: None,
            steps: 20,
            batch: 16,
            iterations: 20,
            seed: 7,
        }
    }
}

impl JointConfig {
    pub fn architecture(&self) -> Result<Vec<LayerSpec>> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be >= 1".into()));
        }
        if self.group == 0 || self.hidden_dim % self.group != 0 {
            return Err(Error::Config(format!(
                "group {} does not divide hidden_dim {}",
                self.group, self.hidden_dim
            )));
        }
        let hidden = LayerSpec {
            affine_out: self.hidden_dim,
            activation: Activation::Pnorm {
                group: self.group,
                p: self.p,
            },
        };
        let mut specs = vec![hidden; self.num_layers - 1];
        specs.push(LayerSpec {
            affine_out: self.num_classes,
            activation: Activation::Softmax,
        });
        Ok(specs)
    }

    fn sgd(&self, corpus: usize) -> SgdConfig {
        SgdConfig {
            lr: self
                .per_corpus_lr
                .as_ref()
                .and_then(|v| v.get(corpus).copied())
                .unwrap_or(self.lr),
            steps: self.steps,
            batch: self.batch,
        }
    }
}

/// One network per corpus with the shared layers kept identical.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCorpusNet {
    pub nets: Vec<LayeredNet>,
    pub strategy: SharingStrategy,
    pub iteration: usize,
}

impl MultiCorpusNet {
    /// Every corpus net starts from the same initialization, with a zero
    /// output layer so that training starts from uniform posteriors.
    pub fn new(cfg: &JointConfig, num_corpora: usize) -> Result<Self> {
        if num_corpora == 0 {
            return Err(Error::Config("need at least one corpus".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = LayeredNet::new(cfg.input_dim, &cfg.architecture()?, &mut rng)?;
        net.layers.last_mut().unwrap().weights.fill(0.0);
        Ok(MultiCorpusNet {
            nets: vec![net; num_corpora],
            strategy: cfg.strategy,
            iteration: 0,
        })
    }

    pub fn shared_mask(&self) -> Vec<bool> {
        self.strategy.mask(self.nets[0].layers.len())
    }

    /// True when every shared layer is bit-identical across corpus nets.
    pub fn shared_layers_equal(&self) -> bool {
        let mask = self.shared_mask();
        self.nets.iter().all(|n| {
            n.layers
                .iter()
                .zip(&self.nets[0].layers)
                .zip(&mask)
                .all(|((a, b), &shared)| !shared || a == b)
        })
    }

    /// SHA-256 over the shared layers' parameters of corpus net `k`.
    pub fn shared_checksum(&self, k: usize) -> String {
        let mut h = Sha256::new();
        for (l, shared) in self.nets[k].layers.iter().zip(self.shared_mask()) {
            if shared {
                for v in l.weights.iter().chain(l.bias.iter()) {
                    h.update(v.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One round of per-corpus model-averaged SGD followed by averaging
    /// the shared layers across corpora and copying the average back.
    /// Shard splits and job seeds depend on the seed and iteration only,
    /// never on which corpus is being trained.
    pub fn joint_iteration(&mut self, data: &[&Dataset], cfg: &JointConfig) -> Result<()> {
        if data.len() != self.nets.len() {
            return Err(Error::Config(format!(
                "{} datasets for {} corpus nets",
                data.len(),
                self.nets.len()
            )));
        }
        let it = self.iteration as u64;
        let split_seed = derive_seed(&[cfg.seed, it, 0]);
        let round_seed = derive_seed(&[cfg.seed, it, 1]);
        let updated = self
            .nets
            .par_iter()
            .zip(data.par_iter())
            .enumerate()
            .map(|(k, (net, d))| {
                let shards = d.shards(cfg.jobs, split_seed)?;
                parallel_sgd_round(net, &shards, &cfg.sgd(k), round_seed)
            })
            .collect::<Result<Vec<_>>>()?;
        self.nets = updated;

        let weights: Option<Vec<f64>> = match cfg.averaging {
            Averaging::Uniform => None,
            Averaging::DataSize => {
                let total: usize = data.iter().map(|d| d.len()).sum();
                Some(data.iter().map(|d| d.len() as f64 / total as f64).collect())
            }
        };
        for (i, shared) in self.shared_mask().into_iter().enumerate() {
            if !shared {
                continue;
            }
            let layers: Vec<_> = self.nets.iter().map(|n| &n.layers[i]).collect();
            let avg = average_layers(&layers, weights.as_deref());
            for n in &mut self.nets {
                n.layers[i] = avg.clone();
            }
        }
        self.iteration += 1;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub loss: Vec<f64>,
    pub mean_loss: f64,
    pub shared_checksum: Vec<String>,
    pub priors: Vec<Vec<f64>>,
}

pub fn metrics(mc: &MultiCorpusNet, data: &[&Dataset]) -> Result<IterationMetrics> {
    let loss = mc
        .nets
        .iter()
        .zip(data)
        .map(|(n, d)| n.loss(d.features.view(), &d.labels))
        .collect::<Result<Vec<_>>>()?;
    let priors = mc
        .nets
        .iter()
        .zip(data)
        .map(|(n, d)| Ok(estimate_priors_marginal(n, d.features.view())?.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(IterationMetrics {
        iteration: mc.iteration,
        mean_loss: loss.iter().sum::<f64>() / loss.len() as f64,
        loss,
        shared_checksum: (0..mc.nets.len()).map(|k| mc.shared_checksum(k)).collect(),
        priors,
    })
}

/// Full experiment: `cfg.iterations` joint iterations over the corpora.
/// `on_metrics` sees the initial state (iteration 0) and every iteration.
pub fn train_joint(
    cfg: &JointConfig,
    corpora: &[ToyCorpus],
    mut on_metrics: impl FnMut(&IterationMetrics),
) -> Result<(MultiCorpusNet, Vec<IterationMetrics>)> {
    for c in corpora {
        if c.data.features.ncols() != cfg.input_dim || c.num_classes != cfg.num_classes {
            return Err(Error::Config(format!(
                "corpus {} has {} inputs / {} classes, config expects {} / {}",
                c.name,
                c.data.features.ncols(),
                c.num_classes,
                cfg.input_dim,
                cfg.num_classes
            )));
        }
    }
    let data: Vec<&Dataset> = corpora.iter().map(|c| &c.data).collect();
    let mut mc = MultiCorpusNet::new(cfg, corpora.len())?;
    let mut log = vec![metrics(&mc, &data)?];
    on_metrics(&log[0]);
    for _ in 0..cfg.iterations {
        mc.joint_iteration(&data, cfg)?;
        let m = metrics(&mc, &data)?;
        on_metrics(&m);
        log.push(m);
    }
    Ok((mc, log))
}

/// Parameters each corpus pays for when `num_corpora` nets share the
/// masked layers: private layers in full plus an equal share of the
/// shared ones.
pub fn params_per_corpus(
    cfg: &JointConfig,
    strategy: SharingStrategy,
    num_corpora: usize,
) -> Result<f64> {
    let specs = cfg.architecture()?;
    let mask = strategy.mask(specs.len());
    let mut dim = cfg.input_dim;
    let mut total = 0.0;
    for (spec, shared) in specs.iter().zip(mask) {
        let n = (spec.affine_out * dim + spec.affine_out) as f64;
        total += if shared { n / num_corpora as f64 } else { n };
        dim = spec.activation.output_dim(spec.affine_out);
    }
    Ok(total)
}

/// Widest hidden layer (a multiple of the group size) whose per-corpus
/// parameter cost fits `budget`. `None` when even one group does not fit.
pub fn max_hidden_dim(
    cfg: &JointConfig,
    strategy: SharingStrategy,
    num_corpora: usize,
    budget: f64,
) -> Result<Option<usize>> {
    let mut best = None;
    let mut h = cfg.group;
    loop {
        let c = JointConfig {
            hidden_dim: h,
            ..cfg.clone()
        };
        if params_per_corpus(&c, strategy, num_corpora)? > budget {
            return Ok(best);
        }
        best = Some(h);
        h += cfg.group;
    }
}
