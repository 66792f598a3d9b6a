//! Synthetic stand-ins for speech corpora: every corpus observes the same
//! latent classes through its own input transform and its own label
//! numbering.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::{derive_seed, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySpec {
    pub corpora: usize,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub classes: usize,
    pub frames: usize,
    /// Standard deviation of the latent noise around each class prototype.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            corpora: 3,
            input_dim: 20,
            latent_dim: 8,
            classes: 6,
            frames: 300,
            noise: 0.5,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyCorpus {
    pub name: String,
    pub data: Dataset,
    pub num_classes: usize,
    /// `permutation[c]` is this corpus's label for latent class `c`.
    pub permutation: Vec<usize>,
}

pub fn toy_corpora(spec: &ToySpec) -> Result<Vec<ToyCorpus>> {
    if spec.corpora == 0
        || spec.input_dim == 0
        || spec.latent_dim == 0
        || spec.classes < 2
        || spec.frames == 0
    {
        return Err(Error::Config(format!("degenerate toy spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos = Array2::from_shape_simple_fn((spec.classes, spec.latent_dim), || {
        2.0 * {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }
    });
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mix = Normal::new(0.0, (1.0 / spec.latent_dim as f64).sqrt()).unwrap();
    let names = ["A", "B", "T"];
    (0..spec.corpora)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, k as u64 + 1]));
            let transform = Array2::from_shape_simple_fn((spec.input_dim, spec.latent_dim), || {
                mix.sample(&mut rng)
            });
            let offset = Array1::from_shape_simple_fn(spec.input_dim, || {
                0.5 * {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                }
            });
            let mut permutation: Vec<usize> = (0..spec.classes).collect();
            if k > 0 {
                permutation.shuffle(&mut rng);
            }
            let mut features = Array2::zeros((spec.frames, spec.input_dim));
            let mut labels = Vec::with_capacity(spec.frames);
            for mut row in features.rows_mut() {
                let c = rng.gen_range(0..spec.classes);
                let z = Array1::from_shape_fn(spec.latent_dim, |j| {
                    protos[[c, j]] + noise.sample(&mut rng)
                });
                row.assign(&(transform.dot(&z) + &offset));
                labels.push(permutation[c]);
            }
            Ok(ToyCorpus {
                name: names
                    .get(k)
                    .map_or_else(|| format!("C{k}"), |s| s.to_string()),
                data: Dataset::new(features, labels)?,
                num_classes: spec.classes,
                permutation,
            })
        })
        .collect()
}
