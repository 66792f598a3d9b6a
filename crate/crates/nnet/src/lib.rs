//! Feedforward p-norm networks trained with model-averaged SGD, and joint
//! training of one network per corpus with a configurable set of layers
//! kept identical across corpora.

pub mod checkpoint;
mod error;
pub mod joint;
pub mod net;
pub mod priors;
pub mod toy;
pub mod train;

pub use error::{Error, Result};
pub use joint::{
    max_hidden_dim, params_per_corpus, train_joint, Averaging, IterationMetrics, JointConfig,
    MultiCorpusNet, SharingStrategy,
};
pub use net::{Activation, Gradients, Layer, LayerSpec, LayeredNet};
pub use priors::{estimate_priors_alignment, estimate_priors_marginal, marginalize};
pub use toy::{toy_corpora, ToyCorpus, ToySpec};
pub use train::{parallel_sgd_round, sgd, Dataset, SgdConfig};
