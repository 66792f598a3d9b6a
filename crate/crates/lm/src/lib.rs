//! N-gram language models over transcript corpora.
//!
//! Models are Witten-Bell interpolated and stored the way an ARPA file
//! stores them: a probability per seen n-gram plus a backoff weight per
//! history. Every model has its own closed vocabulary plus `<unk>`.

mod arpa;
mod mixture;
mod ngram;

pub use arpa::{load_model, read_arpa, save_model, write_arpa, ModelInfo};
pub use mixture::{
    fit_mixture, fit_weights, mixture_perplexity, token_probs, EmStep, MixtureFit, MixtureWeights,
};
pub use ngram::{perplexity, train_ngram, NGramModel, BOS, EOS, UNK};
