use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lexharm_core::{Error, Result, TranscriptCorpus};

use crate::ngram::NGramModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Validation(format!(
                "weights must be non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
        }
        Ok(MixtureWeights(weights))
    }

    pub fn uniform(k: usize) -> Self {
        MixtureWeights(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Weights rounded to `decimals` places, for display.
    pub fn rounded(&self, decimals: i32) -> Vec<f64> {
        let scale = 10f64.powi(decimals);
        self.0.iter().map(|w| (w * scale).round() / scale).collect()
    }
}

impl TryFrom<Vec<f64>> for MixtureWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixtureWeights::new(v)
    }
}

impl From<MixtureWeights> for Vec<f64> {
    fn from(w: MixtureWeights) -> Self {
        w.0
    }
}

/// Per-token probabilities of `text` under `model`, in corpus order.
pub fn token_probs(model: &NGramModel, text: &TranscriptCorpus) -> Vec<f64> {
    text.utterances()
        .par_iter()
        .map(|u| model.sentence_probs(u.tokens.iter().map(|t| t.as_str())))
        .collect::<Vec<_>>()
        .concat()
}

fn mixture_ll(probs: &[Vec<f64>], weights: &[f64]) -> f64 {
    (0..probs[0].len())
        .map(|t| {
            let p: f64 = probs.iter().zip(weights).map(|(pk, w)| w * pk[t]).sum();
            p.ln()
        })
        .sum()
}

pub fn mixture_perplexity(
    models: &[NGramModel],
    weights: &MixtureWeights,
    text: &TranscriptCorpus,
) -> Result<f64> {
    if models.len() != weights.0.len() {
        return Err(Error::Validation(format!(
            "{} models but {} weights",
            models.len(),
            weights.0.len()
        )));
    }
    if text.is_empty() {
        return Err(Error::Validation(format!(
            "transcript {} is empty",
            text.name
        )));
    }
    let probs: Vec<Vec<f64>> = models.iter().map(|m| token_probs(m, text)).collect();
    Ok((-mixture_ll(&probs, &weights.0) / probs[0].len() as f64).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmStep {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub models: Vec<String>,
    pub weights: MixtureWeights,
    pub weights_rounded: Vec<f64>,
    pub perplexity: f64,
    /// Perplexity of each component alone.
    pub component_perplexity: Vec<f64>,
    pub tokens: usize,
    pub converged: bool,
    /// Step 0 is the uniform start.
    pub steps: Vec<EmStep>,
}

/// EM for the weights of a fixed set of per-token probability streams.
pub fn fit_weights(probs: &[Vec<f64>], tol: f64, max_iter: usize) -> (Vec<f64>, Vec<EmStep>, bool) {
    let k = probs.len();
    let n = probs[0].len();
    let mut w = vec![1.0 / k as f64; k];
    let mut ll = mixture_ll(probs, &w);
    let mut steps = vec![EmStep {
        iteration: 0,
        log_likelihood: ll,
        weights: w.clone(),
    }];
    let mut converged = false;
    for it in 1..=max_iter {
        let mut acc = vec![0.0; k];
        for t in 0..n {
            let joint: Vec<f64> = (0..k).map(|j| w[j] * probs[j][t]).collect();
            let total: f64 = joint.iter().sum();
            for j in 0..k {
                acc[j] += joint[j] / total;
            }
        }
        let sum: f64 = acc.iter().sum();
        let cand: Vec<f64> = acc.into_iter().map(|a| a / sum).collect();
        let next = mixture_ll(probs, &cand);
        // EM never lowers the likelihood; a computed drop is rounding at
        // the optimum, so the previous iterate stands.
        if next < ll {
            converged = true;
            break;
        }
        w = cand;
        steps.push(EmStep {
            iteration: it,
            log_likelihood: next,
            weights: w.clone(),
        });
        let gain = next - ll;
        ll = next;
        if gain < tol {
            converged = true;
            break;
        }
    }
    (w, steps, converged)
}

/// Interpolation weights maximizing held-out likelihood, by EM from the
/// uniform mixture. Stops when an iteration gains less than `tol` nats.
pub fn fit_mixture(
    models: &[NGramModel],
    heldout: &TranscriptCorpus,
    tol: f64,
    max_iter: usize,
) -> Result<MixtureFit> {
    if models.len() < 2 {
        return Err(Error::Validation(
            "a mixture needs at least two models".into(),
        ));
    }
    if heldout.is_empty() {
        return Err(Error::Validation(format!(
            "transcript {} is empty",
            heldout.name
        )));
    }
    let probs: Vec<Vec<f64>> = models.iter().map(|m| token_probs(m, heldout)).collect();
    let n = probs[0].len();
    let (w, steps, converged) = fit_weights(&probs, tol, max_iter);
    let weights = MixtureWeights(w);
    let component_perplexity = probs
        .iter()
        .map(|p| (-p.iter().map(|x| x.ln()).sum::<f64>() / n as f64).exp())
        .collect();
    Ok(MixtureFit {
        models: models.iter().map(|m| m.name.clone()).collect(),
        perplexity: (-mixture_ll(&probs, weights.as_slice()) / n as f64).exp(),
        weights_rounded: weights.rounded(1),
        weights,
        component_perplexity,
        tokens: n,
        converged,
        steps,
    })
}
