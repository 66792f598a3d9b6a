use ndarray::{Array1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::net::LayeredNet;

/// Class priors as the mean posterior over `data`.
pub fn estimate_priors_marginal(net: &LayeredNet, data: ArrayView2<f64>) -> Result<Array1<f64>> {
    if data.nrows() == 0 {
        return Err(Error::Shape("no frames to marginalize over".into()));
    }
    marginalize(net.forward(data)?.view())
}

/// Mean of per-frame posterior rows.
pub fn marginalize(posteriors: ArrayView2<f64>) -> Result<Array1<f64>> {
    posteriors
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::Shape("no frames to marginalize over".into()))
}

/// Label histogram with `add_k` added to every class, normalized. With no
/// labels and `add_k = 0` the result is uniform.
pub fn estimate_priors_alignment(
    labels: &[usize],
    num_classes: usize,
    add_k: f64,
) -> Result<Vec<f64>> {
    if num_classes == 0 {
        return Err(Error::Config("need at least one class".into()));
    }
    if !(add_k >= 0.0) {
        return Err(Error::Config(format!(
            "smoothing must be >= 0, got {add_k}"
        )));
    }
    let mut counts = vec![add_k; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::Shape(format!(
                "label {l} outside {num_classes} classes"
            )));
        }
        counts[l] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Ok(vec![1.0 / num_classes as f64; num_classes]);
    }
    Ok(counts.into_iter().map(|c| c / total).collect())
}
