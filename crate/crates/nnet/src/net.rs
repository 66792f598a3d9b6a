use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Activation {
    /// Groups of `group` consecutive inputs reduced to their p-norm.
    Pnorm {
        group: usize,
        p: f64,
    },
    Softmax,
    Identity,
}

impl Activation {
    pub fn output_dim(&self, input: usize) -> usize {
        match self {
            Activation::Pnorm { group, .. } => input / group,
            _ => input,
        }
    }

    fn forward(&self, z: &Array2<f64>) -> Array2<f64> {
        match *self {
            Activation::Identity => z.clone(),
            Activation::Softmax => softmax(z),
            Activation::Pnorm { group, p } => {
                let (n, d) = z.dim();
                let mut out = Array2::zeros((n, d / group));
                for ((r, j), y) in out.indexed_iter_mut() {
                    let g = z.slice(s![r, j * group..(j + 1) * group]);
                    *y = if p == 2.0 {
                        g.iter().map(|x| x * x).sum::<f64>().sqrt()
                    } else {
                        g.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
                    };
                }
                out
            }
        }
    }

    /// Gradient w.r.t. the pre-activation `z` given the gradient w.r.t.
    /// the output `y`.
    fn backward(&self, z: &Array2<f64>, y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        match *self {
            Activation::Identity => dy.clone(),
            Activation::Softmax => {
                let dot = (dy * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                y * &(dy - &dot)
            }
            Activation::Pnorm { group, p } => {
                let mut dz = Array2::zeros(z.dim());
                for ((r, i), g) in dz.indexed_iter_mut() {
                    let j = i / group;
                    let yj = y[[r, j]];
                    // Subgradient 0 where the whole group is zero.
                    if yj > 0.0 {
                        let x = z[[r, i]];
                        let d = if p == 2.0 {
                            x / yj
                        } else {
                            x.signum() * x.abs().powf(p - 1.0) / yj.powf(p - 1.0)
                        };
                        *g = dy[[r, j]] * d;
                    }
                }
                dz
            }
        }
    }
}

fn softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.activation.output_dim(self.weights.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Description of one layer: affine output size and activation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub affine_out: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredNet {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients (or any other per-layer parameter-shaped values).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl LayeredNet {
    /// Random Gaussian initialization with variance `1 / fan_in`. Layers fed
    /// by a p-norm layer get zero-sum weight rows with variance
    /// `2 / fan_in`: p-norm outputs are non-negative, so their common
    /// offset is cancelled and only their spread is propagated.
    pub fn new<R: Rng>(input_dim: usize, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("a net needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut dim = input_dim;
        for (i, spec) in specs.iter().enumerate() {
            if dim == 0 || spec.affine_out == 0 {
                return Err(Error::Config(format!("layer {}: zero dimension", i + 1)));
            }
            let after_pnorm = i > 0 && matches!(specs[i - 1].activation, Activation::Pnorm { .. });
            if let Activation::Pnorm { group, p } = spec.activation {
                if group == 0 || spec.affine_out % group != 0 {
                    return Err(Error::Config(format!(
                        "layer {}: group {group} does not divide {}",
                        i + 1,
                        spec.affine_out
                    )));
                }
                if !(p >= 1.0) {
                    return Err(Error::Config(format!("layer {}: p = {p} < 1", i + 1)));
                }
            }
            let scale = (if after_pnorm { 2.0 } else { 1.0 } / dim as f64).sqrt();
            let normal = Normal::new(0.0, scale).unwrap();
            let mut weights =
                Array2::from_shape_simple_fn((spec.affine_out, dim), || normal.sample(rng));
            if after_pnorm {
                for mut row in weights.rows_mut() {
                    let m = row.mean().unwrap();
                    row -= m;
                }
            }
            layers.push(Layer {
                weights,
                bias: Array1::zeros(spec.affine_out),
                activation: spec.activation,
            });
            dim = spec.activation.output_dim(spec.affine_out);
        }
        Ok(LayeredNet { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Checks that consecutive layer dimensions chain.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("a net needs at least one layer".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.weights.nrows() {
                return Err(Error::Shape(format!("layer {}: bias length", i + 1)));
            }
            if let Activation::Pnorm { group, .. } = l.activation {
                if group == 0 || l.weights.nrows() % group != 0 {
                    return Err(Error::Shape(format!(
                        "layer {}: group does not divide width",
                        i + 1
                    )));
                }
            }
            if i > 0 && self.layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::Shape(format!(
                    "layer {} input does not match layer {} output",
                    i + 1,
                    i
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, net expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Runs every layer; returns (pre-activations, outputs) per layer.
    fn trace(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut out: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let input = out.last().map_or(x.view(), |o| o.view());
            let z = input.dot(&l.weights.t()) + &l.bias;
            let y = l.activation.forward(&z);
            pre.push(z);
            out.push(y);
        }
        (pre, out)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.trace(x).1.pop().unwrap())
    }

    fn check_labels(&self, x: &ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        self.check_input(x)?;
        if labels.len() != x.nrows() || labels.is_empty() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if self.layers.last().unwrap().activation != Activation::Softmax {
            return Err(Error::Config(
                "cross-entropy needs a softmax output layer".into(),
            ));
        }
        let k = self.output_dim();
        if let Some(l) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Shape(format!("label {l} outside {k} classes")));
        }
        Ok(())
    }

    /// Mean cross-entropy of `labels` under the net's posteriors.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        self.check_labels(&x, labels)?;
        let y = self.trace(x).1.pop().unwrap();
        Ok(cross_entropy(&y, labels))
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn backward(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.check_labels(&x, labels)?;
        let (pre, out) = self.trace(x.view());
        let n = x.nrows() as f64;
        let y = out.last().unwrap();
        let loss = cross_entropy(y, labels);

        // Softmax and cross-entropy together: dL/dz = (y - onehot) / n.
        let mut dz = y.clone();
        for (r, &l) in labels.iter().enumerate() {
            dz[[r, l]] -= 1.0;
        }
        dz /= n;

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x.view() } else { out[i - 1].view() };
            let gw = dz.t().dot(&input);
            let gb = dz.sum_axis(Axis(0));
            grads.push((gw, gb));
            if i > 0 {
                let dy = dz.dot(&self.layers[i].weights);
                dz = self.layers[i - 1]
                    .activation
                    .backward(&pre[i - 1], &out[i - 1], &dy);
            }
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.scaled_add(-lr, gw);
            l.bias.scaled_add(-lr, gb);
        }
    }

    /// Parameters flattened layer by layer, weights (row-major) then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn set_flat_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                v.len(),
                self.num_params()
            )));
        }
        let mut it = v.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
        Ok(())
    }
}

fn cross_entropy(y: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -y[[r, l]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n
}

/// Average of same-shaped layers, accumulated in input order. `None`
/// sums and divides by the count; explicit weights must sum to one.
pub fn average_layers(layers: &[&Layer], weights: Option<&[f64]>) -> Layer {
    let mut acc = layers[0].clone();
    acc.weights.fill(0.0);
    acc.bias.fill(0.0);
    for (i, l) in layers.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        Zip::from(&mut acc.weights)
            .and(&l.weights)
            .for_each(|a, &b| *a += w * b);
        Zip::from(&mut acc.bias)
            .and(&l.bias)
            .for_each(|a, &b| *a += w * b);
    }
    if weights.is_none() {
        let n = layers.len() as f64;
        acc.weights /= n;
        acc.bias /= n;
    }
    acc
}
