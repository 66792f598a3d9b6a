//! Checkpoint layout: 8-byte little-endian header length, the JSON header,
//! then every corpus net's parameters as little-endian f64 in
//! [`LayeredNet::flat_params`] order.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{MultiCorpusNet, SharingStrategy};
use crate::net::{Activation, Layer, LayeredNet};

const FORMAT: &str = "lexharm-nnet-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub input: usize,
    pub affine_out: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub strategy: SharingStrategy,
    pub iteration: usize,
    pub corpora: usize,
    pub layers: Vec<LayerShape>,
}

pub fn encode(mc: &MultiCorpusNet) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format: FORMAT.into(),
        strategy: mc.strategy,
        iteration: mc.iteration,
        corpora: mc.nets.len(),
        layers: mc.nets[0]
            .layers
            .iter()
            .map(|l| LayerShape {
                input: l.input_dim(),
                affine_out: l.weights.nrows(),
                activation: l.activation,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + 8 * mc.nets.len() * mc.nets[0].num_params());
    out.extend((json.len() as u64).to_le_bytes());
    out.extend(json);
    for net in &mc.nets {
        for v in net.flat_params() {
            out.extend(v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, MultiCorpusNet)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let len = bytes
        .get(..8)
        .ok_or_else(|| bad("truncated header length"))?;
    let len = u64::from_le_bytes(len.try_into().unwrap()) as usize;
    let json = bytes
        .get(8..8 + len)
        .ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(json)?;
    if header.format != FORMAT {
        return Err(bad(&format!("unknown format {:?}", header.format)));
    }
    let template = LayeredNet {
        layers: header
            .layers
            .iter()
            .map(|s| Layer {
                weights: Array2::zeros((s.affine_out, s.input)),
                bias: Array1::zeros(s.affine_out),
                activation: s.activation,
            })
            .collect(),
    };
    template.validate()?;
    let body = &bytes[8 + len..];
    let per_net = template.num_params();
    if body.len() != 8 * per_net * header.corpora {
        return Err(bad(&format!(
            "expected {} parameter bytes, found {}",
            8 * per_net * header.corpora,
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let nets = values
        .chunks(per_net.max(1))
        .take(header.corpora)
        .map(|chunk| {
            let mut n = template.clone();
            n.set_flat_params(chunk)?;
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    let mc = MultiCorpusNet {
        nets,
        strategy: header.strategy,
        iteration: header.iteration,
    };
    Ok((header, mc))
}

pub fn save_checkpoint(mc: &MultiCorpusNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.into(),
            source: e,
        })?;
    }
    fs::write(path, encode(mc)?).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CheckpointHeader, MultiCorpusNet)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    decode(&bytes)
}
