use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lexharm_core::{Error, Result};

use crate::ngram::{Entry, NGramModel, BOS, EOS, UNK};

/// Log10 probability written for `<s>`, which is never predicted.
const LOG_ZERO: f64 = -99.0;

/// Contents of the JSON file written next to an ARPA model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub order: usize,
    pub vocab_size: usize,
    pub ngrams: Vec<usize>,
    pub training_tokens: u64,
    pub smoothing: String,
    pub unk: String,
}

impl ModelInfo {
    pub fn of(model: &NGramModel) -> Self {
        ModelInfo {
            name: model.name.clone(),
            order: model.order(),
            vocab_size: model.vocab().len(),
            ngrams: (1..=model.order()).map(|k| model.num_ngrams(k)).collect(),
            training_tokens: model.training_tokens(),
            smoothing: "witten-bell".into(),
            unk: UNK.into(),
        }
    }
}

pub fn write_arpa(model: &NGramModel) -> String {
    let words: Vec<&str> = model.ids().map(|(_, w)| w).collect();
    let mut out = String::from("\n\\data\\\n");
    for k in 1..=model.order() {
        let _ = writeln!(out, "ngram {k}={}", model.num_ngrams(k));
    }
    for k in 1..=model.order() {
        let _ = write!(out, "\n\\{k}-grams:\n");
        let mut entries: Vec<(&Vec<u32>, &Entry)> = model.grams[k - 1].iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        for (key, e) in entries {
            let lp = if e.prob > 0.0 {
                e.prob.log10()
            } else {
                LOG_ZERO
            };
            let text: Vec<&str> = key.iter().map(|&i| words[i as usize]).collect();
            let _ = write!(out, "{lp}\t{}", text.join(" "));
            if k < model.order() && e.bow != 1.0 {
                let _ = write!(out, "\t{}", e.bow.log10());
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

pub fn read_arpa(name: &str, origin: &str, text: &str) -> Result<NGramModel> {
    let mut declared: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<(Vec<String>, f64, Option<f64>)>> = Vec::new();
    let mut section: Option<usize> = None;
    let mut ended = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "\\data\\" {
            section = Some(0);
            continue;
        }
        if line == "\\end\\" {
            ended = true;
            break;
        }
        if let Some(k) = line
            .strip_prefix('\\')
            .and_then(|s| s.strip_suffix("-grams:"))
        {
            let k: usize = k
                .parse()
                .map_err(|_| parse_err(origin, lineno, "bad section header"))?;
            if k != rows.len() + 1 {
                return Err(parse_err(origin, lineno, format!("unexpected section {k}")));
            }
            rows.push(Vec::new());
            section = Some(k);
            continue;
        }
        match section {
            None => return Err(parse_err(origin, lineno, "content before \\data\\")),
            Some(0) => {
                let n = line
                    .strip_prefix("ngram ")
                    .and_then(|s| s.split_once('='))
                    .and_then(|(_, n)| n.trim().parse().ok())
                    .ok_or_else(|| parse_err(origin, lineno, "bad ngram count line"))?;
                declared.push(n);
            }
            Some(k) => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() < 2 || fields.len() > 3 {
                    return Err(parse_err(
                        origin,
                        lineno,
                        "expected 2 or 3 tab-separated fields",
                    ));
                }
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(origin, lineno, format!("bad number {s:?}")))
                };
                let lp = num(fields[0])?;
                let bow = fields.get(2).map(|s| num(s)).transpose()?;
                let toks: Vec<String> = fields[1].split(' ').map(String::from).collect();
                if toks.len() != k {
                    return Err(parse_err(origin, lineno, format!("expected {k} tokens")));
                }
                rows[k - 1].push((toks, lp, bow));
            }
        }
    }
    if !ended {
        return Err(parse_err(origin, text.lines().count(), "missing \\end\\"));
    }
    if rows.is_empty() || declared.len() != rows.len() {
        return Err(parse_err(origin, 1, "header and sections disagree"));
    }
    for (k, (d, r)) in declared.iter().zip(&rows).enumerate() {
        if *d != r.len() {
            return Err(parse_err(
                origin,
                1,
                format!("{}-grams: header says {d}, found {}", k + 1, r.len()),
            ));
        }
    }
    let unigrams: BTreeSet<&str> = rows[0].iter().map(|(t, _, _)| t[0].as_str()).collect();
    for special in [UNK, BOS, EOS] {
        if !unigrams.contains(special) {
            return Err(parse_err(origin, 1, format!("unigram {special} missing")));
        }
    }
    let words: Vec<String> = unigrams
        .iter()
        .filter(|w| ![UNK, BOS, EOS].contains(w))
        .map(|w| w.to_string())
        .collect();
    let order = rows.len();
    let mut model = NGramModel::from_parts(name.to_string(), order, words, Vec::new(), 0);
    let index: HashMap<&str, u32> = model.ids().map(|(i, w)| (w, i)).collect();
    let mut grams = Vec::with_capacity(order);
    for level in &rows {
        let mut map = HashMap::with_capacity(level.len());
        for (toks, lp, bow) in level {
            let key = toks
                .iter()
                .map(|t| {
                    index
                        .get(t.as_str())
                        .copied()
                        .ok_or_else(|| parse_err(origin, 1, format!("{t:?} is not a unigram")))
                })
                .collect::<Result<Vec<u32>>>()?;
            let prob = if *lp <= LOG_ZERO {
                0.0
            } else {
                10f64.powf(*lp)
            };
            map.insert(
                key,
                Entry {
                    prob,
                    bow: bow.map_or(1.0, |b| 10f64.powf(b)),
                },
            );
        }
        grams.push(map);
    }
    model.grams = grams;
    Ok(model)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (ARPA) and `path.json` (metadata).
pub fn save_model(model: &NGramModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, write_arpa(model)).map_err(|e| Error::io(path, e))?;
    let side = sidecar(path);
    let json = serde_json::to_string_pretty(&ModelInfo::of(model))?;
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Reads an ARPA model; metadata comes from `path.json` when present.
pub fn load_model(path: impl AsRef<Path>) -> Result<NGramModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let side = sidecar(path);
    let info: Option<ModelInfo> = match fs::read_to_string(&side) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(_) => None,
    };
    let name = info.as_ref().map_or(stem, |i| i.name.clone());
    let mut model = read_arpa(&name, &path.display().to_string(), &text)?;
    if let Some(info) = info {
        model.training_tokens = info.training_tokens;
    }
    Ok(model)
}
