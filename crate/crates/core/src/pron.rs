//! Pronunciation-variant and word-dependent silence probabilities estimated
//! from alignment counts.
//!
//! Pronunciation ids are 1-based indices into a word's pronunciation list in
//! the lexicon, in the order the lexicon stores them.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{lines, Lexicon, Pronunciation, Word};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Normalization {
    /// Each word's most probable pronunciation gets probability 1.
    #[default]
    Max,
    Sum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilenceCounts {
    pub total: u64,
    pub sil_after: u64,
    pub sil_before: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    /// word -> pron-id -> count
    pub prons: BTreeMap<Word, BTreeMap<usize, u64>>,
    pub words: BTreeMap<Word, SilenceCounts>,
}

impl AlignmentCounts {
    pub fn total_tokens(&self) -> u64 {
        self.words.values().map(|s| s.total).sum()
    }

    pub fn total_sil_after(&self) -> u64 {
        self.words.values().map(|s| s.sil_after).sum()
    }

    pub fn total_sil_before(&self) -> u64 {
        self.words.values().map(|s| s.sil_before).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (w, s) in &self.words {
            if s.sil_after > s.total || s.sil_before > s.total {
                return Err(Error::Validation(format!(
                    "{}: silence count exceeds total {}",
                    w.as_str(),
                    s.total
                )));
            }
        }
        for (w, prons) in &self.prons {
            if prons.contains_key(&0) {
                return Err(Error::Validation(format!(
                    "{}: pron-id 0 (ids are 1-based)",
                    w.as_str()
                )));
            }
            let sum: u64 = prons.values().sum();
            let total = self.words.get(w).map_or(0, |s| s.total);
            if sum != total {
                return Err(Error::Validation(format!(
                    "{}: pronunciation counts sum to {sum}, word total is {total}",
                    w.as_str()
                )));
            }
        }
        Ok(())
    }

    /// Parses the two count files: `word<TAB>pron-id<TAB>count` and
    /// `word<TAB>total<TAB>sil_after<TAB>sil_before`.
    pub fn parse(
        pron_origin: &str,
        pron_bytes: &[u8],
        sil_origin: &str,
        sil_bytes: &[u8],
    ) -> Result<Self> {
        let mut counts = AlignmentCounts::default();
        for (word, fields) in tsv_rows(pron_origin, pron_bytes, 2)? {
            let [id, c] = [fields[0], fields[1]];
            *counts
                .prons
                .entry(word)
                .or_default()
                .entry(id as usize)
                .or_insert(0) += c;
        }
        for (word, fields) in tsv_rows(sil_origin, sil_bytes, 3)? {
            let s = counts.words.entry(word).or_default();
            s.total += fields[0];
            s.sil_after += fields[1];
            s.sil_before += fields[2];
        }
        counts.validate()?;
        Ok(counts)
    }

    pub fn load(pron_path: impl AsRef<Path>, sil_path: impl AsRef<Path>) -> Result<Self> {
        let (p, s) = (pron_path.as_ref(), sil_path.as_ref());
        let pb = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        let sb = std::fs::read(s).map_err(|e| Error::io(s, e))?;
        Self::parse(&p.display().to_string(), &pb, &s.display().to_string(), &sb)
    }
}

fn tsv_rows(origin: &str, bytes: &[u8], numeric: usize) -> Result<Vec<(Word, Vec<u64>)>> {
    let mut rows = Vec::new();
    for (lineno, line) in lines(origin, bytes) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != numeric + 1 {
            return Err(parse_err(format!(
                "expected {} fields, got {}",
                numeric + 1,
                fields.len()
            )));
        }
        let word = Word::new(fields[0]).map_err(|e| parse_err(e.to_string()))?;
        let nums = fields[1..]
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<u64>()
                    .map_err(|_| parse_err(format!("bad count {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((word, nums));
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PronParams {
    pub lambda: f64,
    pub lambda_sil: f64,
    pub normalization: Normalization,
}

impl Default for PronParams {
    fn default() -> Self {
        PronParams {
            lambda: 1.0,
            lambda_sil: 2.0,
            normalization: Normalization::Max,
        }
    }
}

/// Add-λ estimate over one word's pronunciation counts. A word with no
/// observations and λ = 0 falls back to uniform.
pub fn pron_probs(counts: &[u64], lambda: f64, normalization: Normalization) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::Validation("word has no pronunciations".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Validation(format!(
            "smoothing must be >= 0, got {lambda}"
        )));
    }
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + lambda * counts.len() as f64;
    if denom == 0.0 {
        let u = match normalization {
            Normalization::Max => 1.0,
            Normalization::Sum => 1.0 / counts.len() as f64,
        };
        return Ok(vec![u; counts.len()]);
    }
    let numer: Vec<f64> = counts.iter().map(|&c| c as f64 + lambda).collect();
    let norm = match normalization {
        Normalization::Max => numer.iter().cloned().fold(0.0, f64::max),
        Normalization::Sum => denom,
    };
    Ok(numer.into_iter().map(|x| x / norm).collect())
}

/// Silence probability interpolated toward the global rate `prior`.
pub fn silence_prob(count: u64, sil: u64, prior: f64, lambda_sil: f64) -> f64 {
    (sil as f64 + lambda_sil * prior) / (count as f64 + lambda_sil)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordProbs {
    pub prons: Vec<Pronunciation>,
    pub sil_after: f64,
    /// Ratio of the word's smoothed silence-before probability to the
    /// global silence-before rate.
    pub sil_before_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronProbTable {
    pub normalization: Normalization,
    pub sil_after_prior: f64,
    pub sil_before_prior: f64,
    pub words: BTreeMap<Word, WordProbs>,
}

impl PronProbTable {
    /// Lexicon with probabilities attached. Pronunciations whose estimate is
    /// exactly zero (unseen with λ = 0) are left out.
    pub fn to_lexicon(&self, name: &str) -> Lexicon {
        let mut lex = Lexicon::new(name);
        for (w, wp) in &self.words {
            for p in &wp.prons {
                if p.prob.is_some_and(|x| x > 0.0) {
                    let _ = lex.insert(w.clone(), p.clone());
                }
            }
        }
        lex
    }

    /// `word<TAB>p_sil_after<TAB>sil_before_factor` lines.
    pub fn silence_tsv(&self) -> String {
        let mut out = String::new();
        for (w, wp) in &self.words {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                w.as_str(),
                wp.sil_after,
                wp.sil_before_factor
            ));
        }
        out
    }
}

/// Per-word pronunciation probabilities for every lexicon entry.
pub fn estimate_pron_probs(
    counts: &AlignmentCounts,
    lexicon: &Lexicon,
    lambda: f64,
    normalization: Normalization,
) -> Result<BTreeMap<Word, Vec<f64>>> {
    counts.validate()?;
    for (w, ids) in &counts.prons {
        let n = lexicon.get(w).map_or(0, <[Pronunciation]>::len);
        if let Some(&bad) = ids.keys().find(|&&id| id > n) {
            return Err(Error::Validation(format!(
                "{}: pron-id {bad} but the lexicon lists {n} pronunciations",
                w.as_str()
            )));
        }
    }
    let entries: Vec<(&Word, &[Pronunciation])> = lexicon.entries().collect();
    entries
        .par_iter()
        .map(|(w, prons)| {
            let ids = counts.prons.get(*w);
            let c: Vec<u64> = (1..=prons.len())
                .map(|id| ids.and_then(|m| m.get(&id)).copied().unwrap_or(0))
                .collect();
            Ok(((*w).clone(), pron_probs(&c, lambda, normalization)?))
        })
        .collect()
}

/// Smoothed silence-after probability for every word in the counts, plus
/// the global prior.
pub fn estimate_silence_probs(
    counts: &AlignmentCounts,
    lambda_sil: f64,
) -> Result<(f64, BTreeMap<Word, f64>)> {
    let total = counts.total_tokens();
    if total == 0 {
        return Err(Error::Validation(
            "alignment counts contain no tokens".into(),
        ));
    }
    if !(lambda_sil > 0.0) {
        return Err(Error::Validation(format!(
            "silence smoothing must be > 0, got {lambda_sil}"
        )));
    }
    let prior = counts.total_sil_after() as f64 / total as f64;
    let probs = counts
        .words
        .iter()
        .map(|(w, s)| {
            (
                w.clone(),
                silence_prob(s.total, s.sil_after, prior, lambda_sil),
            )
        })
        .collect();
    Ok((prior, probs))
}

pub fn estimate(
    counts: &AlignmentCounts,
    lexicon: &Lexicon,
    params: &PronParams,
) -> Result<PronProbTable> {
    let probs = estimate_pron_probs(counts, lexicon, params.lambda, params.normalization)?;
    let (after_prior, after) = estimate_silence_probs(counts, params.lambda_sil)?;
    let before_prior = counts.total_sil_before() as f64 / counts.total_tokens() as f64;
    let mut words = BTreeMap::new();
    for (w, ps) in probs {
        let prons = lexicon
            .get(&w)
            .unwrap_or_default()
            .iter()
            .zip(&ps)
            .map(|(p, &prob)| Pronunciation {
                phones: p.phones.clone(),
                prob: Some(prob),
            })
            .collect();
        let s = counts.words.get(&w).copied().unwrap_or_default();
        let sil_after = after.get(&w).copied().unwrap_or(after_prior);
        let sil_before_factor = if before_prior > 0.0 {
            silence_prob(s.total, s.sil_before, before_prior, params.lambda_sil) / before_prior
        } else {
            1.0
        };
        words.insert(
            w,
            WordProbs {
                prons,
                sil_after,
                sil_before_factor,
            },
        );
    }
    Ok(PronProbTable {
        normalization: params.normalization,
        sil_after_prior: after_prior,
        sil_before_prior: before_prior,
        words,
    })
}

/// Estimates a table from each successive counts snapshot.
pub fn reestimate(
    snapshots: &[AlignmentCounts],
    lexicon: &Lexicon,
    params: &PronParams,
) -> Result<Vec<PronProbTable>> {
    snapshots
        .iter()
        .map(|c| estimate(c, lexicon, params))
        .collect()
}
