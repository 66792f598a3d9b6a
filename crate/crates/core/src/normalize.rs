//! Rule application over lexicons, transcripts and frequency tables, and
//! the top-N overlap measure.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::corpus::{
    Corpus, FrequencyTable, Lexicon, Pronunciation, TranscriptCorpus, Utterance, Word,
};
use crate::rules::{EditRule, RuleSet};
use crate::unicode::VOWEL_MARKS;

/// Output of a rule application.
#[derive(Clone, Debug, PartialEq)]
pub struct Applied<T> {
    pub value: T,
    /// Words (lexicon entries or transcript tokens) removed because every
    /// codepoint was deleted.
    pub dropped: usize,
    /// Distinct words that collapsed onto an already existing form.
    pub merged: usize,
}

pub trait RuleTarget: Sized {
    fn apply_rules(&self, rules: &RuleSet) -> Applied<Self>;
}

/// Applies every rule in one pass (see [`RuleSet`] for the semantics). Lexicon entries that collapse onto the
/// same spelling are merged, keeping the union of their pronunciations.
pub fn apply_rules<T: RuleTarget>(target: &T, rules: &RuleSet) -> Applied<T> {
    target.apply_rules(rules)
}

impl RuleTarget for Lexicon {
    fn apply_rules(&self, rules: &RuleSet) -> Applied<Self> {
        let mut out = Lexicon::new(self.name.clone());
        let mut dropped = 0;
        let mut merged = 0;
        let entries = out.entries_mut();
        for (word, prons) in self.entries() {
            let Some(mapped) = rules.apply_word(word) else {
                dropped += 1;
                continue;
            };
            match entries.get_mut(&mapped) {
                None => {
                    entries.insert(mapped, prons.to_vec());
                }
                Some(existing) => {
                    merged += 1;
                    merge_prons(existing, prons);
                }
            }
        }
        if dropped > 0 {
            log::info!("lexicon {}: dropped {dropped} emptied words", self.name);
        }
        Applied {
            value: out,
            dropped,
            merged,
        }
    }
}

fn merge_prons(existing: &mut Vec<Pronunciation>, incoming: &[Pronunciation]) {
    for p in incoming {
        match existing.iter_mut().find(|e| e.phones == p.phones) {
            Some(e) => {
                e.prob = match (e.prob, p.prob) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                }
            }
            None => existing.push(p.clone()),
        }
    }
}

impl RuleTarget for TranscriptCorpus {
    fn apply_rules(&self, rules: &RuleSet) -> Applied<Self> {
        let mapped: Vec<(Utterance, usize)> = self
            .utterances()
            .par_iter()
            .map(|u| {
                let tokens: Vec<Word> = u
                    .tokens
                    .iter()
                    .filter_map(|t| rules.apply_word(t))
                    .collect();
                let dropped = u.tokens.len() - tokens.len();
                (
                    Utterance {
                        id: u.id.clone(),
                        tokens,
                    },
                    dropped,
                )
            })
            .collect();
        let dropped = mapped.iter().map(|(_, d)| d).sum();
        let mut out = TranscriptCorpus::new(self.name.clone());
        *out.utterances_mut() = mapped.into_iter().map(|(u, _)| u).collect();
        if dropped > 0 {
            log::info!("transcript {}: dropped {dropped} emptied tokens", self.name);
        }
        Applied {
            value: out,
            dropped,
            merged: 0,
        }
    }
}

impl RuleTarget for FrequencyTable {
    /// Same result as applying the rules to the transcripts and recounting.
    fn apply_rules(&self, rules: &RuleSet) -> Applied<Self> {
        let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
        let mut dropped = 0;
        let mut merged = 0;
        for (w, c) in self.iter() {
            match rules.apply_word(w) {
                None => dropped += c as usize,
                Some(m) => match counts.entry(m) {
                    Entry::Vacant(e) => {
                        e.insert(c);
                    }
                    Entry::Occupied(mut e) => {
                        merged += 1;
                        *e.get_mut() += c;
                    }
                },
            }
        }
        Applied {
            value: counts.into_iter().collect(),
            dropped,
            merged,
        }
    }
}

impl RuleTarget for Corpus {
    fn apply_rules(&self, rules: &RuleSet) -> Applied<Self> {
        let lex = self.lexicon.apply_rules(rules);
        let tr = self.transcript.apply_rules(rules);
        Applied {
            value: Corpus::new(lex.value, tr.value),
            dropped: lex.dropped + tr.dropped,
            merged: lex.merged,
        }
    }
}

/// DEL rules for the built-in vowel-mark set.
pub fn vowel_mark_rules() -> RuleSet {
    RuleSet::new(VOWEL_MARKS.iter().map(|&c| EditRule::del(c)).collect())
        .expect("vowel marks are distinct deletions")
}

/// Number of words shared by the two top-`n` lists, and the denominator used
/// for the fraction (`n`, or the shorter list when a vocabulary is smaller than `n`).
pub fn overlap_counts(a: &FrequencyTable, b: &FrequencyTable, n: usize) -> (usize, usize) {
    let top_a = a.top_n(n);
    let top_b = b.top_n(n);
    let set_b: BTreeSet<&Word> = top_b.words().collect();
    let shared = top_a.words().filter(|w| set_b.contains(w)).count();
    (shared, top_a.entries.len().min(top_b.entries.len()))
}

/// Fraction of the top-`n` words the two frequency tables share.
pub fn overlap(a: &FrequencyTable, b: &FrequencyTable, n: usize, strip_vowels: bool) -> f64 {
    let (shared, denom) = if strip_vowels {
        let marks = vowel_mark_rules();
        overlap_counts(
            &a.apply_rules(&marks).value,
            &b.apply_rules(&marks).value,
            n,
        )
    } else {
        overlap_counts(a, b, n)
    };
    if denom == 0 {
        0.0
    } else {
        shared as f64 / denom as f64
    }
}
