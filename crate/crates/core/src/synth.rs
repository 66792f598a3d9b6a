//! Seeded synthetic corpora in a Pashto-like alphabet, for fixtures and
//! end-to-end checks of the mining loop.
//!
//! The phone set of [`sample_g2p`] is invented; it only has to make
//! lookalike letters sound alike.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Lexicon, Pronunciation, TranscriptCorpus, Word};
use crate::g2p::G2pTable;
use crate::normalize::apply_rules;
use crate::rules::{EditRule, RuleSet};

pub const KAF: char = '\u{0643}';
pub const KEHEH: char = '\u{06A9}';
pub const KASRA: char = '\u{0650}';
pub const FARSI_YEH: char = '\u{06CC}';
pub const YEH: char = '\u{064A}';
pub const ALEF_MAKSURA: char = '\u{0649}';
pub const ALEF: char = '\u{0627}';
pub const ALEF_HAMZA_ABOVE: char = '\u{0623}';
pub const ZWNJ: char = '\u{200C}';
pub const FATHATAN: char = '\u{064B}';
pub const KASRATAN: char = '\u{064D}';
pub const GAF: char = '\u{06AF}';
pub const KAF_WITH_RING: char = '\u{06AB}';

/// Base letters words are drawn from, with their invented phones.
const LETTERS: &[(char, &str)] = &[
    ('\u{0627}', "aa"),
    ('\u{0628}', "b"),
    ('\u{067E}', "p"),
    ('\u{062A}', "t"),
    ('\u{067C}', "tt"),
    ('\u{062C}', "j"),
    ('\u{0686}', "ch"),
    ('\u{062D}', "h"),
    ('\u{062E}', "x"),
    ('\u{062F}', "d"),
    ('\u{0689}', "dd"),
    ('\u{0631}', "r"),
    ('\u{0693}', "rr"),
    ('\u{0632}', "z"),
    ('\u{0633}', "s"),
    ('\u{0634}', "sh"),
    ('\u{069A}', "ssh"),
    ('\u{0639}', "q"),
    ('\u{0641}', "f"),
    ('\u{0642}', "kk"),
    ('\u{0643}', "k"),
    ('\u{06AF}', "g"),
    ('\u{0644}', "l"),
    ('\u{0645}', "m"),
    ('\u{0646}', "n"),
    ('\u{0648}', "w"),
    ('\u{0647}', "hh"),
    ('\u{06CC}', "y"),
    ('\u{06D0}', "e"),
    ('\u{0623}', "a"),
];

/// Sample grapheme table covering [`LETTERS`], their common lookalike
/// variants, vowel marks and ZWNJ (silent).
pub fn sample_g2p() -> G2pTable {
    let mut t = G2pTable::new("sample");
    for (c, p) in LETTERS {
        t.add_rule(c.to_string(), vec![p.to_string()]).unwrap();
    }
    let extra: &[(char, &[&str])] = &[
        (KEHEH, &["k"]),
        (KAF_WITH_RING, &["g"]),
        (YEH, &["y"]),
        (ALEF_MAKSURA, &["y"]),
        ('\u{06CD}', &["y"]), // yeh with tail
        ('\u{0626}', &["y"]), // yeh with hamza above
        ('\u{064E}', &["a"]), // fatha
        (KASRA, &["i"]),
        ('\u{064F}', &["u"]), // damma
        (FATHATAN, &["an"]),
        (KASRATAN, &["in"]),
        (ZWNJ, &[]),
    ];
    for (c, p) in extra {
        t.add_rule(c.to_string(), p.iter().map(|s| s.to_string()).collect())
            .unwrap();
    }
    t
}

#[derive(Clone, Debug)]
pub struct SynthParams {
    pub vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of a kasra after a letter.
    pub kasra_rate: f64,
    /// Probability of a ZWNJ after a non-final letter.
    pub zwnj_rate: f64,
    /// Count of the most frequent word; rank `r` gets `scale / r + 1`.
    pub zipf_scale: u64,
    pub utterance_len: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            vocab: 5000,
            min_len: 2,
            max_len: 6,
            kasra_rate: 0.12,
            zwnj_rate: 0.04,
            zipf_scale: 5000,
            utterance_len: 12,
            seed: 7,
        }
    }
}

/// Generates a lexicon of `vocab` distinct words with pronunciations from
/// [`sample_g2p`], and transcripts with Zipfian word counts.
pub fn synthetic_corpus(name: &str, params: &SynthParams) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(params.vocab);
    while words.len() < params.vocab {
        let len = rng.gen_range(params.min_len..=params.max_len);
        let mut s = String::new();
        for i in 0..len {
            s.push(LETTERS[rng.gen_range(0..LETTERS.len())].0);
            if rng.gen_bool(params.kasra_rate) {
                s.push(KASRA);
            }
            if i + 1 < len && rng.gen_bool(params.zwnj_rate) {
                s.push(ZWNJ);
            }
        }
        if seen.insert(s.clone()) {
            words.push(Word::new(s).expect("generated words have no whitespace"));
        }
    }

    let g2p = sample_g2p();
    let mut lexicon = Lexicon::new(name);
    for w in &words {
        let phones = g2p.convert(w).expect("sample table covers the alphabet");
        lexicon
            .insert(w.clone(), Pronunciation::new(phones))
            .unwrap();
    }

    let mut tokens = Vec::new();
    for (rank, w) in words.iter().enumerate() {
        let count = params.zipf_scale / (rank as u64 + 1) + 1;
        tokens.extend(std::iter::repeat_n(w.clone(), count as usize));
    }
    tokens.shuffle(&mut rng);
    let mut transcript = TranscriptCorpus::new(name);
    for (i, chunk) in tokens.chunks(params.utterance_len.max(1)).enumerate() {
        transcript
            .push(format!("{name}_{i:06}"), chunk.to_vec())
            .unwrap();
    }
    Corpus::new(lexicon, transcript)
}

/// Copy of `corpus` with `rules` applied to lexicon and transcripts, under a new name.
pub fn inject(corpus: &Corpus, rules: &RuleSet, name: &str) -> Corpus {
    let mut out = apply_rules(corpus, rules).value;
    out.lexicon.name = name.to_string();
    out.transcript.name = name.to_string();
    out
}

/// Five disjoint spelling confusions modeled on observed rule identities:
/// Kaf written as Keheh, Farsi Yeh as Yeh, Alef with Hamza as plain Alef,
/// and dropped Kasra and ZWNJ.
pub fn standard_confusions() -> RuleSet {
    RuleSet::new(vec![
        EditRule::sub(KAF, KEHEH).unwrap(),
        EditRule::del(KASRA),
        EditRule::sub(FARSI_YEH, YEH).unwrap(),
        EditRule::sub(ALEF_HAMZA_ABOVE, ALEF).unwrap(),
        EditRule::del(ZWNJ),
    ])
    .unwrap()
}
