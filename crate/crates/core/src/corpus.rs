//! Lexicons, transcripts and word-frequency statistics.
//!
//! Words are compared as raw codepoint sequences. No Unicode normalization
//! form is applied anywhere in this module; two spellings that render the
//! same but differ in codepoints are different words.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unicode::char_name;

/// A written word: a non-empty codepoint sequence without whitespace.
///
/// Ordering is lexicographic on codepoints (UTF-8 byte order agrees with
/// codepoint order, so the derived `Ord` on the inner string is exactly that).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(String);

impl Word {
    pub fn new(s: impl Into<String>) -> Result<Self> {
        let s = s.into();
        if s.is_empty() {
            return Err(Error::InvalidWord {
                word: s,
                reason: "empty",
            });
        }
        if s.chars().any(char::is_whitespace) {
            return Err(Error::InvalidWord {
                word: s,
                reason: "contains whitespace",
            });
        }
        Ok(Word(s))
    }

    /// Builds a word from codepoints, returning `None` when the result would
    /// be empty.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Option<Self> {
        let s: String = chars.into_iter().collect();
        if s.is_empty() {
            None
        } else {
            debug_assert!(!s.chars().any(char::is_whitespace));
            Some(Word(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn chars(&self) -> std::str::Chars<'_> {
        self.0.chars()
    }

    pub fn codepoints(&self) -> Vec<char> {
        self.0.chars().collect()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Word::new(s)
    }
}

impl TryFrom<&str> for Word {
    type Error = Error;
    fn try_from(s: &str) -> Result<Self> {
        Word::new(s)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pronunciation {
    pub phones: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
}

impl Pronunciation {
    pub fn new(phones: Vec<String>) -> Self {
        Pronunciation { phones, prob: None }
    }

    pub fn from_str_phones(phones: &str) -> Self {
        Pronunciation::new(phones.split_whitespace().map(str::to_string).collect())
    }
}

/// Vocabulary with pronunciations. Each `(word, phones)` pair occurs once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    pub name: String,
    entries: BTreeMap<Word, Vec<Pronunciation>>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>) -> Self {
        Lexicon {
            name: name.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Adds a pronunciation; returns `false` when the word already has one
    /// with the same phones (the existing entry is kept).
    pub fn insert(&mut self, word: Word, pron: Pronunciation) -> Result<bool> {
        if pron.phones.is_empty() {
            return Err(Error::Validation(format!("empty pronunciation for {word}")));
        }
        let prons = self.entries.entry(word).or_default();
        if prons.iter().any(|p| p.phones == pron.phones) {
            return Ok(false);
        }
        prons.push(pron);
        Ok(true)
    }

    pub fn get(&self, word: &Word) -> Option<&[Pronunciation]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.entries.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Word, &[Pronunciation])> {
        self.entries.iter().map(|(w, p)| (w, p.as_slice()))
    }

    pub fn num_words(&self) -> usize {
        self.entries.len()
    }

    pub fn num_pronunciations(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the tab-separated lexicon format. Returns the lexicon and the
    /// number of duplicate lines that were collapsed.
    pub fn parse(name: impl Into<String>, origin: &str, bytes: &[u8]) -> Result<(Self, usize)> {
        let mut lexicon = Lexicon::new(name);
        let mut duplicates = 0;
        for (lineno, line) in lines(origin, bytes) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: lineno,
                message,
            };
            if fields.len() < 2 {
                return Err(parse_err("missing tab separator".into()));
            }
            if fields.len() > 3 {
                return Err(parse_err(format!(
                    "expected 2 or 3 fields, got {}",
                    fields.len()
                )));
            }
            let word = Word::new(fields[0]).map_err(|e| parse_err(e.to_string()))?;
            let mut pron = Pronunciation::from_str_phones(fields[1]);
            if pron.phones.is_empty() {
                return Err(parse_err("empty pronunciation".into()));
            }
            if let Some(p) = fields.get(2) {
                let prob: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad probability {p:?}")))?;
                if !(prob > 0.0 && prob <= 1.0) {
                    return Err(parse_err(format!("probability {prob} outside (0, 1]")));
                }
                pron.prob = Some(prob);
            }
            if !lexicon.insert(word, pron)? {
                duplicates += 1;
            }
        }
        Ok((lexicon, duplicates))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, prons) in &self.entries {
            for pron in prons {
                out.push_str(word.as_str());
                out.push('\t');
                out.push_str(&pron.phones.join(" "));
                if let Some(p) = pron.prob {
                    out.push('\t');
                    out.push_str(&p.to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    pub(crate) fn entries_mut(&mut self) -> &mut BTreeMap<Word, Vec<Pronunciation>> {
        &mut self.entries
    }
}

/// Loads a lexicon file; the corpus label is the file stem.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (lexicon, duplicates) = Lexicon::parse(stem(path), &path.display().to_string(), &bytes)?;
    if duplicates > 0 {
        log::warn!(
            "{}: collapsed {duplicates} duplicate (word, pronunciation) lines",
            path.display()
        );
    }
    Ok(lexicon)
}

pub fn save_lexicon(lexicon: &Lexicon, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), lexicon.to_text().as_bytes())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<Word>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranscriptCorpus {
    pub name: String,
    utterances: Vec<Utterance>,
}

impl TranscriptCorpus {
    pub fn new(name: impl Into<String>) -> Self {
        TranscriptCorpus {
            name: name.into(),
            utterances: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, tokens: Vec<Word>) -> Result<()> {
        let id = id.into();
        if id.is_empty() || id.contains(['\t', '\n']) {
            return Err(Error::Validation(format!("bad utterance id {id:?}")));
        }
        if self.utterances.iter().any(|u| u.id == id) {
            return Err(Error::Validation(format!("duplicate utterance id {id:?}")));
        }
        self.utterances.push(Utterance { id, tokens });
        Ok(())
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn num_tokens(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn parse(name: impl Into<String>, origin: &str, bytes: &[u8]) -> Result<Self> {
        let mut corpus = TranscriptCorpus::new(name);
        let mut seen = std::collections::HashSet::new();
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
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("missing tab separator".into()))?;
            if id.is_empty() {
                return Err(parse_err("empty utterance id".into()));
            }
            if !seen.insert(id.to_string()) {
                return Err(parse_err(format!("duplicate utterance id {id:?}")));
            }
            let tokens = if rest.is_empty() {
                Vec::new()
            } else {
                rest.split(' ')
                    .map(|t| Word::new(t).map_err(|e| parse_err(e.to_string())))
                    .collect::<Result<Vec<_>>>()?
            };
            corpus.utterances.push(Utterance {
                id: id.to_string(),
                tokens,
            });
        }
        Ok(corpus)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for utt in &self.utterances {
            out.push_str(&utt.id);
            out.push('\t');
            let tokens: Vec<&str> = utt.tokens.iter().map(Word::as_str).collect();
            out.push_str(&tokens.join(" "));
            out.push('\n');
        }
        out
    }

    pub(crate) fn utterances_mut(&mut self) -> &mut Vec<Utterance> {
        &mut self.utterances
    }
}

pub fn load_transcript(path: impl AsRef<Path>) -> Result<TranscriptCorpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TranscriptCorpus::parse(stem(path), &path.display().to_string(), &bytes)
}

pub fn save_transcript(corpus: &TranscriptCorpus, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), corpus.to_text().as_bytes())
}

/// A lexicon together with the transcripts its word frequencies come from.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub lexicon: Lexicon,
    pub transcript: TranscriptCorpus,
}

impl Corpus {
    pub fn new(lexicon: Lexicon, transcript: TranscriptCorpus) -> Self {
        Corpus {
            lexicon,
            transcript,
        }
    }

    pub fn name(&self) -> &str {
        &self.lexicon.name
    }

    /// Token frequencies from the transcripts. With `headword_fallback`
    /// every lexicon headword additionally contributes one count, so words
    /// never seen in transcripts still rank (below any observed word).
    pub fn frequencies(&self, headword_fallback: bool) -> FrequencyTable {
        let mut table = word_frequencies(&self.transcript);
        if headword_fallback {
            for w in self.lexicon.words() {
                table.add(w.clone(), 1);
            }
        }
        table
    }
}

/// Word counts. `total` always equals the sum of the counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<Word, u64>,
    total: u64,
}

/// Result of [`FrequencyTable::top_n`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopN {
    pub entries: Vec<(Word, u64)>,
    /// Fraction of the table's total mass covered by `entries`.
    pub mass: f64,
}

impl TopN {
    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.entries.iter().map(|(w, _)| w)
    }
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: Word, count: u64) {
        if count == 0 {
            self.counts.entry(word).or_insert(0);
            return;
        }
        *self.counts.entry(word).or_insert(0) += count;
        self.total += count;
    }

    pub fn count(&self, word: &Word) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, u64)> {
        self.counts.iter().map(|(w, c)| (w, *c))
    }

    /// All words by descending count, ties broken by codepoint order.
    pub fn ranked(&self) -> Vec<(Word, u64)> {
        let mut ranked: Vec<(Word, u64)> =
            self.counts.iter().map(|(w, c)| (w.clone(), *c)).collect();
        // BTreeMap iteration is already codepoint-ordered and the sort is stable.
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        ranked
    }

    /// The `n` most frequent words. `n` must be at least 1.
    pub fn top_n(&self, n: usize) -> TopN {
        assert!(n >= 1, "top_n requires n >= 1");
        let mut entries = self.ranked();
        entries.truncate(n);
        let covered: u64 = entries.iter().map(|(_, c)| c).sum();
        let mass = if self.total == 0 {
            0.0
        } else {
            covered as f64 / self.total as f64
        };
        TopN { entries, mass }
    }

    /// Codepoint occurrence counts weighted by word frequency.
    pub fn codepoint_mass(&self) -> BTreeMap<char, u64> {
        let mut mass = BTreeMap::new();
        for (w, c) in &self.counts {
            for ch in w.chars() {
                *mass.entry(ch).or_insert(0) += c;
            }
        }
        mass
    }

    /// `word<TAB>count` lines in rank order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, c) in self.ranked() {
            out.push_str(w.as_str());
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(origin: &str, bytes: &[u8]) -> Result<Self> {
        let mut table = FrequencyTable::new();
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
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("missing tab separator".into()))?;
            let word = Word::new(w).map_err(|e| parse_err(e.to_string()))?;
            let count: u64 = c
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad count {c:?}")))?;
            table.add(word, count);
        }
        Ok(table)
    }
}

impl FromIterator<(Word, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (Word, u64)>>(iter: I) -> Self {
        let mut table = FrequencyTable::new();
        for (w, c) in iter {
            table.add(w, c);
        }
        table
    }
}

/// Counts every token occurrence in the transcripts.
pub fn word_frequencies(corpus: &TranscriptCorpus) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for utt in corpus.utterances() {
        for tok in &utt.tokens {
            table.add(tok.clone(), 1);
        }
    }
    table
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodepointStat {
    pub count: u64,
    pub name: String,
}

/// Occurrences of every codepoint across the lexicon's headwords.
pub fn codepoint_inventory(lexicon: &Lexicon) -> BTreeMap<char, CodepointStat> {
    let mut counts: BTreeMap<char, u64> = BTreeMap::new();
    for w in lexicon.words() {
        for c in w.chars() {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|(c, count)| {
            (
                c,
                CodepointStat {
                    count,
                    name: char_name(c),
                },
            )
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Splits into lines (1-based numbering), decoding each as UTF-8 and
/// stripping a trailing `\r`.
pub(crate) fn lines<'a>(
    origin: &'a str,
    bytes: &'a [u8],
) -> impl Iterator<Item = (usize, Result<&'a str>)> + 'a {
    let bytes = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let empty = bytes.is_empty();
    bytes
        .split(|b| *b == b'\n')
        .enumerate()
        .filter(move |_| !empty)
        .map(move |(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            let line = std::str::from_utf8(raw).map_err(|_| Error::Encoding {
                path: origin.to_string(),
                line: i + 1,
            });
            (i + 1, line)
        })
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}
