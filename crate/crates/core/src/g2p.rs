//! Table-driven grapheme-to-phoneme conversion.
//!
//! Conversion is greedy longest-match from left to right: at each position
//! the longest grapheme sequence with a rule wins, its phones are emitted
//! and the cursor advances past it. A rule may map to no phones at all
//! (silent letters, vowel marks).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Lexicon, Word};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct G2pTable {
    pub name: String,
    rules: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
    longest: usize,
}

impl G2pTable {
    pub fn new(name: impl Into<String>) -> Self {
        G2pTable {
            name: name.into(),
            rules: Vec::new(),
            index: HashMap::new(),
            longest: 0,
        }
    }

    pub fn add_rule(&mut self, graphemes: impl Into<String>, phones: Vec<String>) -> Result<()> {
        let graphemes = graphemes.into();
        if graphemes.is_empty() {
            return Err(Error::Validation("empty grapheme sequence".into()));
        }
        if self.index.contains_key(&graphemes) {
            return Err(Error::Validation(format!(
                "duplicate grapheme sequence {graphemes:?}"
            )));
        }
        self.longest = self.longest.max(graphemes.chars().count());
        self.index.insert(graphemes.clone(), self.rules.len());
        self.rules.push((graphemes, phones));
        Ok(())
    }

    /// Builds a table from `(graphemes, "phone phone ...")` pairs.
    pub fn from_pairs<'a>(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut table = G2pTable::new(name);
        for (g, p) in pairs {
            table.add_rule(g, p.split_whitespace().map(str::to_string).collect())?;
        }
        Ok(table)
    }

    pub fn rules(&self) -> &[(String, Vec<String>)] {
        &self.rules
    }

    pub fn convert(&self, word: &Word) -> Result<Vec<String>> {
        let chars = word.codepoints();
        let mut phones = Vec::new();
        let mut pos = 0;
        let mut key = String::new();
        'outer: while pos < chars.len() {
            let max = self.longest.min(chars.len() - pos);
            for len in (1..=max).rev() {
                key.clear();
                key.extend(&chars[pos..pos + len]);
                if let Some(&i) = self.index.get(&key) {
                    phones.extend(self.rules[i].1.iter().cloned());
                    pos += len;
                    continue 'outer;
                }
            }
            return Err(Error::Conversion {
                word: word.to_string(),
                codepoint: chars[pos],
                offset: pos,
            });
        }
        Ok(phones)
    }

    /// Headwords the table cannot convert.
    pub fn unconvertible<'a>(&self, lexicon: &'a Lexicon) -> Vec<&'a Word> {
        lexicon
            .words()
            .filter(|w| self.convert(w).is_err())
            .collect()
    }

    /// Parses `graphemes<TAB>phone phone ...` lines; the phone field may be empty.
    pub fn parse(name: impl Into<String>, origin: &str, text: &str) -> Result<Self> {
        let mut table = G2pTable::new(name);
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let (g, p) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("missing tab separator".into()))?;
            table
                .add_rule(g, p.split_whitespace().map(str::to_string).collect())
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        self.rules
            .iter()
            .map(|(g, p)| format!("{g}\t{}\n", p.join(" ")))
            .collect()
    }
}

pub fn load_g2p(path: impl AsRef<Path>) -> Result<G2pTable> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|b| **b == b'\n')
            .count()
            + 1;
        Error::Encoding {
            path: path.display().to_string(),
            line,
        }
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    G2pTable::parse(name, &path.display().to_string(), &text)
}
