//! Codepoint rewrite rules and rule sets.
//!
//! A rule set maps each source codepoint to another codepoint (SUB) or to
//! nothing (DEL), applied simultaneously in a single pass: a target that is
//! itself a source is not rewritten again. Sources are unique and the SUB
//! edges form no cycle. Sets whose targets are never sources (see
//! [`RuleSet::closed`]) are idempotent under application.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{write_file, Word};
use crate::error::{Error, Result};
use crate::unicode::{char_name, format_codepoint, parse_codepoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleKind {
    Del,
    Sub,
}

/// Which pairing channel produced the evidence for a rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Char,
    Phone,
    Both,
}

impl Channel {
    pub fn merge(self, other: Channel) -> Channel {
        if self == other {
            self
        } else {
            Channel::Both
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RuleStatus {
    #[default]
    Candidate,
    Accepted,
    Rejected,
}

/// Stable identifier: `SUB:U+0643:U+06A9` or `DEL:U+0650`.
pub type RuleId = String;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplePair {
    pub a: Word,
    pub b: Word,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RuleRecord", try_from = "RuleRecord")]
pub struct EditRule {
    pub source: char,
    /// `None` for a deletion.
    pub target: Option<char>,
    pub support: usize,
    pub channel: Option<Channel>,
    pub examples: Vec<ExamplePair>,
    pub status: RuleStatus,
    pub comment: Option<String>,
}

impl EditRule {
    pub fn sub(source: char, target: char) -> Result<Self> {
        if source == target {
            return Err(Error::InvalidRule(format!(
                "SUB source equals target {}",
                format_codepoint(source)
            )));
        }
        Ok(Self::bare(source, Some(target)))
    }

    pub fn del(source: char) -> Self {
        Self::bare(source, None)
    }

    fn bare(source: char, target: Option<char>) -> Self {
        EditRule {
            source,
            target,
            support: 0,
            channel: None,
            examples: Vec::new(),
            status: RuleStatus::Candidate,
            comment: None,
        }
    }

    pub fn kind(&self) -> RuleKind {
        match self.target {
            Some(_) => RuleKind::Sub,
            None => RuleKind::Del,
        }
    }

    pub fn id(&self) -> RuleId {
        rule_id(self.source, self.target)
    }

    pub fn with_status(mut self, status: RuleStatus) -> Self {
        self.status = status;
        self
    }

    /// The same rule pointing the other way. Deletions cannot be reversed.
    pub fn reversed(&self) -> Option<Self> {
        let target = self.target?;
        let mut r = self.clone();
        r.source = target;
        r.target = Some(self.source);
        r.examples = self
            .examples
            .iter()
            .map(|e| ExamplePair {
                a: e.b.clone(),
                b: e.a.clone(),
            })
            .collect();
        Some(r)
    }
}

pub fn rule_id(source: char, target: Option<char>) -> RuleId {
    match target {
        Some(t) => format!("SUB:{}:{}", format_codepoint(source), format_codepoint(t)),
        None => format!("DEL:{}", format_codepoint(source)),
    }
}

impl fmt::Display for EditRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target {
            Some(t) => write!(
                f,
                "SUB {} ({}) -> {} ({})",
                format_codepoint(self.source),
                char_name(self.source),
                format_codepoint(t),
                char_name(t)
            ),
            None => write!(
                f,
                "DEL {} ({})",
                format_codepoint(self.source),
                char_name(self.source)
            ),
        }
    }
}

/// Serialized form of a rule: codepoints in `U+XXXX` notation with the
/// literal character and Unicode name alongside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleRecord {
    #[serde(default, skip_deserializing)]
    pub id: String,
    pub kind: RuleKind,
    pub source: String,
    #[serde(default, skip_deserializing)]
    pub source_char: String,
    #[serde(default, skip_deserializing)]
    pub source_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", skip_deserializing)]
    pub target_char: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", skip_deserializing)]
    pub target_name: Option<String>,
    #[serde(default)]
    pub status: RuleStatus,
    #[serde(default)]
    pub support: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<ExamplePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl From<EditRule> for RuleRecord {
    fn from(r: EditRule) -> Self {
        RuleRecord {
            id: r.id(),
            kind: r.kind(),
            source: format_codepoint(r.source),
            source_char: r.source.to_string(),
            source_name: char_name(r.source),
            target: r.target.map(format_codepoint),
            target_char: r.target.map(|t| t.to_string()),
            target_name: r.target.map(char_name),
            status: r.status,
            support: r.support,
            channel: r.channel,
            examples: r.examples,
            comment: r.comment,
        }
    }
}

impl TryFrom<RuleRecord> for EditRule {
    type Error = Error;

    fn try_from(rec: RuleRecord) -> Result<Self> {
        let source = parse_codepoint(&rec.source)?;
        let mut rule = match (rec.kind, rec.target) {
            (RuleKind::Del, None) => EditRule::del(source),
            (RuleKind::Sub, Some(t)) => EditRule::sub(source, parse_codepoint(&t)?)?,
            (RuleKind::Del, Some(_)) => {
                return Err(Error::InvalidRule("DEL rule must not have a target".into()))
            }
            (RuleKind::Sub, None) => {
                return Err(Error::InvalidRule("SUB rule needs a target".into()))
            }
        };
        rule.status = rec.status;
        rule.support = rec.support;
        rule.channel = rec.channel;
        rule.examples = rec.examples;
        rule.comment = rec.comment;
        Ok(rule)
    }
}

/// A validated set of rules: unique sources, no SUB cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RuleSetRecord", try_from = "RuleSetRecord")]
pub struct RuleSet {
    pub version: u32,
    rules: Vec<EditRule>,
    /// Image of every source codepoint; `None` means deleted.
    images: HashMap<char, Option<char>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleSetRecord {
    pub version: u32,
    pub rules: Vec<EditRule>,
}

impl From<RuleSet> for RuleSetRecord {
    fn from(s: RuleSet) -> Self {
        RuleSetRecord {
            version: s.version,
            rules: s.rules,
        }
    }
}

impl TryFrom<RuleSetRecord> for RuleSet {
    type Error = Error;
    fn try_from(r: RuleSetRecord) -> Result<Self> {
        let mut set = RuleSet::new(r.rules)?;
        set.version = r.version;
        Ok(set)
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::empty()
    }
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet {
            version: 0,
            rules: Vec::new(),
            images: HashMap::new(),
        }
    }

    pub fn new(rules: Vec<EditRule>) -> Result<Self> {
        let mut edges: HashMap<char, Option<char>> = HashMap::with_capacity(rules.len());
        for r in &rules {
            if r.target == Some(r.source) {
                return Err(Error::InvalidRule(format!("identity rule {}", r.id())));
            }
            if edges.insert(r.source, r.target).is_some() {
                return Err(Error::DuplicateSource(r.source));
            }
        }
        if let Some(cycle) =
            find_cycle(rules.iter().filter_map(|r| r.target.map(|t| (r.source, t))))
        {
            return Err(Error::Cycle(cycle));
        }
        Ok(RuleSet {
            version: 0,
            rules,
            images: edges,
        })
    }

    pub fn rules(&self) -> &[EditRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains_source(&self, c: char) -> bool {
        self.images.contains_key(&c)
    }

    pub fn get(&self, id: &str) -> Option<&EditRule> {
        self.rules.iter().find(|r| r.id() == id)
    }

    /// One-pass image of a codepoint: itself when no rule applies, `None` when deleted.
    pub fn map_char(&self, c: char) -> Option<char> {
        match self.images.get(&c) {
            Some(img) => *img,
            None => Some(c),
        }
    }

    /// Rewrites a word; `None` when every codepoint was deleted.
    pub fn apply_word(&self, word: &Word) -> Option<Word> {
        if self.images.is_empty() || !word.chars().any(|c| self.images.contains_key(&c)) {
            return Some(word.clone());
        }
        Word::from_chars(word.chars().filter_map(|c| self.map_char(c)))
    }

    /// Codepoints the set can touch, either as source or target.
    pub fn codepoints(&self) -> BTreeSet<char> {
        self.rules
            .iter()
            .flat_map(|r| std::iter::once(r.source).chain(r.target))
            .collect()
    }

    /// Follows SUB chains to their end (`a -> b`, `b -> c` gives `a -> c`),
    /// so no target is a source and application becomes idempotent. This is
    /// the fixpoint of repeated application, not the one-pass mapping.
    pub fn closed(&self) -> RuleSet {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                let mut r = r.clone();
                let mut cur = r.source;
                r.target = loop {
                    match self.images.get(&cur) {
                        None => break Some(cur),
                        Some(None) => break None,
                        Some(Some(next)) => cur = *next,
                    }
                };
                r
            })
            .collect();
        let mut set = RuleSet::new(rules).expect("closure of a valid set is valid");
        set.version = self.version;
        set
    }

    /// Adds a rule, failing on a duplicate source or a new cycle.
    pub fn with_rule(&self, rule: EditRule) -> Result<RuleSet> {
        let mut rules = self.rules.clone();
        rules.push(rule);
        let mut set = RuleSet::new(rules)?;
        set.version = self.version;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        write_file(path.as_ref(), json.as_bytes())
    }
}

/// Composes two rule sets so that applying the result once equals applying
/// `older` and then `newer`. Fails when the union of both sets' SUB edges
/// contains a cycle.
pub fn compose_rules(older: &RuleSet, newer: &RuleSet) -> Result<RuleSet> {
    let edges = older
        .rules
        .iter()
        .chain(&newer.rules)
        .filter_map(|r| r.target.map(|t| (r.source, t)));
    if let Some(cycle) = find_cycle(edges) {
        return Err(Error::Cycle(cycle));
    }
    let mut rules = Vec::with_capacity(older.len() + newer.len());
    for r in &older.rules {
        let mut r = r.clone();
        r.target = older.map_char(r.source).and_then(|c| newer.map_char(c));
        rules.push(r);
    }
    for r in &newer.rules {
        if older.contains_source(r.source) {
            continue;
        }
        let mut r = r.clone();
        r.target = newer.map_char(r.source);
        rules.push(r);
    }
    let mut set = RuleSet::new(rules)?;
    set.version = older.version.max(newer.version) + 1;
    Ok(set)
}

/// Finds a cycle in a directed graph given as edges, returning it as
/// `[a, b, ..., a]`.
fn find_cycle(edges: impl Iterator<Item = (char, char)>) -> Option<Vec<char>> {
    let mut adj: BTreeMap<char, Vec<char>> = BTreeMap::new();
    for (s, t) in edges {
        adj.entry(s).or_default().push(t);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<char, Mark> = HashMap::new();
    for &start in adj.keys() {
        if marks.contains_key(&start) {
            continue;
        }
        // Iterative DFS keeping the current path.
        let mut path: Vec<(char, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Open);
        while let Some((node, next)) = path.last_mut() {
            let succ = adj.get(node).and_then(|v| v.get(*next)).copied();
            *next += 1;
            match succ {
                None => {
                    marks.insert(*node, Mark::Done);
                    path.pop();
                }
                Some(s) => match marks.get(&s) {
                    Some(Mark::Done) => {}
                    Some(Mark::Open) => {
                        let pos = path.iter().position(|(n, _)| *n == s).unwrap();
                        let mut cycle: Vec<char> = path[pos..].iter().map(|(n, _)| *n).collect();
                        cycle.push(s);
                        return Some(cycle);
                    }
                    None => {
                        marks.insert(s, Mark::Open);
                        path.push((s, 0));
                    }
                },
            }
        }
    }
    None
}
