//! Rule mining: pair frequent words across two corpora, collect SUB/DEL
//! statistics from their alignments, rank the candidates by projected
//! overlap gain and pick a small rule set greedily.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FrequencyTable, Word};
use crate::distance::{align, edit_distance_within, Alignment, EditOp, Metric};
use crate::error::{Error, Result};
use crate::g2p::G2pTable;
use crate::normalize::{overlap_counts, RuleTarget};
use crate::rules::{rule_id, Channel, EditRule, ExamplePair, RuleId, RuleSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Projected overlap gain, then support.
    Gain,
    /// Support only (frequency of the edit), then gain.
    Support,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningParams {
    pub top_n: usize,
    pub max_cost: usize,
    pub min_gain: f64,
    /// Turn INS operations (a codepoint only the second corpus has) into
    /// deletion candidates.
    pub include_insertions: bool,
    pub headword_fallback: bool,
    pub ranking: Ranking,
    pub max_examples: usize,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            top_n: 1000,
            max_cost: 2,
            min_gain: 0.001,
            include_insertions: false,
            headword_fallback: false,
            ranking: Ranking::Gain,
            max_examples: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPair {
    pub a: Word,
    pub b: Word,
    /// Codepoint alignment of `a` onto `b`.
    pub alignment: Alignment<char>,
    pub channel: Channel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub pairs: Vec<WordPair>,
    /// Words of the first list that had no exact match and were searched.
    pub examined: usize,
    pub g2p_failures: usize,
}

/// Pairs every word of `a` that is absent from `b` with its nearest
/// neighbor in `b`.
///
/// Under [`Metric::Char`] the neighbor must be within `1..=max_cost`
/// codepoint edits. Under [`Metric::Phone`] the phone distance must be
/// within `0..=max_cost` (distinct spellings that sound the same are the
/// strongest evidence) and, among equally close phone sequences, the
/// closer spelling wins; the spelling distance must also stay within
/// `max_cost`. Remaining ties go to the more frequent word, then to
/// codepoint order.
pub fn pair_words(
    a: &[(Word, u64)],
    b: &[(Word, u64)],
    metric: Metric,
    g2p: Option<&G2pTable>,
    max_cost: usize,
) -> Result<Pairing> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation(
            "pair_words needs two non-empty word lists".into(),
        ));
    }
    if max_cost < 1 {
        return Err(Error::Validation("max_cost must be at least 1".into()));
    }
    if metric == Metric::Phone && g2p.is_none() {
        return Err(Error::Validation(
            "phone metric requires a G2P table".into(),
        ));
    }
    let in_b: HashSet<&Word> = b.iter().map(|(w, _)| w).collect();
    let b_chars: Vec<Vec<char>> = b.iter().map(|(w, _)| w.codepoints()).collect();
    let mut g2p_failures = 0;
    let b_phones: Vec<Option<Vec<String>>> = match (metric, g2p) {
        (Metric::Phone, Some(t)) => b
            .iter()
            .map(|(w, _)| {
                let p = t.convert(w).ok();
                g2p_failures += usize::from(p.is_none());
                p
            })
            .collect(),
        _ => Vec::new(),
    };

    let queries: Vec<&Word> = a
        .iter()
        .map(|(w, _)| w)
        .filter(|w| !in_b.contains(w))
        .collect();
    let examined = queries.len();

    // (best index, per-query g2p failure)
    let found: Vec<(Option<usize>, bool)> = queries
        .par_iter()
        .map(|q| {
            let qc = q.codepoints();
            match metric {
                Metric::Char => {
                    let mut best: Option<(usize, usize)> = None;
                    for (i, bc) in b_chars.iter().enumerate() {
                        let bound = best.map_or(max_cost, |(d, _)| d);
                        let Some(d) = edit_distance_within(&qc, bc, bound) else {
                            continue;
                        };
                        if d == 0 {
                            continue;
                        }
                        best = match best {
                            Some((bd, bi)) if !better(d, i, bd, bi, b) => Some((bd, bi)),
                            _ => Some((d, i)),
                        };
                    }
                    (best.map(|(_, i)| i), false)
                }
                Metric::Phone => {
                    let table = g2p.expect("checked above");
                    let Ok(qp) = table.convert(q) else {
                        return (None, true);
                    };
                    let mut best: Option<((usize, usize), usize)> = None;
                    for (i, bp) in b_phones.iter().enumerate() {
                        let Some(bp) = bp else { continue };
                        let bound = best.map_or(max_cost, |((pd, _), _)| pd);
                        let Some(pd) = edit_distance_within(&qp, bp, bound) else {
                            continue;
                        };
                        let Some(cd) = edit_distance_within(&qc, &b_chars[i], max_cost) else {
                            continue;
                        };
                        let key = (pd, cd);
                        best = match best {
                            Some((bk, bi)) if !better(key, i, bk, bi, b) => Some((bk, bi)),
                            _ => Some((key, i)),
                        };
                    }
                    (best.map(|(_, i)| i), false)
                }
            }
        })
        .collect();

    let channel = match metric {
        Metric::Char => Channel::Char,
        Metric::Phone => Channel::Phone,
    };
    let mut pairs = Vec::new();
    for (q, (best, failed)) in queries.iter().zip(found) {
        g2p_failures += usize::from(failed);
        if let Some(i) = best {
            let alignment = align(&q.codepoints(), &b_chars[i]);
            pairs.push(WordPair {
                a: (*q).clone(),
                b: b[i].0.clone(),
                alignment,
                channel,
            });
        }
    }
    Ok(Pairing {
        pairs,
        examined,
        g2p_failures,
    })
}

/// Whether candidate `i` at distance key `d` beats the incumbent `bi` at `bd`.
fn better<K: Ord>(d: K, i: usize, bd: K, bi: usize, b: &[(Word, u64)]) -> bool {
    d.cmp(&bd)
        .then(b[bi].1.cmp(&b[i].1))
        .then(b[i].0.cmp(&b[bi].0))
        .is_lt()
}

/// Merges pairings from several channels; a pair found by more than one
/// channel is kept once with channel `BOTH`.
pub fn merge_pairings(pairings: impl IntoIterator<Item = Pairing>) -> Pairing {
    let mut index: HashMap<(Word, Word), usize> = HashMap::new();
    let mut merged = Pairing::default();
    for p in pairings {
        merged.examined = merged.examined.max(p.examined);
        merged.g2p_failures += p.g2p_failures;
        for pair in p.pairs {
            let key = (pair.a.clone(), pair.b.clone());
            match index.get(&key) {
                Some(&i) => {
                    let existing = &mut merged.pairs[i];
                    existing.channel = existing.channel.merge(pair.channel);
                }
                None => {
                    index.insert(key, merged.pairs.len());
                    merged.pairs.push(pair);
                }
            }
        }
    }
    merged
}

#[derive(Clone, Debug, Default)]
pub struct MineOptions<'a> {
    pub include_insertions: bool,
    pub max_examples: usize,
    /// Codepoint frequencies used to orient SUB rules from the rarer
    /// codepoint to the more common one. `None` keeps the first-corpus to
    /// second-corpus direction of the alignments.
    pub orientation: Option<&'a BTreeMap<char, u64>>,
}

/// Aggregates alignment operations into candidate rules, one per distinct
/// `(kind, source, target)`. Support counts contributing pairs; a pair
/// exhibiting an edit several times counts once.
pub fn mine_rules(pairs: &[WordPair], opts: &MineOptions<'_>) -> Vec<EditRule> {
    let mut acc: BTreeMap<(char, Option<char>), EditRule> = BTreeMap::new();
    for pair in pairs {
        let mut keys: BTreeSet<(char, Option<char>)> = BTreeSet::new();
        for op in &pair.alignment.ops {
            let key = match *op {
                EditOp::Match { .. } => continue,
                EditOp::Sub { source, target } => (source, Some(target)),
                EditOp::Del { source } => (source, None),
                EditOp::Ins { target } if opts.include_insertions => (target, None),
                EditOp::Ins { .. } => continue,
            };
            keys.insert(orient(key, opts.orientation));
        }
        for (source, target) in keys {
            let rule = acc.entry((source, target)).or_insert_with(|| EditRule {
                channel: Some(pair.channel),
                ..match target {
                    Some(t) => EditRule::sub(source, t).expect("SUB ops have distinct symbols"),
                    None => EditRule::del(source),
                }
            });
            rule.support += 1;
            rule.channel = rule.channel.map(|c| c.merge(pair.channel));
            if rule.examples.len() < opts.max_examples {
                rule.examples.push(ExamplePair {
                    a: pair.a.clone(),
                    b: pair.b.clone(),
                });
            }
        }
    }
    let mut rules: Vec<EditRule> = acc.into_values().collect();
    rules.sort_by(|x, y| y.support.cmp(&x.support).then(x.id().cmp(&y.id())));
    rules
}

fn orient(key: (char, Option<char>), mass: Option<&BTreeMap<char, u64>>) -> (char, Option<char>) {
    let (Some(mass), (s, Some(t))) = (mass, key) else {
        return key;
    };
    let ms = mass.get(&s).copied().unwrap_or(0);
    let mt = mass.get(&t).copied().unwrap_or(0);
    // Rarer maps to more common; on a tie the higher codepoint maps down.
    if ms > mt || (ms == mt && s < t) {
        (t, Some(s))
    } else {
        key
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub before: f64,
    pub after: f64,
    pub gain: f64,
}

fn overlap_fraction(a: &FrequencyTable, b: &FrequencyTable, n: usize) -> f64 {
    let (shared, denom) = overlap_counts(a, b, n);
    if denom == 0 {
        0.0
    } else {
        shared as f64 / denom as f64
    }
}

/// Top-`n` overlap before and after applying `rules` to both tables.
pub fn project_gain(
    rules: &RuleSet,
    a: &FrequencyTable,
    b: &FrequencyTable,
    n: usize,
) -> Projection {
    let before = overlap_fraction(a, b, n);
    let after = overlap_fraction(&a.apply_rules(rules).value, &b.apply_rules(rules).value, n);
    Projection {
        before,
        after,
        gain: after - before,
    }
}

/// Single-rule convenience for [`project_gain`].
pub fn project_rule_gain(
    rule: &EditRule,
    a: &FrequencyTable,
    b: &FrequencyTable,
    n: usize,
) -> Projection {
    let set = RuleSet::new(vec![rule.clone()]).expect("a single rule is a valid set");
    project_gain(&set, a, b, n)
}

/// Greedy minimal rule set: repeatedly adds the candidate with the largest
/// marginal overlap gain until the best remaining gain drops below
/// `min_gain`. Candidates that would create a cycle or reuse a source are
/// skipped. Ties go to the earlier candidate.
pub fn select_minimal_rules(
    candidates: &[EditRule],
    a: &FrequencyTable,
    b: &FrequencyTable,
    n: usize,
    min_gain: f64,
) -> RuleSet {
    let mut selected = RuleSet::empty();
    let mut current = overlap_fraction(a, b, n);
    let mut remaining: Vec<&EditRule> = candidates.iter().collect();
    loop {
        let scored: Vec<Option<(f64, usize)>> = remaining
            .par_iter()
            .enumerate()
            .map(|(i, rule)| {
                let extended = selected.with_rule((*rule).clone()).ok()?;
                let after = overlap_fraction(
                    &a.apply_rules(&extended).value,
                    &b.apply_rules(&extended).value,
                    n,
                );
                Some((after - current, i))
            })
            .collect();
        let best =
            scored
                .into_iter()
                .flatten()
                .fold(None::<(f64, usize)>, |acc, (g, i)| match acc {
                    Some((bg, bi)) if bg >= g => Some((bg, bi)),
                    _ => Some((g, i)),
                });
        let Some((gain, i)) = best else { break };
        if gain < min_gain {
            break;
        }
        let rule = remaining.remove(i).clone();
        selected = selected.with_rule(rule).expect("validated while scoring");
        current = overlap_fraction(
            &a.apply_rules(&selected).value,
            &b.apply_rules(&selected).value,
            n,
        );
    }
    selected
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub rule: EditRule,
    pub projected: Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub iteration: usize,
    pub corpora: (String, String),
    pub candidates: Vec<Candidate>,
    /// Greedy minimal selection, in selection order.
    pub recommended: Vec<RuleId>,
    pub overlap_before: f64,
    pub overlap_recommended: f64,
    pub pairs_examined: usize,
    pub pairs_found: usize,
    pub g2p_failures: usize,
    pub params: MiningParams,
}

impl MiningReport {
    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.rule.id() == id)
    }

    pub fn candidates_above(&self, min_gain: f64) -> impl Iterator<Item = &Candidate> {
        self.candidates
            .iter()
            .filter(move |c| c.projected.gain >= min_gain)
    }
}

/// Runs pairing on every available channel, mining, gain projection,
/// ranking and greedy selection for one corpus pair.
pub fn mine_report(
    a: &Corpus,
    b: &Corpus,
    g2p: Option<&G2pTable>,
    params: &MiningParams,
    iteration: usize,
) -> Result<MiningReport> {
    let fa = a.frequencies(params.headword_fallback);
    let fb = b.frequencies(params.headword_fallback);
    let top_a = fa.top_n(params.top_n).entries;
    let top_b = fb.top_n(params.top_n).entries;
    let overlap_before = overlap_fraction(&fa, &fb, params.top_n);

    let (pairing, candidates, recommended, overlap_recommended) =
        if top_a.is_empty() || top_b.is_empty() {
            (Pairing::default(), Vec::new(), Vec::new(), overlap_before)
        } else {
            let mut pairings = vec![pair_words(
                &top_a,
                &top_b,
                Metric::Char,
                None,
                params.max_cost,
            )?];
            if let Some(table) = g2p {
                pairings.push(pair_words(
                    &top_a,
                    &top_b,
                    Metric::Phone,
                    Some(table),
                    params.max_cost,
                )?);
            }
            let pairing = merge_pairings(pairings);

            let mut mass = fa.codepoint_mass();
            for (c, m) in fb.codepoint_mass() {
                *mass.entry(c).or_insert(0) += m;
            }
            let rules = mine_rules(
                &pairing.pairs,
                &MineOptions {
                    include_insertions: params.include_insertions,
                    max_examples: params.max_examples,
                    orientation: Some(&mass),
                },
            );
            let mut candidates: Vec<Candidate> = rules
                .into_par_iter()
                .map(|rule| {
                    let projected = project_rule_gain(&rule, &fa, &fb, params.top_n);
                    Candidate { rule, projected }
                })
                .collect();
            sort_candidates(&mut candidates, params.ranking);

            let ordered: Vec<EditRule> = candidates.iter().map(|c| c.rule.clone()).collect();
            let selected = select_minimal_rules(&ordered, &fa, &fb, params.top_n, params.min_gain);
            let overlap_recommended = project_gain(&selected, &fa, &fb, params.top_n).after;
            let recommended = selected.rules().iter().map(EditRule::id).collect();
            (pairing, candidates, recommended, overlap_recommended)
        };

    Ok(MiningReport {
        iteration,
        corpora: (a.name().to_string(), b.name().to_string()),
        candidates,
        recommended,
        overlap_before,
        overlap_recommended,
        pairs_examined: pairing.examined,
        pairs_found: pairing.pairs.len(),
        g2p_failures: pairing.g2p_failures,
        params: params.clone(),
    })
}

fn sort_candidates(candidates: &mut [Candidate], ranking: Ranking) {
    let key = |c: &Candidate| (c.rule.source, c.rule.target);
    candidates.sort_by(|x, y| {
        let by_gain = y.projected.gain.total_cmp(&x.projected.gain);
        let by_support = y.rule.support.cmp(&x.rule.support);
        let primary = match ranking {
            Ranking::Gain => by_gain.then(by_support),
            Ranking::Support => by_support.then(by_gain),
        };
        primary.then(key(x).cmp(&key(y)))
    });
}

/// Identifier a rule would get if reversed; used by reviewers to flip a
/// SUB candidate's direction.
pub fn reversed_id(rule: &EditRule) -> Option<RuleId> {
    rule.target.map(|t| rule_id(t, Some(rule.source)))
}
