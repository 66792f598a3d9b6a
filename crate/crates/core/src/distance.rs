//! Unit-cost Levenshtein distance and alignment backtraces over arbitrary
//! symbol sequences (codepoints or phones).

use serde::{Deserialize, Serialize};

use crate::corpus::Word;
use crate::error::{Error, Result};
use crate::g2p::G2pTable;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum EditOp<T> {
    Match { symbol: T },
    Sub { source: T, target: T },
    Del { source: T },
    Ins { target: T },
}

impl<T> EditOp<T> {
    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment<T> {
    pub ops: Vec<EditOp<T>>,
    pub cost: usize,
}

impl<T: Clone> Alignment<T> {
    /// Replays the operations, producing the target sequence.
    pub fn target(&self) -> Vec<T> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                EditOp::Match { symbol } => Some(symbol.clone()),
                EditOp::Sub { target, .. } | EditOp::Ins { target } => Some(target.clone()),
                EditOp::Del { .. } => None,
            })
            .collect()
    }

    /// The source sequence the operations consume.
    pub fn source(&self) -> Vec<T> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                EditOp::Match { symbol } => Some(symbol.clone()),
                EditOp::Sub { source, .. } | EditOp::Del { source } => Some(source.clone()),
                EditOp::Ins { .. } => None,
            })
            .collect()
    }
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=a.len()).collect();
    for (j, bj) in b.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        for (i, ai) in a.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if ai == bj {
                diag
            } else {
                1 + diag.min(above).min(row[i])
            };
            diag = above;
        }
    }
    row[a.len()]
}

/// Distance if it is at most `max`, otherwise `None`. Stops as soon as every
/// cell of a DP row exceeds the bound.
pub fn edit_distance_within<T: PartialEq>(a: &[T], b: &[T], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    let (a, b) = if a.len() < b.len() { (a, b) } else { (b, a) };
    let mut row: Vec<usize> = (0..=a.len()).collect();
    for (j, bj) in b.iter().enumerate() {
        let mut diag = row[0];
        row[0] = j + 1;
        let mut row_min = row[0];
        for (i, ai) in a.iter().enumerate() {
            let above = row[i + 1];
            row[i + 1] = if ai == bj {
                diag
            } else {
                1 + diag.min(above).min(row[i])
            };
            row_min = row_min.min(row[i + 1]);
            diag = above;
        }
        if row_min > max {
            return None;
        }
    }
    Some(row[a.len()]).filter(|d| *d <= max)
}

/// One optimal alignment of `a` onto `b`. The backtrace prefers
/// MATCH, then SUB, then DEL, then INS, so results are reproducible.
pub fn align<T: PartialEq + Clone>(a: &[T], b: &[T]) -> Alignment<T> {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        d[i * width] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * width + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = sub.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * width + j - 1];
            if a[i - 1] == b[j - 1] && diag == here {
                ops.push(EditOp::Match {
                    symbol: a[i - 1].clone(),
                });
                i -= 1;
                j -= 1;
                continue;
            }
            if a[i - 1] != b[j - 1] && diag + 1 == here {
                ops.push(EditOp::Sub {
                    source: a[i - 1].clone(),
                    target: b[j - 1].clone(),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Del {
                source: a[i - 1].clone(),
            });
            i -= 1;
        } else {
            ops.push(EditOp::Ins {
                target: b[j - 1].clone(),
            });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment {
        ops,
        cost: d[n * width + m],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Char,
    Phone,
}

/// Exhaustive nearest neighbor of `query` among `candidates` (word, frequency).
///
/// Ties go to the more frequent candidate, then to the codepoint-smaller one.
/// Candidates the G2P table cannot convert are skipped under the phone metric.
pub fn nearest_neighbor(
    query: &Word,
    candidates: &[(Word, u64)],
    metric: Metric,
    g2p: Option<&G2pTable>,
) -> Result<(Word, usize)> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidates".into()));
    }
    let scored: Vec<(usize, &(Word, u64))> = match metric {
        Metric::Char => {
            let q = query.codepoints();
            candidates
                .iter()
                .map(|c| (edit_distance(&q, &c.0.codepoints()), c))
                .collect()
        }
        Metric::Phone => {
            let table =
                g2p.ok_or_else(|| Error::Validation("phone metric requires a G2P table".into()))?;
            let q = table.convert(query)?;
            candidates
                .iter()
                .filter_map(|c| table.convert(&c.0).ok().map(|p| (edit_distance(&q, &p), c)))
                .collect()
        }
    };
    scored
        .into_iter()
        .min_by(|(da, a), (db, b)| da.cmp(db).then(b.1.cmp(&a.1)).then(a.0.cmp(&b.0)))
        .map(|(d, c)| (c.0.clone(), d))
        .ok_or_else(|| Error::Validation("no candidate convertible by G2P".into()))
}
