//! The iterative review loop: mine candidates, let an expert decide, apply
//! the accepted rules to every corpus, repeat.
//!
//! Mining always compares the first two corpora of the session; accepted
//! rules are applied to all of them. A session can live in memory or in a
//! directory, where every commit writes a new numbered snapshot:
//!
//! ```text
//! session.json
//! g2p.tsv                      (optional)
//! rulesets/v<k>.json
//! corpora/<name>/v<k>.lexicon
//! corpora/<name>/v<k>.transcript
//! reports/iter<k>.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_lexicon, load_transcript, write_file, Corpus, FrequencyTable};
use crate::error::{Error, Result};
use crate::g2p::{load_g2p, G2pTable};
use crate::miner::{mine_report, project_gain, MiningParams, MiningReport, Projection};
use crate::normalize::{apply_rules, overlap};
use crate::rules::{compose_rules, EditRule, RuleId, RuleSet, RuleStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accepted,
    Rejected,
    /// Accept a SUB rule with source and target swapped.
    AcceptedReversed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub shown: Vec<RuleId>,
    pub decisions: BTreeMap<RuleId, Decision>,
    /// Rules actually added, in the orientation they were accepted.
    pub accepted: Vec<RuleId>,
    pub overlap_before: f64,
    pub overlap_after: f64,
    pub dropped_words: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionStatus {
    pub iteration: usize,
    pub corpora: Vec<String>,
    pub accepted_rules: usize,
    pub ruleset_version: u32,
    pub pending: bool,
    pub overlap: f64,
    /// Overlap before the first commit followed by the value after each commit.
    pub trajectory: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HarmonizationSession {
    pub iteration: usize,
    pub params: MiningParams,
    pub corpora: Vec<Corpus>,
    pub accepted: RuleSet,
    pub pending: Option<MiningReport>,
    pub history: Vec<HistoryRecord>,
    pub g2p: Option<G2pTable>,
}

impl HarmonizationSession {
    pub fn new(corpora: Vec<Corpus>, params: MiningParams, g2p: Option<G2pTable>) -> Result<Self> {
        if corpora.len() < 2 {
            return Err(Error::Validation(
                "a session needs at least two corpora".into(),
            ));
        }
        if params.top_n == 0 {
            return Err(Error::Validation("top_n must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &corpora {
            let name = c.name();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(Error::Validation(format!("unusable corpus name {name:?}")));
            }
            if !seen.insert(name.to_string()) {
                return Err(Error::Validation(format!("duplicate corpus name {name:?}")));
            }
        }
        Ok(HarmonizationSession {
            iteration: 0,
            params,
            corpora,
            accepted: RuleSet::empty(),
            pending: None,
            history: Vec::new(),
            g2p,
        })
    }

    fn tables(&self) -> (FrequencyTable, FrequencyTable) {
        let fb = self.params.headword_fallback;
        (
            self.corpora[0].frequencies(fb),
            self.corpora[1].frequencies(fb),
        )
    }

    /// Top-N overlap between the two mined corpora as they stand now.
    pub fn overlap(&self) -> f64 {
        let (a, b) = self.tables();
        overlap(&a, &b, self.params.top_n, false)
    }

    pub fn status(&self) -> SessionStatus {
        let current = self.overlap();
        let mut trajectory: Vec<f64> = self
            .history
            .first()
            .map(|h| h.overlap_before)
            .into_iter()
            .collect();
        trajectory.extend(self.history.iter().map(|h| h.overlap_after));
        if trajectory.is_empty() {
            trajectory.push(current);
        }
        SessionStatus {
            iteration: self.iteration,
            corpora: self.corpora.iter().map(|c| c.name().to_string()).collect(),
            accepted_rules: self.accepted.len(),
            ruleset_version: self.accepted.version,
            pending: self.pending.is_some(),
            overlap: current,
            trajectory,
        }
    }

    /// Mines the current corpora and stores the report as pending.
    pub fn run_iteration(&mut self) -> Result<&MiningReport> {
        if self.pending.is_some() {
            return Err(Error::State(format!(
                "iteration {} has an unreviewed report",
                self.iteration
            )));
        }
        let report = mine_report(
            &self.corpora[0],
            &self.corpora[1],
            self.g2p.as_ref(),
            &self.params,
            self.iteration,
        )?;
        Ok(self.pending.insert(report))
    }

    fn pending(&self) -> Result<&MiningReport> {
        self.pending
            .as_ref()
            .ok_or_else(|| Error::State("no pending report; run an iteration first".into()))
    }

    /// Rule set formed by the given pending candidates.
    pub fn selection(&self, decisions: &BTreeMap<RuleId, Decision>) -> Result<RuleSet> {
        let report = self.pending()?;
        let mut rules = Vec::new();
        for (id, decision) in decisions {
            let cand = report
                .candidate(id)
                .ok_or_else(|| Error::UnknownRule(id.clone()))?;
            let rule = match decision {
                Decision::Rejected => continue,
                Decision::Accepted => cand.rule.clone(),
                Decision::AcceptedReversed => cand.rule.reversed().ok_or_else(|| {
                    Error::Validation(format!("{id} is a deletion and cannot be reversed"))
                })?,
            };
            rules.push(rule.with_status(RuleStatus::Accepted));
        }
        RuleSet::new(rules)
    }

    /// Projected overlap if the listed pending candidates were accepted.
    pub fn preview(&self, ids: &[RuleId]) -> Result<Projection> {
        let decisions = ids
            .iter()
            .map(|id| (id.clone(), Decision::Accepted))
            .collect();
        let set = self.selection(&decisions)?;
        let (a, b) = self.tables();
        Ok(project_gain(&set, &a, &b, self.params.top_n))
    }

    /// Decisions accepting the report's recommended rule set.
    pub fn recommended_decisions(&self) -> Result<BTreeMap<RuleId, Decision>> {
        let report = self.pending()?;
        let recommended: BTreeSet<&RuleId> = report.recommended.iter().collect();
        Ok(report
            .candidates
            .iter()
            .map(|c| {
                let id = c.rule.id();
                let d = if recommended.contains(&id) {
                    Decision::Accepted
                } else {
                    Decision::Rejected
                };
                (id, d)
            })
            .collect())
    }

    /// Applies a review. Nothing changes unless every step succeeds.
    pub fn commit_decisions(
        &mut self,
        decisions: &BTreeMap<RuleId, Decision>,
    ) -> Result<&HistoryRecord> {
        let batch = self.selection(decisions)?;
        let accepted = compose_rules(&self.accepted, &batch)?;
        let report = self.pending()?;
        let shown = report.candidates.iter().map(|c| c.rule.id()).collect();

        let overlap_before = self.overlap();
        let mut dropped_words = 0;
        let corpora: Vec<Corpus> = self
            .corpora
            .iter()
            .map(|c| {
                let out = apply_rules(c, &batch);
                dropped_words += out.dropped;
                out.value
            })
            .collect();

        self.corpora = corpora;
        self.accepted = accepted;
        self.pending = None;
        let overlap_after = self.overlap();
        self.history.push(HistoryRecord {
            iteration: self.iteration,
            shown,
            decisions: decisions.clone(),
            accepted: batch.rules().iter().map(EditRule::id).collect(),
            overlap_before,
            overlap_after,
            dropped_words,
        });
        self.iteration += 1;
        Ok(self.history.last().unwrap())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionFile {
    iteration: usize,
    params: MiningParams,
    corpora: Vec<String>,
    has_g2p: bool,
    pending: Option<MiningReport>,
    history: Vec<HistoryRecord>,
}

/// On-disk home of a session.
#[derive(Clone, Debug)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn state_path(&self) -> PathBuf {
        self.dir.join("session.json")
    }

    fn ruleset_path(&self, k: usize) -> PathBuf {
        self.dir.join("rulesets").join(format!("v{k}.json"))
    }

    fn corpus_paths(&self, name: &str, k: usize) -> (PathBuf, PathBuf) {
        let d = self.dir.join("corpora").join(name);
        (
            d.join(format!("v{k}.lexicon")),
            d.join(format!("v{k}.transcript")),
        )
    }

    fn report_path(&self, k: usize) -> PathBuf {
        self.dir.join("reports").join(format!("iter{k}.json"))
    }

    /// Writes a fresh session into an empty (or absent) directory.
    pub fn init(&self, session: &HarmonizationSession) -> Result<()> {
        if self.state_path().exists() {
            return Err(Error::State(format!(
                "{} already holds a session",
                self.dir.display()
            )));
        }
        if let Some(g2p) = &session.g2p {
            write_file(&self.dir.join("g2p.tsv"), g2p.to_text().as_bytes())?;
        }
        self.save(session)
    }

    /// Persists the current snapshot, the pending report and the state file.
    /// The state file is replaced last, so an interrupted save leaves the
    /// previous state in effect.
    pub fn save(&self, session: &HarmonizationSession) -> Result<()> {
        let k = session.iteration;
        for c in &session.corpora {
            let (lex, tr) = self.corpus_paths(c.name(), k);
            write_atomic(&lex, c.lexicon.to_text().as_bytes())?;
            write_atomic(&tr, c.transcript.to_text().as_bytes())?;
        }
        write_atomic(
            &self.ruleset_path(k),
            serde_json::to_string_pretty(&session.accepted)?.as_bytes(),
        )?;
        if let Some(report) = &session.pending {
            write_atomic(
                &self.report_path(report.iteration),
                serde_json::to_string_pretty(report)?.as_bytes(),
            )?;
        }
        let state = SessionFile {
            iteration: k,
            params: session.params.clone(),
            corpora: session
                .corpora
                .iter()
                .map(|c| c.name().to_string())
                .collect(),
            has_g2p: session.g2p.is_some(),
            pending: session.pending.clone(),
            history: session.history.clone(),
        };
        write_atomic(
            &self.state_path(),
            serde_json::to_string_pretty(&state)?.as_bytes(),
        )
    }

    pub fn load(&self) -> Result<HarmonizationSession> {
        let path = self.state_path();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: SessionFile = serde_json::from_str(&text)?;
        self.load_snapshot(state)
    }

    fn load_snapshot(&self, state: SessionFile) -> Result<HarmonizationSession> {
        let k = state.iteration;
        let mut corpora = Vec::with_capacity(state.corpora.len());
        for name in &state.corpora {
            let (lex, tr) = self.corpus_paths(name, k);
            let mut lexicon = load_lexicon(&lex)?;
            let mut transcript = load_transcript(&tr)?;
            lexicon.name = name.clone();
            transcript.name = name.clone();
            corpora.push(Corpus::new(lexicon, transcript));
        }
        let g2p = if state.has_g2p {
            let mut t = load_g2p(self.dir.join("g2p.tsv"))?;
            t.name = "session".into();
            Some(t)
        } else {
            None
        };
        let mut session = HarmonizationSession::new(corpora, state.params, g2p)?;
        session.iteration = k;
        session.accepted = RuleSet::load(self.ruleset_path(k))?;
        session.pending = state.pending;
        session.history = state.history;
        Ok(session)
    }

    /// Moves the session back to the snapshot taken after `k` commits,
    /// dropping later history and any pending report. Snapshot files of
    /// later iterations stay on disk.
    pub fn rollback(&self, k: usize) -> Result<HarmonizationSession> {
        let current = self.load()?;
        if k > current.iteration {
            return Err(Error::Validation(format!(
                "cannot roll back to iteration {k}; session is at {}",
                current.iteration
            )));
        }
        let mut history = current.history;
        history.truncate(k);
        let state = SessionFile {
            iteration: k,
            params: current.params,
            corpora: current
                .corpora
                .iter()
                .map(|c| c.name().to_string())
                .collect(),
            has_g2p: current.g2p.is_some(),
            pending: None,
            history,
        };
        let session = self.load_snapshot(state)?;
        self.save(&session)?;
        Ok(session)
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write_file(&tmp, contents)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{inject, standard_confusions, synthetic_corpus, SynthParams};

    fn pair() -> Vec<Corpus> {
        let params = SynthParams {
            vocab: 400,
            ..Default::default()
        };
        let a = synthetic_corpus("A", &params);
        let b = inject(&a, &standard_confusions(), "B");
        vec![a, b]
    }

    fn session() -> HarmonizationSession {
        let params = MiningParams {
            top_n: 200,
            ..Default::default()
        };
        HarmonizationSession::new(pair(), params, None).unwrap()
    }

    #[test]
    fn run_twice_is_a_state_error() {
        let mut s = session();
        s.run_iteration().unwrap();
        assert!(matches!(s.run_iteration(), Err(Error::State(_))));
    }

    #[test]
    fn commit_without_report_is_a_state_error() {
        let mut s = session();
        assert!(matches!(
            s.commit_decisions(&BTreeMap::new()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn accept_recommended_restores_overlap() {
        let mut s = session();
        let before = s.overlap();
        assert!(before < 1.0);
        s.run_iteration().unwrap();
        let decisions = s.recommended_decisions().unwrap();
        let record = s.commit_decisions(&decisions).unwrap().clone();
        assert_eq!(record.overlap_before, before);
        assert_eq!(record.overlap_after, 1.0);
        assert_eq!(s.iteration, 1);
        assert!(s.pending.is_none());
        assert_eq!(s.status().trajectory, vec![before, 1.0]);

        // Fixpoint: nothing left to mine above threshold.
        let min_gain = s.params.min_gain;
        let report = s.run_iteration().unwrap();
        assert_eq!(report.candidates_above(min_gain).count(), 0);
        s.commit_decisions(&BTreeMap::new()).unwrap();
        assert_eq!(s.overlap(), 1.0);
    }

    #[test]
    fn reject_all_changes_nothing_but_the_counter() {
        let mut s = session();
        let corpora = s.corpora.clone();
        s.run_iteration().unwrap();
        let decisions = s
            .pending
            .as_ref()
            .unwrap()
            .candidates
            .iter()
            .map(|c| (c.rule.id(), Decision::Rejected))
            .collect();
        s.commit_decisions(&decisions).unwrap();
        assert_eq!(s.iteration, 1);
        assert!(s.accepted.is_empty());
        assert_eq!(s.corpora[0].lexicon, corpora[0].lexicon);
        assert_eq!(s.corpora[1].transcript, corpora[1].transcript);
    }

    #[test]
    fn unknown_id_and_conflicts_leave_state_unchanged() {
        let mut s = session();
        s.run_iteration().unwrap();
        let pending = s.pending.clone();
        let bad = BTreeMap::from([("SUB:U+0061:U+0062".to_string(), Decision::Accepted)]);
        assert!(matches!(
            s.commit_decisions(&bad),
            Err(Error::UnknownRule(_))
        ));
        assert_eq!(s.pending, pending);
        assert_eq!(s.iteration, 0);

        // A previously accepted a -> b plus a newly accepted b -> a is a cycle.
        let first = pending.as_ref().unwrap().candidates[0].rule.clone();
        let id = first.id();
        if first.target.is_some() {
            s.accepted = RuleSet::new(vec![first.reversed().unwrap()]).unwrap();
            let corpora = s.corpora.clone();
            let d = BTreeMap::from([(id, Decision::Accepted)]);
            assert!(matches!(s.commit_decisions(&d), Err(Error::Cycle(_))));
            assert_eq!(s.corpora[0].lexicon, corpora[0].lexicon);
            assert!(s.pending.is_some());
        }
    }

    #[test]
    fn preview_matches_projection() {
        let mut s = session();
        s.run_iteration().unwrap();
        let ids = s.pending.as_ref().unwrap().recommended.clone();
        let p = s.preview(&ids).unwrap();
        assert_eq!(p.after, 1.0);
        assert_eq!(p.before, s.overlap());
    }

    #[test]
    fn store_round_trip_and_rollback() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::new(dir.path().join("s"));
        let mut s = session();
        store.init(&s).unwrap();
        assert!(store.init(&s).is_err());

        s.run_iteration().unwrap();
        store.save(&s).unwrap();
        let loaded = store.load().unwrap();
        assert_eq!(loaded.pending, s.pending);

        let d = s.recommended_decisions().unwrap();
        s.commit_decisions(&d).unwrap();
        store.save(&s).unwrap();
        let loaded = store.load().unwrap();
        assert_eq!(loaded.iteration, 1);
        assert_eq!(loaded.accepted, s.accepted);
        assert_eq!(loaded.history, s.history);
        assert_eq!(loaded.corpora[1].lexicon, s.corpora[1].lexicon);
        assert_eq!(loaded.overlap(), 1.0);
        assert!(dir.path().join("s/reports/iter0.json").exists());
        assert!(dir.path().join("s/corpora/B/v1.transcript").exists());

        let back = store.rollback(0).unwrap();
        assert_eq!(back.iteration, 0);
        assert!(back.history.is_empty());
        assert!(back.accepted.is_empty());
        assert!(back.overlap() < 1.0);
        assert_eq!(store.load().unwrap().iteration, 0);
        assert!(store.rollback(3).is_err());
    }
}
