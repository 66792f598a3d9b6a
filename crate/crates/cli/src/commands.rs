//! Every subcommand as a plain function returning the JSON it prints.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lexharm_core::corpus::{
    codepoint_inventory, load_lexicon, load_transcript, save_lexicon, save_transcript,
};
use lexharm_core::g2p::load_g2p;
use lexharm_core::normalize::overlap_counts;
use lexharm_core::pron::{self, AlignmentCounts, PronParams};
use lexharm_core::rules::RuleId;
use lexharm_core::unicode::format_codepoint;
use lexharm_core::{
    apply_rules, overlap, Corpus, Decision, Error, HarmonizationSession, MiningParams, RuleSet,
    SessionStore, TranscriptCorpus,
};
use lexharm_lm::{fit_mixture, load_model, perplexity, save_model, train_ngram, ModelInfo};
use lexharm_nnet::checkpoint::save_checkpoint;
use lexharm_nnet::{toy_corpora, train_joint, JointConfig, ToySpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, Result};

/// Reads a lexicon and, optionally, the transcripts counted against it.
/// The corpus takes the lexicon's name.
pub fn load_corpus(lexicon: &Path, transcript: Option<&Path>) -> Result<Corpus> {
    let lex = load_lexicon(lexicon)?;
    let mut tr = match transcript {
        Some(p) => load_transcript(p)?,
        None => TranscriptCorpus::new(lex.name.clone()),
    };
    tr.name = lex.name.clone();
    Ok(Corpus::new(lex, tr))
}

/// Pairs `--lexicon` and `--transcript` arguments by position.
pub fn load_corpora(lexicons: &[PathBuf], transcripts: &[PathBuf]) -> Result<Vec<Corpus>> {
    if !transcripts.is_empty() && transcripts.len() != lexicons.len() {
        return Err(CliError::Usage(format!(
            "{} lexicons but {} transcripts; give one transcript per lexicon or none",
            lexicons.len(),
            transcripts.len()
        )));
    }
    lexicons
        .iter()
        .enumerate()
        .map(|(i, l)| load_corpus(l, transcripts.get(i).map(PathBuf::as_path)))
        .collect()
}

/// Word counts for overlap: transcript tokens, or one per headword when a
/// corpus has no transcripts.
fn frequencies(c: &Corpus, headword_fallback: bool) -> lexharm_core::FrequencyTable {
    c.frequencies(headword_fallback || c.transcript.is_empty())
}

pub fn inspect(corpus: &Corpus, top: usize, against: Option<(&Corpus, usize, bool)>) -> Value {
    let codepoints: Vec<Value> = codepoint_inventory(&corpus.lexicon)
        .into_iter()
        .map(|(c, stat)| {
            json!({
                "codepoint": format_codepoint(c),
                "char": c.to_string(),
                "name": stat.name,
                "count": stat.count,
            })
        })
        .collect();
    let freq = frequencies(corpus, false);
    let top_n = freq.top_n(top);
    let mut out = json!({
        "name": corpus.name(),
        "words": corpus.lexicon.num_words(),
        "pronunciations": corpus.lexicon.num_pronunciations(),
        "utterances": corpus.transcript.utterances().len(),
        "tokens": corpus.transcript.num_tokens(),
        "codepoints": codepoints,
        "top": top_n.entries.iter().map(|(w, n)| json!({"word": w, "count": n})).collect::<Vec<_>>(),
        "top_mass": top_n.mass,
    });
    if let Some((other, n, strip)) = against {
        out["overlap"] = overlap_report(corpus, other, n, strip, false);
    }
    out
}

pub fn overlap_report(
    a: &Corpus,
    b: &Corpus,
    n: usize,
    strip_vowels: bool,
    headword_fallback: bool,
) -> Value {
    let fa = frequencies(a, headword_fallback);
    let fb = frequencies(b, headword_fallback);
    let (shared, denom) = overlap_counts(&fa, &fb, n);
    json!({
        "a": a.name(),
        "b": b.name(),
        "n": n,
        "strip_vowels": strip_vowels,
        "overlap": overlap(&fa, &fb, n, strip_vowels),
        "shared": if strip_vowels { Value::Null } else { json!(shared) },
        "denominator": if strip_vowels { Value::Null } else { json!(denom) },
    })
}

/// Creates a session directory. Corpora without transcripts switch the
/// session to headword counts.
pub fn session_init(
    dir: &Path,
    corpora: Vec<Corpus>,
    mut params: MiningParams,
    g2p: Option<&Path>,
) -> Result<Value> {
    if corpora.iter().any(|c| c.transcript.is_empty()) {
        params.headword_fallback = true;
    }
    let g2p = g2p.map(load_g2p).transpose()?;
    let session = HarmonizationSession::new(corpora, params, g2p)?;
    SessionStore::new(dir).init(&session)?;
    Ok(serde_json::to_value(session.status())?)
}

pub fn session_status(dir: &Path) -> Result<Value> {
    Ok(serde_json::to_value(
        SessionStore::new(dir).load()?.status(),
    )?)
}

pub fn session_history(dir: &Path) -> Result<Value> {
    Ok(serde_json::to_value(
        &SessionStore::new(dir).load()?.history,
    )?)
}

pub fn session_rollback(dir: &Path, k: usize) -> Result<Value> {
    Ok(serde_json::to_value(
        SessionStore::new(dir).rollback(k)?.status(),
    )?)
}

/// Runs one mining iteration and persists the pending report.
pub fn mine(dir: &Path, out: Option<&Path>) -> Result<Value> {
    let store = SessionStore::new(dir);
    let mut session = store.load()?;
    let report = serde_json::to_value(session.run_iteration()?)?;
    store.save(&session)?;
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub enum DecisionSource {
    AcceptRecommended,
    RejectAll,
    File(PathBuf),
}

#[derive(Deserialize)]
struct DecisionFile {
    decisions: BTreeMap<RuleId, Decision>,
}

pub fn parse_decisions(text: &str) -> Result<BTreeMap<RuleId, Decision>> {
    Ok(serde_json::from_str::<DecisionFile>(text)?.decisions)
}

/// Commits a review of the pending report.
pub fn review_decide(dir: &Path, source: &DecisionSource) -> Result<Value> {
    let store = SessionStore::new(dir);
    let mut session = store.load()?;
    let decisions = match source {
        DecisionSource::AcceptRecommended => session.recommended_decisions()?,
        DecisionSource::RejectAll => {
            let report = session
                .pending
                .as_ref()
                .ok_or_else(|| Error::State("no pending report; run an iteration first".into()))?;
            report
                .candidates
                .iter()
                .map(|c| (c.rule.id(), Decision::Rejected))
                .collect()
        }
        DecisionSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_decisions(&text)?
        }
    };
    let record = serde_json::to_value(session.commit_decisions(&decisions)?)?;
    store.save(&session)?;
    Ok(json!({ "record": record, "status": session.status() }))
}

#[derive(Serialize)]
struct AppliedFile {
    input: PathBuf,
    output: PathBuf,
    dropped: usize,
    merged: usize,
}

/// Rewrites lexicons and transcripts into `out_dir` under their own file names.
pub fn apply(
    rules: &Path,
    lexicons: &[PathBuf],
    transcripts: &[PathBuf],
    out_dir: &Path,
) -> Result<Value> {
    let set = RuleSet::load(rules)?;
    let mut files = Vec::new();
    let output = |p: &Path| -> Result<PathBuf> {
        let name = p
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("{} is not a file", p.display())))?;
        let out = out_dir.join(name);
        if out == p {
            return Err(CliError::Usage(format!(
                "refusing to overwrite input {}",
                p.display()
            )));
        }
        Ok(out)
    };
    for p in lexicons {
        let out = output(p)?;
        let applied = apply_rules(&load_lexicon(p)?, &set);
        save_lexicon(&applied.value, &out)?;
        files.push(AppliedFile {
            input: p.clone(),
            output: out,
            dropped: applied.dropped,
            merged: applied.merged,
        });
    }
    for p in transcripts {
        let out = output(p)?;
        let applied = apply_rules(&load_transcript(p)?, &set);
        save_transcript(&applied.value, &out)?;
        files.push(AppliedFile {
            input: p.clone(),
            output: out,
            dropped: applied.dropped,
            merged: applied.merged,
        });
    }
    Ok(json!({ "rules": set.len(), "files": files }))
}

pub fn lm_train(transcript: &Path, order: usize, out: &Path) -> Result<Value> {
    let model = train_ngram(&load_transcript(transcript)?, order)?;
    save_model(&model, out)?;
    Ok(serde_json::to_value(ModelInfo::of(&model))?)
}

pub fn lm_ppl(model: &Path, text: &Path) -> Result<Value> {
    let model = load_model(model)?;
    let text = load_transcript(text)?;
    Ok(json!({
        "model": model.name,
        "text": text.name,
        "tokens": text.num_tokens() + text.utterances().len(),
        "perplexity": perplexity(&model, &text)?,
    }))
}

pub fn lm_mix(models: &[PathBuf], heldout: &Path, tol: f64, max_iter: usize) -> Result<Value> {
    let models = models
        .iter()
        .map(load_model)
        .collect::<lexharm_core::Result<Vec<_>>>()?;
    let fit = fit_mixture(&models, &load_transcript(heldout)?, tol, max_iter)?;
    Ok(serde_json::to_value(fit)?)
}

/// Estimates pronunciation and silence probabilities; writes the
/// probability lexicon and optionally the silence table.
pub fn pronprobs(
    lexicon: &Path,
    prons: &Path,
    silence: &Path,
    params: &PronParams,
    out: Option<&Path>,
    silence_out: Option<&Path>,
) -> Result<Value> {
    let lex = load_lexicon(lexicon)?;
    let counts = AlignmentCounts::load(prons, silence)?;
    let table = pron::estimate(&counts, &lex, params)?;
    if let Some(out) = out {
        save_lexicon(&table.to_lexicon(&lex.name), out)?;
    }
    if let Some(out) = silence_out {
        write_text(out, &table.silence_tsv())?;
    }
    Ok(serde_json::to_value(&table)?)
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default)]
pub struct DemoConfig {
    pub trainer: JointConfig,
    pub data: ToySpec,
}

/// Joint training on toy corpora. One metrics record per iteration goes
/// to `metrics` as JSON lines.
pub fn train_demo(
    cfg: &DemoConfig,
    metrics: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<Value> {
    let corpora = toy_corpora(&cfg.data)?;
    let mut sink = match metrics {
        Some(p) => {
            create_parent(p)?;
            Some((fs::File::create(p).map_err(|e| Error::io(p, e))?, p))
        }
        None => None,
    };
    let mut write_err = None;
    let (net, log) = train_joint(&cfg.trainer, &corpora, |m| {
        if let Some((f, p)) = sink.as_mut() {
            let line = serde_json::to_string(m).expect("metrics serialize");
            if let Err(e) = writeln!(f, "{line}") {
                write_err.get_or_insert(Error::io(*p, e));
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    if let Some(p) = checkpoint {
        save_checkpoint(&net, p)?;
    }
    let first = log.first().expect("initial metrics");
    let last = log.last().expect("initial metrics");
    Ok(json!({
        "corpora": corpora.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
        "strategy": cfg.trainer.strategy,
        "iterations": cfg.trainer.iterations,
        "initial_mean_loss": first.mean_loss,
        "final_mean_loss": last.mean_loss,
        "final": last,
    }))
}

fn create_parent(p: &Path) -> Result<()> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    create_parent(p)?;
    fs::write(p, text).map_err(|e| Error::io(p, e).into())
}

fn write_json(p: &Path, v: &Value) -> Result<()> {
    write_text(p, &serde_json::to_string_pretty(v)?)
}
