//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line with its runtime against the allowed budget.
//!
//! The lines go straight to the stderr handle so they show up without
//! `--nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lexharm_core::corpus::{load_lexicon, load_transcript, Lexicon, TranscriptCorpus, Word};
use lexharm_core::pron::{estimate, pron_probs, silence_prob, AlignmentCounts, PronParams};
use lexharm_core::rules::EditRule;
use lexharm_core::synth::{inject, synthetic_corpus, SynthParams};
use lexharm_core::{
    align, apply_rules, compose_rules, edit_distance, overlap, Corpus, EditOp, Error,
    HarmonizationSession, MiningParams, Normalization, Pronunciation, RuleSet, SessionStore,
};
use lexharm_lm::{fit_mixture, token_probs, train_ngram};
use lexharm_nnet::{
    estimate_priors_marginal, marginalize, toy_corpora, train_joint, Activation, Dataset,
    JointConfig, LayerSpec, LayeredNet, MultiCorpusNet, SharingStrategy, ToySpec,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn criterion(name: &str, budget: Duration, check: impl FnOnce() -> Check) {
    let start = Instant::now();
    let result = check();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over budget")),
        Err(e) => (false, e),
    };
    let line = format!(
        "{} {name} ({:.2}s / {}s): {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(ok, "{line}");
}

const KAF: char = '\u{0643}';
const KEHEH: char = '\u{06A9}';
const KASRA: char = '\u{0650}';
const YEH: char = '\u{064A}';
const FARSI_YEH: char = '\u{06CC}';
const ALEF: char = '\u{0627}';
const ALEF_HAMZA: char = '\u{0623}';
const ZWNJ: char = '\u{200C}';

/// A mined rule undoes an injected one when applying it to both corpora
/// removes the difference: same codepoints, either SUB direction.
fn undoes(mined: &EditRule, injected: &EditRule) -> bool {
    match (injected.target, mined.target) {
        (None, None) => mined.source == injected.source,
        (Some(t), Some(m)) => {
            (mined.source, m) == (t, injected.source) || (mined.source, m) == (injected.source, t)
        }
        _ => false,
    }
}

#[test]
fn synthetic_rule_recovery() {
    criterion("synthetic rule recovery", Duration::from_secs(30), || {
        let a = synthetic_corpus(
            "A",
            &SynthParams {
                vocab: 5000,
                ..Default::default()
            },
        );
        let injected = RuleSet::new(vec![
            EditRule::sub(KAF, KEHEH).unwrap(),
            EditRule::del(KASRA),
            EditRule::sub(FARSI_YEH, YEH).unwrap(),
            EditRule::sub(ALEF_HAMZA, ALEF).unwrap(),
            EditRule::del(ZWNJ),
        ])
        .unwrap();
        let b = inject(&a, &injected, "B");
        ensure!(
            a.lexicon.num_words() == 5000,
            "vocabulary is {}",
            a.lexicon.num_words()
        );
        let params = MiningParams {
            top_n: 1000,
            ..Default::default()
        };
        let mut session =
            HarmonizationSession::new(vec![a, b], params, None).map_err(|e| e.to_string())?;
        let degraded = session.overlap();
        ensure!(degraded < 1.0, "injection left overlap at {degraded}");

        let mut iterations = 0;
        while session.overlap() < 1.0 && iterations < 3 {
            session.run_iteration().map_err(|e| e.to_string())?;
            let d = session.recommended_decisions().map_err(|e| e.to_string())?;
            session.commit_decisions(&d).map_err(|e| e.to_string())?;
            iterations += 1;
        }
        let restored = session.overlap();
        ensure!(
            restored == 1.0,
            "overlap {restored} after {iterations} iterations"
        );
        for r in injected.rules() {
            ensure!(
                session.accepted.rules().iter().any(|m| undoes(m, r)),
                "{} not recovered; accepted {:?}",
                r.id(),
                session
                    .accepted
                    .rules()
                    .iter()
                    .map(EditRule::id)
                    .collect::<Vec<_>>()
            );
        }
        Ok(format!(
            "5/5 rules recovered, top-1000 overlap {degraded:.3} -> {restored} in {iterations} iteration(s)"
        ))
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Match,
    Sub,
    Del,
    Ins,
}

/// Minimum cost and, among optimal alignments, the op-kind sequence read
/// from the end that is smallest under MATCH < SUB < DEL < INS.
fn oracle(
    a: &[char],
    b: &[char],
    memo: &mut HashMap<(usize, usize), (usize, Vec<Kind>)>,
) -> (usize, Vec<Kind>) {
    let (i, j) = (a.len(), b.len());
    if i == 0 && j == 0 {
        return (0, Vec::new());
    }
    if let Some(hit) = memo.get(&(i, j)) {
        return hit.clone();
    }
    let mut options = Vec::new();
    if i > 0 && j > 0 {
        let (kind, cost) = if a[i - 1] == b[j - 1] {
            (Kind::Match, 0)
        } else {
            (Kind::Sub, 1)
        };
        let (c, rest) = oracle(&a[..i - 1], &b[..j - 1], memo);
        options.push((c + cost, kind, rest));
    }
    if i > 0 {
        let (c, rest) = oracle(&a[..i - 1], b, memo);
        options.push((c + 1, Kind::Del, rest));
    }
    if j > 0 {
        let (c, rest) = oracle(a, &b[..j - 1], memo);
        options.push((c + 1, Kind::Ins, rest));
    }
    let best = options
        .into_iter()
        .map(|(c, k, rest)| {
            let mut seq = vec![k];
            seq.extend(rest);
            (c, seq)
        })
        .min()
        .unwrap();
    memo.insert((i, j), best.clone());
    best
}

fn kinds(ops: &[EditOp<char>]) -> Vec<Kind> {
    ops.iter()
        .rev()
        .map(|op| match op {
            EditOp::Match { .. } => Kind::Match,
            EditOp::Sub { .. } => Kind::Sub,
            EditOp::Del { .. } => Kind::Del,
            EditOp::Ins { .. } => Kind::Ins,
        })
        .collect()
}

fn replay(a: &[char], ops: &[EditOp<char>]) -> Option<Vec<char>> {
    let mut out = Vec::new();
    let mut i = 0;
    for op in ops {
        match op {
            EditOp::Match { symbol } => {
                (a.get(i) == Some(symbol)).then_some(())?;
                out.push(*symbol);
                i += 1;
            }
            EditOp::Sub { source, target } => {
                (a.get(i) == Some(source) && source != target).then_some(())?;
                out.push(*target);
                i += 1;
            }
            EditOp::Del { source } => {
                (a.get(i) == Some(source)).then_some(())?;
                i += 1;
            }
            EditOp::Ins { target } => out.push(*target),
        }
    }
    (i == a.len()).then_some(out)
}

#[test]
fn edit_distance_oracle() {
    criterion("edit-distance oracle", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alphabet = ['a', 'b', 'c', KAF, KEHEH];
        let word = |rng: &mut ChaCha8Rng| -> Vec<char> {
            let n = rng.gen_range(0..=8);
            (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
        };
        for k in 0..1000 {
            let (a, b) = (word(&mut rng), word(&mut rng));
            let (cost, seq) = oracle(&a, &b, &mut HashMap::new());
            let d = edit_distance(&a, &b);
            ensure!(
                d == cost,
                "pair {k} {a:?}/{b:?}: distance {d}, oracle {cost}"
            );
            ensure!(edit_distance(&b, &a) == d, "pair {k}: asymmetric");
            let al = align(&a, &b);
            ensure!(
                al.cost == cost,
                "pair {k}: alignment cost {} vs {cost}",
                al.cost
            );
            ensure!(
                kinds(&al.ops) == seq,
                "pair {k} {a:?}/{b:?}: backtrace differs from oracle"
            );
            let non_match = al.ops.iter().filter(|o| !o.is_match()).count();
            ensure!(
                non_match == al.cost,
                "pair {k}: cost is not the count of edits"
            );
            ensure!(
                replay(&a, &al.ops).as_deref() == Some(&b[..]),
                "pair {k}: replay does not yield b"
            );
        }
        Ok("1000 pairs: distance, optimal alignment, tie-break and replay match".into())
    });
}

fn random_rules(rng: &mut ChaCha8Rng, alphabet: &[char]) -> RuleSet {
    loop {
        let mut rules = Vec::new();
        for &c in alphabet {
            match rng.gen_range(0..6) {
                0 => rules.push(EditRule::del(c)),
                1 | 2 => {
                    let t = *alphabet.choose(rng).unwrap();
                    if t != c {
                        rules.push(EditRule::sub(c, t).unwrap());
                    }
                }
                _ => {}
            }
        }
        if let Ok(set) = RuleSet::new(rules) {
            return set;
        }
    }
}

fn random_fixture(rng: &mut ChaCha8Rng, alphabet: &[char]) -> (Lexicon, TranscriptCorpus) {
    let words: Vec<Word> = (0..rng.gen_range(1..12))
        .map(|_| {
            let n = rng.gen_range(1..5);
            Word::from_chars((0..n).map(|_| *alphabet.choose(rng).unwrap())).unwrap()
        })
        .collect();
    let mut lex = Lexicon::new("x");
    for (i, w) in words.iter().enumerate() {
        lex.insert(
            w.clone(),
            Pronunciation::from_str_phones(&format!("p{} q", i % 3)),
        )
        .unwrap();
    }
    let mut tr = TranscriptCorpus::new("x");
    for u in 0..rng.gen_range(1..5) {
        let tokens = (0..rng.gen_range(0..8))
            .map(|_| words.choose(rng).unwrap().clone())
            .collect();
        tr.push(format!("u{u}"), tokens).unwrap();
    }
    (lex, tr)
}

/// Lexicon content with each word's pronunciations as a set.
fn lexicon_content(lex: &Lexicon) -> BTreeMap<String, BTreeSet<String>> {
    lex.entries()
        .map(|(w, ps)| {
            (
                w.as_str().to_string(),
                ps.iter().map(|p| p.phones.join(" ")).collect(),
            )
        })
        .collect()
}

#[test]
fn rule_application_algebra() {
    criterion("rule application algebra", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alphabet = [KAF, KEHEH, YEH, FARSI_YEH, KASRA, 'a'];
        let (mut composed, mut cycles) = (0, 0);
        for k in 0..500 {
            let (lex, tr) = random_fixture(&mut rng, &alphabet);
            let (r1, r2) = (
                random_rules(&mut rng, &alphabet),
                random_rules(&mut rng, &alphabet),
            );

            let r = r1.closed();
            let once = apply_rules(&tr, &r).value;
            ensure!(
                apply_rules(&once, &r).value == once,
                "fixture {k}: transcript application not idempotent"
            );
            let lex_once = apply_rules(&lex, &r).value;
            ensure!(
                apply_rules(&lex_once, &r).value == lex_once,
                "fixture {k}: lexicon application not idempotent"
            );

            let out = apply_rules(&tr, &r1);
            ensure!(
                out.value.num_tokens() == tr.num_tokens() - out.dropped,
                "fixture {k}: token count not conserved"
            );

            match compose_rules(&r1, &r2) {
                Ok(c) => {
                    composed += 1;
                    let seq = apply_rules(&apply_rules(&tr, &r1).value, &r2).value;
                    ensure!(
                        seq == apply_rules(&tr, &c).value,
                        "fixture {k}: transcript compose-equivalence fails"
                    );
                    let seq = apply_rules(&apply_rules(&lex, &r1).value, &r2).value;
                    ensure!(
                        lexicon_content(&seq) == lexicon_content(&apply_rules(&lex, &c).value),
                        "fixture {k}: lexicon compose-equivalence fails"
                    );
                }
                Err(Error::Cycle(_)) => cycles += 1,
                Err(e) => return Err(format!("fixture {k}: unexpected compose error {e}")),
            }
        }
        ensure!(
            composed >= 250,
            "only {composed} of 500 rule pairs composed"
        );
        Ok(format!("500 fixtures: idempotent, conserving; {composed} compositions equivalent, {cycles} cycles rejected"))
    });
}

fn sample_text(
    rng: &mut ChaCha8Rng,
    name: &str,
    vocab: &[&str],
    weights: &[f64],
    n: usize,
) -> TranscriptCorpus {
    let mut tr = TranscriptCorpus::new(name);
    let total: f64 = weights.iter().sum();
    for u in 0..n {
        let len = rng.gen_range(3..9);
        let tokens = (0..len)
            .map(|_| {
                let mut x = rng.gen::<f64>() * total;
                let mut i = 0;
                while x > weights[i] && i + 1 < weights.len() {
                    x -= weights[i];
                    i += 1;
                }
                Word::new(vocab[i]).unwrap()
            })
            .collect();
        tr.push(format!("{name}{u}"), tokens).unwrap();
    }
    tr
}

fn merge(name: &str, parts: &[&TranscriptCorpus]) -> TranscriptCorpus {
    let mut out = TranscriptCorpus::new(name);
    for p in parts {
        for u in p.utterances() {
            out.push(format!("{}-{}", p.name, u.id), u.tokens.clone())
                .unwrap();
        }
    }
    out
}

#[test]
fn lm_mixture() {
    criterion("LM mixture", Duration::from_secs(20), || {
        let vocab = ["w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"];
        let da = [8.0, 6.0, 4.0, 3.0, 2.0, 1.0, 1.0, 0.5, 0.5, 0.2];
        let db = [0.2, 0.5, 0.5, 1.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0];
        let mut worst_w: f64 = 0.0;
        let mut worst_ppl: f64 = 0.0;
        for (seed, share_a) in [(1u64, 0.7), (2, 0.3), (3, 0.5), (4, 0.85), (5, 0.15)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ta = sample_text(&mut rng, "a", &vocab, &da, 300);
            let tb = sample_text(&mut rng, "b", &vocab, &db, 300);
            let n_a = (200.0 * share_a) as usize;
            let ha = sample_text(&mut rng, "ha", &vocab, &da, n_a);
            let hb = sample_text(&mut rng, "hb", &vocab, &db, 200 - n_a);
            let heldout = merge("heldout", &[&ha, &hb]);
            let models = [train_ngram(&ta, 2).unwrap(), train_ngram(&tb, 2).unwrap()];
            let fit = fit_mixture(&models, &heldout, 1e-12, 5000).map_err(|e| e.to_string())?;

            let probs: Vec<Vec<f64>> = models.iter().map(|m| token_probs(m, &heldout)).collect();
            let n = probs[0].len() as f64;
            let ll = |w: f64| -> f64 {
                probs[0]
                    .iter()
                    .zip(&probs[1])
                    .map(|(p, q)| (w * p + (1.0 - w) * q).ln())
                    .sum()
            };
            let (grid_w, grid_ll) = (0..=1000)
                .map(|i| {
                    let w = i as f64 / 1000.0;
                    (w, ll(w))
                })
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            let grid_ppl = (-grid_ll / n).exp();
            let w = fit.weights.as_slice()[0];
            let dw = (w - grid_w).abs();
            let dppl = (fit.perplexity - grid_ppl).abs() / grid_ppl;
            worst_w = worst_w.max(dw);
            worst_ppl = worst_ppl.max(dppl);
            ensure!(dw <= 1e-3, "seed {seed}: EM weight {w}, grid {grid_w}");
            ensure!(
                dppl <= 1e-6,
                "seed {seed}: perplexity {} vs grid {grid_ppl}",
                fit.perplexity
            );
            ensure!(
                fit.steps
                    .windows(2)
                    .all(|s| s[1].log_likelihood >= s[0].log_likelihood),
                "seed {seed}: log-likelihood decreased: {:?}",
                fit.steps
                    .windows(2)
                    .map(|s| s[1].log_likelihood - s[0].log_likelihood)
                    .filter(|d| *d < 0.0)
                    .collect::<Vec<_>>()
            );
            let best_single = fit
                .component_perplexity
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            ensure!(
                fit.perplexity <= best_single,
                "seed {seed}: mixture {} > component {best_single}",
                fit.perplexity
            );
        }
        Ok(format!("5 fixtures: max |dw| {worst_w:.2e}, max rel dppl {worst_ppl:.2e}, LL monotone, mix <= components"))
    });
}

#[test]
fn pronunciation_statistics() {
    criterion("pronunciation statistics", Duration::from_secs(5), || {
        let p = pron_probs(&[9, 1], 0.0, Normalization::Sum).map_err(|e| e.to_string())?;
        ensure!(p == vec![0.9, 0.1], "(9,1) sum-normalized gave {p:?}");
        let p = pron_probs(&[9, 1], 0.0, Normalization::Max).map_err(|e| e.to_string())?;
        ensure!(p == vec![1.0, 1.0 / 9.0], "(9,1) max-normalized gave {p:?}");
        let p = pron_probs(&[9, 1], 1.0, Normalization::Sum).map_err(|e| e.to_string())?;
        ensure!(
            p == vec![10.0 / 12.0, 2.0 / 12.0],
            "(9,1) add-one gave {p:?}"
        );
        let s = silence_prob(10, 4, 0.5, 2.0);
        ensure!(s == 5.0 / 12.0, "silence (4+1)/(10+2) gave {s}");

        // End to end through the count files.
        let counts = AlignmentCounts::parse(
            "prons",
            "w\t1\t9\nw\t2\t1\n".as_bytes(),
            "sil",
            "w\t10\t4\t0\nv\t10\t6\t0\n".as_bytes(),
        )
        .map_err(|e| e.to_string())?;
        let mut lex = Lexicon::new("l");
        lex.insert(Word::new("w").unwrap(), Pronunciation::from_str_phones("a"))
            .unwrap();
        lex.insert(Word::new("w").unwrap(), Pronunciation::from_str_phones("b"))
            .unwrap();
        let params = PronParams {
            lambda: 0.0,
            lambda_sil: 2.0,
            normalization: Normalization::Sum,
        };
        let table = estimate(&counts, &lex, &params).map_err(|e| e.to_string())?;
        let w = &table.words[&Word::new("w").unwrap()];
        let probs: Vec<f64> = w.prons.iter().map(|p| p.prob.unwrap()).collect();
        ensure!(probs == vec![0.9, 0.1], "table probabilities {probs:?}");
        ensure!(
            table.sil_after_prior == 0.5,
            "prior {}",
            table.sil_after_prior
        );
        ensure!(w.sil_after == 5.0 / 12.0, "table silence {}", w.sil_after);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for t in 0..1000 {
            let k = rng.gen_range(1..7);
            let c: Vec<u64> = (0..k).map(|_| rng.gen_range(0..40)).collect();
            let l1 = rng.gen_range(0.0..4.0);
            let l2 = l1 + rng.gen_range(0.0..4.0);
            let a = pron_probs(&c, l1, Normalization::Sum).map_err(|e| e.to_string())?;
            let b = pron_probs(&c, l2, Normalization::Sum).map_err(|e| e.to_string())?;
            ensure!(
                (a.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
                "table {t}: sums to {}",
                a.iter().sum::<f64>()
            );
            let u = 1.0 / k as f64;
            for (x, y) in a.iter().zip(&b) {
                ensure!(
                    (y - u).abs() <= (x - u).abs() + 1e-12,
                    "table {t}: larger lambda moved away from uniform"
                );
                ensure!(
                    (x - u) * (y - u) >= -1e-15,
                    "table {t}: smoothing crossed uniform"
                );
            }
            // The oracle for add-lambda.
            let total: u64 = c.iter().sum();
            let denom = total as f64 + l1 * k as f64;
            if denom > 0.0 {
                for (i, x) in a.iter().enumerate() {
                    ensure!(
                        (x - (c[i] as f64 + l1) / denom).abs() <= 1e-15,
                        "table {t}: formula mismatch"
                    );
                }
            }
            let m = pron_probs(&c, l1, Normalization::Max).map_err(|e| e.to_string())?;
            ensure!(
                m.iter().cloned().fold(0.0, f64::max) == 1.0,
                "table {t}: max convention"
            );
        }
        Ok(
            "forced examples exact; 1000 tables sum to 1 and move toward uniform with lambda"
                .into(),
        )
    });
}

fn grad_check(net: &LayeredNet, x: &ndarray::Array2<f64>, labels: &[usize]) -> f64 {
    let (_, g) = net.backward(x.view(), labels).unwrap();
    let analytic: Vec<f64> = g
        .layers
        .iter()
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
        .collect();
    let params = net.flat_params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let mut p = params.clone();
        let (mut plus, mut minus) = (net.clone(), net.clone());
        p[i] += h;
        plus.set_flat_params(&p).unwrap();
        p[i] -= 2.0 * h;
        minus.set_flat_params(&p).unwrap();
        let fd = (plus.loss(x.view(), labels).unwrap() - minus.loss(x.view(), labels).unwrap())
            / (2.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-6));
    }
    worst
}

#[test]
fn joint_trainer() {
    criterion("joint trainer", Duration::from_secs(120), || {
        // (a) shared layers identical after every iteration, every strategy.
        let small = JointConfig {
            hidden_dim: 40,
            num_layers: 5,
            steps: 5,
            ..Default::default()
        };
        let toy = toy_corpora(&ToySpec {
            frames: 80,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let data: Vec<&Dataset> = toy.iter().map(|c| &c.data).collect();
        for strategy in SharingStrategy::ALL {
            let cfg = JointConfig {
                strategy,
                ..small.clone()
            };
            let mut mc = MultiCorpusNet::new(&cfg, 3).map_err(|e| e.to_string())?;
            for it in 0..4 {
                mc.joint_iteration(&data, &cfg).map_err(|e| e.to_string())?;
                for (l, shared) in mc.shared_mask().into_iter().enumerate() {
                    if shared {
                        ensure!(
                            mc.nets.iter().all(|n| n.layers[l] == mc.nets[0].layers[l]),
                            "(a) {strategy:?}: layer {} differs after iteration {it}",
                            l + 1
                        );
                    }
                }
            }
        }

        // (b) identical corpora and seeds stay bit-identical.
        let cfg = JointConfig {
            strategy: SharingStrategy::ShareAllButFirstAndLast,
            ..small.clone()
        };
        let mut mc = MultiCorpusNet::new(&cfg, 2).map_err(|e| e.to_string())?;
        for it in 0..5 {
            mc.joint_iteration(&[&toy[0].data, &toy[0].data], &cfg)
                .map_err(|e| e.to_string())?;
            ensure!(
                mc.nets[0] == mc.nets[1],
                "(b) copies diverged at iteration {it}"
            );
        }

        // (c) finite differences on every layer type.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pnorm = |group, p| Activation::Pnorm { group, p };
        let spec = |affine_out, activation| LayerSpec {
            affine_out,
            activation,
        };
        let mut worst: f64 = 0.0;
        for specs in [
            vec![
                spec(20, pnorm(10, 2.0)),
                spec(20, pnorm(10, 2.0)),
                spec(4, Activation::Softmax),
            ],
            vec![
                spec(8, Activation::Identity),
                spec(6, Activation::Softmax),
                spec(3, Activation::Softmax),
            ],
        ] {
            let net = LayeredNet::new(5, &specs, &mut rng).map_err(|e| e.to_string())?;
            let x = ndarray::Array2::from_shape_fn((6, 5), |_| rng.gen_range(-1.0..1.0));
            let labels: Vec<usize> = (0..6).map(|i| i % net.output_dim()).collect();
            worst = worst.max(grad_check(&net, &x, &labels));
        }
        ensure!(
            worst < 1e-4,
            "(c) worst relative gradient error {worst:.2e}"
        );

        // (d) seeded 3-corpus run halves the mean loss within 20 iterations.
        let cfg = JointConfig::default();
        let corpora = toy_corpora(&ToySpec::default()).map_err(|e| e.to_string())?;
        let (net, log) = train_joint(&cfg, &corpora, |_| {}).map_err(|e| e.to_string())?;
        let (first, last) = (log[0].mean_loss, log[log.len() - 1].mean_loss);
        let halved_at = log.iter().position(|m| m.mean_loss <= 0.5 * first);
        ensure!(
            cfg.iterations == 20 && halved_at.is_some(),
            "(d) loss {first:.3} -> {last:.3}"
        );

        // (e) marginal priors: hand-computed fixture and normalization.
        let post = ndarray::array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let pri = marginalize(post.view()).map_err(|e| e.to_string())?;
        ensure!(
            pri.to_vec() == vec![2.0 / 3.0, 1.0 / 3.0],
            "(e) 3-frame priors {pri:?}"
        );
        let post = ndarray::array![[0.2, 0.3, 0.5], [0.4, 0.4, 0.2], [0.6, 0.2, 0.2]];
        let pri = marginalize(post.view()).map_err(|e| e.to_string())?;
        let hand = [0.4, 0.3, 0.3];
        ensure!(
            pri.iter().zip(hand).all(|(p, h)| (p - h).abs() < 1e-15),
            "(e) 3-frame priors {pri:?}"
        );
        for (k, c) in corpora.iter().enumerate() {
            let p = estimate_priors_marginal(&net.nets[k], c.data.features.view())
                .map_err(|e| e.to_string())?;
            ensure!(
                (p.sum() - 1.0).abs() < 1e-9,
                "(e) corpus {} priors sum to {}",
                c.name,
                p.sum()
            );
        }
        Ok(format!(
            "(a) 4 strategies, (b) bit-identical, (c) max rel err {worst:.1e}, (d) loss {first:.3} -> {last:.3} (halved at iteration {}), (e) priors ok",
            halved_at.unwrap()
        ))
    });
}

/// Runs a subcommand and compares its stdout with a library value.
fn parity(name: &str, args: &[&str], expected: &Value) -> Result<(), String> {
    let out = common::lexharm(args);
    if !out.status.success() {
        return Err(format!(
            "{name}: exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let got: Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("{name}: {e}"))?;
    ensure!(&got == expected, "{name}: output differs from library");
    Ok(())
}

fn golden_eq(name: &str, args: &[&str]) -> Result<(), String> {
    let out = common::lexharm(args);
    let got: Value = serde_json::from_slice(&out.stdout).map_err(|e| format!("{name}: {e}"))?;
    let path = common::fixture("golden").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let expected: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure!(got == expected, "{name}: differs from golden file");
    Ok(())
}

#[test]
fn cli_parity() {
    use common::{fixture, s};
    criterion("CLI parity", Duration::from_secs(120), || {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let f = |n: &str| fixture(n).to_str().unwrap().to_string();
        let (a_lex, b_lex, a_tr, b_tr) = (
            f("a.lexicon"),
            f("b.lexicon"),
            f("a.transcript"),
            f("b.transcript"),
        );
        let load = |lex: &str, tr: &str| {
            let l = load_lexicon(lex).unwrap();
            let mut t = load_transcript(tr).unwrap();
            t.name = l.name.clone();
            Corpus::new(l, t)
        };
        let (ca, cb) = (load(&a_lex, &a_tr), load(&b_lex, &b_tr));
        let mut checked = Vec::new();

        golden_eq(
            "inspect_a",
            &["inspect", &a_lex, "--transcript", &a_tr, "--top", "4"],
        )?;
        checked.push("inspect");

        let (fa, fb) = (ca.frequencies(false), cb.frequencies(false));
        let out = common::run(&[
            "overlap",
            "--n",
            "5",
            &a_lex,
            &b_lex,
            "--transcripts",
            &a_tr,
            &b_tr,
        ]);
        ensure!(
            out["overlap"] == json!(overlap(&fa, &fb, 5, false)),
            "overlap: differs from library"
        );
        golden_eq(
            "overlap_lexicons",
            &["overlap", "--n", "1000", "--strip-vowels", &a_lex, &b_lex],
        )?;
        checked.push("overlap");

        let dir = tmp.path().join("session");
        let mut lib =
            HarmonizationSession::new(vec![ca.clone(), cb.clone()], MiningParams::default(), None)
                .map_err(|e| e.to_string())?;
        let init = [
            "session",
            "init",
            s(&dir),
            "--lexicon",
            &a_lex,
            "--lexicon",
            &b_lex,
            "--transcript",
            &a_tr,
            "--transcript",
            &b_tr,
        ];
        parity(
            "session init",
            &init,
            &serde_json::to_value(lib.status()).unwrap(),
        )?;
        let report = serde_json::to_value(lib.run_iteration().unwrap()).unwrap();
        parity("mine", &["mine", "--session", s(&dir)], &report)?;
        let d = lib.recommended_decisions().unwrap();
        let record = serde_json::to_value(lib.commit_decisions(&d).unwrap()).unwrap();
        parity(
            "review decide",
            &["review", "decide", "--session", s(&dir), "--accept-all"],
            &json!({"record": record, "status": lib.status()}),
        )?;
        ensure!(
            lib.overlap() == 1.0,
            "accept-all on the fixture pair left overlap {}",
            lib.overlap()
        );
        parity(
            "session status",
            &["session", "status", s(&dir)],
            &serde_json::to_value(lib.status()).unwrap(),
        )?;
        parity(
            "session history",
            &["session", "history", s(&dir)],
            &serde_json::to_value(&lib.history).unwrap(),
        )?;
        let fresh =
            HarmonizationSession::new(vec![ca.clone(), cb.clone()], MiningParams::default(), None)
                .unwrap();
        parity(
            "session rollback",
            &["session", "rollback", s(&dir), "0"],
            &serde_json::to_value(fresh.status()).unwrap(),
        )?;
        checked.extend([
            "session init",
            "mine",
            "review decide",
            "session status",
            "session history",
            "session rollback",
        ]);

        // The review server answers like the library for the same state.
        let api_dir = tmp.path().join("api");
        SessionStore::new(&api_dir)
            .init(&fresh)
            .map_err(|e| e.to_string())?;
        let state = lexharm_cli::api::AppState::open(SessionStore::new(&api_dir))
            .map_err(|e| e.to_string())?;
        let app = lexharm_cli::api::router(Arc::new(state));
        let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
        let served = rt.block_on(async {
            use http_body_util::BodyExt;
            use tower::ServiceExt;
            let req = axum::http::Request::post("/api/iterate")
                .body(axum::body::Body::empty())
                .unwrap();
            let resp = app.clone().oneshot(req).await.unwrap();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            serde_json::from_slice::<Value>(&bytes).unwrap()
        });
        ensure!(
            served == report,
            "review serve: /api/iterate differs from library report"
        );
        checked.push("review serve");

        let rules_path = tmp.path().join("rules.json");
        lib.accepted.save(&rules_path).map_err(|e| e.to_string())?;
        let out_dir = tmp.path().join("applied");
        let out = common::run(&[
            "apply",
            "--rules",
            s(&rules_path),
            "--transcript",
            &b_tr,
            "--out-dir",
            s(&out_dir),
        ]);
        let applied = apply_rules(&cb.transcript, &lib.accepted);
        let written =
            std::fs::read_to_string(out_dir.join("b.transcript")).map_err(|e| e.to_string())?;
        ensure!(
            written == applied.value.to_text() && out["files"][0]["dropped"] == applied.dropped,
            "apply differs"
        );
        checked.push("apply");

        let arpa = tmp.path().join("a.arpa");
        let lm_tr = f("lm_a.transcript");
        let model = train_ngram(&load_transcript(&lm_tr).unwrap(), 2).unwrap();
        parity(
            "lm train",
            &["lm", "train", &lm_tr, "--order", "2", "--out", s(&arpa)],
            &serde_json::to_value(lexharm_lm::ModelInfo::of(&model)).unwrap(),
        )?;
        ensure!(
            std::fs::read_to_string(&arpa).unwrap() == lexharm_lm::write_arpa(&model),
            "lm train: ARPA differs"
        );
        let arpa_b = tmp.path().join("b.arpa");
        common::run(&[
            "lm",
            "train",
            &f("lm_b.transcript"),
            "--order",
            "2",
            "--out",
            s(&arpa_b),
        ]);
        golden_eq(
            "lm_ppl",
            &["lm", "ppl", "--model", s(&arpa), &f("heldout.transcript")],
        )?;
        golden_eq(
            "lm_mix",
            &[
                "lm",
                "mix",
                "--model",
                s(&arpa),
                "--model",
                s(&arpa_b),
                "--heldout",
                &f("heldout.transcript"),
            ],
        )?;
        checked.extend(["lm train", "lm ppl", "lm mix"]);

        let counts = AlignmentCounts::load(fixture("prons.tsv"), fixture("silence.tsv")).unwrap();
        let table = estimate(&counts, &ca.lexicon, &PronParams::default()).unwrap();
        parity(
            "pronprobs",
            &[
                "pronprobs",
                "--lexicon",
                &a_lex,
                "--prons",
                &f("prons.tsv"),
                "--silence",
                &f("silence.tsv"),
            ],
            &serde_json::to_value(&table).unwrap(),
        )?;
        golden_eq(
            "pronprobs_sum",
            &[
                "pronprobs",
                "--lexicon",
                &a_lex,
                "--prons",
                &f("prons.tsv"),
                "--silence",
                &f("silence.tsv"),
                "--normalization",
                "sum",
            ],
        )?;
        checked.push("pronprobs");

        let cfg: Value =
            serde_json::from_str(&std::fs::read_to_string(fixture("demo.json")).unwrap()).unwrap();
        let trainer: JointConfig = serde_json::from_value(cfg["trainer"].clone()).unwrap();
        let spec: ToySpec = serde_json::from_value(cfg["data"].clone()).unwrap();
        let (_, log) = train_joint(&trainer, &toy_corpora(&spec).unwrap(), |_| {}).unwrap();
        let out = common::run(&["train-demo", "--config", &f("demo.json")]);
        ensure!(
            out["final"] == serde_json::to_value(log.last().unwrap()).unwrap(),
            "train-demo differs"
        );
        checked.push("train-demo");

        Ok(format!(
            "{} subcommands match: {}",
            checked.len(),
            checked.join(", ")
        ))
    });
}
