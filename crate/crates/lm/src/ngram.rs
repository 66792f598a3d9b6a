use std::collections::{BTreeSet, HashMap};

use lexharm_core::{Error, Result, TranscriptCorpus};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub(crate) const UNK_ID: u32 = 0;
pub(crate) const BOS_ID: u32 = 1;
pub(crate) const EOS_ID: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Entry {
    pub prob: f64,
    /// Mass passed to the next lower order for words unseen after this
    /// n-gram used as a history. 1 when it never occurs as a history.
    pub bow: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    pub name: String,
    order: usize,
    /// Ids 0, 1, 2 are `<unk>`, `<s>`, `</s>`; words follow in codepoint order.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `grams[k]` holds the (k+1)-grams.
    pub(crate) grams: Vec<HashMap<Vec<u32>, Entry>>,
    pub(crate) training_tokens: u64,
}

struct History {
    total: u64,
    counts: HashMap<u32, u64>,
}

impl NGramModel {
    pub(crate) fn from_parts(
        name: String,
        order: usize,
        words: Vec<String>,
        grams: Vec<HashMap<Vec<u32>, Entry>>,
        training_tokens: u64,
    ) -> Self {
        let mut vocab: Vec<String> = vec![UNK.into(), BOS.into(), EOS.into()];
        vocab.extend(words);
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        NGramModel {
            name,
            order,
            vocab,
            index,
            grams,
            training_tokens,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Every symbol including `<unk>`, `<s>` and `</s>`.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Symbols that can be predicted: every word, `</s>` and `<unk>`.
    pub fn predictable(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .iter()
            .enumerate()
            .filter(|(i, _)| *i as u32 != BOS_ID)
            .map(|(_, w)| w.as_str())
    }

    pub fn training_tokens(&self) -> u64 {
        self.training_tokens
    }

    pub fn num_ngrams(&self, k: usize) -> usize {
        self.grams.get(k - 1).map_or(0, HashMap::len)
    }

    pub(crate) fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub(crate) fn ids(&self) -> impl Iterator<Item = (u32, &str)> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (i as u32, w.as_str()))
    }

    fn prob_ids(&self, history: &[u32], w: u32) -> f64 {
        let h = &history[history.len().saturating_sub(self.order - 1)..];
        lookup(&self.grams, h, w)
    }

    /// p(word | history), with out-of-vocabulary symbols mapped to `<unk>`.
    /// The history is given oldest first and may start with `<s>`.
    pub fn prob(&self, history: &[&str], word: &str) -> f64 {
        let h: Vec<u32> = history.iter().map(|w| self.id(w)).collect();
        self.prob_ids(&h, self.id(word))
    }

    /// Probability of every predicted token (each word, then `</s>`) of
    /// one utterance.
    pub fn sentence_probs<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut ctx = vec![BOS_ID];
        let mut out = Vec::new();
        for w in tokens.into_iter().map(|t| self.id(t)).chain([EOS_ID]) {
            let start = ctx.len().saturating_sub(self.order - 1);
            out.push(self.prob_ids(&ctx[start..], w));
            ctx.push(w);
        }
        out
    }
}

/// Backoff lookup; `grams` must hold at least `h.len() + 1` complete levels.
fn lookup(grams: &[HashMap<Vec<u32>, Entry>], h: &[u32], w: u32) -> f64 {
    let mut key = Vec::with_capacity(h.len() + 1);
    key.extend_from_slice(h);
    key.push(w);
    if let Some(e) = grams[h.len()].get(&key) {
        return e.prob;
    }
    if h.is_empty() {
        // Not reachable for a trained model: every predictable id is a unigram.
        return 0.0;
    }
    let bow = grams[h.len() - 1].get(h).map_or(1.0, |e| e.bow);
    bow * lookup(grams, &h[1..], w)
}

fn utterance_ids<'a>(
    corpus: &'a TranscriptCorpus,
    index: &'a HashMap<String, u32>,
) -> impl Iterator<Item = Vec<u32>> + 'a {
    corpus.utterances().iter().map(move |u| {
        let mut ids = Vec::with_capacity(u.tokens.len() + 2);
        ids.push(BOS_ID);
        ids.extend(u.tokens.iter().map(|t| index[t.as_str()]));
        ids.push(EOS_ID);
        ids
    })
}

/// Trains an interpolated Witten-Bell model of the given order. The lowest
/// order interpolates with a uniform distribution over words, `</s>` and
/// `<unk>`, which leaves `<unk>` a small positive probability.
pub fn train_ngram(corpus: &TranscriptCorpus, order: usize) -> Result<NGramModel> {
    if order == 0 {
        return Err(Error::Validation("n-gram order must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Validation(format!(
            "transcript {} is empty",
            corpus.name
        )));
    }
    let words: BTreeSet<&str> = corpus
        .utterances()
        .iter()
        .flat_map(|u| u.tokens.iter().map(|t| t.as_str()))
        .collect();
    let words: Vec<String> = words.into_iter().map(String::from).collect();
    let model = NGramModel::from_parts(corpus.name.clone(), order, words, Vec::new(), 0);

    // histories[k] maps a k-token history to the counts of what follows it.
    let mut histories: Vec<HashMap<Vec<u32>, History>> =
        (0..order).map(|_| HashMap::new()).collect();
    let mut tokens = 0u64;
    for ids in utterance_ids(corpus, &model.index) {
        for i in 1..ids.len() {
            tokens += 1;
            for k in 0..order.min(i + 1) {
                let h = ids[i - k..i].to_vec();
                let hist = histories[k].entry(h).or_insert_with(|| History {
                    total: 0,
                    counts: HashMap::new(),
                });
                hist.total += 1;
                *hist.counts.entry(ids[i]).or_insert(0) += 1;
            }
        }
    }

    let mut grams: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new()];
    let predictable: Vec<u32> = (0..model.vocab.len() as u32)
        .filter(|&i| i != BOS_ID)
        .collect();
    let uniform = 1.0 / predictable.len() as f64;
    let root = &histories[0][&Vec::new()];
    let t = root.counts.len() as f64;
    let denom = root.total as f64 + t;
    for &w in &predictable {
        let c = root.counts.get(&w).copied().unwrap_or(0) as f64;
        grams[0].insert(
            vec![w],
            Entry {
                prob: (c + t * uniform) / denom,
                bow: 1.0,
            },
        );
    }
    grams[0].insert(
        vec![BOS_ID],
        Entry {
            prob: 0.0,
            bow: 1.0,
        },
    );

    for k in 1..order {
        let mut level = HashMap::new();
        for (h, hist) in &histories[k] {
            let t = hist.counts.len() as f64;
            let denom = hist.total as f64 + t;
            for (&w, &c) in &hist.counts {
                // Lower orders are complete, so the backoff lookup gives the
                // interpolated lower-order probability.
                let lower = lookup(&grams, &h[1..], w);
                let mut key = h.clone();
                key.push(w);
                level.insert(
                    key,
                    Entry {
                        prob: (c as f64 + t * lower) / denom,
                        bow: 1.0,
                    },
                );
            }
        }
        grams.push(level);
        for (h, hist) in &histories[k] {
            let t = hist.counts.len() as f64;
            let bow = t / (hist.total as f64 + t);
            grams[k - 1]
                .get_mut(h)
                .expect("history is a lower-order n-gram")
                .bow = bow;
        }
    }
    let mut model = model;
    model.grams = grams;
    model.training_tokens = tokens;
    Ok(model)
}

/// exp of the mean negative log probability over every predicted token,
/// `</s>` included.
pub fn perplexity(model: &NGramModel, text: &TranscriptCorpus) -> Result<f64> {
    if text.is_empty() {
        return Err(Error::Validation(format!(
            "transcript {} is empty",
            text.name
        )));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for u in text.utterances() {
        for p in model.sentence_probs(u.tokens.iter().map(|t| t.as_str())) {
            sum += p.ln();
            n += 1;
        }
    }
    Ok((-sum / n as f64).exp())
}
