//! Harmonization of lexicons and transcripts written with inconsistent
//! codepoints for the same script.
//!
//! The crate mines codepoint substitution and deletion rules from pairs of
//! corpora, lets an expert accept or reject them in a persistent session,
//! and applies accepted rules to lexicons and transcripts. It also carries
//! pronunciation and silence probability estimation from alignment counts.

pub mod corpus;
pub mod distance;
pub mod error;
pub mod g2p;
pub mod miner;
pub mod normalize;
pub mod pron;
pub mod rules;
pub mod session;
pub mod synth;
pub mod unicode;

pub use corpus::{
    codepoint_inventory, load_lexicon, load_transcript, save_lexicon, save_transcript,
    word_frequencies, Corpus, FrequencyTable, Lexicon, Pronunciation, TopN, TranscriptCorpus, Word,
};
pub use distance::{align, edit_distance, nearest_neighbor, Alignment, EditOp, Metric};
pub use error::{Error, Result};
pub use g2p::G2pTable;
pub use miner::{mine_report, project_gain, select_minimal_rules, MiningParams, MiningReport};
pub use normalize::{apply_rules, overlap, Applied};
pub use pron::{AlignmentCounts, Normalization, PronParams, PronProbTable};
pub use rules::{compose_rules, Channel, EditRule, RuleKind, RuleSet, RuleStatus};
pub use session::{Decision, HarmonizationSession, SessionStore};
