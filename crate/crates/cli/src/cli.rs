use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexharm_core::miner::Ranking;
use lexharm_core::{Error, MiningParams, Normalization, PronParams, SessionStore};
use serde_json::Value;

use crate::commands::{self, DecisionSource, DemoConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "lexharm",
    version,
    about = "Harmonize lexicons and transcripts across codepoint conventions"
)]
pub struct Cli {
    /// Indented JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Codepoint inventory and most frequent words of a corpus.
    Inspect {
        lexicon: PathBuf,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// Also report top-N overlap with this lexicon.
        #[arg(long)]
        against: Option<PathBuf>,
        #[arg(long, requires = "against")]
        against_transcript: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        strip_vowels: bool,
    },
    /// Fraction of top-N words two corpora share.
    Overlap {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        transcripts: Option<Vec<PathBuf>>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        strip_vowels: bool,
        /// Add one count per headword to transcript counts.
        #[arg(long)]
        headword_fallback: bool,
    },
    /// Mine candidate rules for a session; the report becomes pending.
    Mine {
        #[arg(long)]
        session: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Apply a rule set file to lexicons and transcripts.
    Apply {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        lexicon: Vec<PathBuf>,
        #[arg(long)]
        transcript: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    #[command(subcommand)]
    Lm(LmCommand),
    /// Pronunciation and silence probabilities from alignment counts.
    Pronprobs {
        #[arg(long)]
        lexicon: PathBuf,
        /// TSV word, pron-id, count.
        #[arg(long)]
        prons: PathBuf,
        /// TSV word, total, sil_after, sil_before.
        #[arg(long)]
        silence: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_sil: f64,
        #[arg(long, value_enum, default_value_t = NormArg::Max)]
        normalization: NormArg,
        /// Lexicon with probabilities.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        silence_out: Option<PathBuf>,
    },
    /// Joint multi-corpus training on synthetic toy corpora.
    TrainDemo {
        /// JSON with optional "trainer" and "data" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON lines, one per iteration.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    #[command(subcommand)]
    Session(SessionCommand),
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    /// Serve the review API for a session.
    Serve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8731")]
        addr: String,
    },
    /// Commit decisions on the pending report without the UI.
    Decide {
        #[arg(long)]
        session: PathBuf,
        /// Accept the recommended rule set, reject the rest.
        #[arg(long, group = "source")]
        accept_all: bool,
        #[arg(long, group = "source")]
        reject_all: bool,
        /// JSON {"decisions": {"<rule-id>": "ACCEPTED" | "REJECTED" | "ACCEPTED_REVERSED"}}.
        #[arg(long, group = "source")]
        decisions: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LmCommand {
    /// Train a Witten-Bell n-gram model; writes ARPA text plus a JSON sidecar.
    Train {
        transcript: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perplexity of a model on a transcript.
    Ppl {
        #[arg(long)]
        model: PathBuf,
        transcript: PathBuf,
    },
    /// EM interpolation weights on held-out text.
    Mix {
        #[arg(long = "model", required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        heldout: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Create a session over two or more corpora. Rules are mined between
    /// the first two and applied to all.
    Init {
        dir: PathBuf,
        #[arg(long, required = true)]
        lexicon: Vec<PathBuf>,
        #[arg(long)]
        transcript: Vec<PathBuf>,
        #[arg(long)]
        g2p: Option<PathBuf>,
        #[command(flatten)]
        mining: MiningArgs,
    },
    Status {
        dir: PathBuf,
    },
    History {
        dir: PathBuf,
    },
    /// Return to the snapshot after K commits.
    Rollback {
        dir: PathBuf,
        k: usize,
    },
}

#[derive(Debug, Args)]
pub struct MiningArgs {
    #[arg(long, default_value_t = 1000)]
    top_n: usize,
    #[arg(long, default_value_t = 2)]
    max_cost: usize,
    #[arg(long, default_value_t = 0.001)]
    min_gain: f64,
    #[arg(long)]
    include_insertions: bool,
    #[arg(long)]
    headword_fallback: bool,
    #[arg(long, value_enum, default_value_t = RankArg::Gain)]
    ranking: RankArg,
    #[arg(long, default_value_t = 5)]
    max_examples: usize,
}

impl MiningArgs {
    fn params(&self) -> MiningParams {
        MiningParams {
            top_n: self.top_n,
            max_cost: self.max_cost,
            min_gain: self.min_gain,
            include_insertions: self.include_insertions,
            headword_fallback: self.headword_fallback,
            ranking: match self.ranking {
                RankArg::Gain => Ranking::Gain,
                RankArg::Support => Ranking::Support,
            },
            max_examples: self.max_examples,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RankArg {
    Gain,
    Support,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NormArg {
    Max,
    Sum,
}

fn read_config(path: Option<&Path>) -> Result<DemoConfig> {
    let Some(path) = path else {
        return Ok(DemoConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Executes a parsed command and returns what it prints.
pub fn run(command: Command) -> Result<Value> {
    match command {
        Command::Inspect {
            lexicon,
            transcript,
            top,
            against,
            against_transcript,
            n,
            strip_vowels,
        } => {
            let corpus = commands::load_corpus(&lexicon, transcript.as_deref())?;
            let other = against
                .map(|a| commands::load_corpus(&a, against_transcript.as_deref()))
                .transpose()?;
            Ok(commands::inspect(
                &corpus,
                top,
                other.as_ref().map(|o| (o, n, strip_vowels)),
            ))
        }
        Command::Overlap {
            a,
            b,
            transcripts,
            n,
            strip_vowels,
            headword_fallback,
        } => {
            let ts = transcripts.unwrap_or_default();
            let corpora = commands::load_corpora(&[a, b], &ts)?;
            Ok(commands::overlap_report(
                &corpora[0],
                &corpora[1],
                n,
                strip_vowels,
                headword_fallback,
            ))
        }
        Command::Mine { session, out } => commands::mine(&session, out.as_deref()),
        Command::Review(ReviewCommand::Decide {
            session,
            accept_all,
            reject_all,
            decisions,
        }) => {
            let source = match (accept_all, reject_all, decisions) {
                (true, _, _) => DecisionSource::AcceptRecommended,
                (_, true, _) => DecisionSource::RejectAll,
                (_, _, Some(p)) => DecisionSource::File(p),
                _ => {
                    return Err(CliError::Usage(
                        "give one of --accept-all, --reject-all or --decisions FILE".into(),
                    ))
                }
            };
            commands::review_decide(&session, &source)
        }
        Command::Review(ReviewCommand::Serve { session, addr }) => {
            let state = Arc::new(crate::api::AppState::open(SessionStore::new(session))?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(crate::api::serve(state, &addr))
                .map_err(|e| Error::io(addr.as_str(), e))?;
            Ok(Value::Null)
        }
        Command::Apply {
            rules,
            lexicon,
            transcript,
            out_dir,
        } => commands::apply(&rules, &lexicon, &transcript, &out_dir),
        Command::Lm(LmCommand::Train {
            transcript,
            order,
            out,
        }) => commands::lm_train(&transcript, order, &out),
        Command::Lm(LmCommand::Ppl { model, transcript }) => commands::lm_ppl(&model, &transcript),
        Command::Lm(LmCommand::Mix {
            models,
            heldout,
            tol,
            max_iter,
        }) => commands::lm_mix(&models, &heldout, tol, max_iter),
        Command::Pronprobs {
            lexicon,
            prons,
            silence,
            lambda,
            lambda_sil,
            normalization,
            out,
            silence_out,
        } => {
            let params = PronParams {
                lambda,
                lambda_sil,
                normalization: match normalization {
                    NormArg::Max => Normalization::Max,
                    NormArg::Sum => Normalization::Sum,
                },
            };
            commands::pronprobs(
                &lexicon,
                &prons,
                &silence,
                &params,
                out.as_deref(),
                silence_out.as_deref(),
            )
        }
        Command::TrainDemo {
            config,
            metrics,
            checkpoint,
        } => commands::train_demo(
            &read_config(config.as_deref())?,
            metrics.as_deref(),
            checkpoint.as_deref(),
        ),
        Command::Session(SessionCommand::Init {
            dir,
            lexicon,
            transcript,
            g2p,
            mining,
        }) => {
            let corpora = commands::load_corpora(&lexicon, &transcript)?;
            commands::session_init(&dir, corpora, mining.params(), g2p.as_deref())
        }
        Command::Session(SessionCommand::Status { dir }) => commands::session_status(&dir),
        Command::Session(SessionCommand::History { dir }) => commands::session_history(&dir),
        Command::Session(SessionCommand::Rollback { dir, k }) => {
            commands::session_rollback(&dir, k)
        }
    }
}
