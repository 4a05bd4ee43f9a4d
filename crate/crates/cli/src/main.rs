//! `ordembed`: train and evaluate order-embeddings from the command line.
//!
//! Exit codes: 0 success, 1 usage or contract error, 2 data or format
//! error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordembed::order::ScorerKind;
use ordembed::Error;

mod commands;
mod data;

#[derive(Parser, Debug)]
#[command(name = "ordembed", version, about = "Order-embeddings for hypernymy, caption-image retrieval and entailment")]
struct Cli {
    /// Worker threads for evaluation; training is always single-threaded.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hypernym graph utilities.
    #[command(subcommand)]
    Taxonomy(TaxonomyCmd),
    /// Hypernym prediction over a taxonomy split.
    #[command(subcommand)]
    Hypernym(HypernymCmd),
    /// Caption-image retrieval.
    #[command(subcommand)]
    Retrieval(RetrievalCmd),
    /// Two-class textual entailment.
    #[command(subcommand)]
    Entail(EntailCmd),
    /// Elementwise join (min) or meet (max) of embedded items.
    #[command(subcommand)]
    Algebra(AlgebraCmd),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Subcommand, Debug)]
enum TaxonomyCmd {
    /// Write the transitive closure of an edge list.
    Closure {
        /// Edge list, `child<TAB>parent` per line.
        #[arg(long)]
        edges: PathBuf,
        /// Output edge list of all ordered pairs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split closure pairs into train/dev/test.
    Split {
        /// Closure edge list.
        #[arg(long)]
        closure: PathBuf,
        /// Number of dev pairs.
        #[arg(long)]
        dev: usize,
        /// Number of test pairs.
        #[arg(long)]
        test: usize,
        /// Random seed (falls back to OE_SEED).
        #[arg(long, env = "OE_SEED")]
        seed: u64,
        /// Output split file with #train, #dev and #test sections.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write labeled dev/test pairs: each positive plus one corruption
    /// that is not in the closure.
    Negatives {
        /// Split file.
        #[arg(long)]
        split: PathBuf,
        /// Random seed (falls back to OE_SEED).
        #[arg(long, env = "OE_SEED")]
        seed: u64,
        /// Output labeled pair file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scorer {
    Order,
    Cosine,
}

impl From<Scorer> for ScorerKind {
    fn from(s: Scorer) -> Self {
        match s {
            Scorer::Order => ScorerKind::Order,
            Scorer::Cosine => ScorerKind::Cosine,
        }
    }
}

/// Flags overriding values from `--config`.
#[derive(Args, Debug, Clone)]
struct TrainFlags {
    /// Config file of `key = value` lines; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Loss margin.
    #[arg(long)]
    margin: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Random seed (falls back to OE_SEED, then the config file).
    #[arg(long, env = "OE_SEED")]
    seed: Option<u64>,
    /// Compatibility function.
    #[arg(long, value_enum)]
    scorer: Option<Scorer>,
    /// Place images above captions instead of below.
    #[arg(long)]
    reverse_order: bool,
}

#[derive(Subcommand, Debug)]
enum HypernymCmd {
    /// Train concept embeddings on the train section of a split.
    Train {
        /// Split file from `taxonomy split`.
        #[arg(long)]
        split: PathBuf,
        /// Labeled dev/test pairs from `taxonomy negatives`; generated
        /// from the seed when omitted.
        #[arg(long)]
        negatives: Option<PathBuf>,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Tune the threshold on dev and report test accuracy.
    Eval {
        /// Checkpoint from `hypernym train`.
        #[arg(long)]
        model: PathBuf,
        /// Split file the model was trained on.
        #[arg(long)]
        split: PathBuf,
        /// Labeled dev/test pairs; generated from the seed when omitted.
        #[arg(long)]
        negatives: Option<PathBuf>,
        /// Seed for generated negatives (falls back to OE_SEED, then the
        /// checkpoint's seed).
        #[arg(long, env = "OE_SEED")]
        seed: Option<u64>,
        /// Output metric report.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum RetrievalCmd {
    /// Train caption and image encoders.
    Train {
        /// Training captions (JSON lines).
        #[arg(long)]
        captions: PathBuf,
        /// Dev captions for early stopping.
        #[arg(long)]
        dev_captions: PathBuf,
        /// Image features (OEF1) covering both caption files.
        #[arg(long)]
        features: PathBuf,
        /// Vocabulary file; built from the training captions when omitted.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Recall@K and rank statistics in both directions.
    Eval {
        /// Checkpoint from `retrieval train`.
        #[arg(long)]
        model: PathBuf,
        /// Evaluation captions (JSON lines).
        #[arg(long)]
        captions: PathBuf,
        /// Image features (OEF1).
        #[arg(long)]
        features: PathBuf,
        /// Score with this function instead of the checkpoint's.
        #[arg(long, value_enum)]
        scorer: Option<Scorer>,
        /// Evaluate with images above captions.
        #[arg(long)]
        reverse_order: bool,
        /// Co-referring caption pairs in the length-contrast analysis; 0
        /// disables it.
        #[arg(long, default_value_t = 100)]
        length_pairs: usize,
        /// Output metric report.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum EntailCmd {
    /// Train the sentence encoder on labeled pairs.
    Train {
        /// Training pairs (`label<TAB>premise<TAB>hypothesis` or SNLI text).
        #[arg(long)]
        train_pairs: PathBuf,
        /// Dev pairs for early stopping.
        #[arg(long)]
        dev_pairs: PathBuf,
        /// Vocabulary file; built from the training pairs when omitted.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Tune the threshold on dev and report test accuracy.
    Eval {
        /// Checkpoint from `entail train`.
        #[arg(long)]
        model: PathBuf,
        /// Dev pairs for threshold tuning.
        #[arg(long)]
        dev_pairs: PathBuf,
        /// Test pairs.
        #[arg(long)]
        test_pairs: PathBuf,
        /// Output metric report.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct AlgebraArgs {
    /// Checkpoint of any task.
    #[arg(long)]
    model: PathBuf,
    /// Concept names (hypernym) or words (sentence models).
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<String>,
    /// Neighbors listed in each direction.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
}

#[derive(Subcommand, Debug)]
enum AlgebraCmd {
    /// Elementwise min: the most specific common abstraction.
    Join(AlgebraArgs),
    /// Elementwise max: the composition of the inputs.
    Meet(AlgebraArgs),
}

#[derive(Subcommand, Debug)]
enum SynthCmd {
    /// Random layered DAG as an edge list.
    Dag {
        /// Number of concepts.
        #[arg(long)]
        nodes: usize,
        /// Probability of each edge between adjacent levels.
        #[arg(long, default_value_t = 0.2)]
        edge_prob: f64,
        /// Number of levels; edges point from one level to the next.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Random seed (falls back to OE_SEED).
        #[arg(long, env = "OE_SEED")]
        seed: u64,
        /// Output edge list.
        #[arg(long)]
        out: PathBuf,
    },
    /// Captions of graded detail with matching image features.
    TwoLevel {
        /// Number of images.
        #[arg(long)]
        images: usize,
        /// Captions generated per image.
        #[arg(long, default_value_t = 2)]
        captions_per_image: usize,
        /// Token tiers; a full caption has one token per tier.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Number of distinct caption tokens.
        #[arg(long, default_value_t = 200)]
        vocab_size: usize,
        /// Weight of the image-specific random direction, in [0, 1).
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        /// Random seed (falls back to OE_SEED).
        #[arg(long, env = "OE_SEED")]
        seed: u64,
        /// Output captions (JSON lines).
        #[arg(long)]
        captions_out: PathBuf,
        /// Output features (OEF1).
        #[arg(long)]
        features_out: PathBuf,
        /// Output vocabulary.
        #[arg(long)]
        vocab_out: PathBuf,
    },
    /// Premise/hypothesis pairs where entailment means subsequence.
    Entail {
        /// Number of pairs.
        #[arg(long)]
        pairs: usize,
        /// Maximum premise length in tokens.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        /// Number of distinct tokens.
        #[arg(long, default_value_t = 50)]
        vocab_size: usize,
        /// Random seed (falls back to OE_SEED).
        #[arg(long, env = "OE_SEED")]
        seed: u64,
        /// Output pair file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Contract(_) => 1,
        Error::Numeric(_) => 3,
        Error::Cycle(_)
        | Error::Sampling(_)
        | Error::Format { .. }
        | Error::Corruption(_)
        | Error::Version(_)
        | Error::Io { .. } => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
