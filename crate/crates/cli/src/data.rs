//! Turning files and flags into the inputs of the library's task functions.

use std::collections::BTreeSet;
use std::path::Path;

use ordembed::encoders::{Vocabulary, UNK_TOKEN};
use ordembed::io::{
    encode_captions, load_features, read_captions_raw, read_entail_raw, read_labeled, read_split, read_vocab,
    EntailPair, FeatureMatrix, NamedSplit, RawEntail, RetrievalCorpus,
};
use ordembed::tasks::HypernymData;
use ordembed::training::{Checkpoint, TaskKind, TrainConfig};
use ordembed::{EdgeSplit, Error, LabeledPair, PairSet, Result, Taxonomy};

use crate::TrainFlags;

fn contract(msg: String) -> Error {
    Error::Contract(msg)
}

fn format_err(path: &Path, msg: String) -> Error {
    Error::Format {
        path: path.into(),
        message: msg,
    }
}

/// Task defaults, then the config file, then explicit flags.
pub fn train_config(flags: &TrainFlags, task: TaskKind) -> Result<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg = TrainConfig::parse(&text, task).map_err(|e| match e {
                Error::Contract(m) => format_err(path, m),
                other => other,
            })?;
            if cfg.task != task {
                return Err(contract(format!(
                    "{} is a {} config, expected {task}",
                    path.display(),
                    cfg.task
                )));
            }
            cfg
        }
        None => TrainConfig::for_task(task),
    };
    if let Some(v) = flags.dim {
        cfg.dim = v;
    }
    if let Some(v) = flags.margin {
        cfg.margin = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.scorer {
        cfg.scorer = v.into();
    }
    if flags.reverse_order {
        cfg.reverse_order = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pair_ids(tax: &Taxonomy, pairs: &[(String, String)]) -> PairSet {
    // every name comes from the edges the taxonomy was built from
    pairs
        .iter()
        .map(|(c, p)| (tax.id(c).expect("known concept"), tax.id(p).expect("known concept")))
        .collect()
}

pub struct HypernymInputs {
    pub taxonomy: Taxonomy,
    pub split: EdgeSplit,
    pub data: HypernymData,
}

/// Concepts are the names appearing anywhere in the split, so ids agree
/// between training and evaluation.
pub fn hypernym_inputs(split_path: &Path, negatives: Option<&Path>, seed: u64) -> Result<HypernymInputs> {
    let named: NamedSplit = read_split(split_path)?;
    let all: Vec<(String, String)> = named
        .train
        .iter()
        .chain(&named.dev)
        .chain(&named.test)
        .cloned()
        .collect();
    let taxonomy = Taxonomy::build(&all)?;
    let split = EdgeSplit {
        train: pair_ids(&taxonomy, &named.train),
        dev: pair_ids(&taxonomy, &named.dev),
        test: pair_ids(&taxonomy, &named.test),
        seed,
    };
    let mut data = HypernymData::from_split(&taxonomy, &split, seed)?;
    if let Some(path) = negatives {
        let sections = read_labeled(path)?;
        let section = |name: &str| -> Result<Vec<LabeledPair>> {
            let rows = sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, rows)| rows)
                .ok_or_else(|| format_err(path, format!("missing #{name} section")))?;
            rows.iter()
                .map(|(c, p, label)| {
                    let id = |n: &str| {
                        taxonomy
                            .id(n)
                            .ok_or_else(|| format_err(path, format!("concept '{n}' is not in the split")))
                    };
                    Ok(LabeledPair {
                        child: id(c)?,
                        parent: id(p)?,
                        label: *label,
                    })
                })
                .collect()
        };
        data.dev = section("dev")?;
        data.test = section("test")?;
    }
    Ok(HypernymInputs { taxonomy, split, data })
}

/// Token list of a checkpoint with `<unk>` at id 0.
pub fn checkpoint_vocab(ckpt: &Checkpoint) -> Result<Vocabulary> {
    match ckpt.vocab.split_first() {
        Some((first, rest)) if first == UNK_TOKEN => Vocabulary::from_tokens(rest.iter().cloned())
            .map_err(|e| Error::Version(format!("checkpoint vocabulary: {e}"))),
        _ => Err(Error::Version(format!("checkpoint vocabulary must start with '{UNK_TOKEN}'"))),
    }
}

/// Captions joined to their image features; only images with at least
/// one caption become retrieval candidates.
pub fn retrieval_corpus(captions: &Path, features: &FeatureMatrix, vocab: &Vocabulary) -> Result<RetrievalCorpus> {
    let raw = read_captions_raw(captions)?;
    let full = RetrievalCorpus::assemble(features, encode_captions(&raw, vocab), captions)?;
    let used: Vec<usize> = full.caption_image.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if used.is_empty() {
        return Err(format_err(captions, "no captions".into()));
    }
    full.select_images(&used)
}

pub fn caption_vocab(captions: &Path) -> Result<Vocabulary> {
    let raw = read_captions_raw(captions)?;
    let tokens: Vec<Vec<String>> = raw.iter().map(|c| ordembed::encoders::tokenize(&c.caption)).collect();
    Ok(Vocabulary::build(tokens.iter().map(Vec::as_slice), 1))
}

pub fn features(path: &Path) -> Result<FeatureMatrix> {
    load_features(path)
}

pub fn entail_raw(path: &Path) -> Result<Vec<RawEntail>> {
    let data = read_entail_raw(path)?;
    if data.skipped_unlabeled > 0 {
        log::info!("{}: skipped {} unlabeled pairs", path.display(), data.skipped_unlabeled);
    }
    if data.pairs.is_empty() {
        return Err(format_err(path, "no labeled pairs".into()));
    }
    Ok(data.pairs)
}

pub fn entail_vocab(raw: &[RawEntail]) -> Vocabulary {
    Vocabulary::build(raw.iter().flat_map(|p| [p.premise.as_slice(), p.hypothesis.as_slice()]), 1)
}

pub fn entail_pairs(path: &Path, vocab: &Vocabulary) -> Result<Vec<EntailPair>> {
    Ok(ordembed::io::encode_entail(&entail_raw(path)?, vocab))
}

pub fn vocab_file_or(path: Option<&Path>, build: impl FnOnce() -> Result<Vocabulary>) -> Result<Vocabulary> {
    match path {
        Some(p) => read_vocab(p),
        None => build(),
    }
}
