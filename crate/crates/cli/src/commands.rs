use std::path::Path;

use log::info;
use ordembed::encoders::{tokenize, GruEncoder, Vocabulary};
use ordembed::eval::MetricReport;
use ordembed::io::{
    load_checkpoint, read_edges, save_checkpoint, save_features, write_captions, write_edges, write_entail,
    write_labeled, write_report, write_split, write_vocab, NamedSplit,
};
use ordembed::synthetic::{gen_dag, gen_entailment, gen_two_level, EntailSpec, TwoLevelSpec};
use ordembed::tasks::{
    combine, evaluate_entailment, evaluate_hypernym, evaluate_retrieval, nearest_by_penalty, train_entailment,
    train_hypernym, train_retrieval, Combine, EntailmentModel, HypernymModel, RetrievalModel,
};
use ordembed::taxonomy::{closure_baseline_accuracy, split};
use ordembed::training::{Checkpoint, EpochLog, TaskKind};
use ordembed::{DenseVector, Error, LabeledPair, PairSet, Result, Taxonomy};

use crate::data::{self, HypernymInputs};
use crate::{AlgebraArgs, AlgebraCmd, Cli, Command, EntailCmd, HypernymCmd, RetrievalCmd, SynthCmd, TaxonomyCmd};

pub fn run(cli: Cli) -> Result<()> {
    let parallel = cli.threads > 1;
    if parallel {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads as usize)
            .build_global()
            .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Taxonomy(c) => taxonomy(c),
        Command::Hypernym(c) => hypernym(c),
        Command::Retrieval(c) => retrieval(c, parallel),
        Command::Entail(c) => entail(c, parallel),
        Command::Algebra(c) => algebra(c),
        Command::Synth(c) => synth(c),
    }
}

fn epoch_line(log: &EpochLog) {
    println!("{}\t{:.6}\t{:.4}", log.epoch, log.train_loss, log.dev_metric);
}

fn named(tax: &Taxonomy, pairs: &PairSet) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|&(c, p)| (tax.name(c).to_string(), tax.name(p).to_string()))
        .collect()
}

fn named_labeled(tax: &Taxonomy, pairs: &[LabeledPair]) -> Vec<(String, String, bool)> {
    pairs
        .iter()
        .map(|p| (tax.name(p.child).to_string(), tax.name(p.parent).to_string(), p.label))
        .collect()
}

fn finish_report(report: &MetricReport, out: &Path) -> Result<()> {
    write_report(out, report)?;
    print!("{}", report.to_table());
    Ok(())
}

fn save(ckpt: &Checkpoint, out: &Path) -> Result<()> {
    save_checkpoint(ckpt, out)?;
    info!(
        "best epoch {} (dev metric {:.4}); checkpoint written to {}",
        ckpt.epoch,
        ckpt.dev_metric,
        out.display()
    );
    Ok(())
}

fn taxonomy(cmd: TaxonomyCmd) -> Result<()> {
    match cmd {
        TaxonomyCmd::Closure { edges, out } => {
            let tax = Taxonomy::build(&read_edges(&edges)?)?;
            let closure = tax.transitive_closure();
            write_edges(&out, &named(&tax, closure))?;
            info!("{} concepts, {} ordered pairs", tax.len(), closure.len());
        }
        TaxonomyCmd::Split {
            closure,
            dev,
            test,
            seed,
            out,
        } => {
            let pairs = read_edges(&closure)?;
            let tax = Taxonomy::build(&pairs)?;
            let full = tax.transitive_closure();
            if full.len() != tax.direct_edges().len() {
                info!(
                    "{} is not transitively closed; splitting its closure of {} pairs",
                    closure.display(),
                    full.len()
                );
            }
            let s = split(full, dev, test, seed)?;
            write_split(
                &out,
                &NamedSplit {
                    train: named(&tax, &s.train),
                    dev: named(&tax, &s.dev),
                    test: named(&tax, &s.test),
                },
            )?;
        }
        TaxonomyCmd::Negatives { split, seed, out } => {
            let HypernymInputs { taxonomy, data, .. } = data::hypernym_inputs(&split, None, seed)?;
            write_labeled(
                &out,
                &[
                    ("dev", named_labeled(&taxonomy, &data.dev)),
                    ("test", named_labeled(&taxonomy, &data.test)),
                ],
            )?;
        }
    }
    Ok(())
}

fn hypernym(cmd: HypernymCmd) -> Result<()> {
    match cmd {
        HypernymCmd::Train {
            split,
            negatives,
            out,
            train,
        } => {
            let cfg = data::train_config(&train, TaskKind::Hypernym)?;
            let inputs = data::hypernym_inputs(&split, negatives.as_deref(), cfg.seed)?;
            let run = train_hypernym(&cfg, &inputs.data, epoch_line)?;
            let ckpt = Checkpoint::capture(&run.best, &cfg, run.best_epoch, run.best_metric, inputs.data.concepts);
            save(&ckpt, &out)
        }
        HypernymCmd::Eval {
            model,
            split,
            negatives,
            seed,
            out,
        } => {
            let ckpt = load_checkpoint(&model)?;
            let m = HypernymModel::from_checkpoint(&ckpt)?;
            let seed = seed.unwrap_or(ckpt.config.seed);
            let inputs = data::hypernym_inputs(&split, negatives.as_deref(), seed)?;
            if ckpt.vocab != inputs.data.concepts {
                return Err(Error::Version(format!(
                    "{} was trained on different concepts than {}",
                    model.display(),
                    split.display()
                )));
            }
            let mut report = evaluate_hypernym(&m, ckpt.config.scorer, &inputs.data.dev, &inputs.data.test)?;
            report.push(
                "closure_baseline_accuracy",
                closure_baseline_accuracy(
                    inputs.taxonomy.len(),
                    &inputs.split.train,
                    &inputs.split.dev,
                    &inputs.data.test,
                )?,
            );
            finish_report(&report, &out)
        }
    }
}

fn retrieval(cmd: RetrievalCmd, parallel: bool) -> Result<()> {
    match cmd {
        RetrievalCmd::Train {
            captions,
            dev_captions,
            features,
            vocab,
            out,
            train,
        } => {
            let cfg = data::train_config(&train, TaskKind::Retrieval)?;
            let vocab = data::vocab_file_or(vocab.as_deref(), || data::caption_vocab(&captions))?;
            let feats = data::features(&features)?;
            let train_set = data::retrieval_corpus(&captions, &feats, &vocab)?;
            let dev_set = data::retrieval_corpus(&dev_captions, &feats, &vocab)?;
            info!(
                "{} training captions over {} images, {} dev images, vocabulary {}",
                train_set.captions.len(),
                train_set.images.len(),
                dev_set.images.len(),
                vocab.len()
            );
            let run = train_retrieval(&cfg, &train_set, &dev_set, vocab.len(), parallel, epoch_line)?;
            let ckpt = Checkpoint::capture(&run.best, &cfg, run.best_epoch, run.best_metric, vocab.tokens().to_vec());
            save(&ckpt, &out)
        }
        RetrievalCmd::Eval {
            model,
            captions,
            features,
            scorer,
            reverse_order,
            length_pairs,
            out,
        } => {
            let ckpt = load_checkpoint(&model)?;
            let m = RetrievalModel::from_checkpoint(&ckpt)?;
            let vocab = data::checkpoint_vocab(&ckpt)?;
            let feats = data::features(&features)?;
            let corpus = data::retrieval_corpus(&captions, &feats, &vocab)?;
            let kind = scorer.map_or(ckpt.config.scorer, Into::into);
            let reversed = reverse_order || ckpt.config.reverse_order;
            let report = evaluate_retrieval(&m, &corpus, kind, reversed, length_pairs, parallel)?;
            finish_report(&report, &out)
        }
    }
}

fn entail(cmd: EntailCmd, parallel: bool) -> Result<()> {
    match cmd {
        EntailCmd::Train {
            train_pairs,
            dev_pairs,
            vocab,
            out,
            train,
        } => {
            let cfg = data::train_config(&train, TaskKind::Entailment)?;
            let raw = data::entail_raw(&train_pairs)?;
            let vocab = data::vocab_file_or(vocab.as_deref(), || Ok(data::entail_vocab(&raw)))?;
            let train_set = ordembed::io::encode_entail(&raw, &vocab);
            let dev_set = data::entail_pairs(&dev_pairs, &vocab)?;
            let run = train_entailment(&cfg, &train_set, &dev_set, vocab.len(), parallel, epoch_line)?;
            let ckpt = Checkpoint::capture(&run.best, &cfg, run.best_epoch, run.best_metric, vocab.tokens().to_vec());
            save(&ckpt, &out)
        }
        EntailCmd::Eval {
            model,
            dev_pairs,
            test_pairs,
            out,
        } => {
            let ckpt = load_checkpoint(&model)?;
            let m = EntailmentModel::from_checkpoint(&ckpt)?;
            let vocab = data::checkpoint_vocab(&ckpt)?;
            let dev = data::entail_pairs(&dev_pairs, &vocab)?;
            let test = data::entail_pairs(&test_pairs, &vocab)?;
            let report = evaluate_entailment(&m, ckpt.config.scorer, &dev, &test, parallel)?;
            finish_report(&report, &out)?;
            if let Some(acc) = report.get("test_accuracy") {
                println!("2-class accuracy: {acc:.1}");
            }
            Ok(())
        }
    }
}

fn encode_words(text: &GruEncoder, vocab: &Vocabulary, inputs: &[String]) -> Result<Vec<DenseVector>> {
    inputs
        .iter()
        .map(|s| {
            let tokens = tokenize(s);
            for t in tokens.iter().filter(|t| vocab.get(t).is_none()) {
                log::warn!("'{t}' is not in the vocabulary; using <unk>");
            }
            text.encode(&vocab.encode(&tokens))
        })
        .collect()
}

fn algebra(cmd: AlgebraCmd) -> Result<()> {
    let (op, args): (Combine, AlgebraArgs) = match cmd {
        AlgebraCmd::Join(a) => (Combine::Join, a),
        AlgebraCmd::Meet(a) => (Combine::Meet, a),
    };
    let ckpt = load_checkpoint(&args.model)?;
    let (names, candidates, items) = match ckpt.task() {
        TaskKind::Hypernym => {
            let m = HypernymModel::from_checkpoint(&ckpt)?;
            let candidates = (0..m.n_concepts()).map(|i| m.embed(i)).collect::<Result<Vec<_>>>()?;
            let items = args
                .inputs
                .iter()
                .map(|name| match ckpt.vocab.iter().position(|c| c == name) {
                    Some(i) => Ok(candidates[i].clone()),
                    None => Err(Error::Contract(format!("unknown concept '{name}'"))),
                })
                .collect::<Result<Vec<_>>>()?;
            (ckpt.vocab.clone(), candidates, items)
        }
        task => {
            let text = match task {
                TaskKind::Retrieval => RetrievalModel::from_checkpoint(&ckpt)?.text,
                _ => EntailmentModel::from_checkpoint(&ckpt)?.text,
            };
            let vocab = data::checkpoint_vocab(&ckpt)?;
            let candidates = (0..vocab.len()).map(|i| text.encode(&[i])).collect::<Result<Vec<_>>>()?;
            let items = encode_words(&text, &vocab, &args.inputs)?;
            (vocab.tokens().to_vec(), candidates, items)
        }
    };
    let result = combine(op, &items)?;
    let neighbors = nearest_by_penalty(&result, &candidates, args.top_k)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    println!("op\t{}", if op == Combine::Join { "join" } else { "meet" });
    println!("inputs\t{}", args.inputs.join(" | "));
    println!("vector\t{}", fmt(&result));
    for (direction, list) in [("above", &neighbors.above), ("below", &neighbors.below)] {
        for (rank, (i, p)) in list.iter().enumerate() {
            println!("{direction}\t{}\t{}\t{p:.6}", rank + 1, names[*i]);
        }
    }
    Ok(())
}

fn synth(cmd: SynthCmd) -> Result<()> {
    match cmd {
        SynthCmd::Dag {
            nodes,
            edge_prob,
            levels,
            seed,
            out,
        } => {
            let tax = gen_dag(nodes, edge_prob, levels, seed)?;
            write_edges(&out, &named(&tax, tax.direct_edges()))
        }
        SynthCmd::TwoLevel {
            images,
            captions_per_image,
            levels,
            vocab_size,
            noise,
            seed,
            captions_out,
            features_out,
            vocab_out,
        } => {
            let spec = TwoLevelSpec {
                vocab_size,
                noise,
                ..TwoLevelSpec::new(images, captions_per_image, levels, seed)
            };
            let corpus = gen_two_level(&spec)?;
            write_captions(&captions_out, &corpus.captions)?;
            save_features(&features_out, &corpus.features)?;
            write_vocab(&vocab_out, &Vocabulary::from_tokens(corpus.vocab)?)
        }
        SynthCmd::Entail {
            pairs,
            max_len,
            vocab_size,
            seed,
            out,
        } => {
            let spec = EntailSpec {
                vocab_size,
                ..EntailSpec::new(pairs, max_len, seed)
            };
            write_entail(&out, &gen_entailment(&spec)?)
        }
    }
}
