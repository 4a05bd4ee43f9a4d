use rayon::prelude::*;

use crate::encoders::GruEncoder;
use crate::error::{Error, Result};
use crate::eval::{binary_accuracy, tune_threshold, MetricReport, ScoredPair};
use crate::io::EntailPair;
use crate::numerics::{DenseVector, Parameters, Rng, TensorView};
use crate::order::{energy, ScorerKind};
use crate::training::{
    margin_loss, run_epochs, Checkpoint, EpochLog, Objective, TaskKind, TrainConfig, TrainOutcome,
};

use super::{prefix_muts, prefix_views, shape2};

/// One GRU shared by premises and hypotheses.
#[derive(Clone, Debug, PartialEq)]
pub struct EntailmentModel {
    pub text: GruEncoder,
}

impl Parameters for EntailmentModel {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        prefix_views("text", self.text.tensors())
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        prefix_muts("text", self.text.tensors_mut())
    }
}

impl EntailmentModel {
    pub fn init(config: &TrainConfig, vocab: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            text: GruEncoder::init(vocab, config.word_dim, config.dim, config.normalize, rng)?,
        })
    }

    pub fn encode(&self, tokens: &[usize]) -> Result<DenseVector> {
        self.text.encode(tokens)
    }

    /// Energy with the premise below the hypothesis.
    pub fn energy(&self, kind: ScorerKind, pair: &EntailPair) -> Result<f64> {
        energy(kind, &self.encode(&pair.premise)?, &self.encode(&pair.hypothesis)?)
    }

    pub fn scored(&self, kind: ScorerKind, pairs: &[EntailPair], parallel: bool) -> Result<Vec<ScoredPair>> {
        let one = |p: &EntailPair| -> Result<ScoredPair> {
            Ok(ScoredPair {
                penalty: self.energy(kind, p)?,
                label: p.label.is_entailment(),
            })
        };
        if parallel {
            pairs.par_iter().map(one).collect()
        } else {
            pairs.iter().map(one).collect()
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_task(TaskKind::Entailment)?;
        let (vocab, word_dim) = shape2(ckpt, "text.words.weights")?;
        let (hidden, _) = shape2(ckpt, "text.w_z")?;
        if vocab != ckpt.vocab.len() {
            return Err(Error::Version(format!(
                "{vocab} word vectors for {} vocabulary entries",
                ckpt.vocab.len()
            )));
        }
        let mut m = Self {
            text: GruEncoder::zeros(vocab, word_dim, hidden, ckpt.config.normalize),
        };
        ckpt.restore(&mut m)?;
        Ok(m)
    }
}

/// Shuffled minibatches of labeled pairs; non-entailed pairs are the
/// negatives.
pub struct EntailmentObjective<'a> {
    pub pairs: &'a [EntailPair],
    pub batch: usize,
    pub margin: f64,
    pub kind: ScorerKind,
    order: Vec<usize>,
}

impl<'a> EntailmentObjective<'a> {
    pub fn new(pairs: &'a [EntailPair], config: &TrainConfig) -> Self {
        Self {
            pairs,
            batch: config.batch,
            margin: config.margin,
            kind: config.scorer,
            order: Vec::new(),
        }
    }
}

impl Objective<EntailmentModel> for EntailmentObjective<'_> {
    fn begin_epoch(&mut self, _epoch: usize, rng: &mut Rng) -> Result<usize> {
        if self.pairs.is_empty() {
            return Err(Error::contract("no training pairs"));
        }
        self.order = (0..self.pairs.len()).collect();
        rng.shuffle(&mut self.order);
        Ok(self.order.len().div_ceil(self.batch))
    }

    fn batch(
        &mut self,
        index: usize,
        model: &EntailmentModel,
        grads: &mut EntailmentModel,
        _rng: &mut Rng,
    ) -> Result<f64> {
        let end = ((index + 1) * self.batch).min(self.order.len());
        let items: Vec<&EntailPair> = self.order[index * self.batch..end]
            .iter()
            .map(|&k| &self.pairs[k])
            .collect();
        let (pos, neg): (Vec<&EntailPair>, Vec<&EntailPair>) =
            items.into_iter().partition(|p| p.label.is_entailment());
        let traces = |ps: &[&EntailPair]| -> Result<Vec<_>> {
            ps.iter()
                .map(|p| Ok((model.text.forward(&p.premise)?, model.text.forward(&p.hypothesis)?)))
                .collect()
        };
        let pos_t = traces(&pos)?;
        let neg_t = traces(&neg)?;
        let outputs = |ts: &[(crate::encoders::GruTrace, crate::encoders::GruTrace)]| -> Vec<(DenseVector, DenseVector)> {
            ts.iter()
                .map(|(a, b)| (a.output().clone(), b.output().clone()))
                .collect()
        };
        let out = margin_loss(self.kind, &outputs(&pos_t), &outputs(&neg_t), self.margin)?;
        let all = pos
            .iter()
            .zip(&pos_t)
            .zip(&out.pos_grads)
            .chain(neg.iter().zip(&neg_t).zip(&out.neg_grads));
        for ((pair, (tp, th)), (gp, gh)) in all {
            model.text.backward(&pair.premise, tp, gp, &mut grads.text)?;
            model.text.backward(&pair.hypothesis, th, gh, &mut grads.text)?;
        }
        Ok(out.loss)
    }
}

pub fn train_entailment(
    config: &TrainConfig,
    train: &[EntailPair],
    dev: &[EntailPair],
    vocab_size: usize,
    parallel_eval: bool,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<EntailmentModel>> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let model = EntailmentModel::init(config, vocab_size, &mut rng)?;
    let mut objective = EntailmentObjective::new(train, config);
    let kind = config.scorer;
    run_epochs(
        config,
        model,
        &mut objective,
        |m| Ok(tune_threshold(&m.scored(kind, dev, parallel_eval)?)?.accuracy),
        on_epoch,
    )
}

/// Tunes the threshold on `dev`, then reports 2-class accuracy on `test`.
pub fn evaluate_entailment(
    model: &EntailmentModel,
    kind: ScorerKind,
    dev: &[EntailPair],
    test: &[EntailPair],
    parallel: bool,
) -> Result<MetricReport> {
    let t = tune_threshold(&model.scored(kind, dev, parallel)?)?;
    let acc = binary_accuracy(&model.scored(kind, test, parallel)?, t.threshold)?;
    let mut r = MetricReport::default();
    r.push("dev_accuracy", t.accuracy);
    r.push("threshold", t.threshold);
    r.push("test_accuracy", acc);
    r.push("test_pairs", test.len() as f64);
    Ok(r)
}
