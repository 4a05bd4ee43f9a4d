use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{binary_accuracy, tune_threshold, MetricReport, ScoredPair};
use crate::numerics::{DenseVector, Parameters, Rng, TensorView};
use crate::order::{energy, ScorerKind};
use crate::taxonomy::{labeled_eval_set, sample_negative, EdgeSplit, LabeledPair, Pair, Taxonomy};
use crate::training::{
    margin_loss, run_epochs, Checkpoint, EpochLog, Objective, TaskKind, TrainConfig, TrainOutcome,
};

use super::{prefix_muts, prefix_views, shape2, EVAL_STREAM};

/// One independent nonnegative embedding per concept.
#[derive(Clone, Debug, PartialEq)]
pub struct HypernymModel {
    pub table: EmbeddingTable,
}

impl Parameters for HypernymModel {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        prefix_views("concepts", self.table.tensors())
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        prefix_muts("concepts", self.table.tensors_mut())
    }
}

impl HypernymModel {
    pub fn init(n_concepts: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Self {
            table: EmbeddingTable::init(n_concepts, dim, rng)?,
        })
    }

    pub fn n_concepts(&self) -> usize {
        self.table.vocab_size()
    }

    pub fn embed(&self, id: usize) -> Result<DenseVector> {
        self.table.lookup(id)
    }

    /// Energy of `child ⪯ parent` (the order penalty under the order scorer).
    pub fn energy(&self, kind: ScorerKind, child: usize, parent: usize) -> Result<f64> {
        energy(kind, &self.embed(child)?, &self.embed(parent)?)
    }

    pub fn scored(&self, kind: ScorerKind, pairs: &[LabeledPair]) -> Result<Vec<ScoredPair>> {
        pairs
            .iter()
            .map(|p| {
                Ok(ScoredPair {
                    penalty: self.energy(kind, p.child, p.parent)?,
                    label: p.label,
                })
            })
            .collect()
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_task(TaskKind::Hypernym)?;
        let (rows, cols) = shape2(ckpt, "concepts.weights")?;
        if rows != ckpt.vocab.len() {
            return Err(Error::Version(format!(
                "{rows} embeddings for {} concept names",
                ckpt.vocab.len()
            )));
        }
        let mut m = Self {
            table: EmbeddingTable::new(crate::numerics::DenseMatrix::zeros(rows, cols)),
        };
        ckpt.restore(&mut m)?;
        Ok(m)
    }
}

/// Concept names plus training positives and labeled evaluation pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct HypernymData {
    pub concepts: Vec<String>,
    pub train: Vec<Pair>,
    pub dev: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
}

impl HypernymData {
    /// Dev and test positives each get one corruption filtered against the
    /// full closure, drawn from `seed`.
    pub fn from_split(taxonomy: &Taxonomy, split: &EdgeSplit, seed: u64) -> Result<Self> {
        let closure = taxonomy.transitive_closure();
        let mut rng = Rng::new(seed).fork(EVAL_STREAM);
        let dev = labeled_eval_set(&split.dev, closure, taxonomy.len(), &mut rng)?;
        let test = labeled_eval_set(&split.test, closure, taxonomy.len(), &mut rng)?;
        Ok(Self {
            concepts: taxonomy.concepts().to_vec(),
            train: split.train.iter().copied().collect(),
            dev,
            test,
        })
    }
}

/// Each batch draws `batch` training positives uniformly with replacement
/// and corrupts each once. An epoch has `ceil(|train| / batch)` batches.
pub struct HypernymObjective<'a> {
    pub train: &'a [Pair],
    pub n_concepts: usize,
    pub batch: usize,
    pub margin: f64,
    pub kind: ScorerKind,
}

impl Objective<HypernymModel> for HypernymObjective<'_> {
    fn begin_epoch(&mut self, _epoch: usize, _rng: &mut Rng) -> Result<usize> {
        if self.train.is_empty() {
            return Err(Error::contract("no training pairs"));
        }
        Ok(self.train.len().div_ceil(self.batch))
    }

    fn batch(
        &mut self,
        _index: usize,
        model: &HypernymModel,
        grads: &mut HypernymModel,
        rng: &mut Rng,
    ) -> Result<f64> {
        let mut pos_ids = Vec::with_capacity(self.batch);
        let mut neg_ids = Vec::with_capacity(self.batch);
        for _ in 0..self.batch {
            let p = self.train[rng.choice(self.train.len())?];
            pos_ids.push(p);
            neg_ids.push(sample_negative(p, self.n_concepts, rng, None)?.pair());
        }
        let embed = |ids: &[Pair]| -> Result<Vec<(DenseVector, DenseVector)>> {
            ids.iter()
                .map(|&(c, p)| Ok((model.embed(c)?, model.embed(p)?)))
                .collect()
        };
        let out = margin_loss(self.kind, &embed(&pos_ids)?, &embed(&neg_ids)?, self.margin)?;
        let all = pos_ids.iter().zip(&out.pos_grads).chain(neg_ids.iter().zip(&out.neg_grads));
        for (&(c, p), (gc, gp)) in all {
            model.table.backward(c, gc, &mut grads.table)?;
            model.table.backward(p, gp, &mut grads.table)?;
        }
        Ok(out.loss)
    }
}

/// Trains from seed-derived initial embeddings; the dev metric is
/// threshold-tuned dev accuracy.
pub fn train_hypernym(
    config: &TrainConfig,
    data: &HypernymData,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<HypernymModel>> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let model = HypernymModel::init(data.concepts.len(), config.dim, &mut rng)?;
    let mut objective = HypernymObjective {
        train: &data.train,
        n_concepts: data.concepts.len(),
        batch: config.batch,
        margin: config.margin,
        kind: config.scorer,
    };
    let kind = config.scorer;
    run_epochs(
        config,
        model,
        &mut objective,
        |m| Ok(tune_threshold(&m.scored(kind, &data.dev)?)?.accuracy),
        on_epoch,
    )
}

/// Tunes the threshold on `dev` and reports accuracy on `test`.
pub fn evaluate_hypernym(
    model: &HypernymModel,
    kind: ScorerKind,
    dev: &[LabeledPair],
    test: &[LabeledPair],
) -> Result<MetricReport> {
    let t = tune_threshold(&model.scored(kind, dev)?)?;
    let test_acc = binary_accuracy(&model.scored(kind, test)?, t.threshold)?;
    let mut r = MetricReport::default();
    r.push("dev_accuracy", t.accuracy);
    r.push("threshold", t.threshold);
    r.push("test_accuracy", test_acc);
    r.push("test_pairs", test.len() as f64);
    Ok(r)
}
