use rayon::prelude::*;

use crate::encoders::{GruEncoder, LinearProjection};
use crate::error::{Error, Result};
use crate::eval::{
    caption_image_scores, fold_average_with, length_contrast, MetricReport, RetrievalMetrics,
    FIVE_FOLD_IMAGES,
};
use crate::io::RetrievalCorpus;
use crate::numerics::{DenseMatrix, DenseVector, Parameters, Rng, TensorView};
use crate::order::ScorerKind;
use crate::training::{
    ranking_loss, run_epochs, Checkpoint, EpochLog, Objective, TaskKind, TrainConfig, TrainOutcome,
};

use super::{prefix_muts, prefix_views, shape2};

/// GRU caption encoder and linear image projection into a shared space.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalModel {
    pub text: GruEncoder,
    pub image: LinearProjection,
}

impl Parameters for RetrievalModel {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let mut v = prefix_views("text", self.text.tensors());
        v.extend(prefix_views("image", self.image.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut v = prefix_muts("text", self.text.tensors_mut());
        v.extend(prefix_muts("image", self.image.tensors_mut()));
        v
    }
}

/// The symmetric cosine ablation drops the absolute-value head, since
/// nonnegativity only matters to the order penalty.
fn uses_absolute(config: &TrainConfig) -> bool {
    config.scorer == ScorerKind::Order
}

impl RetrievalModel {
    pub fn init(config: &TrainConfig, vocab: usize, feat_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut text = GruEncoder::init(vocab, config.word_dim, config.dim, config.normalize, rng)?;
        let mut image = LinearProjection::init(config.dim, feat_dim, config.normalize, rng)?;
        text.absolute = uses_absolute(config);
        image.absolute = uses_absolute(config);
        Ok(Self { text, image })
    }

    pub fn encode_caption(&self, tokens: &[usize]) -> Result<DenseVector> {
        self.text.encode(tokens)
    }

    pub fn encode_image(&self, feat: &[f64]) -> Result<DenseVector> {
        self.image.project(feat)
    }

    /// Caption and image embeddings for a whole corpus.
    pub fn embed_corpus(
        &self,
        corpus: &RetrievalCorpus,
        parallel: bool,
    ) -> Result<(Vec<DenseVector>, Vec<DenseVector>)> {
        if parallel {
            let caps = corpus
                .captions
                .par_iter()
                .map(|c| self.encode_caption(&c.tokens))
                .collect::<Result<_>>()?;
            let imgs = corpus.images.par_iter().map(|i| self.encode_image(i)).collect::<Result<_>>()?;
            Ok((caps, imgs))
        } else {
            let caps = corpus
                .captions
                .iter()
                .map(|c| self.encode_caption(&c.tokens))
                .collect::<Result<_>>()?;
            let imgs = corpus.images.iter().map(|i| self.encode_image(i)).collect::<Result<_>>()?;
            Ok((caps, imgs))
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_task(TaskKind::Retrieval)?;
        let (vocab, word_dim) = shape2(ckpt, "text.words.weights")?;
        let (hidden, _) = shape2(ckpt, "text.w_z")?;
        let (dim_out, feat_dim) = shape2(ckpt, "image.w")?;
        if vocab != ckpt.vocab.len() {
            return Err(Error::Version(format!(
                "{vocab} word vectors for {} vocabulary entries",
                ckpt.vocab.len()
            )));
        }
        let normalize = ckpt.config.normalize;
        let mut text = GruEncoder::zeros(vocab, word_dim, hidden, normalize);
        let mut image = LinearProjection::new(DenseMatrix::zeros(dim_out, feat_dim), normalize);
        text.absolute = uses_absolute(&ckpt.config);
        image.absolute = uses_absolute(&ckpt.config);
        let mut m = Self { text, image };
        ckpt.restore(&mut m)?;
        Ok(m)
    }
}

/// Shuffled caption minibatches paired with their images; the other items
/// of the batch supply the contrastive terms.
pub struct RetrievalObjective<'a> {
    pub corpus: &'a RetrievalCorpus,
    pub batch: usize,
    pub margin: f64,
    pub kind: ScorerKind,
    pub reversed: bool,
    order: Vec<usize>,
}

impl<'a> RetrievalObjective<'a> {
    pub fn new(corpus: &'a RetrievalCorpus, config: &TrainConfig) -> Self {
        Self {
            corpus,
            batch: config.batch,
            margin: config.margin,
            kind: config.scorer,
            reversed: config.reverse_order,
            order: Vec::new(),
        }
    }
}

impl Objective<RetrievalModel> for RetrievalObjective<'_> {
    fn begin_epoch(&mut self, _epoch: usize, rng: &mut Rng) -> Result<usize> {
        if self.corpus.captions.is_empty() {
            return Err(Error::contract("no training captions"));
        }
        self.order = (0..self.corpus.captions.len()).collect();
        rng.shuffle(&mut self.order);
        Ok(self.order.len().div_ceil(self.batch))
    }

    fn batch(
        &mut self,
        index: usize,
        model: &RetrievalModel,
        grads: &mut RetrievalModel,
        _rng: &mut Rng,
    ) -> Result<f64> {
        let end = ((index + 1) * self.batch).min(self.order.len());
        let items = &self.order[index * self.batch..end];
        let mut cap_traces = Vec::with_capacity(items.len());
        let mut img_traces = Vec::with_capacity(items.len());
        for &c in items {
            cap_traces.push(model.text.forward(&self.corpus.captions[c].tokens)?);
            let feat = &self.corpus.images[self.corpus.caption_image[c]];
            img_traces.push(model.image.forward(feat)?);
        }
        let caps: Vec<DenseVector> = cap_traces.iter().map(|t| t.output().clone()).collect();
        let imgs: Vec<DenseVector> = img_traces.iter().map(|t| t.output().clone()).collect();
        let out = ranking_loss(&caps, &imgs, self.margin, self.kind, self.reversed)?;
        for (k, &c) in items.iter().enumerate() {
            let tokens = &self.corpus.captions[c].tokens;
            model
                .text
                .backward(tokens, &cap_traces[k], &out.caption_grads[k], &mut grads.text)?;
            let feat = &self.corpus.images[self.corpus.caption_image[c]];
            model
                .image
                .backward(feat, &img_traces[k], &out.image_grads[k], &mut grads.image)?;
        }
        Ok(out.loss)
    }
}

/// Retrieval metrics in both directions, averaged over `folds` contiguous
/// image folds.
pub fn retrieval_metrics_for(
    model: &RetrievalModel,
    corpus: &RetrievalCorpus,
    kind: ScorerKind,
    reversed: bool,
    folds: usize,
    parallel: bool,
) -> Result<RetrievalMetrics> {
    let (caps, imgs) = model.embed_corpus(corpus, parallel)?;
    fold_average_with(imgs.len(), &corpus.caption_image, folds, |c_ids, i_ids| {
        let c: Vec<DenseVector> = c_ids.iter().map(|&k| caps[k].clone()).collect();
        let i: Vec<DenseVector> = i_ids.iter().map(|&k| imgs[k].clone()).collect();
        caption_image_scores(kind, reversed, &c, &i, parallel)
    })
}

/// Five 1000-image folds for a 5000-image set, otherwise a single fold.
fn default_folds(n_images: usize) -> usize {
    if n_images == FIVE_FOLD_IMAGES {
        5
    } else {
        1
    }
}

/// Sum of R@1, R@5, R@10 over both directions on `dev`.
pub fn retrieval_dev_metric(
    model: &RetrievalModel,
    dev: &RetrievalCorpus,
    config: &TrainConfig,
    parallel: bool,
) -> Result<f64> {
    let m = retrieval_metrics_for(
        model,
        dev,
        config.scorer,
        config.reverse_order,
        default_folds(dev.images.len()),
        parallel,
    )?;
    Ok(m.recall_sum())
}

pub fn train_retrieval(
    config: &TrainConfig,
    train: &RetrievalCorpus,
    dev: &RetrievalCorpus,
    vocab_size: usize,
    parallel_eval: bool,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<RetrievalModel>> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let model = RetrievalModel::init(config, vocab_size, train.feat_dim(), &mut rng)?;
    let mut objective = RetrievalObjective::new(train, config);
    run_epochs(
        config,
        model,
        &mut objective,
        |m| retrieval_dev_metric(m, dev, config, parallel_eval),
        on_epoch,
    )
}

/// Both retrieval directions (five-fold on a 5000-image set) plus the
/// length-contrast statistics over the `length_pairs` co-referring caption
/// pairs with the largest length difference (skipped when 0).
pub fn evaluate_retrieval(
    model: &RetrievalModel,
    corpus: &RetrievalCorpus,
    kind: ScorerKind,
    reversed: bool,
    length_pairs: usize,
    parallel: bool,
) -> Result<MetricReport> {
    let m = retrieval_metrics_for(
        model,
        corpus,
        kind,
        reversed,
        default_folds(corpus.images.len()),
        parallel,
    )?;
    let mut r = MetricReport::default();
    r.push_rank("caption_retrieval", &m.caption_retrieval);
    r.push_rank("image_retrieval", &m.image_retrieval);
    r.push("recall_sum", m.recall_sum());
    if length_pairs > 0 {
        let (caps, imgs) = model.embed_corpus(corpus, parallel)?;
        let lc = length_contrast(
            kind,
            reversed,
            &corpus.caption_lengths(),
            &corpus.caption_image,
            &caps,
            &imgs,
            length_pairs,
        )?;
        r.push("length_contrast.pairs", lc.pairs as f64);
        r.push("length_contrast.short_mean_rank", lc.short_mean_rank);
        r.push("length_contrast.long_mean_rank", lc.long_mean_rank);
        r.push("length_contrast.image_mean_rank", lc.image_mean_rank);
        r.push("length_contrast.cross_mean_rank", lc.cross_mean_rank);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Vocabulary;
    use crate::io::{encode_captions, RetrievalCorpus};
    use crate::numerics::finite_diff_check_skipping;
    use crate::synthetic::{gen_two_level, TwoLevelSpec};
    use std::path::Path;

    fn tiny() -> (RetrievalCorpus, Vocabulary) {
        let mut spec = TwoLevelSpec::new(4, 2, 3, 9);
        spec.vocab_size = 12;
        spec.feat_dim = 5;
        let c = gen_two_level(&spec).unwrap();
        let vocab = Vocabulary::from_tokens(c.vocab.iter().cloned()).unwrap();
        let caps = encode_captions(&c.captions, &vocab);
        (RetrievalCorpus::assemble(&c.features, caps, Path::new("x")).unwrap(), vocab)
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let (corpus, vocab) = tiny();
        let mut cfg = TrainConfig::for_task(TaskKind::Retrieval);
        cfg.dim = 4;
        cfg.word_dim = 3;
        cfg.batch = 8;
        cfg.margin = 0.5;
        let model = RetrievalModel::init(&cfg, vocab.len(), corpus.feat_dim(), &mut Rng::new(2)).unwrap();
        let mut obj = RetrievalObjective::new(&corpus, &cfg);
        obj.begin_epoch(1, &mut Rng::new(0)).unwrap();
        let mut grads = model.zeroed();
        obj.batch(0, &model, &mut grads, &mut Rng::new(0)).unwrap();
        let point = model.flatten();
        let mut probe = model.clone();
        let err = finite_diff_check_skipping(
            |x| {
                probe.load_flat(x);
                obj.batch(0, &probe, &mut probe.zeroed(), &mut Rng::new(0)).unwrap()
            },
            &grads.flatten(),
            &point,
            1e-6,
            |_| false,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let (corpus, vocab) = tiny();
        let mut cfg = TrainConfig::for_task(TaskKind::Retrieval);
        cfg.dim = 4;
        cfg.word_dim = 3;
        let m = RetrievalModel::init(&cfg, vocab.len(), corpus.feat_dim(), &mut Rng::new(1)).unwrap();
        let ck = Checkpoint::capture(&m, &cfg, 2, 10.0, vocab.tokens().to_vec());
        let back = RetrievalModel::from_checkpoint(&ck).unwrap();
        assert_eq!(back, m);
        let t = &corpus.captions[0].tokens;
        assert_eq!(back.encode_caption(t).unwrap(), m.encode_caption(t).unwrap());
    }
}
