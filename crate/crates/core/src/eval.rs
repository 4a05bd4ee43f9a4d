//! Threshold-tuned binary classification and ranking metrics.
//!
//! Conventions:
//! * a pair is classified positive iff `penalty <= threshold`;
//! * candidates are ranked by descending score with ties broken toward the
//!   lower candidate index (stable sort), and a query's rank is the 1-based
//!   position of its best-placed ground-truth candidate;
//! * the median of an even number of ranks is the mean of the two middle
//!   values.

use std::fmt::Write as _;

use log::warn;

use crate::error::{check_dims, Error, Result};
use crate::numerics::DenseVector;
use crate::order::{score, score_matrix, ScorerKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredPair {
    pub penalty: f64,
    pub label: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub threshold: f64,
    /// Accuracy (percent) on the tuning set.
    pub accuracy: f64,
}

/// Threshold maximising accuracy over `dev`. Candidates are `-inf`, the
/// midpoints between consecutive distinct penalties, and `+inf`; ties go to
/// the smallest threshold.
pub fn tune_threshold(dev: &[ScoredPair]) -> Result<Threshold> {
    let n_pos = dev.iter().filter(|p| p.label).count();
    if n_pos == 0 || n_pos == dev.len() {
        return Err(Error::contract("threshold tuning needs both labels in the dev set"));
    }
    if dev.iter().any(|p| !p.penalty.is_finite()) {
        return Err(Error::numeric("non-finite penalty in dev set"));
    }
    let mut sorted = dev.to_vec();
    sorted.sort_by(|a, b| a.penalty.total_cmp(&b.penalty));

    // threshold -inf: every pair negative
    let mut correct = dev.len() - n_pos;
    let mut best = Threshold {
        threshold: f64::NEG_INFINITY,
        accuracy: correct as f64,
    };
    let mut i = 0;
    while i < sorted.len() {
        let p = sorted[i].penalty;
        while i < sorted.len() && sorted[i].penalty == p {
            if sorted[i].label {
                correct += 1;
            } else {
                correct -= 1;
            }
            i += 1;
        }
        let threshold = match sorted.get(i) {
            Some(next) => 0.5 * (p + next.penalty),
            None => f64::INFINITY,
        };
        if correct as f64 > best.accuracy {
            best = Threshold {
                threshold,
                accuracy: correct as f64,
            };
        }
    }
    best.accuracy *= 100.0 / dev.len() as f64;
    Ok(best)
}

/// Percent of pairs whose predicted label (`penalty <= threshold`) matches.
pub fn binary_accuracy(test: &[ScoredPair], threshold: f64) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::contract("accuracy over an empty test set"));
    }
    let correct = test
        .iter()
        .filter(|p| (p.penalty <= threshold) == p.label)
        .count();
    Ok(100.0 * correct as f64 / test.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RankMetrics {
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub median_rank: f64,
    pub mean_rank: f64,
}

impl RankMetrics {
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::contract("no ranks to summarise"));
        }
        let n = ranks.len() as f64;
        let recall = |k: usize| 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        let mut sorted = ranks.to_vec();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            0.5 * (sorted[mid - 1] + sorted[mid]) as f64
        } else {
            sorted[mid] as f64
        };
        Ok(Self {
            r1: recall(1),
            r5: recall(5),
            r10: recall(10),
            median_rank: median,
            mean_rank: ranks.iter().sum::<usize>() as f64 / n,
        })
    }

    /// Arithmetic mean of each field.
    pub fn average(items: &[RankMetrics]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::contract("nothing to average"));
        }
        let n = items.len() as f64;
        let sum = |f: fn(&RankMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            r1: sum(|m| m.r1),
            r5: sum(|m| m.r5),
            r10: sum(|m| m.r10),
            median_rank: sum(|m| m.median_rank),
            mean_rank: sum(|m| m.mean_rank),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankResult {
    /// 1-based rank per query.
    pub ranks: Vec<usize>,
    pub metrics: RankMetrics,
}

/// Ranks of the best ground-truth candidate for each query row of `scores`.
pub fn rank_targets(scores: &[Vec<f64>], gt: &[Vec<usize>]) -> Result<RankResult> {
    check_dims("rank_targets queries", gt.len(), scores.len())?;
    let mut ranks = Vec::with_capacity(scores.len());
    let mut order: Vec<usize> = Vec::new();
    for (q, (row, targets)) in scores.iter().zip(gt).enumerate() {
        if targets.is_empty() {
            return Err(Error::contract(format!("query {q} has no ground truth")));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= row.len()) {
            return Err(Error::contract(format!(
                "query {q}: ground truth {bad} outside {} candidates",
                row.len()
            )));
        }
        if row.iter().any(|s| !s.is_finite()) {
            return Err(Error::numeric(format!("query {q}: non-finite score")));
        }
        order.clear();
        order.extend(0..row.len());
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let pos = order
            .iter()
            .position(|c| targets.contains(c))
            .expect("targets are in range");
        ranks.push(pos + 1);
    }
    let metrics = RankMetrics::from_ranks(&ranks)?;
    Ok(RankResult { ranks, metrics })
}

/// Both retrieval directions for one caption/image set.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RetrievalMetrics {
    /// Image queries, caption candidates; any of the image's captions counts.
    pub caption_retrieval: RankMetrics,
    /// Caption queries, image candidates; only the aligned image counts.
    pub image_retrieval: RankMetrics,
}

impl RetrievalMetrics {
    /// Sum of R@1, R@5, R@10 over both directions.
    pub fn recall_sum(&self) -> f64 {
        let c = &self.caption_retrieval;
        let i = &self.image_retrieval;
        c.r1 + c.r5 + c.r10 + i.r1 + i.r5 + i.r10
    }
}

/// `scores[c][i]` is the compatibility of caption `c` with image `i`;
/// `caption_image[c]` is caption `c`'s aligned image.
pub fn retrieval_metrics(scores: &[Vec<f64>], caption_image: &[usize]) -> Result<RetrievalMetrics> {
    check_dims("retrieval captions", scores.len(), caption_image.len())?;
    let n_images = scores.first().map_or(0, Vec::len);
    let image_gt: Vec<Vec<usize>> = caption_image.iter().map(|&i| vec![i]).collect();
    let image_retrieval = rank_targets(scores, &image_gt)?;

    let mut caption_gt = vec![Vec::new(); n_images];
    for (c, &i) in caption_image.iter().enumerate() {
        caption_gt[i].push(c);
    }
    let transposed: Vec<Vec<f64>> = (0..n_images)
        .map(|i| scores.iter().map(|row| row[i]).collect())
        .collect();
    let caption_retrieval = rank_targets(&transposed, &caption_gt)?;
    Ok(RetrievalMetrics {
        caption_retrieval: caption_retrieval.metrics,
        image_retrieval: image_retrieval.metrics,
    })
}

/// Splits images into `n_folds` contiguous equal folds, evaluates each with
/// the captions of its images, and averages. `fold_scores(captions, images)`
/// returns the caption x image score block for one fold.
pub fn fold_average_with(
    n_images: usize,
    caption_image: &[usize],
    n_folds: usize,
    mut fold_scores: impl FnMut(&[usize], &[usize]) -> Result<Vec<Vec<f64>>>,
) -> Result<RetrievalMetrics> {
    if n_folds == 0 || n_images == 0 || !n_images.is_multiple_of(n_folds) {
        return Err(Error::contract(format!(
            "{n_images} images do not split into {n_folds} equal folds"
        )));
    }
    let size = n_images / n_folds;
    let mut per_fold = Vec::with_capacity(n_folds);
    for f in 0..n_folds {
        let images: Vec<usize> = (f * size..(f + 1) * size).collect();
        let captions: Vec<usize> = (0..caption_image.len())
            .filter(|&c| caption_image[c] / size == f)
            .collect();
        if captions.is_empty() {
            return Err(Error::contract(format!("fold {f} has no captions")));
        }
        let local: Vec<usize> = captions.iter().map(|&c| caption_image[c] - f * size).collect();
        let scores = fold_scores(&captions, &images)?;
        per_fold.push(retrieval_metrics(&scores, &local)?);
    }
    Ok(RetrievalMetrics {
        caption_retrieval: RankMetrics::average(
            &per_fold.iter().map(|m| m.caption_retrieval).collect::<Vec<_>>(),
        )?,
        image_retrieval: RankMetrics::average(
            &per_fold.iter().map(|m| m.image_retrieval).collect::<Vec<_>>(),
        )?,
    })
}

/// Fold averaging over a precomputed caption x image score matrix.
pub fn fold_average(scores: &[Vec<f64>], caption_image: &[usize], n_folds: usize) -> Result<RetrievalMetrics> {
    check_dims("fold_average captions", scores.len(), caption_image.len())?;
    let n_images = scores.first().map_or(0, Vec::len);
    fold_average_with(n_images, caption_image, n_folds, |caps, imgs| {
        Ok(caps
            .iter()
            .map(|&c| imgs.iter().map(|&i| scores[c][i]).collect())
            .collect())
    })
}

pub const FIVE_FOLD_IMAGES: usize = 5000;

/// The 1k-image protocol: five contiguous 1000-image folds of a 5000-image
/// test set, metrics averaged.
pub fn five_fold_1k(scores: &[Vec<f64>], caption_image: &[usize]) -> Result<RetrievalMetrics> {
    let n_images = scores.first().map_or(0, Vec::len);
    if n_images != FIVE_FOLD_IMAGES {
        return Err(Error::contract(format!(
            "five-fold 1k protocol needs {FIVE_FOLD_IMAGES} images, got {n_images}"
        )));
    }
    fold_average(scores, caption_image, 5)
}

/// Caption x image score block from embeddings.
pub fn caption_image_scores(
    kind: ScorerKind,
    reversed: bool,
    captions: &[DenseVector],
    images: &[DenseVector],
    parallel: bool,
) -> Result<Vec<Vec<f64>>> {
    // forward: caption is the upper argument
    score_matrix(kind, captions, images, !reversed, parallel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthContrast {
    pub pairs: usize,
    /// Image-retrieval mean rank with the shorter caption of each pair.
    pub short_mean_rank: f64,
    pub long_mean_rank: f64,
    /// Over all captions of the selected pairs.
    pub image_mean_rank: f64,
    /// Mean rank of the longer caption when captions are retrieved with the
    /// shorter one (the query itself excluded from the candidates).
    pub cross_mean_rank: f64,
}

/// Co-referring caption pairs with the largest token-length difference.
/// Ties keep image order, then caption order.
pub fn select_length_pairs(lengths: &[usize], caption_image: &[usize], top_n: usize) -> Vec<(usize, usize)> {
    let n_images = caption_image.iter().map(|i| i + 1).max().unwrap_or(0);
    let mut by_image = vec![Vec::new(); n_images];
    for (c, &i) in caption_image.iter().enumerate() {
        by_image[i].push(c);
    }
    let mut pairs = Vec::new();
    for caps in &by_image {
        for (x, &a) in caps.iter().enumerate() {
            for &b in &caps[x + 1..] {
                // (shorter, longer); the earlier caption wins equal lengths
                if lengths[b] < lengths[a] {
                    pairs.push((b, a));
                } else {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs.sort_by_key(|&(s, l)| std::cmp::Reverse(lengths[l] - lengths[s]));
    if pairs.len() < top_n {
        warn!(
            "only {} co-referring caption pairs available, fewer than the requested {top_n}",
            pairs.len()
        );
    }
    pairs.truncate(top_n);
    pairs
}

pub fn length_contrast(
    kind: ScorerKind,
    reversed: bool,
    lengths: &[usize],
    caption_image: &[usize],
    captions: &[DenseVector],
    images: &[DenseVector],
    top_n: usize,
) -> Result<LengthContrast> {
    check_dims("length_contrast lengths", lengths.len(), caption_image.len())?;
    check_dims("length_contrast captions", captions.len(), caption_image.len())?;
    let pairs = select_length_pairs(lengths, caption_image, top_n);
    if pairs.is_empty() {
        return Err(Error::contract("no co-referring caption pairs"));
    }
    let image_rank = |c: usize| -> Result<usize> {
        let row = caption_image_scores(kind, reversed, &captions[c..=c], images, false)?;
        Ok(rank_targets(&row, &[vec![caption_image[c]]])?.ranks[0])
    };
    let mut short = Vec::new();
    let mut long = Vec::new();
    let mut cross = Vec::new();
    for &(s, l) in &pairs {
        short.push(image_rank(s)?);
        long.push(image_rank(l)?);
        // query caption s sits above candidate captions
        let candidates: Vec<usize> = (0..captions.len()).filter(|&c| c != s).collect();
        let row: Vec<f64> = candidates
            .iter()
            .map(|&c| {
                if reversed {
                    score(kind, &captions[s], &captions[c])
                } else {
                    score(kind, &captions[c], &captions[s])
                }
            })
            .collect::<Result<_>>()?;
        let target = candidates.iter().position(|&c| c == l).expect("l != s");
        cross.push(rank_targets(&[row], &[vec![target]])?.ranks[0]);
    }
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let both: Vec<usize> = short.iter().chain(&long).copied().collect();
    Ok(LengthContrast {
        pairs: pairs.len(),
        short_mean_rank: mean(&short),
        long_mean_rank: mean(&long),
        image_mean_rank: mean(&both),
        cross_mean_rank: mean(&cross),
    })
}

/// Ordered `metric -> value` list for one evaluation run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub entries: Vec<(String, f64)>,
}

impl MetricReport {
    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.entries.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn push_rank(&mut self, prefix: &str, m: &RankMetrics) {
        self.push(format!("{prefix}.r1"), m.r1);
        self.push(format!("{prefix}.r5"), m.r5);
        self.push(format!("{prefix}.r10"), m.r10);
        self.push(format!("{prefix}.median_rank"), m.median_rank);
        self.push(format!("{prefix}.mean_rank"), m.mean_rank);
    }

    /// `metric<TAB>value` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(6).max(6);
        let mut s = format!("{:<width$}  {:>10}\n", "metric", "value");
        let _ = writeln!(s, "{}", "-".repeat(width + 12));
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k:<width$}  {v:>10.3}");
        }
        s
    }
}
