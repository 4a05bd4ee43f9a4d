//! Seeded surrogate corpora: layered random DAGs, two-level caption/image
//! corpora where short captions are prefixes of long ones, and
//! entailment-by-deletion sentence pairs.

use crate::error::{Error, Result};
use crate::io::{EntailLabel, FeatureMatrix, RawCaption, RawEntail};
use crate::numerics::{axpy, norm, DenseMatrix, Rng};
use crate::taxonomy::Taxonomy;

fn padded_names(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Layered DAG over `n_nodes` nodes split evenly into `levels` levels
/// (level 0 on top). Each node of level `k + 1` gets each node of level `k`
/// as a parent with probability `edge_prob`; a node left without a parent
/// gets one drawn uniformly, and a top node left without a child gets one
/// the same way, so every node appears in the edge list.
pub fn gen_dag(n_nodes: usize, edge_prob: f64, levels: usize, seed: u64) -> Result<Taxonomy> {
    if n_nodes < 2 {
        return Err(Error::contract("gen_dag needs at least 2 nodes"));
    }
    if levels < 2 || levels > n_nodes {
        return Err(Error::contract(format!("levels must be in 2..={n_nodes}, got {levels}")));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::contract("edge_prob must be in [0, 1]"));
    }
    let names = padded_names("n", n_nodes);
    let level_of = |v: usize| v * levels / n_nodes;
    let members: Vec<Vec<usize>> = (0..levels)
        .map(|l| (0..n_nodes).filter(|&v| level_of(v) == l).collect())
        .collect();
    let mut rng = Rng::new(seed);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for l in 1..levels {
        for &child in &members[l] {
            let before = edges.len();
            for &parent in &members[l - 1] {
                if rng.bernoulli(edge_prob) {
                    edges.push((child, parent));
                }
            }
            if edges.len() == before {
                let parents = &members[l - 1];
                edges.push((child, parents[rng.choice(parents.len())?]));
            }
        }
    }
    for &top in &members[0] {
        if !edges.iter().any(|&(_, p)| p == top) {
            let children = &members[1];
            edges.push((children[rng.choice(children.len())?], top));
        }
    }
    let named: Vec<(&str, &str)> = edges
        .iter()
        .map(|&(c, p)| (names[c].as_str(), names[p].as_str()))
        .collect();
    Taxonomy::build(&named)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoLevelSpec {
    pub n_images: usize,
    pub captions_per_image: usize,
    /// Number of token tiers. Tier 0 is the coarsest (fewest tokens); a full
    /// caption has one token from every tier, in tier order.
    pub abstraction_levels: usize,
    pub vocab_size: usize,
    pub feat_dim: usize,
    /// Weight of the caption-dependent direction in each image feature.
    pub signal: f64,
    /// Weight of the image-specific random direction, in `[0, 1)`.
    pub noise: f64,
    pub seed: u64,
}

impl TwoLevelSpec {
    pub fn new(n_images: usize, captions_per_image: usize, abstraction_levels: usize, seed: u64) -> Self {
        Self {
            n_images,
            captions_per_image,
            abstraction_levels,
            vocab_size: 200,
            feat_dim: 64,
            signal: 1.0,
            noise: 0.3,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::contract(format!("two-level spec: {m}")));
        if self.n_images == 0 || self.feat_dim == 0 {
            return fail("n_images and feat_dim must be positive".into());
        }
        if self.captions_per_image < 2 {
            return fail("captions_per_image must be at least 2".into());
        }
        if self.abstraction_levels < 2 {
            return fail("abstraction_levels must be at least 2".into());
        }
        if self.vocab_size < 2 * self.abstraction_levels {
            return fail(format!("vocab_size must be at least {}", 2 * self.abstraction_levels));
        }
        if !(0.0..1.0).contains(&self.noise) || !(self.signal > 0.0) {
            return fail("need signal > 0 and noise in [0, 1)".into());
        }
        Ok(())
    }

    /// Tokens per tier: roughly doubling with depth, at least 2 each,
    /// summing to `vocab_size`.
    pub fn tier_sizes(&self) -> Vec<usize> {
        let levels = self.abstraction_levels;
        let weight_total = (1usize << levels) - 1;
        let mut sizes: Vec<usize> = (0..levels)
            .map(|t| (self.vocab_size * (1 << t) / weight_total).max(2))
            .collect();
        let assigned: usize = sizes[..levels - 1].iter().sum();
        sizes[levels - 1] = self.vocab_size - assigned;
        sizes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoLevelCorpus {
    /// All generated tokens, tier by tier; `vocab.len() == vocab_size`.
    pub vocab: Vec<String>,
    pub features: FeatureMatrix,
    pub captions: Vec<RawCaption>,
    /// Index into `features` for each caption.
    pub caption_image: Vec<usize>,
}

fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = norm(&v);
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Image `i` gets a full caption (one token per tier) plus
/// `captions_per_image - 1` strict prefixes of random length. Its feature is
/// `normalize(signal * u_c + noise * u_i)` where `u_c` is the normalized sum
/// of the full caption's token directions and `u_i` is a random unit vector.
pub fn gen_two_level(spec: &TwoLevelSpec) -> Result<TwoLevelCorpus> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let sizes = spec.tier_sizes();
    let mut vocab = Vec::with_capacity(spec.vocab_size);
    let mut tier_start = Vec::with_capacity(sizes.len());
    for (t, &size) in sizes.iter().enumerate() {
        tier_start.push(vocab.len());
        vocab.extend((0..size).map(|k| format!("t{t}w{k}")));
    }
    let directions: Vec<Vec<f64>> = (0..vocab.len())
        .map(|_| random_unit(&mut rng, spec.feat_dim))
        .collect();

    let levels = spec.abstraction_levels;
    let image_ids = padded_names("img", spec.n_images);
    let caption_ids = padded_names("cap", spec.n_images * spec.captions_per_image);
    let mut data = Vec::with_capacity(spec.n_images * spec.feat_dim);
    let mut captions = Vec::new();
    let mut caption_image = Vec::new();
    for (i, image_id) in image_ids.iter().enumerate() {
        let full: Vec<usize> = (0..levels)
            .map(|t| Ok(tier_start[t] + rng.choice(sizes[t])?))
            .collect::<Result<_>>()?;
        let mut signal = vec![0.0; spec.feat_dim];
        for &tok in &full {
            axpy(1.0, &directions[tok], &mut signal);
        }
        let sn = norm(&signal);
        let own = random_unit(&mut rng, spec.feat_dim);
        let mut feat: Vec<f64> = signal
            .iter()
            .zip(&own)
            .map(|(s, o)| spec.signal * s / sn + spec.noise * o)
            .collect();
        let fn_ = norm(&feat);
        feat.iter_mut().for_each(|x| *x /= fn_);
        data.extend(feat);

        for j in 0..spec.captions_per_image {
            let len = if j == 0 { levels } else { 1 + rng.choice(levels - 1)? };
            let text: Vec<&str> = full[..len].iter().map(|&t| vocab[t].as_str()).collect();
            captions.push(RawCaption {
                caption_id: caption_ids[captions.len()].clone(),
                image_id: image_id.clone(),
                caption: text.join(" "),
            });
            caption_image.push(i);
        }
    }
    let features = FeatureMatrix::new(image_ids, DenseMatrix::new(spec.n_images, spec.feat_dim, data)?)?;
    Ok(TwoLevelCorpus {
        vocab,
        features,
        captions,
        caption_image,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntailSpec {
    pub n_pairs: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl EntailSpec {
    pub fn new(n_pairs: usize, max_len: usize, seed: u64) -> Self {
        Self {
            n_pairs,
            max_len,
            vocab_size: 50,
            seed,
        }
    }
}

fn subsequence(rng: &mut Rng, seq: &[usize], len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..seq.len()).collect();
    rng.shuffle(&mut idx);
    idx.truncate(len);
    idx.sort_unstable();
    idx.into_iter().map(|i| seq[i]).collect()
}

/// Premises are 2..=max_len random tokens. A positive hypothesis is a random
/// nonempty subsequence of its premise; a negative one is such a subsequence
/// with one position replaced by a token that does not occur in the premise.
/// Labels are balanced (the extra pair of an odd count is positive) and
/// shuffled.
pub fn gen_entailment(spec: &EntailSpec) -> Result<Vec<RawEntail>> {
    if spec.max_len < 2 {
        return Err(Error::contract("gen_entailment needs max_len >= 2"));
    }
    if spec.vocab_size <= spec.max_len {
        return Err(Error::contract("vocab_size must exceed max_len so negatives exist"));
    }
    let mut rng = Rng::new(spec.seed);
    let tokens = padded_names("w", spec.vocab_size);
    let mut labels: Vec<bool> = (0..spec.n_pairs).map(|k| k < spec.n_pairs.div_ceil(2)).collect();
    rng.shuffle(&mut labels);
    let mut out = Vec::with_capacity(spec.n_pairs);
    for positive in labels {
        let len = 2 + rng.choice(spec.max_len - 1)?;
        let premise: Vec<usize> = (0..len)
            .map(|_| rng.choice(spec.vocab_size))
            .collect::<Result<_>>()?;
        let hyp_len = 1 + rng.choice(len)?;
        let mut hypothesis = subsequence(&mut rng, &premise, hyp_len);
        if !positive {
            let absent: Vec<usize> = (0..spec.vocab_size).filter(|t| !premise.contains(t)).collect();
            let at = rng.choice(hypothesis.len())?;
            hypothesis[at] = absent[rng.choice(absent.len())?];
        }
        let names = |s: &[usize]| s.iter().map(|&t| tokens[t].clone()).collect();
        out.push(RawEntail {
            premise: names(&premise),
            hypothesis: names(&hypothesis),
            label: if positive {
                EntailLabel::Entailment
            } else {
                EntailLabel::NonEntailment
            },
        });
    }
    Ok(out)
}
