//! Acceptance harness: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the criteria execute in
//! order with their own timing. Exits nonzero when any criterion fails.

use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use ordembed::encoders::{EmbeddingTable, GruEncoder, LinearProjection, Vocabulary};
use ordembed::eval::{rank_targets, tune_threshold, ScoredPair};
use ordembed::io::{
    encode_captions, encode_checkpoint, read_edges, read_entail_raw, save_features, write_captions,
    EntailPair, FeatureMatrix, RawCaption, RetrievalCorpus,
};
use ordembed::numerics::{dot, finite_diff_check, finite_diff_check_skipping, near_kink, Parameters};
use ordembed::order::ScorerKind;
use ordembed::synthetic::{gen_dag, gen_entailment, gen_two_level, EntailSpec, TwoLevelSpec};
use ordembed::tasks::{
    evaluate_entailment, evaluate_hypernym, evaluate_retrieval, train_entailment, train_hypernym,
    train_retrieval, HypernymData, HypernymModel, HypernymObjective,
};
use ordembed::taxonomy::{closure_baseline_accuracy, split};
use ordembed::training::{
    hypernym_loss, entailment_loss, ranking_loss, run_epochs, Checkpoint, TaskKind, TrainConfig,
};
use ordembed::{is_below, join, meet, penalty, penalty_grads, DenseMatrix, DenseVector, PairSet, Rng, Taxonomy};

type Outcome = Result<String, String>;

struct Tally {
    failed: usize,
}

impl Tally {
    fn run(&mut self, id: &str, name: &str, budget: Duration, f: impl FnOnce() -> Option<Outcome>) {
        let t0 = Instant::now();
        let out = f();
        let took = t0.elapsed();
        let line = match out {
            None => format!("SKIP criterion {id}: {name}"),
            Some(Ok(detail)) if took <= budget => {
                format!("PASS criterion {id}: {name}: {detail} ({:.1}s)", took.as_secs_f64())
            }
            Some(Ok(detail)) => {
                self.failed += 1;
                format!(
                    "FAIL criterion {id}: {name}: {detail}; took {:.1}s, budget {}s",
                    took.as_secs_f64(),
                    budget.as_secs()
                )
            }
            Some(Err(detail)) => {
                self.failed += 1;
                format!("FAIL criterion {id}: {name}: {detail} ({:.1}s)", took.as_secs_f64())
            }
        };
        println!("{line}");
        let _ = std::io::stdout().flush();
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// ---------------------------------------------------------------- 1

/// Mix of continuous values and a coarse grid, so equal coordinates and
/// ordered pairs occur often.
fn sample_point(rng: &mut Rng, dim: usize) -> Vec<f64> {
    let grid = rng.bernoulli(0.5);
    (0..dim)
        .map(|_| {
            if grid {
                rng.choice(4).unwrap() as f64 * 0.5
            } else {
                rng.uniform(0.0, 2.0).unwrap()
            }
        })
        .collect()
}

/// A point below `x` (coordinatewise larger), sometimes equal to it.
fn below(rng: &mut Rng, x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| if rng.bernoulli(0.3) { *v } else { v + rng.choice(3).unwrap() as f64 * 0.5 })
        .collect()
}

fn order_axioms() -> Option<Outcome> {
    let mut rng = Rng::new(101);
    let mut ordered_triples = 0;
    let mut antisym_cases = 0;
    for s in 0..100_000 {
        let dim = 1 + rng.choice(64).unwrap();
        let (x, y, z) = if s % 3 == 0 {
            // a chain x <= y <= z
            let z = sample_point(&mut rng, dim);
            let y = below(&mut rng, &z);
            let x = if s % 2 == 0 { y.clone() } else { below(&mut rng, &y) };
            (x, y, z)
        } else {
            (sample_point(&mut rng, dim), sample_point(&mut rng, dim), sample_point(&mut rng, dim))
        };
        let e = |a: &[f64], b: &[f64]| penalty(a, b).unwrap();
        for (a, b) in [(&x, &y), (&y, &x), (&y, &z), (&x, &z)] {
            if (e(a, b) == 0.0) != is_below(a, b, 0.0).unwrap() {
                return Some(Err(format!("sample {s}: penalty==0 disagrees with is_below")));
            }
        }
        if e(&x, &y) == 0.0 && e(&y, &z) == 0.0 {
            ordered_triples += 1;
            if e(&x, &z) != 0.0 {
                return Some(Err(format!("sample {s}: transitivity")));
            }
        }
        if e(&x, &y) == 0.0 && e(&y, &x) == 0.0 {
            antisym_cases += 1;
            if x != y {
                return Some(Err(format!("sample {s}: antisymmetry")));
            }
        }
        let j = join(&x, &y).unwrap();
        let m = meet(&x, &y).unwrap();
        let laws = [
            e(&x, &j) == 0.0 && e(&y, &j) == 0.0,
            e(&m, &x) == 0.0 && e(&m, &y) == 0.0,
            j == join(&y, &x).unwrap() && m == meet(&y, &x).unwrap(),
            join(&j, &z).unwrap() == join(&x, &join(&y, &z).unwrap()).unwrap(),
            meet(&m, &z).unwrap() == meet(&x, &meet(&y, &z).unwrap()).unwrap(),
            join(&x, &x).unwrap().as_slice() == x.as_slice() && meet(&x, &x).unwrap().as_slice() == x.as_slice(),
            join(&x, &m).unwrap().as_slice() == x.as_slice() && meet(&x, &j).unwrap().as_slice() == x.as_slice(),
            // least upper / greatest lower bound against the third point
            !(e(&x, &z) == 0.0 && e(&y, &z) == 0.0) || e(&j, &z) == 0.0,
            !(e(&z, &x) == 0.0 && e(&z, &y) == 0.0) || e(&z, &m) == 0.0,
        ];
        if let Some(k) = laws.iter().position(|ok| !ok) {
            return Some(Err(format!("sample {s}: lattice law {k}")));
        }
    }
    Some(check(
        ordered_triples > 10_000 && antisym_cases > 1_000,
        format!("10^5 samples, {ordered_triples} ordered triples, {antisym_cases} mutual pairs"),
    ))
}

// ---------------------------------------------------------------- 2

const GRAD_TOL: f64 = 1e-4;

fn unpack(p: &[f64], dim: usize) -> Vec<DenseVector> {
    p.chunks(dim).map(|c| c.to_vec().into()).collect()
}

fn pairs_of(vs: &[DenseVector]) -> Vec<(DenseVector, DenseVector)> {
    vs.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
}

fn gradient_checks() -> Option<Outcome> {
    let mut rng = Rng::new(202);
    let mut worst: Vec<(&str, f64)> = Vec::new();

    // penalty_grads
    let mut e_max = 0.0f64;
    for _ in 0..50 {
        let dim = 1 + rng.choice(8).unwrap();
        let p = rng.uniform_vec(0.0, 1.0, 2 * dim).unwrap();
        let (gl, gu) = penalty_grads(&p[..dim], &p[dim..]).unwrap();
        let analytic: Vec<f64> = gl.iter().chain(gu.iter()).copied().collect();
        let err = finite_diff_check(|q| penalty(&q[..dim], &q[dim..]).unwrap(), &analytic, &p, 1e-6).unwrap();
        e_max = e_max.max(err);
    }
    worst.push(("penalty", e_max));

    // margin losses: 2 positive + 2 negative pairs
    for (name, loss) in [
        ("hypernym_loss", hypernym_loss::<DenseVector> as fn(&[(DenseVector, DenseVector)], &[(DenseVector, DenseVector)], f64) -> _),
        ("entailment_loss", entailment_loss::<DenseVector>),
    ] {
        let dim = 8;
        let p = rng.uniform_vec(0.0, 1.0, 8 * dim).unwrap();
        let split_batch = |q: &[f64]| {
            let vs = unpack(q, dim);
            (pairs_of(&vs[..4]), pairs_of(&vs[4..]))
        };
        let (pos, neg) = split_batch(&p);
        let out = loss(&pos, &neg, 1.0).unwrap();
        let analytic: Vec<f64> = out
            .pos_grads
            .iter()
            .chain(&out.neg_grads)
            .flat_map(|(a, b)| a.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect();
        let err = finite_diff_check(
            |q| {
                let (pos, neg) = split_batch(q);
                loss(&pos, &neg, 1.0).unwrap().loss
            },
            &analytic,
            &p,
            1e-6,
        )
        .unwrap();
        worst.push((name, err));
    }

    // ranking loss in all three configurations
    for (name, kind, reversed) in [
        ("ranking_loss order", ScorerKind::Order, false),
        ("ranking_loss reversed", ScorerKind::Order, true),
        ("ranking_loss cosine", ScorerKind::Cosine, false),
    ] {
        let (n, dim) = (4, 8);
        let p = rng.uniform_vec(0.05, 1.0, 2 * n * dim).unwrap();
        let vs = unpack(&p, dim);
        let out = ranking_loss(&vs[..n], &vs[n..], 0.3, kind, reversed).unwrap();
        let analytic: Vec<f64> = out
            .caption_grads
            .iter()
            .chain(&out.image_grads)
            .flat_map(|g| g.iter().copied())
            .collect();
        let err = finite_diff_check(
            |q| {
                let vs = unpack(q, dim);
                ranking_loss(&vs[..n], &vs[n..], 0.3, kind, reversed).unwrap().loss
            },
            &analytic,
            &p,
            1e-6,
        )
        .unwrap();
        worst.push((name, err));
    }

    // lookup through abs
    let table = EmbeddingTable::init(5, 6, &mut rng).unwrap();
    let target = rng.uniform_vec(-1.0, 1.0, 6).unwrap();
    let ids = [0, 3, 3, 4];
    let mut grads = table.zeroed();
    for &id in &ids {
        table.backward(id, &target, &mut grads).unwrap();
    }
    let point = table.flatten();
    let err = finite_diff_check_skipping(
        |q| {
            let mut t = table.clone();
            t.load_flat(q);
            ids.iter().map(|&id| dot(&t.lookup(id).unwrap(), &target)).sum()
        },
        &grads.flatten(),
        &point,
        1e-6,
        |i| near_kink(point[i]),
    )
    .unwrap();
    worst.push(("lookup_abs", err));

    // projection through abs and normalisation
    let proj = LinearProjection::init(5, 7, true, &mut rng).unwrap();
    let feat: Vec<f64> = (0..7).map(|_| rng.normal()).collect();
    let target = rng.uniform_vec(-1.0, 1.0, 5).unwrap();
    let trace = proj.forward(&feat).unwrap();
    let mut grads = proj.zeroed();
    proj.backward(&feat, &trace, &target, &mut grads).unwrap();
    let err = finite_diff_check(
        |q| {
            let mut p = proj.clone();
            p.load_flat(q);
            dot(&p.project(&feat).unwrap(), &target)
        },
        &grads.flatten(),
        &proj.flatten(),
        1e-6,
    )
    .unwrap();
    worst.push(("projection_abs_normalize", err));

    // GRU over 3 tokens, hidden 4
    let mut gru = GruEncoder::init(6, 3, 4, true, &mut rng).unwrap();
    for b in gru.b_z.iter_mut().chain(gru.b_r.iter_mut()).chain(gru.b_h.iter_mut()) {
        *b = rng.uniform(-0.5, 0.5).unwrap();
    }
    let tokens = [2, 5, 1];
    let target = rng.uniform_vec(-1.0, 1.0, 4).unwrap();
    let trace = gru.forward(&tokens).unwrap();
    let mut grads = gru.zeroed();
    gru.backward(&tokens, &trace, &target, &mut grads).unwrap();
    let point = gru.flatten();
    let n_words = gru.words.num_params();
    let err = finite_diff_check_skipping(
        |q| {
            let mut g = gru.clone();
            g.load_flat(q);
            dot(&g.encode(&tokens).unwrap(), &target)
        },
        &grads.flatten(),
        &point,
        1e-6,
        |i| i < n_words && near_kink(point[i]),
    )
    .unwrap();
    worst.push(("gru", err));

    let detail = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Some(check(worst.iter().all(|(_, e)| *e < GRAD_TOL), format!("max rel err: {detail}")))
}

// ---------------------------------------------------------------- 3

/// `1 + #{strictly better} + #{equal score, lower index}` for the first
/// target holding the best score.
fn rank_oracle(row: &[f64], targets: &[usize]) -> usize {
    let best = targets.iter().map(|&t| row[t]).fold(f64::NEG_INFINITY, f64::max);
    let first = *targets.iter().filter(|&&t| row[t] == best).min().unwrap();
    1 + row.iter().filter(|&&s| s > best).count() + (0..first).filter(|&c| row[c] == best).count()
}

fn threshold_oracle(dev: &[ScoredPair]) -> (f64, f64) {
    let mut values: Vec<f64> = dev.iter().map(|p| p.penalty).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(f64::INFINITY);
    let acc = |t: f64| dev.iter().filter(|p| (p.penalty <= t) == p.label).count();
    let mut best = (candidates[0], acc(candidates[0]));
    for &t in &candidates[1..] {
        if acc(t) > best.1 {
            best = (t, acc(t));
        }
    }
    // no threshold anywhere, candidate or not, does better
    for &v in &values {
        for t in [v, v - 1e-9, v + 1e-9] {
            assert!(acc(t) <= best.1);
        }
    }
    (best.0, best.1 as f64 * (100.0 / dev.len() as f64))
}

fn warshall(n: usize, edges: &[(usize, usize)]) -> PairSet {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| r[i][j])
        .collect()
}

fn oracles() -> Option<Outcome> {
    let mut rng = Rng::new(303);
    for m in 0..500 {
        let (q, c) = (1 + rng.choice(20).unwrap(), 1 + rng.choice(20).unwrap());
        let scores: Vec<Vec<f64>> = (0..q)
            .map(|_| (0..c).map(|_| rng.choice(5).unwrap() as f64 * 0.25).collect())
            .collect();
        let gt: Vec<Vec<usize>> = (0..q)
            .map(|_| {
                let k = 1 + rng.choice(c.min(3)).unwrap();
                let mut t: Vec<usize> = (0..k).map(|_| rng.choice(c).unwrap()).collect();
                t.dedup();
                t
            })
            .collect();
        let got = rank_targets(&scores, &gt).unwrap().ranks;
        let want: Vec<usize> = scores.iter().zip(&gt).map(|(r, t)| rank_oracle(r, t)).collect();
        if got != want {
            return Some(Err(format!("rank_targets differs on matrix {m}")));
        }
    }
    for m in 0..500 {
        let n = 2 + rng.choice(40).unwrap();
        let mut dev: Vec<ScoredPair> = (0..n)
            .map(|_| ScoredPair {
                penalty: rng.choice(8).unwrap() as f64 * 0.125,
                label: rng.bernoulli(0.5),
            })
            .collect();
        dev[0].label = true;
        dev[1].label = false;
        let t = tune_threshold(&dev).unwrap();
        let (ot, oacc) = threshold_oracle(&dev);
        if t.threshold != ot || t.accuracy != oacc {
            return Some(Err(format!(
                "tune_threshold set {m}: ({}, {}) vs oracle ({ot}, {oacc})",
                t.threshold, t.accuracy
            )));
        }
    }
    for d in 0..200 {
        let n = 2 + rng.choice(49).unwrap();
        let levels = 2 + rng.choice(5).unwrap().min(n - 2);
        let tax = gen_dag(n, rng.uniform(0.05, 0.6).unwrap(), levels, d).unwrap();
        let edges: Vec<_> = tax.direct_edges().iter().copied().collect();
        let want = warshall(tax.len(), &edges);
        if tax.transitive_closure() != &want {
            return Some(Err(format!("closure differs on DAG {d}")));
        }
    }
    Some(Ok("500 rank matrices, 500 threshold sets, 200 DAGs agree exactly".into()))
}

// ---------------------------------------------------------------- 4

fn wordnet() -> Option<Outcome> {
    let path = std::env::var("OE_WORDNET_EDGES").ok()?;
    let run = || -> ordembed::Result<Outcome> {
        let edges = read_edges(Path::new(&path))?;
        let tax = Taxonomy::build(&edges)?;
        let closure = tax.transitive_closure().clone();
        let mut notes = vec![format!("{} pairs over {} concepts", closure.len(), tax.len())];
        let mut ok = closure.len() == 838_073 && tax.len() == 82_192;

        let s = split(&closure, 4000, 4000, 0)?;
        let data = HypernymData::from_split(&tax, &s, 0)?;
        let baseline = closure_baseline_accuracy(tax.len(), &s.train, &s.dev, &data.test)?;
        ok &= (baseline - 88.2).abs() <= 1.0;
        notes.push(format!("closure baseline {baseline:.1}% (88.2 ± 1.0)"));

        let config = TrainConfig::for_task(TaskKind::Hypernym);
        let out = train_hypernym(&config, &data, |_| {})?;
        let report = evaluate_hypernym(&out.best, config.scorer, &data.dev, &data.test)?;
        let acc = report.get("test_accuracy").unwrap_or(0.0);
        ok &= (acc - 90.6).abs() <= 1.5 && acc > baseline;
        notes.push(format!("order-embeddings {acc:.1}% (90.6 ± 1.5, > baseline)"));
        Ok(check(ok, notes.join(", ")))
    };
    Some(run().unwrap_or_else(|e| Err(e.to_string())))
}

// ---------------------------------------------------------------- 5

const TOY_EDGES: [(&str, &str); 19] = [
    ("animal", "entity"),
    ("plant", "entity"),
    ("mammal", "animal"),
    ("bird", "animal"),
    ("fish", "animal"),
    ("dog", "mammal"),
    ("cat", "mammal"),
    ("horse", "mammal"),
    ("eagle", "bird"),
    ("sparrow", "bird"),
    ("salmon", "fish"),
    ("shark", "fish"),
    ("poodle", "dog"),
    ("beagle", "dog"),
    ("tree", "plant"),
    ("flower", "plant"),
    ("oak", "tree"),
    ("pine", "tree"),
    ("rose", "flower"),
];

/// Largest penalty over the given ordered pairs.
fn worst_penalty(m: &HypernymModel, pairs: &PairSet) -> ordembed::Result<f64> {
    let mut worst = 0.0f64;
    for &(c, p) in pairs {
        worst = worst.max(penalty(&m.embed(c)?, &m.embed(p)?)?);
    }
    Ok(worst)
}

fn toy_taxonomy() -> Option<Outcome> {
    let run = || -> ordembed::Result<Outcome> {
        let tax = Taxonomy::build(&TOY_EDGES)?;
        let closure = tax.transitive_closure().clone();
        // every closure pair is a training pair; there is no held-out set
        let config = TrainConfig {
            dim: 2,
            batch: 16,
            lr: 0.05,
            max_epochs: 500,
            patience: 500,
            ..TrainConfig::for_task(TaskKind::Hypernym)
        };
        let model = HypernymModel::init(tax.len(), config.dim, &mut Rng::new(config.seed))?;
        let mut objective = HypernymObjective {
            train: closure.as_slice(),
            n_concepts: tax.len(),
            batch: config.batch,
            margin: config.margin,
            kind: config.scorer,
        };
        let out = run_epochs(&config, model, &mut objective, |m| Ok(-worst_penalty(m, &closure)?), |_| {})?;
        let worst = worst_penalty(&out.best, &closure)?;
        let mut spurious = 0;
        for c in 0..tax.len() {
            for p in (0..tax.len()).filter(|&p| p != c && !closure.contains(&(c, p))) {
                if penalty(&out.best.embed(c)?, &out.best.embed(p)?)? < 1e-3 {
                    spurious += 1;
                }
            }
        }
        let non_edges = tax.len() * (tax.len() - 1) - closure.len();
        Ok(check(
            worst < 1e-3,
            format!(
                "{} nodes, {} closure pairs, max train penalty {worst:.2e}, {spurious}/{non_edges} spurious zero-penalty non-edges",
                tax.len(),
                closure.len()
            ),
        ))
    };
    Some(run().unwrap_or_else(|e| Err(e.to_string())))
}

// ---------------------------------------------------------------- 6, 7

struct RetrievalRun {
    image_r1: f64,
    length_mean_rank: f64,
}

struct RetrievalSplits {
    vocab: usize,
    train: RetrievalCorpus,
    dev: RetrievalCorpus,
    test: RetrievalCorpus,
}

fn two_level_splits() -> ordembed::Result<RetrievalSplits> {
    let spec = TwoLevelSpec {
        vocab_size: 60,
        ..TwoLevelSpec::new(500, 2, 4, 1)
    };
    let corpus = gen_two_level(&spec)?;
    let vocab = Vocabulary::from_tokens(corpus.vocab.iter().cloned())?;
    let captions = encode_captions(&corpus.captions, &vocab);
    let all = RetrievalCorpus::assemble(&corpus.features, captions, Path::new("<two-level>"))?;
    let idx: Vec<usize> = (0..500).collect();
    Ok(RetrievalSplits {
        vocab: vocab.len(),
        train: all.select_images(&idx[..350])?,
        dev: all.select_images(&idx[350..400])?,
        test: all.select_images(&idx[400..])?,
    })
}

fn retrieval_config(scorer: ScorerKind, reversed: bool) -> TrainConfig {
    TrainConfig {
        dim: 128,
        word_dim: 32,
        lr: 0.001,
        margin: 0.2,
        max_epochs: 100,
        patience: 15,
        scorer,
        reverse_order: reversed,
        ..TrainConfig::for_task(TaskKind::Retrieval)
    }
}

const LENGTH_PAIRS: usize = 50;

fn retrieval_run(s: &RetrievalSplits, scorer: ScorerKind, reversed: bool) -> ordembed::Result<RetrievalRun> {
    let config = retrieval_config(scorer, reversed);
    let out = train_retrieval(&config, &s.train, &s.dev, s.vocab, false, |_| {})?;
    let r = evaluate_retrieval(&out.best, &s.test, scorer, reversed, LENGTH_PAIRS, false)?;
    Ok(RetrievalRun {
        image_r1: r.get("image_retrieval.r1").unwrap_or(f64::NAN),
        length_mean_rank: r.get("length_contrast.image_mean_rank").unwrap_or(f64::NAN),
    })
}

fn direction_asymmetry(s: &RetrievalSplits, forward: &RetrievalRun) -> Option<Outcome> {
    let reversed = match retrieval_run(s, ScorerKind::Order, true) {
        Ok(r) => r,
        Err(e) => return Some(Err(e.to_string())),
    };
    let (f, r) = (forward.image_r1, reversed.image_r1);
    Some(check(
        f > r && f >= r + 20.0,
        format!("image R@1 forward {f:.1} vs reversed {r:.1} (need forward >= reversed + 20)"),
    ))
}

fn length_contrast_check(s: &RetrievalSplits, forward: &RetrievalRun) -> Option<Outcome> {
    let cosine = match retrieval_run(s, ScorerKind::Cosine, false) {
        Ok(r) => r,
        Err(e) => return Some(Err(e.to_string())),
    };
    let (o, c) = (forward.length_mean_rank, cosine.length_mean_rank);
    Some(check(
        o <= c,
        format!("mean image rank over {LENGTH_PAIRS} largest-length-gap pairs: order {o:.2} vs cosine {c:.2}"),
    ))
}

// ---------------------------------------------------------------- 8

fn entail_config() -> TrainConfig {
    TrainConfig {
        dim: 64,
        word_dim: 32,
        lr: 0.01,
        margin: 0.05,
        max_epochs: 30,
        ..TrainConfig::for_task(TaskKind::Entailment)
    }
}

fn entailment() -> Option<Outcome> {
    let run = || -> ordembed::Result<Outcome> {
        let spec = EntailSpec::new(10_000, 8, 3);
        let raw = gen_entailment(&spec)?;
        let vocab = Vocabulary::from_tokens((0..spec.vocab_size).map(|i| format!("w{i:02}")))?;
        let pairs = ordembed::io::encode_entail(&raw, &vocab);
        let (train, rest) = pairs.split_at(7000);
        let (dev, test) = rest.split_at(1000);
        let config = entail_config();
        let out = train_entailment(&config, train, dev, vocab.len(), false, |_| {})?;
        let r = evaluate_entailment(&out.best, config.scorer, dev, test, false)?;
        let acc = r.get("test_accuracy").unwrap_or(f64::NAN);
        Ok(check(acc >= 90.0, format!("test accuracy {acc:.2}% on {} held-out pairs (need >= 90)", test.len())))
    };
    Some(run().unwrap_or_else(|e| Err(e.to_string())))
}

/// SNLI-style TSV with the columns the loader looks for, plus an unlabeled
/// row that must be skipped.
fn write_snli_fixture(path: &Path, n: usize) -> std::io::Result<()> {
    let raw = gen_entailment(&EntailSpec::new(n, 8, 11)).unwrap();
    let mut s = String::from("gold_label\tsentence1_binary_parse\tsentence2_binary_parse\tsentence1\tsentence2\tpairID\n");
    for (k, p) in raw.iter().enumerate() {
        let label = match (p.label.is_entailment(), k % 2) {
            (true, _) => "entailment",
            (false, 0) => "neutral",
            (false, _) => "contradiction",
        };
        let (a, b) = (p.premise.join(" "), p.hypothesis.join(" "));
        s += &format!("{label}\t( {a} )\t( {b} )\t{a}\t{b}\t{k}\n");
    }
    s += "-\t( x )\t( y )\tx\ty\tunlabeled\n";
    std::fs::write(path, s)
}

/// Every 100th item, keeping at least `min` items.
fn subsample<T: Clone>(items: &[T], min: usize) -> Vec<T> {
    let step = (items.len() / min.max(1)).clamp(1, 100);
    items.iter().step_by(step).cloned().collect()
}

fn ingest_entailment(path: &Path) -> ordembed::Result<String> {
    let data = read_entail_raw(path)?;
    let raw = subsample(&data.pairs, 200);
    let vocab = Vocabulary::build(raw.iter().flat_map(|p| [p.premise.as_slice(), p.hypothesis.as_slice()]), 1);
    let pairs: Vec<EntailPair> = ordembed::io::encode_entail(&raw, &vocab);
    let cut = pairs.len() * 4 / 5;
    let (train, test) = pairs.split_at(cut);
    let config = TrainConfig {
        dim: 16,
        word_dim: 8,
        max_epochs: 2,
        ..TrainConfig::for_task(TaskKind::Entailment)
    };
    let out = train_entailment(&config, train, test, vocab.len(), false, |_| {})?;
    let r = evaluate_entailment(&out.best, config.scorer, test, test, false)?;
    Ok(format!(
        "entailment file: {} pairs used, {} unlabeled skipped, accuracy {:.1}%",
        raw.len(),
        data.skipped_unlabeled,
        r.get("test_accuracy").unwrap_or(f64::NAN)
    ))
}

fn write_retrieval_fixture(captions: &Path, features: &Path) -> ordembed::Result<()> {
    let corpus = gen_two_level(&TwoLevelSpec::new(100, 3, 3, 12))?;
    write_captions(captions, &corpus.captions)?;
    save_features(features, &corpus.features)
}

fn ingest_retrieval(captions: &Path, features: &Path) -> ordembed::Result<String> {
    let raw: Vec<RawCaption> = ordembed::io::read_captions_raw(captions)?;
    let all_features = ordembed::io::load_features(features)?;
    let keep: Vec<usize> = subsample(&(0..all_features.len()).collect::<Vec<_>>(), 50);
    let ids: Vec<String> = keep.iter().map(|&i| all_features.ids[i].clone()).collect();
    let mut data = Vec::with_capacity(keep.len() * all_features.feat_dim());
    for &i in &keep {
        data.extend_from_slice(all_features.row(i));
    }
    let feats = FeatureMatrix::new(ids.clone(), DenseMatrix::new(keep.len(), all_features.feat_dim(), data)?)?;
    let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
    let raw: Vec<RawCaption> = raw.into_iter().filter(|c| wanted.contains(c.image_id.as_str())).collect();
    let tokens: Vec<Vec<String>> = raw.iter().map(|c| ordembed::encoders::tokenize(&c.caption)).collect();
    let vocab = Vocabulary::build(tokens.iter().map(Vec::as_slice), 1);
    let corpus = RetrievalCorpus::assemble(&feats, encode_captions(&raw, &vocab), captions)?;
    let config = TrainConfig {
        dim: 16,
        word_dim: 8,
        max_epochs: 2,
        ..TrainConfig::for_task(TaskKind::Retrieval)
    };
    let out = train_retrieval(&config, &corpus, &corpus, vocab.len(), false, |_| {})?;
    let r = evaluate_retrieval(&out.best, &corpus, config.scorer, false, 10, false)?;
    Ok(format!(
        "caption/feature files: {} images, {} captions, recall sum {:.1}",
        corpus.images.len(),
        corpus.captions.len(),
        r.get("recall_sum").unwrap_or(f64::NAN)
    ))
}

/// Real SNLI / caption+feature files when the environment names them,
/// generated fixtures in the same formats otherwise.
fn end_to_end() -> Option<Outcome> {
    let run = || -> ordembed::Result<Outcome> {
        let dir = tempfile::tempdir().map_err(|e| ordembed::Error::io(Path::new("<tempdir>"), e))?;
        let snli = match std::env::var("OE_SNLI") {
            Ok(p) => p.into(),
            Err(_) => {
                let p = dir.path().join("snli.txt");
                write_snli_fixture(&p, 2000).map_err(|e| ordembed::Error::io(&p, e))?;
                p
            }
        };
        let (caps, feats) = match (std::env::var("OE_CAPTIONS"), std::env::var("OE_FEATURES")) {
            (Ok(c), Ok(f)) => (c.into(), f.into()),
            _ => {
                let c = dir.path().join("captions.jsonl");
                let f = dir.path().join("features.oef");
                write_retrieval_fixture(&c, &f)?;
                (c, f)
            }
        };
        let a = ingest_entailment(&snli)?;
        let b = ingest_retrieval(&caps, &feats)?;
        Ok(Ok(format!("{a}; {b}")))
    };
    Some(run().unwrap_or_else(|e| Err(e.to_string())))
}

// ---------------------------------------------------------------- 9

fn pipeline_bytes() -> ordembed::Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();

    let tax = gen_dag(60, 0.2, 4, 9)?;
    let s = split(tax.transitive_closure(), 10, 10, 9)?;
    let data = HypernymData::from_split(&tax, &s, 9)?;
    let config = TrainConfig {
        dim: 8,
        batch: 32,
        max_epochs: 5,
        seed: 9,
        ..TrainConfig::for_task(TaskKind::Hypernym)
    };
    let run = train_hypernym(&config, &data, |_| {})?;
    let ckpt = Checkpoint::capture(&run.best, &config, run.best_epoch, run.best_metric, data.concepts.clone());
    out.push(encode_checkpoint(&ckpt)?);
    out.push(evaluate_hypernym(&run.best, config.scorer, &data.dev, &data.test)?.to_tsv().into_bytes());

    let corpus = gen_two_level(&TwoLevelSpec::new(60, 2, 3, 9))?;
    let vocab = Vocabulary::from_tokens(corpus.vocab.iter().cloned())?;
    let all = RetrievalCorpus::assemble(&corpus.features, encode_captions(&corpus.captions, &vocab), Path::new("<d>"))?;
    let idx: Vec<usize> = (0..60).collect();
    let (train, dev) = (all.select_images(&idx[..40])?, all.select_images(&idx[40..])?);
    let config = TrainConfig {
        dim: 8,
        word_dim: 6,
        batch: 16,
        max_epochs: 3,
        seed: 9,
        ..TrainConfig::for_task(TaskKind::Retrieval)
    };
    let run = train_retrieval(&config, &train, &dev, vocab.len(), false, |_| {})?;
    let ckpt = Checkpoint::capture(&run.best, &config, run.best_epoch, run.best_metric, vocab.tokens().to_vec());
    out.push(encode_checkpoint(&ckpt)?);
    out.push(evaluate_retrieval(&run.best, &dev, config.scorer, false, 5, false)?.to_tsv().into_bytes());

    let spec = EntailSpec::new(400, 6, 9);
    let vocab = Vocabulary::from_tokens((0..spec.vocab_size).map(|i| format!("w{i:02}")))?;
    let pairs = ordembed::io::encode_entail(&gen_entailment(&spec)?, &vocab);
    let (train, dev) = pairs.split_at(300);
    let config = TrainConfig {
        dim: 8,
        word_dim: 6,
        max_epochs: 3,
        seed: 9,
        ..TrainConfig::for_task(TaskKind::Entailment)
    };
    let run = train_entailment(&config, train, dev, vocab.len(), false, |_| {})?;
    let ckpt = Checkpoint::capture(&run.best, &config, run.best_epoch, run.best_metric, vocab.tokens().to_vec());
    out.push(encode_checkpoint(&ckpt)?);
    out.push(evaluate_entailment(&run.best, config.scorer, dev, dev, false)?.to_tsv().into_bytes());
    Ok(out)
}

fn determinism() -> Option<Outcome> {
    let run = || -> ordembed::Result<Outcome> {
        let a = pipeline_bytes()?;
        let b = pipeline_bytes()?;
        let total: usize = a.iter().map(Vec::len).sum();
        Ok(check(a == b, format!("3 checkpoints + 3 reports, {total} bytes, identical across reruns")))
    };
    Some(run().unwrap_or_else(|e| Err(e.to_string())))
}

// ----------------------------------------------------------------

fn main() {
    let mut t = Tally { failed: 0 };
    t.run("1", "order axioms", secs(10), order_axioms);
    t.run("2", "gradient correctness", secs(30), gradient_checks);
    t.run("3", "oracle equivalence", secs(60), oracles);
    t.run("4", "WordNet hypernym reproduction (set OE_WORDNET_EDGES)", secs(61 * 60), wordnet);
    t.run("5", "toy taxonomy in 2 dimensions", secs(60), toy_taxonomy);

    let splits = two_level_splits().expect("two-level corpus");
    let forward = retrieval_run(&splits, ScorerKind::Order, false);
    match &forward {
        Ok(f) => {
            t.run("6", "direction asymmetry", secs(15 * 60), || direction_asymmetry(&splits, f));
            t.run("7", "length contrast, order vs cosine", secs(15 * 60), || length_contrast_check(&splits, f));
        }
        Err(e) => {
            t.run("6", "direction asymmetry", secs(0), || Some(Err(format!("forward run: {e}"))));
            t.run("7", "length contrast, order vs cosine", secs(0), || Some(Err(format!("forward run: {e}"))));
        }
    }

    t.run("8", "entailment on generated pairs", secs(10 * 60), entailment);
    t.run("8", "entailment and retrieval file ingestion, end to end", secs(10 * 60), end_to_end);
    t.run("9", "determinism", secs(5 * 60), determinism);

    if t.failed > 0 {
        println!("{} criterion check(s) failed", t.failed);
        std::process::exit(1);
    }
}
