//! Hypernym hierarchies as DAGs over named concepts.
//!
//! Pairs are `(child, parent)`: the child is the more specific concept and
//! sits lower in the order. The transitive closure is built once per
//! taxonomy from per-node reachable sets, processed parents-first, and kept
//! as a sorted pair list.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub type Pair = (usize, usize);

/// Sorted, deduplicated set of `(child, parent)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    pairs: Vec<Pair>,
}

impl PairSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: &Pair) -> bool {
        self.pairs.binary_search(pair).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pair> + '_ {
        self.pairs.iter()
    }

    pub fn as_slice(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn union(&self, other: &PairSet) -> PairSet {
        self.pairs.iter().chain(other.pairs.iter()).copied().collect()
    }

    pub fn is_disjoint(&self, other: &PairSet) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().all(|p| !large.contains(p))
    }

    /// Largest concept index mentioned, plus one.
    pub fn node_bound(&self) -> usize {
        self.pairs
            .iter()
            .map(|&(a, b)| a.max(b) + 1)
            .max()
            .unwrap_or(0)
    }
}

impl FromIterator<Pair> for PairSet {
    fn from_iter<I: IntoIterator<Item = Pair>>(iter: I) -> Self {
        let mut pairs: Vec<Pair> = iter.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }
}

impl<'a> IntoIterator for &'a PairSet {
    type Item = &'a Pair;
    type IntoIter = std::slice::Iter<'a, Pair>;
    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub child: usize,
    pub parent: usize,
    /// `true` when the pair is ordered.
    pub label: bool,
}

impl LabeledPair {
    pub fn pair(&self) -> Pair {
        (self.child, self.parent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train: PairSet,
    pub dev: PairSet,
    pub test: PairSet,
    pub seed: u64,
}

impl EdgeSplit {
    pub fn all(&self) -> PairSet {
        self.train.union(&self.dev).union(&self.test)
    }
}

#[derive(Debug)]
pub struct Taxonomy {
    concepts: Vec<String>,
    index: HashMap<String, usize>,
    direct: PairSet,
    closure: OnceLock<PairSet>,
}

impl Taxonomy {
    /// Builds from `(child, parent)` name pairs. Concepts are indexed in
    /// sorted name order; duplicate edges collapse.
    pub fn build<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::contract("taxonomy needs at least one edge"));
        }
        let names: BTreeSet<&str> = edges
            .iter()
            .flat_map(|(c, p)| [c.as_ref(), p.as_ref()])
            .collect();
        let concepts: Vec<String> = names.into_iter().map(str::to_owned).collect();
        let index: HashMap<String, usize> = concepts
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let direct: PairSet = edges
            .iter()
            .map(|(c, p)| (index[c.as_ref()], index[p.as_ref()]))
            .collect();

        if let Some(cycle) = find_cycle(concepts.len(), &direct) {
            return Err(Error::Cycle(
                cycle.into_iter().map(|i| concepts[i].clone()).collect(),
            ));
        }
        Ok(Self {
            concepts,
            index,
            direct,
            closure: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn name(&self, id: usize) -> &str {
        &self.concepts[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn direct_edges(&self) -> &PairSet {
        &self.direct
    }

    /// All `(u, v)` joined by a directed path of length >= 1.
    pub fn transitive_closure(&self) -> &PairSet {
        self.closure.get_or_init(|| {
            closure_from_edges(self.concepts.len(), &self.direct)
                .expect("acyclicity checked at build")
        })
    }
}

fn adjacency(n: usize, edges: &PairSet) -> Vec<Vec<usize>> {
    let mut parents = vec![Vec::new(); n];
    for &(c, p) in edges {
        parents[c].push(p);
    }
    parents
}

fn find_cycle(n: usize, edges: &PairSet) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let parents = adjacency(n, edges);
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // explicit stack of (node, next parent slot)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Active;
        while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
            if let Some(&next) = parents[node].get(*slot) {
                *slot += 1;
                match mark[next] {
                    Mark::New => {
                        mark[next] = Mark::Active;
                        stack.push((next, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(v, _)| v == next).unwrap();
                        let mut cycle: Vec<usize> = stack[start..].iter().map(|&(v, _)| v).collect();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// Transitive closure of an edge set over nodes `0..n`.
///
/// Nodes are visited in reverse topological order (parents before
/// children) and each node's reachable set is the sorted union of its
/// parents and their reachable sets.
pub fn closure_from_edges(n: usize, edges: &PairSet) -> Result<PairSet> {
    let n = n.max(edges.node_bound());
    let parents = adjacency(n, edges);
    let mut pending_children = vec![0usize; n];
    for &(_, p) in edges {
        pending_children[p] += 1;
    }
    // Kahn from the leaves upward: a node is emitted once all of its
    // children are; reversing that order puts parents first.
    let mut order: Vec<usize> = (0..n).filter(|&v| pending_children[v] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &p in &parents[v] {
            pending_children[p] -= 1;
            if pending_children[p] == 0 {
                order.push(p);
            }
        }
    }
    if order.len() != n {
        let cycle = find_cycle(n, edges).unwrap_or_default();
        return Err(Error::Cycle(cycle.iter().map(|v| v.to_string()).collect()));
    }

    let mut reach: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &v in order.iter().rev() {
        let mut acc: Vec<usize> = Vec::new();
        for &p in &parents[v] {
            acc.push(p);
            acc.extend_from_slice(&reach[p]);
        }
        acc.sort_unstable();
        acc.dedup();
        reach[v] = acc;
    }
    let total = reach.iter().map(Vec::len).sum();
    let mut pairs = Vec::with_capacity(total);
    for (v, r) in reach.iter().enumerate() {
        pairs.extend(r.iter().map(|&p| (v, p)));
    }
    Ok(PairSet { pairs })
}

/// Uniformly samples disjoint dev and test sets from `closure`; the rest is
/// the training set.
pub fn split(closure: &PairSet, n_dev: usize, n_test: usize, seed: u64) -> Result<EdgeSplit> {
    let take = n_dev + n_test;
    if take > 0 && take >= closure.len() {
        return Err(Error::contract(format!(
            "requested {n_dev} dev + {n_test} test pairs from a closure of {}",
            closure.len()
        )));
    }
    let mut rng = Rng::new(seed);
    let mut idx: Vec<usize> = (0..closure.len()).collect();
    for i in 0..take {
        let j = i + rng.choice(idx.len() - i)?;
        idx.swap(i, j);
    }
    let pick = |range: &[usize]| -> PairSet { range.iter().map(|&i| closure.pairs[i]).collect() };
    Ok(EdgeSplit {
        dev: pick(&idx[..n_dev]),
        test: pick(&idx[n_dev..take]),
        train: pick(&idx[take..]),
        seed,
    })
}

const MAX_RESAMPLE: usize = 100;

/// Corrupts one side of `pair` (side chosen uniformly) with a uniformly
/// chosen concept. The result differs from the input, is never a self-pair,
/// and avoids `forbidden` when given.
pub fn sample_negative(
    pair: Pair,
    n_concepts: usize,
    rng: &mut Rng,
    forbidden: Option<&PairSet>,
) -> Result<LabeledPair> {
    if n_concepts < 2 {
        return Err(Error::contract("corruption needs at least two concepts"));
    }
    let (child, parent) = pair;
    for _ in 0..MAX_RESAMPLE {
        let replace_child = rng.choice(2)? == 0;
        let c = rng.choice(n_concepts)?;
        let candidate = if replace_child {
            if c == child {
                continue;
            }
            (c, parent)
        } else {
            if c == parent {
                continue;
            }
            (child, c)
        };
        if candidate.0 == candidate.1 || forbidden.is_some_and(|f| f.contains(&candidate)) {
            continue;
        }
        return Ok(LabeledPair {
            child: candidate.0,
            parent: candidate.1,
            label: false,
        });
    }
    Err(Error::Sampling(format!(
        "no valid corruption of ({child}, {parent}) among {n_concepts} concepts after {MAX_RESAMPLE} tries"
    )))
}

/// Each positive followed by one corruption that is filtered against
/// `closure`, so no negative is secretly ordered.
pub fn labeled_eval_set(
    positives: &PairSet,
    closure: &PairSet,
    n_concepts: usize,
    rng: &mut Rng,
) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::with_capacity(positives.len() * 2);
    for &(child, parent) in positives {
        out.push(LabeledPair {
            child,
            parent,
            label: true,
        });
        out.push(sample_negative((child, parent), n_concepts, rng, Some(closure))?);
    }
    Ok(out)
}

/// Positive iff `query` is in `known`, which must already be transitively
/// closed.
pub fn closure_baseline_classify(known: &PairSet, query: Pair) -> bool {
    known.contains(&query)
}

/// Baseline accuracy (percent) on labeled pairs, with the known set
/// closed over `train ∪ dev`.
pub fn closure_baseline_accuracy(
    n_concepts: usize,
    train: &PairSet,
    dev: &PairSet,
    test: &[LabeledPair],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::contract("empty test set"));
    }
    let known = closure_from_edges(n_concepts, &train.union(dev))?;
    let correct = test
        .iter()
        .filter(|p| closure_baseline_classify(&known, p.pair()) == p.label)
        .count();
    Ok(100.0 * correct as f64 / test.len() as f64)
}
