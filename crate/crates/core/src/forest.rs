//! Random forest of Gini CART trees over feature vectors.
//!
//! Each tree gets its own ChaCha8 stream seeded from the master seed through
//! [`derive_seed`], so a model depends only on `(data order, params, seed)`
//! and trees can be grown in any order.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::featurize::{FeatureVector, SchemaId, FEATURE_COUNT};
use crate::rng::{derive_seed, index_below};
use crate::types::GestureClass;

const CLASSES: usize = GestureClass::COUNT;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: SchemaId, found: SchemaId },
    #[error("invalid forest parameter: {0}")]
    InvalidParams(&'static str),
    #[error("malformed model: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_leaf: 1, features_per_split: 8, bootstrap: true, seed: 0 }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be at least 1"));
        }
        if !(1..=FEATURE_COUNT).contains(&self.features_per_split) {
            return Err(ForestError::InvalidParams("features_per_split must lie in 1..=80"));
        }
        if self.min_leaf == 0 {
            return Err(ForestError::InvalidParams("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Labeled feature vectors sharing one registry version.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: SchemaId,
    rows: Vec<[f64; FEATURE_COUNT]>,
    labels: Vec<GestureClass>,
}

impl Dataset {
    pub fn new(schema: SchemaId) -> Self {
        Self { schema, rows: Vec::new(), labels: Vec::new() }
    }

    pub fn push(&mut self, x: &FeatureVector, label: GestureClass) -> Result<(), ForestError> {
        if x.schema != self.schema {
            return Err(ForestError::SchemaMismatch { expected: self.schema, found: x.schema });
        }
        self.rows.push(x.values);
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> (FeatureVector, GestureClass) {
        (FeatureVector { values: self.rows[i], schema: self.schema }, self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureVector, GestureClass)> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn class_counts(&self) -> [usize; CLASSES] {
        let mut c = [0; CLASSES];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }

    /// Rows whose indices are listed, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema,
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &Dataset) -> Result<(), ForestError> {
        if other.schema != self.schema {
            return Err(ForestError::SchemaMismatch { expected: self.schema, found: other.schema });
        }
        self.rows.extend_from_slice(&other.rows);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Node {
    /// Class histogram of the training rows that reached this leaf.
    Leaf { counts: [u32; CLASSES] },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: u16, threshold: f64, left: u32, right: u32 },
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_counts(&self, x: &[f64; FEATURE_COUNT]) -> &[u32; CLASSES] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
            }
        }
        go(self, 0)
    }

    fn check(&self) -> Result<(), ForestError> {
        if self.nodes.is_empty() {
            return Err(ForestError::Malformed("empty tree"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { counts } => {
                    if counts.iter().all(|&c| c == 0) {
                        return Err(ForestError::Malformed("leaf with no training rows"));
                    }
                }
                Node::Split { feature, threshold, left, right } => {
                    if *feature as usize >= FEATURE_COUNT {
                        return Err(ForestError::Malformed("split feature index out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(ForestError::Malformed("non-finite split threshold"));
                    }
                    // Children are always stored after their parent, which rules out cycles.
                    let n = self.nodes.len();
                    for c in [*left as usize, *right as usize] {
                        if c <= i || c >= n {
                            return Err(ForestError::Malformed("child index out of order"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub seed: u64,
    pub schema: SchemaId,
}

/// Predicted class and the per-class mean of leaf frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: GestureClass,
    pub probabilities: [f64; CLASSES],
}

/// Arg-max with ties resolved toward the earlier class.
pub fn argmax_class(p: &[f64; CLASSES]) -> GestureClass {
    let mut best = 0;
    for i in 1..CLASSES {
        if p[i] > p[best] {
            best = i;
        }
    }
    GestureClass::ALL[best]
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Structural validation, used after deserializing.
    pub fn check(&self) -> Result<(), ForestError> {
        if self.trees.is_empty() {
            return Err(ForestError::Malformed("model has no trees"));
        }
        self.trees.iter().try_for_each(DecisionTree::check)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, ForestError> {
        if x.schema != self.schema {
            return Err(ForestError::SchemaMismatch { expected: self.schema, found: x.schema });
        }
        let mut p = [0.0; CLASSES];
        for tree in &self.trees {
            let counts = tree.leaf_counts(&x.values);
            let total: u32 = counts.iter().sum();
            for (acc, &c) in p.iter_mut().zip(counts) {
                *acc += f64::from(c) / f64::from(total);
            }
        }
        let n = self.trees.len() as f64;
        for v in &mut p {
            *v /= n;
        }
        Ok(Prediction { class: argmax_class(&p), probabilities: p })
    }
}

pub fn train(data: &Dataset, params: &ForestParams) -> Result<ForestModel, ForestError> {
    params.validate()?;
    if data.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let trees = (0..params.n_trees).map(|i| train_tree(data, params, i)).collect();
    Ok(ForestModel { trees, seed: params.seed, schema: data.schema })
}

/// Grow tree `index` of the forest described by `params`.
pub fn train_tree(data: &Dataset, params: &ForestParams, index: usize) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, index as u64));
    let n = data.len();
    let rows: Vec<u32> = if params.bootstrap {
        (0..n).map(|_| index_below(&mut rng, n) as u32).collect()
    } else {
        (0..n as u32).collect()
    };
    TreeBuilder { data, params, rng, nodes: Vec::new(), scratch: Vec::with_capacity(n) }.build(rows)
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    params: &'a ForestParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: Score,
}

/// Split score `sum(cL^2)/nL + sum(cR^2)/nR`; maximising it minimises the
/// size-weighted Gini impurity. Held as an exact fraction so
/// equal splits compare equal and the first one found is kept.
#[derive(Clone, Copy)]
struct Score {
    num: u64,
    den: u64,
}

impl Score {
    fn of(left: &[u32; CLASSES], n_left: usize, right: &[u32; CLASSES], n_right: usize) -> Self {
        let sq = |c: &[u32; CLASSES]| c.iter().map(|&v| u64::from(v) * u64::from(v)).sum::<u64>();
        let (nl, nr) = (n_left as u64, n_right as u64);
        Score { num: sq(left) * nr + sq(right) * nl, den: nl * nr }
    }

    fn beats(self, other: Score) -> bool {
        u128::from(self.num) * u128::from(other.den) > u128::from(other.num) * u128::from(self.den)
    }
}

impl TreeBuilder<'_> {
    fn build(mut self, mut rows: Vec<u32>) -> DecisionTree {
        // (node slot, row range, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        self.nodes.push(Node::Leaf { counts: [0; CLASSES] });
        while let Some((slot, lo, hi, depth)) = stack.pop() {
            let counts = self.histogram(&rows[lo..hi]);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || depth_capped || hi - lo < 2 * self.params.min_leaf {
                None
            } else {
                self.best_split(&rows[lo..hi])
            };
            let Some(split) = split else {
                self.nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let mid = partition(&mut rows[lo..hi], |r| self.value(r, split.feature) <= split.threshold) + lo;
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: [0; CLASSES] });
            self.nodes.push(Node::Leaf { counts: [0; CLASSES] });
            self.nodes[slot] = Node::Split {
                feature: split.feature as u16,
                threshold: split.threshold,
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, mid, hi, depth + 1));
            stack.push((left, lo, mid, depth + 1));
        }
        DecisionTree { nodes: self.nodes }
    }

    #[inline]
    fn value(&self, row: u32, feature: usize) -> f64 {
        self.data.rows[row as usize][feature]
    }

    fn histogram(&self, rows: &[u32]) -> [u32; CLASSES] {
        let mut c = [0; CLASSES];
        for &r in rows {
            c[self.data.labels[r as usize].index()] += 1;
        }
        c
    }

    /// Candidate features are a random subset evaluated in ascending index
    /// order; if none of them can split the node the remaining features are
    /// tried in ascending order too.
    fn best_split(&mut self, rows: &[u32]) -> Option<BestSplit> {
        let mut order: Vec<usize> = (0..FEATURE_COUNT).collect();
        let k = self.params.features_per_split;
        for i in 0..k {
            let j = i + index_below(&mut self.rng, FEATURE_COUNT - i);
            order.swap(i, j);
        }
        let (head, tail) = order.split_at_mut(k);
        head.sort_unstable();
        tail.sort_unstable();
        let mut best: Option<BestSplit> = None;
        for &f in head.iter() {
            self.consider(rows, f, &mut best);
        }
        if best.is_none() {
            for &f in tail.iter() {
                self.consider(rows, f, &mut best);
                if best.is_some() {
                    break;
                }
            }
        }
        best
    }

    fn consider(&mut self, rows: &[u32], feature: usize, best: &mut Option<BestSplit>) {
        let min_leaf = self.params.min_leaf;
        self.scratch.clear();
        for &r in rows {
            self.scratch.push((self.value(r, feature), self.data.labels[r as usize] as u8));
        }
        self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.scratch.len();
        let mut right = [0u32; CLASSES];
        for &(_, c) in &self.scratch {
            right[c as usize] += 1;
        }
        let mut left = [0u32; CLASSES];
        for k in 1..n {
            let c = self.scratch[k - 1].1 as usize;
            left[c] += 1;
            right[c] -= 1;
            let (lo, hi) = (self.scratch[k - 1].0, self.scratch[k].0);
            if !(lo < hi) || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let score = Score::of(&left, k, &right, n - k);
            if best.as_ref().is_none_or(|b| score.beats(b.score)) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if !(threshold < hi) {
                    threshold = lo;
                }
                *best = Some(BestSplit { feature, threshold, score });
            }
        }
    }
}

/// Stable-order-free partition: moves rows satisfying `pred` to the front and
/// returns their count.
fn partition(rows: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut i = 0;
    for j in 0..rows.len() {
        if pred(rows[j]) {
            rows.swap(i, j);
            i += 1;
        }
    }
    i
}

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASSES]; CLASSES],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: GestureClass, predicted: GestureClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 { 0.0 } else { self.correct() as f64 / total as f64 }
    }

    /// Fraction of each true class predicted correctly; `None` for absent classes.
    pub fn recall(&self) -> [Option<f64>; CLASSES] {
        core::array::from_fn(|i| {
            let row: u64 = self.counts[i].iter().sum();
            (row > 0).then(|| self.counts[i][i] as f64 / row as f64)
        })
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..CLASSES {
            for j in 0..CLASSES {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

pub fn evaluate(model: &ForestModel, data: &Dataset) -> Result<ConfusionMatrix, ForestError> {
    if data.is_empty() {
        return Err(ForestError::EmptyDataset);
    }
    let mut cm = ConfusionMatrix::default();
    for (x, y) in data.iter() {
        cm.record(y, model.predict(&x)?.class);
    }
    Ok(cm)
}
