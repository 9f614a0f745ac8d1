//! Binary CART trees: exact split search over midpoint thresholds, shared by
//! the classification and regression (boosting) paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::FeatureMatrix;

/// Split quality measure. Gini grows classifiers on 0/1 targets; Friedman
/// MSE grows regression trees on residuals (variance decrease ranks splits
/// identically to the Friedman improvement within a node).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    FriedmanMse,
}

/// Impurities below this count as pure; decreases must exceed it to split.
const IMPURITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `value <= threshold` go left.
        threshold: f32,
        left: usize,
        right: usize,
        samples: usize,
        weight: f64,
        impurity: f64,
    },
    Leaf {
        samples: usize,
        weight: f64,
        impurity: f64,
        /// Weighted mean target: the positive-class frequency for
        /// classification trees, the fitted value for regression trees.
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub criterion: Criterion,
    /// Root at index 0; children always after their parent.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_of(&self, row: &[f32]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn value(&self, row: &[f32]) -> f64 {
        match &self.nodes[self.leaf_of(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub(crate) fn set_leaf_value(&mut self, leaf: usize, value: f64) {
        match &mut self.nodes[leaf] {
            Node::Leaf { value: v, .. } => *v = value,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> u32 {
        fn walk(nodes: &[Node], at: usize) -> u32 {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

// ---------------------------------------------------------------------------
// Growing
// ---------------------------------------------------------------------------

/// Training view: targets and weights are indexed by matrix row id, so
/// bootstrap duplicates just repeat row ids.
pub(crate) struct TrainSet<'a> {
    pub x: &'a FeatureMatrix,
    pub targets: &'a [f64],
    pub weights: &'a [f64],
}

impl TrainSet<'_> {
    fn check(&self) -> Result<(), ModelError> {
        if self.targets.len() != self.x.n_rows() || self.weights.len() != self.x.n_rows() {
            return Err(ModelError::LengthMismatch {
                rows: self.x.n_rows(),
                labels: self.targets.len(),
            });
        }
        Ok(())
    }
}

pub(crate) struct GrowSettings {
    pub criterion: Criterion,
    pub max_depth: u32,
    /// Minimum routed sample count for every node.
    pub min_leaf: usize,
    /// Features examined per split; None means all.
    pub feature_subset: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    w: f64,
    wt: f64,
    wt2: f64,
    n: usize,
}

impl Accum {
    fn add(&mut self, target: f64, weight: f64) {
        self.w += weight;
        self.wt += weight * target;
        self.wt2 += weight * target * target;
        self.n += 1;
    }

    fn minus(&self, other: &Accum) -> Accum {
        Accum {
            w: self.w - other.w,
            wt: self.wt - other.wt,
            wt2: self.wt2 - other.wt2,
            n: self.n - other.n,
        }
    }

    fn impurity(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => {
                let p1 = self.wt / self.w;
                (2.0 * p1 * (1.0 - p1)).max(0.0)
            }
            Criterion::FriedmanMse => {
                let mean = self.wt / self.w;
                (self.wt2 / self.w - mean * mean).max(0.0)
            }
        }
    }

    fn mean(&self) -> f64 {
        if self.w > 0.0 {
            self.wt / self.w
        } else {
            0.0
        }
    }
}

fn node_accum(set: &TrainSet, rows: &[usize]) -> Accum {
    let mut acc = Accum::default();
    for &r in rows {
        acc.add(set.targets[r], set.weights[r]);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f32,
    pub decrease: f64,
}

/// Best midpoint split by impurity decrease. Candidates are scanned in
/// ascending feature order and ascending threshold order with strict
/// improvement, so ties resolve to the lowest feature, then lowest
/// threshold. Splits leaving a side below `min_leaf` samples are skipped.
fn best_split_rows(
    set: &TrainSet,
    rows: &[usize],
    candidates: &[usize],
    min_leaf: usize,
    criterion: Criterion,
    scratch: &mut Vec<(f32, f64, f64)>,
) -> Option<SplitChoice> {
    let parent = node_accum(set, rows);
    let parent_impurity = parent.impurity(criterion);
    if parent_impurity <= IMPURITY_EPS {
        return None;
    }
    let n = rows.len();
    let mut best: Option<SplitChoice> = None;
    for &feature in candidates {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (set.x.at(r, feature), set.targets[r], set.weights[r])));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = Accum::default();
        for i in 0..n - 1 {
            left.add(scratch[i].1, scratch[i].2);
            let (a, b) = (scratch[i].0, scratch[i + 1].0);
            if a == b {
                continue;
            }
            if left.n < min_leaf || n - left.n < min_leaf {
                continue;
            }
            let right = parent.minus(&left);
            let decrease = parent_impurity
                - (left.w / parent.w) * left.impurity(criterion)
                - (right.w / parent.w) * right.impurity(criterion);
            if decrease > best.map_or(IMPURITY_EPS, |s| s.decrease) {
                // The f32 midpoint can round up onto the right value; pull it
                // back so `<= threshold` still realizes this partition.
                let mut threshold = 0.5 * (a + b);
                if !(threshold < b) {
                    threshold = a;
                }
                best = Some(SplitChoice { feature, threshold, decrease });
            }
        }
    }
    best
}

/// Public split search over the full candidate set with uniform weights and
/// 0/1 labels.
pub fn best_split(
    x: &FeatureMatrix,
    labels: &[bool],
    candidates: &[usize],
) -> Result<SplitChoice, ModelError> {
    if x.n_rows() < 2 {
        return Err(ModelError::NoValidSplit);
    }
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let weights = vec![1.0; x.n_rows()];
    let set = TrainSet { x, targets: &targets, weights: &weights };
    set.check()?;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut scratch = Vec::new();
    best_split_rows(&set, &rows, candidates, 1, Criterion::Gini, &mut scratch)
        .ok_or(ModelError::NoValidSplit)
}

/// Grows a tree over the given rows (duplicates allowed, as bootstrap
/// samples are). `rng` only drives per-node feature subsets.
pub(crate) fn grow(
    set: &TrainSet,
    rows: &[usize],
    settings: &GrowSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Tree, ModelError> {
    set.check()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if settings.max_depth == 0 {
        return Err(ModelError::BadConfig("max_depth must be at least 1".into()));
    }
    let n_features = set.x.n_features();
    let mut nodes = Vec::new();
    let mut scratch = Vec::new();
    build(set, rows.to_vec(), 0, settings, n_features, rng, &mut nodes, &mut scratch);
    Ok(Tree { criterion: settings.criterion, nodes })
}

#[allow(clippy::too_many_arguments)]
fn build(
    set: &TrainSet,
    rows: Vec<usize>,
    depth: u32,
    settings: &GrowSettings,
    n_features: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
    scratch: &mut Vec<(f32, f64, f64)>,
) -> usize {
    let acc = node_accum(set, &rows);
    let impurity = acc.impurity(settings.criterion);
    let leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node::Leaf { samples: rows.len(), weight: acc.w, impurity, value: acc.mean() });
        nodes.len() - 1
    };
    if depth >= settings.max_depth
        || impurity <= IMPURITY_EPS
        || rows.len() < 2 * settings.min_leaf
        || rows.len() < 2
    {
        return leaf(nodes);
    }

    let candidates: Vec<usize> = match settings.feature_subset {
        Some(m) if m < n_features => {
            let mut picked: Vec<usize> =
                rand::seq::index::sample(rng, n_features, m).into_iter().collect();
            picked.sort_unstable();
            picked
        }
        _ => (0..n_features).collect(),
    };

    let Some(split) =
        best_split_rows(set, &rows, &candidates, settings.min_leaf, settings.criterion, scratch)
    else {
        return leaf(nodes);
    };

    let idx = nodes.len();
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
        samples: rows.len(),
        weight: acc.w,
        impurity,
    });
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| set.x.at(r, split.feature) <= split.threshold);
    let left = build(set, left_rows, depth + 1, settings, n_features, rng, nodes, scratch);
    let right = build(set, right_rows, depth + 1, settings, n_features, rng, nodes, scratch);
    if let Node::Split { left: l, right: r, .. } = &mut nodes[idx] {
        *l = left;
        *r = right;
    }
    idx
}

/// Classification tree on 0/1 labels with optional per-row weights.
pub(crate) fn grow_classifier(
    x: &FeatureMatrix,
    labels: &[bool],
    weights: Option<&[f64]>,
    settings: &GrowSettings,
    seed: u64,
) -> Result<Tree, ModelError> {
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let uniform;
    let weights = match weights {
        Some(w) => w,
        None => {
            uniform = vec![1.0; x.n_rows()];
            &uniform
        }
    };
    let set = TrainSet { x, targets: &targets, weights };
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow(&set, &rows, settings, &mut rng)
}
