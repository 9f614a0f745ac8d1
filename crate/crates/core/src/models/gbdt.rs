//! Gradient boosted trees for binary log loss: regression trees on
//! pseudo-residuals with Newton leaf values and shrinkage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::mix_seed;
use super::tree::{grow, Criterion, GrowSettings, Node, TrainSet, Tree};
use super::{ModelError, TrainConfig};
use crate::features::FeatureMatrix;

/// Denominator floor for Newton leaf updates on saturated leaves.
const HESSIAN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDeviance {
    /// 0 is the prior before any tree.
    pub stage: usize,
    /// Mean binomial deviance (binary cross-entropy) on the training set.
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostingModel {
    /// Log-odds of the clipped positive rate; the stage-0 score.
    pub initial_log_odds: f64,
    pub shrinkage: f64,
    pub trees: Vec<Tree>,
    pub deviance: Vec<StageDeviance>,
}

impl GradientBoostingModel {
    pub fn decision(&self, row: &[f32]) -> f64 {
        self.initial_log_odds
            + self.shrinkage * self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn proba(&self, row: &[f32]) -> f64 {
        sigmoid(self.decision(row))
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mean_deviance(labels: &[bool], scores: &[f64]) -> f64 {
    let n = labels.len() as f64;
    labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| {
            let p = sigmoid(f).clamp(1e-12, 1.0 - 1e-12);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// `n_estimators` of 0 is allowed and yields the bare prior, which pins the
/// initialization in tests.
pub(crate) fn train_gradient_boosting(
    x: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
) -> Result<GradientBoostingModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, labels: labels.len() });
    }
    let positive_rate =
        (labels.iter().filter(|&&l| l).count() as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let initial_log_odds = (positive_rate / (1.0 - positive_rate)).ln();

    let min_leaf = config.min_leaf.resolve(n);
    let settings = GrowSettings {
        criterion: Criterion::FriedmanMse,
        max_depth: config.max_depth,
        min_leaf,
        feature_subset: None,
    };
    let rows: Vec<usize> = (0..n).collect();
    let weights = vec![1.0; n];

    let mut scores = vec![initial_log_odds; n];
    let mut deviance = vec![StageDeviance { stage: 0, deviance: mean_deviance(labels, &scores) }];
    let mut trees = Vec::with_capacity(config.n_estimators);

    for t in 0..config.n_estimators {
        let probs: Vec<f64> = scores.iter().map(|&f| sigmoid(f)).collect();
        let residuals: Vec<f64> =
            labels.iter().zip(&probs).map(|(&y, &p)| f64::from(y) - p).collect();

        let set = TrainSet { x, targets: &residuals, weights: &weights };
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, t as u64));
        let mut tree = grow(&set, &rows, &settings, &mut rng)?;

        // Newton step per leaf: sum of residuals over sum of p(1-p).
        let mut numer = vec![0.0f64; tree.nodes.len()];
        let mut denom = vec![0.0f64; tree.nodes.len()];
        let mut leaf_for_row = vec![0usize; n];
        for i in 0..n {
            let leaf = tree.leaf_of(x.row(i));
            leaf_for_row[i] = leaf;
            numer[leaf] += residuals[i];
            denom[leaf] += probs[i] * (1.0 - probs[i]);
        }
        for (leaf, node) in tree.nodes.clone().iter().enumerate() {
            if matches!(node, Node::Leaf { .. }) {
                tree.set_leaf_value(leaf, numer[leaf] / denom[leaf].max(HESSIAN_FLOOR));
            }
        }

        for i in 0..n {
            if let Node::Leaf { value, .. } = tree.nodes[leaf_for_row[i]] {
                scores[i] += config.learning_rate * value;
            }
        }
        deviance.push(StageDeviance { stage: t + 1, deviance: mean_deviance(labels, &scores) });
        trees.push(tree);
    }

    Ok(GradientBoostingModel {
        initial_log_odds,
        shrinkage: config.learning_rate,
        trees,
        deviance,
    })
}
