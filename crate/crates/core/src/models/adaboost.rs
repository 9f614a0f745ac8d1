//! Discrete AdaBoost over depth-limited trees, binary SAMME weighting.

use serde::{Deserialize, Serialize};

use super::forest::mix_seed;
use super::tree::{grow_classifier, Criterion, GrowSettings, Tree};
use super::{ModelError, TrainConfig};
use crate::features::FeatureMatrix;

/// Stage weight cap used when a stage classifies the training set perfectly:
/// alpha = learning_rate * ln(1e10).
pub const PERFECT_STAGE_ODDS: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: Tree,
    pub alpha: f64,
    /// Weighted training error the stage was fit against.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageAudit {
    pub stage: usize,
    pub error: f64,
    pub alpha: f64,
    /// Mean exp(-0.5 * y_pm * F(x)) over the training set after this stage.
    /// Non-increasing at learning rate 1 while stage errors stay below 0.5.
    pub exp_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stages: Vec<Stage>,
    pub audit: Vec<StageAudit>,
}

impl AdaBoostModel {
    /// Normalized margin mapped onto [0, 1]. An empty ensemble is maximally
    /// uncertain.
    pub fn proba(&self, row: &[f32]) -> f64 {
        let total: f64 = self.stages.iter().map(|s| s.alpha).sum();
        if total <= 0.0 {
            return 0.5;
        }
        let score: f64 = self
            .stages
            .iter()
            .map(|s| {
                let sign = if s.tree.value(row) >= 0.5 { 1.0 } else { -1.0 };
                s.alpha * sign
            })
            .sum();
        (score / total + 1.0) / 2.0
    }
}

pub(crate) fn train_adaboost(
    x: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
) -> Result<AdaBoostModel, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, labels: labels.len() });
    }
    let min_leaf = config.min_leaf.resolve(n);
    let settings = GrowSettings {
        criterion: Criterion::Gini,
        max_depth: config.max_depth,
        min_leaf,
        feature_subset: None,
    };

    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut audit = Vec::new();
    // Accumulated margin per training row, for the exp-loss audit.
    let mut margin = vec![0.0f64; n];

    for t in 0..config.n_estimators {
        let tree =
            grow_classifier(x, labels, Some(&weights), &settings, mix_seed(config.seed, t as u64))?;
        let predicted: Vec<bool> = (0..n).map(|i| tree.value(x.row(i)) >= 0.5).collect();
        let error: f64 = (0..n).filter(|&i| predicted[i] != labels[i]).map(|i| weights[i]).sum();

        if error >= 0.5 {
            // No better than chance under the current weights: drop the
            // stage and stop boosting.
            break;
        }
        let alpha = if error <= f64::EPSILON {
            config.learning_rate * PERFECT_STAGE_ODDS.ln()
        } else {
            config.learning_rate * ((1.0 - error) / error).ln()
        };

        for i in 0..n {
            let sign = if predicted[i] { 1.0 } else { -1.0 };
            let y = if labels[i] { 1.0 } else { -1.0 };
            margin[i] += alpha * sign * y;
        }
        let exp_loss = margin.iter().map(|&m| (-0.5 * m).exp()).sum::<f64>() / n as f64;
        audit.push(StageAudit { stage: t, error, alpha, exp_loss });
        stages.push(Stage { tree, alpha, error });

        if error <= f64::EPSILON {
            break;
        }
        for i in 0..n {
            if predicted[i] != labels[i] {
                weights[i] *= alpha.exp();
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    }

    Ok(AdaBoostModel { stages, audit })
}
