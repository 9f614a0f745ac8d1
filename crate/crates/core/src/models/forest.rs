//! Bagged tree ensembles with per-node feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowSettings, TrainSet, Tree};
use super::{ModelError, TrainConfig};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Features examined per split.
    pub mtry: usize,
    pub bootstrap: bool,
}

/// splitmix64 finalizer; decorrelates per-tree seeds drawn from one base.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub(crate) fn train_forest(
    x: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
) -> Result<Forest, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, labels: labels.len() });
    }
    let mtry = config
        .feature_subset
        .unwrap_or_else(|| ((x.n_features() as f64).sqrt().floor() as usize).max(1))
        .min(x.n_features())
        .max(1);
    let min_leaf = config.min_leaf.resolve(n);
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let weights = vec![1.0; n];
    let set = TrainSet { x, targets: &targets, weights: &weights };

    let seeds: Vec<u64> = (0..config.n_estimators).map(|i| mix_seed(config.seed, i as u64)).collect();
    let trees: Vec<Tree> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let settings = GrowSettings {
                criterion: Criterion::Gini,
                max_depth: config.max_depth,
                min_leaf,
                feature_subset: Some(mtry),
            };
            grow(&set, &rows, &settings, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    Ok(Forest { trees, mtry, bootstrap: config.bootstrap })
}

impl Forest {
    /// Mean of per-tree positive-class frequencies.
    pub fn proba(&self, row: &[f32]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        self.trees.iter().map(|t| t.value(row)).sum::<f64>() / self.trees.len() as f64
    }
}
