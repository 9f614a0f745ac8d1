//! Exhaustive grid search scored by k-fold accuracy.

use serde::{Deserialize, Serialize};

use super::{train_model, MinLeaf, ModelError, TrainConfig};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<u32>,
    pub min_leaf: Vec<MinLeaf>,
}

impl GridSpec {
    /// The 4 x 4 x 4 forest grid: estimators across [50, 300], depth across
    /// [14, 26], absolute leaf sizes across [3, 81].
    pub fn forest_default() -> Self {
        GridSpec {
            n_estimators: vec![50, 133, 217, 300],
            max_depth: vec![14, 18, 22, 26],
            min_leaf: vec![
                MinLeaf::Count(3),
                MinLeaf::Count(29),
                MinLeaf::Count(55),
                MinLeaf::Count(81),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.n_estimators.len() * self.max_depth.len() * self.min_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n_estimators: usize,
    pub max_depth: u32,
    pub min_leaf: MinLeaf,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// One row per configuration, in grid order (estimators, then depth,
    /// then leaf size).
    pub rows: Vec<GridRow>,
    pub best_index: usize,
    pub best: TrainConfig,
}

/// Scores every configuration by mean accuracy over the folds given per row
/// (negative ids are excluded everywhere). Ties keep the earliest grid row.
pub fn grid_search(
    x: &FeatureMatrix,
    labels: &[bool],
    folds: &[i32],
    base: &TrainConfig,
    grid: &GridSpec,
) -> Result<GridSearchResult, ModelError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != n || folds.len() != n {
        return Err(ModelError::LengthMismatch { rows: n, labels: labels.len().min(folds.len()) });
    }
    if grid.is_empty() {
        return Err(ModelError::BadConfig("empty grid".into()));
    }
    let mut fold_ids: Vec<i32> = folds.iter().copied().filter(|&f| f >= 0).collect();
    fold_ids.sort_unstable();
    fold_ids.dedup();
    if fold_ids.len() < 2 {
        return Err(ModelError::InsufficientData("grid search needs at least two folds".into()));
    }

    // Materialize train/test row sets per fold once.
    let mut splits = Vec::with_capacity(fold_ids.len());
    for &fid in &fold_ids {
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == fid).collect();
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] >= 0 && folds[i] != fid).collect();
        if test.is_empty() || train.is_empty() {
            return Err(ModelError::InsufficientData(format!("fold {fid} is empty")));
        }
        let train_labels: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
        let test_labels: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        splits.push((x.select_rows(&train), train_labels, x.select_rows(&test), test_labels));
    }

    let mut rows = Vec::with_capacity(grid.len());
    let mut best_index = 0usize;
    for &n_estimators in &grid.n_estimators {
        for &max_depth in &grid.max_depth {
            for &min_leaf in &grid.min_leaf {
                let mut config = base.clone();
                config.n_estimators = n_estimators;
                config.max_depth = max_depth;
                config.min_leaf = min_leaf;

                let mut fold_accuracies = Vec::with_capacity(splits.len());
                for (train_x, train_y, test_x, test_y) in &splits {
                    let model = train_model(train_x, train_y, &config, None)?;
                    let predicted = model.predict(test_x, 0.5)?;
                    let hits =
                        predicted.iter().zip(test_y).filter(|(p, y)| *p == *y).count();
                    fold_accuracies.push(hits as f64 / test_y.len() as f64);
                }
                let mean_accuracy =
                    fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
                rows.push(GridRow {
                    n_estimators,
                    max_depth,
                    min_leaf,
                    fold_accuracies,
                    mean_accuracy,
                });
                if rows[rows.len() - 1].mean_accuracy > rows[best_index].mean_accuracy {
                    best_index = rows.len() - 1;
                }
            }
        }
    }

    let winner = &rows[best_index];
    let mut best = base.clone();
    best.n_estimators = winner.n_estimators;
    best.max_depth = winner.max_depth;
    best.min_leaf = winner.min_leaf;
    Ok(GridSearchResult { rows, best_index, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>, Vec<i32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f32 = rng.gen_range(0.0..1.0);
            let b: f32 = rng.gen_range(0.0..1.0);
            values.extend_from_slice(&[a, b]);
            labels.push(a > 0.5 && !rng.gen_bool(0.1));
        }
        let folds: Vec<i32> = (0..n).map(|i| (i % 3) as i32).collect();
        (FeatureMatrix::from_rows(values, 2).unwrap(), labels, folds)
    }

    fn base() -> TrainConfig {
        let mut cfg = TrainConfig::random_forest(7);
        cfg.n_estimators = 5;
        cfg
    }

    #[test]
    fn forest_default_grid_has_64_cells() {
        let grid = GridSpec::forest_default();
        assert_eq!(grid.len(), 64);
        assert_eq!(grid.n_estimators, vec![50, 133, 217, 300]);
        assert_eq!(grid.max_depth, vec![14, 18, 22, 26]);
        assert!(grid.n_estimators.iter().all(|&e| (50..=300).contains(&e)));
        assert!(grid.min_leaf.iter().all(|m| matches!(m, MinLeaf::Count(c) if (3..=81).contains(c))));
    }

    #[test]
    fn single_cell_grid_returns_that_config() {
        let (x, labels, folds) = dataset(90, 1);
        let grid = GridSpec {
            n_estimators: vec![4],
            max_depth: vec![3],
            min_leaf: vec![MinLeaf::Count(2)],
        };
        let result = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.best_index, 0);
        assert_eq!(result.best.n_estimators, 4);
        assert_eq!(result.best.max_depth, 3);
        assert_eq!(result.best.min_leaf, MinLeaf::Count(2));
        assert_eq!(result.best.kind, ModelKind::RandomForest);
        assert_eq!(result.rows[0].fold_accuracies.len(), 3);
    }

    #[test]
    fn winner_carries_the_highest_mean() {
        let (x, labels, folds) = dataset(120, 2);
        let grid = GridSpec {
            n_estimators: vec![1, 8],
            max_depth: vec![1, 5],
            min_leaf: vec![MinLeaf::Count(1)],
        };
        let result = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();
        assert_eq!(result.rows.len(), 4);
        let max = result
            .rows
            .iter()
            .map(|r| r.mean_accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(result.rows[result.best_index].mean_accuracy, max);
        for row in &result.rows {
            let mean = row.fold_accuracies.iter().sum::<f64>() / row.fold_accuracies.len() as f64;
            assert!((row.mean_accuracy - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_keep_the_first_grid_row() {
        let (x, labels, folds) = dataset(80, 3);
        // Duplicate cells score identically, so the winner must be index 0.
        let grid = GridSpec {
            n_estimators: vec![6, 6],
            max_depth: vec![4],
            min_leaf: vec![MinLeaf::Count(2)],
        };
        let result = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.rows[0].mean_accuracy, result.rows[1].mean_accuracy);
        assert_eq!(result.best_index, 0);
    }

    #[test]
    fn discarded_rows_never_participate() {
        let (x, labels, mut folds) = dataset(90, 4);
        // Poison a third of the rows and mark them discarded; results must
        // match the clean run on the surviving rows only.
        let keep: Vec<usize> = (0..90).filter(|i| i % 3 != 2).collect();
        for (i, f) in folds.iter_mut().enumerate() {
            *f = if i % 3 == 2 { -1 } else { (i % 2) as i32 };
        }
        let grid = GridSpec {
            n_estimators: vec![4],
            max_depth: vec![3],
            min_leaf: vec![MinLeaf::Count(1)],
        };
        let full = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();

        let sub_x = x.select_rows(&keep);
        let sub_labels: Vec<bool> = keep.iter().map(|&i| labels[i]).collect();
        let sub_folds: Vec<i32> = keep.iter().map(|&i| folds[i]).collect();
        let clean = grid_search(&sub_x, &sub_labels, &sub_folds, &base(), &grid).unwrap();
        assert_eq!(full.rows, clean.rows);
    }

    #[test]
    fn one_fold_is_rejected() {
        let (x, labels, _) = dataset(40, 5);
        let folds = vec![0i32; 40];
        assert!(matches!(
            grid_search(&x, &labels, &folds, &base(), &GridSpec::forest_default()),
            Err(ModelError::InsufficientData(_))
        ));
    }

    #[test]
    fn search_is_deterministic() {
        let (x, labels, folds) = dataset(75, 6);
        let grid = GridSpec {
            n_estimators: vec![3, 6],
            max_depth: vec![2],
            min_leaf: vec![MinLeaf::Count(1), MinLeaf::Count(4)],
        };
        let a = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();
        let b = grid_search(&x, &labels, &folds, &base(), &grid).unwrap();
        assert_eq!(a, b);
    }
}
