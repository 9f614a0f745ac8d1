//! Classifier zoo: decision tree, bagged and boosted ensembles, and a small
//! fully connected network, all trained on feature matrices and all
//! serializable to JSON model files.

pub mod adaboost;
pub mod forest;
pub mod gbdt;
pub mod mlp;
pub mod search;
pub mod tree;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaboost::AdaBoostModel;
pub use forest::Forest;
pub use gbdt::GradientBoostingModel;
pub use mlp::{MlpModel, MlpParams};
pub use search::{grid_search, GridSearchResult, GridSpec};
pub use tree::{best_split, Criterion, Node, SplitChoice, Tree};

use crate::features::{FeatureMatrix, FeatureSchema, NormalizationStats};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad distribution: {0}")]
    BadDistribution(String),
    #[error("no valid split: all candidate rows are identical")]
    NoValidSplit,
    #[error("empty training set")]
    EmptyTraining,
    #[error("matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("model expects {expected} features, matrix has {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("feature importance is only defined for tree models")]
    NotTreeModel,
    #[error("feature {feature} of row {row} is {value}, outside [-0.01, 1.01]; normalize inputs first")]
    NonNormalizedInput { row: usize, feature: usize, value: f32 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    AdaBoost,
    GradientBoosting,
    Mlp,
}

impl ModelKind {
    /// Short code used on the command line.
    pub fn code(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
            ModelKind::AdaBoost => "ab",
            ModelKind::GradientBoosting => "gb",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "dt" => Some(ModelKind::DecisionTree),
            "rf" => Some(ModelKind::RandomForest),
            "ab" => Some(ModelKind::AdaBoost),
            "gb" => Some(ModelKind::GradientBoosting),
            "mlp" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

/// Minimum samples a leaf may hold, either as a fraction of the training
/// size (rounded up, at least one) or as an absolute count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinLeaf {
    Fraction(f64),
    Count(usize),
}

impl MinLeaf {
    pub fn resolve(self, n_rows: usize) -> usize {
        match self {
            MinLeaf::Fraction(f) => ((f * n_rows as f64).ceil() as usize).max(1),
            MinLeaf::Count(c) => c.max(1),
        }
    }

    fn validate(self) -> Result<(), ModelError> {
        match self {
            MinLeaf::Fraction(f) if f > 0.0 && f < 1.0 => Ok(()),
            MinLeaf::Count(c) if c >= 1 => Ok(()),
            other => Err(ModelError::BadConfig(format!("bad min_leaf {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub max_depth: u32,
    pub min_leaf: MinLeaf,
    pub n_estimators: usize,
    /// Stage shrinkage for the boosting kinds; ignored elsewhere.
    pub learning_rate: f64,
    pub seed: u64,
    /// Forests only: bag training rows per tree.
    pub bootstrap: bool,
    /// Forests only: features examined per split; None means sqrt of the
    /// feature count.
    pub feature_subset: Option<usize>,
    pub mlp: MlpParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::decision_tree(0)
    }
}

impl TrainConfig {
    fn base(kind: ModelKind, seed: u64) -> Self {
        TrainConfig {
            kind,
            max_depth: 12,
            min_leaf: MinLeaf::Fraction(0.0001),
            n_estimators: 1,
            learning_rate: 1.0,
            seed,
            bootstrap: false,
            feature_subset: None,
            mlp: MlpParams::default(),
        }
    }

    pub fn decision_tree(seed: u64) -> Self {
        Self::base(ModelKind::DecisionTree, seed)
    }

    pub fn random_forest(seed: u64) -> Self {
        TrainConfig {
            n_estimators: 200,
            bootstrap: true,
            ..Self::base(ModelKind::RandomForest, seed)
        }
    }

    /// Grid-tuned forest: deeper trees with an absolute leaf size.
    pub fn random_forest_tuned(seed: u64) -> Self {
        TrainConfig {
            max_depth: 18,
            min_leaf: MinLeaf::Count(9),
            ..Self::random_forest(seed)
        }
    }

    pub fn adaboost(seed: u64) -> Self {
        TrainConfig {
            max_depth: 6,
            n_estimators: 50,
            learning_rate: 1.0,
            ..Self::base(ModelKind::AdaBoost, seed)
        }
    }

    pub fn gradient_boosting(seed: u64) -> Self {
        TrainConfig {
            max_depth: 7,
            n_estimators: 100,
            learning_rate: 0.1,
            ..Self::base(ModelKind::GradientBoosting, seed)
        }
    }

    pub fn mlp(seed: u64) -> Self {
        Self::base(ModelKind::Mlp, seed)
    }

    pub fn for_kind(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::DecisionTree => Self::decision_tree(seed),
            ModelKind::RandomForest => Self::random_forest(seed),
            ModelKind::AdaBoost => Self::adaboost(seed),
            ModelKind::GradientBoosting => Self::gradient_boosting(seed),
            ModelKind::Mlp => Self::mlp(seed),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kind == ModelKind::Mlp {
            return self.mlp.validate();
        }
        if self.max_depth == 0 {
            return Err(ModelError::BadConfig("max_depth must be at least 1".into()));
        }
        if self.n_estimators == 0 {
            return Err(ModelError::BadConfig("n_estimators must be at least 1".into()));
        }
        self.min_leaf.validate()?;
        let boosted =
            matches!(self.kind, ModelKind::AdaBoost | ModelKind::GradientBoosting);
        if boosted && !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::BadConfig("learning rate must be positive".into()));
        }
        if let Some(m) = self.feature_subset {
            if m == 0 {
                return Err(ModelError::BadConfig("feature subset must be non-empty".into()));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Impurity
// ---------------------------------------------------------------------------

/// Gini impurity of a discrete distribution: 1 - sum(p^2). The entries must
/// be non-negative and sum to 1.
pub fn gini(p: &[f64]) -> Result<f64, ModelError> {
    if p.is_empty() {
        return Err(ModelError::BadDistribution("empty distribution".into()));
    }
    for &v in p {
        if !v.is_finite() || v < 0.0 {
            return Err(ModelError::BadDistribution(format!("bad probability {v}")));
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::BadDistribution(format!("probabilities sum to {sum}")));
    }
    Ok(1.0 - p.iter().map(|v| v * v).sum::<f64>())
}

// ---------------------------------------------------------------------------
// Trained models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(Tree),
    RandomForest(Forest),
    AdaBoost(AdaBoostModel),
    GradientBoosting(GradientBoostingModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub n_features: usize,
    pub model: Model,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match &self.model {
            Model::DecisionTree(_) => ModelKind::DecisionTree,
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::AdaBoost(_) => ModelKind::AdaBoost,
            Model::GradientBoosting(_) => ModelKind::GradientBoosting,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn proba_row(&self, row: &[f32]) -> f64 {
        match &self.model {
            Model::DecisionTree(t) => t.value(row),
            Model::RandomForest(f) => f.proba(row),
            Model::AdaBoost(m) => m.proba(row),
            Model::GradientBoosting(m) => m.proba(row),
            Model::Mlp(m) => m.proba(row),
        }
    }

    /// Positive-class probability per row.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        if x.n_features() != self.n_features {
            return Err(ModelError::SchemaMismatch {
                expected: self.n_features,
                got: x.n_features(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.proba_row(x.row(i))).collect())
    }

    /// Hard labels at the given probability threshold.
    pub fn predict(&self, x: &FeatureMatrix, threshold: f64) -> Result<Vec<bool>, ModelError> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p >= threshold).collect())
    }
}

/// Trains the model the config names. `monitor` only matters for the MLP,
/// whose early stopping can watch an external set instead of a training
/// carve-out.
pub fn train_model(
    x: &FeatureMatrix,
    labels: &[bool],
    config: &TrainConfig,
    monitor: Option<(&FeatureMatrix, &[bool])>,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if x.n_rows() == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if labels.len() != x.n_rows() {
        return Err(ModelError::LengthMismatch { rows: x.n_rows(), labels: labels.len() });
    }
    let model = match config.kind {
        ModelKind::DecisionTree => {
            let settings = tree::GrowSettings {
                criterion: Criterion::Gini,
                max_depth: config.max_depth,
                min_leaf: config.min_leaf.resolve(x.n_rows()),
                feature_subset: None,
            };
            let seed = forest::mix_seed(config.seed, 0);
            Model::DecisionTree(tree::grow_classifier(x, labels, None, &settings, seed)?)
        }
        ModelKind::RandomForest => Model::RandomForest(forest::train_forest(x, labels, config)?),
        ModelKind::AdaBoost => Model::AdaBoost(adaboost::train_adaboost(x, labels, config)?),
        ModelKind::GradientBoosting => {
            Model::GradientBoosting(gbdt::train_gradient_boosting(x, labels, config)?)
        }
        ModelKind::Mlp => Model::Mlp(mlp::train_mlp(x, labels, config, monitor)?),
    };
    Ok(TrainedModel { n_features: x.n_features(), model })
}

// ---------------------------------------------------------------------------
// Feature importance
// ---------------------------------------------------------------------------

fn node_weight_impurity(node: &Node) -> (f64, f64) {
    match node {
        Node::Split { weight, impurity, .. } | Node::Leaf { weight, impurity, .. } => {
            (*weight, *impurity)
        }
    }
}

fn accumulate_tree_importance(tree: &Tree, alpha: f64, into: &mut [f64]) {
    let (root_weight, _) = node_weight_impurity(&tree.nodes[0]);
    if root_weight <= 0.0 {
        return;
    }
    for node in &tree.nodes {
        if let Node::Split { feature, left, right, weight, impurity, .. } = node {
            let (wl, il) = node_weight_impurity(&tree.nodes[*left]);
            let (wr, ir) = node_weight_impurity(&tree.nodes[*right]);
            let decrease = impurity - (wl / weight) * il - (wr / weight) * ir;
            into[*feature] += alpha * (weight / root_weight) * decrease;
        }
    }
}

/// Impurity-decrease importance, weighted by stage and normalized to sum 1.
/// Models with no splits at all get a zero vector; networks have no notion
/// of this importance.
pub fn gini_importance(model: &TrainedModel) -> Result<Vec<f64>, ModelError> {
    let mut total = vec![0.0f64; model.n_features];
    match &model.model {
        Model::DecisionTree(t) => accumulate_tree_importance(t, 1.0, &mut total),
        Model::RandomForest(f) => {
            let alpha = 1.0 / f.trees.len().max(1) as f64;
            for t in &f.trees {
                accumulate_tree_importance(t, alpha, &mut total);
            }
        }
        Model::AdaBoost(m) => {
            for stage in &m.stages {
                accumulate_tree_importance(&stage.tree, stage.alpha, &mut total);
            }
        }
        Model::GradientBoosting(m) => {
            for t in &m.trees {
                accumulate_tree_importance(t, 1.0, &mut total);
            }
        }
        Model::Mlp(_) => return Err(ModelError::NotTreeModel),
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        for v in &mut total {
            *v /= sum;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// On-disk model: payload plus everything needed to refuse mismatched
/// inputs and to reproduce the training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ModelKind,
    pub config: TrainConfig,
    pub schema_fingerprint: String,
    pub features: Vec<String>,
    /// Present when inputs were normalized before training (the MLP path).
    pub normalization: Option<NormalizationStats>,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(
        model: TrainedModel,
        config: TrainConfig,
        schema: &FeatureSchema,
        normalization: Option<NormalizationStats>,
    ) -> Self {
        ModelFile {
            kind: model.kind(),
            config,
            schema_fingerprint: schema.fingerprint(),
            features: schema.names().to_vec(),
            normalization,
            model,
        }
    }
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<(), ModelError> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|source| ModelError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, json).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|source| ModelError::Json { path: path.to_path_buf(), source })?;
    if file.features.len() != file.model.n_features {
        return Err(ModelError::SchemaMismatch {
            expected: file.model.n_features,
            got: file.features.len(),
        });
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gini_matches_hand_values() {
        assert_eq!(gini(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini(&[0.5, 0.5]).unwrap(), 0.5);
        assert!((gini(&[0.25, 0.75]).unwrap() - 0.375).abs() < 1e-15);
        assert!((gini(&[0.2, 0.3, 0.5]).unwrap() - 0.62).abs() < 1e-15);
    }

    #[test]
    fn gini_rejects_non_distributions() {
        assert!(matches!(gini(&[]), Err(ModelError::BadDistribution(_))));
        assert!(matches!(gini(&[-0.1, 1.1]), Err(ModelError::BadDistribution(_))));
        assert!(matches!(gini(&[0.3, 0.3]), Err(ModelError::BadDistribution(_))));
        assert!(matches!(gini(&[f64::NAN, 1.0]), Err(ModelError::BadDistribution(_))));
    }

    #[test]
    fn min_leaf_resolution() {
        assert_eq!(MinLeaf::Fraction(0.0001).resolve(1_000_000), 100);
        assert_eq!(MinLeaf::Fraction(0.0001).resolve(5_000), 1);
        assert_eq!(MinLeaf::Fraction(0.0001).resolve(10_001), 2);
        assert_eq!(MinLeaf::Fraction(0.5).resolve(3), 2);
        assert_eq!(MinLeaf::Count(9).resolve(1_000_000), 9);
        assert_eq!(MinLeaf::Count(0).resolve(10), 1);
    }

    #[test]
    fn table_defaults() {
        let dt = TrainConfig::decision_tree(1);
        assert_eq!((dt.kind, dt.max_depth), (ModelKind::DecisionTree, 12));
        assert_eq!(dt.min_leaf, MinLeaf::Fraction(0.0001));

        let rf = TrainConfig::random_forest(1);
        assert_eq!((rf.kind, rf.max_depth, rf.n_estimators), (ModelKind::RandomForest, 12, 200));
        assert!(rf.bootstrap);

        let tuned = TrainConfig::random_forest_tuned(1);
        assert_eq!((tuned.max_depth, tuned.n_estimators), (18, 200));
        assert_eq!(tuned.min_leaf, MinLeaf::Count(9));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::random_forest(0);
        cfg.max_depth = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::gradient_boosting(0);
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::decision_tree(0);
        cfg.min_leaf = MinLeaf::Fraction(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::mlp(0);
        cfg.mlp.hidden = vec![];
        assert!(cfg.validate().is_err());
    }

    fn blob_data(n: usize, seed: u64) -> (FeatureMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let positive = i % 2 == 0;
            let center: f32 = if positive { 0.75 } else { 0.25 };
            values.push(center + rng.gen_range(-0.2..0.2f32));
            values.push(rng.gen_range(0.0..1.0));
            values.push(rng.gen_range(0.0..1.0));
            labels.push(positive);
        }
        (FeatureMatrix::from_rows(values, 3).unwrap(), labels)
    }

    #[test]
    fn perfect_single_split_owns_all_importance() {
        let x = FeatureMatrix::from_rows(
            vec![0.1, 0.5, 0.2, 0.5, 0.8, 0.5, 0.9, 0.5],
            2,
        )
        .unwrap();
        let labels = [false, false, true, true];
        let model = train_model(&x, &labels, &TrainConfig::decision_tree(0), None).unwrap();
        let importance = gini_importance(&model).unwrap();
        assert_eq!(importance, vec![1.0, 0.0]);
    }

    #[test]
    fn importance_normalizes_and_ignores_unused_features() {
        let (x, labels) = blob_data(120, 9);
        let mut cfg = TrainConfig::random_forest(4);
        cfg.n_estimators = 25;
        cfg.max_depth = 4;
        let model = train_model(&x, &labels, &cfg, None).unwrap();
        let importance = gini_importance(&model).unwrap();
        assert_eq!(importance.len(), 3);
        assert!((importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(importance[0] > 0.5, "informative feature dominates: {importance:?}");
    }

    /// Recomputes importances from scratch by routing the training rows,
    /// ignoring the statistics stored in the nodes.
    fn routed_importance(
        trees: &[(&Tree, f64)],
        x: &FeatureMatrix,
        labels: &[bool],
        n_features: usize,
    ) -> Vec<f64> {
        let mut total = vec![0.0f64; n_features];
        for (tree, alpha) in trees {
            // Per node: routed count and positives.
            let mut count = vec![0usize; tree.nodes.len()];
            let mut positives = vec![0usize; tree.nodes.len()];
            for i in 0..x.n_rows() {
                let mut at = 0;
                loop {
                    count[at] += 1;
                    positives[at] += usize::from(labels[i]);
                    match &tree.nodes[at] {
                        Node::Leaf { .. } => break,
                        Node::Split { feature, threshold, left, right, .. } => {
                            at = if x.at(i, *feature) <= *threshold { *left } else { *right };
                        }
                    }
                }
            }
            let g = |at: usize| {
                let p = positives[at] as f64 / count[at] as f64;
                2.0 * p * (1.0 - p)
            };
            let root = count[0] as f64;
            for (at, node) in tree.nodes.iter().enumerate() {
                if let Node::Split { feature, left, right, .. } = node {
                    let (nk, nl, nr) = (count[at] as f64, count[*left] as f64, count[*right] as f64);
                    let decrease = g(at) - (nl / nk) * g(*left) - (nr / nk) * g(*right);
                    total[*feature] += alpha * (nk / root) * decrease;
                }
            }
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            for v in &mut total {
                *v /= sum;
            }
        }
        total
    }

    #[test]
    fn importance_matches_routing_oracle() {
        // No bootstrap and full feature access so every tree sees exactly
        // the training rows the oracle routes.
        let (x, labels) = blob_data(150, 31);
        let mut cfg = TrainConfig::random_forest(8);
        cfg.n_estimators = 7;
        cfg.bootstrap = false;
        cfg.max_depth = 5;
        cfg.min_leaf = MinLeaf::Count(3);
        let model = train_model(&x, &labels, &cfg, None).unwrap();
        let got = gini_importance(&model).unwrap();

        let Model::RandomForest(forest) = &model.model else { panic!("forest expected") };
        let alpha = 1.0 / forest.trees.len() as f64;
        let pairs: Vec<(&Tree, f64)> = forest.trees.iter().map(|t| (t, alpha)).collect();
        let want = routed_importance(&pairs, &x, &labels, 3);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn networks_have_no_gini_importance() {
        let (x, labels) = blob_data(40, 2);
        let mut cfg = TrainConfig::mlp(0);
        cfg.mlp.hidden = vec![4];
        cfg.mlp.max_epochs = 2;
        cfg.mlp.batch_size = 16;
        let model = train_model(&x, &labels, &cfg, None).unwrap();
        assert!(matches!(gini_importance(&model), Err(ModelError::NotTreeModel)));
    }

    #[test]
    fn predictions_respect_threshold_and_schema() {
        let (x, labels) = blob_data(80, 5);
        let model = train_model(&x, &labels, &TrainConfig::decision_tree(3), None).unwrap();
        let probas = model.predict_proba(&x).unwrap();
        let at_half = model.predict(&x, 0.5).unwrap();
        let strict = model.predict(&x, 0.9).unwrap();
        for i in 0..x.n_rows() {
            assert_eq!(at_half[i], probas[i] >= 0.5);
            assert_eq!(strict[i], probas[i] >= 0.9);
        }

        let (wide, _) = {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let values: Vec<f32> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
            (FeatureMatrix::from_rows(values, 5).unwrap(), ())
        };
        assert!(matches!(
            model.predict_proba(&wide),
            Err(ModelError::SchemaMismatch { expected: 3, got: 5 })
        ));
    }

    #[test]
    fn every_kind_roundtrips_through_model_files() {
        let dir = tempfile::tempdir().unwrap();
        let (x, labels) = blob_data(60, 17);
        let schema = FeatureSchema::generic(3);
        let kinds: Vec<TrainConfig> = vec![
            TrainConfig::decision_tree(1),
            {
                let mut c = TrainConfig::random_forest(2);
                c.n_estimators = 5;
                c
            },
            {
                let mut c = TrainConfig::adaboost(3);
                c.n_estimators = 5;
                c
            },
            {
                let mut c = TrainConfig::gradient_boosting(4);
                c.n_estimators = 5;
                c
            },
            {
                let mut c = TrainConfig::mlp(5);
                c.mlp.hidden = vec![6, 3];
                c.mlp.max_epochs = 3;
                c.mlp.batch_size = 32;
                c
            },
        ];
        for config in kinds {
            let model = train_model(&x, &labels, &config, None).unwrap();
            let file = ModelFile::new(model, config.clone(), &schema, None);
            let path = dir.path().join(format!("{}.model.json", config.kind.code()));
            save_model(&path, &file).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.kind, config.kind);
            assert_eq!(back.schema_fingerprint, schema.fingerprint());
            assert_eq!(back.features, schema.names());
            if config.kind == ModelKind::Mlp {
                // Network weights pass through an f32 cast; saving again must
                // be byte-identical even if the structs differ in f64.
                let again_path = dir.path().join("mlp2.model.json");
                save_model(&again_path, &back).unwrap();
                assert_eq!(
                    fs::read(&path).unwrap(),
                    fs::read(&again_path).unwrap()
                );
            } else {
                assert_eq!(back, file);
                // Reloaded trees predict identically.
                let a = file.model.predict_proba(&x).unwrap();
                let b = back.model.predict_proba(&x).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn kind_codes_roundtrip() {
        for kind in [
            ModelKind::DecisionTree,
            ModelKind::RandomForest,
            ModelKind::AdaBoost,
            ModelKind::GradientBoosting,
            ModelKind::Mlp,
        ] {
            assert_eq!(ModelKind::from_code(kind.code()), Some(kind));
        }
        assert_eq!(ModelKind::from_code("svm"), None);
    }
}
