//! Confusion counts, rate metrics, ROC/AUC, fold aggregation, and
//! operational-deployment projections.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    BadScore(usize),
    #[error("only one class present; ROC needs both")]
    OneClassOnly,
    #[error("no folds to aggregate")]
    NoFolds,
    #[error("{name} = {value} is outside [0, 1]")]
    BadRate { name: &'static str, value: f64 },
    #[error("{0} must be positive")]
    BadCount(&'static str),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

// ---------------------------------------------------------------------------
// Confusion counts and rates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(labels: &[bool], predicted: &[bool]) -> Result<Self, EvalError> {
        if labels.len() != predicted.len() {
            return Err(EvalError::LengthMismatch {
                scores: predicted.len(),
                labels: labels.len(),
            });
        }
        let mut cm = Self::default();
        for (&l, &p) in labels.iter().zip(predicted) {
            match (l, p) {
                (true, true) => cm.tp += 1,
                (false, true) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (true, false) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    /// Thresholds scores at `threshold` (score >= threshold is positive).
    pub fn from_scores(
        labels: &[bool],
        scores: &[f64],
        threshold: f64,
    ) -> Result<Self, EvalError> {
        if labels.len() != scores.len() {
            return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
        }
        let predicted: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
        Self::from_predictions(labels, &predicted)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn add(&mut self, other: &Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Rates derived from one confusion matrix. A rate whose denominator is zero
/// is `None` and listed in `undefined`, never silently 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub undefined: Vec<String>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let mut undefined = Vec::new();
    let mut rate = |name: &str, num: u64, den: u64| -> Option<f64> {
        if den == 0 {
            undefined.push(name.to_string());
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let accuracy = rate("accuracy", cm.tp + cm.tn, cm.total());
    let precision = rate("precision", cm.tp, cm.tp + cm.fp);
    let recall = rate("recall", cm.tp, cm.tp + cm.fn_);
    let false_positive_rate = rate("false_positive_rate", cm.fp, cm.fp + cm.tn);
    Metrics { accuracy, precision, recall, false_positive_rate, undefined }
}

/// Sums confusion counts across folds; rates must be derived from the sum,
/// not averaged across folds.
pub fn aggregate(folds: &[ConfusionMatrix]) -> Result<ConfusionMatrix, EvalError> {
    if folds.is_empty() {
        return Err(EvalError::NoFolds);
    }
    let mut total = ConfusionMatrix::default();
    for f in folds {
        total.add(f);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

/// One ROC sweep step. `threshold: None` is the no-positives anchor (as if
/// thresholding above every score).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// Threshold sweep over distinct scores (ties grouped into one step) plus
/// trapezoid AUC.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::BadScore(i));
    }
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let n = labels.len() as f64 - p;
    if p == 0.0 || n == 0.0 {
        return Err(EvalError::OneClassOnly);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { threshold: None, fpr: 0.0, tpr: 0.0 }];
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { threshold: Some(s), fpr: fp as f64 / n, tpr: tp as f64 / p });
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
        .sum();
    Ok((points, auc))
}

// ---------------------------------------------------------------------------
// Operational projection
// ---------------------------------------------------------------------------

/// Precision the classifier would reach on a population with `positives`
/// real positives and `negatives` real negatives: RE*P / (RE*P + FPR*N).
pub fn operational_projection(
    recall: f64,
    fpr: f64,
    positives: f64,
    negatives: f64,
) -> Result<f64, EvalError> {
    for (name, v) in [("recall", recall), ("fpr", fpr)] {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(EvalError::BadRate { name: if name == "recall" { "recall" } else { "fpr" }, value: v });
        }
    }
    if !(positives > 0.0) {
        return Err(EvalError::BadCount("positives"));
    }
    if !(negatives > 0.0) {
        return Err(EvalError::BadCount("negatives"));
    }
    let hits = recall * positives;
    let false_alarms = fpr * negatives;
    if hits + false_alarms == 0.0 {
        return Err(EvalError::DivisionByZero(
            "recall and fpr are both zero; no predicted positives".into(),
        ));
    }
    Ok(hits / (hits + false_alarms))
}

/// False positive rate needed to reach `precision_target` given `tp` kept
/// true positives over `negatives` real negatives: FPR = (1-PR)*TP / (PR*N).
pub fn required_fpr(precision_target: f64, tp: f64, negatives: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&precision_target) || !precision_target.is_finite() {
        return Err(EvalError::BadRate { name: "precision_target", value: precision_target });
    }
    if precision_target == 0.0 {
        return Err(EvalError::DivisionByZero("precision target of zero".into()));
    }
    if !(tp >= 0.0) {
        return Err(EvalError::BadCount("tp"));
    }
    if !(negatives > 0.0) {
        return Err(EvalError::BadCount("negatives"));
    }
    Ok(((1.0 - precision_target) * tp) / (precision_target * negatives))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub recall: f64,
    pub fpr: f64,
    pub positives: f64,
    pub negatives: f64,
    pub extrapolated_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_fold: Vec<FoldReport>,
    pub overall_confusion: ConfusionMatrix,
    pub overall: Metrics,
    pub roc: Vec<RocPoint>,
    pub auc: Option<f64>,
    #[serde(default)]
    pub feature_importances: Vec<FeatureImportance>,
    #[serde(default)]
    pub projection: Option<ProjectionReport>,
}

impl EvalReport {
    /// Builds the overall block from per-fold confusion counts.
    pub fn from_folds(per_fold: Vec<FoldReport>) -> Result<Self, EvalError> {
        let overall_confusion = aggregate(
            &per_fold.iter().map(|f| f.confusion).collect::<Vec<_>>(),
        )?;
        let overall = metrics(&overall_confusion);
        Ok(Self {
            per_fold,
            overall_confusion,
            overall,
            roc: vec![],
            auc: None,
            feature_importances: vec![],
            projection: None,
        })
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let check = |name: &'static str, v: Option<f64>| -> Result<(), EvalError> {
            match v {
                Some(x) if !(0.0..=1.0).contains(&x) => Err(EvalError::BadRate { name, value: x }),
                _ => Ok(()),
            }
        };
        check("accuracy", self.overall.accuracy)?;
        check("precision", self.overall.precision)?;
        check("recall", self.overall.recall)?;
        check("false_positive_rate", self.overall.false_positive_rate)?;
        for p in &self.roc {
            check("fpr", Some(p.fpr))?;
            check("tpr", Some(p.tpr))?;
        }
        Ok(())
    }
}

/// `threshold,fpr,tpr` rows; the anchor point's threshold is left empty.
pub fn write_roc_csv(points: &[RocPoint], path: &Path) -> Result<(), EvalError> {
    let io = |source: std::io::Error| EvalError::Io { path: path.to_path_buf(), source };
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        let t = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!("{t},{},{}\n", p.fpr, p.tpr));
    }
    std::fs::write(path, out).map_err(io)
}

/// `feature,weight` rows, highest weight first.
pub fn write_importance_csv(
    importances: &[FeatureImportance],
    path: &Path,
) -> Result<(), EvalError> {
    let io = |source: std::io::Error| EvalError::Io { path: path.to_path_buf(), source };
    let mut sorted: Vec<&FeatureImportance> = importances.iter().collect();
    sorted.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    let mut out = String::from("feature,weight\n");
    for imp in sorted {
        out.push_str(&format!("{},{}\n", imp.feature, imp.weight));
    }
    std::fs::write(path, out).map_err(io)
}
