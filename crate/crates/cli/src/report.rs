//! Plain-text rendering of evaluation results: accuracy per fold, then the
//! overall precision / recall / false-positive-rate line.

use stormcast::eval::{metrics, ConfusionMatrix, EvalReport};

fn pct(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "n/a".to_string(),
    }
}

fn num(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

fn overall_line(cm: &ConfusionMatrix) -> String {
    let m = metrics(cm);
    format!(
        "overall  PR {:>7}  RE {:>7}  FPR {:>7}  ACC {:>7}",
        pct(m.precision),
        pct(m.recall),
        pct(m.false_positive_rate),
        pct(m.accuracy),
    )
}

pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("fold     rows  accuracy       auc\n");
    for fold in &report.per_fold {
        out.push_str(&format!(
            "{:>4}  {:>7}  {:>8}  {:>8}\n",
            fold.fold,
            fold.confusion.total(),
            pct(fold.metrics.accuracy),
            num(fold.auc),
        ));
    }
    out.push_str(&overall_line(&report.overall_confusion));
    out.push('\n');
    if let Some(auc) = report.auc {
        out.push_str(&format!("pooled out-of-fold AUC {auc:.4}\n"));
    }
    out
}

/// Metrics straight from explicit confusion counts, no artifacts involved.
pub fn render_counts(tp: u64, fn_: u64, fp: u64, tn: u64) -> String {
    let cm = ConfusionMatrix { tp, fp, tn, fn_ };
    let mut out = format!("counts   TP {tp}  FN {fn_}  FP {fp}  TN {tn}\n");
    out.push_str(&overall_line(&cm));
    out.push('\n');
    out
}
