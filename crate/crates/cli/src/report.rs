//! CSV and plain-text artifact writers.
//!
//! All numbers use Rust's shortest-roundtrip float formatting, so identical
//! runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use diffkmeans_core::{ConfusionReport, Dataset, EvalReport, TrainHistory};

use crate::error::{CliError, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// `epoch,L,L_k,L_C,M_C,fg_accuracy` with the epoch-0 baseline first.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,L,L_k,L_C,M_C,fg_accuracy\n");
    for row in history.rows() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.epoch, row.total, row.kmeans, row.xent, row.balance, row.fg_accuracy
        );
    }
    out
}

/// Counts table and column-normalized percentage table in one CSV: the first
/// column tags the table, the second the cluster, then one column per
/// observed class.
pub fn confusion_csv(report: Option<&ConfusionReport>) -> String {
    let Some(report) = report else {
        return String::from("table,cluster\n# no foreground samples in the evaluation set\n");
    };
    let mut out = String::from("table,cluster");
    for class in &report.class_ids {
        let _ = write!(out, ",class_{class}");
    }
    out.push('\n');
    for (k, row) in report.counts.iter().enumerate() {
        let _ = write!(out, "counts,{k}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    for (k, row) in report.per_class_pct.iter().enumerate() {
        let _ = write!(out, "per_class_pct,{k}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Human-readable summary block.
pub fn summary_text(run_id: &str, eval: &EvalReport, test_len: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run: {run_id}");
    let _ = writeln!(
        out,
        "test samples: {test_len} ({} foreground)",
        eval.foreground_count
    );
    let _ = writeln!(out, "fg/bg accuracy: {:.4}", eval.fg_accuracy);
    match (&eval.confusion, eval.kmeans_loss) {
        (Some(report), Some(loss)) => {
            let _ = writeln!(out, "clusters: {}", report.num_clusters());
            let _ = writeln!(out, "purity: {:.4}", report.purity);
            if let Some(acc) = report.one_to_one_accuracy {
                let _ = writeln!(out, "one-to-one accuracy: {acc:.4}");
            }
            let _ = writeln!(out, "foreground k-means loss: {loss:.6}");
            for (k, class) in report.majority_map.iter().enumerate() {
                let total: u64 = report.counts[k].iter().sum();
                let _ = writeln!(
                    out,
                    "cluster {k}: {total} samples, majority class {class}"
                );
            }
        }
        _ => {
            let _ = writeln!(out, "no foreground samples; confusion table omitted");
        }
    }
    out
}

/// `hidden_class,fg_flag,f_0..f_{D-1}` rows for a generated dataset.
pub fn dataset_csv(dataset: &Dataset) -> String {
    let mut out = diffkmeans_core::dataset::csv_header(dataset.dim());
    out.push('\n');
    for s in dataset.samples() {
        let _ = write!(out, "{},{}", s.hidden_class, u8::from(s.fg_flag));
        for v in &s.features {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
