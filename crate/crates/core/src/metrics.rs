//! Confusion matrix, overall accuracy, Cohen's kappa and JSON reports.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{ensure, Error, Result};
use crate::src::LabelMap;

/// `counts[t * K + p]` = pixels with truth `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(class_count: usize, counts: Vec<u64>) -> Result<Self> {
        ensure!(class_count >= 1, "class count must be >= 1");
        ensure!(
            counts.len() == class_count * class_count,
            "{} counts for {} classes",
            counts.len(),
            class_count
        );
        Ok(ConfusionMatrix {
            class_count,
            counts,
        })
    }

    /// Tallies paired label slices.
    pub fn from_labels(pred: &[usize], truth: &[usize], class_count: usize) -> Result<Self> {
        ensure!(
            pred.len() == truth.len(),
            "prediction has {} labels, truth has {}",
            pred.len(),
            truth.len()
        );
        let mut counts = vec![0u64; class_count * class_count];
        for (&p, &t) in pred.iter().zip(truth) {
            ensure!(
                p < class_count && t < class_count,
                "label out of range for {} classes (pred {}, truth {})",
                class_count,
                p,
                t
            );
            counts[t * class_count + p] += 1;
        }
        ConfusionMatrix::from_counts(class_count, counts)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.class_count + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.class_count)
            .map(|t| (0..self.class_count).map(|p| self.get(t, p)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.class_count)
            .map(|p| (0..self.class_count).map(|t| self.get(t, p)).sum())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.class_count)
            .map(|r| r.to_vec())
            .collect()
    }

    /// Accuracy in percent truncated toward zero to two decimals, computed
    /// exactly from the integer counts.
    pub fn accuracy_display(&self) -> Result<String> {
        let total = self.total();
        ensure!(total > 0, "empty confusion matrix");
        let hundredths = (self.trace() as u128 * 10_000) / total as u128;
        Ok(format!("{}.{:02}", hundredths / 100, hundredths % 100))
    }
}

pub fn confusion(pred: &LabelMap, truth: &LabelMap, class_count: usize) -> Result<ConfusionMatrix> {
    ensure!(
        pred.width() == truth.width() && pred.height() == truth.height(),
        "label maps differ in size"
    );
    let p = pred.definite_labels()?;
    let t = truth.definite_labels()?;
    ConfusionMatrix::from_labels(&p, &t, class_count)
}

/// `100 · trace / total`
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    ensure!(total > 0, "empty confusion matrix");
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

/// Truncates toward zero to two decimals for display.
pub fn truncate_2dp(v: f64) -> String {
    // nudge by a few ulps so values like 0.29 (stored as 0.28999…) keep their digit
    let scaled = v * 100.0;
    let t = (scaled + scaled.signum() * scaled.abs() * 4.0 * f64::EPSILON).trunc();
    format!("{:.2}", t / 100.0)
}

/// Cohen's kappa `(p_o − p_e) / (1 − p_e)`, with `p_o = trace/total` and
/// `p_e = Σ_i row_i · col_i / total²`.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    ensure!(total > 0, "empty confusion matrix");
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let chance: u128 = rows
        .iter()
        .zip(&cols)
        .map(|(&r, &c)| r as u128 * c as u128)
        .sum();
    let t2 = total as u128 * total as u128;
    if chance == t2 {
        return Err(Error::KappaUndefined);
    }
    let t = total as f64;
    let p_o = cm.trace() as f64 / t;
    let p_e = chance as f64 / (t * t);
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// A named value destined for a JSON report.
#[derive(Debug, Clone)]
pub enum MetricEntry {
    /// Overall accuracy in percent: emits the number and its truncated display.
    Accuracy(f64),
    Kappa(f64),
    PsnrNoisy(f64),
    PsnrDenoised(f64),
    /// Emits `confusion`, `overall_accuracy_*`, `kappa` and per-class counts.
    Confusion(ConfusionMatrix),
    Number(String, f64),
    Series(String, Vec<f64>),
    Text(String, String),
    /// Nested object under the given key.
    Section(String, Vec<MetricEntry>),
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("NaN")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn collect(entries: &[MetricEntry], out: &mut BTreeMap<String, Value>) {
    for e in entries {
        match e {
            MetricEntry::Accuracy(v) => {
                out.insert("overall_accuracy_pct".into(), number(*v));
                out.insert("overall_accuracy_display".into(), json!(truncate_2dp(*v)));
            }
            MetricEntry::Kappa(v) => {
                out.insert("kappa".into(), number(*v));
            }
            MetricEntry::PsnrNoisy(v) => {
                out.insert("psnr_noisy_db".into(), number(*v));
            }
            MetricEntry::PsnrDenoised(v) => {
                out.insert("psnr_denoised_db".into(), number(*v));
            }
            MetricEntry::Confusion(cm) => {
                out.insert("confusion".into(), json!(cm.rows()));
                out.insert("truth_counts".into(), json!(cm.row_sums()));
                out.insert("predicted_counts".into(), json!(cm.col_sums()));
                out.insert("matched".into(), json!(cm.trace()));
                out.insert("total".into(), json!(cm.total()));
                if let Ok(acc) = overall_accuracy(cm) {
                    out.insert("overall_accuracy_pct".into(), number(acc));
                    if let Ok(d) = cm.accuracy_display() {
                        out.insert("overall_accuracy_display".into(), json!(d));
                    }
                }
                match kappa(cm) {
                    Ok(k) => out.insert("kappa".into(), number(k)),
                    Err(_) => out.insert("kappa".into(), Value::Null),
                };
            }
            MetricEntry::Number(k, v) => {
                out.insert(k.clone(), number(*v));
            }
            MetricEntry::Series(k, v) => {
                out.insert(
                    k.clone(),
                    Value::Array(v.iter().map(|&x| number(x)).collect()),
                );
            }
            MetricEntry::Text(k, v) => {
                out.insert(k.clone(), json!(v));
            }
            MetricEntry::Section(k, inner) => {
                let mut sub = BTreeMap::new();
                collect(inner, &mut sub);
                out.insert(k.clone(), json!(sub));
            }
        }
    }
}

/// Key-sorted JSON document; identical entries give byte-identical text.
pub fn report(entries: &[MetricEntry]) -> String {
    let mut map = BTreeMap::new();
    collect(entries, &mut map);
    if map.is_empty() {
        return "{}".to_string();
    }
    serde_json::to_string_pretty(&map).expect("report values serialize")
}
