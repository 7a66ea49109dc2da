//! Segmentation metrics: predicted and ground-truth segments are associated
//! by Hungarian matching on `1 - IoU`, then precision, recall and IoU are
//! averaged over instances.

mod hungarian;

pub use hungarian::hungarian;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Pixels,
    Points,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Pixels => "pixels",
            Domain::Points => "points",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Matched,
    UnmatchedPrediction,
    UnmatchedTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    /// Frame or scene the instance belongs to.
    pub unit: String,
    pub kind: InstanceKind,
    pub prediction: Option<usize>,
    pub truth: Option<usize>,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

pub const AGGREGATION_NOTE: &str = "precision averages matched and unmatched predictions (unmatched = 0); \
recall and IoU average matched and unmatched ground-truth segments (unmatched = 0); \
a pair with zero overlap counts as unmatched; instances pooled over all evaluated units";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub domain: Domain,
    pub aggregation: String,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub units: usize,
    pub matched: usize,
    pub unmatched_predictions: usize,
    pub unmatched_truths: usize,
    pub instances: Vec<InstanceScore>,
}

impl MetricReport {
    /// Pools instances from any number of units into one report.
    pub fn pooled(domain: Domain, units: usize, instances: Vec<InstanceScore>) -> Self {
        let count = |k: InstanceKind| instances.iter().filter(|s| s.kind == k).count();
        let mean = |skip: InstanceKind, get: fn(&InstanceScore) -> f64| {
            let vals: Vec<f64> = instances.iter().filter(|s| s.kind != skip).map(get).collect();
            if vals.is_empty() {
                1.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        };
        Self {
            domain,
            aggregation: AGGREGATION_NOTE.to_string(),
            precision: mean(InstanceKind::UnmatchedTruth, |s| s.precision),
            recall: mean(InstanceKind::UnmatchedPrediction, |s| s.recall),
            iou: mean(InstanceKind::UnmatchedPrediction, |s| s.iou),
            units,
            matched: count(InstanceKind::Matched),
            unmatched_predictions: count(InstanceKind::UnmatchedPrediction),
            unmatched_truths: count(InstanceKind::UnmatchedTruth),
            instances,
        }
    }

    /// Metrics for a single unit.
    pub fn single(domain: Domain, unit: &str, pred: &[Option<usize>], truth: &[Option<usize>]) -> Result<Self> {
        Ok(Self::pooled(domain, 1, score_instances(unit, pred, truth)?))
    }
}

/// Per-instance scores for one unit. Elements whose truth is `None` are
/// background and ignored; a `None` prediction on a foreground element
/// leaves it unassigned.
pub fn score_instances(unit: &str, pred: &[Option<usize>], truth: &[Option<usize>]) -> Result<Vec<InstanceScore>> {
    if pred.len() != truth.len() {
        return Err(Error::MaskMismatch(format!(
            "{unit}: {} predicted elements vs {} ground-truth elements",
            pred.len(),
            truth.len()
        )));
    }
    let mut pred_size: BTreeMap<usize, usize> = BTreeMap::new();
    let mut truth_size: BTreeMap<usize, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (p, t) in pred.iter().zip(truth) {
        let Some(t) = *t else { continue };
        *truth_size.entry(t).or_default() += 1;
        if let Some(p) = *p {
            *pred_size.entry(p).or_default() += 1;
            *overlap.entry((p, t)).or_default() += 1;
        }
    }
    let preds: Vec<usize> = pred_size.keys().copied().collect();
    let truths: Vec<usize> = truth_size.keys().copied().collect();
    let iou = |p: usize, t: usize| {
        let inter = overlap.get(&(p, t)).copied().unwrap_or(0);
        inter as f64 / (pred_size[&p] + truth_size[&t] - inter) as f64
    };
    let cost: Vec<Vec<f64>> = preds.iter().map(|&p| truths.iter().map(|&t| 1.0 - iou(p, t)).collect()).collect();
    let assignment = hungarian(&cost)?;

    let mut out = Vec::new();
    let mut pred_used = vec![false; preds.len()];
    let mut truth_used = vec![false; truths.len()];
    for (pi, ti) in assignment {
        let (p, t) = (preds[pi], truths[ti]);
        let inter = overlap.get(&(p, t)).copied().unwrap_or(0);
        if inter == 0 {
            continue;
        }
        pred_used[pi] = true;
        truth_used[ti] = true;
        out.push(InstanceScore {
            unit: unit.to_string(),
            kind: InstanceKind::Matched,
            prediction: Some(p),
            truth: Some(t),
            precision: inter as f64 / pred_size[&p] as f64,
            recall: inter as f64 / truth_size[&t] as f64,
            iou: iou(p, t),
        });
    }
    for (_, &p) in preds.iter().enumerate().filter(|(i, _)| !pred_used[*i]) {
        out.push(InstanceScore {
            unit: unit.to_string(),
            kind: InstanceKind::UnmatchedPrediction,
            prediction: Some(p),
            truth: None,
            precision: 0.0,
            recall: 0.0,
            iou: 0.0,
        });
    }
    for (_, &t) in truths.iter().enumerate().filter(|(i, _)| !truth_used[*i]) {
        out.push(InstanceScore {
            unit: unit.to_string(),
            kind: InstanceKind::UnmatchedTruth,
            prediction: None,
            truth: Some(t),
            precision: 0.0,
            recall: 0.0,
            iou: 0.0,
        });
    }
    Ok(out)
}

/// Convenience wrapper returning one unit's report.
pub fn segmentation_metrics(pred: &[Option<usize>], truth: &[Option<usize>], domain: Domain) -> Result<MetricReport> {
    MetricReport::single(domain, "0", pred, truth)
}

/// Adjusted Rand index between two labelings of the same elements.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MaskMismatch(format!("{} vs {} elements", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let pairs = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = if n < 2.0 { 0.0 } else { sa * sb / pairs(n) };
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < 1e-12 {
        // Both labelings trivial (all-one or all-distinct).
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Aligned text table with one row per named report.
pub fn render_table(title: &str, rows: &[(&str, &MetricReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "# {AGGREGATION_NOTE}");
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("method".len());
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>9}  {:>6}  {:>6}  {:>7}  {:>10}  {:>9}",
        "method", "domain", "precision", "recall", "IoU", "matched", "extra_pred", "missed_gt"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>9.3}  {:>6.3}  {:>6.3}  {:>7}  {:>10}  {:>9}",
            name, r.domain, r.precision, r.recall, r.iou, r.matched, r.unmatched_predictions, r.unmatched_truths
        );
    }
    out
}
