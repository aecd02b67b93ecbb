//! Detection and explanation metrics plus the synthetic benchmarks.

mod corpus;
mod motif;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::Label;

pub use corpus::{generate_corpus, generate_sample, generate_sample_range, probe_inputs, split_indices, CorpusRecord, CorpusSpec};
pub use motif::{contains_special_cycle, generate_motif_graphs, generate_tiny_motif_graphs, MotifGraph, MOTIF_FEATURE_DIM, SPECIAL_FEATURE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("instance {0} has no ground-truth lines")]
    MissingGroundTruth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// Set when precision or recall had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

/// Accuracy, precision, recall and F1 with `Vulnerable` as the positive class.
pub fn detection_metrics(predicted: &[Label], actual: &[Label]) -> Result<DetectionMetrics, MetricError> {
    if predicted.len() != actual.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), actual.len()));
    }
    let mut m = DetectionMetrics::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (Label::Vulnerable, Label::Vulnerable) => m.tp += 1,
            (Label::Vulnerable, Label::Benign) => m.fp += 1,
            (Label::Benign, Label::Benign) => m.tn += 1,
            (Label::Benign, Label::Vulnerable) => m.fn_ += 1,
        }
    }
    let n = predicted.len();
    m.accuracy = if n == 0 { 0.0 } else { (m.tp + m.tn) as f64 / n as f64 };
    let ratio = |a: usize, b: usize, flag: &mut bool| {
        if b == 0 {
            *flag = true;
            0.0
        } else {
            a as f64 / b as f64
        }
    };
    m.precision = ratio(m.tp, m.tp + m.fp, &mut m.degenerate);
    m.recall = ratio(m.tp, m.tp + m.fn_, &mut m.degenerate);
    m.f1 = if m.precision + m.recall > 0.0 {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    } else {
        0.0
    };
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VtpScore {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

/// Statement precision, recall and IoU of one explanation.
pub fn vtp_score(explained: &BTreeSet<u32>, truth: &BTreeSet<u32>) -> VtpScore {
    let inter = explained.intersection(truth).count() as f64;
    let union = explained.union(truth).count() as f64;
    VtpScore {
        precision: if explained.is_empty() { 0.0 } else { inter / explained.len() as f64 },
        recall: if truth.is_empty() { 0.0 } else { inter / truth.len() as f64 },
        iou: if union == 0.0 { 0.0 } else { inter / union },
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VtpMetrics {
    pub msp: f64,
    pub msr: f64,
    pub miou: f64,
    pub count: usize,
    /// Explanations that were empty (scored 0 precision).
    pub empty_explanations: usize,
}

/// Mean statement precision / recall / IoU over explained instances.
pub fn vtp_metrics(explained: &[BTreeSet<u32>], truth: &[BTreeSet<u32>]) -> Result<VtpMetrics, MetricError> {
    if explained.len() != truth.len() {
        return Err(MetricError::LengthMismatch(explained.len(), truth.len()));
    }
    if let Some(i) = truth.iter().position(|t| t.is_empty()) {
        return Err(MetricError::MissingGroundTruth(i));
    }
    let mut m = VtpMetrics {
        count: explained.len(),
        ..Default::default()
    };
    if explained.is_empty() {
        return Ok(m);
    }
    for (e, t) in explained.iter().zip(truth) {
        let s = vtp_score(e, t);
        m.msp += s.precision;
        m.msr += s.recall;
        m.miou += s.iou;
        m.empty_explanations += e.is_empty() as usize;
    }
    let n = explained.len() as f64;
    m.msp /= n;
    m.msr /= n;
    m.miou /= n;
    Ok(m)
}

/// Edge-set IoU, used on the motif benchmark.
pub fn set_iou<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[cfg(test)]
mod tests;
