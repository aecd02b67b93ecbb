//! Contrastive objectives over a batch of `2N` projected embeddings.
//!
//! Member `2k` is the k-th original and `2k + 1` its augmented view, so the
//! positive partner of member `i` is `i ^ 1`.

use std::rc::Rc;

use crate::tensorcore::{Tape, Tensor, Var};

use super::TrainError;

/// Layout of one contrastive batch: `pairs` original/augmented pairs and the
/// class of each pair when it belongs to the labeled subset.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub labels: Vec<Option<usize>>,
}

impl BatchPlan {
    pub fn unlabeled(pairs: usize) -> Self {
        Self {
            labels: vec![None; pairs],
        }
    }

    pub fn pairs(&self) -> usize {
        self.labels.len()
    }

    pub fn members(&self) -> usize {
        2 * self.labels.len()
    }

    pub fn partner(i: usize) -> usize {
        i ^ 1
    }

    pub fn label_of(&self, member: usize) -> Option<usize> {
        self.labels[member / 2]
    }

    /// Same-label labeled members other than `i`; empty when `i` is unlabeled.
    pub fn positives(&self, i: usize) -> Vec<usize> {
        match self.label_of(i) {
            None => Vec::new(),
            Some(c) => (0..self.members())
                .filter(|&q| q != i && self.label_of(q) == Some(c))
                .collect(),
        }
    }
}

fn similarity(tape: &Tape, z: Var, tau: f64) -> Result<Var, TrainError> {
    let zt = tape.transpose(z)?;
    let s = tape.matmul(z, zt)?;
    Ok(tape.scale(s, 1.0 / tau)?)
}

fn check_rows(tape: &Tape, z: Var, plan: &BatchPlan) -> Result<usize, TrainError> {
    let n = tape.shape(z).0;
    if n != plan.members() || n < 2 {
        return Err(TrainError::Data(format!(
            "batch has {n} embeddings but the plan describes {} members",
            plan.members()
        )));
    }
    Ok(n)
}

/// `-Σ W ⊙ log_softmax_A(S)` for a constant weight matrix `W`.
fn weighted_nll(tape: &Tape, s: Var, mask: Vec<bool>, weights: Tensor) -> Result<Var, TrainError> {
    let ls = tape.masked_log_softmax(s, Rc::from(mask))?;
    let w = tape.constant(weights);
    let p = tape.mul(ls, w)?;
    let total = tape.sum(p)?;
    Ok(tape.scale(total, -1.0)?)
}

/// Self-supervised loss: each member must pick out its partner among every
/// other member of the batch.
pub fn nce_loss(tape: &Tape, z: Var, plan: &BatchPlan, tau: f64) -> Result<Var, TrainError> {
    let n = check_rows(tape, z, plan)?;
    let s = similarity(tape, z, tau)?;
    let mask = (0..n * n).map(|k| k / n != k % n).collect();
    let w = Tensor::from_fn(n, n, |i, j| if j == BatchPlan::partner(i) { 1.0 / n as f64 } else { 0.0 });
    weighted_nll(tape, s, mask, w)
}

/// Variant whose candidates are only the members of the other view, as in
/// the two-view InfoNCE formulation.
pub fn cross_view_nce_loss(tape: &Tape, z: Var, plan: &BatchPlan, tau: f64) -> Result<Var, TrainError> {
    let n = check_rows(tape, z, plan)?;
    let s = similarity(tape, z, tau)?;
    let mask = (0..n * n).map(|k| (k / n) % 2 != (k % n) % 2).collect();
    let w = Tensor::from_fn(n, n, |i, j| if j == BatchPlan::partner(i) { 1.0 / n as f64 } else { 0.0 });
    weighted_nll(tape, s, mask, w)
}

/// Supervised contrastive loss over the labeled members. Members whose
/// positive set is empty are skipped; the loss is averaged over the rest.
/// Returns the loss and the number of skipped labeled members.
pub fn supcon_loss(tape: &Tape, z: Var, plan: &BatchPlan, tau: f64) -> Result<(Var, usize), TrainError> {
    let n = check_rows(tape, z, plan)?;
    let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut skipped = 0;
    for i in 0..n {
        if plan.label_of(i).is_none() {
            continue;
        }
        let q = plan.positives(i);
        if q.is_empty() {
            skipped += 1;
        } else {
            rows.push((i, q));
        }
    }
    if rows.is_empty() {
        return Err(TrainError::EmptyPositives);
    }
    let s = similarity(tape, z, tau)?;
    let mask = (0..n * n).map(|k| k / n != k % n).collect();
    let mut w = Tensor::zeros(n, n);
    let scale = 1.0 / rows.len() as f64;
    for (i, q) in &rows {
        for &j in q {
            w.set(*i, j, scale / q.len() as f64);
        }
    }
    Ok((weighted_nll(tape, s, mask, w)?, skipped))
}

/// `(1-λ)·NCE + λ·SupCon`; a term with zero weight is not evaluated.
pub fn total_loss(tape: &Tape, z: Var, plan: &BatchPlan, tau: f64, lambda: f64) -> Result<Var, TrainError> {
    let mut out = None;
    if lambda < 1.0 {
        let l = nce_loss(tape, z, plan, tau)?;
        out = Some(tape.scale(l, 1.0 - lambda)?);
    }
    if lambda > 0.0 {
        let (l, _) = supcon_loss(tape, z, plan, tau)?;
        let l = tape.scale(l, lambda)?;
        out = Some(match out {
            Some(a) => tape.add(a, l)?,
            None => l,
        });
    }
    Ok(out.expect("at least one term"))
}

/// Mean cross-entropy of `n × 2` logits against class ids.
pub fn cross_entropy(tape: &Tape, logits: Var, classes: &[usize]) -> Result<Var, TrainError> {
    let (n, c) = tape.shape(logits);
    if n != classes.len() || n == 0 {
        return Err(TrainError::Data(format!("{n} logit rows for {} labels", classes.len())));
    }
    let w = Tensor::from_fn(n, c, |i, j| if classes[i] == j { 1.0 / n as f64 } else { 0.0 });
    weighted_nll(tape, logits, vec![true; n * c], w)
}
