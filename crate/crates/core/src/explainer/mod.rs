//! Dual-view (factual + counterfactual) explanation of a detector's verdict:
//! relaxed edge/feature masks are optimized, binarized, and mapped back to
//! ranked source statements.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::{CodeGraph, Label};
use crate::encoders::{Detector, GraphInput, Masks};
use crate::tensorcore::{Adam, Bound, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("graph has {edges} edges; brute force is limited to {max}")]
    Size { edges: usize, max: usize },
    #[error("invalid explainer config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ExplainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainMode {
    Dual,
    FactualOnly,
    CounterfactualOnly,
}

impl std::str::FromStr for ExplainMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dual" => Ok(ExplainMode::Dual),
            "factual-only" => Ok(ExplainMode::FactualOnly),
            "counterfactual-only" => Ok(ExplainMode::CounterfactualOnly),
            _ => Err(format!("unknown explain mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub alpha: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub mode: ExplainMode,
    /// Weight of the L1 terms.
    pub sparsity: f64,
    /// Optimize a feature mask as well as the edge mask.
    pub mask_features: bool,
    /// Cap on reported statements; also the fallback when nothing survives θ.
    pub top_k: Option<usize>,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            steps: 500,
            learning_rate: 0.05,
            threshold: 0.5,
            mode: ExplainMode::Dual,
            sparsity: 1.0,
            mask_features: true,
            top_k: None,
        }
    }
}

impl ExplainerConfig {
    /// α after the mode override.
    pub fn effective_alpha(&self) -> f64 {
        match self.mode {
            ExplainMode::Dual => self.alpha,
            ExplainMode::FactualOnly => 1.0,
            ExplainMode::CounterfactualOnly => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ExplainError::Config("alpha must lie in [0, 1]".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ExplainError::Config("threshold must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.sparsity >= 0.0) {
            return Err(ExplainError::Config("learning rate must be positive and sparsity non-negative".into()));
        }
        Ok(())
    }
}

/// Mask logits; masks are their sigmoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationMask {
    /// `E × 1`, aligned with the graph's edge list.
    pub edge_logits: Tensor,
    /// `V × d`, absent when features are not masked.
    pub feature_logits: Option<Tensor>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ExplanationMask {
    pub fn zeros(g: &CodeGraph, with_features: bool) -> Self {
        Self {
            edge_logits: Tensor::zeros(g.edges.len(), 1),
            feature_logits: with_features.then(|| Tensor::zeros(g.num_nodes(), g.feature_dim)),
        }
    }

    pub fn edge_mask(&self) -> Vec<f64> {
        self.edge_logits.data().iter().map(|&x| sigmoid(x)).collect()
    }

    /// Row maxima of the feature mask, or None without feature masking.
    pub fn feature_row_max(&self) -> Option<Vec<f64>> {
        self.feature_logits.as_ref().map(|f| {
            (0..f.rows())
                .map(|i| sigmoid(f.row_slice(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)))
                .collect()
        })
    }
}

/// Model bound on a tape together with the graph and its prediction.
struct Frozen<'a> {
    det: &'a Detector,
    enc: Bound,
    cls: Bound,
    gi: &'a GraphInput,
}

impl<'a> Frozen<'a> {
    fn new(tape: &Tape, det: &'a Detector, gi: &'a GraphInput) -> Self {
        Self {
            det,
            enc: det.encoder.params.bind(tape, false),
            cls: det.classifier.params.bind(tape, false),
            gi,
        }
    }

    fn probs(&self, tape: &Tape, edges: Var, features: Option<Var>) -> Result<Var> {
        Ok(self.det.probabilities(
            tape,
            &self.enc,
            &self.cls,
            self.gi,
            Masks {
                edges: Some(edges),
                features,
            },
        )?)
    }
}

/// Tape values of one objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveParts {
    pub objective: Var,
    pub s_f: Var,
    pub s_c: Var,
    pub l_f: Var,
    pub l_c: Var,
}

/// Builds the objective from mask logits already on `tape`.
pub fn objective_on_tape(
    tape: &Tape,
    det: &Detector,
    gi: &GraphInput,
    predicted: Label,
    edge_logits: Var,
    feature_logits: Option<Var>,
    cfg: &ExplainerConfig,
) -> Result<ObjectiveParts> {
    let frozen = Frozen::new(tape, det, gi);
    let (y, ys) = (predicted.as_class(), 1 - predicted.as_class());
    let m = tape.sigmoid(edge_logits)?;
    let f = feature_logits.map(|l| tape.sigmoid(l)).transpose()?;
    let p_sub = frozen.probs(tape, m, f)?;
    let m_c = tape.one_minus(m)?;
    let f_c = f.map(|f| tape.one_minus(f)).transpose()?;
    let p_comp = frozen.probs(tape, m_c, f_c)?;

    let s_f = tape.pick(p_sub, 0, y)?;
    let p_comp_y = tape.pick(p_comp, 0, y)?;
    let s_c = tape.scale(p_comp_y, -1.0)?;
    // L_f = relu(1/2 - S_f + P(ys|sub)), L_c = relu(1/2 - S_c - P(ys|comp))
    let sub_ys = tape.pick(p_sub, 0, ys)?;
    let comp_ys = tape.pick(p_comp, 0, ys)?;
    let a = tape.sub(sub_ys, s_f)?;
    let a = tape.add_scalar(a, 0.5)?;
    let l_f = tape.relu(a)?;
    let b = tape.add(s_c, comp_ys)?;
    let b = tape.scale(b, -1.0)?;
    let b = tape.add_scalar(b, 0.5)?;
    let l_c = tape.relu(b)?;

    let mut l1 = tape.l1_norm(m)?;
    if let Some(f) = f {
        let lf = tape.l1_norm(f)?;
        l1 = tape.add(l1, lf)?;
    }
    let alpha = cfg.effective_alpha();
    let mut obj = tape.scale(l1, cfg.sparsity)?;
    if alpha > 0.0 {
        let t = tape.scale(l_f, alpha)?;
        obj = tape.add(obj, t)?;
    }
    if alpha < 1.0 {
        let t = tape.scale(l_c, 1.0 - alpha)?;
        obj = tape.add(obj, t)?;
    }
    Ok(ObjectiveParts {
        objective: obj,
        s_f,
        s_c,
        l_f,
        l_c,
    })
}

fn evaluate(det: &Detector, g: &CodeGraph, mask: &ExplanationMask, cfg: &ExplainerConfig, predicted: Label) -> Result<[f64; 5]> {
    let gi = det.encoder.prepare(g);
    let tape = Tape::new();
    let e = tape.constant(mask.edge_logits.clone());
    let f = mask.feature_logits.clone().map(|t| tape.constant(t));
    let p = objective_on_tape(&tape, det, &gi, predicted, e, f, cfg)?;
    Ok([p.objective, p.s_f, p.s_c, p.l_f, p.l_c].map(|v| tape.item(v)))
}

/// Predicted label of the unmasked graph.
pub fn predicted_label(det: &Detector, g: &CodeGraph) -> Result<Label> {
    let p = det.predict(g)?;
    Ok(Label::from_class((p[1] > p[0]) as usize))
}

/// Factual and counterfactual strengths `(S_f, S_c)` of a mask.
pub fn strengths(det: &Detector, g: &CodeGraph, mask: &ExplanationMask, predicted: Label) -> Result<(f64, f64)> {
    let v = evaluate(det, g, mask, &ExplainerConfig::default(), predicted)?;
    Ok((v[1], v[2]))
}

/// The hinge losses `(L_f, L_c)` of a mask.
pub fn dual_losses(det: &Detector, g: &CodeGraph, mask: &ExplanationMask, predicted: Label) -> Result<(f64, f64)> {
    let v = evaluate(det, g, mask, &ExplainerConfig::default(), predicted)?;
    Ok((v[3], v[4]))
}

pub fn objective(det: &Detector, g: &CodeGraph, mask: &ExplanationMask, cfg: &ExplainerConfig, predicted: Label) -> Result<f64> {
    Ok(evaluate(det, g, mask, cfg, predicted)?[0])
}

/// Adam on the mask logits from zero; returns the lowest-objective mask seen
/// and the objective trace (one value per evaluated step).
pub fn optimize(det: &Detector, g: &CodeGraph, cfg: &ExplainerConfig, predicted: Label) -> Result<(ExplanationMask, Vec<f64>)> {
    cfg.validate()?;
    let gi = det.encoder.prepare(g);
    let mut mask = ExplanationMask::zeros(g, cfg.mask_features);
    let mut params: Vec<Tensor> = std::iter::once(mask.edge_logits.clone())
        .chain(mask.feature_logits.clone())
        .collect();
    let mut opt = Adam::new(cfg.learning_rate, &params);
    let mut best: Option<(f64, Vec<Tensor>)> = None;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        let tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|t| tape.param(t.clone())).collect();
        let parts = objective_on_tape(&tape, det, &gi, predicted, vars[0], vars.get(1).copied(), cfg)?;
        let value = tape.item(parts.objective);
        if !value.is_finite() {
            return Err(TensorError::NonFinite("explainer objective").into());
        }
        trace.push(value);
        if best.as_ref().map_or(true, |(b, _)| value < *b) {
            best = Some((value, params.clone()));
        }
        if step == cfg.steps {
            break;
        }
        let mut grads = tape.backward(parts.objective)?;
        let gs: Vec<Tensor> = vars.iter().map(|&v| grads.take(v)).collect();
        opt.step(&mut params, &gs)?;
    }
    let (_, best) = best.expect("at least one evaluation");
    mask.edge_logits = best[0].clone();
    if mask.feature_logits.is_some() {
        mask.feature_logits = Some(best[1].clone());
    }
    Ok((mask, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementScore {
    pub line: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub predicted: Label,
    /// Indices into the graph's edge list.
    pub kept_edges: Vec<usize>,
    pub kept_nodes: Vec<usize>,
    /// Ranked crucial statements `S_e`.
    pub statements: Vec<StatementScore>,
    pub factual_check: bool,
    pub counterfactual_check: bool,
    /// No mask value survived the threshold.
    pub degenerate: bool,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
}

impl ExplanationReport {
    pub fn lines(&self) -> BTreeSet<u32> {
        self.statements.iter().map(|s| s.line).collect()
    }
}

/// Class probabilities with a hard edge selection and an optional hard
/// feature-row selection (`true` keeps the entry).
pub fn hard_probabilities(det: &Detector, g: &CodeGraph, edges: &[bool], features: Option<&[bool]>) -> Result<[f64; 2]> {
    let gi = det.encoder.prepare(g);
    let tape = Tape::new();
    let frozen = Frozen::new(&tape, det, &gi);
    let m = tape.constant(Tensor::new(edges.len(), 1, edges.iter().map(|&b| b as u8 as f64).collect())?);
    let f = features
        .map(|f| Tensor::new(g.num_nodes(), g.feature_dim, f.iter().map(|&b| b as u8 as f64).collect()))
        .transpose()?
        .map(|t| tape.constant(t));
    let p = frozen.probs(&tape, m, f)?;
    let v = tape.value(p);
    Ok([v.get(0, 0), v.get(0, 1)])
}

fn argmax(p: [f64; 2]) -> Label {
    Label::from_class((p[1] > p[0]) as usize)
}

/// Threshold the mask, run both checks and rank the surviving statements.
pub fn binarize_and_extract(
    det: &Detector,
    g: &CodeGraph,
    mask: &ExplanationMask,
    cfg: &ExplainerConfig,
    predicted: Label,
) -> Result<ExplanationReport> {
    let theta = cfg.threshold;
    let em = mask.edge_mask();
    let keep_edge: Vec<bool> = em.iter().map(|&m| m >= theta).collect();
    let feat_keep: Option<Vec<bool>> = mask.feature_logits.as_ref().map(|f| f.data().iter().map(|&x| sigmoid(x) >= theta).collect());
    let row_max = mask.feature_row_max();

    // node importance: largest incident edge mask, or feature-row mask
    let v = g.num_nodes();
    let mut importance = vec![0.0f64; v];
    let mut kept = vec![false; v];
    for (k, e) in g.edges.iter().enumerate() {
        for n in [e.src, e.dst] {
            importance[n] = importance[n].max(em[k]);
            kept[n] |= keep_edge[k];
        }
    }
    if let Some(r) = &row_max {
        for n in 0..v {
            importance[n] = importance[n].max(r[n]);
            kept[n] |= r[n] >= theta;
        }
    }
    let kept_nodes: Vec<usize> = (0..v).filter(|&n| kept[n]).collect();
    let degenerate = kept_nodes.is_empty();

    let rank = |nodes: &mut dyn Iterator<Item = usize>| -> Vec<StatementScore> {
        let mut by_line: BTreeMap<u32, f64> = BTreeMap::new();
        for n in nodes {
            for line in g.nodes[n].span.lines() {
                let s = by_line.entry(line).or_insert(f64::NEG_INFINITY);
                *s = s.max(importance[n]);
            }
        }
        let mut out: Vec<StatementScore> = by_line.into_iter().map(|(line, score)| StatementScore { line, score }).collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.line.cmp(&b.line)));
        out
    };
    let mut statements = rank(&mut kept_nodes.iter().copied());
    if let Some(k) = cfg.top_k {
        if statements.is_empty() {
            statements = rank(&mut (0..v));
        }
        statements.truncate(k);
    }

    let sub = hard_probabilities(det, g, &keep_edge, feat_keep.as_deref())?;
    let comp_edges: Vec<bool> = keep_edge.iter().map(|&b| !b).collect();
    let comp_feat: Option<Vec<bool>> = feat_keep.as_ref().map(|f| f.iter().map(|&b| !b).collect());
    let comp = hard_probabilities(det, g, &comp_edges, comp_feat.as_deref())?;
    Ok(ExplanationReport {
        predicted,
        kept_edges: (0..keep_edge.len()).filter(|&k| keep_edge[k]).collect(),
        kept_nodes,
        statements,
        factual_check: argmax(sub) == predicted,
        counterfactual_check: argmax(comp) != predicted,
        degenerate,
        objective: objective(det, g, mask, cfg, predicted)?,
        objective_trace: Vec::new(),
    })
}

/// Full pipeline: predict, optimize, binarize.
pub fn explain(det: &Detector, g: &CodeGraph, cfg: &ExplainerConfig) -> Result<ExplanationReport> {
    let predicted = predicted_label(det, g)?;
    let (mask, trace) = optimize(det, g, cfg, predicted)?;
    let mut report = binarize_and_extract(det, g, &mask, cfg, predicted)?;
    report.objective_trace = trace;
    Ok(report)
}

/// Whether the edge subset passes both checks with features untouched:
/// the kept sub-graph keeps the prediction and its complement changes it,
/// each by a probability margin of at least `margin`.
pub fn satisfies_both(det: &Detector, g: &CodeGraph, keep: &[bool], predicted: Label, margin: f64) -> Result<bool> {
    let (y, ys) = (predicted.as_class(), 1 - predicted.as_class());
    let sub = hard_probabilities(det, g, keep, None)?;
    if argmax(sub) != predicted || sub[y] - sub[ys] < margin {
        return Ok(false);
    }
    let comp_keep: Vec<bool> = keep.iter().map(|&b| !b).collect();
    let comp = hard_probabilities(det, g, &comp_keep, None)?;
    Ok(argmax(comp) != predicted && comp[ys] - comp[y] >= margin)
}

/// Exhaustive minimum-cardinality edge subset satisfying both checks, with
/// lexicographic ties on sorted edge indices; `None` when infeasible.
pub fn brute_force_explain(det: &Detector, g: &CodeGraph, max_edges: usize, margin: f64) -> Result<Option<Vec<usize>>> {
    let e = g.edges.len();
    if e > max_edges || max_edges > 12 {
        return Err(ExplainError::Size {
            edges: e,
            max: max_edges.min(12),
        });
    }
    let predicted = predicted_label(det, g)?;
    for size in 0..=e {
        let mut found = None;
        for_each_subset(e, size, &mut |subset| {
            if found.is_some() {
                return Ok(());
            }
            let mut keep = vec![false; e];
            for &k in subset {
                keep[k] = true;
            }
            if satisfies_both(det, g, &keep, predicted, margin)? {
                found = Some(subset.to_vec());
            }
            Ok(())
        })?;
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Visits the `size`-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> Result<()>) -> Result<()> {
        if cur.len() == size {
            return f(cur);
        }
        for k in start..n {
            if n - k < size - cur.len() {
                break;
            }
            cur.push(k);
            rec(k + 1, n, size, cur, f)?;
            cur.pop();
        }
        Ok(())
    }
    rec(0, n, size, &mut Vec::new(), f)
}

#[cfg(test)]
mod tests;
