//! Python bindings: front end, augmentation, graphs, corpus, losses,
//! metrics and a loaded detector with its explainer.

use std::collections::BTreeSet;

use coca_core::codegraph::{build_graph, Label};
use coca_core::encoders::Detector;
use coca_core::evalkit::{self, CorpusSpec};
use coca_core::explainer::{self, ExplainMode, ExplainerConfig};
use coca_core::minic::{self, DEFAULT_STEP_LIMIT};
use coca_core::tensorcore::{Tape, Tensor};
use coca_core::training::{self, BatchPlan};
use coca_core::transforms::{self, AugmentConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(source: &str) -> PyResult<minic::Function> {
    minic::parse(source).map_err(err)
}

/// Parse and pretty-print a MiniC function.
#[pyfunction]
fn normalize(source: &str) -> PyResult<String> {
    Ok(minic::pretty_print(&parse(source)?))
}

/// Run a function on `inputs`; returns (printed values, status string).
#[pyfunction]
fn interpret(source: &str, inputs: Vec<i64>) -> PyResult<(Vec<i64>, String)> {
    let t = minic::interpret(&parse(source)?, &inputs, DEFAULT_STEP_LIMIT);
    Ok((t.outputs, format!("{:?}", t.status)))
}

/// A semantics-preserving variant and the applied operators.
#[pyfunction]
#[pyo3(signature = (source, seed, probability = 0.5))]
fn augment(source: &str, seed: u64, probability: f64) -> PyResult<(String, Vec<String>)> {
    let cfg = AugmentConfig {
        per_op_probability: probability,
        ..AugmentConfig::default().with_seed(seed)
    };
    let a = transforms::augment(&parse(source)?, &cfg);
    let applied = a.applied.iter().map(|t| format!("{}@{}", t.op, t.path)).collect();
    Ok((minic::pretty_print(&a.ast), applied))
}

/// The code graph of a function as a JSON string.
#[pyfunction]
#[pyo3(signature = (source, feature_dim = 64))]
fn graph_json(source: &str, feature_dim: usize) -> PyResult<String> {
    serde_json::to_string(&build_graph(&parse(source)?, None, feature_dim)).map_err(err)
}

/// The synthetic corpus as a list of dicts (id, code, label, vuln_lines).
#[pyfunction]
#[pyo3(signature = (n_samples, seed, vulnerable_ratio = 0.3))]
fn generate_corpus<'py>(py: Python<'py>, n_samples: usize, seed: u64, vulnerable_ratio: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = CorpusSpec {
        n_samples,
        seed,
        vulnerable_ratio,
        ..Default::default()
    };
    evalkit::generate_corpus(&spec)
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("id", r.id)?;
            d.set_item("code", r.source)?;
            d.set_item("label", r.label.as_class())?;
            d.set_item("vuln_lines", r.vuln_lines.into_iter().collect::<Vec<u32>>())?;
            Ok(d)
        })
        .collect()
}

/// (1−lam)·NCE + lam·SupCon over rows `2k` (original) and `2k+1` (view) of `z`;
/// `labels` has one entry per pair, `None` for unlabeled pairs.
#[pyfunction]
fn contrastive_loss(z: Vec<Vec<f64>>, labels: Vec<Option<usize>>, tau: f64, lam: f64) -> PyResult<f64> {
    let rows = z.len();
    let cols = z.first().map_or(0, Vec::len);
    if rows != 2 * labels.len() || z.iter().any(|r| r.len() != cols) {
        return Err(err("z must have two equal-width rows per label"));
    }
    let t = Tensor::new(rows, cols, z.concat()).map_err(err)?;
    let tape = Tape::new();
    let v = tape.constant(t);
    let l = training::total_loss(&tape, v, &BatchPlan { labels }, tau, lam).map_err(err)?;
    Ok(tape.item(l))
}

/// Statement precision, recall and IoU of one explanation.
#[pyfunction]
fn vtp_score(explained: BTreeSet<u32>, truth: BTreeSet<u32>) -> (f64, f64, f64) {
    let s = evalkit::vtp_score(&explained, &truth);
    (s.precision, s.recall, s.iou)
}

/// Accuracy, precision, recall and F1 for 0/1 labels.
#[pyfunction]
fn detection_metrics(predicted: Vec<usize>, actual: Vec<usize>) -> PyResult<(f64, f64, f64, f64)> {
    let to = |v: Vec<usize>| v.into_iter().map(Label::from_class).collect::<Vec<_>>();
    let m = evalkit::detection_metrics(&to(predicted), &to(actual)).map_err(err)?;
    Ok((m.accuracy, m.precision, m.recall, m.f1))
}

/// A trained encoder plus classifier.
#[pyclass(name = "Detector")]
struct PyDetector {
    inner: Detector,
}

#[pymethods]
impl PyDetector {
    /// Load from a `Detector` JSON document or a `train-classifier` artifact.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        if let Ok(inner) = serde_json::from_str::<Detector>(text) {
            return Ok(Self { inner });
        }
        let record = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .nth(1)
            .ok_or_else(|| err("expected a detector or a train-classifier artifact"))?;
        let v: serde_json::Value = serde_json::from_str(record).map_err(err)?;
        let inner = serde_json::from_value(v["detector"].clone()).map_err(err)?;
        Ok(Self { inner })
    }

    /// (label, probability of the vulnerable class).
    fn predict(&self, source: &str) -> PyResult<(usize, f64)> {
        let p = training::detect(&self.inner, source).map_err(err)?;
        Ok((p.label.as_class(), p.probability))
    }

    /// Ranked (line, score) statements plus the factual and counterfactual
    /// checks.
    #[pyo3(signature = (source, alpha = 0.5, steps = 500, sparsity = 1.0, top_k = None, mode = "dual"))]
    fn explain(
        &self,
        source: &str,
        alpha: f64,
        steps: usize,
        sparsity: f64,
        top_k: Option<usize>,
        mode: &str,
    ) -> PyResult<(Vec<(u32, f64)>, bool, bool)> {
        let cfg = ExplainerConfig {
            alpha,
            steps,
            sparsity,
            top_k,
            mode: mode.parse::<ExplainMode>().map_err(err)?,
            ..Default::default()
        };
        cfg.validate().map_err(err)?;
        let g = build_graph(&parse(source)?, None, self.inner.encoder.config.input_dim);
        let r = explainer::explain(&self.inner, &g, &cfg).map_err(err)?;
        let ranked = r.statements.iter().map(|s| (s.line, s.score)).collect();
        Ok((ranked, r.factual_check, r.counterfactual_check))
    }
}

#[pymodule]
fn coca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(interpret, m)?)?;
    m.add_function(wrap_pyfunction!(augment, m)?)?;
    m.add_function(wrap_pyfunction!(graph_json, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(contrastive_loss, m)?)?;
    m.add_function(wrap_pyfunction!(vtp_score, m)?)?;
    m.add_function(wrap_pyfunction!(detection_metrics, m)?)?;
    m.add_class::<PyDetector>()?;
    Ok(())
}
