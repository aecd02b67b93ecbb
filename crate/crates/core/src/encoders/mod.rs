//! GNN encoders (GCN, GGNN), projection head and classifier. Every forward
//! accepts optional soft edge and feature masks recorded on the tape.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codegraph::{CodeGraph, EdgeType};
use crate::tensorcore::{Bound, ParamStore, Result, Tape, Tensor, TensorError, Var};

pub const PROJECTION_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Ggnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    Mean,
    MeanMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub arch: Arch,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// GCN layers or GGNN propagation steps.
    pub layers: usize,
    pub edge_types: Vec<EdgeType>,
    pub readout: Readout,
}

impl EncoderConfig {
    pub fn new(arch: Arch, input_dim: usize) -> Self {
        Self {
            arch,
            input_dim,
            hidden_dim: 64,
            layers: match arch {
                Arch::Gcn => 3,
                Arch::Ggnn => 4,
            },
            edge_types: EdgeType::ALL.to_vec(),
            readout: Readout::MeanMax,
        }
    }

    /// Width of the graph embedding `h`.
    pub fn embedding_dim(&self) -> usize {
        match self.readout {
            Readout::Mean => self.hidden_dim,
            Readout::MeanMax => 2 * self.hidden_dim,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.hidden_dim < 8 {
            return Err(format!("hidden_dim must be >= 8, got {}", self.hidden_dim));
        }
        if self.arch == Arch::Gcn && self.layers < 1 {
            return Err("gcn needs at least one layer".into());
        }
        if self.input_dim < 8 {
            return Err(format!("input_dim must be >= 8, got {}", self.input_dim));
        }
        Ok(())
    }
}

/// A graph laid out for the encoders. Mask entry `k` always refers to
/// `graph.edges[k]`; edges of unused types are ignored by the forward pass.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub features: Tensor,
    /// `(mask index, src, dst)` of every used edge.
    used: Rc<[(usize, usize, usize)]>,
    /// The same entries split by edge type, in `EdgeType::ALL` order.
    by_type: Vec<Rc<[(usize, usize, usize)]>>,
    /// Normalized adjacency without masks (GCN fast path).
    gcn_adjacency: Tensor,
}

impl GraphInput {
    pub fn new(g: &CodeGraph, cfg: &EncoderConfig) -> Self {
        let v = g.num_nodes();
        let features = Tensor::new(v, g.feature_dim, g.features.clone()).expect("finite features");
        let mut by_type = vec![Vec::new(); EdgeType::ALL.len()];
        let mut used = Vec::new();
        for (k, e) in g.edges.iter().enumerate() {
            if cfg.edge_types.contains(&e.etype) {
                used.push((k, e.src, e.dst));
                by_type[e.etype.index()].push((k, e.src, e.dst));
            }
        }
        let mut s = vec![0.0; v * v];
        for &(_, a, b) in &used {
            s[a * v + b] += 1.0;
            s[b * v + a] += 1.0;
        }
        for i in 0..v {
            s[i * v + i] += 1.0;
            let row = &mut s[i * v..(i + 1) * v];
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
        }
        Self {
            num_nodes: v,
            num_edges: g.edges.len(),
            features,
            used: used.into(),
            by_type: by_type.into_iter().map(Into::into).collect(),
            gcn_adjacency: Tensor::new(v, v, s).expect("finite adjacency"),
        }
    }
}

/// Optional soft masks, as tape values: `edges` is `E×1` aligned with the
/// graph's edge list, `features` is `V×d`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Masks {
    pub edges: Option<Var>,
    pub features: Option<Var>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub params: ParamStore,
}

fn check_mask(tape: &Tape, v: Var, want: (usize, usize), what: &'static str) -> Result<()> {
    let got = tape.shape(v);
    if got != want && !(want.1 == 1 && got == (1, want.0)) {
        return Err(TensorError::Shape {
            op: what,
            lhs: got,
            rhs: want,
        });
    }
    Ok(())
}

impl Encoder {
    pub fn init(config: EncoderConfig, rng: &mut impl Rng) -> Self {
        let (d, h) = (config.input_dim, config.hidden_dim);
        let mut p = ParamStore::new();
        p.insert_glorot("enc.w_in", d, h, rng);
        match config.arch {
            Arch::Gcn => {
                for l in 0..config.layers {
                    p.insert_glorot(format!("enc.gcn{l}"), h, h, rng);
                }
            }
            Arch::Ggnn => {
                for t in EdgeType::ALL {
                    p.insert_glorot(format!("enc.msg_{}", t.to_string().to_lowercase()), h, h, rng);
                }
                for gate in ["z", "r", "h"] {
                    p.insert_glorot(format!("enc.gru_w{gate}"), h, h, rng);
                    p.insert_glorot(format!("enc.gru_u{gate}"), h, h, rng);
                    p.insert(format!("enc.gru_b{gate}"), Tensor::zeros(1, h));
                }
            }
        }
        Self { config, params: p }
    }

    pub fn prepare(&self, g: &CodeGraph) -> GraphInput {
        GraphInput::new(g, &self.config)
    }

    /// Node states after propagation, `V × hidden`.
    pub fn node_states(&self, tape: &Tape, p: &Bound, g: &GraphInput, masks: Masks) -> Result<Var> {
        let v = g.num_nodes;
        let x = tape.constant(g.features.clone());
        let x = match masks.features {
            Some(f) => {
                check_mask(tape, f, g.features.shape(), "feature_mask")?;
                tape.mul(x, f)?
            }
            None => x,
        };
        let mut h = tape.matmul(x, p.get("enc.w_in"))?;
        if let Some(m) = masks.edges {
            check_mask(tape, m, (g.num_edges, 1), "edge_mask")?;
        }
        match self.config.arch {
            Arch::Gcn => {
                let a_hat = match masks.edges {
                    None => tape.constant(g.gcn_adjacency.clone()),
                    Some(m) => {
                        let s = tape.scatter_edges(m, g.used.clone(), v)?;
                        let st = tape.transpose(s)?;
                        let sym = tape.add(s, st)?;
                        let eye = tape.constant(Tensor::identity(v));
                        let with_loops = tape.add(sym, eye)?;
                        tape.row_sum_normalize(with_loops)?
                    }
                };
                for l in 0..self.config.layers {
                    let agg = tape.matmul(a_hat, h)?;
                    let lin = tape.matmul(agg, p.get(&format!("enc.gcn{l}")))?;
                    h = tape.relu(lin)?;
                }
            }
            Arch::Ggnn => {
                let ones = tape.constant(Tensor::filled(g.num_edges.max(1), 1, 1.0));
                let m = masks.edges.unwrap_or(ones);
                let mut adj = Vec::new();
                for t in EdgeType::ALL {
                    let entries = &g.by_type[t.index()];
                    if entries.is_empty() {
                        continue;
                    }
                    let s = tape.scatter_edges(m, entries.clone(), v)?;
                    let st = tape.transpose(s)?;
                    adj.push((tape.add(s, st)?, format!("enc.msg_{}", t.to_string().to_lowercase())));
                }
                for _ in 0..self.config.layers {
                    let mut a: Option<Var> = None;
                    for (s, w) in &adj {
                        let hw = tape.matmul(h, p.get(w))?;
                        let msg = tape.matmul(*s, hw)?;
                        a = Some(match a {
                            Some(acc) => tape.add(acc, msg)?,
                            None => msg,
                        });
                    }
                    let a = match a {
                        Some(a) => a,
                        None => tape.constant(Tensor::zeros(v, self.config.hidden_dim)),
                    };
                    let gate = |name: &str, inner: Var| -> Result<Var> {
                        let x1 = tape.matmul(a, p.get(&format!("enc.gru_w{name}")))?;
                        let x2 = tape.matmul(inner, p.get(&format!("enc.gru_u{name}")))?;
                        let s = tape.add(x1, x2)?;
                        tape.add(s, p.get(&format!("enc.gru_b{name}")))
                    };
                    let z = tape.sigmoid(gate("z", h)?)?;
                    let r = tape.sigmoid(gate("r", h)?)?;
                    let rh = tape.mul(r, h)?;
                    let cand = tape.tanh(gate("h", rh)?)?;
                    let keep = tape.one_minus(z)?;
                    let old = tape.mul(keep, h)?;
                    let new = tape.mul(z, cand)?;
                    h = tape.add(old, new)?;
                }
            }
        }
        Ok(h)
    }

    /// Graph embedding `h`, `1 × embedding_dim`.
    pub fn encode(&self, tape: &Tape, p: &Bound, g: &GraphInput, masks: Masks) -> Result<Var> {
        let h = self.node_states(tape, p, g, masks)?;
        let mean = tape.mean_pool_rows(h)?;
        match self.config.readout {
            Readout::Mean => Ok(mean),
            Readout::MeanMax => {
                let max = tape.max_pool_rows(h)?;
                tape.concat_cols(mean, max)
            }
        }
    }

    /// Unmasked embedding computed on a throwaway tape.
    pub fn embed(&self, g: &CodeGraph) -> Result<Tensor> {
        let tape = Tape::new();
        let p = self.params.bind(&tape, false);
        let h = self.encode(&tape, &p, &self.prepare(g), Masks::default())?;
        let out = tape.value(h).clone();
        Ok(out)
    }
}

/// `d_h → d_h → 128` MLP with unit-norm output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub params: ParamStore,
}

impl ProjectionHead {
    pub fn init(embedding_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = ParamStore::new();
        p.insert_glorot("proj.w1", embedding_dim, embedding_dim, rng);
        p.insert("proj.b1", Tensor::zeros(1, embedding_dim));
        p.insert_glorot("proj.w2", embedding_dim, PROJECTION_DIM, rng);
        p.insert("proj.b2", Tensor::zeros(1, PROJECTION_DIM));
        Self { params: p }
    }

    /// Rows of `h` (`n × d_h`) to unit-norm rows `n × 128`.
    pub fn project(&self, tape: &Tape, p: &Bound, h: Var) -> Result<Var> {
        let a = tape.matmul(h, p.get("proj.w1"))?;
        let a = tape.add(a, p.get("proj.b1"))?;
        let a = tape.relu(a)?;
        let z = tape.matmul(a, p.get("proj.w2"))?;
        let z = tape.add(z, p.get("proj.b2"))?;
        tape.row_l2_normalize(z)
    }
}

/// `d_h → d_h/2 → 2` MLP producing class logits (benign, vulnerable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub params: ParamStore,
}

impl Classifier {
    pub fn init(embedding_dim: usize, rng: &mut impl Rng) -> Self {
        let mid = (embedding_dim / 2).max(1);
        let mut p = ParamStore::new();
        p.insert_glorot("cls.w1", embedding_dim, mid, rng);
        p.insert("cls.b1", Tensor::zeros(1, mid));
        p.insert_glorot("cls.w2", mid, 2, rng);
        p.insert("cls.b2", Tensor::zeros(1, 2));
        Self { params: p }
    }

    pub fn logits(&self, tape: &Tape, p: &Bound, h: Var) -> Result<Var> {
        let a = tape.matmul(h, p.get("cls.w1"))?;
        let a = tape.add(a, p.get("cls.b1"))?;
        let a = tape.relu(a)?;
        let o = tape.matmul(a, p.get("cls.w2"))?;
        tape.add(o, p.get("cls.b2"))
    }

    /// Class probabilities, `n × 2`.
    pub fn classify(&self, tape: &Tape, p: &Bound, h: Var) -> Result<Var> {
        let l = self.logits(tape, p, h)?;
        tape.softmax(l)
    }
}

/// Softmax of a plain logit pair.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Frozen encoder plus classifier, the model under explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub encoder: Encoder,
    pub classifier: Classifier,
}

impl Detector {
    /// Probability row `1×2` of the masked graph, on `tape` with frozen weights.
    pub fn probabilities(&self, tape: &Tape, enc: &Bound, cls: &Bound, g: &GraphInput, masks: Masks) -> Result<Var> {
        let h = self.encoder.encode(tape, enc, g, masks)?;
        self.classifier.classify(tape, cls, h)
    }

    /// Unmasked class probabilities.
    pub fn predict(&self, g: &CodeGraph) -> Result<[f64; 2]> {
        let tape = Tape::new();
        let enc = self.encoder.params.bind(&tape, false);
        let cls = self.classifier.params.bind(&tape, false);
        let p = self.probabilities(&tape, &enc, &cls, &self.encoder.prepare(g), Masks::default())?;
        let v = tape.value(p);
        Ok([v.get(0, 0), v.get(0, 1)])
    }
}
