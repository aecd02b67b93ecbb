//! Contrastive pretraining of the encoder, the downstream classifier, and
//! inference.

mod loss;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegraph::{build_graph, CodeGraph, Label, DEFAULT_FEATURE_DIM};
use crate::derive_seed;
use crate::encoders::{softmax2, Arch, Classifier, Detector, Encoder, EncoderConfig, GraphInput, Masks, ProjectionHead};
use crate::evalkit::detection_metrics;
use crate::minic::{parse, FrontendError, Function};
use crate::tensorcore::{Adam, Bound, Tape, Tensor, TensorError, Var};
use crate::transforms::{augment, AugmentConfig};

pub use loss::{cross_entropy, cross_view_nce_loss, nce_loss, supcon_loss, total_loss, BatchPlan};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no labeled member of the batch has a positive")]
    EmptyPositives,
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// Self-supervised plus supervised contrastive (weighted by λ).
    Coca,
    /// Encoder and classifier trained jointly with cross-entropy, no augmentation.
    Ce,
    /// Self-supervised contrastive term only.
    Nce,
    /// Two-view InfoNCE: negatives drawn from the other view only.
    Infonce,
}

impl std::str::FromStr for LossMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coca" => Ok(LossMode::Coca),
            "ce" => Ok(LossMode::Ce),
            "nce" => Ok(LossMode::Nce),
            "infonce" => Ok(LossMode::Infonce),
            _ => Err(format!("unknown loss mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub hidden_dim: usize,
    /// Propagation depth; `None` picks the per-architecture default.
    pub layers: Option<usize>,
    pub feature_dim: usize,
    /// Members per contrastive batch (originals plus their views); even.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub labeled_fraction: f64,
    pub tau: f64,
    pub lambda: f64,
    pub loss: LossMode,
    pub augment_probability: f64,
    pub classifier_learning_rate: f64,
    pub classifier_batch_size: usize,
    pub classifier_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Gcn,
            hidden_dim: 64,
            layers: None,
            feature_dim: DEFAULT_FEATURE_DIM,
            batch_size: 256,
            learning_rate: 1e-5,
            max_epochs: 100,
            patience: 10,
            labeled_fraction: 0.5,
            tau: 0.07,
            lambda: 0.5,
            loss: LossMode::Coca,
            augment_probability: 0.5,
            classifier_learning_rate: 1e-3,
            classifier_batch_size: 64,
            classifier_epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn encoder_config(&self) -> EncoderConfig {
        let mut c = EncoderConfig::new(self.arch, self.feature_dim);
        c.hidden_dim = self.hidden_dim;
        if let Some(l) = self.layers {
            c.layers = l;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Data(m.to_string()));
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return bad("batch_size must be even and at least 2");
        }
        if !(self.learning_rate > 0.0 && self.classifier_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.labeled_fraction) {
            return bad("lambda and labeled_fraction must lie in [0, 1]");
        }
        if self.classifier_batch_size == 0 {
            return bad("classifier_batch_size must be positive");
        }
        self.encoder_config().validate().map_err(TrainError::Data)
    }

    pub fn augment_config(&self, seed: u64) -> AugmentConfig {
        AugmentConfig {
            per_op_probability: self.augment_probability,
            ..AugmentConfig::default().with_seed(seed)
        }
    }
}

/// A labeled function ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub ast: Function,
    pub label: Label,
}

impl Sample {
    pub fn from_source(id: impl Into<String>, source: &str, label: Label) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            ast: parse(source)?,
            label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pretrained {
    pub encoder: Encoder,
    pub head: Option<ProjectionHead>,
    /// Only for the cross-entropy mode, which trains a classifier jointly.
    pub classifier: Option<Classifier>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub warnings: Vec<String>,
}

/// An augmented view of `f`, as a graph.
pub fn augmented_graph(f: &Function, cfg: &AugmentConfig, label: Option<Label>, d: usize) -> CodeGraph {
    build_graph(&augment(f, cfg).ast, label, d)
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, &format!("epoch-{epoch}"))
}

/// Effective number of pairs per batch, shrunk to the corpus when needed.
fn pairs_per_batch(cfg: &TrainConfig, n_train: usize, warnings: &mut Vec<String>) -> Result<usize> {
    if n_train == 0 {
        return Err(TrainError::Data("empty training set".into()));
    }
    let want = cfg.batch_size / 2;
    if n_train < want {
        let msg = format!("batch of {want} pairs exceeds the {n_train} training samples; shrinking");
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(n_train);
    }
    Ok(want)
}

fn labeled_plan(chunk: &[usize], samples: &[Sample], fraction: f64, rng: &mut impl Rng) -> BatchPlan {
    let k = ((chunk.len() as f64) * fraction).ceil() as usize;
    let mut order: Vec<usize> = (0..chunk.len()).collect();
    order.shuffle(rng);
    let mut labels = vec![None; chunk.len()];
    for &p in order.iter().take(k) {
        labels[p] = Some(samples[chunk[p]].label.as_class());
    }
    BatchPlan { labels }
}

/// Batch loss of the encoder and projection head on interleaved
/// original/augmented inputs.
#[allow(clippy::too_many_arguments)]
pub fn contrastive_batch_loss(
    tape: &Tape,
    encoder: &Encoder,
    enc: &Bound,
    head: &ProjectionHead,
    proj: &Bound,
    inputs: &[&GraphInput],
    plan: &BatchPlan,
    cfg: &TrainConfig,
) -> Result<Var> {
    let mut rows = Vec::with_capacity(inputs.len());
    for gi in inputs {
        rows.push(encoder.encode(tape, enc, gi, Masks::default())?);
    }
    let h = tape.stack_rows(&rows)?;
    let z = head.project(tape, proj, h)?;
    match cfg.loss {
        LossMode::Coca => total_loss(tape, z, plan, cfg.tau, cfg.lambda),
        LossMode::Nce => nce_loss(tape, z, plan, cfg.tau),
        LossMode::Infonce => cross_view_nce_loss(tape, z, plan, cfg.tau),
        LossMode::Ce => Err(TrainError::Data("cross-entropy mode has no contrastive loss".into())),
    }
}

fn ce_batch_loss(
    tape: &Tape,
    encoder: &Encoder,
    enc: &Bound,
    cls: &Classifier,
    cb: &Bound,
    inputs: &[&GraphInput],
    classes: &[usize],
) -> Result<Var> {
    let mut rows = Vec::with_capacity(inputs.len());
    for gi in inputs {
        rows.push(encoder.encode(tape, enc, gi, Masks::default())?);
    }
    let h = tape.stack_rows(&rows)?;
    let logits = cls.logits(tape, cb, h)?;
    cross_entropy(tape, logits, classes)
}

/// Pretrains an encoder (and, in cross-entropy mode, a classifier) with
/// early stopping on the validation loss. Returns the best parameters seen.
pub fn pretrain_encoder(train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<Pretrained> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let pairs = pairs_per_batch(cfg, train.len(), &mut warnings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ecfg = cfg.encoder_config();
    let mut encoder = Encoder::init(ecfg.clone(), &mut rng);
    let mut head = ProjectionHead::init(ecfg.embedding_dim(), &mut rng);
    let mut classifier = Classifier::init(ecfg.embedding_dim(), &mut rng);
    let ce = cfg.loss == LossMode::Ce;

    let d = cfg.feature_dim;
    let prep = |s: &Sample| GraphInput::new(&build_graph(&s.ast, Some(s.label), d), &ecfg);
    let train_in: Vec<GraphInput> = train.iter().map(prep).collect();
    let val_in: Vec<GraphInput> = val.iter().map(prep).collect();
    // validation views and labeled subsets are fixed across epochs
    let val_seed = derive_seed(cfg.seed, "validation");
    let val_views: Vec<GraphInput> = if ce {
        Vec::new()
    } else {
        val.iter()
            .map(|s| {
                let g = augmented_graph(&s.ast, &cfg.augment_config(derive_seed(val_seed, &s.id)), Some(s.label), d);
                GraphInput::new(&g, &ecfg)
            })
            .collect()
    };

    let mut second: Vec<Tensor> = if ce {
        classifier.params.values().to_vec()
    } else {
        head.params.values().to_vec()
    };
    let mut opt_enc = Adam::new(cfg.learning_rate, encoder.params.values());
    let mut opt_second = Adam::new(cfg.learning_rate, &second);

    let val_loss = |encoder: &Encoder, head: &ProjectionHead, classifier: &Classifier| -> Result<f64> {
        if val.is_empty() {
            return Ok(f64::NAN);
        }
        let mut vrng = ChaCha8Rng::seed_from_u64(val_seed);
        let idx: Vec<usize> = (0..val.len()).collect();
        let mut total = 0.0;
        let mut count = 0;
        for chunk in idx.chunks(pairs) {
            let tape = Tape::new();
            let enc = encoder.params.bind(&tape, false);
            let l = if ce {
                let cb = classifier.params.bind(&tape, false);
                let inputs: Vec<&GraphInput> = chunk.iter().map(|&i| &val_in[i]).collect();
                let classes: Vec<usize> = chunk.iter().map(|&i| val[i].label.as_class()).collect();
                ce_batch_loss(&tape, encoder, &enc, classifier, &cb, &inputs, &classes)?
            } else {
                if chunk.len() < 2 && idx.len() >= 2 {
                    continue;
                }
                let proj = head.params.bind(&tape, false);
                let plan = labeled_plan(chunk, val, cfg.labeled_fraction, &mut vrng);
                let inputs: Vec<&GraphInput> = chunk.iter().flat_map(|&i| [&val_in[i], &val_views[i]]).collect();
                match contrastive_batch_loss(&tape, encoder, &enc, head, &proj, &inputs, &plan, cfg) {
                    Ok(v) => v,
                    Err(TrainError::EmptyPositives) => continue,
                    Err(e) => return Err(e),
                }
            };
            total += tape.item(l) * chunk.len() as f64;
            count += chunk.len();
        }
        Ok(if count == 0 { f64::NAN } else { total / count as f64 })
    };

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, encoder.clone(), head.clone(), classifier.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let eseed = epoch_seed(cfg.seed, epoch);
        let mut epoch_loss = 0.0;
        let mut seen = 0;
        for chunk in order.chunks(pairs) {
            if !ce && chunk.len() < 2 && train.len() >= 2 {
                continue;
            }
            let tape = Tape::new();
            let enc = encoder.params.bind(&tape, true);
            let (l, second_vars) = if ce {
                let cb = classifier.params.bind(&tape, true);
                let inputs: Vec<&GraphInput> = chunk.iter().map(|&i| &train_in[i]).collect();
                let classes: Vec<usize> = chunk.iter().map(|&i| train[i].label.as_class()).collect();
                (ce_batch_loss(&tape, &encoder, &enc, &classifier, &cb, &inputs, &classes)?, cb)
            } else {
                let proj = head.params.bind(&tape, true);
                let views: Vec<GraphInput> = chunk
                    .iter()
                    .map(|&i| {
                        let s = &train[i];
                        let acfg = cfg.augment_config(derive_seed(eseed, &s.id));
                        GraphInput::new(&augmented_graph(&s.ast, &acfg, Some(s.label), d), &ecfg)
                    })
                    .collect();
                let plan = labeled_plan(chunk, train, cfg.labeled_fraction, &mut rng);
                let inputs: Vec<&GraphInput> = chunk
                    .iter()
                    .zip(&views)
                    .flat_map(|(&i, v)| [&train_in[i], v])
                    .collect();
                match contrastive_batch_loss(&tape, &encoder, &enc, &head, &proj, &inputs, &plan, cfg) {
                    Ok(l) => (l, proj),
                    Err(TrainError::EmptyPositives) => continue,
                    Err(e) => return Err(e),
                }
            };
            epoch_loss += tape.item(l) * chunk.len() as f64;
            seen += chunk.len();
            let mut grads = tape.backward(l)?;
            let ge: Vec<Tensor> = enc.vars().iter().map(|&v| grads.take(v)).collect();
            let gs: Vec<Tensor> = second_vars.vars().iter().map(|&v| grads.take(v)).collect();
            opt_enc.step(encoder.params.values_mut(), &ge)?;
            opt_second.step(&mut second, &gs)?;
            let target = if ce { &mut classifier.params } else { &mut head.params };
            target.values_mut().clone_from_slice(&second);
        }
        let train_loss = if seen == 0 { f64::NAN } else { epoch_loss / seen as f64 };
        let vl = val_loss(&encoder, &head, &classifier)?;
        // without validation data the training loss drives early stopping
        let monitor = if vl.is_nan() { train_loss } else { vl };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss: vl,
        });
        log::info!("epoch {epoch}: train {train_loss:.5} val {vl:.5}");
        if monitor < best.0 {
            best = (monitor, epoch, encoder.clone(), head.clone(), classifier.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, encoder, head, classifier) = best;
    Ok(Pretrained {
        encoder,
        head: (!ce).then_some(head),
        classifier: ce.then_some(classifier),
        history,
        best_epoch,
        warnings,
    })
}

/// Trains encoder and classifier jointly with cross-entropy directly on
/// labeled graphs (no augmentation), with early stopping on validation
/// accuracy. Training stops as soon as validation accuracy reaches
/// `stop_at`, which keeps the model from saturating. Used for graph
/// benchmarks that have no source programs.
pub fn fit_graph_detector(train: &[CodeGraph], val: &[CodeGraph], cfg: &TrainConfig, stop_at: f64) -> Result<(Detector, f64)> {
    cfg.validate()?;
    let label_of = |g: &CodeGraph| g.label.ok_or_else(|| TrainError::Data("unlabeled graph".into()));
    let y_train: Vec<usize> = train.iter().map(|g| label_of(g).map(Label::as_class)).collect::<Result<_>>()?;
    let y_val: Vec<usize> = val.iter().map(|g| label_of(g).map(Label::as_class)).collect::<Result<_>>()?;
    if !(y_train.contains(&0) && y_train.contains(&1)) {
        return Err(TrainError::Data("training graphs must contain both classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ecfg = EncoderConfig {
        input_dim: train[0].feature_dim,
        ..cfg.encoder_config()
    };
    let mut det = Detector {
        encoder: Encoder::init(ecfg.clone(), &mut rng),
        classifier: Classifier::init(ecfg.embedding_dim(), &mut rng),
    };
    let train_in: Vec<GraphInput> = train.iter().map(|g| GraphInput::new(g, &ecfg)).collect();
    let mut opt_e = Adam::new(cfg.learning_rate, det.encoder.params.values());
    let mut opt_c = Adam::new(cfg.learning_rate, det.classifier.params.values());
    let accuracy = |det: &Detector, gs: &[CodeGraph], ys: &[usize]| -> Result<f64> {
        let mut ok = 0;
        for (g, &y) in gs.iter().zip(ys) {
            let p = det.predict(g)?;
            ok += (((p[1] > p[0]) as usize) == y) as usize;
        }
        Ok(ok as f64 / gs.len().max(1) as f64)
    };
    let (eval_g, eval_y) = if val.is_empty() { (train, &y_train) } else { (val, &y_val) };
    let mut best = (f64::NEG_INFINITY, det.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let bs = (cfg.batch_size / 2).max(1);
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(bs) {
            let tape = Tape::new();
            let eb = det.encoder.params.bind(&tape, true);
            let cb = det.classifier.params.bind(&tape, true);
            let inputs: Vec<&GraphInput> = chunk.iter().map(|&i| &train_in[i]).collect();
            let classes: Vec<usize> = chunk.iter().map(|&i| y_train[i]).collect();
            let l = ce_batch_loss(&tape, &det.encoder, &eb, &det.classifier, &cb, &inputs, &classes)?;
            let mut grads = tape.backward(l)?;
            let ge: Vec<Tensor> = eb.vars().iter().map(|&v| grads.take(v)).collect();
            let gc: Vec<Tensor> = cb.vars().iter().map(|&v| grads.take(v)).collect();
            opt_e.step(det.encoder.params.values_mut(), &ge)?;
            opt_c.step(det.classifier.params.values_mut(), &gc)?;
        }
        let acc = accuracy(&det, eval_g, eval_y)?;
        if acc > best.0 {
            best = (acc, det.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
        if best.0 >= stop_at {
            break;
        }
    }
    Ok((best.1, best.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub best_epoch: usize,
    pub val_f1: f64,
    pub epochs_run: usize,
}

fn embed_all(encoder: &Encoder, samples: &[Sample], d: usize) -> Result<Tensor> {
    let dim = encoder.config.embedding_dim();
    let mut data = Vec::with_capacity(samples.len() * dim);
    for s in samples {
        let e = encoder.embed(&build_graph(&s.ast, Some(s.label), d))?;
        data.extend_from_slice(e.data());
    }
    Ok(Tensor::new(samples.len(), dim, data)?)
}

fn classify_rows(cls: &Classifier, h: &Tensor) -> Result<Vec<Label>> {
    let tape = Tape::new();
    let cb = cls.params.bind(&tape, false);
    let hv = tape.constant(h.clone());
    let logits = cls.logits(&tape, &cb, hv)?;
    let v = tape.value(logits);
    Ok((0..v.rows())
        .map(|i| Label::from_class((v.get(i, 1) > v.get(i, 0)) as usize))
        .collect())
}

fn select_rows(h: &Tensor, idx: &[usize]) -> Tensor {
    Tensor::from_fn(idx.len(), h.cols(), |i, j| h.get(idx[i], j))
}

/// Trains a classifier on the frozen encoder's embeddings with cross-entropy
/// and early stopping on validation F1.
pub fn train_classifier(encoder: &Encoder, train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<(Classifier, ClassifierReport)> {
    cfg.validate()?;
    for label in [Label::Benign, Label::Vulnerable] {
        if !train.iter().any(|s| s.label == label) {
            return Err(TrainError::Data(format!("no {label:?} sample in the training set")));
        }
    }
    let d = cfg.feature_dim;
    let h_train = embed_all(encoder, train, d)?;
    let h_val = embed_all(encoder, val, d)?;
    let y_train: Vec<usize> = train.iter().map(|s| s.label.as_class()).collect();
    let y_val: Vec<Label> = val.iter().map(|s| s.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "classifier"));
    let mut cls = Classifier::init(encoder.config.embedding_dim(), &mut rng);
    let mut opt = Adam::new(cfg.classifier_learning_rate, cls.params.values());
    let score = |cls: &Classifier| -> Result<f64> {
        if val.is_empty() {
            // fall back to training F1
            let pred = classify_rows(cls, &h_train)?;
            let truth: Vec<Label> = train.iter().map(|s| s.label).collect();
            return Ok(detection_metrics(&pred, &truth).map(|m| m.f1).unwrap_or(0.0));
        }
        let pred = classify_rows(cls, &h_val)?;
        Ok(detection_metrics(&pred, &y_val).map(|m| m.f1).unwrap_or(0.0))
    };
    let mut best = (f64::NEG_INFINITY, 0usize, cls.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs_run = 0;
    for epoch in 0..cfg.classifier_epochs {
        epochs_run += 1;
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.classifier_batch_size) {
            let tape = Tape::new();
            let cb = cls.params.bind(&tape, true);
            let hv = tape.constant(select_rows(&h_train, chunk));
            let logits = cls.logits(&tape, &cb, hv)?;
            let classes: Vec<usize> = chunk.iter().map(|&i| y_train[i]).collect();
            let l = cross_entropy(&tape, logits, &classes)?;
            let mut grads = tape.backward(l)?;
            let g: Vec<Tensor> = cb.vars().iter().map(|&v| grads.take(v)).collect();
            opt.step(cls.params.values_mut(), &g)?;
        }
        let f1 = score(&cls)?;
        if f1 > best.0 {
            best = (f1, epoch, cls.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (val_f1, best_epoch, cls) = best;
    Ok((
        cls,
        ClassifierReport {
            best_epoch,
            val_f1,
            epochs_run,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of the vulnerable class.
    pub probability: f64,
}

impl Prediction {
    pub fn from_probabilities(p: [f64; 2]) -> Self {
        Self {
            label: Label::from_class((p[1] > p[0]) as usize),
            probability: p[1],
        }
    }
}

pub fn predict_graph(detector: &Detector, g: &CodeGraph) -> Result<Prediction> {
    Ok(Prediction::from_probabilities(detector.predict(g)?))
}

/// Parse, build the graph, encode and classify one source function.
pub fn detect(detector: &Detector, source: &str) -> Result<Prediction> {
    let f = parse(source)?;
    predict_graph(detector, &build_graph(&f, None, detector.encoder.config.input_dim))
}

/// Fraction of samples whose predicted label survives a random
/// semantics-preserving augmentation.
pub fn augmentation_consistency(detector: &Detector, samples: &[Sample], seed: u64, probability: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(TrainError::Data("no samples".into()));
    }
    let d = detector.encoder.config.input_dim;
    let mut same = 0;
    for s in samples {
        let a = predict_graph(detector, &build_graph(&s.ast, None, d))?;
        let cfg = AugmentConfig {
            per_op_probability: probability,
            ..AugmentConfig::default().with_seed(derive_seed(seed, &s.id))
        };
        let b = predict_graph(detector, &augmented_graph(&s.ast, &cfg, None, d))?;
        same += (a.label == b.label) as usize;
    }
    Ok(same as f64 / samples.len() as f64)
}

/// Logit pair to a prediction, for callers holding raw classifier output.
pub fn prediction_from_logits(l: [f64; 2]) -> Prediction {
    Prediction::from_probabilities(softmax2(l))
}
