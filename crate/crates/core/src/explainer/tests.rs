use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::codegraph::{build_graph, Edge, EdgeType};
use crate::encoders::{Arch, Classifier, Encoder, EncoderConfig};
use crate::evalkit::{generate_motif_graphs, generate_tiny_motif_graphs};
use crate::minic::gen::{random_function, GenConfig};
use crate::tensorcore::gradcheck::check_gradients;
use crate::training::{fit_graph_detector, TrainConfig};

fn random_detector(arch: Arch, d: usize, layers: usize, seed: u64) -> Detector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EncoderConfig {
        hidden_dim: 8,
        layers,
        ..EncoderConfig::new(arch, d)
    };
    let dim = cfg.embedding_dim();
    Detector {
        encoder: Encoder::init(cfg, &mut rng),
        classifier: Classifier::init(dim, &mut rng),
    }
}

fn program_graph(seed: u64, d: usize) -> CodeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = build_graph(&random_function(&mut rng, &GenConfig::default()), None, d);
        if g.num_nodes() >= 4 && g.edges.len() >= 3 {
            return g;
        }
    }
}

fn saturated(g: &CodeGraph, edge: f64, feat: f64) -> ExplanationMask {
    ExplanationMask {
        edge_logits: Tensor::filled(g.edges.len(), 1, edge),
        feature_logits: Some(Tensor::filled(g.num_nodes(), g.feature_dim, feat)),
    }
}

#[test]
fn strengths_at_the_extremes() {
    let det = random_detector(Arch::Gcn, 16, 2, 1);
    let g = program_graph(2, 16);
    let y = predicted_label(&det, &g).unwrap();
    let (e, v) = (g.edges.len(), g.num_nodes() * 16);
    let full = det.predict(&g).unwrap()[y.as_class()];
    let empty = hard_probabilities(&det, &g, &vec![false; e], Some(&vec![false; v])).unwrap()[y.as_class()];

    let (sf, sc) = strengths(&det, &g, &saturated(&g, 40.0, 40.0), y).unwrap();
    assert!((sf - full).abs() < 1e-9 && (sc + empty).abs() < 1e-9);
    let (sf, sc) = strengths(&det, &g, &saturated(&g, -40.0, -40.0), y).unwrap();
    assert!((sf - empty).abs() < 1e-9 && (sc + full).abs() < 1e-9);
    assert!((0.0..=1.0).contains(&sf) && (-1.0..=0.0).contains(&sc));
}

#[test]
fn hinge_losses_follow_their_definition() {
    let det = random_detector(Arch::Ggnn, 16, 2, 3);
    let g = program_graph(4, 16);
    let y = predicted_label(&det, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let mask = ExplanationMask {
            edge_logits: Tensor::from_fn(g.edges.len(), 1, |_, _| rng.gen_range(-2.0..2.0)),
            feature_logits: Some(Tensor::from_fn(g.num_nodes(), 16, |_, _| rng.gen_range(-2.0..2.0))),
        };
        let (sf, sc) = strengths(&det, &g, &mask, y).unwrap();
        let (lf, lc) = dual_losses(&det, &g, &mask, y).unwrap();
        // binary task: P(ys|sub) = 1 - S_f and P(ys|comp) = 1 + S_c
        assert!((lf - (0.5 - sf + (1.0 - sf)).max(0.0)).abs() < 1e-12);
        assert!((lc - (0.5 - sc - (1.0 + sc)).max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn objective_at_zero_logits_and_mode_overrides() {
    let det = random_detector(Arch::Gcn, 16, 2, 6);
    let g = program_graph(7, 16);
    let y = predicted_label(&det, &g).unwrap();
    let zero = ExplanationMask::zeros(&g, true);
    let (lf, lc) = dual_losses(&det, &g, &zero, y).unwrap();
    let cfg = ExplainerConfig {
        sparsity: 0.3,
        alpha: 0.25,
        ..Default::default()
    };
    let want = 0.3 * 0.5 * (g.edges.len() + g.num_nodes() * 16) as f64 + 0.25 * lf + 0.75 * lc;
    assert!((objective(&det, &g, &zero, &cfg, y).unwrap() - want).abs() < 1e-9);

    let l1 = 0.3 * 0.5 * (g.edges.len() + g.num_nodes() * 16) as f64;
    let fact = ExplainerConfig {
        mode: ExplainMode::FactualOnly,
        ..cfg.clone()
    };
    assert_eq!(fact.effective_alpha(), 1.0);
    assert!((objective(&det, &g, &zero, &fact, y).unwrap() - (l1 + lf)).abs() < 1e-9);
    let cf = ExplainerConfig {
        mode: ExplainMode::CounterfactualOnly,
        ..cfg
    };
    assert_eq!(cf.effective_alpha(), 0.0);
    assert!((objective(&det, &g, &zero, &cf, y).unwrap() - (l1 + lc)).abs() < 1e-9);
}

#[test]
fn objective_gradients_match_finite_differences() {
    let mut checked = 0;
    for k in 0..24u64 {
        let arch = if k % 2 == 0 { Arch::Gcn } else { Arch::Ggnn };
        let det = random_detector(arch, 16, 2, 100 + k);
        let g = program_graph(200 + k, 16);
        let y = predicted_label(&det, &g).unwrap();
        let gi = det.encoder.prepare(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(k);
        let el = Tensor::from_fn(g.edges.len(), 1, |_, _| rng.gen_range(-1.5..1.5));
        let fl = Tensor::from_fn(g.num_nodes(), 16, |_, _| rng.gen_range(-1.5..1.5));
        let cfg = ExplainerConfig {
            sparsity: 0.05,
            ..Default::default()
        };
        let probes: Vec<(usize, usize)> = (0..el.len())
            .map(|i| (0, i))
            .chain((0..8).map(|_| (1, rng.gen_range(0..fl.len()))))
            .collect();
        let err = check_gradients(&[el, fl], &probes, 1e-6, |t, v| {
            let p = objective_on_tape(t, &det, &gi, y, v[0], Some(v[1]), &cfg).map_err(|e| match e {
                ExplainError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(p.objective)
        })
        .unwrap();
        assert!(err <= 1e-4, "instance {k}: {err}");
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn zero_steps_returns_uniform_masks() {
    let det = random_detector(Arch::Gcn, 16, 2, 8);
    let g = program_graph(9, 16);
    let y = predicted_label(&det, &g).unwrap();
    let cfg = ExplainerConfig {
        steps: 0,
        ..Default::default()
    };
    let (mask, trace) = optimize(&det, &g, &cfg, y).unwrap();
    assert_eq!(mask, ExplanationMask::zeros(&g, true));
    assert_eq!(trace.len(), 1);

    let cfg = ExplainerConfig {
        steps: 30,
        sparsity: 0.05,
        ..Default::default()
    };
    let (mask, trace) = optimize(&det, &g, &cfg, y).unwrap();
    let at = objective(&det, &g, &mask, &cfg, y).unwrap();
    assert!(at <= trace[0] + 1e-12);
    assert!((at - trace.iter().copied().fold(f64::INFINITY, f64::min)).abs() < 1e-12);
    assert_eq!(optimize(&det, &g, &cfg, y).unwrap().0, mask);
}

#[test]
fn binarization_extremes() {
    let det = random_detector(Arch::Gcn, 16, 2, 10);
    let g = program_graph(11, 16);
    let y = predicted_label(&det, &g).unwrap();
    let cfg = ExplainerConfig::default();
    let all = binarize_and_extract(&det, &g, &saturated(&g, 30.0, 30.0), &cfg, y).unwrap();
    assert!(all.factual_check);
    assert_eq!(all.lines(), g.lines_of(0..g.num_nodes()));
    assert_eq!(all.kept_edges.len(), g.edges.len());
    for w in all.statements.windows(2) {
        assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].line < w[1].line));
    }
    let none = binarize_and_extract(&det, &g, &saturated(&g, -30.0, -30.0), &cfg, y).unwrap();
    assert!(none.degenerate && none.statements.is_empty());
    let top = ExplainerConfig {
        top_k: Some(2),
        ..cfg
    };
    let fallback = binarize_and_extract(&det, &g, &saturated(&g, -30.0, -30.0), &top, y).unwrap();
    assert_eq!(fallback.statements.len(), 2.min(g.lines_of(0..g.num_nodes()).len()));
}

#[test]
fn brute_force_infeasible_when_edges_are_ignored() {
    // no propagation layers: the model only sees node features
    let det = random_detector(Arch::Gcn, 16, 0, 12);
    let mut g = program_graph(13, 16);
    g.edges.truncate(6);
    assert_eq!(brute_force_explain(&det, &g, 8, 0.0).unwrap(), None);
    let mut big = program_graph(14, 16);
    while big.edges.len() <= 12 {
        let n = big.num_nodes();
        big.edges.push(Edge {
            src: big.edges.len() % n,
            dst: (big.edges.len() + 1) % n,
            etype: EdgeType::Data,
        });
    }
    assert!(matches!(brute_force_explain(&det, &big, 12, 0.0), Err(ExplainError::Size { .. })));
}

/// Four nodes, two of them "special"; label 1 iff the special pair is joined.
fn pair_graphs(n: usize, seed: u64) -> Vec<CodeGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let d = 8;
            let mut features = vec![0.0; 6 * d];
            for v in 0..6 {
                let col = if v >= 4 { 7 } else { rng.gen_range(0..4) };
                features[v * d + col] = 1.0;
            }
            let mut edges = vec![
                Edge { src: 0, dst: 1, etype: EdgeType::Next },
                Edge { src: 1, dst: 2, etype: EdgeType::Next },
                Edge { src: 2, dst: 3, etype: EdgeType::Next },
                Edge { src: rng.gen_range(0..4), dst: 4, etype: EdgeType::Data },
                Edge { src: 5, dst: rng.gen_range(0..4), etype: EdgeType::Data },
            ];
            let label = i % 2 == 0;
            if label {
                edges.push(Edge { src: 4, dst: 5, etype: EdgeType::Ctrl });
            }
            edges.sort_by_key(|e| (e.etype, e.src, e.dst));
            let nodes = (0..6)
                .map(|v| crate::codegraph::NodeInfo {
                    stmt_id: v,
                    span: crate::minic::SourceSpan::new(v as u32 + 1, 1, v as u32 + 1, 2),
                    tokens: Vec::new(),
                    kind: crate::codegraph::NodeKind::Expr,
                })
                .collect();
            CodeGraph {
                nodes,
                edges,
                label: Some(Label::from_class(label as usize)),
                feature_dim: d,
                features,
            }
        })
        .collect()
}

#[test]
fn brute_force_finds_the_decisive_edge_and_is_monotone_in_margin() {
    let train = pair_graphs(200, 1);
    let cfg = TrainConfig {
        hidden_dim: 16,
        learning_rate: 1e-2,
        batch_size: 32,
        max_epochs: 200,
        patience: 200,
        seed: 3,
        ..Default::default()
    };
    let (det, acc) = fit_graph_detector(&train, &[], &cfg, 1.0).unwrap();
    assert_eq!(acc, 1.0);
    let mut found = 0;
    for g in pair_graphs(10, 2).iter().filter(|g| g.label == Some(Label::Vulnerable)) {
        let decisive = g.edges.iter().position(|e| (e.src, e.dst) == (4, 5)).unwrap();
        let best = brute_force_explain(&det, g, 8, 0.0).unwrap();
        assert_eq!(best, Some(vec![decisive]));
        found += 1;
        let mut last = 0;
        for margin in [0.0, 0.3, 0.6, 0.9, 0.999] {
            match brute_force_explain(&det, g, 8, margin).unwrap() {
                Some(s) => {
                    assert!(s.len() >= last);
                    last = s.len();
                }
                None => last = usize::MAX,
            }
        }
    }
    assert!(found > 0);
}

#[test]
fn explanations_recover_a_planted_motif() {
    let train: Vec<CodeGraph> = generate_motif_graphs(400, 1).into_iter().map(|m| m.graph).collect();
    let val: Vec<CodeGraph> = generate_motif_graphs(100, 2).into_iter().map(|m| m.graph).collect();
    let cfg = TrainConfig {
        hidden_dim: 32,
        learning_rate: 1e-3,
        batch_size: 32,
        seed: 1,
        ..Default::default()
    };
    let (det, acc) = fit_graph_detector(&train, &val, &cfg, 0.97).unwrap();
    assert!(acc >= 0.9, "{acc}");
    let ecfg = ExplainerConfig {
        sparsity: 0.003,
        mask_features: false,
        steps: 300,
        ..Default::default()
    };
    let bench = generate_motif_graphs(10, 3);
    let mut iou = 0.0;
    let mut n = 0;
    for m in bench.iter().filter(|m| m.label == Label::Vulnerable) {
        let r = explain(&det, &m.graph, &ecfg).unwrap();
        let kept = r.kept_edges.iter().copied().collect();
        iou += crate::evalkit::set_iou(&kept, &m.motif_edges);
        n += 1;
    }
    assert!(iou / n as f64 >= 0.5, "{}", iou / n as f64);
    // tiny instances stay within brute-force range
    assert!(generate_tiny_motif_graphs(20, 4).iter().all(|m| m.graph.edges.len() <= 8));
}
