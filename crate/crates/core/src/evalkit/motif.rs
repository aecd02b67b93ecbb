//! Planted-motif graph classification benchmark with known explanations.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codegraph::{CodeGraph, Edge, EdgeType, Label, NodeInfo, NodeKind};
use crate::minic::SourceSpan;

pub const MOTIF_FEATURE_DIM: usize = 16;
/// Feature column shared by motif nodes and decoys.
pub const SPECIAL_FEATURE: usize = MOTIF_FEATURE_DIM - 1;
const BASE_FEATURES: usize = 8;
const MOTIF_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifGraph {
    pub graph: CodeGraph,
    pub label: Label,
    /// Indices into `graph.edges` of the planted cycle; empty for label 0.
    pub motif_edges: BTreeSet<usize>,
}

/// `n` graphs of 20–50 nodes, alternating labels. Label 1 graphs carry a
/// directed 5-cycle over special-feature nodes; label 0 graphs carry five
/// special-feature decoys joined by an open path of up to three edges. Every
/// special node gets zero to two base attachments in both classes.
pub fn generate_motif_graphs(n: usize, seed: u64) -> Vec<MotifGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Vulnerable } else { Label::Benign };
            one_graph(&mut rng, label)
        })
        .collect()
}

/// Small graphs of at most 8 edges, alternating labels, small enough for
/// exhaustive search: up to three special-to-base attachments and base
/// edges in both classes, plus the planted cycle for label 1. Label 0 has no
/// special-special edges at all.
pub fn generate_tiny_motif_graphs(n: usize, seed: u64) -> Vec<MotifGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Vulnerable } else { Label::Benign };
            tiny_graph(&mut rng, label)
        })
        .collect()
}

fn tiny_graph(rng: &mut impl Rng, label: Label) -> MotifGraph {
    let n_base = rng.gen_range(2..=4);
    let total = n_base + MOTIF_SIZE;
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut motif = BTreeSet::new();
    if label == Label::Vulnerable {
        for k in 0..MOTIF_SIZE {
            let e = Edge {
                src: n_base + k,
                dst: n_base + (k + 1) % MOTIF_SIZE,
                etype: random_type(rng),
            };
            edges.insert(e);
            motif.insert(e);
        }
    }
    // up to three attachments of distinct special nodes, then base edges
    let mut pairs = BTreeSet::new();
    let attach = rng.gen_range(0..=3);
    let mut specials: Vec<usize> = (n_base..total).collect();
    specials.shuffle(rng);
    for &sp in specials.iter().take(attach) {
        let b = rng.gen_range(0..n_base);
        pairs.insert(if rng.gen_bool(0.5) { (b, sp) } else { (sp, b) });
    }
    let base_edges = rng.gen_range(0..=3 - attach);
    let mut tries = 0;
    while pairs.len() < attach + base_edges && tries < 100 {
        tries += 1;
        let (a, b) = (rng.gen_range(0..n_base), rng.gen_range(0..n_base));
        if a != b && !pairs.contains(&(b, a)) {
            pairs.insert((a, b));
        }
    }
    for (src, dst) in pairs {
        edges.insert(Edge {
            src,
            dst,
            etype: random_type(rng),
        });
    }
    finish(rng, edges, &motif, total, n_base, label)
}

/// Open directed path over the first `len` + 1 special nodes, never closing
/// the cycle.
fn decoy_path(rng: &mut impl Rng, special: &[usize], len: usize, edges: &mut BTreeSet<Edge>) {
    for k in 0..len.min(MOTIF_SIZE - 1) {
        edges.insert(Edge {
            src: special[k],
            dst: special[k + 1],
            etype: random_type(rng),
        });
    }
}

fn random_type(rng: &mut impl Rng) -> EdgeType {
    *EdgeType::ALL.choose(rng).unwrap()
}

fn one_graph(rng: &mut impl Rng, label: Label) -> MotifGraph {
    let total = rng.gen_range(20..=50);
    let n_base = total - MOTIF_SIZE;
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    // a random tree keeps the base connected, plus a few extra edges
    for v in 1..n_base {
        let u = rng.gen_range(0..v);
        let (src, dst) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
        edges.insert(Edge {
            src,
            dst,
            etype: random_type(rng),
        });
    }
    for _ in 0..n_base / 2 {
        let (a, b) = (rng.gen_range(0..n_base), rng.gen_range(0..n_base));
        if a != b {
            edges.insert(Edge {
                src: a,
                dst: b,
                etype: random_type(rng),
            });
        }
    }
    let special: Vec<usize> = (n_base..total).collect();
    let mut motif = BTreeSet::new();
    if label == Label::Vulnerable {
        for k in 0..MOTIF_SIZE {
            let e = Edge {
                src: special[k],
                dst: special[(k + 1) % MOTIF_SIZE],
                etype: random_type(rng),
            };
            edges.insert(e);
            motif.insert(e);
        }
    } else {
        let len = rng.gen_range(0..=3);
        decoy_path(rng, &special, len, &mut edges);
    }
    for &s in &special {
        // same attachment law in both classes, so only special-special edges
        // separate them
        let attach = rng.gen_range(0..=2);
        for _ in 0..attach {
            let b = rng.gen_range(0..n_base);
            let (src, dst) = if rng.gen_bool(0.5) { (b, s) } else { (s, b) };
            edges.insert(Edge {
                src,
                dst,
                etype: random_type(rng),
            });
        }
    }
    finish(rng, edges, &motif, total, n_base, label)
}

fn finish(rng: &mut impl Rng, edges: BTreeSet<Edge>, motif: &BTreeSet<Edge>, total: usize, n_base: usize, label: Label) -> MotifGraph {
    // one edge per ordered pair, whatever the type
    let mut seen = BTreeSet::new();
    let mut edges: Vec<Edge> = edges.into_iter().filter(|e| seen.insert((e.src, e.dst))).collect();
    edges.sort_by_key(|e| (e.etype, e.src, e.dst));

    let d = MOTIF_FEATURE_DIM;
    let mut features = vec![0.0; total * d];
    let mut nodes = Vec::with_capacity(total);
    for v in 0..total {
        let col = if v >= n_base { SPECIAL_FEATURE } else { rng.gen_range(0..BASE_FEATURES) };
        features[v * d + col] = 1.0;
        let line = v as u32 + 1;
        nodes.push(NodeInfo {
            stmt_id: v,
            span: SourceSpan::new(line, 1, line, 2),
            tokens: vec![format!("f{col}")],
            kind: NodeKind::Expr,
        });
    }
    let motif_edges = edges
        .iter()
        .enumerate()
        .filter(|(_, e)| motif.contains(e))
        .map(|(i, _)| i)
        .collect();
    MotifGraph {
        graph: CodeGraph {
            nodes,
            edges,
            label: Some(label),
            feature_dim: d,
            features,
        },
        label,
        motif_edges,
    }
}

/// Whether the special-feature nodes contain a directed 5-cycle, by brute
/// force over ordered node tuples.
pub fn contains_special_cycle(g: &CodeGraph) -> bool {
    let special: Vec<usize> = (0..g.num_nodes())
        .filter(|&v| g.feature_row(v)[SPECIAL_FEATURE] > 0.0)
        .collect();
    let adj: BTreeSet<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
    fn extend(path: &mut Vec<usize>, special: &[usize], adj: &BTreeSet<(usize, usize)>) -> bool {
        let last = *path.last().unwrap();
        if path.len() == MOTIF_SIZE {
            return adj.contains(&(last, path[0]));
        }
        for &s in special {
            if !path.contains(&s) && adj.contains(&(last, s)) {
                path.push(s);
                if extend(path, special, adj) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    special.iter().any(|&s| extend(&mut vec![s], &special, &adj))
}
