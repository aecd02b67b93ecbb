use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::minic::{interpret, parse, ExecStatus, DEFAULT_STEP_LIMIT};

fn lines(v: &[u32]) -> BTreeSet<u32> {
    v.iter().copied().collect()
}

#[test]
fn detection_metrics_by_hand() {
    use Label::{Benign as B, Vulnerable as V};
    let m = detection_metrics(&[V, V, B, B, V], &[V, B, B, V, V]).unwrap();
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 1, 1));
    assert!((m.accuracy - 0.6).abs() < 1e-12);
    assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    assert!(!m.degenerate);

    let none = detection_metrics(&[B, B], &[B, V]).unwrap();
    assert_eq!((none.precision, none.f1), (0.0, 0.0));
    assert!(none.degenerate);
    assert_eq!(detection_metrics(&[B], &[]), Err(MetricError::LengthMismatch(1, 0)));
}

#[test]
fn vtp_worked_example() {
    let truth = lines(&[3, 5, 9]);
    let s = vtp_score(&lines(&[3, 5, 9, 11, 12]), &truth);
    assert!((s.precision - 0.6).abs() < 1e-12);
    assert!((s.recall - 1.0).abs() < 1e-12);
    assert!((s.iou - 0.6).abs() < 1e-12);
    let eq = vtp_score(&truth, &truth);
    assert_eq!((eq.precision, eq.recall, eq.iou), (1.0, 1.0, 1.0));
    let dis = vtp_score(&lines(&[1, 2]), &truth);
    assert_eq!((dis.precision, dis.recall, dis.iou), (0.0, 0.0, 0.0));
    let empty = vtp_score(&BTreeSet::new(), &truth);
    assert_eq!(empty.precision, 0.0);
}

#[test]
fn vtp_metrics_averages_and_errors() {
    let m = vtp_metrics(&[lines(&[1, 2]), lines(&[])], &[lines(&[1]), lines(&[4])]).unwrap();
    assert!((m.msp - 0.25).abs() < 1e-12);
    assert!((m.msr - 0.5).abs() < 1e-12);
    assert!((m.miou - 0.25).abs() < 1e-12);
    assert_eq!(m.empty_explanations, 1);
    assert_eq!(vtp_metrics(&[lines(&[1])], &[BTreeSet::new()]), Err(MetricError::MissingGroundTruth(0)));
}

#[test]
fn corpus_is_deterministic_and_balanced() {
    let spec = CorpusSpec {
        n_samples: 200,
        ..Default::default()
    };
    let a = generate_corpus(&spec);
    assert_eq!(a, generate_corpus(&spec));
    assert_eq!(a.iter().filter(|r| r.label == Label::Vulnerable).count(), 60);
    for r in &a {
        let f = parse(&r.source).unwrap_or_else(|e| panic!("{e}\n{}", r.source));
        assert_eq!(r.vuln_lines.len(), 3);
        let src: Vec<&str> = r.source.lines().collect();
        let l: Vec<u32> = r.vuln_lines.iter().copied().collect();
        assert!(src[l[0] as usize - 1].contains("read_int()"));
        assert!(src[l[1] as usize - 1].trim_start().starts_with("if ("));
        assert!(src[l[2] as usize - 1].contains("] = "));
        assert!(f.identifiers().len() > 3);
    }
}

fn traps(src: &str, probes: &[Vec<i64>]) -> bool {
    let f = parse(src).unwrap();
    probes.iter().any(|inp| {
        let t = interpret(&f, inp, DEFAULT_STEP_LIMIT);
        assert_ne!(t.status, ExecStatus::StepLimitExceeded, "{src}");
        matches!(t.status, ExecStatus::Trap(_))
    })
}

#[test]
fn labels_agree_with_probing() {
    let corpus = generate_corpus(&CorpusSpec {
        n_samples: 400,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = 0;
    for r in &corpus {
        let probes = probe_inputs(&mut rng, 64);
        let trapped = traps(&r.source, &probes);
        if r.label == Label::Benign {
            assert!(!trapped, "benign sample trapped:\n{}", r.source);
        }
        agree += (trapped == (r.label == Label::Vulnerable)) as usize;
    }
    assert!(agree as f64 / corpus.len() as f64 >= 0.99, "{agree}");
}

#[test]
fn twins_differ_only_in_the_guard() {
    let corpus = generate_corpus(&CorpusSpec {
        n_samples: 60,
        ..Default::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for r in corpus.iter().filter(|r| r.label == Label::Vulnerable) {
        let t = r.twin();
        assert_eq!(t.label, Label::Benign);
        assert_eq!(t.vuln_lines, r.vuln_lines);
        let guard_line = *r.vuln_lines.iter().nth(1).unwrap() as usize - 1;
        for (k, (a, b)) in r.source.lines().zip(t.source.lines()).enumerate() {
            if k != guard_line {
                assert_eq!(a, b);
            }
        }
        assert!(!traps(&t.source, &probe_inputs(&mut rng, 64)));
    }
}

#[test]
fn split_is_a_partition() {
    let (tr, va, te) = split_indices(2000, 42);
    assert_eq!((tr.len(), va.len(), te.len()), (1600, 200, 200));
    let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
    all.sort();
    assert_eq!(all, (0..2000).collect::<Vec<_>>());
}

#[test]
fn motif_graphs_are_well_formed() {
    let gs = generate_motif_graphs(200, 3);
    let ones = gs.iter().filter(|g| g.label == Label::Vulnerable).count();
    assert!((90..=110).contains(&ones));
    for m in &gs {
        let g = &m.graph;
        assert!((20..=50).contains(&g.num_nodes()));
        assert!(g.edges.iter().all(|e| e.src != e.dst && e.src < g.num_nodes() && e.dst < g.num_nodes()));
        let specials = (0..g.num_nodes()).filter(|&v| g.feature_row(v)[SPECIAL_FEATURE] > 0.0).count();
        assert_eq!(specials, 5);
        match m.label {
            Label::Vulnerable => {
                assert_eq!(m.motif_edges.len(), 5);
                assert!(contains_special_cycle(g));
            }
            Label::Benign => {
                assert!(m.motif_edges.is_empty());
                assert!(!contains_special_cycle(g));
            }
        }
    }
    assert_eq!(gs, generate_motif_graphs(200, 3));
}

#[test]
fn set_iou_basics() {
    let a: BTreeSet<usize> = [1, 2, 3].into();
    let b: BTreeSet<usize> = [2, 3, 4, 5].into();
    assert!((set_iou(&a, &b) - 0.4).abs() < 1e-12);
    assert_eq!(set_iou::<usize>(&BTreeSet::new(), &BTreeSet::new()), 0.0);
}
