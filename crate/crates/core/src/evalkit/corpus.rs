//! Synthetic labeled corpus: an attacker-controlled index written into a
//! fixed-size buffer, behind a correct or a flawed bounds check, padded with
//! randomly chosen distractor statements.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codegraph::Label;
use crate::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_samples: usize,
    pub vulnerable_ratio: f64,
    /// Inclusive range for the number of distractor statements.
    pub distractors: (usize, usize),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            vulnerable_ratio: 0.3,
            distractors: (3, 10),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub source: String,
    pub label: Label,
    /// Index definition, guard and write lines.
    pub vuln_lines: BTreeSet<u32>,
    /// The bounds condition as written.
    pub guard: String,
    /// Seed the record was generated from; `twin` reuses it.
    pub sample_seed: u64,
    pub distractors: (usize, usize),
}

impl CorpusRecord {
    /// The same program with the other kind of guard.
    pub fn twin(&self) -> CorpusRecord {
        let other = match self.label {
            Label::Benign => Label::Vulnerable,
            Label::Vulnerable => Label::Benign,
        };
        let mut t = generate_sample_range(self.sample_seed, other, self.distractors.0, self.distractors.1);
        t.id = format!("{}-twin", self.id);
        t
    }
}

const FLAWED: [&str; 6] = ["I < S", "I <= S", "I >= 0", "I > 0", "I >= 0 && I <= S", "N > 0"];
const SOUND: [&str; 4] = ["I >= 0 && I < S", "0 <= I && I < S", "I > -1 && I < S", "I < S && I >= 0"];
const FUNC_NAMES: [&str; 6] = ["handle", "process", "update", "fill", "store", "apply"];
const INDEX_NAMES: [&str; 6] = ["i", "idx", "k", "pos", "off", "j"];
const BUF_NAMES: [&str; 5] = ["buf", "arr", "data", "tbl", "slot"];
const VAR_STEMS: [&str; 8] = ["t", "acc", "tmp", "cnt", "sum", "val", "x", "y"];
const PARAMS: [&str; 2] = ["n", "m"];

struct Builder {
    lines: Vec<String>,
    depth: usize,
    scalars: Vec<String>,
    arrays: Vec<(String, i64)>,
    fresh: usize,
}

impl Builder {
    fn push(&mut self, s: String) -> u32 {
        self.lines.push(format!("{}{}", "    ".repeat(self.depth), s));
        self.lines.len() as u32
    }

    fn fresh(&mut self, rng: &mut impl Rng) -> String {
        self.fresh += 1;
        format!("{}{}", VAR_STEMS.choose(rng).unwrap(), self.fresh)
    }

    fn operand(&self, rng: &mut impl Rng) -> String {
        if !self.scalars.is_empty() && rng.gen_bool(0.5) {
            self.scalars.choose(rng).unwrap().clone()
        } else {
            PARAMS.choose(rng).unwrap().to_string()
        }
    }

    /// One distractor statement. None of them can trap or loop for long.
    fn distractor(&mut self, rng: &mut impl Rng) {
        let have_var = !self.scalars.is_empty();
        let kind = rng.gen_range(0..10);
        match kind {
            1 | 3 | 4 | 5 | 9 if !have_var => self.declare(rng),
            0 => self.declare(rng),
            1 => {
                let v = self.scalars.choose(rng).unwrap().clone();
                let a = self.operand(rng);
                let op = ["+", "-"].choose(rng).unwrap();
                self.push(format!("{v} = {v} {op} {a};"));
            }
            2 => {
                let a = self.operand(rng);
                self.push(format!("print_int({a});"));
            }
            3 => {
                let v = self.scalars.choose(rng).unwrap().clone();
                let c = rng.gen_range(0..6);
                let c2 = rng.gen_range(1..4);
                self.push(format!("if ({v} > {c}) {{"));
                self.depth += 1;
                self.push(format!("{v} = {v} - {c2};"));
                self.depth -= 1;
                if rng.gen_bool(0.3) {
                    self.push("} else {".into());
                    self.depth += 1;
                    self.push(format!("{v} = {v} + 1;"));
                    self.depth -= 1;
                }
                self.push("}".into());
            }
            4 => {
                let v = self.scalars.choose(rng).unwrap().clone();
                let l = self.fresh(rng);
                let c = rng.gen_range(2..6);
                self.push(format!("for (int {l} = 0; {l} < {c}; {l} = {l} + 1) {{"));
                self.depth += 1;
                self.push(format!("{v} = {v} + {l};"));
                self.depth -= 1;
                self.push("}".into());
            }
            5 => {
                let v = self.scalars.choose(rng).unwrap().clone();
                let c = rng.gen_range(0..10);
                let d = rng.gen_range(1..4);
                self.push(format!("while ({v} > {c}) {{"));
                self.depth += 1;
                self.push(format!("{v} = {v} - {d};"));
                self.depth -= 1;
                self.push("}".into());
            }
            6 => {
                let a = self.fresh(rng);
                let size = rng.gen_range(2..6);
                self.push(format!("int {a}[{size}];"));
                self.arrays.push((a, size));
            }
            7 if !self.arrays.is_empty() => {
                let (a, size) = self.arrays.choose(rng).unwrap().clone();
                let k = rng.gen_range(0..size);
                if have_var && rng.gen_bool(0.5) {
                    let v = self.scalars.choose(rng).unwrap().clone();
                    self.push(format!("{v} = {a}[{k}];"));
                } else {
                    let x = self.operand(rng);
                    self.push(format!("{a}[{k}] = {x};"));
                }
            }
            7 | 8 => {
                let v = self.fresh(rng);
                self.push(format!("int {v} = read_int();"));
                self.scalars.push(v);
            }
            _ => {
                let v = self.scalars.choose(rng).unwrap().clone();
                self.push(format!("switch ({v}) {{"));
                self.push(format!("case {}:", rng.gen_range(0..4)));
                self.depth += 1;
                self.push(format!("{v} = {v} + 2;"));
                self.push("break;".into());
                self.depth -= 1;
                self.push("default:".into());
                self.depth += 1;
                self.push(format!("{v} = 0;"));
                self.depth -= 1;
                self.push("}".into());
            }
        }
    }

    fn declare(&mut self, rng: &mut impl Rng) {
        let v = self.fresh(rng);
        let a = self.operand(rng);
        let op = ["+", "-", "*"].choose(rng).unwrap();
        let c = rng.gen_range(1..5);
        self.push(format!("int {v} = {a} {op} {c};"));
        self.scalars.push(v);
    }
}

/// Generates one sample with the default 3..=10 distractors. The skeleton
/// depends only on `seed`, so the two labels of one seed are twins differing
/// in the guard condition.
pub fn generate_sample(seed: u64, label: Label) -> CorpusRecord {
    generate_sample_range(seed, label, 3, 10)
}

#[allow(clippy::too_many_arguments)]
fn generate_with(
    rng: &mut ChaCha8Rng,
    seed: u64,
    label: Label,
    fname: &str,
    idx: &str,
    buf: &str,
    size: i64,
    guard: &str,
    n_distract: usize,
) -> CorpusRecord {
    let mut b = Builder {
        lines: Vec::new(),
        depth: 0,
        scalars: Vec::new(),
        arrays: Vec::new(),
        fresh: 0,
    };
    b.push(format!("int {fname}(int n, int m) {{"));
    b.depth = 1;
    // distractors before the index, between index and guard, after the write
    let before = rng.gen_range(0..=n_distract);
    let between = rng.gen_range(0..=n_distract - before);
    let after = n_distract - before - between;
    let buf_at = rng.gen_range(0..=before);
    for k in 0..=before {
        if k == buf_at {
            b.push(format!("int {buf}[{size}];"));
        }
        if k < before {
            b.distractor(rng);
        }
    }
    let def_line = b.push(format!("int {idx} = read_int();"));
    for _ in 0..between {
        b.distractor(rng);
    }
    let value = b.operand(rng);
    let guard_line = b.push(format!("if ({guard}) {{"));
    b.depth += 1;
    let write_line = b.push(format!("{buf}[{idx}] = {value};"));
    b.depth -= 1;
    b.push("}".into());
    for _ in 0..after {
        b.distractor(rng);
    }
    let ret = b.operand(rng);
    b.push(format!("return {ret};"));
    b.depth = 0;
    b.push("}".into());
    CorpusRecord {
        id: String::new(),
        source: b.lines.join("\n") + "\n",
        label,
        vuln_lines: [def_line, guard_line, write_line].into_iter().collect(),
        guard: guard.to_string(),
        sample_seed: seed,
        distractors: (3, 10),
    }
}

/// Deterministic corpus with exactly `round(n * ratio)` vulnerable samples.
pub fn generate_corpus(spec: &CorpusSpec) -> Vec<CorpusRecord> {
    let n = spec.n_samples;
    let n_vuln = ((n as f64) * spec.vulnerable_ratio.clamp(0.0, 1.0)).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_vuln { Label::Vulnerable } else { Label::Benign })
        .collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (lo, hi) = (spec.distractors.0.min(spec.distractors.1), spec.distractors.1.max(spec.distractors.0));
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let id = format!("s{i:05}");
            let seed = derive_seed(spec.seed, &id);
            let mut r = generate_sample_range(seed, label, lo, hi);
            r.id = id;
            r
        })
        .collect()
}

pub fn generate_sample_range(seed: u64, label: Label, lo: usize, hi: usize) -> CorpusRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size: i64 = rng.gen_range(4..9);
    let fname = *FUNC_NAMES.choose(&mut rng).unwrap();
    let idx = *INDEX_NAMES.choose(&mut rng).unwrap();
    let buf = *BUF_NAMES.choose(&mut rng).unwrap();
    let flawed = *FLAWED.choose(&mut rng).unwrap();
    let sound = *SOUND.choose(&mut rng).unwrap();
    let n_distract = rng.gen_range(lo..=hi);
    let tpl = match label {
        Label::Vulnerable => flawed,
        Label::Benign => sound,
    };
    let guard = tpl.replace('I', idx).replace('S', &size.to_string()).replace('N', "n");
    let mut r = generate_with(&mut rng, seed, label, fname, idx, buf, size, &guard, n_distract);
    r.distractors = (lo, hi);
    r
}

/// `k` random input vectors of length 16 with entries in `[-2, 9]`, covering
/// every buffer bound the generator uses.
pub fn probe_inputs(rng: &mut impl Rng, k: usize) -> Vec<Vec<i64>> {
    (0..k).map(|_| (0..16).map(|_| rng.gen_range(-2..=9)).collect()).collect()
}

/// Shuffled 80/10/10 train/validation/test split of `0..n`.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    (idx, val, test)
}
