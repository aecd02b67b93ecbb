//! Central finite-difference checks of tape gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::{Result, Tape, Tensor, Var};

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`, or 0 when both are below 1e-10.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-10 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Up to `per_input` random coordinates of each input, as `(input, flat index)`.
pub fn sample_probes(inputs: &[Tensor], per_input: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, t) in inputs.iter().enumerate() {
        let k = per_input.min(t.len());
        let mut idx: Vec<usize> = sample(rng, t.len(), k).into_vec();
        idx.sort_unstable();
        out.extend(idx.into_iter().map(|j| (i, j)));
    }
    out
}

/// Compares the tape gradient of the scalar `f(inputs)` with central
/// differences of step `h` at the probed coordinates; returns the relative
/// error over all probes.
pub fn check_gradients<F>(inputs: &[Tensor], probes: &[(usize, usize)], h: f64, f: F) -> Result<f64>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = probes.iter().map(|&(i, k)| grads.get(vars[i]).data()[k]).collect();

    let eval = |i: usize, k: usize, delta: f64| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let mut t = t.clone();
                if j == i {
                    t.data_mut()[k] += delta;
                }
                tape.constant(t)
            })
            .collect();
        let out = f(&tape, &vars)?;
        let v = tape.item(out);
        Ok(v)
    };
    let mut numeric = Vec::with_capacity(probes.len());
    for &(i, k) in probes {
        numeric.push((eval(i, k, h)? - eval(i, k, -h)?) / (2.0 * h));
    }
    Ok(relative_error(&analytic, &numeric))
}

/// Checks every coordinate of every input.
pub fn check_all<F>(inputs: &[Tensor], h: f64, f: F) -> Result<f64>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let probes: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |k| (i, k)))
        .collect();
    check_gradients(inputs, &probes, h, f)
}

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Contracts an arbitrary-shaped output with fixed random weights so the
/// check sees a non-trivial upstream gradient.
fn contract(tape: &Tape, out: Var, seed: u64) -> Result<Var> {
    use rand::SeedableRng;
    let (r, c) = tape.shape(out);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random_tensor(&mut rng, r, c, -1.0, 1.0));
    let p = tape.mul(out, w)?;
    tape.sum(p)
}

/// Names of the primitives covered by [`primitive_suite`].
pub const PRIMITIVES: [&str; 24] = [
    "matmul",
    "add",
    "add_row_broadcast",
    "sub_col_broadcast",
    "mul",
    "mul_scalar_broadcast",
    "scale",
    "add_scalar",
    "sigmoid",
    "relu",
    "tanh",
    "exp",
    "log",
    "sum",
    "mean",
    "row_l2_normalize",
    "masked_log_softmax",
    "l1_norm",
    "mean_pool_rows",
    "max_pool_rows",
    "concat_cols",
    "stack_rows",
    "row_sum_normalize",
    "scatter_edges",
];

/// Runs `instances` random finite-difference checks of every primitive and
/// returns the worst relative error per primitive (plus `transpose` and
/// `pick`, which are exercised inside the suite).
pub fn primitive_suite(rng: &mut impl Rng, instances: usize) -> Result<Vec<(&'static str, f64)>> {
    use std::rc::Rc;
    let mut report = Vec::new();
    for &name in PRIMITIVES.iter().chain(["transpose", "pick"].iter()) {
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let (r, c) = (rng.gen_range(2..6), rng.gen_range(2..6));
            let seed = rng.gen::<u64>();
            let a = random_tensor(rng, r, c, -2.0, 2.0);
            let pos = random_tensor(rng, r, c, 0.2, 2.0);
            let err = match name {
                "matmul" => {
                    let m = rng.gen_range(2..6);
                    let b = random_tensor(rng, c, m, -2.0, 2.0);
                    check_all(&[a, b], 1e-5, |t, v| {
                        let m = t.matmul(v[0], v[1])?;
                        contract(t, m, seed)
                    })?
                }
                "add" | "mul" => {
                    let b = random_tensor(rng, r, c, -2.0, 2.0);
                    check_all(&[a, b], 1e-6, |t, v| {
                        let m = if name == "add" { t.add(v[0], v[1])? } else { t.mul(v[0], v[1])? };
                        contract(t, m, seed)
                    })?
                }
                "add_row_broadcast" => {
                    let b = random_tensor(rng, 1, c, -2.0, 2.0);
                    check_all(&[a, b], 1e-6, |t, v| {
                        let m = t.add(v[0], v[1])?;
                        contract(t, m, seed)
                    })?
                }
                "sub_col_broadcast" => {
                    let b = random_tensor(rng, r, 1, -2.0, 2.0);
                    check_all(&[a, b], 1e-6, |t, v| {
                        let m = t.sub(v[0], v[1])?;
                        contract(t, m, seed)
                    })?
                }
                "mul_scalar_broadcast" => {
                    let b = random_tensor(rng, 1, 1, -2.0, 2.0);
                    check_all(&[a, b], 1e-6, |t, v| {
                        let m = t.mul(v[0], v[1])?;
                        contract(t, m, seed)
                    })?
                }
                "log" | "row_sum_normalize" => check_all(&[pos], 1e-6, |t, v| {
                    let m = if name == "log" { t.log(v[0])? } else { t.row_sum_normalize(v[0])? };
                    contract(t, m, seed)
                })?,
                "masked_log_softmax" => {
                    let mut mask: Vec<bool> = (0..r * c).map(|_| rng.gen_bool(0.7)).collect();
                    for i in 0..r {
                        mask[i * c + rng.gen_range(0..c)] = true;
                    }
                    let mask: Rc<[bool]> = mask.into();
                    check_all(&[a], 1e-6, |t, v| {
                        let m = t.masked_log_softmax(v[0], mask.clone())?;
                        contract(t, m, seed)
                    })?
                }
                "stack_rows" | "concat_cols" => {
                    let b = random_tensor(rng, r, c, -2.0, 2.0);
                    check_all(&[a, b], 1e-6, |t, v| {
                        let m = if name == "stack_rows" {
                            t.stack_rows(v)?
                        } else {
                            t.concat_cols(v[0], v[1])?
                        };
                        contract(t, m, seed)
                    })?
                }
                "scatter_edges" => {
                    let n = r + 1;
                    let edges: Vec<(usize, usize, usize)> = (0..c + 2)
                        .map(|_| (rng.gen_range(0..c), rng.gen_range(0..n), rng.gen_range(0..n)))
                        .collect();
                    let edges: Rc<[(usize, usize, usize)]> = edges.into();
                    let m = random_tensor(rng, c, 1, 0.0, 1.0);
                    check_all(&[m], 1e-6, |t, v| {
                        let s = t.scatter_edges(v[0], edges.clone(), n)?;
                        contract(t, s, seed)
                    })?
                }
                "pick" => {
                    let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..c));
                    check_all(&[a], 1e-6, |t, v| {
                        let e = t.exp(v[0])?;
                        t.pick(e, i, j)
                    })?
                }
                _ => check_all(&[a], 1e-6, |t, v| {
                    let x = v[0];
                    let m = match name {
                        "scale" => t.scale(x, -1.7)?,
                        "add_scalar" => t.add_scalar(x, 0.3)?,
                        "sigmoid" => t.sigmoid(x)?,
                        "relu" => t.relu(x)?,
                        "tanh" => t.tanh(x)?,
                        "exp" => t.exp(x)?,
                        "sum" => {
                            let e = t.exp(x)?;
                            t.sum(e)?
                        }
                        "mean" => {
                            let e = t.exp(x)?;
                            t.mean(e)?
                        }
                        "row_l2_normalize" => t.row_l2_normalize(x)?,
                        "l1_norm" => {
                            let e = t.tanh(x)?;
                            t.l1_norm(e)?
                        }
                        "mean_pool_rows" => t.mean_pool_rows(x)?,
                        "max_pool_rows" => t.max_pool_rows(x)?,
                        "transpose" => t.transpose(x)?,
                        other => unreachable!("{other}"),
                    };
                    contract(t, m, seed)
                })?,
            };
            worst = worst.max(err);
        }
        report.push((name, worst));
    }
    Ok(report)
}
