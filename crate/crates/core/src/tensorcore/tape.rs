use std::cell::{Ref, RefCell};
use std::rc::Rc;

use super::{matmul_nt, matmul_tn, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the right operand of a binary elementwise op is broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bc {
    Same,
    /// `1 × cols`, repeated over rows.
    Row,
    /// `rows × 1`, repeated over columns.
    Col,
    Scalar,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Bc),
    Sub(Var, Var, Bc),
    Mul(Var, Var, Bc),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    RowL2Normalize(Var, Vec<f64>),
    MaskedLogSoftmax(Var, Rc<[bool]>),
    L1(Var),
    MeanPoolRows(Var),
    MaxPoolRows(Var, Vec<usize>),
    ConcatCols(Var, Var),
    StackRows(Vec<Var>),
    Transpose(Var),
    RowSumNormalize(Var, Vec<f64>),
    ScatterEdges(Var, Rc<[(usize, usize, usize)]>),
    Pick(Var, usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass; `backward` replays them in
/// reverse. Single-threaded by construction.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Gradients of one backward pass, indexed by [`Var`]. Only leaves keep
/// their gradient; intermediate values read as zero.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient w.r.t. `v`; exactly zero when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        let (r, c) = self.shapes[v.0];
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(r, c))
    }
}

const NORM_EPS: f64 = 1e-12;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

fn broadcast(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Bc> {
    Ok(if a.shape() == b.shape() {
        Bc::Same
    } else if b.shape() == (1, 1) {
        Bc::Scalar
    } else if b.rows() == 1 && b.cols() == a.cols() {
        Bc::Row
    } else if b.cols() == 1 && b.rows() == a.rows() {
        Bc::Col
    } else {
        return Err(shape_err(op, a, b));
    })
}

#[inline]
fn bidx(bc: Bc, i: usize, j: usize, cols: usize) -> usize {
    match bc {
        Bc::Same => i * cols + j,
        Bc::Row => j,
        Bc::Col => i,
        Bc::Scalar => 0,
    }
}

/// Sums a full-shape gradient down to the broadcast operand's shape.
fn reduce_broadcast(g: &Tensor, bc: Bc, shape: (usize, usize)) -> Tensor {
    if bc == Bc::Same {
        return g.clone();
    }
    let mut out = Tensor::zeros(shape.0, shape.1);
    let cols = g.cols();
    for i in 0..g.rows() {
        for j in 0..cols {
            out.data_mut()[bidx(bc, i, j, cols)] += g.data()[i * cols + j];
        }
    }
    out
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::raw(t.rows(), t.cols(), t.data().iter().map(|&x| f(x)).collect())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if value.data().iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(name));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(nodes.len() - 1))
    }

    fn rg(&self, vs: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vs.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// A trainable leaf.
    pub fn param(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true, "param").expect("tensors are finite")
    }

    /// A leaf that receives no gradient.
    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false, "constant").expect("tensors are finite")
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let out = {
            let (x, y) = (self.value(a), self.value(b));
            x.matmul(&y)?
        };
        self.push(out, Op::MatMul(a, b), self.rg(&[a, b]), "matmul")
    }

    fn binary(&self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, Bc)> {
        let (x, y) = (self.value(a), self.value(b));
        let bc = broadcast(name, &x, &y)?;
        let cols = x.cols();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.rows() {
            for j in 0..cols {
                out.push(f(x.data()[i * cols + j], y.data()[bidx(bc, i, j, cols)]));
            }
        }
        Ok((Tensor::raw(x.rows(), cols, out), bc))
    }

    /// `a + b`; `b` may be a row vector, column vector or scalar.
    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let (t, bc) = self.binary(a, b, "add", |x, y| x + y)?;
        self.push(t, Op::Add(a, b, bc), self.rg(&[a, b]), "add")
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let (t, bc) = self.binary(a, b, "sub", |x, y| x - y)?;
        self.push(t, Op::Sub(a, b, bc), self.rg(&[a, b]), "sub")
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let (t, bc) = self.binary(a, b, "mul", |x, y| x * y)?;
        self.push(t, Op::Mul(a, b, bc), self.rg(&[a, b]), "mul")
    }

    pub fn scale(&self, a: Var, c: f64) -> Result<Var> {
        let t = map(&self.value(a), |x| x * c);
        self.push(t, Op::Scale(a, c), self.rg(&[a]), "scale")
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Result<Var> {
        let t = map(&self.value(a), |x| x + c);
        self.push(t, Op::AddScalar(a), self.rg(&[a]), "add_scalar")
    }

    /// `1 - a`.
    pub fn one_minus(&self, a: Var) -> Result<Var> {
        let n = self.scale(a, -1.0)?;
        self.add_scalar(n, 1.0)
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        let t = map(&self.value(a), sigmoid);
        self.push(t, Op::Sigmoid(a), self.rg(&[a]), "sigmoid")
    }

    pub fn relu(&self, a: Var) -> Result<Var> {
        let t = map(&self.value(a), |x| x.max(0.0));
        self.push(t, Op::Relu(a), self.rg(&[a]), "relu")
    }

    pub fn tanh(&self, a: Var) -> Result<Var> {
        let t = map(&self.value(a), f64::tanh);
        self.push(t, Op::Tanh(a), self.rg(&[a]), "tanh")
    }

    pub fn exp(&self, a: Var) -> Result<Var> {
        let t = map(&self.value(a), f64::exp);
        self.push(t, Op::Exp(a), self.rg(&[a]), "exp")
    }

    pub fn log(&self, a: Var) -> Result<Var> {
        let t = map(&self.value(a), f64::ln);
        self.push(t, Op::Log(a), self.rg(&[a]), "log")
    }

    /// Sum of all entries, as a 1×1 tensor.
    pub fn sum(&self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar_unchecked(s), Op::Sum(a), self.rg(&[a]), "sum")
    }

    pub fn mean(&self, a: Var) -> Result<Var> {
        let s = {
            let x = self.value(a);
            x.data().iter().sum::<f64>() / x.len().max(1) as f64
        };
        self.push(Tensor::scalar_unchecked(s), Op::Mean(a), self.rg(&[a]), "mean")
    }

    /// Each row divided by `max(‖row‖₂, 1e-12)`.
    pub fn row_l2_normalize(&self, a: Var) -> Result<Var> {
        let (t, norms) = {
            let x = self.value(a);
            let mut out = x.clone();
            let mut norms = Vec::with_capacity(x.rows());
            for i in 0..x.rows() {
                let n = x.row_slice(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(NORM_EPS);
                for v in &mut out.data_mut()[i * x.cols()..(i + 1) * x.cols()] {
                    *v /= n;
                }
                norms.push(n);
            }
            (out, norms)
        };
        self.push(t, Op::RowL2Normalize(a, norms), self.rg(&[a]), "row_l2_normalize")
    }

    /// Row-wise log-softmax over the entries where `mask` is true; masked-out
    /// entries produce 0 and receive no gradient. Every row needs at least
    /// one unmasked entry.
    pub fn masked_log_softmax(&self, a: Var, mask: Rc<[bool]>) -> Result<Var> {
        let t = {
            let x = self.value(a);
            if mask.len() != x.len() {
                return Err(TensorError::Shape {
                    op: "masked_log_softmax",
                    lhs: x.shape(),
                    rhs: (mask.len(), 1),
                });
            }
            let cols = x.cols();
            let mut out = vec![0.0; x.len()];
            for i in 0..x.rows() {
                let idx = || (i * cols..(i + 1) * cols).filter(|&k| mask[k]);
                let m = idx().map(|k| x.data()[k]).fold(f64::NEG_INFINITY, f64::max);
                if m == f64::NEG_INFINITY {
                    return Err(TensorError::NonFinite("masked_log_softmax (empty row)"));
                }
                let lse = m + idx().map(|k| (x.data()[k] - m).exp()).sum::<f64>().ln();
                for k in idx() {
                    out[k] = x.data()[k] - lse;
                }
            }
            Tensor::raw(x.rows(), cols, out)
        };
        self.push(t, Op::MaskedLogSoftmax(a, mask), self.rg(&[a]), "masked_log_softmax")
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        self.masked_log_softmax(a, vec![true; n].into())
    }

    pub fn softmax(&self, a: Var) -> Result<Var> {
        let l = self.log_softmax(a)?;
        self.exp(l)
    }

    /// `Σ |a|`; subgradient 0 at 0.
    pub fn l1_norm(&self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().map(|v| v.abs()).sum();
        self.push(Tensor::scalar_unchecked(s), Op::L1(a), self.rg(&[a]), "l1_norm")
    }

    /// Column means, `V×d → 1×d`.
    pub fn mean_pool_rows(&self, a: Var) -> Result<Var> {
        let t = {
            let x = self.value(a);
            let mut out = vec![0.0; x.cols()];
            for i in 0..x.rows() {
                for (o, v) in out.iter_mut().zip(x.row_slice(i)) {
                    *o += v;
                }
            }
            let n = x.rows().max(1) as f64;
            out.iter_mut().for_each(|o| *o /= n);
            Tensor::raw(1, x.cols(), out)
        };
        self.push(t, Op::MeanPoolRows(a), self.rg(&[a]), "mean_pool_rows")
    }

    /// Column maxima, `V×d → 1×d`; the gradient goes to the first maximal row.
    pub fn max_pool_rows(&self, a: Var) -> Result<Var> {
        let (t, arg) = {
            let x = self.value(a);
            if x.rows() == 0 {
                return Err(TensorError::Shape {
                    op: "max_pool_rows",
                    lhs: x.shape(),
                    rhs: (1, x.cols()),
                });
            }
            let mut out = x.row_slice(0).to_vec();
            let mut arg = vec![0; x.cols()];
            for i in 1..x.rows() {
                for (j, v) in x.row_slice(i).iter().enumerate() {
                    if *v > out[j] {
                        out[j] = *v;
                        arg[j] = i;
                    }
                }
            }
            (Tensor::raw(1, x.cols(), out), arg)
        };
        self.push(t, Op::MaxPoolRows(a, arg), self.rg(&[a]), "max_pool_rows")
    }

    pub fn concat_cols(&self, a: Var, b: Var) -> Result<Var> {
        let t = {
            let (x, y) = (self.value(a), self.value(b));
            if x.rows() != y.rows() {
                return Err(shape_err("concat_cols", &x, &y));
            }
            let mut out = Vec::with_capacity(x.len() + y.len());
            for i in 0..x.rows() {
                out.extend_from_slice(x.row_slice(i));
                out.extend_from_slice(y.row_slice(i));
            }
            Tensor::raw(x.rows(), x.cols() + y.cols(), out)
        };
        self.push(t, Op::ConcatCols(a, b), self.rg(&[a, b]), "concat_cols")
    }

    /// Vertical concatenation of tensors with equal column counts.
    pub fn stack_rows(&self, parts: &[Var]) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let cols = parts.first().map(|p| nodes[p.0].value.cols()).unwrap_or(0);
            let mut out = Vec::new();
            let mut rows = 0;
            for p in parts {
                let x = &nodes[p.0].value;
                if x.cols() != cols {
                    return Err(TensorError::Shape {
                        op: "stack_rows",
                        lhs: (rows, cols),
                        rhs: x.shape(),
                    });
                }
                out.extend_from_slice(x.data());
                rows += x.rows();
            }
            Tensor::raw(rows, cols, out)
        };
        self.push(t, Op::StackRows(parts.to_vec()), self.rg(parts), "stack_rows")
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose();
        self.push(t, Op::Transpose(a), self.rg(&[a]), "transpose")
    }

    /// Each row divided by its sum; rows must have positive sums.
    pub fn row_sum_normalize(&self, a: Var) -> Result<Var> {
        let (t, sums) = {
            let x = self.value(a);
            let mut out = x.clone();
            let mut sums = Vec::with_capacity(x.rows());
            for i in 0..x.rows() {
                let s: f64 = x.row_slice(i).iter().sum();
                if s <= 0.0 {
                    return Err(TensorError::NonFinite("row_sum_normalize (non-positive row sum)"));
                }
                for v in &mut out.data_mut()[i * x.cols()..(i + 1) * x.cols()] {
                    *v /= s;
                }
                sums.push(s);
            }
            (out, sums)
        };
        self.push(t, Op::RowSumNormalize(a, sums), self.rg(&[a]), "row_sum_normalize")
    }

    /// Builds an `n×n` matrix from entries of the vector `m`: for each
    /// `(k, src, dst)` in `entries`, `out[src][dst] += m[k]`.
    pub fn scatter_edges(&self, m: Var, entries: Rc<[(usize, usize, usize)]>, n: usize) -> Result<Var> {
        let t = {
            let x = self.value(m);
            let mut out = vec![0.0; n * n];
            for &(k, s, d) in entries.iter() {
                if k >= x.len() || s >= n || d >= n {
                    return Err(TensorError::Shape {
                        op: "scatter_edges",
                        lhs: x.shape(),
                        rhs: (n, n),
                    });
                }
                out[s * n + d] += x.data()[k];
            }
            Tensor::raw(n, n, out)
        };
        self.push(t, Op::ScatterEdges(m, entries), self.rg(&[m]), "scatter_edges")
    }

    /// Entry `(i, j)` as a 1×1 tensor.
    pub fn pick(&self, a: Var, i: usize, j: usize) -> Result<Var> {
        let v = {
            let x = self.value(a);
            if i >= x.rows() || j >= x.cols() {
                return Err(TensorError::Shape {
                    op: "pick",
                    lhs: x.shape(),
                    rhs: (i, j),
                });
            }
            x.get(i, j)
        };
        self.push(Tensor::scalar_unchecked(v), Op::Pick(a, i, j), self.rg(&[a]), "pick")
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Gradients> {
        let shape = self.shape(out);
        if shape != (1, 1) {
            return Err(TensorError::Shape {
                op: "backward",
                lhs: shape,
                rhs: (1, 1),
            });
        }
        self.backward_from(out, Tensor::scalar(1.0))
    }

    /// Reverse pass seeded with an arbitrary upstream gradient for `out`.
    pub fn backward_from(&self, out: Var, seed: Tensor) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[out.0].value.shape() != seed.shape() {
            return Err(shape_err("backward_from", &nodes[out.0].value, &seed));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut send = |v: Var, t: Tensor| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.accumulate(&t),
                    slot => *slot = Some(t),
                }
            };
            let val = |v: Var| &nodes[v.0].value;
            let y = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (x, w) = (val(*a), val(*b));
                    let (n, k, m) = (x.rows(), x.cols(), w.cols());
                    if nodes[a.0].requires_grad {
                        send(*a, Tensor::raw(n, k, matmul_nt(g.data(), w.data(), n, m, k)));
                    }
                    if nodes[b.0].requires_grad {
                        send(*b, Tensor::raw(k, m, matmul_tn(x.data(), g.data(), n, k, m)));
                    }
                }
                Op::Add(a, b, bc) => {
                    send(*b, reduce_broadcast(&g, *bc, val(*b).shape()));
                    send(*a, g);
                }
                Op::Sub(a, b, bc) => {
                    let neg = map(&g, |v| -v);
                    send(*b, reduce_broadcast(&neg, *bc, val(*b).shape()));
                    send(*a, g);
                }
                Op::Mul(a, b, bc) => {
                    let (x, w) = (val(*a), val(*b));
                    let cols = x.cols();
                    if nodes[a.0].requires_grad {
                        let mut ga = g.clone();
                        for r in 0..x.rows() {
                            for c in 0..cols {
                                ga.data_mut()[r * cols + c] *= w.data()[bidx(*bc, r, c, cols)];
                            }
                        }
                        send(*a, ga);
                    }
                    if nodes[b.0].requires_grad {
                        let mut gb = g.clone();
                        for (o, v) in gb.data_mut().iter_mut().zip(x.data()) {
                            *o *= v;
                        }
                        send(*b, reduce_broadcast(&gb, *bc, w.shape()));
                    }
                }
                Op::Scale(a, c) => send(*a, map(&g, |v| v * c)),
                Op::AddScalar(a) => send(*a, g),
                Op::Sigmoid(a) => send(*a, zip(&g, y, |g, s| g * s * (1.0 - s))),
                Op::Relu(a) => send(*a, zip(&g, val(*a), |g, x| if x > 0.0 { g } else { 0.0 })),
                Op::Tanh(a) => send(*a, zip(&g, y, |g, t| g * (1.0 - t * t))),
                Op::Exp(a) => send(*a, zip(&g, y, |g, e| g * e)),
                Op::Log(a) => send(*a, zip(&g, val(*a), |g, x| g / x)),
                Op::Sum(a) => {
                    let (r, c) = val(*a).shape();
                    send(*a, Tensor::filled(r, c, g.item()));
                }
                Op::Mean(a) => {
                    let (r, c) = val(*a).shape();
                    send(*a, Tensor::filled(r, c, g.item() / (r * c).max(1) as f64));
                }
                Op::RowL2Normalize(a, norms) => {
                    let cols = y.cols();
                    let mut ga = g.clone();
                    for (r, &n) in norms.iter().enumerate() {
                        let yr = y.row_slice(r);
                        let gr = g.row_slice(r);
                        let out = &mut ga.data_mut()[r * cols..(r + 1) * cols];
                        if n > NORM_EPS {
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for ((o, yv), gv) in out.iter_mut().zip(yr).zip(gr) {
                                *o = (gv - yv * dot) / n;
                            }
                        } else {
                            out.iter_mut().for_each(|o| *o /= NORM_EPS);
                        }
                    }
                    send(*a, ga);
                }
                Op::MaskedLogSoftmax(a, mask) => {
                    let cols = y.cols();
                    let mut ga = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let idx = (r * cols..(r + 1) * cols).filter(|&k| mask[k]);
                        let gsum: f64 = idx.clone().map(|k| g.data()[k]).sum();
                        for k in idx {
                            ga[k] = g.data()[k] - y.data()[k].exp() * gsum;
                        }
                    }
                    send(*a, Tensor::raw(y.rows(), cols, ga));
                }
                Op::L1(a) => send(*a, map(val(*a), |x| if x > 0.0 { g.item() } else if x < 0.0 { -g.item() } else { 0.0 })),
                Op::MeanPoolRows(a) => {
                    let (r, c) = val(*a).shape();
                    let n = r.max(1) as f64;
                    send(*a, Tensor::from_fn(r, c, |_, j| g.data()[j] / n));
                }
                Op::MaxPoolRows(a, arg) => {
                    let (r, c) = val(*a).shape();
                    let mut ga = Tensor::zeros(r, c);
                    for (j, &row) in arg.iter().enumerate() {
                        ga.data_mut()[row * c + j] += g.data()[j];
                    }
                    send(*a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (val(*a).cols(), val(*b).cols());
                    let rows = g.rows();
                    let mut ga = Vec::with_capacity(rows * ca);
                    let mut gb = Vec::with_capacity(rows * cb);
                    for r in 0..rows {
                        let gr = g.row_slice(r);
                        ga.extend_from_slice(&gr[..ca]);
                        gb.extend_from_slice(&gr[ca..]);
                    }
                    send(*a, Tensor::raw(rows, ca, ga));
                    send(*b, Tensor::raw(rows, cb, gb));
                }
                Op::StackRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let r = val(*p).rows();
                        let slice = g.data()[offset * cols..(offset + r) * cols].to_vec();
                        send(*p, Tensor::raw(r, cols, slice));
                        offset += r;
                    }
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::RowSumNormalize(a, sums) => {
                    let cols = y.cols();
                    let mut ga = g.clone();
                    for (r, &s) in sums.iter().enumerate() {
                        let dot: f64 = y.row_slice(r).iter().zip(g.row_slice(r)).map(|(a, b)| a * b).sum();
                        for o in &mut ga.data_mut()[r * cols..(r + 1) * cols] {
                            *o = (*o - dot) / s;
                        }
                    }
                    send(*a, ga);
                }
                Op::ScatterEdges(m, entries) => {
                    let n = g.cols();
                    let (r, c) = val(*m).shape();
                    let mut gm = Tensor::zeros(r, c);
                    for &(k, s, d) in entries.iter() {
                        gm.data_mut()[k] += g.data()[s * n + d];
                    }
                    send(*m, gm);
                }
                Op::Pick(a, r, c) => {
                    let (rows, cols) = val(*a).shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    ga.data_mut()[r * cols + c] = g.item();
                    send(*a, ga);
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::raw(a.rows(), a.cols(), a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect())
}

impl Tensor {
    fn scalar_unchecked(v: f64) -> Tensor {
        Tensor::raw(1, 1, vec![v])
    }
}
