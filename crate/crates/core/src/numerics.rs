//! Dense double-precision tensors with define-by-run reverse-mode
//! differentiation.
//!
//! A [`Tape`] owns every value produced during one forward pass. Operations
//! are methods on the tape that return lightweight [`Tensor`] handles; the
//! tape records the operation together with enough context to replay the
//! local gradient rule. [`Tape::backward`] walks the recording in reverse
//! order and accumulates gradients for every tensor that requires them.
//!
//! Tapes are meant to be short lived: build one per training step (or per
//! user inside a step), read the gradients of the parameter leaves, drop it.

use ndarray::{s, Array2, Axis};
use thiserror::Error;

/// Row-major dense matrix used for every value on the tape.
pub type Matrix = Array2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op} expects a row vector, got {rows}x{cols}")]
    NotRowVector {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op} received an empty tensor")]
    Empty { op: &'static str },
    #[error("index {index} out of range for extent {extent} in {op}")]
    OutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },
    #[error("loss must be 1x1, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("loss is not connected to any tensor that requires gradients")]
    Detached,
    #[error("backward already ran on this tape; call zero_grad first")]
    BackwardTwice,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tensor(usize);

impl Tensor {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse row vector: `(column, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    ScaleBy(Tensor, Tensor),
    DivBy(Tensor, Tensor),
    AddScalar(Tensor, Tensor),
    Sum(Tensor),
    SumRows(Tensor),
    MeanRows(Tensor),
    Concat(Tensor, Tensor),
    StackRows(Vec<Tensor>),
    VStack(Vec<Tensor>),
    SegmentSoftmax(Tensor, Vec<usize>),
    ScaleRows(Tensor, Tensor),
    SelectRows(Tensor, Vec<usize>),
    SliceCols(Tensor, usize),
    Transpose(Tensor),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Relu(Tensor),
    LeakyRelu(Tensor, f64),
    Softmax(Tensor),
    Dot(Tensor, Tensor),
    SparseMatMul(Vec<SparseRow>, Tensor),
    LogSigmoid(Tensor),
    SquaredNorm(Tensor),
    Guard(Tensor, f64),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
}

fn shape(m: &Matrix) -> (usize, usize) {
    m.dim()
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid_scalar(x: f64) -> f64 {
    // log σ(x) = -softplus(-x)
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded tensors (leaves included).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Tensor {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    fn rg(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    /// Leaf that receives a gradient (a parameter).
    pub fn param(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: f64) -> Tensor {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Tensor {
        self.constant(Array2::zeros((rows, cols)))
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        shape(&self.nodes[t.0].value)
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self, t: Tensor) -> f64 {
        self.nodes[t.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.rg(t)
    }

    /// Gradient accumulated by the last [`Tape::backward`] call.
    pub fn grad(&self, t: Tensor) -> Option<&Matrix> {
        self.grads.get(t.0).and_then(|g| g.as_ref())
    }

    /// Clears gradients so that `backward` may run again.
    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    fn row_vector(&self, op: &'static str, t: Tensor) -> Result<usize> {
        let (r, c) = self.shape(t);
        if r != 1 {
            return Err(NumericsError::NotRowVector {
                op,
                rows: r,
                cols: c,
            });
        }
        if c == 0 {
            return Err(NumericsError::Empty { op });
        }
        Ok(c)
    }

    fn same_shape(&self, op: &'static str, a: Tensor, b: Tensor) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(NumericsError::Shape {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    fn is_scalar(&self, op: &'static str, t: Tensor) -> Result<()> {
        let s = self.shape(t);
        if s != (1, 1) {
            return Err(NumericsError::Shape {
                op,
                lhs: s,
                rhs: (1, 1),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(NumericsError::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let v = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    /// Multiplies by a fixed constant.
    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        let v = self.value(a) * c;
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    /// Multiplies every entry of `a` by the 1x1 tensor `s`.
    pub fn scale_by(&mut self, a: Tensor, s: Tensor) -> Result<Tensor> {
        self.is_scalar("scale_by", s)?;
        let v = self.value(a) * self.item(s);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(v, Op::ScaleBy(a, s), rg))
    }

    /// Divides every entry of `a` by the 1x1 tensor `s`.
    pub fn div_by(&mut self, a: Tensor, s: Tensor) -> Result<Tensor> {
        self.is_scalar("div_by", s)?;
        let v = self.value(a) / self.item(s);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(v, Op::DivBy(a, s), rg))
    }

    /// Adds the 1x1 tensor `s` to every entry of `a`.
    pub fn add_scalar(&mut self, a: Tensor, s: Tensor) -> Result<Tensor> {
        self.is_scalar("add_scalar", s)?;
        let v = self.value(a) + self.item(s);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(v, Op::AddScalar(a, s), rg))
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::Sum(a), rg)
    }

    /// Column-wise sum: n x k -> 1 x k.
    pub fn sum_rows(&mut self, a: Tensor) -> Result<Tensor> {
        if self.shape(a).0 == 0 {
            return Err(NumericsError::Empty { op: "sum_rows" });
        }
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        let rg = self.rg(a);
        Ok(self.push(v, Op::SumRows(a), rg))
    }

    /// Column-wise mean: n x k -> 1 x k.
    pub fn mean_rows(&mut self, a: Tensor) -> Result<Tensor> {
        let n = self.shape(a).0;
        if n == 0 {
            return Err(NumericsError::Empty { op: "mean_rows" });
        }
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0)) / n as f64;
        let rg = self.rg(a);
        Ok(self.push(v, Op::MeanRows(a), rg))
    }

    /// Juxtaposes two row vectors.
    pub fn concat(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let p = self.row_vector("concat", a)?;
        let q = self.row_vector("concat", b)?;
        let mut v = Array2::zeros((1, p + q));
        v.slice_mut(s![.., ..p]).assign(self.value(a));
        v.slice_mut(s![.., p..]).assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Concat(a, b), rg))
    }

    /// Stacks row vectors of equal width into a matrix.
    pub fn stack_rows(&mut self, rows: &[Tensor]) -> Result<Tensor> {
        let first = *rows
            .first()
            .ok_or(NumericsError::Empty { op: "stack_rows" })?;
        let width = self.row_vector("stack_rows", first)?;
        let mut v = Array2::zeros((rows.len(), width));
        for (i, &r) in rows.iter().enumerate() {
            if self.shape(r) != (1, width) {
                return Err(NumericsError::Shape {
                    op: "stack_rows",
                    lhs: (1, width),
                    rhs: self.shape(r),
                });
            }
            v.row_mut(i).assign(&self.value(r).row(0));
        }
        let rg = rows.iter().any(|&r| self.rg(r));
        Ok(self.push(v, Op::StackRows(rows.to_vec()), rg))
    }

    /// Stacks matrices of equal width on top of each other.
    pub fn vstack(&mut self, parts: &[Tensor]) -> Result<Tensor> {
        let first = *parts.first().ok_or(NumericsError::Empty { op: "vstack" })?;
        let width = self.shape(first).1;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if c != width {
                return Err(NumericsError::Shape {
                    op: "vstack",
                    lhs: self.shape(first),
                    rhs: (r, c),
                });
            }
            total += r;
        }
        let mut v = Array2::zeros((total, width));
        let mut at = 0;
        for &p in parts {
            let r = self.shape(p).0;
            v.slice_mut(s![at..at + r, ..]).assign(self.value(p));
            at += r;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(v, Op::VStack(parts.to_vec()), rg))
    }

    /// Softmax of a column vector taken separately within each segment:
    /// entry `i` belongs to segment `segments[i]`.
    pub fn segment_softmax(&mut self, a: Tensor, segments: &[usize]) -> Result<Tensor> {
        let (n, c) = self.shape(a);
        if c != 1 || n != segments.len() {
            return Err(NumericsError::Shape {
                op: "segment_softmax",
                lhs: (n, c),
                rhs: (segments.len(), 1),
            });
        }
        if n == 0 {
            return Err(NumericsError::Empty {
                op: "segment_softmax",
            });
        }
        let x = self.value(a);
        let n_seg = segments.iter().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (i, &sgm) in segments.iter().enumerate() {
            max[sgm] = max[sgm].max(x[[i, 0]]);
        }
        let mut v = Array2::zeros((n, 1));
        let mut total = vec![0.0; n_seg];
        for (i, &sgm) in segments.iter().enumerate() {
            let e = (x[[i, 0]] - max[sgm]).exp();
            v[[i, 0]] = e;
            total[sgm] += e;
        }
        for (i, &sgm) in segments.iter().enumerate() {
            v[[i, 0]] /= total[sgm];
        }
        let rg = self.rg(a);
        Ok(self.push(v, Op::SegmentSoftmax(a, segments.to_vec()), rg))
    }

    /// Multiplies row `i` of `m` by `w[i]`, where `w` is a column vector.
    pub fn scale_rows(&mut self, m: Tensor, w: Tensor) -> Result<Tensor> {
        let (n, k) = self.shape(m);
        if self.shape(w) != (n, 1) {
            return Err(NumericsError::Shape {
                op: "scale_rows",
                lhs: (n, k),
                rhs: self.shape(w),
            });
        }
        let v = self.value(m) * self.value(w);
        let rg = self.rg(m) || self.rg(w);
        Ok(self.push(v, Op::ScaleRows(m, w), rg))
    }

    /// Gathers rows of `a` (repetition allowed).
    pub fn select_rows(&mut self, a: Tensor, idx: &[usize]) -> Result<Tensor> {
        if idx.is_empty() {
            return Err(NumericsError::Empty { op: "select_rows" });
        }
        let (n, k) = self.shape(a);
        let mut v = Array2::zeros((idx.len(), k));
        for (i, &r) in idx.iter().enumerate() {
            if r >= n {
                return Err(NumericsError::OutOfRange {
                    op: "select_rows",
                    index: r,
                    extent: n,
                });
            }
            v.row_mut(i).assign(&self.value(a).row(r));
        }
        let rg = self.rg(a);
        Ok(self.push(v, Op::SelectRows(a, idx.to_vec()), rg))
    }

    /// Columns `[start, end)` of `a`.
    pub fn slice_cols(&mut self, a: Tensor, start: usize, end: usize) -> Result<Tensor> {
        let (_, k) = self.shape(a);
        if start >= end || end > k {
            return Err(NumericsError::OutOfRange {
                op: "slice_cols",
                index: end,
                extent: k,
            });
        }
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        let rg = self.rg(a);
        Ok(self.push(v, Op::SliceCols(a, start), rg))
    }

    pub fn transpose(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).t().to_owned();
        let rg = self.rg(a);
        self.push(v, Op::Transpose(a), rg)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(sigmoid_scalar);
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(f64::tanh);
        let rg = self.rg(a);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Tensor, slope: f64) -> Tensor {
        let v = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(v, Op::LeakyRelu(a, slope), rg)
    }

    /// Softmax over a row vector, computed after subtracting the maximum.
    pub fn softmax(&mut self, a: Tensor) -> Result<Tensor> {
        self.row_vector("softmax", a)?;
        let x = self.value(a);
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = x.mapv(|v| (v - max).exp());
        let z = e.sum();
        let v = e / z;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Softmax(a), rg))
    }

    /// Inner product of two row vectors, as a 1x1 tensor.
    pub fn dot(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.row_vector("dot", a)?;
        self.same_shape("dot", a, b)?;
        let d = (self.value(a) * self.value(b)).sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Array2::from_elem((1, 1), d), Op::Dot(a, b), rg))
    }

    /// `X · W` where the rows of `X` are given sparsely.
    pub fn sparse_matmul(&mut self, rows: Vec<SparseRow>, w: Tensor) -> Result<Tensor> {
        if rows.is_empty() {
            return Err(NumericsError::Empty {
                op: "sparse_matmul",
            });
        }
        let (n_in, k) = self.shape(w);
        let mut v = Array2::zeros((rows.len(), k));
        for (i, row) in rows.iter().enumerate() {
            for &(c, x) in row {
                if c >= n_in {
                    return Err(NumericsError::OutOfRange {
                        op: "sparse_matmul",
                        index: c,
                        extent: n_in,
                    });
                }
                v.row_mut(i).scaled_add(x, &self.value(w).row(c));
            }
        }
        let rg = self.rg(w);
        Ok(self.push(v, Op::SparseMatMul(rows, w), rg))
    }

    /// Elementwise `ln σ(x)`, stable for large |x|.
    pub fn log_sigmoid(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).mapv(log_sigmoid_scalar);
        let rg = self.rg(a);
        self.push(v, Op::LogSigmoid(a), rg)
    }

    /// Squared Frobenius norm, as a 1x1 tensor.
    pub fn squared_norm(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).iter().map(|x| x * x).sum::<f64>();
        let rg = self.rg(a);
        self.push(Array2::from_elem((1, 1), v), Op::SquaredNorm(a), rg)
    }

    /// `sign(x) * max(|x|, eps)` elementwise, with sign(0) = +1.
    ///
    /// Keeps a denominator away from zero while preserving its sign.
    pub fn guard(&mut self, a: Tensor, eps: f64) -> Tensor {
        let v = self.value(a).mapv(|x| {
            let sign = if x < 0.0 { -1.0 } else { 1.0 };
            sign * x.abs().max(eps)
        });
        let rg = self.rg(a);
        self.push(v, Op::Guard(a, eps), rg)
    }

    /// Reverse pass from the scalar `loss`.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        if self.backward_done {
            return Err(NumericsError::BackwardTwice);
        }
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(NumericsError::NonScalarLoss { rows: r, cols: c });
        }
        if !self.rg(loss) {
            return Err(NumericsError::Detached);
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[i] = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let nodes = &self.nodes;
        let val = |t: Tensor| &nodes[t.0].value;
        let mut acc = |t: Tensor, delta: Matrix| {
            if !nodes[t.0].requires_grad {
                return;
            }
            match &mut grads[t.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        let out = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.dot(&val(*b).t()));
                acc(*b, val(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                acc(*a, g * val(*b));
                acc(*b, g * val(*a));
            }
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::ScaleBy(a, s) => {
                let sv = val(*s)[[0, 0]];
                acc(*a, g * sv);
                acc(*s, Array2::from_elem((1, 1), (g * val(*a)).sum()));
            }
            Op::DivBy(a, s) => {
                let sv = val(*s)[[0, 0]];
                acc(*a, g / sv);
                let ds = -(g * val(*a)).sum() / (sv * sv);
                acc(*s, Array2::from_elem((1, 1), ds));
            }
            Op::AddScalar(a, s) => {
                acc(*a, g.clone());
                acc(*s, Array2::from_elem((1, 1), g.sum()));
            }
            Op::Sum(a) => {
                let gv = g[[0, 0]];
                acc(*a, Array2::from_elem(val(*a).dim(), gv));
            }
            Op::SumRows(a) => {
                let n = val(*a).nrows();
                let expanded = g
                    .broadcast((n, g.ncols()))
                    .expect("row broadcast")
                    .to_owned();
                acc(*a, expanded);
            }
            Op::MeanRows(a) => {
                let n = val(*a).nrows();
                let expanded = g
                    .broadcast((n, g.ncols()))
                    .expect("row broadcast")
                    .to_owned()
                    / n as f64;
                acc(*a, expanded);
            }
            Op::Concat(a, b) => {
                let p = val(*a).ncols();
                acc(*a, g.slice(s![.., ..p]).to_owned());
                acc(*b, g.slice(s![.., p..]).to_owned());
            }
            Op::VStack(parts) => {
                let mut at = 0;
                for &p in parts {
                    let r = val(p).nrows();
                    acc(p, g.slice(s![at..at + r, ..]).to_owned());
                    at += r;
                }
            }
            Op::SegmentSoftmax(a, segments) => {
                let n_seg = segments.iter().max().map_or(0, |m| m + 1);
                let mut inner = vec![0.0; n_seg];
                for (i, &sgm) in segments.iter().enumerate() {
                    inner[sgm] += g[[i, 0]] * out[[i, 0]];
                }
                let d = Array2::from_shape_fn(out.dim(), |(i, _)| {
                    out[[i, 0]] * (g[[i, 0]] - inner[segments[i]])
                });
                acc(*a, d);
            }
            Op::ScaleRows(m, w) => {
                acc(*m, g * val(*w));
                acc(*w, (g * val(*m)).sum_axis(Axis(1)).insert_axis(Axis(1)));
            }
            Op::StackRows(rows) => {
                for (r, &t) in rows.iter().enumerate() {
                    acc(t, g.row(r).to_owned().insert_axis(Axis(0)));
                }
            }
            Op::SelectRows(a, idx) => {
                let mut d = Array2::zeros(val(*a).dim());
                for (r, &src) in idx.iter().enumerate() {
                    let mut row = d.row_mut(src);
                    row += &g.row(r);
                }
                acc(*a, d);
            }
            Op::SliceCols(a, start) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, d);
            }
            Op::Transpose(a) => acc(*a, g.t().to_owned()),
            Op::Sigmoid(a) => acc(*a, g * &out.mapv(|y| y * (1.0 - y))),
            Op::Tanh(a) => acc(*a, g * &out.mapv(|y| 1.0 - y * y)),
            Op::Relu(a) => acc(*a, g * &val(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 })),
            Op::LeakyRelu(a, slope) => acc(
                *a,
                g * &val(*a).mapv(|x| if x > 0.0 { 1.0 } else { *slope }),
            ),
            Op::Softmax(a) => {
                let inner = (g * out).sum();
                acc(*a, out * &(g - inner));
            }
            Op::Dot(a, b) => {
                let gv = g[[0, 0]];
                acc(*a, val(*b) * gv);
                acc(*b, val(*a) * gv);
            }
            Op::SparseMatMul(rows, w) => {
                let mut d = Array2::zeros(val(*w).dim());
                for (r, row) in rows.iter().enumerate() {
                    for &(c, x) in row {
                        d.row_mut(c).scaled_add(x, &g.row(r));
                    }
                }
                acc(*w, d);
            }
            Op::LogSigmoid(a) => acc(*a, g * &val(*a).mapv(|x| sigmoid_scalar(-x))),
            Op::SquaredNorm(a) => acc(*a, val(*a) * (2.0 * g[[0, 0]])),
            Op::Guard(a, eps) => acc(
                *a,
                g * &val(*a).mapv(|x| if x.abs() > *eps { 1.0 } else { 0.0 }),
            ),
        }
    }
}

/// Central finite-difference gradient of a scalar function of one matrix.
///
/// Used by tests as an independent check on the analytic gradients.
pub fn finite_difference<F>(x: &Matrix, step: f64, mut f: F) -> Matrix
where
    F: FnMut(&Matrix) -> f64,
{
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + step;
        let up = f(&probe);
        probe[[r, c]] = orig - step;
        let down = f(&probe);
        probe[[r, c]] = orig;
        grad[[r, c]] = (up - down) / (2.0 * step);
    }
    grad
}

/// Relative error `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
