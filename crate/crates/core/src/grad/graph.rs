//! Reverse-mode differentiation over a fixed vocabulary of matrix ops.
//!
//! A [`Graph`] is an append-only tape: every op pushes a node whose parents
//! already exist, so node order is a topological order and backward is a
//! single reverse sweep. Shapes are validated when a node is built.

use crate::error::{shape_err, Error, Result};
use crate::tensor::Matrix;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Param,
    Const,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `w · x + b`; `b` is either `rows × 1` (broadcast over columns) or full shape.
    Affine {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    MovingAverage {
        x: NodeId,
        kernel: usize,
    },
    /// `argmax[i * cols + j]` is the source row of output `(i, j)`.
    MaxPoolTime {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Mse(NodeId, NodeId),
    ScaleAdd {
        a: NodeId,
        s1: f64,
        b: NodeId,
        s2: f64,
    },
    Tanh(NodeId),
    /// `max(x, floor)`; `clamped[k]` marks entries held at the floor.
    ClampMin {
        x: NodeId,
        clamped: Vec<bool>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `id`, or `None` when the node
    /// does not influence the loss through a differentiable path.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but returns zeros of `shape` when absent.
    pub fn get_or_zeros(&self, id: NodeId, shape: (usize, usize)) -> Matrix {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value.get(0, 0)
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Param, true)
    }

    /// Non-trainable leaf; backward never produces a gradient for it.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Const, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(shape_err!("matmul {m}x{k} by {k2}x{n}"));
        }
        let value = matmul_values(self.value(a), self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let value = zip_values(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn elementwise_mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("elementwise_mul", a, b)?;
        let value = zip_values(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// `w · x + b` where `b` is `rows(w) × 1` (broadcast across the columns
    /// of `x`) or exactly the output shape.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.shape(w);
        let (k2, n) = self.shape(x);
        if k != k2 {
            return Err(shape_err!("affine weight {m}x{k} applied to {k2}x{n}"));
        }
        let bshape = self.shape(b);
        if bshape != (m, 1) && bshape != (m, n) {
            return Err(shape_err!(
                "affine bias {}x{} for output {m}x{n}",
                bshape.0,
                bshape.1
            ));
        }
        let mut value = matmul_values(self.value(w), self.value(x));
        let bias = self.value(b);
        for r in 0..m {
            let row = value.row_mut(r);
            if bshape.1 == 1 {
                let bv = bias.get(r, 0);
                row.iter_mut().for_each(|v| *v += bv);
            } else {
                row.iter_mut().zip(bias.row(r)).for_each(|(v, bv)| *v += bv);
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(value, Op::Affine { x, w, b }, rg))
    }

    /// Centered moving average along rows (time), per column, with the first
    /// and last rows replicated as padding so the output keeps the input
    /// length. `kernel` must be odd.
    pub fn moving_average(&mut self, x: NodeId, kernel: usize) -> Result<NodeId> {
        let (rows, cols) = self.shape(x);
        if kernel == 0 || kernel % 2 == 0 {
            return Err(shape_err!("moving_average kernel must be odd, got {kernel}"));
        }
        if rows == 0 {
            return Err(shape_err!("moving_average on empty input"));
        }
        let half = (kernel / 2) as isize;
        let src = self.value(x);
        let scale = 1.0 / kernel as f64;
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let out = value.row_mut(r);
            for o in -half..=half {
                let s = clamp_index(r as isize + o, rows);
                out.iter_mut().zip(src.row(s)).for_each(|(v, x)| *v += x);
            }
            out.iter_mut().for_each(|v| *v *= scale);
        }
        let rg = self.rg(x);
        Ok(self.push(value, Op::MovingAverage { x, kernel }, rg))
    }

    /// Non-overlapping max over blocks of `window` rows, per column. Ties
    /// resolve to the earliest row.
    pub fn maxpool_time(&mut self, x: NodeId, window: usize) -> Result<NodeId> {
        let (rows, cols) = self.shape(x);
        if window == 0 || rows % window != 0 {
            return Err(shape_err!(
                "maxpool_time needs rows ({rows}) divisible by window ({window})"
            ));
        }
        let out_rows = rows / window;
        let src = self.value(x);
        let mut value = Matrix::zeros(out_rows, cols);
        let mut argmax = vec![0usize; out_rows * cols];
        for i in 0..out_rows {
            for j in 0..cols {
                let mut best = i * window;
                let mut best_v = src.get(best, j);
                for r in i * window + 1..(i + 1) * window {
                    let v = src.get(r, j);
                    if v > best_v {
                        best = r;
                        best_v = v;
                    }
                }
                value.set(i, j, best_v);
                argmax[i * cols + j] = best;
            }
        }
        let rg = self.rg(x);
        Ok(self.push(value, Op::MaxPoolTime { x, argmax }, rg))
    }

    /// Mean squared error over all entries; produces a `1 × 1` node.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mse", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.is_empty() {
            return Err(shape_err!("mse of empty matrices"));
        }
        let sum: f64 = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let value = Matrix::filled(1, 1, sum / va.len() as f64);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mse(a, b), rg))
    }

    /// `s1 · a + s2 · b`.
    pub fn scale_add(&mut self, a: NodeId, s1: f64, b: NodeId, s2: f64) -> Result<NodeId> {
        self.same_shape("scale_add", a, b)?;
        let value = zip_values(self.value(a), self.value(b), |x, y| s1 * x + s2 * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::ScaleAdd { a, s1, b, s2 }, rg))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::tanh);
        let rg = self.rg(x);
        self.push(value, Op::Tanh(x), rg)
    }

    /// `max(x, floor)` elementwise. Entries strictly below the floor are
    /// clamped and receive no gradient.
    pub fn clamp_min(&mut self, x: NodeId, floor: f64) -> NodeId {
        let src = self.value(x);
        let clamped: Vec<bool> = src.data().iter().map(|&v| v < floor).collect();
        let value = src.map(|v| if v < floor { floor } else { v });
        let rg = self.rg(x);
        self.push(value, Op::ClampMin { x, clamped }, rg)
    }

    fn same_shape(&self, op: &str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err!(
                "{op} operands {}x{} and {}x{}",
                sa.0,
                sa.1,
                sb.0,
                sb.1
            ));
        }
        Ok(())
    }

    /// Discrete branch choices made during the forward pass: maxpool argmax
    /// indices and clamp activity. Two evaluations with equal signatures lie
    /// on the same smooth piece of the loss.
    pub fn branch_signature(&self) -> Vec<usize> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::MaxPoolTime { argmax, .. } => sig.extend_from_slice(argmax),
                Op::ClampMin { clamped, .. } => sig.extend(clamped.iter().map(|&c| c as usize)),
                _ => {}
            }
        }
        sig
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Param | Op::Const => {}
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let da = matmul_nt(&g, self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.rg(*b) {
                        let db = matmul_tn(self.value(*a), &g);
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, zip_values(&g, self.value(*b), |x, y| x * y));
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, zip_values(&g, self.value(*a), |x, y| x * y));
                    }
                }
                Op::Affine { x, w, b } => {
                    if self.rg(*w) {
                        accumulate(&mut grads, *w, matmul_nt(&g, self.value(*x)));
                    }
                    if self.rg(*x) {
                        accumulate(&mut grads, *x, matmul_tn(self.value(*w), &g));
                    }
                    if self.rg(*b) {
                        let db = if self.shape(*b) != g.shape() {
                            Matrix::from_fn(g.rows(), 1, |r, _| g.row(r).iter().sum())
                        } else {
                            g.clone()
                        };
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::MovingAverage { x, kernel } => {
                    let (rows, cols) = g.shape();
                    let half = (*kernel / 2) as isize;
                    let scale = 1.0 / *kernel as f64;
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        for o in -half..=half {
                            let s = clamp_index(r as isize + o, rows);
                            let (src, dst) = (g.row(r), dx.row_mut(s));
                            dst.iter_mut().zip(src).for_each(|(d, v)| *d += v * scale);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MaxPoolTime { x, argmax } => {
                    let (rows, cols) = self.shape(*x);
                    let mut dx = Matrix::zeros(rows, cols);
                    for i in 0..g.rows() {
                        for j in 0..cols {
                            let src = argmax[i * cols + j];
                            let cur = dx.get(src, j);
                            dx.set(src, j, cur + g.get(i, j));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Mse(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let k = 2.0 * g.get(0, 0) / va.len() as f64;
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, zip_values(va, vb, |x, y| k * (x - y)));
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, zip_values(va, vb, |x, y| -k * (x - y)));
                    }
                }
                Op::ScaleAdd { a, s1, b, s2 } => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g.map(|v| s1 * v));
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.map(|v| s2 * v));
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    accumulate(&mut grads, *x, zip_values(&g, y, |gv, yv| gv * (1.0 - yv * yv)));
                }
                Op::ClampMin { x, clamped } => {
                    let mut dx = g.clone();
                    dx.data_mut()
                        .iter_mut()
                        .zip(clamped)
                        .filter(|(_, &c)| c)
                        .for_each(|(d, _)| *d = 0.0);
                    accumulate(&mut grads, *x, dx);
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads })
    }
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => existing
            .data_mut()
            .iter_mut()
            .zip(delta.data())
            .for_each(|(e, d)| *e += d),
        slot @ None => *slot = Some(delta),
    }
}

fn zip_values(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

/// Below this many output columns the kernels work column by column so the
/// inner loops run over the long dimension.
const NARROW: usize = 8;

fn columns(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|c| m.column(c)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a · b`.
pub(crate) fn matmul_values(a: &Matrix, b: &Matrix) -> Matrix {
    let (m, k) = a.shape();
    let n = b.cols();
    let mut out = Matrix::zeros(m, n);
    if n < NARROW {
        let bcols = columns(b);
        for i in 0..m {
            let arow = a.row(i);
            for (c, bc) in bcols.iter().enumerate() {
                out.set(i, c, dot(arow, bc));
            }
        }
        return out;
    }
    for i in 0..m {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == 0.0 {
                continue;
            }
            orow.iter_mut().zip(b.row(p)).for_each(|(o, bv)| *o += av * bv);
        }
    }
    out
}

/// `g · bᵀ`.
fn matmul_nt(g: &Matrix, b: &Matrix) -> Matrix {
    let (m, n) = g.shape();
    let k = b.rows();
    let mut out = Matrix::zeros(m, k);
    if n < NARROW {
        let bcols = columns(b);
        for i in 0..m {
            let orow = out.row_mut(i);
            for (c, bc) in bcols.iter().enumerate() {
                let gv = g.get(i, c);
                if gv == 0.0 {
                    continue;
                }
                orow.iter_mut().zip(bc).for_each(|(o, bv)| *o += gv * bv);
            }
        }
        return out;
    }
    for i in 0..m {
        let grow = g.row(i);
        for p in 0..k {
            out.set(i, p, dot(grow, b.row(p)));
        }
    }
    out
}

/// `aᵀ · g`.
fn matmul_tn(a: &Matrix, g: &Matrix) -> Matrix {
    let (m, k) = a.shape();
    let n = g.cols();
    if n < NARROW {
        let mut cols = vec![vec![0.0; k]; n];
        for i in 0..m {
            let arow = a.row(i);
            for (c, col) in cols.iter_mut().enumerate() {
                let gv = g.get(i, c);
                if gv == 0.0 {
                    continue;
                }
                col.iter_mut().zip(arow).for_each(|(o, av)| *o += gv * av);
            }
        }
        return Matrix::from_fn(k, n, |p, c| cols[c][p]);
    }
    let mut out = Matrix::zeros(k, n);
    for i in 0..m {
        let grow = g.row(i);
        for (p, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            out.row_mut(p)
                .iter_mut()
                .zip(grow)
                .for_each(|(o, gv)| *o += av * gv);
        }
    }
    out
}
