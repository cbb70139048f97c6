//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive applied to [`Var`] handles. Node ids
//! increase monotonically, so the recording order is already a topological
//! order and [`Tape::backward`] is a single reverse sweep that visits each
//! node once. A tape is built per training step and thrown away afterwards.
//!
//! ```
//! use depreg::{Tape, Tensor};
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.leaf(Tensor::from_f64(1, 3, &[1.0, 2.0, 3.0]).unwrap());
//! let y = x.square().sum();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).data(), &[2.0, 4.0, 6.0]);
//! ```

use std::cell::{Cell, Ref, RefCell};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Exp(usize),
    Log(usize),
    Tanh(usize),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Square(usize),
    Sqrt(usize),
    Neg(usize),
    Scale(usize, S),
    DivScalar(usize, S),
    AddScalar(usize),
    MaxScalar(usize, S),
    Clamp(usize, S, S),
    Sum(usize),
    Mean(usize),
    SumRows(usize),
    SumCols(usize),
    Broadcast(usize),
    Transpose(usize),
    SliceCols(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    PairwiseSqDist(usize),
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

/// Recording of primitive operations for one forward/backward pass.
pub struct Tape<S> {
    nodes: RefCell<Vec<Node<S>>>,
    consumed: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, S> {
    tape: &'t Tape<S>,
    id: usize,
}

impl<S> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    shapes: Vec<[usize; 2]>,
}

impl<S: Scalar> Gradients<S> {
    /// d(root)/d(var). Vars the root does not depend on get zeros.
    pub fn wrt(&self, var: Var<'_, S>) -> Tensor<S> {
        match self.grads.get(var.id).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[var.id];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var<'_, S>) -> Tensor<S> {
        match self.grads.get_mut(var.id).and_then(Option::take) {
            Some(g) => g,
            None => {
                let [r, c] = self.shapes[var.id];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn broadcast_shape(a: [usize; 2], b: [usize; 2]) -> Result<[usize; 2]> {
    let mut out = [0; 2];
    for k in 0..2 {
        out[k] = if a[k] == b[k] {
            a[k]
        } else if a[k] == 1 {
            b[k]
        } else if b[k] == 1 {
            a[k]
        } else {
            return Err(Error::Dimension(format!(
                "cannot broadcast {a:?} with {b:?}"
            )));
        };
    }
    Ok(out)
}

fn broadcast_zip<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl Fn(S, S) -> S,
) -> Result<Tensor<S>> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let [r, c] = broadcast_shape(a.shape(), b.shape())?;
    let [ar, ac] = a.shape();
    let [br, bc] = b.shape();
    let (ad, bd) = (a.data(), b.data());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        let ai = if ar == 1 { 0 } else { i * ac };
        let bi = if br == 1 { 0 } else { i * bc };
        for j in 0..c {
            let x = ad[ai + if ac == 1 { 0 } else { j }];
            let y = bd[bi + if bc == 1 { 0 } else { j }];
            out.push(f(x, y));
        }
    }
    Tensor::from_vec(r, c, out)
}

/// Sums `g` down to `shape`, undoing a broadcast.
fn reduce_to<S: Scalar>(g: Tensor<S>, shape: [usize; 2]) -> Tensor<S> {
    if g.shape() == shape {
        return g;
    }
    let [r, c] = g.shape();
    let mut out = Tensor::zeros(shape[0], shape[1]);
    for i in 0..r {
        let oi = if shape[0] == 1 { 0 } else { i };
        for j in 0..c {
            let oj = if shape[1] == 1 { 0 } else { j };
            let v = out.get(oi, oj) + g.get(i, j);
            out.set(oi, oj, v);
        }
    }
    out
}

fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

fn softplus<S: Scalar>(v: S) -> S {
    // log(1 + e^v) without overflow
    v.max(S::zero()) + (-v.abs()).exp().ln_1p()
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor<S>) -> Var<'_, S> {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: S) -> Var<'_, S> {
        self.constant(Tensor::scalar(value))
    }

    /// Column-wise concatenation of equally tall inputs.
    pub fn concat_cols(&self, parts: &[Var<'_, S>]) -> Result<Var<'_, S>> {
        let nodes = self.nodes.borrow();
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("concat of nothing".into()))?;
        let rows = nodes[first.id].value.rows();
        let mut width = 0;
        for p in parts {
            let v = &nodes[p.id].value;
            if v.rows() != rows {
                return Err(Error::Dimension(format!(
                    "concat rows {} vs {}",
                    v.rows(),
                    rows
                )));
            }
            width += v.cols();
        }
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(nodes[p.id].value.row(i));
            }
        }
        let rg = parts.iter().any(|p| nodes[p.id].requires_grad);
        drop(nodes);
        let out = Tensor::from_vec(rows, width, data)?;
        Ok(self.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Reverse sweep from a scalar root. A tape can be differentiated once.
    pub fn backward(&self, root: Var<'_, S>) -> Result<Gradients<S>> {
        if !std::ptr::eq(root.tape, self) {
            return Err(Error::Contract("root belongs to another tape".into()));
        }
        if self.consumed.replace(true) {
            return Err(Error::Contract(
                "backward already ran on this tape".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        if !nodes[root.id].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {:?}",
                nodes[root.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.id] = Some(Tensor::scalar(S::one()));

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let contributions = backprop(&nodes, node, &g);
            // Leaves keep their gradient.
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            for (pid, pg) in contributions {
                if !nodes[pid].requires_grad {
                    continue;
                }
                match &mut grads[pid] {
                    Some(acc) => {
                        for (a, &b) in acc.data_mut().iter_mut().zip(pg.data()) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(pg),
                }
            }
        }
        // Intermediate gradients are not part of the result.
        for (id, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[id] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn backprop<S: Scalar>(nodes: &[Node<S>], node: &Node<S>, g: &Tensor<S>) -> Vec<(usize, Tensor<S>)> {
    let val = |id: usize| &nodes[id].value;
    let out = &node.value;
    let elementwise = |a: usize, f: &dyn Fn(S, S, S) -> S| -> Tensor<S> {
        // f(grad, input, output)
        let x = val(a);
        let data = g
            .data()
            .iter()
            .zip(x.data())
            .zip(out.data())
            .map(|((&gv, &xv), &ov)| f(gv, xv, ov))
            .collect();
        Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
    };
    match &node.op {
        Op::Leaf => vec![],
        Op::Add(a, b) => vec![
            (*a, reduce_to(g.clone(), val(*a).shape())),
            (*b, reduce_to(g.clone(), val(*b).shape())),
        ],
        Op::Sub(a, b) => vec![
            (*a, reduce_to(g.clone(), val(*a).shape())),
            (*b, reduce_to(g.map(|v| -v), val(*b).shape())),
        ],
        Op::Mul(a, b) => {
            let ga = broadcast_zip(g, val(*b), |gv, bv| gv * bv).expect("broadcast");
            let gb = broadcast_zip(g, val(*a), |gv, av| gv * av).expect("broadcast");
            vec![
                (*a, reduce_to(ga, val(*a).shape())),
                (*b, reduce_to(gb, val(*b).shape())),
            ]
        }
        Op::MatMul(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let [m, k] = x.shape();
            let n = y.cols();
            let mut ga = vec![S::zero(); m * k];
            // dA = G · Bᵀ
            S::gemm(m, n, k, g.data(), false, y.data(), true, &mut ga);
            let mut gb = vec![S::zero(); k * n];
            // dB = Aᵀ · G
            S::gemm(k, m, n, x.data(), true, g.data(), false, &mut gb);
            vec![
                (*a, Tensor::from_vec(m, k, ga).unwrap()),
                (*b, Tensor::from_vec(k, n, gb).unwrap()),
            ]
        }
        Op::Exp(a) => vec![(*a, elementwise(*a, &|gv, _, o| gv * o))],
        Op::Log(a) => vec![(*a, elementwise(*a, &|gv, x, _| gv / x))],
        Op::Tanh(a) => vec![(*a, elementwise(*a, &|gv, _, o| gv * (S::one() - o * o)))],
        Op::Relu(a) => vec![(
            *a,
            elementwise(*a, &|gv, x, _| if x > S::zero() { gv } else { S::zero() }),
        )],
        Op::Sigmoid(a) => vec![(*a, elementwise(*a, &|gv, _, o| gv * o * (S::one() - o)))],
        Op::Softplus(a) => vec![(*a, elementwise(*a, &|gv, x, _| gv * sigmoid(x)))],
        Op::Square(a) => vec![(*a, elementwise(*a, &|gv, x, _| gv * (x + x)))],
        Op::Sqrt(a) => vec![(*a, elementwise(*a, &|gv, _, o| gv / (o + o)))],
        Op::Neg(a) => vec![(*a, g.map(|v| -v))],
        Op::Scale(a, c) => {
            let c = *c;
            vec![(*a, g.map(|v| v * c))]
        }
        Op::DivScalar(a, c) => {
            let c = *c;
            vec![(*a, g.map(|v| v / c))]
        }
        Op::AddScalar(a) => vec![(*a, g.clone())],
        Op::MaxScalar(a, c) => {
            let c = *c;
            // one-sided: zero gradient exactly at the kink
            vec![(*a, elementwise(*a, &|gv, x, _| if x > c { gv } else { S::zero() }))]
        }
        Op::Clamp(a, lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            vec![(
                *a,
                elementwise(*a, &|gv, x, _| if x > lo && x < hi { gv } else { S::zero() }),
            )]
        }
        Op::Sum(a) => {
            let [r, c] = val(*a).shape();
            vec![(*a, Tensor::full(r, c, g.item()))]
        }
        Op::Mean(a) => {
            let [r, c] = val(*a).shape();
            let n = S::from_usize(r * c).unwrap();
            vec![(*a, Tensor::full(r, c, g.item() / n))]
        }
        Op::SumRows(a) | Op::SumCols(a) | Op::Broadcast(a) => {
            // Both reductions and broadcasts are undone by broadcasting or
            // reducing the incoming gradient back to the input's shape.
            let shape = val(*a).shape();
            let gg = if g.numel() >= val(*a).numel() {
                reduce_to(g.clone(), shape)
            } else {
                broadcast_zip(&Tensor::zeros(shape[0], shape[1]), g, |_, gv| gv)
                    .expect("broadcast")
            };
            vec![(*a, gg)]
        }
        Op::Transpose(a) => vec![(*a, g.transpose())],
        Op::SliceCols(a, idx) => {
            let x = val(*a);
            let mut gx = Tensor::zeros(x.rows(), x.cols());
            for i in 0..x.rows() {
                for (k, &j) in idx.iter().enumerate() {
                    let v = gx.get(i, j) + g.get(i, k);
                    gx.set(i, j, v);
                }
            }
            vec![(*a, gx)]
        }
        Op::ConcatCols(parts) => {
            let mut offset = 0;
            let mut res = Vec::with_capacity(parts.len());
            for &p in parts {
                let w = val(p).cols();
                let idx: Vec<usize> = (offset..offset + w).collect();
                res.push((p, g.select_cols(&idx)));
                offset += w;
            }
            res
        }
        Op::PairwiseSqDist(a) => {
            // D_ij = |x_i - x_j|², dX_i = 2 Σ_j (G_ij + G_ji)(x_i - x_j)
            let x = val(*a);
            let [m, d] = x.shape();
            let mut gx = Tensor::zeros(m, d);
            let two = S::one() + S::one();
            for i in 0..m {
                let xi = x.row(i);
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let w = two * (g.get(i, j) + g.get(j, i));
                    if w == S::zero() {
                        continue;
                    }
                    let xj = x.row(j);
                    let row = &mut gx.data_mut()[i * d..(i + 1) * d];
                    for k in 0..d {
                        row[k] += w * (xi[k] - xj[k]);
                    }
                }
            }
            vec![(*a, gx)]
        }
    }
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    fn node_value(&self) -> Ref<'_, Tensor<S>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    /// A copy of the forward value.
    pub fn value(&self) -> Tensor<S> {
        self.node_value().clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor<S>) -> R) -> R {
        f(&self.node_value())
    }

    pub fn shape(&self) -> [usize; 2] {
        self.node_value().shape()
    }

    /// Value of a 1×1 var.
    pub fn item(&self) -> S {
        self.node_value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn rg(&self) -> bool {
        self.requires_grad()
    }

    fn unary(self, op: Op<S>, f: impl Fn(S) -> S) -> Var<'t, S> {
        let out = self.node_value().map(f);
        let rg = self.rg();
        self.tape.push(out, op, rg)
    }

    fn binary(
        self,
        other: Var<'t, S>,
        op: Op<S>,
        f: impl Fn(S, S) -> S,
    ) -> Result<Var<'t, S>> {
        let out = {
            let nodes = self.tape.nodes.borrow();
            broadcast_zip(&nodes[self.id].value, &nodes[other.id].value, f)?
        };
        let rg = self.rg() || other.rg();
        Ok(self.tape.push(out, op, rg))
    }

    /// Elementwise sum with 2-D broadcasting of unit dimensions.
    pub fn add(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn matmul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        let out = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.id].value.matmul(&nodes[other.id].value)?
        };
        let rg = self.rg() || other.rg();
        Ok(self.tape.push(out, Op::MatMul(self.id, other.id), rg))
    }

    pub fn exp(self) -> Var<'t, S> {
        self.unary(Op::Exp(self.id), S::exp)
    }

    /// Natural log; every entry must be strictly positive.
    pub fn ln(self) -> Result<Var<'t, S>> {
        if let Some(v) = self.node_value().data().iter().find(|v| !(**v > S::zero())) {
            return Err(Error::Domain(format!("log of non-positive value {v}")));
        }
        Ok(self.unary(Op::Log(self.id), S::ln))
    }

    pub fn tanh(self) -> Var<'t, S> {
        self.unary(Op::Tanh(self.id), S::tanh)
    }

    pub fn relu(self) -> Var<'t, S> {
        self.unary(Op::Relu(self.id), |v| v.max(S::zero()))
    }

    pub fn sigmoid(self) -> Var<'t, S> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    /// `log(1 + exp(x))`, stable for large |x|.
    pub fn softplus(self) -> Var<'t, S> {
        self.unary(Op::Softplus(self.id), softplus)
    }

    pub fn square(self) -> Var<'t, S> {
        self.unary(Op::Square(self.id), |v| v * v)
    }

    /// Square root; every entry must be strictly positive.
    pub fn sqrt(self) -> Result<Var<'t, S>> {
        if let Some(v) = self.node_value().data().iter().find(|v| !(**v > S::zero())) {
            return Err(Error::Domain(format!("sqrt of non-positive value {v}")));
        }
        Ok(self.unary(Op::Sqrt(self.id), S::sqrt))
    }

    pub fn neg(self) -> Var<'t, S> {
        self.unary(Op::Neg(self.id), |v| -v)
    }

    pub fn scale(self, c: S) -> Var<'t, S> {
        self.unary(Op::Scale(self.id, c), |v| v * c)
    }

    /// Division by a constant (exact where `scale(1/c)` would round).
    pub fn div_scalar(self, c: S) -> Var<'t, S> {
        self.unary(Op::DivScalar(self.id, c), |v| v / c)
    }

    pub fn add_scalar(self, c: S) -> Var<'t, S> {
        self.unary(Op::AddScalar(self.id), |v| v + c)
    }

    /// `max(x, c)` elementwise with a zero subgradient at `x == c`.
    pub fn max_with_scalar(self, c: S) -> Var<'t, S> {
        self.unary(Op::MaxScalar(self.id, c), |v| v.max(c))
    }

    pub fn clamp(self, lo: S, hi: S) -> Var<'t, S> {
        self.unary(Op::Clamp(self.id, lo, hi), |v| v.max(lo).min(hi))
    }

    /// Sum of all entries (1×1).
    pub fn sum(self) -> Var<'t, S> {
        let s = self.node_value().sum();
        let rg = self.rg();
        self.tape.push(Tensor::scalar(s), Op::Sum(self.id), rg)
    }

    pub fn mean(self) -> Var<'t, S> {
        let s = self.node_value().mean();
        let rg = self.rg();
        self.tape.push(Tensor::scalar(s), Op::Mean(self.id), rg)
    }

    /// Column sums as a 1×n row.
    pub fn sum_rows(self) -> Var<'t, S> {
        let out = {
            let x = self.node_value();
            let [r, c] = x.shape();
            let mut acc = vec![S::zero(); c];
            for i in 0..r {
                for (a, &v) in acc.iter_mut().zip(x.row(i)) {
                    *a += v;
                }
            }
            Tensor::from_vec(1, c, acc).unwrap()
        };
        let rg = self.rg();
        self.tape.push(out, Op::SumRows(self.id), rg)
    }

    /// Row sums as an m×1 column.
    pub fn sum_cols(self) -> Var<'t, S> {
        let out = {
            let x = self.node_value();
            let sums = (0..x.rows()).map(|i| x.row(i).iter().copied().sum()).collect();
            Tensor::from_vec(x.rows(), 1, sums).unwrap()
        };
        let rg = self.rg();
        self.tape.push(out, Op::SumCols(self.id), rg)
    }

    /// Explicitly expands unit dimensions to `shape`.
    pub fn broadcast(self, rows: usize, cols: usize) -> Result<Var<'t, S>> {
        let out = {
            let x = self.node_value();
            let target = broadcast_shape(x.shape(), [rows, cols])?;
            if target != [rows, cols] {
                return Err(Error::Dimension(format!(
                    "cannot broadcast {:?} to {rows}x{cols}",
                    x.shape()
                )));
            }
            broadcast_zip(&Tensor::zeros(rows, cols), &x, |_, v| v)?
        };
        let rg = self.rg();
        Ok(self.tape.push(out, Op::Broadcast(self.id), rg))
    }

    pub fn transpose(self) -> Var<'t, S> {
        let out = self.node_value().transpose();
        let rg = self.rg();
        self.tape.push(out, Op::Transpose(self.id), rg)
    }

    /// Gathers the given columns (in order, repeats allowed).
    pub fn slice_columns(self, idx: &[usize]) -> Result<Var<'t, S>> {
        let out = {
            let x = self.node_value();
            if let Some(&j) = idx.iter().find(|&&j| j >= x.cols()) {
                return Err(Error::Dimension(format!(
                    "column {j} out of range for width {}",
                    x.cols()
                )));
            }
            x.select_cols(idx)
        };
        let rg = self.rg();
        Ok(self.tape.push(out, Op::SliceCols(self.id, idx.to_vec()), rg))
    }

    /// Matrix of squared Euclidean distances between rows.
    pub fn pairwise_sqdist(self) -> Var<'t, S> {
        let out = {
            let x = self.node_value();
            let [m, d] = x.shape();
            let mut out = Tensor::zeros(m, m);
            for i in 0..m {
                let xi = x.row(i);
                for j in (i + 1)..m {
                    let xj = x.row(j);
                    let mut s = S::zero();
                    for k in 0..d {
                        let t = xi[k] - xj[k];
                        s += t * t;
                    }
                    out.set(i, j, s);
                    out.set(j, i, s);
                }
            }
            out
        };
        let rg = self.rg();
        self.tape.push(out, Op::PairwiseSqDist(self.id), rg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(rows, cols, v).unwrap()
    }

    #[test]
    fn relu_values() {
        let tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[-2.0, 3.0]));
        assert_eq!(x.relu().value().data(), &[0.0, 3.0]);
    }

    #[test]
    fn pairwise_345() {
        let tape = Tape::new();
        let x = tape.leaf(t(2, 2, &[0.0, 0.0, 3.0, 4.0]));
        assert_eq!(x.pairwise_sqdist().value().data(), &[0.0, 25.0, 25.0, 0.0]);
    }

    #[test]
    fn sum_of_squares_grad() {
        let tape = Tape::new();
        let x = tape.leaf(t(1, 3, &[1.0, 2.0, 3.0]));
        let y = x.mul(x).unwrap().sum();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn hinge_subgradient() {
        for (x0, expect) in [(-1.0, 0.0), (2.0, 1.0), (0.0, 0.0)] {
            let tape = Tape::new();
            let x = tape.leaf(Tensor::scalar(x0));
            let y = x.max_with_scalar(0.0).sum();
            let g = tape.backward(y).unwrap();
            assert_eq!(g.wrt(x).item(), expect, "at {x0}");
        }
    }

    #[test]
    fn backward_rejects_non_scalar_and_repeat() {
        let tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));

        let tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 2.0]));
        let y = x.sum();
        tape.backward(y).unwrap();
        assert!(matches!(tape.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn domain_and_shape_errors() {
        let tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 0.0]));
        assert!(matches!(x.ln(), Err(Error::Domain(_))));
        assert!(matches!(x.sqrt(), Err(Error::Domain(_))));
        let y = tape.leaf(t(3, 1, &[1.0, 2.0, 3.0]));
        let z = tape.leaf(t(2, 3, &[0.0; 6]));
        assert!(matches!(z.add(tape.leaf(t(3, 3, &[0.0; 9]))), Err(Error::Dimension(_))));
        assert!(matches!(y.matmul(y), Err(Error::Dimension(_))));
        assert!(matches!(x.slice_columns(&[2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn broadcast_add_reduces_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(t(2, 3, &[1., 2., 3., 4., 5., 6.]));
        let b = tape.leaf(t(1, 3, &[1., 1., 1.]));
        let c = tape.leaf(t(2, 1, &[0., 0.]));
        let y = x.add(b).unwrap().mul(c.add_scalar(2.0)).unwrap().sum();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(b).data(), &[4.0, 4.0, 4.0]);
        assert_eq!(g.wrt(x).data(), &[2.0; 6]);
        assert_eq!(g.wrt(c).data(), &[9.0, 18.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 2.0]));
        let unused = tape.leaf(t(2, 2, &[1.0; 4]));
        let g = tape.backward(x.sum()).unwrap();
        assert_eq!(g.wrt(unused).data(), &[0.0; 4]);
    }

    #[test]
    fn forward_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let tape = Tape::new();
            let x = tape.leaf(Tensor::<f64>::randn(5, 3, &mut rng));
            let w = tape.leaf(Tensor::<f64>::randn(3, 4, &mut rng));
            x.matmul(w).unwrap().tanh().pairwise_sqdist().exp().value()
        };
        let (a, b) = (run(), run());
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
