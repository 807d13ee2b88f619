//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node to the tape; a node only ever refers to
//! nodes recorded before it, so walking the tape backwards from the root is
//! a reverse topological order and each node is visited exactly once.

use std::cell::RefCell;
use std::rc::Rc;

use super::{NumericsError, Tensor};

/// Pointwise nonlinearities available on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Neg,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Exp => x.exp(),
            Activation::Neg => -x,
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Exp => y,
            Activation::Neg => -1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Unary(usize, Activation),
    Sqrt(usize),
    Softplus(usize),
    Softmax(usize),
    Sum(usize),
    RowSum(usize),
    ConcatCols(Vec<usize>),
    StackRows(Vec<usize>),
    SliceCols(usize, usize),
    GatherRows(usize, Vec<usize>),
    Reshape(usize),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Record of differentiable operations for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.value())
    }
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

    /// A differentiable leaf.
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.push(Rc::new(value), Op::Leaf, true)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Rc::new(value), Op::Leaf, false)
    }

    pub fn constant_rc(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Rc<Tensor>, op: Op, requires_grad: bool) -> Var<'_> {
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

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Concatenates `[m, nᵢ]` parts along columns.
    pub fn concat_cols<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>, NumericsError> {
        let first = parts.first().ok_or(NumericsError::Empty("concat_cols"))?;
        let rows = first.value().rows();
        let values: Vec<Rc<Tensor>> = parts.iter().map(Var::value).collect();
        let mut cols = 0;
        for v in &values {
            let (r, c) = v.dims2()?;
            if r != rows {
                return Err(NumericsError::shape_mismatch("concat_cols", &values[0], v));
            }
            cols += c;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for v in &values {
                data.extend_from_slice(v.row_slice(r));
            }
        }
        let rg = parts.iter().any(|p| p.requires_grad());
        let out = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(Rc::new(out), Op::ConcatCols(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Stacks `[rᵢ, n]` parts along rows.
    pub fn stack_rows<'t>(&'t self, parts: &[Var<'t>]) -> Result<Var<'t>, NumericsError> {
        let first = parts.first().ok_or(NumericsError::Empty("stack_rows"))?;
        let cols = first.value().cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let v = p.value();
            let (r, c) = v.dims2()?;
            if c != cols {
                return Err(NumericsError::shape_mismatch("stack_rows", &first.value(), &v));
            }
            rows += r;
            data.extend_from_slice(v.data());
        }
        let rg = parts.iter().any(|p| p.requires_grad());
        let out = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(Rc::new(out), Op::StackRows(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Gradients of the scalar `root` with respect to every recorded node.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients, NumericsError> {
        let nodes = self.nodes.borrow();
        let root_value = &nodes[root.id].value;
        if root_value.len() != 1 {
            return Err(NumericsError::NotScalar(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[root.id] = Some(Tensor::filled(root_value.shape(), 1.0));

        let acc = |grads: &mut Vec<Option<Tensor>>, id: usize, g: Tensor| -> Result<(), NumericsError> {
            if !nodes[id].requires_grad {
                return Ok(());
            }
            match &mut grads[id] {
                Some(existing) => existing.accumulate(&g),
                slot @ None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        };

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let out = &node.value;
            match &node.op {
                Op::Leaf => unreachable!("leaves are skipped above"),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone())?;
                    acc(&mut grads, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone())?;
                    acc(&mut grads, *b, g.map(|v| -v))?;
                }
                Op::Mul(a, b) => {
                    let av = &nodes[*a].value;
                    let bv = &nodes[*b].value;
                    if nodes[*a].requires_grad {
                        acc(&mut grads, *a, g.zip_map(bv, |g, b| g * b)?)?;
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, *b, g.zip_map(av, |g, a| g * a)?)?;
                    }
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g.map(|v| v * c))?,
                Op::AddRow(a, row) => {
                    if nodes[*row].requires_grad {
                        let (m, n) = g.dims2()?;
                        let mut rg = vec![0.0; n];
                        for r in 0..m {
                            for (acc_v, v) in rg.iter_mut().zip(g.row_slice(r)) {
                                *acc_v += v;
                            }
                        }
                        acc(&mut grads, *row, Tensor::row(rg))?;
                    }
                    acc(&mut grads, *a, g)?;
                }
                Op::MatMul(a, b) => {
                    let av = &nodes[*a].value;
                    let bv = &nodes[*b].value;
                    if nodes[*a].requires_grad {
                        acc(&mut grads, *a, g.matmul_t(bv)?)?;
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, *b, av.t_matmul(&g)?)?;
                    }
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()?)?,
                Op::Unary(a, act) => {
                    let x = &nodes[*a].value;
                    let mut d = g;
                    for ((dv, &xv), &yv) in d.data_mut().iter_mut().zip(x.data()).zip(out.data()) {
                        *dv *= act.derivative(xv, yv);
                    }
                    acc(&mut grads, *a, d)?;
                }
                Op::Sqrt(a) => {
                    let d = g.zip_map(out, |g, y| if y > 0.0 { g * 0.5 / y } else { 0.0 })?;
                    acc(&mut grads, *a, d)?;
                }
                Op::Softplus(a) => {
                    let d = g.zip_map(&nodes[*a].value, |g, x| g * sigmoid(x))?;
                    acc(&mut grads, *a, d)?;
                }
                Op::Softmax(a) => {
                    let dot: f64 = g.data().iter().zip(out.data()).map(|(g, y)| g * y).sum();
                    let d = g.zip_map(out, |g, y| y * (g - dot))?;
                    acc(&mut grads, *a, d)?;
                }
                Op::Sum(a) => {
                    let shape = nodes[*a].value.shape().to_vec();
                    acc(&mut grads, *a, Tensor::filled(&shape, g.data()[0]))?;
                }
                Op::RowSum(a) => {
                    let (m, n) = nodes[*a].value.dims2()?;
                    let mut d = Tensor::zeros(&[m, n]);
                    for r in 0..m {
                        let gv = g.data()[r];
                        d.row_slice_mut(r).iter_mut().for_each(|v| *v = gv);
                    }
                    acc(&mut grads, *a, d)?;
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let c = nodes[p].value.cols();
                        if nodes[p].requires_grad {
                            let mut data = Vec::with_capacity(rows * c);
                            for r in 0..rows {
                                data.extend_from_slice(&g.row_slice(r)[offset..offset + c]);
                            }
                            acc(&mut grads, p, Tensor::new(vec![rows, c], data)?)?;
                        }
                        offset += c;
                    }
                }
                Op::StackRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let len = nodes[p].value.len();
                        if nodes[p].requires_grad {
                            let data = g.data()[offset..offset + len].to_vec();
                            acc(&mut grads, p, Tensor::new(vec![len / cols.max(1), cols], data)?)?;
                        }
                        offset += len;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (m, n) = nodes[*a].value.dims2()?;
                    let width = g.cols();
                    let mut d = Tensor::zeros(&[m, n]);
                    for r in 0..m {
                        d.row_slice_mut(r)[*start..*start + width].copy_from_slice(g.row_slice(r));
                    }
                    acc(&mut grads, *a, d)?;
                }
                Op::GatherRows(a, indices) => {
                    let shape = nodes[*a].value.shape().to_vec();
                    let mut d = Tensor::zeros(&shape);
                    for (k, &i) in indices.iter().enumerate() {
                        for (dv, gv) in d.row_slice_mut(i).iter_mut().zip(g.row_slice(k)) {
                            *dv += gv;
                        }
                    }
                    acc(&mut grads, *a, d)?;
                }
                Op::Reshape(a) => {
                    let shape = nodes[*a].value.shape().to_vec();
                    acc(&mut grads, *a, g.reshape(shape)?)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of its shape when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var<'_>) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(v.value().shape()))
    }
}

#[allow(clippy::should_implement_trait)]
impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    /// The single value of a one-element tensor.
    pub fn scalar(&self) -> f64 {
        self.value().data()[0]
    }

    fn unary(self, value: Tensor, op: Op) -> Var<'t> {
        let rg = self.requires_grad();
        self.tape.push(Rc::new(value), op, rg)
    }

    fn binary(self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(Rc::new(value), op, rg)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let v = self.value().zip_map(&other.value(), |a, b| a + b)?;
        Ok(self.binary(other, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let v = self.value().zip_map(&other.value(), |a, b| a - b)?;
        Ok(self.binary(other, v, Op::Sub(self.id, other.id)))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let v = self.value().zip_map(&other.value(), |a, b| a * b)?;
        Ok(self.binary(other, v, Op::Mul(self.id, other.id)))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let v = self.value().map(|a| a * c);
        self.unary(v, Op::Scale(self.id, c))
    }

    /// Adds a `[1, n]` row to every row of a `[m, n]` tensor.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let a = self.value();
        let r = row.value();
        let (m, n) = a.dims2()?;
        if r.shape() != [1, n] {
            return Err(NumericsError::shape_mismatch("add_row", &a, &r));
        }
        let mut out = (*a).clone();
        for i in 0..m {
            for (o, b) in out.row_slice_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        Ok(self.binary(row, out, Op::AddRow(self.id, row.id)))
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let v = self.value().matmul(&other.value())?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    pub fn transpose(self) -> Result<Var<'t>, NumericsError> {
        let v = self.value().transpose()?;
        Ok(self.unary(v, Op::Transpose(self.id)))
    }

    /// Applies a pointwise nonlinearity; rejects non-finite inputs.
    pub fn elementwise(self, act: Activation) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        if !x.is_finite() {
            return Err(NumericsError::NonFinite("elementwise input"));
        }
        let v = x.map(|a| act.apply(a));
        Ok(self.unary(v, Op::Unary(self.id, act)))
    }

    pub fn sigmoid(self) -> Result<Var<'t>, NumericsError> {
        self.elementwise(Activation::Sigmoid)
    }

    pub fn tanh(self) -> Result<Var<'t>, NumericsError> {
        self.elementwise(Activation::Tanh)
    }

    pub fn relu(self) -> Result<Var<'t>, NumericsError> {
        self.elementwise(Activation::Relu)
    }

    pub fn exp(self) -> Result<Var<'t>, NumericsError> {
        self.elementwise(Activation::Exp)
    }

    pub fn neg(self) -> Result<Var<'t>, NumericsError> {
        self.elementwise(Activation::Neg)
    }

    /// Elementwise square root; the derivative at exactly zero is taken as zero.
    pub fn sqrt(self) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        if x.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(NumericsError::NonFinite("sqrt input"));
        }
        let v = x.map(f64::sqrt);
        Ok(self.unary(v, Op::Sqrt(self.id)))
    }

    /// Elementwise `ln(1 + eˣ)`.
    pub fn softplus(self) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        if !x.is_finite() {
            return Err(NumericsError::NonFinite("softplus input"));
        }
        let v = x.map(softplus);
        Ok(self.unary(v, Op::Softplus(self.id)))
    }

    /// Softmax over every element of the tensor.
    pub fn softmax(self) -> Result<Var<'t>, NumericsError> {
        let v = super::softmax_values(&self.value())?;
        Ok(self.unary(v, Op::Softmax(self.id)))
    }

    /// Sum of all elements as a `[1, 1]` tensor.
    pub fn sum(self) -> Var<'t> {
        let s = self.value().sum();
        self.unary(Tensor::scalar(s), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Per-row sums of a `[m, n]` tensor as `[m, 1]`.
    pub fn row_sum(self) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        let (m, _) = x.dims2()?;
        let data = (0..m).map(|r| x.row_slice(r).iter().sum()).collect();
        Ok(self.unary(Tensor::new(vec![m, 1], data)?, Op::RowSum(self.id)))
    }

    /// Columns `start..end` of a 2-D tensor.
    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>, NumericsError> {
        let x = self.value();
        let (m, n) = x.dims2()?;
        if start > end || end > n {
            return Err(NumericsError::Index { index: end, len: n });
        }
        let mut data = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            data.extend_from_slice(&x.row_slice(r)[start..end]);
        }
        let v = Tensor::new(vec![m, end - start], data)?;
        Ok(self.unary(v, Op::SliceCols(self.id, start)))
    }

    /// Rows picked by index; gradients scatter back additively.
    pub fn gather_rows(self, indices: &[usize]) -> Result<Var<'t>, NumericsError> {
        let v = self.value().gather_rows(indices)?;
        Ok(self.unary(v, Op::GatherRows(self.id, indices.to_vec())))
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>, NumericsError> {
        let v = (*self.value()).clone().reshape(shape)?;
        Ok(self.unary(v, Op::Reshape(self.id)))
    }
}
