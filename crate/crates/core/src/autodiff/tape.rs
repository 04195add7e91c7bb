//! Reverse-mode differentiation over a linear tape of dense tensors.
//!
//! Every op appends a node holding its forward value and the handles of its
//! inputs. [`Tape::backward`] walks the tape once in reverse and stores the
//! gradient of a scalar output with respect to every node.

use crate::autodiff::params::ParamStore;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::numeric::invariant_sum;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Backward rule for ops defined outside this module.
pub trait CustomOp {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, in input order.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor>;
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Propagate(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    RowSum(Var),
    Sum(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    SelectRows(Var, Vec<usize>),
    Pick(Var, Vec<usize>),
    CosineSim(Var),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) | Op::Propagate(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Shift(a)
            | Op::RowSum(a)
            | Op::Sum(a)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::SoftmaxRows(a)
            | Op::SelectRows(a, _)
            | Op::Pick(a, _)
            | Op::CosineSim(a) => vec![*a],
            Op::Custom(inputs, _) => inputs.clone(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, Var)>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, value: Tensor, op: Op, name: &str) -> Result<Var> {
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.push_leaf_or_op(value, op, name, needs_grad)
    }

    fn push_leaf_or_op(&mut self, value: Tensor, op: Op, name: &str, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf_or_op(value, Op::Leaf, "constant", false)
    }

    /// Unnamed leaf whose gradient is kept, readable through [`Tape::grad`].
    pub fn variable(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf_or_op(value, Op::Leaf, "variable", true)
    }

    /// Registers a named parameter from `store` as a leaf.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let value = store
            .value(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?
            .clone();
        let v = self.push_leaf_or_op(value, Op::Leaf, name, true)?;
        self.params.push((name.to_string(), v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(value, Op::MatMul(a, b), "matmul")
    }

    /// `a · b` where every output entry sums its products through
    /// [`invariant_sum`]. Used when the shared dimension indexes vertices.
    pub fn propagate(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(Error::shape(format!(
                "propagate {}x{} by {}x{}",
                x.rows(),
                x.cols(),
                y.rows(),
                y.cols()
            )));
        }
        let mut out = Tensor::zeros(x.rows(), y.cols());
        let mut terms = Vec::new();
        for i in 0..x.rows() {
            let xr = x.row(i);
            for c in 0..y.cols() {
                terms.clear();
                for (k, &w) in xr.iter().enumerate() {
                    if w != 0.0 {
                        terms.push(w * y.get(k, c));
                    }
                }
                out.set(i, c, invariant_sum(&mut terms));
            }
        }
        self.push(out, Op::Propagate(a, b), "propagate")
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if !x.same_shape(y) {
            return Err(Error::shape(format!(
                "{what} {:?} and {:?}",
                x.shape(),
                y.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "sub")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b), "mul")
    }

    /// Adds a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::shape(format!(
                "bias {:?} for input {:?}",
                b.shape(),
                x.shape()
            )));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            for (o, &bb) in value.row_mut(r).iter_mut().zip(b.data()) {
                *o += bb;
            }
        }
        self.push(value, Op::AddRow(a, bias), "add_row")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * c);
        self.push(value, Op::Scale(a, c), "scale")
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::Shift(a), "shift")
    }

    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows(), 1);
        for r in 0..x.rows() {
            out.set(r, 0, x.row(r).iter().sum());
        }
        self.push(out, Op::RowSum(a), "row_sum")
    }

    /// Sum of all entries, order-independent.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let mut terms = self.value(a).data().to_vec();
        let s = invariant_sum(&mut terms);
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a), "relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a), "tanh")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(logistic);
        self.push(value, Op::Sigmoid(a), "sigmoid")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a), "softmax_rows")
    }

    pub fn select_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::shape(format!("row {bad} of {} rows", x.rows())));
        }
        let value = x.select_rows(idx);
        self.push(value, Op::SelectRows(a, idx.to_vec()), "select_rows")
    }

    /// Entry `cols[r]` of every row `r`, as an `n × 1` column.
    pub fn pick(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if cols.len() != x.rows() || cols.iter().any(|&c| c >= x.cols()) {
            return Err(Error::shape(format!(
                "pick {} indices from {:?}",
                cols.len(),
                x.shape()
            )));
        }
        let data = cols.iter().enumerate().map(|(r, &c)| x.get(r, c)).collect();
        let value = Tensor::from_vec(cols.len(), 1, data)?;
        self.push(value, Op::Pick(a, cols.to_vec()), "pick")
    }

    /// Pairwise rescaled cosine similarity `(1 + cos) / 2` between rows;
    /// pairs involving a zero row are 0.
    pub fn cosine_sim(&mut self, a: Var) -> Result<Var> {
        let value = cosine_sim_matrix(self.value(a));
        self.push(value, Op::CosineSim(a), "cosine_sim")
    }

    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Result<Var> {
        let name = op.name();
        self.push(value, Op::Custom(inputs.to_vec(), op), name)
    }

    /// Back-propagates from the scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward needs a scalar output"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let nodes = &self.nodes;
            let needs = |v: Var| nodes[v.0].needs_grad;
            let mut send = |v: Var, t: Tensor| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot => *slot = Some(t),
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) | Op::Propagate(a, b) => {
                    if needs(*a) {
                        send(*a, g.matmul(&val(*b).transpose())?);
                    }
                    if needs(*b) {
                        send(*b, val(*a).transpose().matmul(&g)?);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.clone());
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|x| -x));
                    send(*a, g.clone());
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_map(val(*b), |x, y| x * y));
                    send(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    send(*bias, gb);
                    send(*a, g.clone());
                }
                Op::Scale(a, c) => send(*a, g.map(|x| x * c)),
                Op::Shift(a) => send(*a, g.clone()),
                Op::RowSum(a) => {
                    let x = val(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        let gr = g.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|o| *o = gr);
                    }
                    send(*a, ga);
                }
                Op::Sum(a) => {
                    let x = val(*a);
                    send(*a, Tensor::filled(x.rows(), x.cols(), g.item()));
                }
                Op::Relu(a) => {
                    send(*a, g.zip_map(val(*a), |gg, x| if x > 0.0 { gg } else { 0.0 }));
                }
                Op::Tanh(_) | Op::Sigmoid(_) => {
                    let y = &node.value;
                    let (a, ga) = match &node.op {
                        Op::Tanh(a) => (*a, g.zip_map(y, |gg, y| gg * (1.0 - y * y))),
                        Op::Sigmoid(a) => (*a, g.zip_map(y, |gg, y| gg * y * (1.0 - y))),
                        _ => unreachable!(),
                    };
                    send(a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for (c, o) in ga.row_mut(r).iter_mut().enumerate() {
                            *o = yr[c] * (gr[c] - dot);
                        }
                    }
                    send(*a, ga);
                }
                Op::SelectRows(a, idx) => {
                    let x = val(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (k, &i) in idx.iter().enumerate() {
                        for (o, v) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    send(*a, ga);
                }
                Op::Pick(a, cols) => {
                    let x = val(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (r, &c) in cols.iter().enumerate() {
                        ga.set(r, c, g.get(r, 0));
                    }
                    send(*a, ga);
                }
                Op::CosineSim(a) => {
                    if needs(*a) {
                        send(*a, cosine_sim_backward(val(*a), &node.value, &g));
                    }
                }
                Op::Custom(inputs, op) => {
                    let xs: Vec<&Tensor> = inputs.iter().map(|v| val(*v)).collect();
                    let gs = op.backward(&xs, &node.value, &g);
                    for (v, t) in inputs.iter().zip(gs) {
                        send(*v, t);
                    }
                }
            }
            grads[id] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Adds the gradients of every registered parameter that lives in
    /// `store` into its gradient slot.
    pub fn accumulate_into(&self, store: &mut ParamStore) -> Result<()> {
        for (name, v) in &self.params {
            if !store.contains(name) {
                continue;
            }
            if let Some(g) = self.grad(*v) {
                store.add_grad(name, g)?;
            }
        }
        Ok(())
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

fn row_norms(x: &Tensor) -> Vec<f64> {
    (0..x.rows())
        .map(|r| x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

pub(crate) fn cosine_sim_matrix(x: &Tensor) -> Tensor {
    let n = x.rows();
    let norms = row_norms(x);
    let sq: Vec<f64> = (0..n).map(|r| x.row(r).iter().map(|v| v * v).sum()).collect();
    let mut out = Tensor::zeros(n, n);
    for i in 0..n {
        if norms[i] == 0.0 {
            continue;
        }
        for j in i..n {
            if norms[j] == 0.0 {
                continue;
            }
            let dot: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
            let cos = (dot / (sq[i] * sq[j]).sqrt()).clamp(-1.0, 1.0);
            let s = 0.5 * (1.0 + cos);
            out.set(i, j, s);
            out.set(j, i, s);
        }
    }
    out
}

/// With `u = x / ‖x‖` and `H = (G + Gᵀ) / 2`, row `i` of the gradient is
/// `(H u - (Σ_j H_ij cos_ij) u_i) / ‖x_i‖`, restricted to nonzero rows.
fn cosine_sim_backward(x: &Tensor, sim: &Tensor, g: &Tensor) -> Tensor {
    let n = x.rows();
    let norms = row_norms(x);
    let mut out = Tensor::zeros(n, x.cols());
    for i in 0..n {
        if norms[i] == 0.0 {
            continue;
        }
        let mut acc = vec![0.0; x.cols()];
        let mut diag = 0.0;
        for (j, &nj) in norms.iter().enumerate() {
            if nj == 0.0 {
                continue;
            }
            let h = 0.5 * (g.get(i, j) + g.get(j, i));
            if h == 0.0 {
                continue;
            }
            let cos = 2.0 * sim.get(i, j) - 1.0;
            diag += h * cos;
            let inv = h / nj;
            for (a, v) in acc.iter_mut().zip(x.row(j)) {
                *a += inv * v;
            }
        }
        let xi = x.row(i);
        let ni = norms[i];
        for (c, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = (acc[c] - diag * xi[c] / ni) / ni;
        }
    }
    out
}
