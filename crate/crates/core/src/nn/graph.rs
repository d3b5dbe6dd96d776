//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation in creation order, so the node list is
//! already a topological order and [`Graph::backward`] is a single reverse
//! sweep. Parameters enter through [`Graph::param`]; in an inference graph
//! they are recorded as plain constants and nothing is differentiable.

use super::params::{ParamId, ParamSet};
use super::tensor::{matmul_into, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Relu(NodeId),
    Tanh(NodeId),
    Elu(NodeId),
    Abs(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    RowSum(NodeId),
    ConcatCols(Vec<NodeId>),
    Gather(NodeId, Vec<usize>),
    RowVecMat { x: NodeId, w: NodeId, m: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    record: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    /// A recording graph: parameters are differentiable.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), record: true }
    }

    /// An inference graph: parameters enter as constants.
    pub fn inference() -> Self {
        Self { nodes: Vec::new(), record: false }
    }

    pub fn is_recording(&self) -> bool {
        self.record
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn take_value(&mut self, id: NodeId) -> Tensor<T> {
        self.nodes[id.0].value.clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> NodeId {
        self.nodes.push(Node { value, op, tracked });
        NodeId(self.nodes.len() - 1)
    }

    fn tracked(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].tracked)
    }

    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, params: &ParamSet<T>, id: ParamId) -> NodeId {
        let t = params.get(id);
        let value = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("param shape is consistent");
        if self.record {
            self.push(value, Op::Param(id), true)
        } else {
            self.push(value, Op::Leaf, false)
        }
    }

    fn dims2(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        let s = self.value(id).shape();
        if s.len() == 2 {
            Ok((s[0], s[1]))
        } else {
            Err(Error::shape(op, "2-D tensor", s))
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, k) = self.dims2(a, "matmul")?;
        let (k2, m) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", [n, k], [k2, m]));
        }
        let mut out = vec![T::zero(); n * m];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, n, k, m);
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::MatMul(a, b), tracked))
    }

    /// Adds a `[m]` bias to every row of `[n, m]`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (n, m) = self.dims2(a, "add_row")?;
        let bs = self.value(bias).shape();
        if bs != [m] {
            return Err(Error::shape("add_row", [m], bs));
        }
        let b = self.value(bias).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(m) {
            row.iter_mut().zip(b).for_each(|(o, &x)| *o += x);
        }
        let tracked = self.tracked(&[a, bias]);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::AddRow(a, bias), tracked))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, name: &'static str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(name, va.shape(), vb.shape()));
        }
        let out: Vec<T> = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = va.shape().to_vec();
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, op, tracked))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(T) -> T, op: Op<T>) -> NodeId {
        let value = self.value(a).map(f);
        let tracked = self.tracked(&[a]);
        self.push(value, op, tracked)
    }

    pub fn scale(&mut self, a: NodeId, s: T) -> NodeId {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.max(T::zero()), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, T::tanh, Op::Tanh(a))
    }

    /// ELU with unit slope parameter.
    pub fn elu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| if x > T::zero() { x } else { x.exp_m1() }, Op::Elu(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.unary(a, T::abs, Op::Abs(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: T = self.value(a).data().iter().copied().sum();
        let tracked = self.tracked(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let s: T = v.data().iter().copied().sum::<T>() / T::lit(v.len() as f64);
        let tracked = self.tracked(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::Mean(a), tracked))
    }

    /// `[n, m] → [n, 1]` row sums.
    pub fn row_sum(&mut self, a: NodeId) -> Result<NodeId> {
        let (n, m) = self.dims2(a, "row_sum")?;
        let out = self.value(a).data().chunks(m.max(1)).map(|r| r.iter().copied().sum()).take(n).collect();
        let tracked = self.tracked(&[a]);
        Ok(self.push(Tensor::new(vec![n, 1], out)?, Op::RowSum(a), tracked))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(Error::shape("concat_cols", "at least one part", 0))?;
        let (n, _) = self.dims2(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_cols")?;
            if r != n {
                return Err(Error::shape("concat_cols", n, r));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let tracked = self.tracked(parts);
        Ok(self.push(Tensor::new(vec![n, total], out)?, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Picks column `index[r]` of each row: `[n, m] → [n, 1]`.
    pub fn gather(&mut self, a: NodeId, index: Vec<usize>) -> Result<NodeId> {
        let (n, m) = self.dims2(a, "gather")?;
        if index.len() != n {
            return Err(Error::shape("gather", n, index.len()));
        }
        if let Some(&bad) = index.iter().find(|&&j| j >= m) {
            return Err(Error::shape("gather", format!("index < {m}"), bad));
        }
        let v = self.value(a).data();
        let out = index.iter().enumerate().map(|(r, &j)| v[r * m + j]).collect();
        let tracked = self.tracked(&[a]);
        Ok(self.push(Tensor::new(vec![n, 1], out)?, Op::Gather(a, index), tracked))
    }

    /// Per-row vector-matrix product: `x[b, n]` times the row-major `[n, m]`
    /// matrix stored in row `b` of `w[b, n·m]`, giving `[b, m]`.
    pub fn row_vec_mat(&mut self, x: NodeId, w: NodeId, m: usize) -> Result<NodeId> {
        let (b, n) = self.dims2(x, "row_vec_mat")?;
        let (bw, nm) = self.dims2(w, "row_vec_mat")?;
        if bw != b || nm != n * m {
            return Err(Error::shape("row_vec_mat", [b, n * m], [bw, nm]));
        }
        let (xv, wv) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![T::zero(); b * m];
        for r in 0..b {
            matmul_into(&xv[r * n..(r + 1) * n], &wv[r * nm..(r + 1) * nm], &mut out[r * m..(r + 1) * m], 1, n, m);
        }
        let tracked = self.tracked(&[x, w]);
        Ok(self.push(Tensor::new(vec![b, m], out)?, Op::RowVecMat { x, w, m }, tracked))
    }

    /// Accumulates `d loss / d param` into the gradient slot of every
    /// parameter that `loss` depends on.
    pub fn backward(&self, loss: NodeId, params: &mut ParamSet<T>) -> Result<()> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        if !self.record || !self.nodes[loss.0].tracked {
            return Err(Error::Detached);
        }
        lv.check_finite("loss")?;

        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    if pid.0 >= params.len() || params.get(*pid).shape() != node.value.shape() {
                        return Err(Error::shape("backward param", node.value.shape(), "foreign parameter set"));
                    }
                    params.tensors_mut()[pid.0].accumulate_grad(&g);
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.dims2(*a, "matmul")?;
                    let m = self.value(*b).cols();
                    if self.nodes[a.0].tracked {
                        // dA = dC · Bᵀ
                        let bv = self.value(*b).data();
                        let mut da = vec![T::zero(); n * k];
                        for i in 0..n {
                            let gi = &g[i * m..(i + 1) * m];
                            for p in 0..k {
                                let brow = &bv[p * m..(p + 1) * m];
                                da[i * k + p] = gi.iter().zip(brow).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                            }
                        }
                        accumulate(&mut grads, *a, da);
                    }
                    if self.nodes[b.0].tracked {
                        // dB = Aᵀ · dC
                        let av = self.value(*a).data();
                        let mut db = vec![T::zero(); k * m];
                        for i in 0..n {
                            let gi = &g[i * m..(i + 1) * m];
                            for p in 0..k {
                                let aip = av[i * k + p];
                                if aip == T::zero() {
                                    continue;
                                }
                                for (d, &x) in db[p * m..(p + 1) * m].iter_mut().zip(gi) {
                                    *d += aip * x;
                                }
                            }
                        }
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::AddRow(a, bias) => {
                    let m = node.value.cols();
                    if self.nodes[bias.0].tracked {
                        let mut db = vec![T::zero(); m];
                        for row in g.chunks(m) {
                            db.iter_mut().zip(row).for_each(|(d, &x)| *d += x);
                        }
                        accumulate(&mut grads, *bias, db);
                    }
                    self.pass(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    self.pass(&mut grads, *b, g.clone());
                    self.pass(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    self.pass(&mut grads, *b, g.iter().map(|&x| -x).collect());
                    self.pass(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    self.pass(&mut grads, *a, g.iter().zip(bv).map(|(&x, &y)| x * y).collect());
                    self.pass(&mut grads, *b, g.iter().zip(av).map(|(&x, &y)| x * y).collect());
                }
                Op::Scale(a, s) => self.pass(&mut grads, *a, g.iter().map(|&x| x * *s).collect()),
                Op::Relu(a) => {
                    let av = self.value(*a).data();
                    self.pass(&mut grads, *a, g.iter().zip(av).map(|(&x, &v)| if v > T::zero() { x } else { T::zero() }).collect());
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    self.pass(&mut grads, *a, g.iter().zip(y).map(|(&x, &t)| x * (T::one() - t * t)).collect());
                }
                Op::Elu(a) => {
                    let (av, y) = (self.value(*a).data(), node.value.data());
                    let d = g.iter().zip(av.iter().zip(y)).map(|(&x, (&v, &t))| if v > T::zero() { x } else { x * (t + T::one()) });
                    self.pass(&mut grads, *a, d.collect());
                }
                Op::Abs(a) => {
                    let av = self.value(*a).data();
                    let d = g.iter().zip(av).map(|(&x, &v)| {
                        if v > T::zero() {
                            x
                        } else if v < T::zero() {
                            -x
                        } else {
                            T::zero()
                        }
                    });
                    self.pass(&mut grads, *a, d.collect());
                }
                Op::Square(a) => {
                    let av = self.value(*a).data();
                    let two = T::lit(2.0);
                    self.pass(&mut grads, *a, g.iter().zip(av).map(|(&x, &v)| two * v * x).collect());
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    self.pass(&mut grads, *a, vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    self.pass(&mut grads, *a, vec![g[0] / T::lit(n as f64); n]);
                }
                Op::RowSum(a) => {
                    let m = self.value(*a).cols();
                    let d = g.iter().flat_map(|&x| std::iter::repeat_n(x, m)).collect();
                    self.pass(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let n = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        if self.nodes[p.0].tracked {
                            let mut d = Vec::with_capacity(n * w);
                            for r in 0..n {
                                d.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                            }
                            accumulate(&mut grads, p, d);
                        }
                        offset += w;
                    }
                }
                Op::Gather(a, index) => {
                    let m = self.value(*a).cols();
                    let mut d = vec![T::zero(); self.value(*a).len()];
                    for (r, &j) in index.iter().enumerate() {
                        d[r * m + j] = g[r];
                    }
                    self.pass(&mut grads, *a, d);
                }
                Op::RowVecMat { x, w, m } => {
                    let m = *m;
                    let (b, n) = self.dims2(*x, "row_vec_mat")?;
                    let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                    if self.nodes[x.0].tracked {
                        let mut dx = vec![T::zero(); b * n];
                        for r in 0..b {
                            let gr = &g[r * m..(r + 1) * m];
                            for i in 0..n {
                                let wrow = &wv[r * n * m + i * m..r * n * m + (i + 1) * m];
                                dx[r * n + i] = gr.iter().zip(wrow).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                    if self.nodes[w.0].tracked {
                        let mut dw = vec![T::zero(); b * n * m];
                        for r in 0..b {
                            let gr = &g[r * m..(r + 1) * m];
                            for i in 0..n {
                                let xi = xv[r * n + i];
                                for (d, &p) in dw[r * n * m + i * m..r * n * m + (i + 1) * m].iter_mut().zip(gr) {
                                    *d = xi * p;
                                }
                            }
                        }
                        accumulate(&mut grads, *w, dw);
                    }
                }
            }
        }
        Ok(())
    }

    fn pass(&self, grads: &mut [Option<Vec<T>>], to: NodeId, g: Vec<T>) {
        if self.nodes[to.0].tracked {
            accumulate(grads, to, g);
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], to: NodeId, g: Vec<T>) {
    match grads[to.0].as_mut() {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => grads[to.0] = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(values: &[f64], shape: Vec<usize>) -> (ParamSet<f64>, ParamId) {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::from_f64(shape, values).unwrap());
        (ps, id)
    }

    #[test]
    fn sum_of_squares_gradient_is_twice_value() {
        let (mut ps, id) = set_with(&[1.0, -2.0, 0.5], vec![3]);
        let mut g = Graph::new();
        let w = g.param(&ps, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq);
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(id).grad().unwrap(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let (mut ps, id) = set_with(&[3.0], vec![1]);
        let mut g = Graph::new();
        let w = g.param(&ps, id);
        let loss = g.sum(w);
        g.backward(loss, &mut ps).unwrap();
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(id).grad().unwrap(), &[2.0]);
    }

    #[test]
    fn constant_loss_is_detached() {
        let (mut ps, _) = set_with(&[3.0], vec![1]);
        let mut g = Graph::<f64>::new();
        let c = g.input(Tensor::scalar(4.0));
        let loss = g.sum(c);
        assert!(matches!(g.backward(loss, &mut ps), Err(Error::Detached)));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let (mut ps, id) = set_with(&[1.0, 2.0], vec![2]);
        let mut g = Graph::new();
        let w = g.param(&ps, id);
        assert!(matches!(g.backward(w, &mut ps), Err(Error::NotScalar(_))));
    }

    #[test]
    fn inference_graph_is_detached() {
        let (mut ps, id) = set_with(&[1.0], vec![1]);
        let mut g = Graph::inference();
        let w = g.param(&ps, id);
        let loss = g.sum(w);
        assert!(matches!(g.backward(loss, &mut ps), Err(Error::Detached)));
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut g = Graph::<f64>::new();
        let a = g.input(Tensor::zeros(vec![2, 3]));
        let b = g.input(Tensor::zeros(vec![2, 3]));
        assert!(matches!(g.matmul(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn row_vec_mat_matches_per_row_product() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::from_f64(vec![2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap());
        // row 0: [[1,0,0],[0,1,0]]; row 1: all ones
        let w = g
            .input(Tensor::from_f64(vec![2, 6], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap());
        let y = g.row_vec_mat(x, w, 3).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 0.0, 7.0, 7.0, 7.0]);
    }
}
