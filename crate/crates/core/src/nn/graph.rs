//! Tape-based reverse-mode differentiation over row-major matrices.
//!
//! Every value is a `rows x cols` matrix; scalars are `1 x 1`. Operations
//! append nodes to the tape, and [`Graph::backward`] walks it in reverse.

use std::collections::BTreeMap;

use super::{ParameterSet, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(String),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Ln1p(Var),
    SliceRows(Var, usize),
    Square(Var),
    Abs(Var),
    Gather(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Row(Var, usize),
    RepeatRows(Var, Vec<usize>),
    Im2Col(Var, usize),
    MaskedSoftmax(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
}

fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let orow = &mut out[i * c..(i + 1) * c];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[p * c..(p + 1) * c]) {
                *o += av * bv;
            }
        }
    }
    out
}

fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
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

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, data.len());
        self.nodes.push(Node { rows, cols, data, op });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).data
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).data[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::matrix(n.rows, n.cols, n.data.clone()).expect("node shape is consistent")
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "input {rows}x{cols} given {} values",
                data.len()
            )));
        }
        Ok(self.push(rows, cols, data, Op::Input))
    }

    pub fn input_tensor(&mut self, t: &Tensor) -> Var {
        self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Input)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: f64) -> Var {
        self.push(rows, cols, vec![value; rows * cols], Op::Input)
    }

    /// Leaf for a named parameter; repeated calls return the same node.
    pub fn param(&mut self, params: &ParameterSet, name: &str) -> Result<Var> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let t = params.get(name)?;
        let v = self.push(t.rows(), t.cols(), t.values().to_vec(), Op::Param(name.to_owned()));
        self.params.insert(name.to_owned(), v);
        Ok(v)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (r, c) = self.same_shape(a, b, what)?;
        let data = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(r, c, data, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(Error::Shape(format!(
                "add_row: {:?} onto {r}x{c}",
                self.shape(row)
            )));
        }
        let b = self.value(row).to_vec();
        let data = self
            .value(a)
            .chunks_exact(c.max(1))
            .flat_map(|x| x.iter().zip(&b).map(|(p, q)| p + q))
            .collect();
        Ok(self.push(r, c, data, Op::AddRow(a, row)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((r, k), (k2, c)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(Error::Shape(format!("matmul: {r}x{k} by {k2}x{c}")));
        }
        let data = matmul(self.value(a), self.value(b), r, k, c);
        Ok(self.push(r, c, data, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let data = transpose(self.value(a), r, c);
        self.push(c, r, data, Op::Transpose(a))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        let data = self.value(a).iter().map(|x| f(*x)).collect();
        self.push(r, c, data, op)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        self.map(a, |x| x + s, Op::AddScalar(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    /// `ln(1 + x)`, defined for `x > -1`.
    pub fn ln1p(&mut self, a: Var) -> Var {
        self.map(a, f64::ln_1p, Op::Ln1p(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, |x| x * x, Op::Square(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, f64::abs, Op::Abs(a))
    }

    /// Selects rows of `table` by index.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(table);
        if let Some(bad) = ids.iter().find(|i| **i >= r) {
            return Err(Error::Shape(format!("gather index {bad} outside {r} rows")));
        }
        let src = self.value(table);
        let data = ids.iter().flat_map(|i| src[i * c..(i + 1) * c].iter().copied()).collect();
        Ok(self.push(ids.len(), c, data, Op::Gather(table, ids.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let r = parts
            .first()
            .map(|p| self.shape(*p).0)
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        if parts.iter().any(|p| self.shape(*p).0 != r) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let c: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for p in parts {
                let pc = self.shape(*p).1;
                data.extend_from_slice(&self.value(*p)[i * pc..(i + 1) * pc]);
            }
        }
        Ok(self.push(r, c, data, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let c = parts
            .first()
            .map(|p| self.shape(*p).1)
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        if parts.iter().any(|p| self.shape(*p).1 != c) {
            return Err(Error::Shape("concat_rows: column counts differ".into()));
        }
        let r: usize = parts.iter().map(|p| self.shape(*p).0).sum();
        let mut data = Vec::with_capacity(r * c);
        for p in parts {
            data.extend_from_slice(self.value(*p));
        }
        Ok(self.push(r, c, data, Op::ConcatRows(parts.to_vec())))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if i >= r {
            return Err(Error::Shape(format!("row {i} of {r}")));
        }
        let data = self.value(a)[i * c..(i + 1) * c].to_vec();
        Ok(self.push(1, c, data, Op::Row(a, i)))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > r {
            return Err(Error::Shape(format!("rows {start}..{} of {r}", start + len)));
        }
        let data = self.value(a)[start * c..(start + len) * c].to_vec();
        Ok(self.push(len, c, data, Op::SliceRows(a, start)))
    }

    /// Repeats row `i` `counts[i]` times, preserving order.
    pub fn repeat_rows(&mut self, a: Var, counts: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if counts.len() != r {
            return Err(Error::Shape(format!("{} repeat counts for {r} rows", counts.len())));
        }
        let total: usize = counts.iter().sum();
        let src = self.value(a);
        let mut data = Vec::with_capacity(total * c);
        for (i, n) in counts.iter().enumerate() {
            for _ in 0..*n {
                data.extend_from_slice(&src[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(total, c, data, Op::RepeatRows(a, counts.to_vec())))
    }

    /// Zero-padded sliding windows: row `t` holds rows `t - k/2 ..= t + k/2`
    /// of `a` side by side, so a `[k*c, out]` matrix product is a
    /// same-length 1-D convolution.
    pub fn im2col(&mut self, a: Var, kernel: usize) -> Result<Var> {
        if kernel % 2 == 0 {
            return Err(Error::InvalidArgument(format!("kernel width {kernel} must be odd")));
        }
        let (t, c) = self.shape(a);
        let half = kernel / 2;
        let src = self.value(a);
        let mut data = vec![0.0; t * kernel * c];
        for i in 0..t {
            for j in 0..kernel {
                let s = i + j;
                if s < half || s - half >= t {
                    continue;
                }
                let s = s - half;
                data[(i * kernel + j) * c..(i * kernel + j + 1) * c].copy_from_slice(&src[s * c..(s + 1) * c]);
            }
        }
        Ok(self.push(t, kernel * c, data, Op::Im2Col(a, kernel)))
    }

    /// Row-wise softmax over the first `active[i]` columns; the rest are exactly 0.
    pub fn masked_softmax(&mut self, a: Var, active: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if active.len() != r {
            return Err(Error::Shape(format!("{} active counts for {r} rows", active.len())));
        }
        if let Some(k) = active.iter().find(|k| **k == 0 || **k > c) {
            return Err(Error::InvalidArgument(format!(
                "active count {k} outside 1..={c}"
            )));
        }
        let src = self.value(a);
        let mut data = vec![0.0; r * c];
        for (i, &k) in active.iter().enumerate() {
            let x = &src[i * c..i * c + k];
            let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut data[i * c..i * c + k];
            let mut z = 0.0;
            for (o, v) in out.iter_mut().zip(x) {
                *o = (v - m).exp();
                z += *o;
            }
            out.iter_mut().for_each(|o| *o /= z);
        }
        Ok(self.push(r, c, data, Op::MaskedSoftmax(a, active.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
        self.push(1, 1, vec![m], Op::Mean(a))
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf
    /// that influenced it.
    pub fn backward(&self, loss: Var) -> Result<BTreeMap<String, Vec<f64>>> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape(format!("loss has shape {:?}", self.shape(loss))));
        }
        if !self.scalar(loss).is_finite() {
            return Err(Error::Numeric(format!("loss is {}", self.scalar(loss))));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = BTreeMap::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
                let len = self.nodes[v.0].data.len();
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
                f(slot);
            };
            match &node.op {
                Op::Input => {}
                Op::Param(name) => {
                    out.insert(name.clone(), g);
                }
                Op::Add(a, b) => {
                    acc(*a, &|s| add_into(s, &g));
                    acc(*b, &|s| add_into(s, &g));
                }
                Op::Sub(a, b) => {
                    acc(*a, &|s| add_into(s, &g));
                    acc(*b, &|s| s.iter_mut().zip(&g).for_each(|(d, x)| *d -= x));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
                    acc(*a, &|s| {
                        for ((d, x), y) in s.iter_mut().zip(&g).zip(bv) {
                            *d += x * y;
                        }
                    });
                    acc(*b, &|s| {
                        for ((d, x), y) in s.iter_mut().zip(&g).zip(av) {
                            *d += x * y;
                        }
                    });
                }
                Op::AddRow(a, row) => {
                    acc(*a, &|s| add_into(s, &g));
                    let c = node.cols.max(1);
                    acc(*row, &|s| {
                        for chunk in g.chunks_exact(c) {
                            add_into(s, chunk);
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
                    let (r, k, c) = (na.rows, na.cols, nb.cols);
                    let bt = transpose(&nb.data, k, c);
                    let ga = matmul(&g, &bt, r, c, k);
                    acc(*a, &|s| add_into(s, &ga));
                    let at = transpose(&na.data, r, k);
                    let gb = matmul(&at, &g, k, r, c);
                    acc(*b, &|s| add_into(s, &gb));
                }
                Op::Transpose(a) => {
                    let gt = transpose(&g, node.rows, node.cols);
                    acc(*a, &|s| add_into(s, &gt));
                }
                Op::Scale(a, k) => acc(*a, &|s| s.iter_mut().zip(&g).for_each(|(d, x)| *d += k * x)),
                Op::AddScalar(a) => acc(*a, &|s| add_into(s, &g)),
                Op::Sigmoid(a) => acc(*a, &|s| {
                    for ((d, x), y) in s.iter_mut().zip(&g).zip(&node.data) {
                        *d += x * y * (1.0 - y);
                    }
                }),
                Op::Tanh(a) => acc(*a, &|s| {
                    for ((d, x), y) in s.iter_mut().zip(&g).zip(&node.data) {
                        *d += x * (1.0 - y * y);
                    }
                }),
                Op::Relu(a) => acc(*a, &|s| {
                    for ((d, x), y) in s.iter_mut().zip(&g).zip(&node.data) {
                        if *y > 0.0 {
                            *d += x;
                        }
                    }
                }),
                Op::Exp(a) => acc(*a, &|s| {
                    for ((d, x), y) in s.iter_mut().zip(&g).zip(&node.data) {
                        *d += x * y;
                    }
                }),
                Op::Ln1p(a) => {
                    let av = &self.nodes[a.0].data;
                    acc(*a, &|s| {
                        for ((d, x), y) in s.iter_mut().zip(&g).zip(av) {
                            *d += x / (1.0 + y);
                        }
                    });
                }
                Op::SliceRows(a, start) => {
                    let c = node.cols;
                    acc(*a, &|s| add_into(&mut s[start * c..start * c + g.len()], &g));
                }
                Op::Square(a) => {
                    let av = &self.nodes[a.0].data;
                    acc(*a, &|s| {
                        for ((d, x), y) in s.iter_mut().zip(&g).zip(av) {
                            *d += 2.0 * x * y;
                        }
                    });
                }
                Op::Abs(a) => {
                    let av = &self.nodes[a.0].data;
                    acc(*a, &|s| {
                        for ((d, x), y) in s.iter_mut().zip(&g).zip(av) {
                            if *y != 0.0 {
                                *d += x * y.signum();
                            }
                        }
                    });
                }
                Op::Gather(table, ids) => {
                    let c = node.cols;
                    acc(*table, &|s| {
                        for (row, id) in ids.iter().enumerate() {
                            add_into(&mut s[id * c..(id + 1) * c], &g[row * c..(row + 1) * c]);
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.nodes[p.0].cols;
                        let c = node.cols;
                        acc(*p, &|s| {
                            for i in 0..node.rows {
                                add_into(&mut s[i * pc..(i + 1) * pc], &g[i * c + offset..i * c + offset + pc]);
                            }
                        });
                        offset += pc;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.nodes[p.0].data.len();
                        acc(*p, &|s| add_into(s, &g[offset..offset + len]));
                        offset += len;
                    }
                }
                Op::Row(a, i) => {
                    let c = node.cols;
                    acc(*a, &|s| add_into(&mut s[i * c..(i + 1) * c], &g));
                }
                Op::RepeatRows(a, counts) => {
                    let c = node.cols;
                    acc(*a, &|s| {
                        let mut out_row = 0;
                        for (i, n) in counts.iter().enumerate() {
                            for _ in 0..*n {
                                add_into(&mut s[i * c..(i + 1) * c], &g[out_row * c..(out_row + 1) * c]);
                                out_row += 1;
                            }
                        }
                    });
                }
                Op::Im2Col(a, kernel) => {
                    let src = &self.nodes[a.0];
                    let (t, c, half) = (src.rows, src.cols, kernel / 2);
                    acc(*a, &|s| {
                        for i in 0..t {
                            for j in 0..*kernel {
                                let p = i + j;
                                if p < half || p - half >= t {
                                    continue;
                                }
                                let p = p - half;
                                add_into(
                                    &mut s[p * c..(p + 1) * c],
                                    &g[(i * kernel + j) * c..(i * kernel + j + 1) * c],
                                );
                            }
                        }
                    });
                }
                Op::MaskedSoftmax(a, active) => {
                    let c = node.cols;
                    acc(*a, &|s| {
                        for (i, &k) in active.iter().enumerate() {
                            let y = &node.data[i * c..i * c + k];
                            let gy = &g[i * c..i * c + k];
                            let dot: f64 = y.iter().zip(gy).map(|(p, q)| p * q).sum();
                            for j in 0..k {
                                s[i * c + j] += y[j] * (gy[j] - dot);
                            }
                        }
                    });
                }
                Op::Sum(a) => acc(*a, &|s| s.iter_mut().for_each(|d| *d += g[0])),
                Op::Mean(a) => {
                    let n = self.nodes[a.0].data.len().max(1) as f64;
                    acc(*a, &|s| s.iter_mut().for_each(|d| *d += g[0] / n));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences on an input-only graph builder, used to spot-check
    /// each op's backward rule.
    fn check_op(rows: usize, cols: usize, build: impl Fn(&mut Graph, Var) -> Var) {
        let mut ps = ParameterSet::new();
        let vals: Vec<f64> = (0..rows * cols).map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.03).collect();
        ps.insert("x", Tensor::matrix(rows, cols, vals.clone()).unwrap());
        let eval = |ps: &ParameterSet| {
            let mut g = Graph::new();
            let x = g.param(ps, "x").unwrap();
            let y = build(&mut g, x);
            let l = g.sum(y);
            (g.scalar(l), g.backward(l).unwrap())
        };
        let (_, grads) = eval(&ps);
        let analytic = grads.get("x").cloned().unwrap_or_else(|| vec![0.0; vals.len()]);
        let eps = 1e-6;
        for i in 0..vals.len() {
            let mut p = ps.clone();
            p.get_mut("x").unwrap().values_mut()[i] += eps;
            let up = eval(&p).0;
            p.get_mut("x").unwrap().values_mut()[i] -= 2.0 * eps;
            let down = eval(&p).0;
            let numeric = (up - down) / (2.0 * eps);
            assert!(
                (numeric - analytic[i]).abs() < 1e-6 * (1.0 + numeric.abs()),
                "element {i}: numeric {numeric} analytic {}",
                analytic[i]
            );
        }
    }

    #[test]
    fn op_gradients() {
        check_op(3, 4, |g, x| {
            let y = g.sigmoid(x);
            let z = g.tanh(y);
            g.mul(z, x).unwrap()
        });
        check_op(3, 4, |g, x| {
            let t = g.transpose(x);
            g.matmul(x, t).unwrap()
        });
        check_op(2, 3, |g, x| {
            let e = g.exp(x);
            let s = g.square(e);
            let a = g.abs(x);
            let b = g.sub(s, a).unwrap();
            g.scale(b, 0.3)
        });
        check_op(3, 2, |g, x| {
            let r = g.row(x, 1).unwrap();
            let y = g.add_row(x, r).unwrap();
            let rep = g.repeat_rows(y, &[2, 0, 3]).unwrap();
            let rep = g.slice_rows(rep, 1, 3).unwrap();
            let sq = g.square(rep);
            let rep = g.ln1p(sq);
            let sq = g.square(rep);
            g.mean(sq)
        });
        check_op(5, 2, |g, x| {
            let cols = g.im2col(x, 3).unwrap();
            let sq = g.square(cols);
            let gathered = g.gather(sq, &[0, 4, 4, 2]).unwrap();
            g.concat_cols(&[gathered, gathered]).unwrap()
        });
        check_op(3, 4, |g, x| {
            let p = g.masked_softmax(x, &[4, 2, 1]).unwrap();
            let w = g.input(3, 4, (0..12).map(|i| i as f64).collect()).unwrap();
            let pw = g.mul(p, w).unwrap();
            let both = g.concat_rows(&[pw, x]).unwrap();
            let r = g.relu(both);
            g.add_scalar(r, 2.0)
        });
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let a = g.constant(2, 3, 1.0);
        let b = g.constant(3, 2, 1.0);
        assert!(g.add(a, b).is_err());
        assert!(g.matmul(a, a).is_err());
        assert!(g.im2col(a, 2).is_err());
        assert!(g.masked_softmax(a, &[0, 1]).is_err());
        assert!(g.masked_softmax(a, &[4, 1]).is_err());
        assert!(g.backward(a).is_err());
    }

    #[test]
    fn parameters_reuse_single_leaf() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::scalar(3.0));
        let mut g = Graph::new();
        let w1 = g.param(&ps, "w").unwrap();
        let w2 = g.param(&ps, "w").unwrap();
        assert_eq!(w1, w2);
        let y = g.mul(w1, w2).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads["w"], vec![6.0]);
    }
}
