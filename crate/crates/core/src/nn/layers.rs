//! Parameterized layers. Each layer knows its parameter names, can
//! initialize them into a [`ParameterSet`], and records its forward pass on a
//! [`Graph`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, ParameterSet, Tensor, Var};
use crate::error::{Error, Result};

fn expect_cols(g: &Graph, x: Var, cols: usize, layer: &str) -> Result<()> {
    let (_, c) = g.shape(x);
    if c != cols {
        return Err(Error::Shape(format!("{layer} expects {cols} input dims, got {c}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(name: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Self {
            name: name.into(),
            in_dim,
            out_dim,
        }
    }

    pub fn weight(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        ps.insert_uniform(self.weight(), self.in_dim, self.out_dim, self.in_dim, rng);
        ps.insert_uniform(self.bias(), 1, self.out_dim, self.in_dim, rng);
    }

    pub fn forward(&self, g: &mut Graph, ps: &ParameterSet, x: Var) -> Result<Var> {
        expect_cols(g, x, self.in_dim, &self.name)?;
        let w = g.param(ps, &self.weight())?;
        let b = g.param(ps, &self.bias())?;
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub name: String,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(name: impl Into<String>, vocab: usize, dim: usize) -> Self {
        Self {
            name: name.into(),
            vocab,
            dim,
        }
    }

    pub fn table(&self) -> String {
        format!("{}.table", self.name)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        ps.insert_uniform(self.table(), self.vocab, self.dim, self.dim, rng);
    }

    pub fn forward(&self, g: &mut Graph, ps: &ParameterSet, ids: &[usize]) -> Result<Var> {
        if let Some(bad) = ids.iter().find(|i| **i >= self.vocab) {
            return Err(Error::Vocabulary {
                kind: "embedding",
                token: format!("{}[{bad}]", self.name),
            });
        }
        let t = g.param(ps, &self.table())?;
        g.gather(t, ids)
    }
}

/// Same-length 1-D convolution over the time axis. Weights are stored as a
/// `[kernel * in_dim, out_dim]` matrix whose row `j * in_dim + c` is tap `j`
/// (offset `j - kernel/2`) of input channel `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new(name: impl Into<String>, in_dim: usize, out_dim: usize, kernel: usize) -> Self {
        Self {
            name: name.into(),
            in_dim,
            out_dim,
            kernel,
        }
    }

    pub fn weight(&self) -> String {
        format!("{}.weight", self.name)
    }

    pub fn bias(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        let fan_in = self.kernel * self.in_dim;
        ps.insert_uniform(self.weight(), fan_in, self.out_dim, fan_in, rng);
        ps.insert_uniform(self.bias(), 1, self.out_dim, fan_in, rng);
    }

    pub fn forward(&self, g: &mut Graph, ps: &ParameterSet, x: Var) -> Result<Var> {
        expect_cols(g, x, self.in_dim, &self.name)?;
        let cols = g.im2col(x, self.kernel)?;
        let w = g.param(ps, &self.weight())?;
        let b = g.param(ps, &self.bias())?;
        let y = g.matmul(cols, w)?;
        g.add_row(y, b)
    }
}

/// Convolutions each followed by `tanh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub layers: Vec<Conv1d>,
}

impl ConvStack {
    pub fn new(name: &str, in_dim: usize, channels: usize, kernel: usize, depth: usize) -> Self {
        let layers = (0..depth)
            .map(|i| {
                let input = if i == 0 { in_dim } else { channels };
                Conv1d::new(format!("{name}.conv{i}"), input, channels, kernel)
            })
            .collect();
        Self { layers }
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.layers.last().map(|l| l.out_dim)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        self.layers.iter().for_each(|l| l.init(ps, rng));
    }

    pub fn forward(&self, g: &mut Graph, ps: &ParameterSet, mut x: Var) -> Result<Var> {
        for l in &self.layers {
            let y = l.forward(g, ps, x)?;
            x = g.tanh(y);
        }
        Ok(x)
    }
}

/// Gated recurrent cell:
///
/// ```text
/// z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
/// r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
/// n_t = tanh(x_t W_n + (r_t * h_{t-1}) U_n + b_n)
/// h_t = n_t + z_t * (h_{t-1} - n_t)
/// ```
///
/// with `h_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub name: String,
    pub in_dim: usize,
    pub hidden: usize,
}

const GATES: [&str; 3] = ["z", "r", "n"];

impl GruCell {
    pub fn new(name: impl Into<String>, in_dim: usize, hidden: usize) -> Self {
        Self {
            name: name.into(),
            in_dim,
            hidden,
        }
    }

    pub fn input_weight(&self, gate: &str) -> String {
        format!("{}.w_{gate}", self.name)
    }

    pub fn hidden_weight(&self, gate: &str) -> String {
        format!("{}.u_{gate}", self.name)
    }

    pub fn bias(&self, gate: &str) -> String {
        format!("{}.b_{gate}", self.name)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        for gate in GATES {
            ps.insert_uniform(self.input_weight(gate), self.in_dim, self.hidden, self.hidden, rng);
            ps.insert_uniform(self.hidden_weight(gate), self.hidden, self.hidden, self.hidden, rng);
            ps.insert_uniform(self.bias(gate), 1, self.hidden, self.hidden, rng);
        }
    }

    /// Runs the cell over the rows of `x` in the given order; returns one
    /// hidden row per input row, in input order.
    pub fn run(&self, g: &mut Graph, ps: &ParameterSet, x: Var, reverse: bool) -> Result<Vec<Var>> {
        expect_cols(g, x, self.in_dim, &self.name)?;
        let (t, _) = g.shape(x);
        if t == 0 {
            return Err(Error::Shape(format!("{}: empty time axis", self.name)));
        }
        let mut projected = Vec::with_capacity(3);
        let mut recurrent = Vec::with_capacity(3);
        for gate in GATES {
            let w = g.param(ps, &self.input_weight(gate))?;
            let b = g.param(ps, &self.bias(gate))?;
            let xw = g.matmul(x, w)?;
            projected.push(g.add_row(xw, b)?);
            recurrent.push(g.param(ps, &self.hidden_weight(gate))?);
        }
        let mut h = g.constant(1, self.hidden, 0.0);
        let mut out = vec![h; t];
        let order: Vec<usize> = if reverse { (0..t).rev().collect() } else { (0..t).collect() };
        for step in order {
            let xz = g.row(projected[0], step)?;
            let xr = g.row(projected[1], step)?;
            let xn = g.row(projected[2], step)?;
            let hz = g.matmul(h, recurrent[0])?;
            let hr = g.matmul(h, recurrent[1])?;
            let z_in = g.add(xz, hz)?;
            let z = g.sigmoid(z_in);
            let r_in = g.add(xr, hr)?;
            let r = g.sigmoid(r_in);
            let rh = g.mul(r, h)?;
            let hn = g.matmul(rh, recurrent[2])?;
            let n_in = g.add(xn, hn)?;
            let n = g.tanh(n_in);
            let diff = g.sub(h, n)?;
            let gated = g.mul(z, diff)?;
            h = g.add(n, gated)?;
            out[step] = h;
        }
        Ok(out)
    }
}

/// Forward and backward gated recurrent passes concatenated per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiRecurrent {
    pub forward: GruCell,
    pub backward: GruCell,
}

impl BiRecurrent {
    pub fn new(name: &str, in_dim: usize, hidden: usize) -> Self {
        Self {
            forward: GruCell::new(format!("{name}.fwd"), in_dim, hidden),
            backward: GruCell::new(format!("{name}.bwd"), in_dim, hidden),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        self.forward.init(ps, rng);
        self.backward.init(ps, rng);
    }

    pub fn run(&self, g: &mut Graph, ps: &ParameterSet, x: Var) -> Result<Var> {
        let f = self.forward.run(g, ps, x, false)?;
        let b = self.backward.run(g, ps, x, true)?;
        let fw = g.concat_rows(&f)?;
        let bw = g.concat_rows(&b)?;
        g.concat_cols(&[fw, bw])
    }
}

/// Fixed sinusoidal position encoding, `rows x dim`.
pub fn sinusoidal_positions(rows: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * dim];
    for pos in 0..rows {
        for i in 0..dim {
            let rate = 1.0 / 10_000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = pos as f64 * rate;
            out[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

/// Single-head scaled dot-product self-attention with a residual connection:
/// `h = x W_in + b_in + PE`, `y = tanh(h + softmax(h W_q (h W_k)^T / sqrt(d)) h W_v W_o)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAttention {
    pub name: String,
    pub input: Linear,
    pub dim: usize,
}

impl SelfAttention {
    pub fn new(name: &str, in_dim: usize, dim: usize) -> Self {
        Self {
            name: name.to_owned(),
            input: Linear::new(format!("{name}.in"), in_dim, dim),
            dim,
        }
    }

    fn w(&self, which: &str) -> String {
        format!("{}.w_{which}", self.name)
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        self.input.init(ps, rng);
        for which in ["q", "k", "v", "o"] {
            ps.insert_uniform(self.w(which), self.dim, self.dim, self.dim, rng);
        }
    }

    pub fn run(&self, g: &mut Graph, ps: &ParameterSet, x: Var) -> Result<Var> {
        let (t, _) = g.shape(x);
        if t == 0 {
            return Err(Error::Shape(format!("{}: empty time axis", self.name)));
        }
        let projected = self.input.forward(g, ps, x)?;
        let pe = g.input(t, self.dim, sinusoidal_positions(t, self.dim))?;
        let h = g.add(projected, pe)?;
        let wq = g.param(ps, &self.w("q"))?;
        let wk = g.param(ps, &self.w("k"))?;
        let wv = g.param(ps, &self.w("v"))?;
        let wo = g.param(ps, &self.w("o"))?;
        let q = g.matmul(h, wq)?;
        let k = g.matmul(h, wk)?;
        let v = g.matmul(h, wv)?;
        let kt = g.transpose(k);
        let scores = g.matmul(q, kt)?;
        let scaled = g.scale(scores, 1.0 / (self.dim as f64).sqrt());
        let attn = g.masked_softmax(scaled, &vec![t; t])?;
        let ctx = g.matmul(attn, v)?;
        let mixed = g.matmul(ctx, wo)?;
        let y = g.add(h, mixed)?;
        Ok(g.tanh(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Recurrent,
    Attention,
}

/// Sequence encoder: bidirectional recurrent or self-attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Encoder {
    Recurrent(BiRecurrent),
    Attention(SelfAttention),
}

impl Encoder {
    /// `hidden` is the per-direction size for the recurrent kind and the
    /// model width for the attention kind.
    pub fn new(kind: EncoderKind, name: &str, in_dim: usize, hidden: usize) -> Self {
        match kind {
            EncoderKind::Recurrent => Encoder::Recurrent(BiRecurrent::new(name, in_dim, hidden)),
            EncoderKind::Attention => Encoder::Attention(SelfAttention::new(name, in_dim, hidden)),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Encoder::Recurrent(r) => r.out_dim(),
            Encoder::Attention(a) => a.dim,
        }
    }

    pub fn init<R: Rng>(&self, ps: &mut ParameterSet, rng: &mut R) {
        match self {
            Encoder::Recurrent(r) => r.init(ps, rng),
            Encoder::Attention(a) => a.init(ps, rng),
        }
    }

    pub fn run(&self, g: &mut Graph, ps: &ParameterSet, x: Var) -> Result<Var> {
        match self {
            Encoder::Recurrent(r) => r.run(g, ps, x),
            Encoder::Attention(a) => a.run(g, ps, x),
        }
    }
}

/// Same-length convolution of `input` (`[time, in_dims]`) with weights laid
/// out as in [`Conv1d`].
pub fn conv1d(input: &Tensor, weights: &Tensor, bias: &Tensor, kernel: usize) -> Result<Tensor> {
    if input.shape().len() != 2 {
        return Err(Error::Shape(format!("conv1d input shape {:?}", input.shape())));
    }
    let layer = Conv1d::new("conv", input.cols(), weights.cols(), kernel);
    if weights.rows() != kernel * input.cols() {
        return Err(Error::Shape(format!(
            "conv1d weights have {} rows, need kernel {kernel} x {} inputs",
            weights.rows(),
            input.cols()
        )));
    }
    let mut ps = ParameterSet::new();
    ps.insert(layer.weight(), weights.clone());
    ps.insert(layer.bias(), bias.clone());
    let mut g = Graph::new();
    let x = g.input_tensor(input);
    let y = layer.forward(&mut g, &ps, x)?;
    Ok(g.tensor(y))
}

/// Bidirectional recurrent pass over `input` (`[time, dims]`), returning `[time, 2 * hidden]`.
pub fn bidirectional_recurrent(input: &Tensor, layer: &BiRecurrent, params: &ParameterSet) -> Result<Tensor> {
    let mut g = Graph::new();
    let x = g.input_tensor(input);
    let y = layer.run(&mut g, params, x)?;
    Ok(g.tensor(y))
}

/// Softmax over the first `active` logits; later slots are exactly zero.
pub fn masked_softmax(logits: &[f64], active: usize) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let x = g.input(1, logits.len(), logits.to_vec())?;
    let p = g.masked_softmax(x, &[active])?;
    Ok(g.value(p).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct sliding-window sum, independent of the im2col route.
    fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, kernel: usize) -> Vec<f64> {
        let (t, cin, cout) = (x.rows(), x.cols(), w.cols());
        let half = kernel as isize / 2;
        let mut out = vec![0.0; t * cout];
        for i in 0..t {
            for o in 0..cout {
                let mut acc = b.get(0, o);
                for j in 0..kernel {
                    let src = i as isize + j as isize - half;
                    if src < 0 || src >= t as isize {
                        continue;
                    }
                    for c in 0..cin {
                        acc += x.get(src as usize, c) * w.get(j * cin + c, o);
                    }
                }
                out[i * cout + o] = acc;
            }
        }
        out
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(6, 3, &mut rng);
        let eye = Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let y = conv1d(&x, &eye, &Tensor::zeros(&[1, 3]), 1).unwrap();
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn conv_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(5, 2, &mut rng);
        let y = conv1d(&x, &Tensor::zeros(&[6, 4]), &Tensor::zeros(&[1, 4]), 3).unwrap();
        assert_eq!(y.shape(), &[5, 4]);
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn conv_matches_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..=16 {
            for cin in [1, 3, 8] {
                for kernel in [1, 3, 5] {
                    let cout = 1 + (t + cin) % 8;
                    let x = random(t, cin, &mut rng);
                    let w = random(kernel * cin, cout, &mut rng);
                    let b = random(1, cout, &mut rng);
                    let y = conv1d(&x, &w, &b, kernel).unwrap();
                    for (a, e) in y.values().iter().zip(naive_conv(&x, &w, &b, kernel)) {
                        assert!((a - e).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn conv_errors() {
        let x = Tensor::zeros(&[4, 2]);
        assert!(matches!(
            conv1d(&x, &Tensor::zeros(&[5, 1]), &Tensor::zeros(&[1, 1]), 3),
            Err(Error::Shape(_))
        ));
        assert!(conv1d(&x, &Tensor::zeros(&[4, 1]), &Tensor::zeros(&[1, 1]), 2).is_err());
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Step-by-step recurrence written out with plain loops.
    fn hand_gru(cell: &GruCell, ps: &ParameterSet, x: &Tensor, reverse: bool) -> Vec<Vec<f64>> {
        let h_dim = cell.hidden;
        let dot_row = |v: &[f64], m: &Tensor, j: usize| -> f64 { v.iter().enumerate().map(|(i, a)| a * m.get(i, j)).sum() };
        let p = |name: String| ps.get(&name).unwrap().clone();
        let (wz, wr, wn) = (p(cell.input_weight("z")), p(cell.input_weight("r")), p(cell.input_weight("n")));
        let (uz, ur, un) = (p(cell.hidden_weight("z")), p(cell.hidden_weight("r")), p(cell.hidden_weight("n")));
        let (bz, br, bn) = (p(cell.bias("z")), p(cell.bias("r")), p(cell.bias("n")));
        let mut h = vec![0.0; h_dim];
        let mut out = vec![Vec::new(); x.rows()];
        let steps: Vec<usize> = if reverse { (0..x.rows()).rev().collect() } else { (0..x.rows()).collect() };
        for t in steps {
            let xt = x.row(t);
            let z: Vec<f64> = (0..h_dim).map(|j| sigmoid(dot_row(xt, &wz, j) + dot_row(&h, &uz, j) + bz.get(0, j))).collect();
            let r: Vec<f64> = (0..h_dim).map(|j| sigmoid(dot_row(xt, &wr, j) + dot_row(&h, &ur, j) + br.get(0, j))).collect();
            let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
            let n: Vec<f64> = (0..h_dim).map(|j| (dot_row(xt, &wn, j) + dot_row(&rh, &un, j) + bn.get(0, j)).tanh()).collect();
            h = (0..h_dim).map(|j| (1.0 - z[j]) * n[j] + z[j] * h[j]).collect();
            out[t] = h.clone();
        }
        out
    }

    #[test]
    fn recurrent_matches_unrolled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = BiRecurrent::new("rnn", 3, 4);
        let mut ps = ParameterSet::new();
        layer.init(&mut ps, &mut rng);
        let x = random(3, 3, &mut rng);
        let y = bidirectional_recurrent(&x, &layer, &ps).unwrap();
        assert_eq!(y.shape(), &[3, 8]);
        let f = hand_gru(&layer.forward, &ps, &x, false);
        let b = hand_gru(&layer.backward, &ps, &x, true);
        for t in 0..3 {
            let expected: Vec<f64> = f[t].iter().chain(&b[t]).copied().collect();
            for (a, e) in y.row(t).iter().zip(expected) {
                assert!((a - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn recurrent_single_step_halves_agree_with_tied_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = BiRecurrent::new("rnn", 2, 3);
        let mut ps = ParameterSet::new();
        layer.forward.init(&mut ps, &mut rng);
        for gate in GATES {
            for (src, dst) in [
                (layer.forward.input_weight(gate), layer.backward.input_weight(gate)),
                (layer.forward.hidden_weight(gate), layer.backward.hidden_weight(gate)),
                (layer.forward.bias(gate), layer.backward.bias(gate)),
            ] {
                let t = ps.get(&src).unwrap().clone();
                ps.insert(dst, t);
            }
        }
        let y = bidirectional_recurrent(&random(1, 2, &mut rng), &layer, &ps).unwrap();
        assert_eq!(&y.values()[..3], &y.values()[3..]);
    }

    #[test]
    fn recurrent_zero_input_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layer = BiRecurrent::new("rnn", 2, 3);
        let mut ps = ParameterSet::new();
        layer.init(&mut ps, &mut rng);
        for cell in [&layer.forward, &layer.backward] {
            for gate in GATES {
                ps.insert(cell.bias(gate), Tensor::zeros(&[1, 3]));
            }
        }
        let y = bidirectional_recurrent(&Tensor::zeros(&[4, 2]), &layer, &ps).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
        assert!(matches!(
            bidirectional_recurrent(&Tensor::zeros(&[0, 2]), &layer, &ps),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn masked_softmax_examples() {
        assert_eq!(masked_softmax(&[0.3; 4], 4).unwrap(), vec![0.25; 4]);
        assert_eq!(masked_softmax(&[5.0, -1.0, 9.0], 1).unwrap(), vec![1.0, 0.0, 0.0]);
        let p = masked_softmax(&[1.0, 2.0, 3.0], 2).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert!(matches!(masked_softmax(&[1.0, 2.0], 0), Err(Error::InvalidArgument(_))));
        let big = masked_softmax(&[1000.0, 999.0], 2).unwrap();
        assert!(big.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn attention_shape_and_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let enc = Encoder::new(EncoderKind::Attention, "att", 3, 6);
        let mut ps = ParameterSet::new();
        enc.init(&mut ps, &mut rng);
        let mut g = Graph::new();
        let x = g.input_tensor(&random(5, 3, &mut rng));
        let y = enc.run(&mut g, &ps, x).unwrap();
        assert_eq!(g.shape(y), (5, 6));
        let pe = sinusoidal_positions(2, 4);
        assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
    }
}
