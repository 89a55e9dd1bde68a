//! Dense kernels with hand-written backward passes.
//!
//! Vectors are plain `[f64]` slices; matrices are row-major [`Tensor2`].
//! Learnable parameters live in a [`ParamStore`], one contiguous buffer with a
//! gradient buffer of the same layout, so optimizers and the gradient
//! combination step can treat all parameters as one flat vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, ensure_len, Error, Result};

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("tensor data", data.len(), rows * cols)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// `y = W x + b` with `W` given as a row-major `out x in` slice.
pub fn linear_forward(x: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let out = b.len();
    if out == 0 || w.len() != out * x.len() {
        bail!(Shape, "linear: weight has {} entries for {} inputs and {} outputs", w.len(), x.len(), out);
    }
    let n = x.len();
    Ok((0..out).map(|o| dot(&w[o * n..(o + 1) * n], x) + b[o]).collect())
}

/// Accumulates `dL/dW` and `dL/db` and returns `dL/dx`.
pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    upstream: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<Vec<f64>> {
    let (n, out) = (x.len(), upstream.len());
    if w.len() != out * n || grad_w.len() != w.len() || grad_b.len() != out {
        bail!(Shape, "linear backward: inconsistent shapes (in {n}, out {out}, weight {})", w.len());
    }
    let mut dx = vec![0.0; n];
    for o in 0..out {
        let u = upstream[o];
        if u == 0.0 {
            continue;
        }
        grad_b[o] += u;
        axpy(u, x, &mut grad_w[o * n..(o + 1) * n]);
        axpy(u, &w[o * n..(o + 1) * n], &mut dx);
    }
    Ok(dx)
}

/// `dL/dx` only, for frozen layers.
pub fn linear_backward_input(n: usize, w: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    if w.len() != upstream.len() * n {
        bail!(Shape, "linear backward: weight has {} entries, expected {}", w.len(), upstream.len() * n);
    }
    let mut dx = vec![0.0; n];
    for (o, &u) in upstream.iter().enumerate() {
        if u != 0.0 {
            axpy(u, &w[o * n..(o + 1) * n], &mut dx);
        }
    }
    Ok(dx)
}

/// Tempered softmax `exp(z_i/tau) / sum_j exp(z_j/tau)`, max-shifted.
pub fn softmax_tempered(z: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        bail!(Parameter, "softmax temperature must be positive, got {tau}");
    }
    if z.is_empty() {
        bail!(Shape, "softmax of an empty vector");
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        bail!(Numeric, "softmax input is not finite");
    }
    let mut out: Vec<f64> = z.iter().map(|&v| exp((v - max) / tau)).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    softmax_tempered(z, 1.0)
}

/// Backward of `p = softmax(z / tau)` given `p`: `dz = p * (u - <p, u>) / tau`.
pub fn softmax_backward(p: &[f64], upstream: &[f64], tau: f64) -> Vec<f64> {
    let s = dot(p, upstream);
    p.iter().zip(upstream).map(|(pi, ui)| pi * (ui - s) / tau).collect()
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

pub fn relu_backward(x: &[f64], upstream: &[f64]) -> Vec<f64> {
    x.iter().zip(upstream).map(|(&xi, &u)| if xi > 0.0 { u } else { 0.0 }).collect()
}

/// Mean squared error.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    ensure_len("mse target", target.len(), pred.len())?;
    if pred.is_empty() {
        bail!(Shape, "mse of empty vectors");
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}

pub fn mse_backward(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

/// Row `index` of a `rows x cols` table.
pub fn embedding_lookup(table: &[f64], cols: usize, index: usize) -> Result<&[f64]> {
    let rows = if cols == 0 { 0 } else { table.len() / cols };
    if index >= rows {
        bail!(Index, "embedding row {index} out of {rows}");
    }
    Ok(&table[index * cols..(index + 1) * cols])
}

/// Accumulates `upstream` into the selected row only.
pub fn embedding_backward(grad_table: &mut [f64], cols: usize, index: usize, scale: f64, upstream: &[f64]) -> Result<()> {
    let rows = if cols == 0 { 0 } else { grad_table.len() / cols };
    if index >= rows {
        bail!(Index, "embedding row {index} out of {rows}");
    }
    ensure_len("embedding upstream", upstream.len(), cols)?;
    axpy(scale, upstream, &mut grad_table[index * cols..(index + 1) * cols]);
    Ok(())
}

/// Handle to a block inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Named parameter blocks stored contiguously, with matching gradients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    blocks: Vec<BlockInfo>,
    values: Vec<f64>,
    grads: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Vec<f64>) -> Result<ParamId> {
        let len: usize = shape.iter().product();
        ensure_len(name, init.len(), len)?;
        if self.blocks.iter().any(|b| b.name == name) {
            bail!(Parameter, "duplicate parameter block {name}");
        }
        let offset = self.values.len();
        self.blocks.push(BlockInfo { name: name.into(), shape: shape.to_vec(), offset, len });
        self.values.extend(init);
        self.grads.resize(self.values.len(), 0.0);
        Ok(ParamId(self.blocks.len() - 1))
    }

    pub fn add_normal<R: Rng + ?Sized>(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut R) -> Result<ParamId> {
        let len = shape.iter().product();
        let init = if std > 0.0 {
            let dist = Normal::new(0.0, std).map_err(|e| Error::Parameter(alloc::format!("{e}")))?;
            (0..len).map(|_| dist.sample(rng)).collect()
        } else {
            vec![0.0; len]
        };
        self.add(name, shape, init)
    }

    /// Rebuilds a store from a block layout and flat values.
    pub fn from_parts(blocks: Vec<(String, Vec<usize>)>, values: Vec<f64>) -> Result<Self> {
        let mut store = Self::new();
        let mut cursor = 0;
        for (name, shape) in blocks {
            let len: usize = shape.iter().product();
            if cursor + len > values.len() {
                bail!(Shape, "block {name} runs past the end of the value buffer");
            }
            store.add(&name, &shape, values[cursor..cursor + len].to_vec())?;
            cursor += len;
        }
        ensure_len("parameter values", values.len(), cursor)?;
        Ok(store)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.blocks.iter().position(|b| b.name == name).map(ParamId)
    }

    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    pub fn info(&self, id: ParamId) -> &BlockInfo {
        &self.blocks[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        let b = &self.blocks[id.0];
        &self.values[b.offset..b.offset + b.len]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        let b = &self.blocks[id.0];
        &mut self.values[b.offset..b.offset + b.len]
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        let b = &self.blocks[id.0];
        &self.grads[b.offset..b.offset + b.len]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        let b = &self.blocks[id.0];
        &mut self.grads[b.offset..b.offset + b.len]
    }

    /// Value slice and gradient slice of one block at once.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&[f64], &mut [f64]) {
        let b = &self.blocks[id.0];
        (&self.values[b.offset..b.offset + b.len], &mut self.grads[b.offset..b.offset + b.len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        ensure_len("parameter values", values.len(), self.values.len())?;
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        self.blocks.iter().map(|b| (b.name.clone(), b.shape.clone())).collect()
    }
}

/// Fully connected layer whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_normal(&alloc::format!("{name}.weight"), &[outputs, inputs], std, rng)?;
        let bias = store.add(&alloc::format!("{name}.bias"), &[outputs], vec![0.0; outputs])?;
        Ok(Self { weight, bias, inputs, outputs })
    }

    /// Reattaches to existing blocks named `{name}.weight` / `{name}.bias`.
    pub fn attach(store: &ParamStore, name: &str) -> Result<Self> {
        let find = |suffix: &str| {
            let full = alloc::format!("{name}.{suffix}");
            store.id(&full).ok_or_else(|| Error::Parameter(alloc::format!("missing block {full}")))
        };
        let (weight, bias) = (find("weight")?, find("bias")?);
        let shape = &store.info(weight).shape;
        if shape.len() != 2 || store.info(bias).shape != [shape[0]] {
            bail!(Shape, "layer {name} has inconsistent block shapes");
        }
        Ok(Self { weight, bias, inputs: shape[1], outputs: shape[0] })
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("linear input", x.len(), self.inputs)?;
        linear_forward(x, store.value(self.weight), store.value(self.bias))
    }

    pub fn backward(&self, store: &mut ParamStore, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        ensure_len("linear upstream", upstream.len(), self.outputs)?;
        let wb = store.info(self.weight).clone();
        let bb = store.info(self.bias).clone();
        let (values, grads) = (&store.values, &mut store.grads);
        let w = &values[wb.offset..wb.offset + wb.len];
        let (gw, gb) = if wb.offset < bb.offset {
            let (lo, hi) = grads.split_at_mut(bb.offset);
            (&mut lo[wb.offset..wb.offset + wb.len], &mut hi[..bb.len])
        } else {
            let (lo, hi) = grads.split_at_mut(wb.offset);
            (&mut hi[..wb.len], &mut lo[bb.offset..bb.offset + bb.len])
        };
        linear_backward(x, w, upstream, gw, gb)
    }

    pub fn backward_input(&self, store: &ParamStore, upstream: &[f64]) -> Result<Vec<f64>> {
        linear_backward_input(self.inputs, store.value(self.weight), upstream)
    }
}

/// Adam. Weight decay is coupled L2 (added to the gradient) by default, or
/// decoupled (parameters shrunk by `lr · weight_decay` each step) when
/// `decoupled` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decoupled: bool,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, decoupled: false, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn decoupled(lr: f64, weight_decay: f64) -> Self {
        Self { decoupled: true, ..Self::new(lr, weight_decay) }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        ensure_len("adam gradient", grad.len(), params.len())?;
        if self.m.len() != params.len() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
            self.t = 0;
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        let (coupled, shrink) = if self.decoupled { (0.0, self.lr * self.weight_decay) } else { (self.weight_decay, 0.0) };
        for i in 0..params.len() {
            let g = grad[i] + coupled * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (sqrt(vh) + self.eps) + shrink * params[i];
        }
        Ok(())
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            bail!(Evaluation, "objective is not finite around coordinate {i}");
        }
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

/// Largest `|g_analytic - g_fd| / max(1, |g_fd|)` over all coordinates.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> Result<f64> {
    ensure_len("analytic gradient", analytic.len(), numeric.len())?;
    Ok(analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max))
}

pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients against central differences of `f` over a flat
/// parameter vector.
pub fn finite_diff_check(x: &[f64], analytic: &[f64], h: f64, f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
    ensure_len("analytic gradient", analytic.len(), x.len())?;
    let numeric = numeric_gradient(x, h, f)?;
    max_relative_error(analytic, &numeric)
}

/// [`finite_diff_check`] over every parameter of a store.
pub fn finite_diff_check_store(
    store: &ParamStore,
    analytic: &[f64],
    h: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> Result<f64> {
    let mut probe = store.clone();
    let x = store.values().to_vec();
    finite_diff_check(&x, analytic, h, |v| {
        probe.values_mut().copy_from_slice(v);
        f(&probe)
    })
}
