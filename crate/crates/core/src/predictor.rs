//! Hardware-objective surrogates.
//!
//! [`MetaPredictor`] is a small two-path network: the architecture encoding and
//! the device features each go through two linear+ReLU layers of width
//! `hidden`, and a linear head reads `[h_a, h_d, h_a ⊙ h_d]`. The product term
//! lets device features rescale per-architecture costs. Targets are the raw
//! table values divided by the device's largest reference-config value (the
//! same scale as the device profile), standardized internally.
//!
//! [`ExactSurrogate`] evaluates the true table through its multilinear
//! extension and is a drop-in replacement with zero model error.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archspace::{multilinear_eval_with_grad, ArchSpace, Benchmark};
use crate::error::{bail, ensure_finite, ensure_len, Result};
use crate::numerics::{relu, relu_backward, sqrt, Adam, Linear, ParamStore};

/// Anything that scores an architecture encoding on a device, with gradient.
pub trait HardwareSurrogate {
    fn objective(&self) -> usize;

    /// Value and `∂value/∂encoding`. `features` is the device's feature
    /// vector for this objective.
    fn evaluate(&self, encoding: &[f64], device: usize, features: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Exact table lookup via the multilinear extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSurrogate {
    space: ArchSpace,
    objective: usize,
    tables: Vec<Vec<f64>>,
}

impl ExactSurrogate {
    pub fn new(bench: &Benchmark, objective: usize) -> Result<Self> {
        if objective == 0 || objective >= bench.objectives() {
            bail!(Parameter, "objective {objective} is not a hardware objective");
        }
        let tables = (0..bench.devices.len()).map(|t| bench.table(t, objective).map(<[f64]>::to_vec)).collect::<Result<_>>()?;
        Ok(Self { space: bench.space.clone(), objective, tables })
    }
}

impl HardwareSurrogate for ExactSurrogate {
    fn objective(&self) -> usize {
        self.objective
    }

    fn evaluate(&self, encoding: &[f64], device: usize, _features: &[f64]) -> Result<(f64, Vec<f64>)> {
        let table = self.tables.get(device).ok_or_else(|| crate::Error::Benchmark(format!("unknown device {device}")))?;
        multilinear_eval_with_grad(&self.space, table, encoding)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Fraction of each train device's configs used for fitting; the rest is
    /// held out for the rank report.
    pub train_fraction: f64,
    /// Optional cap on the number of (config, device) training pairs.
    pub sample_count: Option<usize>,
    /// Negative control: permute the training targets.
    pub shuffle_labels: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            hidden: 100,
            epochs: 400,
            batch: 32,
            lr: 2e-3,
            weight_decay: 3e-5,
            train_fraction: 0.8,
            sample_count: None,
            shuffle_labels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaPredictor {
    objective: usize,
    space: ArchSpace,
    feature_len: usize,
    hidden: usize,
    store: ParamStore,
    arch: [Linear; 2],
    dev: [Linear; 2],
    head: Linear,
    target_mean: f64,
    target_std: f64,
    trained: bool,
    frozen: bool,
}

/// Activations kept for backward.
#[derive(Debug, Clone)]
struct Cache {
    x: Vec<f64>,
    d: Vec<f64>,
    a1: Vec<f64>,
    ha1: Vec<f64>,
    a2: Vec<f64>,
    ha: Vec<f64>,
    b1: Vec<f64>,
    hb1: Vec<f64>,
    b2: Vec<f64>,
    hd: Vec<f64>,
    joint: Vec<f64>,
    out: f64,
}

/// Serializable snapshot of a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorState {
    pub objective: usize,
    pub choices: Vec<usize>,
    pub feature_len: usize,
    pub hidden: usize,
    pub target_mean: f64,
    pub target_std: f64,
    pub trained: bool,
    pub layout: Vec<(alloc::string::String, Vec<usize>)>,
    pub values: Vec<f64>,
}

impl MetaPredictor {
    pub fn new<R: Rng + ?Sized>(
        space: ArchSpace,
        objective: usize,
        feature_len: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden == 0 || feature_len == 0 {
            bail!(Parameter, "predictor widths must be positive");
        }
        let n = space.encoding_len();
        let he = |fan_in: usize| sqrt(2.0 / fan_in as f64);
        let mut store = ParamStore::new();
        let arch = [
            Linear::new(&mut store, "arch.0", n, hidden, he(n), rng)?,
            Linear::new(&mut store, "arch.1", hidden, hidden, he(hidden), rng)?,
        ];
        let dev = [
            Linear::new(&mut store, "dev.0", feature_len, hidden, he(feature_len), rng)?,
            Linear::new(&mut store, "dev.1", hidden, hidden, he(hidden), rng)?,
        ];
        let head = Linear::new(&mut store, "head", 3 * hidden, 1, he(3 * hidden), rng)?;
        Ok(Self {
            objective,
            space,
            feature_len,
            hidden,
            store,
            arch,
            dev,
            head,
            target_mean: 0.0,
            target_std: 1.0,
            trained: false,
            frozen: false,
        })
    }

    pub fn state(&self) -> PredictorState {
        PredictorState {
            objective: self.objective,
            choices: self.space.choices().to_vec(),
            feature_len: self.feature_len,
            hidden: self.hidden,
            target_mean: self.target_mean,
            target_std: self.target_std,
            trained: self.trained,
            layout: self.store.layout(),
            values: self.store.values().to_vec(),
        }
    }

    /// Rebuilds a predictor; loaded predictors come back frozen.
    pub fn from_state(state: PredictorState) -> Result<Self> {
        let space = ArchSpace::new(state.choices)?;
        let store = ParamStore::from_parts(state.layout, state.values)?;
        let get = |name: &str, i: usize, o: usize| -> Result<Linear> {
            let l = Linear::attach(&store, name)?;
            if l.inputs != i || l.outputs != o {
                bail!(Shape, "layer {name} is {}x{}, expected {o}x{i}", l.outputs, l.inputs);
            }
            Ok(l)
        };
        let (n, h, f) = (space.encoding_len(), state.hidden, state.feature_len);
        let arch = [get("arch.0", n, h)?, get("arch.1", h, h)?];
        let dev = [get("dev.0", f, h)?, get("dev.1", h, h)?];
        let head = get("head", 3 * h, 1)?;
        if store.blocks().len() != 10 {
            bail!(Parameter, "unexpected extra parameter blocks in predictor store");
        }
        if !(state.target_std > 0.0) || !state.target_mean.is_finite() {
            bail!(Parameter, "invalid target statistics");
        }
        Ok(Self {
            objective: state.objective,
            space,
            feature_len: f,
            hidden: h,
            store,
            arch,
            dev,
            head,
            target_mean: state.target_mean,
            target_std: state.target_std,
            trained: state.trained,
            frozen: true,
        })
    }

    pub fn objective(&self) -> usize {
        self.objective
    }

    pub fn space(&self) -> &ArchSpace {
        &self.space
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    /// Mutable parameters; refused once frozen.
    pub fn params_mut(&mut self) -> Result<&mut ParamStore> {
        if self.frozen {
            bail!(Usage, "predictor for objective {} is frozen", self.objective);
        }
        Ok(&mut self.store)
    }

    fn forward_cache(&self, x: &[f64], d: &[f64]) -> Result<Cache> {
        ensure_len("predictor encoding", x.len(), self.space.encoding_len())?;
        ensure_len("predictor device features", d.len(), self.feature_len)?;
        let a1 = self.arch[0].forward(&self.store, x)?;
        let ha1 = relu(&a1);
        let a2 = self.arch[1].forward(&self.store, &ha1)?;
        let ha = relu(&a2);
        let b1 = self.dev[0].forward(&self.store, d)?;
        let hb1 = relu(&b1);
        let b2 = self.dev[1].forward(&self.store, &hb1)?;
        let hd = relu(&b2);
        let mut joint = Vec::with_capacity(3 * self.hidden);
        joint.extend_from_slice(&ha);
        joint.extend_from_slice(&hd);
        joint.extend(ha.iter().zip(&hd).map(|(a, b)| a * b));
        let out = self.head.forward(&self.store, &joint)?[0];
        Ok(Cache { x: x.to_vec(), d: d.to_vec(), a1, ha1, a2, ha, b1, hb1, b2, hd, joint, out })
    }

    /// Backward from `∂L/∂out` (standardized output), accumulating
    /// parameter gradients.
    fn backward_params(&mut self, c: &Cache, up: f64) -> Result<()> {
        let h = self.hidden;
        let dj = self.head.backward(&mut self.store, &c.joint, &[up])?;
        let dha: Vec<f64> = (0..h).map(|i| dj[i] + dj[2 * h + i] * c.hd[i]).collect();
        let dhd: Vec<f64> = (0..h).map(|i| dj[h + i] + dj[2 * h + i] * c.ha[i]).collect();
        let g = self.arch[1].backward(&mut self.store, &c.ha1, &relu_backward(&c.a2, &dha))?;
        self.arch[0].backward(&mut self.store, &c.x, &relu_backward(&c.a1, &g))?;
        let g = self.dev[1].backward(&mut self.store, &c.hb1, &relu_backward(&c.b2, &dhd))?;
        self.dev[0].backward(&mut self.store, &c.d, &relu_backward(&c.b1, &g))?;
        Ok(())
    }

    /// `∂out/∂x` scaled by `up`; reads the parameters only.
    fn input_grad(&self, c: &Cache, up: f64) -> Result<Vec<f64>> {
        let h = self.hidden;
        let dj = self.head.backward_input(&self.store, &[up])?;
        let dha: Vec<f64> = (0..h).map(|i| dj[i] + dj[2 * h + i] * c.hd[i]).collect();
        let g = self.arch[1].backward_input(&self.store, &relu_backward(&c.a2, &dha))?;
        self.arch[0].backward_input(&self.store, &relu_backward(&c.a1, &g))
    }

    fn ensure_trained(&self) -> Result<()> {
        if !self.trained {
            bail!(Usage, "predictor for objective {} has not been trained", self.objective);
        }
        Ok(())
    }

    /// Prediction in profile units.
    pub fn predict(&self, encoding: &[f64], features: &[f64]) -> Result<f64> {
        self.ensure_trained()?;
        Ok(self.target_mean + self.target_std * self.forward_cache(encoding, features)?.out)
    }

    pub fn predict_with_grad(&self, encoding: &[f64], features: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.ensure_trained()?;
        let c = self.forward_cache(encoding, features)?;
        let dx = self.input_grad(&c, self.target_std)?;
        Ok((self.target_mean + self.target_std * c.out, dx))
    }

    /// Mean squared error (standardized units) over `(encoding, features,
    /// target)` samples. With `accumulate`, parameter gradients are added to
    /// the store, which is refused once frozen.
    pub fn mse_loss(&mut self, xs: &[(Vec<f64>, Vec<f64>, f64)], accumulate: bool) -> Result<f64> {
        if accumulate && self.frozen {
            bail!(Usage, "predictor for objective {} is frozen", self.objective);
        }
        let n = xs.len() as f64;
        let mut loss = 0.0;
        for (x, d, y) in xs {
            let c = self.forward_cache(x, d)?;
            let t = (y - self.target_mean) / self.target_std;
            let e = c.out - t;
            loss += e * e / n;
            if accumulate {
                self.backward_params(&c, 2.0 * e / n)?;
            }
        }
        Ok(loss)
    }
}

/// Feature scale of a device: largest raw reference-config value.
pub fn reference_scale(bench: &Benchmark, device: usize, objective: usize) -> Result<f64> {
    let table = bench.table(device, objective)?;
    let max = bench.reference_configs.iter().map(|&c| table[c]).fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        bail!(Benchmark, "device {device} has no positive reference value for objective {objective}");
    }
    Ok(max)
}

/// Kendall rank correlation (τ-a; tied pairs count as zero).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len("kendall tau inputs", b.len(), a.len())?;
    let n = a.len();
    if n < 2 {
        bail!(Parameter, "kendall tau needs at least two points");
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]) * (b[i] - b[j]);
            s += if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    }
    Ok(s / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRank {
    pub device: usize,
    pub held_out: usize,
    pub kendall_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub objective: usize,
    pub train_samples: usize,
    pub loss_history: Vec<f64>,
    pub final_train_mse: f64,
    pub per_device: Vec<DeviceRank>,
}

struct Split {
    train: Vec<(Vec<f64>, Vec<f64>, f64)>,
    held_out: Vec<(usize, Vec<usize>)>,
}

fn build_split<R: Rng + ?Sized>(
    bench: &Benchmark,
    objective: usize,
    devices: &[usize],
    cfg: &PredictorConfig,
    rng: &mut R,
) -> Result<Split> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        bail!(Parameter, "train fraction must be in (0, 1], got {}", cfg.train_fraction);
    }
    let total = bench.space.total_configs();
    if let Some(n) = cfg.sample_count {
        if n == 0 || n > total * devices.len() {
            bail!(Parameter, "sample count {n} outside [1, {}]", total * devices.len());
        }
    }
    let per_device = (libm::round(total as f64 * cfg.train_fraction) as usize).clamp(1, total);
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for &t in devices {
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(rng);
        let (fit, rest) = order.split_at(per_device);
        let scale = reference_scale(bench, t, objective)?;
        let table = bench.table(t, objective)?;
        let feats = bench.profile(t)?.objective(objective)?.to_vec();
        for &c in fit {
            let x = bench.space.one_hot_encode(&bench.space.config_at(c)?)?;
            train.push((x, feats.clone(), table[c] / scale));
        }
        held_out.push((t, if rest.is_empty() { fit.to_vec() } else { rest.to_vec() }));
    }
    if let Some(n) = cfg.sample_count {
        // keep a random subset, spread over devices by the shuffle
        train.shuffle(rng);
        train.truncate(n);
    }
    if cfg.shuffle_labels {
        let mut ys: Vec<f64> = train.iter().map(|s| s.2).collect();
        ys.shuffle(rng);
        for (s, y) in train.iter_mut().zip(ys) {
            s.2 = y;
        }
    }
    Ok(Split { train, held_out })
}

/// Fits `net` on the given devices' tables of `net.objective()`.
pub fn train_predictor<R: Rng + ?Sized>(
    net: &mut MetaPredictor,
    bench: &Benchmark,
    devices: &[usize],
    cfg: &PredictorConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    if net.frozen {
        bail!(Usage, "cannot train a frozen predictor");
    }
    if devices.is_empty() {
        bail!(Parameter, "no devices to train the predictor on");
    }
    if net.space != bench.space {
        bail!(Shape, "predictor space {} differs from benchmark space {}", net.space.describe(), bench.space.describe());
    }
    let objective = net.objective;
    let split = build_split(bench, objective, devices, cfg, rng)?;
    let ys: Vec<f64> = split.train.iter().map(|s| s.2).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64;
    net.target_mean = mean;
    net.target_std = if var > 1e-24 { sqrt(var) } else { 1.0 };

    let mut adam = Adam::new(cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch.max(1);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let items: Vec<_> = chunk.iter().map(|&i| split.train[i].clone()).collect();
            net.store.zero_grad();
            let l = net.mse_loss(&items, true)?;
            epoch_loss += l * items.len() as f64 / split.train.len() as f64;
            let grads = net.store.grads().to_vec();
            adam.step(net.store.values_mut(), &grads)?;
        }
        if !epoch_loss.is_finite() {
            bail!(Training, "predictor loss diverged at epoch {epoch}");
        }
        loss_history.push(epoch_loss);
    }
    ensure_finite("predictor parameters", net.store.values())?;
    net.trained = true;
    let final_train_mse = net.mse_loss(&split.train, false)?;

    let mut per_device = Vec::with_capacity(split.held_out.len());
    for (t, configs) in &split.held_out {
        let scale = reference_scale(bench, *t, objective)?;
        let table = bench.table(*t, objective)?;
        let feats = bench.profile(*t)?.objective(objective)?;
        let mut pred = Vec::with_capacity(configs.len());
        let mut truth = Vec::with_capacity(configs.len());
        for &c in configs {
            let x = bench.space.one_hot_encode(&bench.space.config_at(c)?)?;
            pred.push(net.predict(&x, feats)?);
            truth.push(table[c] / scale);
        }
        let kendall_tau = if configs.len() >= 2 { kendall_tau(&pred, &truth)? } else { 1.0 };
        per_device.push(DeviceRank { device: *t, held_out: configs.len(), kendall_tau });
    }
    Ok(TrainReport { objective, train_samples: split.train.len(), loss_history, final_train_mse, per_device })
}

/// Learned predictors keyed by device features; the device id is ignored.
impl HardwareSurrogate for MetaPredictor {
    fn objective(&self) -> usize {
        self.objective
    }

    fn evaluate(&self, encoding: &[f64], _device: usize, features: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.predict_with_grad(encoding, features)
    }
}
