//! Per-device upper-level objective and its gradient with respect to Φ.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use crate::architect::{sample_architecture, ArchSample, Estimator};
use crate::archspace::{multilinear_eval_with_grad, ArchSpace, Benchmark};
use crate::error::{bail, ensure_finite, ensure_len, Error, Result};
use crate::hypernet::{HyperForward, MetaHypernet};
use crate::moo::{active_objectives, cosine_penalty, normalize_objective, NormStats, Preference};
use crate::numerics::{relu, relu_backward, sqrt, Linear, ParamStore};
use crate::predictor::HardwareSurrogate;
use crate::rng::{substream, tags};

/// Small regression net `f_w(encoding)` standing in for supernetwork weights
/// in the trainable-surrogate mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMlp {
    store: ParamStore,
    l1: Linear,
    l2: Linear,
}

impl AccuracyMlp {
    pub fn new<R: Rng + ?Sized>(space: &ArchSpace, hidden: usize, rng: &mut R) -> Result<Self> {
        let n = space.encoding_len();
        let mut store = ParamStore::new();
        let l1 = Linear::new(&mut store, "acc.0", n, hidden, sqrt(2.0 / n as f64), rng)?;
        let l2 = Linear::new(&mut store, "acc.1", hidden, 1, sqrt(1.0 / hidden as f64), rng)?;
        // start near the middle of the error range
        store.value_mut(l2.bias)[0] = 0.5;
        Ok(Self { store, l1, l2 })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Value and `∂f/∂x`.
    pub fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let a = self.l1.forward(&self.store, x)?;
        let h = relu(&a);
        let y = self.l2.forward(&self.store, &h)?[0];
        let dh = self.l2.backward_input(&self.store, &[1.0])?;
        let dx = self.l1.backward_input(&self.store, &relu_backward(&a, &dh))?;
        Ok((y, dx))
    }

    /// Accumulates `∂f/∂w · upstream` into the store's gradients.
    pub fn accumulate(&mut self, x: &[f64], upstream: f64) -> Result<f64> {
        let a = self.l1.forward(&self.store, x)?;
        let h = relu(&a);
        let y = self.l2.forward(&self.store, &h)?[0];
        let dh = self.l2.backward(&mut self.store, &h, &[upstream])?;
        self.l1.backward(&mut self.store, x, &relu_backward(&a, &dh))?;
        Ok(y)
    }
}

/// The accuracy objective (objective 0) seen by the upper level.
#[derive(Debug, Clone, PartialEq)]
pub enum AccuracySurrogate {
    /// Multilinear extension of the validation-error table.
    Frozen { table: Vec<f64> },
    /// Learned regressor on the training-error table, updated by the lower level.
    Trainable(AccuracyMlp),
}

impl AccuracySurrogate {
    pub fn evaluate(&self, space: &ArchSpace, encoding: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            AccuracySurrogate::Frozen { table } => multilinear_eval_with_grad(space, table, encoding),
            AccuracySurrogate::Trainable(mlp) => mlp.value_and_grad(encoding),
        }
    }
}

/// Everything needed to score an encoding on a device.
pub struct ObjectiveContext<'a> {
    pub bench: &'a Benchmark,
    /// `hardware[m - 1]` scores hardware objective `m`.
    pub hardware: Vec<&'a dyn HardwareSurrogate>,
    pub accuracy: AccuracySurrogate,
    /// `hardware_stats[device][m - 1]`.
    pub hardware_stats: Vec<Vec<NormStats>>,
    pub accuracy_stats: NormStats,
    pub cosine_weight: f64,
    /// One constraint per hardware objective, in normalized units.
    pub constraints: Vec<f64>,
}

impl core::fmt::Debug for ObjectiveContext<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ObjectiveContext")
            .field("hardware", &self.hardware.len())
            .field("accuracy_stats", &self.accuracy_stats)
            .field("cosine_weight", &self.cosine_weight)
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

/// Upper-level objective at one encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperEval {
    /// `Σ r_m L̂_m − λ·cos(r, L̂)`.
    pub loss: f64,
    pub grad_encoding: Vec<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub active: Vec<bool>,
    pub penalty: f64,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(
        bench: &'a Benchmark,
        hardware: Vec<&'a dyn HardwareSurrogate>,
        accuracy: AccuracySurrogate,
        constraints: Vec<f64>,
        cosine_weight: f64,
    ) -> Result<Self> {
        let m = bench.objectives();
        ensure_len("hardware surrogates", hardware.len(), m - 1)?;
        for (i, h) in hardware.iter().enumerate() {
            if h.objective() != i + 1 {
                bail!(Parameter, "surrogate {i} scores objective {}, expected {}", h.objective(), i + 1);
            }
        }
        let constraints = if constraints.is_empty() { vec![0.0; m - 1] } else { constraints };
        ensure_len("constraints", constraints.len(), m - 1)?;
        active_objectives(&vec![0.0; m - 1], &constraints)?;
        if !(cosine_weight >= 0.0) {
            bail!(Parameter, "cosine penalty weight must be nonnegative");
        }
        Ok(Self {
            bench,
            hardware,
            accuracy,
            hardware_stats: vec![Vec::new(); bench.devices.len()],
            accuracy_stats: NormStats::new(true),
            cosine_weight,
            constraints,
        })
    }

    fn sample_encodings(&self, samples: usize, seed: u64, coords: &[u64]) -> Result<Vec<Vec<f64>>> {
        let space = &self.bench.space;
        let n = samples.min(space.total_configs()).max(1);
        let mut rng = substream(seed, coords);
        sample(&mut rng, space.total_configs(), n)
            .into_iter()
            .map(|i| space.one_hot_encode(&space.config_at(i)?))
            .collect()
    }

    /// Hardware statistics from `min(samples, total)` surrogate evaluations per
    /// device and objective.
    pub fn precompute_hardware_stats(&mut self, samples: usize, seed: u64) -> Result<()> {
        let encs = self.sample_encodings(samples, seed, &[tags::NORM_STATS, 0])?;
        for t in 0..self.bench.devices.len() {
            let profile = self.bench.profile(t)?;
            let mut per = Vec::with_capacity(self.hardware.len());
            for (i, h) in self.hardware.iter().enumerate() {
                let feats = profile.objective(i + 1)?;
                let vals = encs.iter().map(|e| h.evaluate(e, t, feats).map(|v| v.0)).collect::<Result<Vec<_>>>()?;
                per.push(NormStats::from_values(&vals, false));
            }
            self.hardware_stats[t] = per;
        }
        Ok(())
    }

    /// Clears the accuracy statistics and reseeds them with surrogate
    /// evaluations of random configs.
    pub fn reset_accuracy_stats(&mut self, samples: usize, seed: u64, epoch: u64) -> Result<()> {
        self.accuracy_stats.reset();
        let encs = self.sample_encodings(samples, seed, &[tags::NORM_STATS, 1, epoch])?;
        for e in &encs {
            let v = self.accuracy.evaluate(&self.bench.space, e)?.0;
            self.accuracy_stats.observe(v);
        }
        Ok(())
    }

    pub fn features(&self, device: usize) -> Result<Vec<f64>> {
        Ok(self.bench.profile(device)?.concat())
    }

    /// Scores `encoding` on `device`. `active` overrides the gating decision
    /// (used to hold it fixed in gradient checks).
    pub fn upper_objective(
        &self,
        device: usize,
        r: &Preference,
        encoding: &[f64],
        active: Option<&[bool]>,
    ) -> Result<UpperEval> {
        let m = self.bench.objectives();
        ensure_len("preference", r.len(), m)?;
        let stats = self
            .hardware_stats
            .get(device)
            .filter(|s| s.len() == m - 1)
            .ok_or_else(|| Error::State(alloc::format!("no hardware statistics for device {device}")))?;
        let profile = self.bench.profile(device)?;
        let mut raw = Vec::with_capacity(m);
        let mut normalized = Vec::with_capacity(m);
        let mut slopes = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m);

        let (acc, g) = self.accuracy.evaluate(&self.bench.space, encoding)?;
        let n = normalize_objective(acc, &self.accuracy_stats)?;
        raw.push(acc);
        normalized.push(n.value);
        slopes.push(n.slope);
        grads.push(g);
        for (i, h) in self.hardware.iter().enumerate() {
            let (v, g) = h.evaluate(encoding, device, profile.objective(i + 1)?)?;
            let n = normalize_objective(v, &stats[i])?;
            raw.push(v);
            normalized.push(n.value);
            slopes.push(n.slope);
            grads.push(g);
        }
        ensure_finite("objective values", &raw)?;

        let active = match active {
            Some(a) => {
                ensure_len("active mask", a.len(), m)?;
                a.to_vec()
            }
            None => active_objectives(&normalized[1..], &self.constraints)?,
        };
        let cos = cosine_penalty(r, &normalized)?;
        let loss = crate::numerics::dot(r.weights(), &normalized) - self.cosine_weight * cos.value;
        let mut grad_encoding = vec![0.0; encoding.len()];
        for k in 0..m {
            if !active[k] {
                continue;
            }
            let dl = (r.weights()[k] - self.cosine_weight * cos.grad_losses[k]) * slopes[k];
            if dl != 0.0 {
                crate::numerics::axpy(dl, &grads[k], &mut grad_encoding);
            }
        }
        Ok(UpperEval { loss, grad_encoding, raw, normalized, active, penalty: cos.value })
    }
}

/// Result of one device's upper-level pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceGradient {
    /// `∂(upper loss)/∂Φ`, flat in the hypernetwork's parameter layout.
    pub grad: Vec<f64>,
    pub eval: UpperEval,
    pub sample: ArchSample,
    pub forward: HyperForward,
}

/// Forward through the hypernetwork, sample an architecture, score it and
/// backpropagate to Φ. Leaves the gradient in `net`'s store as well.
pub fn device_gradient<R: Rng + ?Sized>(
    net: &mut MetaHypernet,
    ctx: &ObjectiveContext<'_>,
    device: usize,
    r: &Preference,
    estimator: Estimator,
    tau: f64,
    rng: &mut R,
) -> Result<DeviceGradient> {
    let features = ctx.features(device)?;
    let forward = net.forward(r.weights(), &features)?;
    let sample = sample_architecture(net.space(), &forward.logits, estimator, tau, rng)?;
    let eval = ctx.upper_objective(device, r, &sample.encoding, None)?;
    let up = sample.backward(&eval.grad_encoding)?;
    net.params_mut().zero_grad();
    net.backward(&forward, &up)?;
    let grad = net.params().grads().to_vec();
    ensure_finite("device gradient", &grad)?;
    Ok(DeviceGradient { grad, eval, sample, forward })
}

/// Upper loss as a function of Φ with the sample, gating and statistics held
/// fixed: the function whose gradient [`device_gradient`] returns.
pub fn frozen_sample_loss(
    net: &MetaHypernet,
    ctx: &ObjectiveContext<'_>,
    device: usize,
    r: &Preference,
    dg: &DeviceGradient,
) -> Result<f64> {
    let logits = net.logits(r.weights(), &ctx.features(device)?)?;
    let enc = dg.sample.relaxed(&logits)?;
    Ok(ctx.upper_objective(device, r, &enc, Some(&dg.eval.active))?.loss)
}

/// Lower-level gradient for the trainable accuracy surrogate on one device:
/// squared error of `f_w` against the training-error table at a sampled
/// architecture. Accumulates into the surrogate's store; returns the loss.
pub fn lower_gradient<R: Rng + ?Sized>(
    net: &MetaHypernet,
    mlp: &mut AccuracyMlp,
    bench: &Benchmark,
    device: usize,
    r: &Preference,
    estimator: Estimator,
    tau: f64,
    rng: &mut R,
) -> Result<f64> {
    let logits = net.logits(r.weights(), &bench.profile(device)?.concat())?;
    let s = sample_architecture(net.space(), &logits, estimator, tau, rng)?;
    let target = bench.accuracy_train.values[bench.space.index_of(&s.config)?];
    let (y, _) = mlp.value_and_grad(&s.encoding)?;
    let e = y - target;
    mlp.accumulate(&s.encoding, 2.0 * e)?;
    Ok(e * e)
}
