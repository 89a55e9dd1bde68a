//! The meta-hypernetwork: preference- and device-conditioned architecture logits.
//!
//! A bank of `K` embedding hypernetworks each maps a preference vector to a
//! full logit vector by concatenating, for every hardware objective `m`, the
//! embedding row selected by the bin of `r_m`. A linear layer plus softmax on
//! the device features mixes the bank:
//! `α̃ = Σ_k softmax(φ₀ d)[k] · h_k(r)`.
//!
//! Parameter blocks: `phi0.weight` `[K, F·(M−1)]`, `phi0.bias` `[K]` and, per
//! hardware objective `m`, `bank.emb{m}` `[K, bins, width_m]`. The logit
//! vector is split across objectives as evenly as possible, extra entries going
//! to the earlier objectives; objective 1's block comes first.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::archspace::ArchSpace;
use crate::error::{bail, ensure_finite, ensure_len, Error, Result};
use crate::moo::{sample_preference, DirichletParams};
use crate::numerics::{dot, ln, softmax, softmax_backward, Adam, Linear, ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypernetConfig {
    pub bank_size: usize,
    pub bins: usize,
    pub init_std: f64,
}

impl Default for HypernetConfig {
    fn default() -> Self {
        Self { bank_size: 50, bins: 100, init_std: 0.01 }
    }
}

/// Bin of a preference weight: `floor(r · bins)` clamped to `bins − 1`.
pub fn quantize_preference(r: f64, bins: usize) -> Result<usize> {
    if bins == 0 {
        bail!(Parameter, "need at least one preference bin");
    }
    // tolerate the simplex rounding slack
    if !(-1e-9..=1.0 + 1e-9).contains(&r) {
        bail!(Parameter, "preference weight {r} outside [0, 1]");
    }
    let i = (r.clamp(0.0, 1.0) * bins as f64) as usize;
    Ok(i.min(bins - 1))
}

/// Per-objective widths of the logit vector.
pub fn block_widths(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| total / parts + usize::from(i < total % parts)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaHypernet {
    config: HypernetConfig,
    space: ArchSpace,
    objectives: usize,
    feature_len: usize,
    widths: Vec<usize>,
    store: ParamStore,
    phi0: Linear,
    emb: Vec<ParamId>,
}

/// Intermediate values of one forward pass, consumed by backward.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperForward {
    pub logits: Vec<f64>,
    /// Bank mixture weights (a probability vector over the K members).
    pub mix: Vec<f64>,
    pub bins: Vec<usize>,
    features: Vec<f64>,
    /// Row-major `[K, dim]` bank outputs.
    bank: Vec<f64>,
}

impl MetaHypernet {
    /// Fresh network; `feature_len` is the device feature length `F·(M−1)`.
    pub fn new<R: Rng + ?Sized>(
        space: ArchSpace,
        objectives: usize,
        feature_len: usize,
        config: HypernetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        Self::validate(&space, objectives, feature_len, &config)?;
        let mut store = ParamStore::new();
        let phi0 = Linear::new(&mut store, "phi0", feature_len, config.bank_size, config.init_std, rng)?;
        let widths = block_widths(space.encoding_len(), objectives - 1);
        let mut emb = Vec::with_capacity(widths.len());
        for (i, &w) in widths.iter().enumerate() {
            emb.push(store.add_normal(
                &format!("bank.emb{}", i + 1),
                &[config.bank_size, config.bins, w],
                config.init_std,
                rng,
            )?);
        }
        Ok(Self { config, space, objectives, feature_len, widths, store, phi0, emb })
    }

    /// Rebuilds a network around stored parameters, checking every block shape.
    pub fn from_store(
        space: ArchSpace,
        objectives: usize,
        feature_len: usize,
        config: HypernetConfig,
        store: ParamStore,
    ) -> Result<Self> {
        Self::validate(&space, objectives, feature_len, &config)?;
        let phi0 = Linear::attach(&store, "phi0")?;
        if phi0.inputs != feature_len || phi0.outputs != config.bank_size {
            bail!(Shape, "phi0 is {}x{}, expected {}x{}", phi0.outputs, phi0.inputs, config.bank_size, feature_len);
        }
        let widths = block_widths(space.encoding_len(), objectives - 1);
        let mut emb = Vec::with_capacity(widths.len());
        for (i, &w) in widths.iter().enumerate() {
            let name = format!("bank.emb{}", i + 1);
            let id = store.id(&name).ok_or_else(|| Error::Parameter(format!("missing block {name}")))?;
            if store.info(id).shape != [config.bank_size, config.bins, w] {
                bail!(Shape, "block {name} has shape {:?}", store.info(id).shape);
            }
            emb.push(id);
        }
        if store.blocks().len() != 2 + emb.len() {
            bail!(Parameter, "unexpected extra parameter blocks in hypernetwork store");
        }
        Ok(Self { config, space, objectives, feature_len, widths, store, phi0, emb })
    }

    fn validate(space: &ArchSpace, objectives: usize, feature_len: usize, config: &HypernetConfig) -> Result<()> {
        if objectives < 2 {
            bail!(Parameter, "need at least one hardware objective besides accuracy");
        }
        if config.bank_size == 0 || config.bins == 0 {
            bail!(Parameter, "bank size and bin count must be positive");
        }
        if space.encoding_len() < objectives - 1 {
            bail!(Parameter, "logit vector too short to split over {} objectives", objectives - 1);
        }
        if feature_len == 0 || feature_len % (objectives - 1) != 0 {
            bail!(Shape, "feature length {feature_len} is not a multiple of {}", objectives - 1);
        }
        Ok(())
    }

    pub fn config(&self) -> &HypernetConfig {
        &self.config
    }

    pub fn space(&self) -> &ArchSpace {
        &self.space
    }

    pub fn objectives(&self) -> usize {
        self.objectives
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_params(self) -> ParamStore {
        self.store
    }

    pub fn forward(&self, r: &[f64], features: &[f64]) -> Result<HyperForward> {
        ensure_len("preference vector", r.len(), self.objectives)?;
        ensure_len("device features", features.len(), self.feature_len)?;
        ensure_finite("device features", features)?;
        let bins = r[1..].iter().map(|&x| quantize_preference(x, self.config.bins)).collect::<Result<Vec<_>>>()?;
        let z = self.phi0.forward(&self.store, features)?;
        let mix = softmax(&z)?;

        let k_count = self.config.bank_size;
        let dim = self.space.encoding_len();
        let mut bank = vec![0.0; k_count * dim];
        let mut logits = vec![0.0; dim];
        for k in 0..k_count {
            let row = &mut bank[k * dim..(k + 1) * dim];
            let mut off = 0;
            for ((&id, &w), &b) in self.emb.iter().zip(&self.widths).zip(&bins) {
                let start = (k * self.config.bins + b) * w;
                row[off..off + w].copy_from_slice(&self.store.value(id)[start..start + w]);
                off += w;
            }
            for (l, v) in logits.iter_mut().zip(row.iter()) {
                *l += mix[k] * v;
            }
        }
        ensure_finite("architecture logits", &logits)?;
        Ok(HyperForward { logits, mix, bins, features: features.to_vec(), bank })
    }

    pub fn logits(&self, r: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(r, features)?.logits)
    }

    /// Accumulates `∂L/∂Φ` into the store's gradients given `∂L/∂α̃`.
    pub fn backward(&mut self, fwd: &HyperForward, upstream: &[f64]) -> Result<()> {
        let dim = self.space.encoding_len();
        ensure_len("logit upstream", upstream.len(), dim)?;
        let k_count = self.config.bank_size;
        let mut scores = vec![0.0; k_count];
        for k in 0..k_count {
            scores[k] = dot(&fwd.bank[k * dim..(k + 1) * dim], upstream);
            let mut off = 0;
            for ((&id, &w), &b) in self.emb.iter().zip(&self.widths).zip(&fwd.bins) {
                let start = (k * self.config.bins + b) * w;
                let g = &mut self.store.grad_mut(id)[start..start + w];
                for (gi, u) in g.iter_mut().zip(&upstream[off..off + w]) {
                    *gi += fwd.mix[k] * u;
                }
                off += w;
            }
        }
        let dz = softmax_backward(&fwd.mix, &scores, 1.0);
        self.phi0.backward(&mut self.store, &fwd.features, &dz)?;
        Ok(())
    }
}

/// `KL(uniform ‖ σ₁(α̃_d))` for each dimension.
pub fn uniform_kl(space: &ArchSpace, logits: &[f64]) -> Result<Vec<f64>> {
    space
        .split(logits)?
        .into_iter()
        .map(|b| {
            let p = softmax(b)?;
            let n = b.len() as f64;
            Ok(-ln(n) - p.iter().map(|&q| ln(q)).sum::<f64>() / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub max_epochs: usize,
    pub steps_per_epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    /// Stop once the held-out max KL drops below this.
    pub kl_tol: f64,
    pub holdout: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { max_epochs: 200, steps_per_epoch: 20, batch: 32, lr: 1e-2, weight_decay: 1e-2, lr_decay: 0.99, kl_tol: 1e-4, holdout: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Held-out max KL before each epoch and after the last one.
    pub kl_history: Vec<f64>,
    pub epochs: usize,
}

/// Drives `α̃` towards all-zero logits (uniform per-dimension distributions)
/// by minimizing mean squared logits over random preferences and the given
/// device feature vectors.
pub fn pretrain_uniform<R: Rng + ?Sized>(
    net: &mut MetaHypernet,
    features: &[Vec<f64>],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainReport> {
    if features.is_empty() {
        bail!(Pretraining, "no device features to pretrain on");
    }
    let dirichlet = DirichletParams::uniform(net.objectives())?;
    let draw = |rng: &mut R| -> Result<(Vec<f64>, usize)> {
        let r = sample_preference(&dirichlet, rng);
        Ok((r.weights().to_vec(), rng.random_range(0..features.len())))
    };
    let holdout: Vec<(Vec<f64>, usize)> = (0..cfg.holdout.max(1)).map(|_| draw(rng)).collect::<Result<_>>()?;
    let held_out_kl = |net: &MetaHypernet| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (r, t) in &holdout {
            for kl in uniform_kl(&net.space, &net.logits(r, &features[*t])?)? {
                worst = worst.max(kl);
            }
        }
        Ok(worst)
    };

    let mut adam = Adam::new(cfg.lr, cfg.weight_decay);
    let mut kl_history = vec![held_out_kl(net)?];
    for epoch in 0..cfg.max_epochs {
        if *kl_history.last().expect("nonempty") < cfg.kl_tol {
            return Ok(PretrainReport { kl_history, epochs: epoch });
        }
        // Adam jitters at a scale ∝ lr around the all-zero optimum, which
        // floors the KL at ∝ lr²; geometric decay removes the floor
        adam.lr = cfg.lr * libm::pow(cfg.lr_decay, epoch as f64);
        for _ in 0..cfg.steps_per_epoch {
            net.store.zero_grad();
            let batch = cfg.batch.max(1);
            for _ in 0..batch {
                let (r, t) = draw(rng)?;
                let fwd = net.forward(&r, &features[t])?;
                // d/dα̃ of mean(α̃²) averaged over the batch
                let n = fwd.logits.len() as f64;
                let up: Vec<f64> = fwd.logits.iter().map(|a| 2.0 * a / (n * batch as f64)).collect();
                net.backward(&fwd, &up)?;
            }
            let grads = net.store.grads().to_vec();
            adam.step(net.store.values_mut(), &grads)?;
        }
        let kl = held_out_kl(net)?;
        if !kl.is_finite() {
            bail!(Pretraining, "held-out KL became non-finite at epoch {epoch}");
        }
        kl_history.push(kl);
    }
    let last = *kl_history.last().expect("nonempty");
    if last < cfg.kl_tol {
        return Ok(PretrainReport { kl_history, epochs: cfg.max_epochs });
    }
    bail!(
        Pretraining,
        "held-out max KL {last:.3e} still above {:.1e} after {} epochs (history start {:.3e})",
        cfg.kl_tol,
        cfg.max_epochs,
        kl_history[0]
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check_store, FD_STEP};
    use crate::rng::seeded;

    fn small(space: Vec<usize>, m: usize, k: usize, std: f64, seed: u64) -> MetaHypernet {
        let space = ArchSpace::new(space).unwrap();
        let cfg = HypernetConfig { bank_size: k, bins: 10, init_std: std };
        MetaHypernet::new(space, m, 3 * (m - 1), cfg, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_preference(0.0, 100).unwrap(), 0);
        assert_eq!(quantize_preference(1.0, 100).unwrap(), 99);
        assert_eq!(quantize_preference(0.505, 100).unwrap(), 50);
        assert!(quantize_preference(1.5, 100).is_err());
        assert!(quantize_preference(-0.1, 100).is_err());
    }

    #[test]
    fn widths_split_evenly() {
        assert_eq!(block_widths(16, 1), vec![16]);
        assert_eq!(block_widths(16, 2), vec![8, 8]);
        assert_eq!(block_widths(7, 2), vec![4, 3]);
        assert_eq!(block_widths(11, 3), vec![4, 4, 3]);
    }

    #[test]
    fn two_member_convex_combination() {
        // K=2, phi0 all zero → weights (0.5, 0.5); outputs (1,2) and (3,4)
        let mut net = small(vec![2], 2, 2, 0.0, 0);
        let id = net.store.id("bank.emb1").unwrap();
        let b = quantize_preference(0.3, 10).unwrap();
        {
            let v = net.store.value_mut(id);
            v[b * 2..b * 2 + 2].copy_from_slice(&[1.0, 2.0]);
            v[(10 + b) * 2..(10 + b) * 2 + 2].copy_from_slice(&[3.0, 4.0]);
        }
        let f = net.forward(&[0.7, 0.3], &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(f.mix, vec![0.5, 0.5]);
        assert_eq!(f.logits, vec![2.0, 3.0]);
    }

    #[test]
    fn output_shape_mixture_and_determinism() {
        for m in [2, 3] {
            let net = small(vec![3, 4, 2], m, 5, 0.5, 1);
            let r = if m == 2 { vec![0.4, 0.6] } else { vec![0.2, 0.3, 0.5] };
            let d: Vec<f64> = (0..net.feature_len()).map(|i| i as f64 / 7.0).collect();
            let a = net.forward(&r, &d).unwrap();
            assert_eq!(a.logits.len(), 9);
            assert!((a.mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(a, net.forward(&r, &d).unwrap());
            assert!(net.forward(&r, &d[1..]).is_err());
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeded(2);
        for case in 0..100 {
            let m = 2 + case % 2;
            let mut net = small(vec![3, 4, 2], m, 4, 0.7, case as u64);
            let dir = DirichletParams::uniform(m).unwrap();
            let r = sample_preference(&dir, &mut rng).weights().to_vec();
            let d: Vec<f64> = (0..net.feature_len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            // scalar: cᵀα̃ + 0.5‖α̃‖²
            let f = net.forward(&r, &d).unwrap();
            let up: Vec<f64> = f.logits.iter().zip(&c).map(|(a, ci)| ci + a).collect();
            net.store.zero_grad();
            net.backward(&f, &up).unwrap();
            let analytic = net.store.grads().to_vec();
            let probe = net.clone();
            let err = finite_diff_check_store(&net.store, &analytic, FD_STEP, |s| {
                let mut p = probe.clone();
                p.store = s.clone();
                let a = p.logits(&r, &d).unwrap();
                dot(&a, &c) + 0.5 * dot(&a, &a)
            })
            .unwrap();
            assert!(err < 1e-4, "case {case}: {err}");
        }
    }

    #[test]
    fn identical_profiles_identical_logits() {
        let net = small(vec![4, 4], 2, 6, 0.3, 3);
        let d = vec![0.2, 0.4, 1.0];
        for i in 0..=10 {
            let r = [1.0 - i as f64 / 10.0, i as f64 / 10.0];
            assert_eq!(net.logits(&r, &d).unwrap(), net.logits(&r, &d.clone()).unwrap());
        }
    }

    #[test]
    fn zero_network_exits_immediately() {
        let mut net = small(vec![4, 4], 2, 4, 0.0, 4);
        let rep = pretrain_uniform(&mut net, &[vec![0.1, 0.2, 0.3]], &PretrainConfig::default(), &mut seeded(5)).unwrap();
        assert_eq!(rep.epochs, 0);
        assert_eq!(rep.kl_history, vec![0.0]);
    }

    #[test]
    fn pretraining_reaches_uniform_and_kl_decreases() {
        let mut net = small(vec![4, 3, 4], 2, 8, 1.0, 6);
        let feats = vec![vec![0.1, 0.5, 1.0], vec![1.0, 0.3, 0.6], vec![0.4, 0.4, 0.9]];
        let cfg = PretrainConfig { max_epochs: 500, ..PretrainConfig::default() };
        let rep = pretrain_uniform(&mut net, &feats, &cfg, &mut seeded(7)).unwrap();
        assert!(rep.kl_history[0] > 1e-2, "{:?}", rep.kl_history[0]);
        assert!(*rep.kl_history.last().unwrap() < 1e-3);
        // smoothed monotonicity: 3-epoch running means never increase
        let h = &rep.kl_history;
        let smooth: Vec<f64> = h.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= w[0] * 1.05 + 1e-12, "{smooth:?}");
        }
        let mut rng = seeded(8);
        for _ in 0..50 {
            let x: f64 = rng.random_range(0.0..1.0);
            let a = net.logits(&[1.0 - x, x], &feats[rng.random_range(0..3)]).unwrap();
            for b in net.space().split(&a).unwrap() {
                let p = softmax(b).unwrap();
                assert!(p.iter().all(|&q| (q - 1.0 / b.len() as f64).abs() < 1e-2), "{p:?} {:?}", rep.kl_history);
            }
        }
    }

    #[test]
    fn store_round_trip_and_shape_checks() {
        let net = small(vec![4, 4], 3, 5, 0.1, 9);
        let store = net.params().clone();
        let back = MetaHypernet::from_store(net.space().clone(), 3, 6, net.config().clone(), store.clone()).unwrap();
        assert_eq!(back, net);
        let other = HypernetConfig { bank_size: 4, ..net.config().clone() };
        assert!(MetaHypernet::from_store(net.space().clone(), 3, 6, other, store).is_err());
    }
}
