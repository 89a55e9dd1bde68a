//! The search loop: per-device gradients, MGD aggregation, and read-out.
//!
//! Each upper-level step visits the search devices in ascending id order. For
//! every device it draws a preference `r ~ Dir(β)`, computes the device's
//! gradient of the scalarized upper loss with respect to Φ, and then the
//! update scheme decides how those gradients move Φ:
//!
//! * `mgd` — Frank-Wolfe min-norm weights γ, one step along `Σ γ_t g_t`;
//! * `mean` — one step along the average gradient;
//! * `sequential` — one step per device, each gradient taken at the current Φ;
//! * `mc` — one uniformly chosen device per step.
//!
//! Steps are taken by Adam on the aggregated direction. All randomness comes
//! from substreams keyed by `(seed, step, device)`.

mod objective;
mod profile;

pub use objective::{
    device_gradient, frozen_sample_loss, lower_gradient, AccuracyMlp, AccuracySurrogate, DeviceGradient,
    ObjectiveContext, UpperEval,
};
pub use profile::{evaluate_configs, profile_pareto, run_baseline, BaselineKind, Profile};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::architect::Estimator;
use crate::archspace::Benchmark;
use crate::error::{bail, ensure_finite, Error, Result};
use crate::hypernet::MetaHypernet;
use crate::moo::{frank_wolfe_gamma, mgd_direction, sample_preference, DirichletParams, FrankWolfeConfig, Preference};
use crate::numerics::Adam;
use crate::predictor::HardwareSurrogate;
use crate::rng::{substream, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateScheme {
    #[default]
    Mgd,
    Mean,
    Sequential,
    Mc,
}

impl UpdateScheme {
    pub const ALL: [UpdateScheme; 4] = [UpdateScheme::Mgd, UpdateScheme::Mean, UpdateScheme::Sequential, UpdateScheme::Mc];

    pub fn name(self) -> &'static str {
        match self {
            UpdateScheme::Mgd => "mgd",
            UpdateScheme::Mean => "mean",
            UpdateScheme::Sequential => "sequential",
            UpdateScheme::Mc => "mc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(alloc::format!("unknown update scheme `{s}` (expected mgd, mean, sequential or mc)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    /// Accuracy from the multilinear extension of the validation table.
    #[default]
    Frozen,
    /// Accuracy from a small regressor trained by the lower level.
    Trainable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    /// Upper-level (Φ) learning rate ξ₁.
    pub lr: f64,
    pub weight_decay: f64,
    /// Lower-level learning rate ξ₂ (trainable surrogate only).
    pub lr_lower: f64,
    /// Dirichlet concentration; empty means all ones.
    pub beta: Vec<f64>,
    pub cosine_weight: f64,
    pub estimator: Estimator,
    pub tau: f64,
    pub scheme: UpdateScheme,
    /// One constraint per hardware objective; empty means all zero.
    pub constraints: Vec<f64>,
    pub surrogate: SurrogateMode,
    pub surrogate_hidden: usize,
    pub seed: u64,
    pub frank_wolfe: FrankWolfeConfig,
    /// Samples behind the normalization statistics (capped by the space size).
    pub norm_samples: usize,
    /// Preferences swept when recording the per-epoch hypervolume.
    pub profile_count: usize,
    /// Search devices; empty means the benchmark's train split.
    pub devices: Vec<usize>,
    /// Use this preference at every step instead of sampling.
    pub fixed_preference: Option<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            steps_per_epoch: 100,
            lr: 0.05,
            weight_decay: 1e-3,
            lr_lower: 0.05,
            beta: Vec::new(),
            cosine_weight: crate::moo::COSINE_PENALTY_WEIGHT,
            estimator: Estimator::ReinMax,
            tau: 1.0,
            scheme: UpdateScheme::Mgd,
            constraints: Vec::new(),
            surrogate: SurrogateMode::Frozen,
            surrogate_hidden: 32,
            seed: 0,
            frank_wolfe: FrankWolfeConfig::default(),
            norm_samples: 256,
            profile_count: 24,
            devices: Vec::new(),
            fixed_preference: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, bench: &Benchmark) -> Result<()> {
        let m = bench.objectives();
        if self.steps_per_epoch == 0 {
            bail!(Parameter, "steps_per_epoch must be positive");
        }
        for (name, v) in [("lr", self.lr), ("lr_lower", self.lr_lower), ("tau", self.tau)] {
            if !(v >= 0.0 && v.is_finite()) || (name == "tau" && v == 0.0) {
                bail!(Parameter, "{name} must be {} and finite, got {v}", if name == "tau" { "positive" } else { "nonnegative" });
            }
        }
        if !self.beta.is_empty() && self.beta.len() != m {
            bail!(Shape, "beta has {} entries for {m} objectives", self.beta.len());
        }
        if !self.constraints.is_empty() && self.constraints.len() != m - 1 {
            bail!(Shape, "constraints has {} entries for {} hardware objectives", self.constraints.len(), m - 1);
        }
        if self.profile_count < 2 {
            bail!(Parameter, "profile_count must be at least 2");
        }
        for &d in &self.devices {
            bench.device(d)?;
        }
        if let Some(r) = &self.fixed_preference {
            Preference::new(r.clone())?;
            if r.len() != m {
                bail!(Shape, "fixed preference has {} entries for {m} objectives", r.len());
            }
        }
        Ok(())
    }

    pub fn search_devices(&self, bench: &Benchmark) -> Vec<usize> {
        let mut d = if self.devices.is_empty() { bench.train_devices.clone() } else { self.devices.clone() };
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Per-epoch summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `(device, hypervolume)` for every device in the benchmark.
    pub hypervolume: Vec<(usize, f64)>,
    /// Mean raw objective values over the epoch's samples, per search device.
    pub losses: Vec<(usize, Vec<f64>)>,
    pub upper_loss: f64,
    /// Mean γ over the epoch's steps (MGD only; empty otherwise).
    pub gamma: Vec<f64>,
    pub lower_loss: Option<f64>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub scheme: String,
    pub devices: Vec<usize>,
    /// Hypervolume of every device before the first step.
    pub initial_hypervolume: Vec<(usize, f64)>,
    pub epochs: Vec<EpochRecord>,
}

impl SearchTrace {
    pub fn final_hypervolume(&self, device: usize) -> Option<f64> {
        let hv = match self.epochs.last() {
            Some(e) => &e.hypervolume,
            None => &self.initial_hypervolume,
        };
        hv.iter().find(|(d, _)| *d == device).map(|p| p.1)
    }
}

fn all_hypervolumes(net: &MetaHypernet, bench: &Benchmark, count: usize) -> Result<Vec<(usize, f64)>> {
    (0..bench.devices.len()).map(|t| Ok((t, profile_pareto(net, bench, t, count)?.hypervolume))).collect()
}

fn draw_preference<R: Rng + ?Sized>(cfg: &SearchConfig, dir: &DirichletParams, rng: &mut R) -> Result<Preference> {
    match &cfg.fixed_preference {
        Some(r) => Preference::new(r.clone()),
        None => Ok(sample_preference(dir, rng)),
    }
}

/// Runs the search, updating `net` in place. `hardware[m - 1]` scores
/// hardware objective `m` and must not change during the run. `clock`, when
/// given, returns seconds and timestamps the epoch records.
pub fn search(
    net: &mut MetaHypernet,
    bench: &Benchmark,
    hardware: &[&dyn HardwareSurrogate],
    cfg: &SearchConfig,
    clock: Option<&dyn Fn() -> f64>,
) -> Result<SearchTrace> {
    cfg.validate(bench)?;
    if net.space() != &bench.space || net.objectives() != bench.objectives() {
        bail!(Shape, "hypernetwork does not match the benchmark's space or objective count");
    }
    let devices = cfg.search_devices(bench);
    if devices.is_empty() {
        bail!(Parameter, "no search devices");
    }
    let m = bench.objectives();
    let dir = if cfg.beta.is_empty() { DirichletParams::uniform(m)? } else { DirichletParams::new(cfg.beta.clone())? };
    let accuracy = match cfg.surrogate {
        SurrogateMode::Frozen => AccuracySurrogate::Frozen { table: bench.accuracy_valid.values.clone() },
        SurrogateMode::Trainable => {
            let mut rng = substream(cfg.seed, &[tags::SURROGATE_INIT]);
            AccuracySurrogate::Trainable(AccuracyMlp::new(&bench.space, cfg.surrogate_hidden.max(1), &mut rng)?)
        }
    };
    let mut ctx = ObjectiveContext::new(bench, hardware.to_vec(), accuracy, cfg.constraints.clone(), cfg.cosine_weight)?;
    ctx.precompute_hardware_stats(cfg.norm_samples, cfg.seed)?;

    let start = clock.map(|c| c()).unwrap_or(0.0);
    let mut adam = Adam::decoupled(cfg.lr, cfg.weight_decay);
    let mut trace = SearchTrace {
        scheme: cfg.scheme.name().into(),
        devices: devices.clone(),
        initial_hypervolume: all_hypervolumes(net, bench, cfg.profile_count)?,
        epochs: Vec::new(),
    };

    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        ctx.reset_accuracy_stats(cfg.norm_samples, cfg.seed, epoch as u64)?;
        let mut loss_sums = vec![vec![0.0; m]; devices.len()];
        let mut loss_counts = vec![0usize; devices.len()];
        let mut upper_sum = 0.0;
        let mut upper_count = 0usize;
        let mut gamma_sum = vec![0.0; devices.len()];
        let mut lower_sum = 0.0;

        for _ in 0..cfg.steps_per_epoch {
            let chosen: Vec<usize> = match cfg.scheme {
                UpdateScheme::Mc => {
                    let mut rng = substream(cfg.seed, &[tags::SCHEDULE, step]);
                    vec![rng.random_range(0..devices.len())]
                }
                _ => (0..devices.len()).collect(),
            };
            let mut grads: Vec<Vec<f64>> = Vec::with_capacity(chosen.len());
            for &slot in &chosen {
                let t = devices[slot];
                let mut rng = substream(cfg.seed, &[tags::SEARCH_UPPER, step, t as u64]);
                let r = draw_preference(cfg, &dir, &mut rng)?;
                let dg = device_gradient(net, &ctx, t, &r, cfg.estimator, cfg.tau, &mut rng)?;
                ctx.accuracy_stats.observe(dg.eval.raw[0]);
                for (s, v) in loss_sums[slot].iter_mut().zip(&dg.eval.raw) {
                    *s += v;
                }
                loss_counts[slot] += 1;
                upper_sum += dg.eval.loss;
                upper_count += 1;
                if cfg.scheme == UpdateScheme::Sequential {
                    adam.step(net.params_mut().values_mut(), &dg.grad)?;
                } else {
                    grads.push(dg.grad);
                }
            }
            match cfg.scheme {
                UpdateScheme::Sequential => {}
                UpdateScheme::Mgd => {
                    let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
                    let fw = frank_wolfe_gamma(&refs, &cfg.frank_wolfe)?;
                    for (s, g) in gamma_sum.iter_mut().zip(&fw.gamma) {
                        *s += g;
                    }
                    let dir = mgd_direction(&refs, &fw.gamma)?;
                    adam.step(net.params_mut().values_mut(), &dir)?;
                }
                UpdateScheme::Mean | UpdateScheme::Mc => {
                    let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
                    let w = vec![1.0 / refs.len() as f64; refs.len()];
                    let dir = mgd_direction(&refs, &w)?;
                    adam.step(net.params_mut().values_mut(), &dir)?;
                }
            }

            if let AccuracySurrogate::Trainable(mlp) = &mut ctx.accuracy {
                mlp.params_mut().zero_grad();
                for &t in &devices {
                    let mut rng = substream(cfg.seed, &[tags::SEARCH_LOWER, step, t as u64]);
                    let r = draw_preference(cfg, &dir, &mut rng)?;
                    lower_sum += lower_gradient(net, mlp, bench, t, &r, cfg.estimator, cfg.tau, &mut rng)?;
                }
                let scale = cfg.lr_lower / devices.len() as f64;
                let store = mlp.params_mut();
                let g = store.grads().to_vec();
                for (w, gi) in store.values_mut().iter_mut().zip(g) {
                    *w -= scale * gi;
                }
                ensure_finite("surrogate weights", mlp.params().values())
                    .map_err(|e| Error::Numeric(alloc::format!("epoch {epoch}, step {step}: {e}")))?;
            }

            if let Err(e) = ensure_finite("hypernetwork parameters", net.params().values()) {
                bail!(Numeric, "epoch {epoch}, step {step}: {e}; last upper loss {}", upper_sum / upper_count.max(1) as f64);
            }
            step += 1;
        }

        let steps = cfg.steps_per_epoch as f64;
        trace.epochs.push(EpochRecord {
            epoch,
            hypervolume: all_hypervolumes(net, bench, cfg.profile_count)?,
            losses: devices
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let n = loss_counts[i].max(1) as f64;
                    (t, loss_sums[i].iter().map(|s| s / n).collect())
                })
                .collect(),
            upper_loss: upper_sum / upper_count.max(1) as f64,
            gamma: if cfg.scheme == UpdateScheme::Mgd { gamma_sum.iter().map(|g| g / steps).collect() } else { Vec::new() },
            lower_loss: matches!(ctx.accuracy, AccuracySurrogate::Trainable(_))
                .then(|| lower_sum / (steps * devices.len() as f64)),
            elapsed_secs: clock.map(|c| c() - start).unwrap_or(0.0),
        });
        log::debug!("epoch {epoch}: upper loss {:.4}", trace.epochs.last().map(|e| e.upper_loss).unwrap_or(0.0));
    }
    Ok(trace)
}
