//! Straight-through sampling of one-hot architectures from logits.
//!
//! Both estimators return a sample whose forward value is the drawn one-hot
//! vector *exactly*; only the backward pass differs. "Stop-gradient" is
//! realized the plain way: a quantity is evaluated once at the current logits
//! and then held constant, so backward never differentiates through it.
//!
//! * ReinMax draws `D ~ Cat(σ₁(α̃))` and routes gradients through
//!   `π = 2·p₁ − σ₁(α̃)/2`, where `p₁ = σ₁(c + α̃)` and the held constant is
//!   `c = ln((D + σ_τ(α̃))/2) − α̃`. At the current logits `p₁ = (D + σ_τ(α̃))/2`.
//! * Straight-through Gumbel-softmax perturbs the logits with Gumbel noise,
//!   takes the argmax one-hot forward and backpropagates through
//!   `σ_τ(α̃ + G)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::archspace::{ArchConfig, ArchSpace};
use crate::error::{bail, ensure_finite, ensure_len, Result};
use crate::numerics::{exp, softmax, softmax_backward, softmax_tempered};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    #[serde(alias = "reinmax")]
    ReinMax,
    GumbelSt,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::ReinMax => "reinmax",
            Estimator::GumbelSt => "gumbel_st",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reinmax" | "rein_max" => Ok(Estimator::ReinMax),
            "gumbel_st" | "gumbel-st" | "stgs" => Ok(Estimator::GumbelSt),
            other => bail!(Usage, "unknown estimator `{other}` (expected reinmax or gumbel_st)"),
        }
    }
}

/// What the backward pass needs, captured at sampling time.
#[derive(Debug, Clone, PartialEq)]
enum Carrier {
    ReinMax {
        /// σ₁(α̃) at sampling time.
        p0: Vec<f64>,
        /// (D + σ_τ(α̃)) / 2.
        p1: Vec<f64>,
    },
    GumbelSt {
        /// σ_τ(α̃ + G).
        soft: Vec<f64>,
        tau: f64,
    },
}

/// One dimension's sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DimSample {
    pub choice: usize,
    pub one_hot: Vec<f64>,
    /// Logits at sampling time.
    logits: Vec<f64>,
    /// Raw randomness: the uniform used for the categorical draw (ReinMax)
    /// or the Gumbel perturbations (Gumbel-ST).
    pub draw: Vec<f64>,
    carrier: Carrier,
}

impl DimSample {
    /// The gradient-carrying value `π` at sampling time (forward uses the
    /// one-hot instead).
    pub fn carrier(&self) -> Vec<f64> {
        match &self.carrier {
            Carrier::ReinMax { p0, p1 } => p1.iter().zip(p0).map(|(a, b)| 2.0 * a - 0.5 * b).collect(),
            Carrier::GumbelSt { soft, .. } => soft.clone(),
        }
    }

    /// `∂L/∂α̃` given `∂L/∂(one-hot)`.
    pub fn backward(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        ensure_len("sample upstream", upstream.len(), self.one_hot.len())?;
        Ok(match &self.carrier {
            Carrier::ReinMax { p0, p1 } => {
                let a = softmax_backward(p1, upstream, 1.0);
                let b = softmax_backward(p0, upstream, 1.0);
                a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect()
            }
            Carrier::GumbelSt { soft, tau } => softmax_backward(soft, upstream, *tau),
        })
    }

    /// Value of `π(α̃') − π(α̃) + D` with the held constants and the draw
    /// frozen. Equals the one-hot at the sampling logits; its Jacobian there is
    /// what [`backward`](Self::backward) applies. Used for gradient checks.
    pub fn relaxed(&self, logits: &[f64]) -> Result<Vec<f64>> {
        ensure_len("relaxed logits", logits.len(), self.logits.len())?;
        let now = match &self.carrier {
            Carrier::ReinMax { p1, .. } => {
                // σ₁(c + α̃') with c = ln p1 − α̃₀, written without the log
                let shift = logits.iter().zip(&self.logits).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> =
                    p1.iter().zip(logits.iter().zip(&self.logits)).map(|(p, (a, b))| p * exp(a - b - shift)).collect();
                let z: f64 = w.iter().sum();
                let p0 = softmax(logits)?;
                w.iter().zip(&p0).map(|(x, q)| 2.0 * x / z - 0.5 * q).collect::<Vec<_>>()
            }
            Carrier::GumbelSt { tau, .. } => {
                let z: Vec<f64> = logits.iter().zip(&self.draw).map(|(a, g)| a + g).collect();
                softmax_tempered(&z, *tau)?
            }
        };
        let base = self.carrier();
        Ok(now.iter().zip(&base).zip(&self.one_hot).map(|((n, b), d)| n - b + d).collect())
    }
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Inverse-CDF draw from a probability vector.
fn categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    // rounding left u ≥ Σp: take the last choice with positive mass
    p.iter().rposition(|&q| q > 0.0).unwrap_or(p.len() - 1)
}

fn check_inputs(logits: &[f64], tau: f64) -> Result<()> {
    if logits.is_empty() {
        bail!(Shape, "cannot sample from an empty logit vector");
    }
    ensure_finite("architecture logits", logits)?;
    if !(tau > 0.0 && tau.is_finite()) {
        bail!(Parameter, "temperature must be positive, got {tau}");
    }
    Ok(())
}

pub fn reinmax_sample<R: Rng + ?Sized>(logits: &[f64], tau: f64, rng: &mut R) -> Result<DimSample> {
    check_inputs(logits, tau)?;
    let p0 = softmax(logits)?;
    let ptau = softmax_tempered(logits, tau)?;
    let u: f64 = rng.random();
    let choice = categorical(&p0, u);
    let oh = one_hot(logits.len(), choice);
    let p1 = oh.iter().zip(&ptau).map(|(d, p)| 0.5 * (d + p)).collect();
    Ok(DimSample { choice, one_hot: oh, logits: logits.to_vec(), draw: vec![u], carrier: Carrier::ReinMax { p0, p1 } })
}

pub fn gumbel_st_sample<R: Rng + ?Sized>(logits: &[f64], tau: f64, rng: &mut R) -> Result<DimSample> {
    check_inputs(logits, tau)?;
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard Gumbel parameters");
    let draw: Vec<f64> = logits.iter().map(|_| gumbel.sample(rng)).collect();
    let z: Vec<f64> = logits.iter().zip(&draw).map(|(a, g)| a + g).collect();
    let mut choice = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[choice] {
            choice = i;
        }
    }
    let soft = softmax_tempered(&z, tau)?;
    Ok(DimSample {
        choice,
        one_hot: one_hot(logits.len(), choice),
        logits: logits.to_vec(),
        draw,
        carrier: Carrier::GumbelSt { soft, tau },
    })
}

/// Independent per-dimension samples of a whole architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSample {
    pub dims: Vec<DimSample>,
    pub config: ArchConfig,
    /// Concatenated one-hot forward value.
    pub encoding: Vec<f64>,
}

impl ArchSample {
    pub fn backward(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        ensure_len("architecture upstream", upstream.len(), self.encoding.len())?;
        let mut out = Vec::with_capacity(upstream.len());
        let mut off = 0;
        for d in &self.dims {
            let n = d.one_hot.len();
            out.extend(d.backward(&upstream[off..off + n])?);
            off += n;
        }
        Ok(out)
    }

    pub fn relaxed(&self, logits: &[f64]) -> Result<Vec<f64>> {
        ensure_len("relaxed logits", logits.len(), self.encoding.len())?;
        let mut out = Vec::with_capacity(logits.len());
        let mut off = 0;
        for d in &self.dims {
            let n = d.one_hot.len();
            out.extend(d.relaxed(&logits[off..off + n])?);
            off += n;
        }
        Ok(out)
    }
}

pub fn sample_architecture<R: Rng + ?Sized>(
    space: &ArchSpace,
    logits: &[f64],
    estimator: Estimator,
    tau: f64,
    rng: &mut R,
) -> Result<ArchSample> {
    let blocks = space.split(logits)?;
    let mut dims = Vec::with_capacity(blocks.len());
    for b in blocks {
        dims.push(match estimator {
            Estimator::ReinMax => reinmax_sample(b, tau, rng)?,
            Estimator::GumbelSt => gumbel_st_sample(b, tau, rng)?,
        });
    }
    let config = ArchConfig(dims.iter().map(|d| d.choice).collect());
    let encoding = dims.iter().flat_map(|d| d.one_hot.iter().copied()).collect();
    Ok(ArchSample { dims, config, encoding })
}
