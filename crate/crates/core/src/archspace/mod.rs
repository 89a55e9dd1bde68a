//! Discrete architecture spaces, their one-hot encodings, the multilinear table
//! surrogate and the synthetic multi-device benchmark.
//!
//! Objective ids are zero-based throughout the crate: objective `0` is the
//! accuracy objective (stored as an error, lower is better) and objectives
//! `1..M` are hardware objectives such as latency and energy.

mod benchmark;
mod multilinear;

pub use benchmark::{
    build_device_profile, enumerate_true_front, generate_benchmark, Benchmark, Device, DeviceProfile, Recipe,
    TrueFront,
};
pub use multilinear::{multilinear_eval, multilinear_eval_with_grad};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, ensure_len, Result};

/// Default upper bound on `total_configs` for any space we enumerate.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Product of per-dimension choice sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpace {
    choices: Vec<usize>,
}

/// One choice index per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchConfig(pub Vec<usize>);

impl ArchSpace {
    pub fn new(choices: Vec<usize>) -> Result<Self> {
        Self::with_cap(choices, ENUMERATION_CAP)
    }

    pub fn with_cap(choices: Vec<usize>, cap: usize) -> Result<Self> {
        if choices.is_empty() {
            bail!(Parameter, "an architecture space needs at least one dimension");
        }
        if let Some(d) = choices.iter().position(|&c| c < 2) {
            bail!(Parameter, "dimension {d} has {} choices, need at least 2", choices[d]);
        }
        let mut total: usize = 1;
        for &c in &choices {
            total = match total.checked_mul(c) {
                Some(t) if t <= cap => t,
                _ => bail!(Capacity, "space {choices:?} exceeds the enumeration cap {cap}"),
            };
        }
        Ok(Self { choices })
    }

    pub fn dims(&self) -> usize {
        self.choices.len()
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn total_configs(&self) -> usize {
        self.choices.iter().product()
    }

    /// Length of the concatenated one-hot encoding, `sum_d |O_d|`.
    pub fn encoding_len(&self) -> usize {
        self.choices.iter().sum()
    }

    /// Start offset of each dimension inside the encoding.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.choices
            .iter()
            .map(|&c| {
                let o = acc;
                acc += c;
                o
            })
            .collect()
    }

    /// Splits a flat encoding-sized vector into per-dimension slices.
    pub fn split<'a>(&self, flat: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        ensure_len("per-dimension vector", flat.len(), self.encoding_len())?;
        let mut out = Vec::with_capacity(self.dims());
        let mut rest = flat;
        for &c in &self.choices {
            let (head, tail) = rest.split_at(c);
            out.push(head);
            rest = tail;
        }
        Ok(out)
    }

    pub fn validate(&self, config: &ArchConfig) -> Result<()> {
        ensure_len("architecture config", config.0.len(), self.dims())?;
        for (d, (&i, &c)) in config.0.iter().zip(&self.choices).enumerate() {
            if i >= c {
                bail!(Index, "dimension {d}: choice {i} out of {c}");
            }
        }
        Ok(())
    }

    /// Flat index with the first dimension most significant, so index order is
    /// lexicographic order of configs.
    pub fn index_of(&self, config: &ArchConfig) -> Result<usize> {
        self.validate(config)?;
        Ok(config.0.iter().zip(&self.choices).fold(0, |acc, (&i, &c)| acc * c + i))
    }

    pub fn config_at(&self, mut index: usize) -> Result<ArchConfig> {
        if index >= self.total_configs() {
            bail!(Index, "config index {index} out of {}", self.total_configs());
        }
        let mut out = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            out[d] = index % self.choices[d];
            index /= self.choices[d];
        }
        Ok(ArchConfig(out))
    }

    pub fn configs(&self) -> impl Iterator<Item = ArchConfig> + '_ {
        (0..self.total_configs()).map(move |i| self.config_at(i).expect("index in range"))
    }

    pub fn one_hot_encode(&self, config: &ArchConfig) -> Result<Vec<f64>> {
        self.validate(config)?;
        let mut out = vec![0.0; self.encoding_len()];
        for (off, &i) in self.offsets().into_iter().zip(&config.0) {
            out[off + i] = 1.0;
        }
        Ok(out)
    }

    /// Inverse of [`one_hot_encode`](Self::one_hot_encode); every block must be
    /// an exact one-hot vector.
    pub fn decode(&self, encoding: &[f64]) -> Result<ArchConfig> {
        let blocks = self.split(encoding)?;
        let mut out = Vec::with_capacity(self.dims());
        for (d, block) in blocks.iter().enumerate() {
            let ones: Vec<usize> = block.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect();
            if ones.len() != 1 || block.iter().filter(|&&v| v != 0.0).count() != 1 {
                bail!(Index, "dimension {d} is not one-hot: {block:?}");
            }
            out.push(ones[0]);
        }
        Ok(ArchConfig(out))
    }

    /// Per-dimension argmax of a logit (or probability) vector.
    pub fn argmax_config(&self, logits: &[f64]) -> Result<ArchConfig> {
        let blocks = self.split(logits)?;
        Ok(ArchConfig(
            blocks
                .iter()
                .map(|b| {
                    let mut best = 0;
                    for (i, &v) in b.iter().enumerate() {
                        if v > b[best] {
                            best = i;
                        }
                    }
                    best
                })
                .collect(),
        ))
    }

    /// FNV-1a hash of the choice vector; checkpoints carry it so they cannot be
    /// loaded against a different space.
    pub fn descriptor_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.choices.len() as u64);
        for &c in &self.choices {
            feed(c as u64);
        }
        h
    }

    pub fn describe(&self) -> alloc::string::String {
        format!("{:?}", self.choices)
    }
}

/// Dense table of one objective over every config of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTable {
    pub objective: usize,
    pub device: Option<usize>,
    pub values: Vec<f64>,
}

impl ObjectiveTable {
    pub fn new(objective: usize, device: Option<usize>, values: Vec<f64>) -> Result<Self> {
        crate::error::ensure_finite("objective table", &values)?;
        Ok(Self { objective, device, values })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
