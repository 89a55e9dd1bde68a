//! Front read-out after search, and the two reference baselines.

use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::archspace::Benchmark;
use crate::error::{bail, Result};
use crate::hypernet::{HypernetConfig, MetaHypernet};
use crate::moo::equidistant_preferences;
use crate::pareto::{hypervolume, nondominated_filter};
use crate::rng::{substream, tags};

/// Architectures chosen for a device and their true normalized objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub device: usize,
    pub objectives: Vec<usize>,
    /// Preference vectors swept (empty for random sampling).
    pub preferences: Vec<Vec<f64>>,
    /// Config index read out for each preference.
    pub readouts: Vec<usize>,
    /// Distinct configs, in order of first appearance.
    pub configs: Vec<usize>,
    /// Normalized objective vector of each distinct config.
    pub points: Vec<Vec<f64>>,
    /// Nondominated subset of `points`.
    pub front: Vec<Vec<f64>>,
    /// Hypervolume of `front` against the all-ones reference point.
    pub hypervolume: f64,
}

/// Evaluates configs on the true tables, normalized per device over all
/// configs, and keeps the nondominated ones.
pub fn evaluate_configs(bench: &Benchmark, device: usize, readouts: &[usize]) -> Result<Profile> {
    let objectives = bench.all_objectives();
    let table = bench.normalized_points(device, &objectives)?;
    let mut configs: Vec<usize> = Vec::new();
    for &c in readouts {
        if c >= table.len() {
            bail!(Index, "config {c} out of {}", table.len());
        }
        if !configs.contains(&c) {
            configs.push(c);
        }
    }
    let points: Vec<Vec<f64>> = configs.iter().map(|&c| table[c].clone()).collect();
    let front = nondominated_filter(&points)?.into_points();
    let reference = alloc::vec![1.0; objectives.len()];
    let hv = hypervolume(&front, &reference)?;
    Ok(Profile {
        device,
        objectives,
        preferences: Vec::new(),
        readouts: readouts.to_vec(),
        configs,
        points,
        front,
        hypervolume: hv,
    })
}

/// Sweeps `count` equidistant preferences through the hypernetwork, reads
/// out each architecture by per-dimension argmax (no sampling) and evaluates
/// the distinct ones on the true tables. Works for any device with a
/// profile, including ones never searched on.
pub fn profile_pareto(net: &MetaHypernet, bench: &Benchmark, device: usize, count: usize) -> Result<Profile> {
    if net.space() != &bench.space {
        bail!(Shape, "hypernetwork space {} differs from benchmark space {}", net.space().describe(), bench.space.describe());
    }
    let features = bench.profile(device)?.concat();
    let prefs = equidistant_preferences(bench.objectives(), count)?;
    let mut readouts = Vec::with_capacity(prefs.len());
    for r in &prefs {
        let logits = net.logits(r.weights(), &features)?;
        readouts.push(bench.space.index_of(&bench.space.argmax_config(&logits)?)?);
    }
    let mut p = evaluate_configs(bench, device, &readouts)?;
    p.preferences = prefs.iter().map(|r| r.weights().to_vec()).collect();
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Uniformly random distinct configs.
    Rs,
    /// A freshly initialized (untrained) hypernetwork swept the same way as a searched one.
    Rhpn,
}

impl BaselineKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rs" => Ok(BaselineKind::Rs),
            "rhpn" => Ok(BaselineKind::Rhpn),
            other => bail!(Usage, "unknown baseline `{other}` (expected rs or rhpn)"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Rs => "rs",
            BaselineKind::Rhpn => "rhpn",
        }
    }
}

pub fn run_baseline(
    kind: BaselineKind,
    bench: &Benchmark,
    device: usize,
    count: usize,
    seed: u64,
    hypernet: &HypernetConfig,
) -> Result<Profile> {
    match kind {
        BaselineKind::Rs => {
            let total = bench.space.total_configs();
            let mut rng = substream(seed, &[tags::BASELINE, 0, device as u64]);
            let picks = sample(&mut rng, total, count.min(total)).into_vec();
            evaluate_configs(bench, device, &picks)
        }
        BaselineKind::Rhpn => {
            let mut rng = substream(seed, &[tags::BASELINE, 1]);
            let feature_len = bench.profile(device)?.concat().len();
            let net =
                MetaHypernet::new(bench.space.clone(), bench.objectives(), feature_len, hypernet.clone(), &mut rng)?;
            profile_pareto(&net, bench, device, count)
        }
    }
}
