//! Synthetic tabular benchmark with several devices.
//!
//! Every config gets a latent *quality* score: a weighted sum of per-choice
//! capacities plus pairwise interactions. Error falls with quality. Each
//! hardware objective on each device blends two parts:
//!
//! * a *conflicting* part, a per-device weighted sum of the same capacities
//!   (plus device jitter and a small interaction), so accurate configs are
//!   expensive;
//! * an *aligned* part, the normalized validation error itself.
//!
//! `conflict` sets the blend. At `conflict = 0` every hardware objective is an
//! increasing affine function of the validation error, so the error-optimal
//! config is optimal everywhere and the true front is a single point.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ArchSpace, ObjectiveTable};
use crate::error::{bail, Error, Result};
use crate::numerics::{exp, sqrt};
use crate::pareto::{nondominated_filter, ParetoFront};
use crate::rng::{substream, tags};

/// Generation knobs. Everything in a [`Benchmark`] is a pure function of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub seed: u64,
    pub choices: Vec<usize>,
    /// Number of objectives `M` (accuracy plus `M - 1` hardware objectives).
    pub objectives: usize,
    pub devices: usize,
    /// How many of the devices (the last ones) are held out of search.
    pub test_devices: usize,
    /// Blend between aligned (0) and conflicting (1) hardware costs, in `[0, 1]`.
    pub conflict: f64,
    /// Log-scale spread of per-device sensitivities, in `[0, 2]`.
    pub heterogeneity: f64,
    /// Half-width of the uniform noise separating valid from train error, in `[0, 0.1]`.
    pub noise: f64,
    /// Strength of pairwise interaction terms, in `[0, 1]`.
    pub interaction: f64,
    /// Number of shared reference configs used for device profiles.
    pub reference_count: usize,
}

impl Default for Recipe {
    fn default() -> Self {
        Self {
            seed: 7,
            choices: vec![4; 4],
            objectives: 2,
            devices: 5,
            test_devices: 2,
            conflict: 0.8,
            heterogeneity: 0.3,
            noise: 0.005,
            interaction: 0.15,
            reference_count: 10,
        }
    }
}

impl Recipe {
    pub fn validate(&self) -> Result<ArchSpace> {
        let space = ArchSpace::new(self.choices.clone()).map_err(|e| Error::Recipe(format!("{e}")))?;
        let check = |name: &str, v: f64, lo: f64, hi: f64| -> Result<()> {
            if !(v >= lo && v <= hi) {
                bail!(Recipe, "{name} = {v} outside [{lo}, {hi}]");
            }
            Ok(())
        };
        check("conflict", self.conflict, 0.0, 1.0)?;
        check("heterogeneity", self.heterogeneity, 0.0, 2.0)?;
        check("noise", self.noise, 0.0, 0.1)?;
        check("interaction", self.interaction, 0.0, 1.0)?;
        if self.objectives < 2 || self.objectives > 3 {
            bail!(Recipe, "objectives must be 2 or 3, got {}", self.objectives);
        }
        if self.devices == 0 || self.test_devices >= self.devices {
            bail!(Recipe, "need at least one search device ({} devices, {} held out)", self.devices, self.test_devices);
        }
        if self.reference_count == 0 || self.reference_count > space.total_configs() {
            bail!(Recipe, "reference_count {} must be in [1, {}]", self.reference_count, space.total_configs());
        }
        Ok(space)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    pub name: String,
    /// One table per hardware objective, `hardware[m - 1]` for objective `m`.
    pub hardware: Vec<ObjectiveTable>,
}

/// Device features from reference-architecture evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device: usize,
    /// `features[m - 1]` holds the normalized reference evaluations of objective `m`.
    pub features: Vec<Vec<f64>>,
}

impl DeviceProfile {
    /// Concatenation over hardware objectives, objective 1 first.
    pub fn concat(&self) -> Vec<f64> {
        self.features.iter().flatten().copied().collect()
    }

    pub fn objective(&self, m: usize) -> Result<&[f64]> {
        if m == 0 || m > self.features.len() {
            bail!(Index, "device profile has no hardware objective {m}");
        }
        Ok(&self.features[m - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub recipe: Recipe,
    pub space: ArchSpace,
    pub accuracy_train: ObjectiveTable,
    pub accuracy_valid: ObjectiveTable,
    pub devices: Vec<Device>,
    pub train_devices: Vec<usize>,
    pub test_devices: Vec<usize>,
    pub reference_configs: Vec<usize>,
    pub profiles: Vec<DeviceProfile>,
}

impl Benchmark {
    pub fn objectives(&self) -> usize {
        self.recipe.objectives
    }

    pub fn device(&self, id: usize) -> Result<&Device> {
        self.devices.get(id).ok_or_else(|| Error::Benchmark(format!("unknown device {id}")))
    }

    pub fn profile(&self, id: usize) -> Result<&DeviceProfile> {
        self.profiles
            .iter()
            .find(|p| p.device == id)
            .ok_or_else(|| Error::Benchmark(format!("no profile for device {id}")))
    }

    /// Ground-truth table of objective `m` on `device` (`m = 0` is validation error).
    pub fn table(&self, device: usize, m: usize) -> Result<&[f64]> {
        if m == 0 {
            return Ok(&self.accuracy_valid.values);
        }
        let dev = self.device(device)?;
        dev.hardware
            .get(m - 1)
            .map(|t| t.values.as_slice())
            .ok_or_else(|| Error::Benchmark(format!("device {device} has no table for objective {m}")))
    }

    /// Objective `m` on `device` min-max normalized over all configs.
    pub fn normalized_table(&self, device: usize, m: usize) -> Result<Vec<f64>> {
        let t = self.table(device, m)?;
        let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = hi - lo;
        Ok(t.iter().map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect())
    }

    /// Normalized objective vectors of every config on `device`.
    pub fn normalized_points(&self, device: usize, objectives: &[usize]) -> Result<Vec<Vec<f64>>> {
        let tables = objectives.iter().map(|&m| self.normalized_table(device, m)).collect::<Result<Vec<_>>>()?;
        Ok((0..self.space.total_configs()).map(|c| tables.iter().map(|t| t[c]).collect()).collect())
    }

    pub fn all_objectives(&self) -> Vec<usize> {
        (0..self.objectives()).collect()
    }

    /// Structural checks for a benchmark that did not come from
    /// [`generate_benchmark`] (e.g. one read from disk).
    pub fn validate(&self) -> Result<()> {
        let space = self.recipe.validate()?;
        if space != self.space {
            bail!(Benchmark, "space {} does not match the recipe", self.space.describe());
        }
        let n = self.space.total_configs();
        let m = self.objectives();
        for (what, t) in [("train accuracy", &self.accuracy_train), ("valid accuracy", &self.accuracy_valid)] {
            if t.values.len() != n || t.values.iter().any(|v| !v.is_finite()) {
                bail!(Benchmark, "{what} table must hold {n} finite values");
            }
        }
        if self.devices.len() != self.recipe.devices || self.profiles.len() != self.devices.len() {
            bail!(Benchmark, "expected {} devices and profiles", self.recipe.devices);
        }
        for (i, d) in self.devices.iter().enumerate() {
            if d.id != i || d.hardware.len() != m - 1 {
                bail!(Benchmark, "device {i} is malformed");
            }
            if d.hardware.iter().any(|t| t.values.len() != n || t.values.iter().any(|v| !v.is_finite())) {
                bail!(Benchmark, "device {i} tables must hold {n} finite values each");
            }
            let p = self.profile(i)?;
            if p.features.len() != m - 1 || p.features.iter().any(|f| f.len() != self.reference_configs.len()) {
                bail!(Benchmark, "device {i} profile is malformed");
            }
        }
        if self.reference_configs.iter().any(|&c| c >= n) {
            bail!(Benchmark, "reference config out of range");
        }
        let mut split: Vec<usize> = self.train_devices.iter().chain(&self.test_devices).copied().collect();
        split.sort_unstable();
        if split != (0..self.devices.len()).collect::<Vec<_>>() || self.test_devices.len() != self.recipe.test_devices {
            bail!(Benchmark, "train/test split does not partition the devices");
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

fn rescale(values: &[f64], what: &str) -> Result<Vec<f64>> {
    let (lo, hi) = min_max(values);
    if !(hi - lo > 1e-12) {
        bail!(Recipe, "{what} has zero variance");
    }
    Ok(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Random symmetric pairwise interaction tables, flattened per pair.
fn pair_tables<R: Rng>(rng: &mut R, choices: &[usize]) -> Vec<(usize, usize, Vec<f64>)> {
    let mut out = Vec::new();
    for d in 0..choices.len() {
        for e in d + 1..choices.len() {
            out.push((d, e, (0..choices[d] * choices[e]).map(|_| normal(rng)).collect()));
        }
    }
    out
}

fn pair_term(pairs: &[(usize, usize, Vec<f64>)], choices: &[usize], config: &[usize]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let s: f64 = pairs.iter().map(|(d, e, t)| t[config[*d] * choices[*e] + config[*e]]).sum();
    s / sqrt(pairs.len() as f64)
}

/// Builds the benchmark described by `recipe`. Deterministic per recipe.
pub fn generate_benchmark(recipe: &Recipe) -> Result<Benchmark> {
    let space = recipe.validate()?;
    let mut rng = substream(recipe.seed, &[tags::BENCHMARK]);
    let choices = space.choices().to_vec();
    let dims = space.dims();
    let configs: Vec<Vec<usize>> = space.configs().map(|c| c.0).collect();

    let capacity: Vec<Vec<f64>> = choices.iter().map(|&c| (0..c).map(|_| uniform(&mut rng, 0.0, 1.0)).collect()).collect();
    let dim_weight: Vec<f64> = (0..dims).map(|_| uniform(&mut rng, 0.5, 1.5)).collect();
    let quality_pairs = pair_tables(&mut rng, &choices);

    let quality: Vec<f64> = configs
        .iter()
        .map(|c| {
            let base: f64 = (0..dims).map(|d| dim_weight[d] * capacity[d][c[d]]).sum();
            base + recipe.interaction * pair_term(&quality_pairs, &choices, c)
        })
        .collect();
    let quality = rescale(&quality, "quality score")?;
    let train: Vec<f64> = quality.iter().map(|q| 0.1 + 0.8 * (1.0 - q)).collect();
    let valid: Vec<f64> = train.iter().map(|e| e + recipe.noise * uniform(&mut rng, -1.0, 1.0)).collect();
    let aligned = rescale(&valid, "validation error")?;

    // per-objective mixing of capacities, shared across devices; objective 1
    // (latency) uses the capacities as-is
    let hardware_objectives = recipe.objectives - 1;
    let mixing: Vec<Vec<f64>> = (0..hardware_objectives)
        .map(|h| (0..dims).map(|_| if h == 0 { 1.0 } else { uniform(&mut rng, 0.2, 1.8) }).collect())
        .collect();

    let mut devices = Vec::with_capacity(recipe.devices);
    for t in 0..recipe.devices {
        let mut hardware = Vec::with_capacity(hardware_objectives);
        for (h, mix) in mixing.iter().enumerate() {
            let scale = uniform(&mut rng, 0.5, 2.0);
            let sens: Vec<f64> = (0..dims).map(|_| exp(recipe.heterogeneity * normal(&mut rng))).collect();
            let jitter: Vec<Vec<f64>> = choices
                .iter()
                .map(|&c| (0..c).map(|_| 0.3 * recipe.heterogeneity * normal(&mut rng)).collect())
                .collect();
            let pairs = pair_tables(&mut rng, &choices);
            let cost: Vec<f64> = configs
                .iter()
                .map(|c| {
                    let base: f64 = (0..dims).map(|d| sens[d] * mix[d] * (capacity[d][c[d]] + jitter[d][c[d]])).sum();
                    base + 0.5 * recipe.interaction * pair_term(&pairs, &choices, c)
                })
                .collect();
            let cost = rescale(&cost, "hardware cost")?;
            let values: Vec<f64> = cost
                .iter()
                .zip(&aligned)
                .map(|(c, a)| scale * (0.2 + recipe.conflict * c + (1.0 - recipe.conflict) * a))
                .collect();
            hardware.push(ObjectiveTable::new(h + 1, Some(t), values)?);
        }
        devices.push(Device { id: t, name: format!("device-{t}"), hardware });
    }

    let split = recipe.devices - recipe.test_devices;
    let mut ref_rng = substream(recipe.seed, &[tags::REFERENCE_CONFIGS]);
    let mut reference_configs = sample(&mut ref_rng, space.total_configs(), recipe.reference_count).into_vec();
    reference_configs.sort_unstable();

    let mut bench = Benchmark {
        recipe: recipe.clone(),
        accuracy_train: ObjectiveTable::new(0, None, train)?,
        accuracy_valid: ObjectiveTable::new(0, None, valid)?,
        space,
        devices,
        train_devices: (0..split).collect(),
        test_devices: (split..recipe.devices).collect(),
        reference_configs,
        profiles: Vec::new(),
    };
    bench.profiles = (0..recipe.devices)
        .map(|t| build_device_profile(&bench, t, &bench.reference_configs))
        .collect::<Result<_>>()?;
    Ok(bench)
}

/// Reference-config evaluations of every hardware objective on `device`, each
/// divided by its own maximum.
pub fn build_device_profile(bench: &Benchmark, device: usize, reference_configs: &[usize]) -> Result<DeviceProfile> {
    let dev = bench.device(device)?;
    if dev.hardware.len() + 1 != bench.objectives() {
        bail!(Benchmark, "device {device} has {} hardware tables, expected {}", dev.hardware.len(), bench.objectives() - 1);
    }
    let mut features = Vec::with_capacity(dev.hardware.len());
    for table in &dev.hardware {
        let raw: Vec<f64> = reference_configs
            .iter()
            .map(|&c| {
                table
                    .values
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::Benchmark(format!("reference config {c} outside the table")))
            })
            .collect::<Result<_>>()?;
        let max = raw.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if !(max > 0.0) {
            bail!(Benchmark, "device {device} objective {} has no positive reference value", table.objective);
        }
        features.push(raw.iter().map(|v| v / max).collect());
    }
    Ok(DeviceProfile { device, features })
}

/// The exact Pareto front of a device, with the flat indices of the configs on it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueFront {
    pub front: ParetoFront,
    pub configs: Vec<usize>,
}

/// Exhaustively enumerates the nondominated configs of `device` in normalized
/// objective space. Points come out sorted lexicographically by objectives.
pub fn enumerate_true_front(bench: &Benchmark, device: usize, objectives: &[usize]) -> Result<TrueFront> {
    let total = bench.space.total_configs();
    if total > super::ENUMERATION_CAP {
        bail!(Capacity, "{total} configs exceed the enumeration cap");
    }
    let points = bench.normalized_points(device, objectives)?;
    let front = nondominated_filter(&points)?;
    let configs = front
        .points()
        .iter()
        .map(|p| points.iter().position(|q| q == p).expect("front point comes from the input"))
        .collect();
    Ok(TrueFront { front, configs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::dominates;

    #[test]
    fn generated_benchmarks_validate_and_corruption_is_caught() {
        let b = generate_benchmark(&Recipe::default()).unwrap();
        b.validate().unwrap();
        let mut c = b.clone();
        c.devices[1].hardware[0].values.pop();
        assert!(c.validate().is_err());
        let mut c = b.clone();
        c.test_devices.push(0);
        assert!(c.validate().is_err());
        let mut c = b;
        c.accuracy_valid.values[3] = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_benchmark(&Recipe::default()).unwrap();
        let b = generate_benchmark(&Recipe::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_benchmark(&Recipe { seed: 8, ..Recipe::default() }).unwrap();
        assert_ne!(a.accuracy_valid, c.accuracy_valid);
    }

    #[test]
    fn valid_is_train_plus_bounded_noise() {
        let b = generate_benchmark(&Recipe::default()).unwrap();
        for (t, v) in b.accuracy_train.values.iter().zip(&b.accuracy_valid.values) {
            assert!((t - v).abs() <= b.recipe.noise + 1e-15);
        }
    }

    #[test]
    fn zero_conflict_collapses_front() {
        for seed in 0..5 {
            let b = generate_benchmark(&Recipe { seed, conflict: 0.0, ..Recipe::default() }).unwrap();
            let best = b
                .accuracy_valid
                .values
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .unwrap()
                .0;
            for t in 0..b.devices.len() {
                let f = enumerate_true_front(&b, t, &[0, 1]).unwrap();
                assert_eq!(f.configs, vec![best]);
            }
        }
    }

    #[test]
    fn default_recipe_has_real_tradeoffs() {
        let b = generate_benchmark(&Recipe::default()).unwrap();
        for t in 0..b.devices.len() {
            let f = enumerate_true_front(&b, t, &[0, 1]).unwrap();
            assert!(f.front.len() >= 3, "device {t}: front of {}", f.front.len());
        }
    }

    #[test]
    fn true_front_matches_pairwise_oracle() {
        let b = generate_benchmark(&Recipe::default()).unwrap();
        for t in 0..b.devices.len() {
            let points = b.normalized_points(t, &[0, 1]).unwrap();
            let f = enumerate_true_front(&b, t, &[0, 1]).unwrap();
            let mut oracle: Vec<usize> =
                (0..points.len()).filter(|&i| !points.iter().any(|q| dominates(q, &points[i]))).collect();
            oracle.sort_by(|&x, &y| points[x].partial_cmp(&points[y]).unwrap());
            oracle.dedup_by(|x, y| points[*x] == points[*y]);
            assert_eq!(f.configs, oracle);
        }
    }

    #[test]
    fn single_and_dominated_spaces() {
        // smallest legal space with the hardware table equal to the error table
        let mut b = generate_benchmark(&Recipe { choices: vec![2], conflict: 0.0, reference_count: 1, ..Recipe::default() }).unwrap();
        let f = enumerate_true_front(&b, 0, &[0, 1]).unwrap();
        assert_eq!(f.front.len(), 1);
        // planting identical objectives for both configs leaves one front point
        b.accuracy_valid.values = vec![0.5, 0.5];
        b.devices[0].hardware[0].values = vec![1.0, 1.0];
        assert_eq!(enumerate_true_front(&b, 0, &[0, 1]).unwrap().front.len(), 1);
    }

    #[test]
    fn profiles() {
        let b = generate_benchmark(&Recipe { objectives: 3, ..Recipe::default() }).unwrap();
        for p in &b.profiles {
            assert_eq!(p.concat().len(), b.recipe.reference_count * 2);
            assert!(p.concat().iter().all(|&v| v > 0.0 && v <= 1.0));
        }
        let mut twin = b.clone();
        twin.devices[1] = Device { id: 1, ..b.devices[0].clone() };
        let p0 = build_device_profile(&twin, 0, &twin.reference_configs).unwrap();
        let p1 = build_device_profile(&twin, 1, &twin.reference_configs).unwrap();
        assert_eq!(p0.features, p1.features);
        let mut scaled = b.clone();
        for t in &mut scaled.devices[0].hardware {
            t.values.iter_mut().for_each(|v| *v *= 2.0);
        }
        let ps = build_device_profile(&scaled, 0, &scaled.reference_configs).unwrap();
        assert_eq!(ps.features, b.profiles[0].features);
        let mut missing = b.clone();
        missing.devices[2].hardware.pop();
        assert!(matches!(build_device_profile(&missing, 2, &missing.reference_configs), Err(Error::Benchmark(_))));
    }

    #[test]
    fn recipe_validation() {
        assert!(matches!(generate_benchmark(&Recipe { conflict: 1.5, ..Recipe::default() }), Err(Error::Recipe(_))));
        assert!(matches!(generate_benchmark(&Recipe { test_devices: 5, ..Recipe::default() }), Err(Error::Recipe(_))));
        assert!(matches!(generate_benchmark(&Recipe { objectives: 4, ..Recipe::default() }), Err(Error::Recipe(_))));
    }
}
