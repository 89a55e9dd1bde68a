//! Multi-run experiment helpers shared by the CLI and the acceptance suite.

use serde::{Deserialize, Serialize};

use hwpareto_core::architect::Estimator;
use hwpareto_core::archspace::{enumerate_true_front, Benchmark};
use hwpareto_core::hypernet::{HypernetConfig, MetaHypernet};
use hwpareto_core::pareto::{gd, gd_plus, hypervolume, igd, igd_plus, nondominated_filter};
use hwpareto_core::pipeline::{run_with_predictors, train_predictors, HardwareMode, PipelineConfig};
use hwpareto_core::predictor::{MetaPredictor, TrainReport};
use hwpareto_core::search::{profile_pareto, run_baseline, BaselineKind, UpdateScheme};
use hwpareto_core::Result;

use crate::io::MetricReport;

/// HV plus distance metrics of `points` against the enumerated true front
/// (or `reference_front` when given), all in normalized space with the
/// all-ones reference point.
pub fn metric_report(
    bench: &Benchmark,
    device: usize,
    points: &[Vec<f64>],
    reference_front: Option<&[Vec<f64>]>,
) -> Result<MetricReport> {
    let m = bench.objectives();
    let reference = vec![1.0; m];
    let truth = match reference_front {
        Some(f) => nondominated_filter(f)?.into_points(),
        None => enumerate_true_front(bench, device, &bench.all_objectives())?.front.into_points(),
    };
    let front = nondominated_filter(points)?.into_points();
    Ok(MetricReport {
        device,
        reference: reference.clone(),
        points: points.len(),
        front_size: front.len(),
        hypervolume: hypervolume(&front, &reference)?,
        true_hypervolume: hypervolume(&truth, &reference)?,
        gd: gd(&front, &truth)?,
        igd: igd(&front, &truth)?,
        gd_plus: gd_plus(&front, &truth)?,
        igd_plus: igd_plus(&front, &truth)?,
    })
}

/// Per-device comparison of a searched hypernetwork against both baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceResult {
    pub device: usize,
    pub split: String,
    pub hypervolume: f64,
    pub rs_hypervolume: f64,
    pub rhpn_hypervolume: f64,
    pub true_hypervolume: f64,
    pub distinct_configs: usize,
    /// Lowest normalized error among the profiled configs.
    pub best_error: f64,
}

pub fn compare_devices(net: &MetaHypernet, bench: &Benchmark, count: usize, seed: u64) -> Result<Vec<DeviceResult>> {
    let hcfg = HypernetConfig { ..net.config().clone() };
    (0..bench.devices.len())
        .map(|d| {
            let p = profile_pareto(net, bench, d, count)?;
            let rs = run_baseline(BaselineKind::Rs, bench, d, count, seed, &hcfg)?;
            let rhpn = run_baseline(BaselineKind::Rhpn, bench, d, count, seed, &hcfg)?;
            let truth = enumerate_true_front(bench, d, &bench.all_objectives())?;
            Ok(DeviceResult {
                device: d,
                split: if bench.test_devices.contains(&d) { "test" } else { "train" }.into(),
                hypervolume: p.hypervolume,
                rs_hypervolume: rs.hypervolume,
                rhpn_hypervolume: rhpn.hypervolume,
                true_hypervolume: hypervolume(truth.front.points(), &vec![1.0; bench.objectives()])?,
                distinct_configs: p.configs.len(),
                best_error: p.points.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

/// One ablation arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Scheme(UpdateScheme),
    Estimator(Estimator),
    /// The same constraint on every hardware objective.
    Constraint(f64),
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Scheme(s) => s.name().into(),
            Variant::Estimator(e) => e.name().into(),
            Variant::Constraint(c) => format!("c={c}"),
        }
    }

    pub fn apply(&self, cfg: &mut PipelineConfig, objectives: usize) {
        match *self {
            Variant::Scheme(s) => cfg.search.scheme = s,
            Variant::Estimator(e) => cfg.search.estimator = e,
            Variant::Constraint(c) => cfg.search.constraints = vec![c; objectives - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub device: usize,
    pub split: String,
    /// Hypervolume recorded by the search trace after the last epoch.
    pub hypervolume: f64,
    pub best_error: f64,
    pub distinct_configs: usize,
}

/// Predictors for one seed, trained once and shared by every arm.
pub fn seed_predictors(bench: &Benchmark, cfg: &PipelineConfig, seed: u64) -> Result<(Vec<MetaPredictor>, Vec<TrainReport>)> {
    match cfg.hardware {
        HardwareMode::Predictor => train_predictors(bench, &cfg.predictor, seed),
        HardwareMode::Exact => Ok((Vec::new(), Vec::new())),
    }
}

/// Runs every arm for every seed. `progress` is called after each run.
pub fn ablate(
    bench: &Benchmark,
    base: &PipelineConfig,
    variants: &[Variant],
    seeds: &[u64],
    mut progress: impl FnMut(&str, u64),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let (preds, reports) = seed_predictors(bench, base, seed)?;
        for v in variants {
            let mut cfg = base.clone();
            cfg.search.seed = seed;
            v.apply(&mut cfg, bench.objectives());
            let out = run_with_predictors(bench, &cfg, preds.clone(), reports.clone(), None)?;
            for d in 0..bench.devices.len() {
                let p = profile_pareto(&out.hypernet, bench, d, cfg.search.profile_count)?;
                rows.push(AblationRow {
                    variant: v.label(),
                    seed,
                    device: d,
                    split: if bench.test_devices.contains(&d) { "test" } else { "train" }.into(),
                    hypervolume: out.trace.final_hypervolume(d).unwrap_or(p.hypervolume),
                    best_error: p.points.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min),
                    distinct_configs: p.configs.len(),
                });
            }
            progress(&v.label(), seed);
        }
    }
    Ok(rows)
}

/// Mean hypervolume of one arm over its train-device rows.
pub fn mean_train_hypervolume(rows: &[AblationRow], variant: &str) -> f64 {
    let hv: Vec<f64> = rows.iter().filter(|r| r.variant == variant && r.split == "train").map(|r| r.hypervolume).collect();
    hv.iter().sum::<f64>() / hv.len().max(1) as f64
}
