//! End-to-end composition: predictors → pretrained hypernetwork → search.
//!
//! Each stage draws from its own substream of the run seed, so any stage can
//! be rerun on its own (the CLI does exactly that) and give the same result.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::archspace::Benchmark;
use crate::error::{bail, Result};
use crate::hypernet::{pretrain_uniform, HypernetConfig, MetaHypernet, PretrainConfig, PretrainReport};
use crate::predictor::{train_predictor, ExactSurrogate, HardwareSurrogate, MetaPredictor, PredictorConfig, TrainReport};
use crate::rng::{substream, tags};
use crate::search::{search, SearchConfig, SearchTrace};

/// Which hardware surrogate the search sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardwareMode {
    /// Frozen learned predictors (the normal pipeline).
    #[default]
    Predictor,
    /// Multilinear extension of the true tables (an upper-bound ablation).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub hardware: HardwareMode,
    pub predictor: PredictorConfig,
    pub hypernet: HypernetConfig,
    pub pretrain: PretrainConfig,
    pub search: SearchConfig,
}

/// Hypernetwork feature length: all hardware objectives' reference
/// evaluations, concatenated.
pub fn feature_len(bench: &Benchmark) -> Result<usize> {
    Ok(bench.profile(0)?.concat().len())
}

/// Trains and freezes one predictor per hardware objective on the train devices.
pub fn train_predictors(bench: &Benchmark, cfg: &PredictorConfig, seed: u64) -> Result<(Vec<MetaPredictor>, Vec<TrainReport>)> {
    let mut nets = Vec::new();
    let mut reports = Vec::new();
    for m in 1..bench.objectives() {
        let mut net = MetaPredictor::new(
            bench.space.clone(),
            m,
            bench.profile(0)?.objective(m)?.len(),
            cfg.hidden,
            &mut substream(seed, &[tags::PREDICTOR, m as u64, 0]),
        )?;
        let report =
            train_predictor(&mut net, bench, &bench.train_devices, cfg, &mut substream(seed, &[tags::PREDICTOR, m as u64, 1]))?;
        net.freeze();
        nets.push(net);
        reports.push(report);
    }
    Ok((nets, reports))
}

/// Initializes a hypernetwork and pretrains it towards uniform logits on the
/// train devices' features.
pub fn pretrained_hypernet(
    bench: &Benchmark,
    hcfg: &HypernetConfig,
    pcfg: &PretrainConfig,
    seed: u64,
) -> Result<(MetaHypernet, PretrainReport)> {
    let mut net = MetaHypernet::new(
        bench.space.clone(),
        bench.objectives(),
        feature_len(bench)?,
        hcfg.clone(),
        &mut substream(seed, &[tags::HYPERNET_INIT]),
    )?;
    let features: Vec<Vec<f64>> =
        bench.train_devices.iter().map(|&t| Ok(bench.profile(t)?.concat())).collect::<Result<_>>()?;
    let report = pretrain_uniform(&mut net, &features, pcfg, &mut substream(seed, &[tags::PRETRAIN]))?;
    Ok((net, report))
}

/// Exact surrogates for every hardware objective.
pub fn exact_surrogates(bench: &Benchmark) -> Result<Vec<ExactSurrogate>> {
    (1..bench.objectives()).map(|m| ExactSurrogate::new(bench, m)).collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub hypernet: MetaHypernet,
    pub pretrain: PretrainReport,
    pub predictors: Vec<MetaPredictor>,
    pub predictor_reports: Vec<TrainReport>,
    pub trace: SearchTrace,
}

/// Runs the whole pipeline with `cfg.search.seed` as the run seed.
pub fn run(bench: &Benchmark, cfg: &PipelineConfig, clock: Option<&dyn Fn() -> f64>) -> Result<RunOutput> {
    let seed = cfg.search.seed;
    let (predictors, predictor_reports) = match cfg.hardware {
        HardwareMode::Predictor => train_predictors(bench, &cfg.predictor, seed)?,
        HardwareMode::Exact => (Vec::new(), Vec::new()),
    };
    run_with_predictors(bench, cfg, predictors, predictor_reports, clock)
}

/// Like [`run`] but reuses already trained predictors (ignored in exact mode).
pub fn run_with_predictors(
    bench: &Benchmark,
    cfg: &PipelineConfig,
    predictors: Vec<MetaPredictor>,
    predictor_reports: Vec<TrainReport>,
    clock: Option<&dyn Fn() -> f64>,
) -> Result<RunOutput> {
    let seed = cfg.search.seed;
    let (mut hypernet, pretrain) = pretrained_hypernet(bench, &cfg.hypernet, &cfg.pretrain, seed)?;
    let exact = exact_surrogates(bench)?;
    let hardware: Vec<&dyn HardwareSurrogate> = match cfg.hardware {
        HardwareMode::Predictor => {
            if predictors.len() + 1 != bench.objectives() {
                bail!(Shape, "{} predictors for {} hardware objectives", predictors.len(), bench.objectives() - 1);
            }
            predictors.iter().map(|p| p as &dyn HardwareSurrogate).collect()
        }
        HardwareMode::Exact => exact.iter().map(|p| p as &dyn HardwareSurrogate).collect(),
    };
    let trace = search(&mut hypernet, bench, &hardware, &cfg.search, clock)?;
    Ok(RunOutput { hypernet, pretrain, predictors, predictor_reports, trace })
}
