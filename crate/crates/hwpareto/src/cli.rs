//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hwpareto_core::architect::Estimator;
use hwpareto_core::archspace::{enumerate_true_front, generate_benchmark, Benchmark, Recipe};
use hwpareto_core::pipeline::{self, HardwareMode, PipelineConfig};
use hwpareto_core::predictor::{MetaPredictor, PredictorConfig, TrainReport};
use hwpareto_core::search::{self, profile_pareto, run_baseline, BaselineKind, SurrogateMode, UpdateScheme};

use crate::config::FileConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::{ablate, compare_devices, mean_train_hypervolume, metric_report, Variant};
use crate::io::{
    benchmark_bytes, front_csv, read_benchmark, read_front_points, read_hypernet, read_predictor, HypernetCheckpoint,
    OutputSet, PredictorCheckpoint,
};
use crate::manifest::{manifest_path_for, Manifest};

#[derive(Debug, Parser)]
#[command(name = "hwpareto", version, about = "Hardware-aware multi-objective architecture search on a synthetic benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-device benchmark.
    GenBench(GenBenchArgs),
    /// Train a hardware predictor for one objective on the train devices.
    TrainPredictor(TrainPredictorArgs),
    /// Initialize a hypernetwork and pretrain it towards uniform logits.
    PretrainHypernet(PretrainArgs),
    /// Run the search and write a checkpoint, trace, fronts and results.
    Search(SearchArgs),
    /// Sweep preferences through a checkpoint and write the front of one device.
    Profile(ProfileArgs),
    /// Score a front against the enumerated true front.
    Evaluate(EvaluateArgs),
    /// Random-search or random-hypernetwork baseline front.
    Baseline(BaselineArgs),
    /// Compare update schemes, estimators or constraints over several seeds.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct GenBenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Choices per dimension, comma separated (e.g. 4,4,4,4).
    #[arg(long, value_delimiter = ',')]
    pub choices: Option<Vec<usize>>,
    #[arg(long)]
    pub objectives: Option<usize>,
    #[arg(long)]
    pub devices: Option<usize>,
    #[arg(long)]
    pub test_devices: Option<usize>,
    #[arg(long)]
    pub conflict: Option<f64>,
    #[arg(long)]
    pub heterogeneity: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub interaction: Option<f64>,
    #[arg(long)]
    pub reference_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainPredictorArgs {
    #[arg(long)]
    pub bench: PathBuf,
    /// Hardware objective index (1-based; 0 is the error objective).
    #[arg(long, default_value_t = 1)]
    pub objective: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub bank_size: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
}

/// Overrides shared by `search` and `ablate`; each one replaces the file value.
#[derive(Debug, Args, Default)]
pub struct SearchOverrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Hardware surrogate: predictor (default) or exact.
    #[arg(long, value_parser = parse_hardware)]
    pub hardware: Option<HardwareMode>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_surrogate)]
    pub surrogate: Option<SurrogateMode>,
    #[arg(long)]
    pub profile_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: SearchOverrides,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub hypernet: Option<PathBuf>,
    /// Predictor checkpoint; repeat once per hardware objective.
    #[arg(long)]
    pub predictor: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<UpdateScheme>,
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    /// One normalized constraint per hardware objective, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub constraints: Option<Vec<f64>>,
    /// Search devices, comma separated (default: the benchmark's train split).
    #[arg(long, value_delimiter = ',')]
    pub devices: Option<Vec<usize>>,
    /// Record wall-clock seconds in the trace (makes it nondeterministic).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub device: usize,
    #[arg(long, default_value_t = 24)]
    pub count: usize,
    /// Front CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full profile as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Front as CSV (obj* columns) or profile JSON.
    #[arg(long)]
    pub front: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub device: usize,
    /// Reference front to compare against instead of the enumerated one.
    #[arg(long)]
    pub true_front: Option<PathBuf>,
    /// Metrics JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_parser = parse_baseline)]
    pub kind: BaselineKind,
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub device: usize,
    #[arg(long, default_value_t = 24)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(id = "arms", required = true, multiple = false, args = ["schemes", "estimators", "constraints"])]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: SearchOverrides,
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    pub schemes: Option<Vec<UpdateScheme>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Option<Vec<Estimator>>,
    #[arg(long, value_delimiter = ',')]
    pub constraints: Option<Vec<f64>>,
    /// Number of seeds (0, 1, ...).
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    /// Comparison table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_scheme(s: &str) -> Result<UpdateScheme, String> {
    UpdateScheme::parse(s).map_err(|e| e.to_string())
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::parse(s).map_err(|e| e.to_string())
}

fn parse_baseline(s: &str) -> Result<BaselineKind, String> {
    BaselineKind::parse(s).map_err(|e| e.to_string())
}

fn parse_hardware(s: &str) -> Result<HardwareMode, String> {
    match s {
        "predictor" => Ok(HardwareMode::Predictor),
        "exact" => Ok(HardwareMode::Exact),
        _ => Err(format!("unknown hardware mode `{s}` (expected predictor or exact)")),
    }
}

fn parse_surrogate(s: &str) -> Result<SurrogateMode, String> {
    match s {
        "frozen" => Ok(SurrogateMode::Frozen),
        "trainable" => Ok(SurrogateMode::Trainable),
        _ => Err(format!("unknown surrogate mode `{s}` (expected frozen or trainable)")),
    }
}

/// Runs a parsed command. `argv` is recorded in the manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let mut outputs = OutputSet::new();
    let result = dispatch(cli.command, argv, &mut outputs);
    if result.is_err() {
        outputs.discard();
    }
    result
}

fn dispatch(command: Command, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    match command {
        Command::GenBench(a) => gen_bench(a, argv, outputs),
        Command::TrainPredictor(a) => train_predictor(a, argv, outputs),
        Command::PretrainHypernet(a) => pretrain(a, argv, outputs),
        Command::Search(a) => search_cmd(a, argv, outputs),
        Command::Profile(a) => profile(a, argv, outputs),
        Command::Evaluate(a) => evaluate(a, argv, outputs),
        Command::Baseline(a) => baseline(a, argv, outputs),
        Command::Ablate(a) => ablate_cmd(a, argv, outputs),
    }
}

fn gen_bench(a: GenBenchArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let d = Recipe::default();
    let recipe = Recipe {
        seed: a.seed.unwrap_or(d.seed),
        choices: a.choices.unwrap_or(d.choices),
        objectives: a.objectives.unwrap_or(d.objectives),
        devices: a.devices.unwrap_or(d.devices),
        test_devices: a.test_devices.unwrap_or(d.test_devices),
        conflict: a.conflict.unwrap_or(d.conflict),
        heterogeneity: a.heterogeneity.unwrap_or(d.heterogeneity),
        noise: a.noise.unwrap_or(d.noise),
        interaction: a.interaction.unwrap_or(d.interaction),
        reference_count: a.reference_count.unwrap_or(d.reference_count),
    };
    let bench = generate_benchmark(&recipe)?;
    outputs.write(&a.out, &benchmark_bytes(&bench)?)?;
    let mut m = Manifest::new("gen-bench", argv);
    m.set_config(&recipe);
    m.finish(outputs, &manifest_path_for(&a.out))
}

fn load_bench(path: &Path, flag: &str, manifest: &mut Manifest) -> CliResult<Benchmark> {
    let bench = read_benchmark(path, flag)?;
    manifest.input(flag, path)?;
    Ok(bench)
}

fn check_device(bench: &Benchmark, device: usize) -> CliResult<()> {
    if device >= bench.devices.len() {
        return Err(CliError::usage(format!("--device: benchmark has {} devices, got {device}", bench.devices.len())));
    }
    Ok(())
}

fn train_predictor(a: TrainPredictorArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut m = Manifest::new("train-predictor", argv);
    let bench = load_bench(&a.bench, "--bench", &mut m)?;
    if a.objective == 0 || a.objective >= bench.objectives() {
        return Err(CliError::usage(format!(
            "--objective: must name a hardware objective in 1..{}, got {}",
            bench.objectives() - 1,
            a.objective
        )));
    }
    let d = PredictorConfig::default();
    let cfg = PredictorConfig {
        epochs: a.epochs.unwrap_or(d.epochs),
        hidden: a.hidden.unwrap_or(d.hidden),
        lr: a.lr.unwrap_or(d.lr),
        batch: a.batch.unwrap_or(d.batch),
        train_fraction: a.train_fraction.unwrap_or(d.train_fraction),
        ..d
    };
    let (net, report) = train_one_predictor(&bench, &cfg, a.objective, a.seed)?;
    outputs.write_json(&a.out, &PredictorCheckpoint::new(&net, &report, &bench))?;
    println!("{}", serde_json::to_string_pretty(&report.per_device).unwrap_or_default());
    #[derive(Serialize)]
    struct Resolved<'a> {
        objective: usize,
        seed: u64,
        predictor: &'a PredictorConfig,
    }
    m.set_config(&Resolved { objective: a.objective, seed: a.seed, predictor: &cfg });
    m.finish(outputs, &manifest_path_for(&a.out))
}

/// Same streams as the in-process pipeline uses for objective `m`.
fn train_one_predictor(bench: &Benchmark, cfg: &PredictorConfig, m: usize, seed: u64) -> CliResult<(MetaPredictor, TrainReport)> {
    let (mut nets, mut reports) = pipeline::train_predictors(bench, cfg, seed)?;
    Ok((nets.swap_remove(m - 1), reports.swap_remove(m - 1)))
}

fn pretrain(a: PretrainArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut m = Manifest::new("pretrain-hypernet", argv);
    let bench = load_bench(&a.bench, "--bench", &mut m)?;
    let mut cfg = PipelineConfig::default();
    cfg.hypernet.bank_size = a.bank_size.unwrap_or(cfg.hypernet.bank_size);
    cfg.hypernet.bins = a.bins.unwrap_or(cfg.hypernet.bins);
    let (net, report) = pipeline::pretrained_hypernet(&bench, &cfg.hypernet, &cfg.pretrain, a.seed)?;
    log::info!("pretraining: {} epochs, held-out max KL {:?}", report.epochs, report.kl_history.last());
    outputs.write_json(&a.out, &HypernetCheckpoint::new(&net, &bench))?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        seed: u64,
        hypernet: &'a hwpareto_core::hypernet::HypernetConfig,
        pretrain: &'a hwpareto_core::hypernet::PretrainConfig,
    }
    m.set_config(&Resolved { seed: a.seed, hypernet: &cfg.hypernet, pretrain: &cfg.pretrain });
    m.finish(outputs, &manifest_path_for(&a.out))
}

/// File config with the shared overrides applied.
fn resolve_common(c: &SearchOverrides) -> CliResult<FileConfig> {
    let mut f = match &c.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(b) = &c.bench {
        f.run.bench = Some(b.clone());
    }
    if let Some(h) = c.hardware {
        f.run.hardware = h;
    }
    let s = &mut f.search;
    s.epochs = c.epochs.unwrap_or(s.epochs);
    s.steps_per_epoch = c.steps_per_epoch.unwrap_or(s.steps_per_epoch);
    s.lr = c.lr.unwrap_or(s.lr);
    s.tau = c.tau.unwrap_or(s.tau);
    s.surrogate = c.surrogate.unwrap_or(s.surrogate);
    s.profile_count = c.profile_count.unwrap_or(s.profile_count);
    Ok(f)
}

fn bench_from_config(f: &FileConfig, m: &mut Manifest) -> CliResult<Benchmark> {
    let path = f.run.bench.clone().ok_or_else(|| CliError::usage("--bench: no benchmark given (flag or [run] bench)"))?;
    load_bench(&path, "--bench", m)
}

fn search_cmd(a: SearchArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut f = resolve_common(&a.common)?;
    if let Some(d) = a.out_dir {
        f.run.out_dir = Some(d);
    }
    if let Some(h) = a.hypernet {
        f.run.hypernet = Some(h);
    }
    if !a.predictor.is_empty() {
        f.run.predictors = a.predictor;
    }
    let s = &mut f.search;
    s.seed = a.seed.unwrap_or(s.seed);
    s.scheme = a.scheme.unwrap_or(s.scheme);
    s.estimator = a.estimator.unwrap_or(s.estimator);
    if let Some(c) = a.constraints {
        s.constraints = c;
    }
    if let Some(d) = a.devices {
        s.devices = d;
    }
    let out_dir = f.run.out_dir.clone().ok_or_else(|| CliError::usage("--out-dir: no output directory given"))?;

    let mut m = Manifest::new("search", argv);
    if let Some(c) = &a.common.config {
        m.input("--config", c)?;
    }
    let bench = bench_from_config(&f, &mut m)?;
    f.search.validate(&bench).map_err(|e| CliError::usage(format!("search config: {e}")))?;
    let cfg = f.pipeline();

    let (predictors, reports) = match (cfg.hardware, f.run.predictors.is_empty()) {
        (HardwareMode::Exact, _) => (Vec::new(), Vec::new()),
        (HardwareMode::Predictor, true) => pipeline::train_predictors(&bench, &cfg.predictor, cfg.search.seed)?,
        (HardwareMode::Predictor, false) => {
            let mut nets = Vec::new();
            let mut reps = Vec::new();
            for p in &f.run.predictors {
                let (n, r) = read_predictor(p, "--predictor", &bench)?;
                m.input("--predictor", p)?;
                nets.push(n);
                reps.push(r);
            }
            nets.sort_by_key(|n| n.objective());
            let objs: Vec<usize> = nets.iter().map(|n| n.objective()).collect();
            if objs != (1..bench.objectives()).collect::<Vec<_>>() {
                return Err(CliError::usage(format!(
                    "--predictor: need exactly one predictor per hardware objective 1..{}, got objectives {objs:?}",
                    bench.objectives() - 1
                )));
            }
            (nets, reps)
        }
    };

    let start = std::time::Instant::now();
    let clock = || start.elapsed().as_secs_f64();
    let clock_ref: Option<&dyn Fn() -> f64> = if a.timing { Some(&clock) } else { None };
    let out = match &f.run.hypernet {
        None => pipeline::run_with_predictors(&bench, &cfg, predictors, reports, clock_ref)?,
        Some(path) => {
            let mut net = read_hypernet(path, "--hypernet", &bench)?;
            m.input("--hypernet", path)?;
            let exact = pipeline::exact_surrogates(&bench)?;
            let hw: Vec<&dyn hwpareto_core::predictor::HardwareSurrogate> = match cfg.hardware {
                HardwareMode::Predictor => predictors.iter().map(|p| p as _).collect(),
                HardwareMode::Exact => exact.iter().map(|p| p as _).collect(),
            };
            let trace = search::search(&mut net, &bench, &hw, &cfg.search, clock_ref)?;
            let pretrain = hwpareto_core::hypernet::PretrainReport { kl_history: Vec::new(), epochs: 0 };
            pipeline::RunOutput { hypernet: net, pretrain, predictors, predictor_reports: reports, trace }
        }
    };

    outputs.write_json(&out_dir.join("hypernet.json"), &HypernetCheckpoint::new(&out.hypernet, &bench))?;
    let mut trace = Vec::new();
    for e in &out.trace.epochs {
        for (d, hv) in &e.hypervolume {
            let losses = e.losses.iter().find(|(t, _)| t == d).map(|(_, l)| l.clone());
            let line = serde_json::json!({
                "epoch": e.epoch,
                "device": d,
                "hypervolume": hv,
                "losses": losses,
                "upper_loss": e.upper_loss,
                "gamma": e.gamma,
                "lower_loss": e.lower_loss,
                "elapsed_secs": e.elapsed_secs,
            });
            trace.extend_from_slice(line.to_string().as_bytes());
            trace.push(b'\n');
        }
    }
    outputs.write(&out_dir.join("trace.jsonl"), &trace)?;

    let results = compare_devices(&out.hypernet, &bench, cfg.search.profile_count, cfg.search.seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &results {
        w.serialize(r).map_err(|e| CliError::usage(e.to_string()))?;
    }
    outputs.write(&out_dir.join("results.csv"), &w.into_inner().map_err(|e| CliError::usage(e.to_string()))?)?;
    for d in 0..bench.devices.len() {
        let p = profile_pareto(&out.hypernet, &bench, d, cfg.search.profile_count)?;
        outputs.write(&out_dir.join(format!("front_device{d}.csv")), &front_csv(&p, &bench.space)?)?;
    }
    for r in &results {
        println!(
            "device {} ({}): HV {:.4}  RS {:.4}  RHPN {:.4}  true {:.4}",
            r.device, r.split, r.hypervolume, r.rs_hypervolume, r.rhpn_hypervolume, r.true_hypervolume
        );
    }
    m.set_config(&f);
    m.finish(outputs, &out_dir.join("manifest.json"))
}

fn profile(a: ProfileArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut m = Manifest::new("profile", argv);
    let bench = load_bench(&a.bench, "--bench", &mut m)?;
    check_device(&bench, a.device)?;
    let net = read_hypernet(&a.ckpt, "--ckpt", &bench)?;
    m.input("--ckpt", &a.ckpt)?;
    if a.count < 2 {
        return Err(CliError::usage("--count: need at least 2 preferences"));
    }
    let p = profile_pareto(&net, &bench, a.device, a.count)?;
    outputs.write(&a.out, &front_csv(&p, &bench.space)?)?;
    if let Some(j) = &a.json {
        outputs.write_json(j, &p)?;
    }
    m.set_config(&serde_json::json!({ "device": a.device, "count": a.count }));
    m.finish(outputs, &manifest_path_for(&a.out))
}

fn evaluate(a: EvaluateArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut m = Manifest::new("evaluate", argv);
    let bench = load_bench(&a.bench, "--bench", &mut m)?;
    check_device(&bench, a.device)?;
    let points = read_front_points(&a.front, "--front")?;
    m.input("--front", &a.front)?;
    let reference = match &a.true_front {
        Some(p) => {
            m.input("--true-front", p)?;
            Some(read_front_points(p, "--true-front")?)
        }
        None => None,
    };
    for (what, pts) in [("--front", Some(&points)), ("--true-front", reference.as_ref())] {
        if let Some(pts) = pts {
            if pts.iter().any(|p| p.len() != bench.objectives()) {
                return Err(CliError::usage(format!("{what}: points must have {} objectives", bench.objectives())));
            }
        }
    }
    let report = metric_report(&bench, a.device, &points, reference.as_deref())?;
    match &a.out {
        Some(out) => {
            outputs.write_json(out, &report)?;
            m.set_config(&serde_json::json!({ "device": a.device }));
            m.finish(outputs, &manifest_path_for(out))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default()),
    }
    Ok(())
}

fn baseline(a: BaselineArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let mut m = Manifest::new("baseline", argv);
    let bench = load_bench(&a.bench, "--bench", &mut m)?;
    check_device(&bench, a.device)?;
    if a.count == 0 {
        return Err(CliError::usage("--count: must be positive"));
    }
    let p = run_baseline(a.kind, &bench, a.device, a.count, a.seed, &Default::default())?;
    outputs.write(&a.out, &front_csv(&p, &bench.space)?)?;
    m.set_config(&serde_json::json!({ "kind": a.kind.name(), "device": a.device, "count": a.count, "seed": a.seed }));
    m.finish(outputs, &manifest_path_for(&a.out))
}

fn ablate_cmd(a: AblateArgs, argv: Vec<String>, outputs: &mut OutputSet) -> CliResult<()> {
    let f = resolve_common(&a.common)?;
    let mut m = Manifest::new("ablate", argv);
    if let Some(c) = &a.common.config {
        m.input("--config", c)?;
    }
    let bench = bench_from_config(&f, &mut m)?;
    f.search.validate(&bench).map_err(|e| CliError::usage(format!("search config: {e}")))?;
    let variants: Vec<Variant> = if let Some(s) = &a.schemes {
        s.iter().map(|&x| Variant::Scheme(x)).collect()
    } else if let Some(e) = &a.estimators {
        e.iter().map(|&x| Variant::Estimator(x)).collect()
    } else {
        let c = a.constraints.clone().unwrap_or_default();
        if let Some(bad) = c.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CliError::usage(format!("--constraints: {bad} is outside [0, 1]")));
        }
        c.into_iter().map(Variant::Constraint).collect()
    };
    if variants.is_empty() || a.seeds == 0 {
        return Err(CliError::usage("ablate: need at least one arm and one seed"));
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let rows = ablate(&bench, &f.pipeline(), &variants, &seeds, |v, s| log::info!("finished {v}, seed {s}"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::usage(e.to_string()))?;
    }
    outputs.write(&a.out, &w.into_inner().map_err(|e| CliError::usage(e.to_string()))?)?;
    for v in &variants {
        println!("{:>12}: mean train HV {:.4}", v.label(), mean_train_hypervolume(&rows, &v.label()));
    }
    #[derive(Serialize)]
    struct Resolved<'a> {
        arms: Vec<String>,
        seeds: &'a [u64],
        base: &'a FileConfig,
    }
    m.set_config(&Resolved { arms: variants.iter().map(Variant::label).collect(), seeds: &seeds, base: &f });
    m.finish(outputs, &manifest_path_for(&a.out))
}

/// Enumerated true front of a device as a front CSV (used by tests and docs).
pub fn true_front_csv(bench: &Benchmark, device: usize) -> CliResult<Vec<u8>> {
    let tf = enumerate_true_front(bench, device, &bench.all_objectives())?;
    let p = search::evaluate_configs(bench, device, &tf.configs)?;
    front_csv(&p, &bench.space)
}
