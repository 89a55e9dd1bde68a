//! On-disk formats: benchmark, checkpoints, fronts, metrics, traces.
//!
//! JSON documents carry a `format` tag and a `version`; readers reject
//! anything else before touching the payload. Floats are written with
//! round-trip precision, so checkpoints reload bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hwpareto_core::archspace::{ArchSpace, Benchmark};
use hwpareto_core::hypernet::{HypernetConfig, MetaHypernet};
use hwpareto_core::numerics::ParamStore;
use hwpareto_core::predictor::{MetaPredictor, PredictorState, TrainReport};
use hwpareto_core::search::Profile;

use crate::error::{CliError, CliResult};

pub const BENCHMARK_FORMAT: &str = "hwpareto-benchmark";
pub const HYPERNET_FORMAT: &str = "hwpareto-hypernet";
pub const PREDICTOR_FORMAT: &str = "hwpareto-predictor";
pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads an input named by a command-line flag. A missing file is a usage
/// error naming the flag; anything else is a data error.
pub fn read_input(path: &Path, flag: &str) -> CliResult<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::usage(format!("{flag}: no such file {}", path.display())));
    }
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Files written by one command. Each file goes through a temporary sibling
/// and a rename; [`OutputSet::discard`] removes everything written so far.
#[derive(Debug, Default)]
pub struct OutputSet {
    written: Vec<PathBuf>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        if let Err(e) = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)) {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::io(path, e));
        }
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::data(path, e))?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn discard(&mut self) {
        for p in self.written.drain(..) {
            if let Err(e) = fs::remove_file(&p) {
                log::warn!("could not remove partial output {}: {e}", p.display());
            }
        }
    }
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Parses a versioned JSON document after checking its header.
fn parse_versioned<T: DeserializeOwned>(path: &Path, bytes: &[u8], format: &str) -> CliResult<T> {
    let header: Header = serde_json::from_slice(bytes).map_err(|e| CliError::data(path, format!("not a {format} file: {e}")))?;
    if header.format != format {
        return Err(CliError::data(path, format!("expected format `{format}`, found `{}`", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(CliError::data(
            path,
            format!("unsupported {format} version {} (this build reads version {FORMAT_VERSION})", header.version),
        ));
    }
    serde_json::from_slice(bytes).map_err(|e| CliError::data(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFile {
    pub format: String,
    pub version: u32,
    pub benchmark: Benchmark,
}

/// Content hash of a benchmark, independent of how the file was formatted.
pub fn benchmark_hash(bench: &Benchmark) -> String {
    sha256_hex(&serde_json::to_vec(bench).expect("benchmark serializes"))
}

pub fn space_hash(space: &ArchSpace) -> String {
    format!("{:016x}", space.descriptor_hash())
}

pub fn benchmark_bytes(bench: &Benchmark) -> CliResult<Vec<u8>> {
    let doc = BenchmarkFile { format: BENCHMARK_FORMAT.into(), version: FORMAT_VERSION, benchmark: bench.clone() };
    let mut bytes = serde_json::to_vec(&doc).map_err(|e| CliError::usage(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_benchmark(path: &Path, flag: &str) -> CliResult<Benchmark> {
    let bytes = read_input(path, flag)?;
    let doc: BenchmarkFile = parse_versioned(path, &bytes, BENCHMARK_FORMAT)?;
    doc.benchmark.validate().map_err(|e| CliError::data(path, e))?;
    Ok(doc.benchmark)
}

/// Objective id shared by checkpoints: `error`, `hw1`, `hw2`, joined by `+`.
pub fn objective_id(objectives: &[usize]) -> String {
    objectives.iter().map(|&m| if m == 0 { "error".to_string() } else { format!("hw{m}") }).collect::<Vec<_>>().join("+")
}

/// Parameter store as layout plus flat values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreDoc {
    pub layout: Vec<(String, Vec<usize>)>,
    pub values: Vec<f64>,
}

impl StoreDoc {
    pub fn from_store(store: &ParamStore) -> Self {
        Self {
            layout: store.blocks().iter().map(|b| (b.name.clone(), b.shape.clone())).collect(),
            values: store.values().to_vec(),
        }
    }

    pub fn into_store(self) -> hwpareto_core::Result<ParamStore> {
        ParamStore::from_parts(self.layout, self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypernetCheckpoint {
    pub format: String,
    pub version: u32,
    pub space_hash: String,
    pub benchmark_hash: String,
    pub objective_id: String,
    pub choices: Vec<usize>,
    pub objectives: usize,
    pub feature_len: usize,
    pub config: HypernetConfig,
    pub params: StoreDoc,
}

impl HypernetCheckpoint {
    pub fn new(net: &MetaHypernet, bench: &Benchmark) -> Self {
        Self {
            format: HYPERNET_FORMAT.into(),
            version: FORMAT_VERSION,
            space_hash: space_hash(net.space()),
            benchmark_hash: benchmark_hash(bench),
            objective_id: objective_id(&(0..net.objectives()).collect::<Vec<_>>()),
            choices: net.space().choices().to_vec(),
            objectives: net.objectives(),
            feature_len: net.feature_len(),
            config: net.config().clone(),
            params: StoreDoc::from_store(net.params()),
        }
    }

    pub fn into_hypernet(self) -> hwpareto_core::Result<MetaHypernet> {
        let space = ArchSpace::new(self.choices)?;
        MetaHypernet::from_store(space, self.objectives, self.feature_len, self.config, self.params.into_store()?)
    }
}

/// Reads a hypernetwork checkpoint and checks it belongs to `bench`.
pub fn read_hypernet(path: &Path, flag: &str, bench: &Benchmark) -> CliResult<MetaHypernet> {
    let bytes = read_input(path, flag)?;
    let ck: HypernetCheckpoint = parse_versioned(path, &bytes, HYPERNET_FORMAT)?;
    check_provenance(flag, &ck.space_hash, &ck.benchmark_hash, bench)?;
    let want = objective_id(&bench.all_objectives());
    if ck.objective_id != want {
        return Err(CliError::usage(format!("{flag}: checkpoint is for objectives {}, benchmark has {want}", ck.objective_id)));
    }
    ck.into_hypernet().map_err(|e| CliError::data(path, e))
}

fn check_provenance(flag: &str, space: &str, bench_hash: &str, bench: &Benchmark) -> CliResult<()> {
    if space != space_hash(&bench.space) {
        return Err(CliError::usage(format!("{flag}: checkpoint was built for a different architecture space")));
    }
    if bench_hash != benchmark_hash(bench) {
        return Err(CliError::usage(format!("{flag}: checkpoint was built from a different benchmark")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorCheckpoint {
    pub format: String,
    pub version: u32,
    pub space_hash: String,
    pub benchmark_hash: String,
    pub objective_id: String,
    pub report: TrainReport,
    pub state: PredictorState,
}

impl PredictorCheckpoint {
    pub fn new(net: &MetaPredictor, report: &TrainReport, bench: &Benchmark) -> Self {
        let state = net.state();
        Self {
            format: PREDICTOR_FORMAT.into(),
            version: FORMAT_VERSION,
            space_hash: space_hash(&bench.space),
            benchmark_hash: benchmark_hash(bench),
            objective_id: objective_id(&[state.objective]),
            report: report.clone(),
            state,
        }
    }
}

pub fn read_predictor(path: &Path, flag: &str, bench: &Benchmark) -> CliResult<(MetaPredictor, TrainReport)> {
    let bytes = read_input(path, flag)?;
    let ck: PredictorCheckpoint = parse_versioned(path, &bytes, PREDICTOR_FORMAT)?;
    check_provenance(flag, &ck.space_hash, &ck.benchmark_hash, bench)?;
    if ck.objective_id != objective_id(&[ck.state.objective]) {
        return Err(CliError::data(path, "objective id does not match the stored predictor"));
    }
    let net = MetaPredictor::from_state(ck.state).map_err(|e| CliError::data(path, e))?;
    Ok((net, ck.report))
}

/// CSV of a profile: one row per distinct config.
pub fn front_csv(profile: &Profile, space: &ArchSpace) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let m = profile.objectives.len();
    let mut header = vec!["config".to_string(), "choices".to_string()];
    header.extend((0..m).map(|k| format!("obj{k}")));
    header.push("on_front".into());
    w.write_record(&header).map_err(csv_err)?;
    for (c, p) in profile.configs.iter().zip(&profile.points) {
        let choices = space.config_at(*c)?.0.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-");
        let mut row = vec![c.to_string(), choices];
        row.extend(p.iter().map(|v| format!("{v:?}")));
        row.push(profile.front.contains(p).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::usage(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::usage(format!("csv: {e}"))
}

/// Objective vectors from a front file: a profile JSON, or a CSV whose
/// `obj*` columns hold the coordinates.
pub fn read_front_points(path: &Path, flag: &str) -> CliResult<Vec<Vec<f64>>> {
    let bytes = read_input(path, flag)?;
    if path.extension().is_some_and(|e| e == "json") {
        let p: Profile = serde_json::from_slice(&bytes).map_err(|e| CliError::data(path, e))?;
        return Ok(p.points);
    }
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| CliError::data(path, e))?.clone();
    let cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("obj")).map(|(i, _)| i).collect();
    if cols.is_empty() {
        return Err(CliError::data(path, "no obj* columns"));
    }
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(path, e))?;
        let p = cols
            .iter()
            .map(|&i| {
                let s = rec.get(i).unwrap_or("");
                s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
            })
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::data(path, format!("row {}: objective values must be finite numbers", line + 2)))?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::data(path, "front is empty"));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub device: usize,
    pub reference: Vec<f64>,
    pub points: usize,
    pub front_size: usize,
    pub hypervolume: f64,
    pub true_hypervolume: f64,
    pub gd: f64,
    pub igd: f64,
    pub gd_plus: f64,
    pub igd_plus: f64,
}
