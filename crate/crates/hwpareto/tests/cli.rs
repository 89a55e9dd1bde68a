use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hwpareto::io::{sha256_hex, HypernetCheckpoint};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hwpareto"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn hwpareto")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small benchmark so command tests stay fast.
fn small_bench(dir: &Path) -> PathBuf {
    ok(dir, &["gen-bench", "--out", "bench.json", "--choices", "3,3,3", "--devices", "3", "--test-devices", "1"]);
    dir.join("bench.json")
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn gen_bench_is_byte_identical_across_runs() {
    let t = TempDir::new().unwrap();
    ok(t.path(), &["gen-bench", "--out", "a.json"]);
    ok(t.path(), &["gen-bench", "--out", "b.json"]);
    assert_eq!(sha256_hex(&read(t.path().join("a.json"))), sha256_hex(&read(t.path().join("b.json"))));
    ok(t.path(), &["gen-bench", "--out", "c.json", "--seed", "8"]);
    assert_ne!(read(t.path().join("a.json")), read(t.path().join("c.json")));
    let manifest: serde_json::Value = serde_json::from_slice(&read(t.path().join("a.json.manifest.json"))).unwrap();
    assert_eq!(manifest["outputs"][0]["sha256"], sha256_hex(&read(t.path().join("a.json"))));
    assert_eq!(manifest["config"]["choices"], serde_json::json!([4, 4, 4, 4]));
}

#[test]
fn evaluating_the_true_front_against_itself() {
    let t = TempDir::new().unwrap();
    let bench_path = small_bench(t.path());
    let bench = hwpareto::io::read_benchmark(&bench_path, "--bench").unwrap();
    std::fs::write(t.path().join("true.csv"), hwpareto::cli::true_front_csv(&bench, 1).unwrap()).unwrap();
    ok(t.path(), &["evaluate", "--front", "true.csv", "--bench", "bench.json", "--device", "1", "--out", "m.json"]);
    let m: serde_json::Value = serde_json::from_slice(&read(t.path().join("m.json"))).unwrap();
    for k in ["gd", "igd", "gd_plus", "igd_plus"] {
        assert_eq!(m[k].as_f64().unwrap(), 0.0, "{k}");
    }
    assert_eq!(m["hypervolume"], m["true_hypervolume"]);
    // an explicit reference front gives the same answer
    let out = ok(t.path(), &["evaluate", "--front", "true.csv", "--bench", "bench.json", "--device", "1", "--true-front", "true.csv"]);
    let m2: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["hypervolume"], m2["hypervolume"]);
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let t = TempDir::new().unwrap();
    let out = run(t.path(), &["profile", "--ckpt", "nope.json", "--bench", "missing.json", "--device", "0", "--out", "f.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--bench"), "{}", stderr(&out));
    assert_eq!(code(&run(t.path(), &["search", "--frobnicate"])), 2);
    assert_eq!(code(&run(t.path(), &["baseline", "--kind", "nsga", "--bench", "b.json", "--device", "0", "--out", "x"])), 2);
    assert_eq!(code(&run(t.path(), &["gen-bench", "--out", "x.json", "--conflict", "3"])), 2);
    assert_eq!(code(&run(t.path(), &[])), 2);
    small_bench(t.path());
    let out = run(t.path(), &["baseline", "--kind", "rs", "--bench", "bench.json", "--device", "9", "--out", "x.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--device"));
    assert!(!t.path().join("x.csv").exists());
}

#[test]
fn unknown_benchmark_versions_are_data_errors() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    let mut doc: serde_json::Value = serde_json::from_slice(&read(t.path().join("bench.json"))).unwrap();
    doc["version"] = serde_json::json!(2);
    std::fs::write(t.path().join("v2.json"), serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = run(t.path(), &["baseline", "--kind", "rs", "--bench", "v2.json", "--device", "0", "--out", "x.csv"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("version 2"), "{}", stderr(&out));
    std::fs::write(t.path().join("junk.json"), b"{\"format\": 1").unwrap();
    assert_eq!(code(&run(t.path(), &["baseline", "--kind", "rs", "--bench", "junk.json", "--device", "0", "--out", "x.csv"])), 3);
}

#[test]
fn checkpoints_reject_other_benchmarks_and_round_trip_exactly() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    ok(t.path(), &["pretrain-hypernet", "--bench", "bench.json", "--out", "h.json", "--bank-size", "4", "--bins", "10"]);
    ok(t.path(), &["gen-bench", "--out", "other.json", "--choices", "3,3,3", "--devices", "3", "--test-devices", "1", "--seed", "99"]);
    let out = run(t.path(), &["profile", "--ckpt", "h.json", "--bench", "other.json", "--device", "0", "--out", "f.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--ckpt") && stderr(&out).contains("different benchmark"), "{}", stderr(&out));

    let bytes = read(t.path().join("h.json"));
    let ck: HypernetCheckpoint = serde_json::from_slice(&bytes).unwrap();
    let net = ck.clone().into_hypernet().unwrap();
    let bench = hwpareto::io::read_benchmark(&t.path().join("bench.json"), "--bench").unwrap();
    let again = HypernetCheckpoint::new(&net, &bench);
    assert_eq!(again, ck);
    let a: Vec<u64> = ck.params.values.iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = net.params().values().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_vec_pretty(&again).unwrap().len() + 1, bytes.len());
}

#[test]
fn predictor_checkpoint_round_trips_and_is_usable() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    let out = ok(t.path(), &["train-predictor", "--bench", "bench.json", "--out", "p.json", "--epochs", "30"]);
    let ranks: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ranks.as_array().unwrap().len(), 2);
    let bench = hwpareto::io::read_benchmark(&t.path().join("bench.json"), "--bench").unwrap();
    let (p, _) = hwpareto::io::read_predictor(&t.path().join("p.json"), "--predictor", &bench).unwrap();
    assert!(p.is_frozen());
    let ck: hwpareto::io::PredictorCheckpoint = serde_json::from_slice(&read(t.path().join("p.json"))).unwrap();
    assert_eq!(p.state(), ck.state);
    assert_eq!(ck.objective_id, "hw1");
    assert_eq!(code(&run(t.path(), &["train-predictor", "--bench", "bench.json", "--out", "q.json", "--objective", "0"])), 2);
}

#[test]
fn config_file_with_flag_overrides() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    std::fs::write(
        t.path().join("run.toml"),
        "[run]\nbench = \"bench.json\"\nout_dir = \"out\"\nhardware = \"exact\"\n\n[search]\nepochs = 1\nsteps_per_epoch = 5\nscheme = \"mean\"\n\n[hypernet]\nbank_size = 4\nbins = 10\n",
    )
    .unwrap();
    ok(t.path(), &["search", "--config", "run.toml", "--epochs", "2", "--seed", "3"]);
    let trace = String::from_utf8(read(t.path().join("out/trace.jsonl"))).unwrap();
    let lines: Vec<serde_json::Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2 * 3);
    assert_eq!(lines.last().unwrap()["epoch"], 1);
    assert!(lines[0]["gamma"].as_array().unwrap().is_empty());
    let m: serde_json::Value = serde_json::from_slice(&read(t.path().join("out/manifest.json"))).unwrap();
    assert_eq!(m["config"]["search"]["epochs"], 2);
    assert_eq!(m["config"]["search"]["seed"], 3);
    assert_eq!(m["config"]["search"]["scheme"], "mean");
    assert_eq!(m["config"]["hypernet"]["bins"], 10);
    let inputs: Vec<&str> = m["inputs"].as_array().unwrap().iter().map(|i| i[0].as_str().unwrap()).collect();
    assert_eq!(inputs, ["--config", "--bench"]);
    let results = String::from_utf8(read(t.path().join("out/results.csv"))).unwrap();
    assert_eq!(results.lines().count(), 4);
    assert!(t.path().join("out/front_device2.csv").exists());

    // same command twice → same checkpoint
    let first = read(t.path().join("out/hypernet.json"));
    ok(t.path(), &["search", "--config", "run.toml", "--epochs", "2", "--seed", "3"]);
    assert_eq!(first, read(t.path().join("out/hypernet.json")));

    std::fs::write(t.path().join("bad.toml"), "[search]\nepochz = 1\n").unwrap();
    let out = run(t.path(), &["search", "--config", "bad.toml", "--out-dir", "o"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("epochz"));
}

#[test]
fn partial_outputs_are_removed_on_failure() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    ok(t.path(), &["pretrain-hypernet", "--bench", "bench.json", "--out", "h.json", "--bank-size", "4", "--bins", "10"]);
    std::fs::create_dir(t.path().join("taken")).unwrap();
    // the CSV is written first, then the JSON write fails on a directory
    let out = run(t.path(), &["profile", "--ckpt", "h.json", "--bench", "bench.json", "--device", "0", "--out", "f.csv", "--json", "taken"]);
    assert_eq!(code(&out), 3);
    assert!(!t.path().join("f.csv").exists());
    assert!(!t.path().join("f.csv.manifest.json").exists());
    ok(t.path(), &["profile", "--ckpt", "h.json", "--bench", "bench.json", "--device", "0", "--out", "f.csv", "--json", "f.json"]);
    assert!(t.path().join("f.csv").exists() && t.path().join("f.json").exists());
}

#[test]
fn numeric_blowup_exits_4() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    let out = run(
        t.path(),
        &["search", "--bench", "bench.json", "--out-dir", "o", "--hardware", "exact", "--lr", "1e307", "--epochs", "1", "--steps-per-epoch", "20"],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(!t.path().join("o/hypernet.json").exists());
}

#[test]
fn baseline_and_ablate_tables() {
    let t = TempDir::new().unwrap();
    small_bench(t.path());
    ok(t.path(), &["baseline", "--kind", "rhpn", "--bench", "bench.json", "--device", "2", "--out", "r.csv"]);
    let csv = String::from_utf8(read(t.path().join("r.csv"))).unwrap();
    assert!(csv.starts_with("config,choices,obj0,obj1,on_front"));
    ok(
        t.path(),
        &[
            "ablate", "--bench", "bench.json", "--hardware", "exact", "--epochs", "1", "--steps-per-epoch", "5", "--schemes",
            "mgd,mc", "--seeds", "2", "--out", "a.csv",
        ],
    );
    let table = String::from_utf8(read(t.path().join("a.csv"))).unwrap();
    // header + 2 seeds × 2 arms × 3 devices
    assert_eq!(table.lines().count(), 1 + 12);
    assert!(table.lines().nth(1).unwrap().starts_with("mgd,0,0,train,"));
    let out = run(t.path(), &["ablate", "--bench", "bench.json", "--schemes", "mgd", "--constraints", "0.5", "--out", "b.csv"]);
    assert_eq!(code(&out), 2);
    let out = run(t.path(), &["ablate", "--bench", "bench.json", "--constraints", "1.5", "--out", "b.csv"]);
    assert_eq!(code(&out), 2);
}
