//! End-to-end CLI tests: subcommand wiring, exit codes, artifact formats, and
//! manifest-driven reproduction.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coupled-am"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tmpdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("coupled-am-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn thresholds_default_dist() {
    let o = run(&["thresholds", "--e", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(
        s.contains("p_dagger=0.115432") && s.contains("p_star=0.400842"),
        "unexpected output: {s}"
    );
}

#[test]
fn thresholds_rejects_zero_e() {
    let o = run(&["thresholds", "--e", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("e >= 1"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_exit_2() {
    let o = run(&["thresholds", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_file_names_field() {
    let o = run(&["mc", "run", "--plan", "/nonexistent/plan.json", "--out", "/tmp/x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plan"), "{}", stderr(&o));
}

#[test]
fn malformed_json_is_exit_2() {
    let dir = tmpdir("badjson");
    let plan = dir.join("plan.json");
    write(&plan, "{ not json");
    let o = run(&[
        "mc",
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        dir.join("out.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mc_run_bundled_plan_and_repro() {
    let dir = tmpdir("mc");
    let plan_src = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ci_plan.json");
    let plan = dir.join("ci_plan.json");
    fs::copy(&plan_src, &plan).unwrap();
    let out = dir.join("per.csv");
    let o = run(&[
        "mc",
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "pe,trials,failures,per,wilson_lo,wilson_hi"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,20,0,0.000000"), "pe=0 row: {first}");

    // identical rerun produces identical bytes
    let out2 = dir.join("per2.csv");
    let o2 = run(&[
        "mc",
        "run",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(o2.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());

    // manifest replay verifies byte-identical outputs
    let manifest = dir.join("per.csv.manifest.json");
    assert!(manifest.exists());
    let o3 = run(&["repro", "--manifest", manifest.to_str().unwrap()]);
    assert!(o3.status.success(), "{} {}", stdout(&o3), stderr(&o3));
    assert!(stdout(&o3).contains("byte-identical"));
}

#[test]
fn topology_dump_schema() {
    let dir = tmpdir("topo");
    let spec = dir.join("grid.json");
    write(
        &spec,
        r#"{"height": 16, "width": 16, "window": 8, "stride": 4}"#,
    );
    let out = dir.join("topo.json");
    let o = run(&[
        "topology",
        "dump",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["planes"], 3);
    assert_eq!(v["clusters_per_plane"], 3);
    assert_eq!(v["indexing"], "row-major");
    assert_eq!(v["clusters"].as_array().unwrap().len(), 9);
    assert_eq!(v["clusters"][0]["members"].as_array().unwrap().len(), 64);
    let lambda: Vec<f64> = serde_json::from_value(v["lambda"].clone()).unwrap();
    assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn memory_gen_random_and_recall() {
    let dir = tmpdir("memrand");
    let spec = dir.join("memory.json");
    write(
        &spec,
        r#"{
  "mode": "random",
  "grid": {"height": 16, "width": 16, "window": 8, "stride": 4},
  "generator": null,
  "m_per_cluster": 48,
  "mean_row_degree": 8.0
}"#,
    );
    let out_dir = dir.join("net");
    let o = run(&[
        "memory",
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["weights.json", "patterns.bin", "patterns.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    // all-zero stored pattern: 256 neurons * 4 bytes
    assert_eq!(fs::metadata(out_dir.join("patterns.bin")).unwrap().len(), 1024);

    let trace = dir.join("trace.csv");
    let o = run(&[
        "recall",
        "run",
        "--weights",
        out_dir.to_str().unwrap(),
        "--noise-pe",
        "0.05",
        "--mode",
        "unconstrained",
        "--phi",
        "0.999",
        "--tmax",
        "10",
        "--seed",
        "33",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("sweep,plane,cluster,committed,residual_errors\n"));
    assert!(csv.lines().count() > 9, "one row per cluster visit");

    // determinism: identical invocation, identical trace bytes
    let trace2 = dir.join("trace2.csv");
    let o = run(&[
        "recall",
        "run",
        "--weights",
        out_dir.to_str().unwrap(),
        "--noise-pe",
        "0.05",
        "--mode",
        "unconstrained",
        "--phi",
        "0.999",
        "--tmax",
        "10",
        "--seed",
        "33",
        "--trace",
        trace2.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(&trace).unwrap(), fs::read(&trace2).unwrap());
}

#[test]
fn memory_gen_nullspace_outputs() {
    let dir = tmpdir("memnull");
    let spec = dir.join("memory.json");
    write(
        &spec,
        r#"{
  "mode": "nullspace",
  "grid": {"height": 4, "width": 8, "window": 4, "stride": 4},
  "generator": {"k": 8, "n": 32, "gamma": 2, "upsilon": 2, "alphabet": 11,
                "d_star": 10, "planes": 1, "clusters": 2},
  "m_per_cluster": 12,
  "pattern_limit": 65536
}"#,
    );
    let out_dir = dir.join("net");
    let o = run(&[
        "memory",
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("patterns.json")).unwrap()).unwrap();
    assert_eq!(meta["count"], 256);
    assert_eq!(meta["alphabet"], 11);
    let gen: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("generator.json")).unwrap())
            .unwrap();
    assert_eq!(gen["rank"], 8);
    assert_eq!(gen["rows"].as_array().unwrap().len(), 8);

    // noise-free recall of pattern 3 succeeds trivially; the emitted pattern
    // equals the stored one
    let trace = dir.join("trace.csv");
    let recalled = dir.join("recalled.bin");
    let o = run(&[
        "recall",
        "run",
        "--weights",
        out_dir.to_str().unwrap(),
        "--noise-pe",
        "0",
        "--mode",
        "unconstrained",
        "--seed",
        "1",
        "--pattern-index",
        "3",
        "--trace",
        trace.to_str().unwrap(),
        "--out-pattern",
        recalled.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("succeeded"), "{}", stdout(&o));
    let stored = fs::read(out_dir.join("patterns.bin")).unwrap();
    let got = fs::read(&recalled).unwrap();
    assert_eq!(got.len(), 128, "32 neurons x 4 bytes");
    assert_eq!(&got[..], &stored[3 * 128..4 * 128], "pattern 3 recovered");

    // the replayed manifest covers both outputs
    let o = run(&[
        "repro",
        "--manifest",
        dir.join("trace.csv.manifest.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{} {}", stdout(&o), stderr(&o));
}

#[test]
fn de_trace_and_potential_curve() {
    let dir = tmpdir("detrace");
    let out = dir.join("trace.csv");
    let o = run(&[
        "de-trace",
        "--omega",
        "2",
        "--L",
        "29",
        "--pe",
        "0.3",
        "--tmax",
        "200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("iter,z1,") && header.ends_with(",z29"));
    // 0.3 is below the finite-window propagation threshold: converges
    let last = csv.lines().last().unwrap();
    let max: f64 = last
        .split(',')
        .skip(1)
        .map(|v| v.parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max < 1e-8, "final profile should be near zero, max {max}");

    let curve = dir.join("curve.csv");
    let o = run(&[
        "potential-curve",
        "--pe",
        "0.35,0.45",
        "--samples",
        "100",
        "--out",
        curve.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&curve).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "z,0.35,0.45");
    assert_eq!(csv.lines().count(), 102);

    // repro of the curve manifest
    let o = run(&[
        "repro",
        "--manifest",
        dir.join("curve.csv.manifest.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{} {}", stdout(&o), stderr(&o));
}

#[test]
fn repro_detects_tampered_outputs_and_inputs() {
    let dir = tmpdir("repro-tamper");
    let out = dir.join("curve.csv");
    let o = run(&[
        "potential-curve",
        "--pe",
        "0.4",
        "--samples",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = dir.join("curve.csv.manifest.json");

    // Corrupt the recorded output hash: replay must report a mismatch.
    let text = fs::read_to_string(&manifest).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    fs::write(&manifest, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let o = run(&["repro", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("MISMATCH"), "{}", stdout(&o));
}

#[test]
fn repro_replays_memory_gen() {
    let dir = tmpdir("repro-mem");
    let spec = dir.join("memory.json");
    write(
        &spec,
        r#"{
  "mode": "random",
  "grid": {"height": 16, "width": 16, "window": 8, "stride": 4},
  "generator": null
}"#,
    );
    let out_dir = dir.join("net");
    let o = run(&[
        "memory",
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "77",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = out_dir.join("memory.manifest.json");
    let o = run(&["repro", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{} {}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("byte-identical"));
}

#[test]
fn mc_compare_joins_architectures() {
    let dir = tmpdir("compare");
    let mk_plan = |arch: &str, mode: &str| {
        format!(
            r#"{{
  "pe_grid": [0.0, 0.1],
  "trials": 10,
  "arch": "{arch}",
  "mode": "{mode}",
  "base_seed": 21,
  "grid": {{"height": 16, "width": 16, "window": 8, "stride": 4}},
  "recall": {{"phi": 0.999, "t_max_inner": 10, "t_max_outer": 10}},
  "weights": {{"m_ratio": 0.75, "mean_row_degree": 8.0}},
  "frozen_patch": 3
}}"#
        )
    };
    let p1 = dir.join("coupled.json");
    let p2 = dir.join("unclustered.json");
    write(&p1, &mk_plan("coupled", "Unconstrained"));
    write(&p2, &mk_plan("unclustered", "Unconstrained"));
    let out = dir.join("joined.csv");
    let o = run(&[
        "mc",
        "compare",
        "--plans",
        p1.to_str().unwrap(),
        p2.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("pe,coupled_unconstrained_per"));
    assert!(header.contains("unclustered_unconstrained_per"));
    assert_eq!(csv.lines().count(), 3, "header + two grid points");
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0.000000"));
}

#[test]
fn infeasible_spec_is_exit_3() {
    let dir = tmpdir("infeasible");
    let spec = dir.join("memory.json");
    // alphabet too small for the capacity inequality
    write(
        &spec,
        r#"{
  "mode": "nullspace",
  "grid": {"height": 4, "width": 8, "window": 4, "stride": 4},
  "generator": {"k": 8, "n": 32, "gamma": 2, "upsilon": 2, "alphabet": 5,
                "d_star": 10, "planes": 1, "clusters": 2}
}"#,
    );
    let o = run(&[
        "memory",
        "gen",
        "--spec",
        spec.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        dir.join("net").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("d_star"), "{}", stderr(&o));
}
