use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn esdscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esdscope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec!["synth", "--out", path(&out)];
    args.extend_from_slice(extra);
    let o = esdscope(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn write_manifest(dir: &Path, layers: &[(&str, &str, [usize; 2])]) -> std::path::PathBuf {
    let entries: Vec<serde_json::Value> = layers
        .iter()
        .map(|(name, file, shape)| {
            serde_json::json!({"name": name, "file": file, "shape": shape, "layer_kind": "dense"})
        })
        .collect();
    let manifest = dir.join("manifest.json");
    fs::write(
        &manifest,
        serde_json::json!({"version": "1", "layers": entries}).to_string(),
    )
    .unwrap();
    manifest
}

#[test]
fn synth_writes_array_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(
        dir.path(),
        "s.npy",
        &[
            "--kind", "spiked", "--rows", "300", "--cols", "100", "--spikes", "12,20", "--seed",
            "4",
        ],
    );
    let spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s.npy.json")).unwrap()).unwrap();
    assert_eq!(spec["kind"], "spiked");
    assert_eq!(spec["seed"], 4);
    assert_eq!(spec["spikes"].as_array().unwrap().len(), 2);
    let w = esdscope::load_array(&out).unwrap();
    assert_eq!((w.rows(), w.cols()), (300, 100));
}

#[test]
fn synth_rejects_inconsistent_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.npy");
    let o = esdscope(&[
        "synth",
        "--kind",
        "gaussian",
        "--rows",
        "50",
        "--cols",
        "20",
        "--mu",
        "2",
        "--out",
        path(&out),
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn analyze_manifest_with_a_corrupt_layer() {
    let dir = tempfile::tempdir().unwrap();
    synth(
        dir.path(),
        "a.npy",
        &[
            "--kind", "gaussian", "--rows", "400", "--cols", "100", "--seed", "1",
        ],
    );
    synth(
        dir.path(),
        "c.npy",
        &[
            "--kind", "pareto", "--rows", "400", "--cols", "100", "--seed", "2",
        ],
    );
    fs::write(dir.path().join("b.npy"), b"\x93NUMPY garbage").unwrap();
    let manifest = write_manifest(
        dir.path(),
        &[
            ("a", "a.npy", [400, 100]),
            ("b", "b.npy", [400, 100]),
            ("c", "c.npy", [400, 100]),
        ],
    );
    let report = dir.path().join("report.json");
    let plots = dir.path().join("plots");
    let o = esdscope(&[
        "analyze",
        "--input",
        path(&manifest),
        "--out",
        path(&report),
        "--plots",
        path(&plots),
        "--svg",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let layers = v["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 2);
    assert_eq!(layers[0]["layer_name"], "a");
    assert_eq!(layers[1]["layer_name"], "c");
    assert_eq!(layers[0]["seed"], 1);
    assert_eq!(v["errors"][0]["layer_name"], "b");
    assert!(v.get("generated_at").is_some());

    let csv = fs::read_to_string(plots.join("a.csv")).unwrap();
    assert!(csv.starts_with("bin_lo,bin_hi,density,mp_x,mp_density,pl_x,pl_density\n"));
    assert!(plots.join("c.svg").exists());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("a\trandom_like\t")));
}

#[test]
fn analyze_fails_when_nothing_loads() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.npy");
    fs::write(&bad, b"nope").unwrap();
    let report = dir.path().join("r.json");
    let o = esdscope(&["analyze", "--input", path(&bad), "--out", path(&report)]);
    assert!(!o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["layers"].as_array().unwrap().len(), 0);
    assert_eq!(v["errors"].as_array().unwrap().len(), 1);
}

#[test]
fn deterministic_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(
        dir.path(),
        "m.npy",
        &[
            "--kind",
            "bulk_decay_mix",
            "--rows",
            "500",
            "--cols",
            "125",
            "--seed",
            "8",
        ],
    );
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = esdscope(&[
            "analyze",
            "--input",
            path(&input),
            "--out",
            path(&out),
            "--deterministic",
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success());
        fs::read(out).unwrap()
    };
    let first = run("r1.json", "1");
    assert_eq!(first, run("r2.json", "4"));
    assert!(!String::from_utf8_lossy(&first).contains("generated_at"));
}

#[test]
fn threshold_flags_change_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(
        dir.path(),
        "p.npy",
        &[
            "--kind", "pareto", "--rows", "400", "--cols", "100", "--seed", "3",
        ],
    );
    let out = dir.path().join("r.json");
    let o = esdscope(&[
        "analyze",
        "--input",
        path(&input),
        "--out",
        path(&out),
        "--alpha-ht",
        "1.01",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_ne!(v["layers"][0]["phase"]["label"], "heavy_tailed");
}

#[test]
fn esd_writes_a_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(
        dir.path(),
        "g.npy",
        &["--kind", "gaussian", "--rows", "200", "--cols", "50"],
    );
    let hist = dir.path().join("h.csv");
    let o = esdscope(&[
        "esd",
        "--input",
        path(&input),
        "--hist",
        path(&hist),
        "--bins",
        "20",
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&hist).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(String::from_utf8_lossy(&o.stdout).contains("Q=4.0000"));
}

#[test]
fn validate_prints_a_suite_report() {
    let o = esdscope(&["validate", "--suite", "mp", "--seed", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["suite"], "mp");
    assert_eq!(v["passed"], true);
    assert!(!v["checks"].as_array().unwrap().is_empty());
}
