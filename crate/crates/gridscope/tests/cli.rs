use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gridscope"));
    c.env_remove("GRIDSCOPE_DATA_DIR");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path) -> Output {
    run(&["simulate", "--seed", "11", "--anomaly", "u1:t5:3:20", "--out-dir", dir.to_str().unwrap()])
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn layout_examples() {
    let ok = run(&["layout", "--in", fixture("pts64.csv").to_str().unwrap(), "--shape", "8x8"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["cells"].as_object().unwrap().len(), 64);
    assert_eq!(v["shape"], serde_json::json!([8, 8]));

    let short = run(&["layout", "--in", fixture("pts63.csv").to_str().unwrap(), "--shape", "8x8"]);
    assert_eq!(short.status.code(), Some(1));
    let err = String::from_utf8_lossy(&short.stderr);
    assert!(err.contains("core_sd") && err.contains("63"), "{err}");

    let cube = run(&["layout", "--in", fixture("pts64_3d.csv").to_str().unwrap(), "--shape", "4x4x4"]);
    assert_eq!(cube.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&cube.stdout).unwrap();
    assert!(v["cells"].as_object().unwrap().values().all(|c| c.as_array().unwrap().len() == 3));
}

#[test]
fn exit_codes_and_help() {
    for sub in ["layout", "mds", "metrics", "pipeline", "simulate", "serve"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(text(&o).contains("--"), "{sub}");
    }
    assert_eq!(run(&["layout", "--shape", "8x8"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let missing = run(&["layout", "--in", "/nonexistent.csv", "--shape", "2x2"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent.csv"));
    let no_dir = run(&["pipeline", "--entity", "u1", "--window", "0"]);
    assert_eq!(no_dir.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_dir.stderr).contains("GRIDSCOPE_DATA_DIR"));
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let o = run(&["layout", "--in", fixture("pts64.csv").to_str().unwrap(), "--shape", "8x8", "--out", "/nonexistent/dir/a.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_reads_env_data_dir_and_flags_anomaly() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(simulate(tmp.path()).status.success());
    let o = bin()
        .args(["pipeline", "--entity", "u1", "--window", "3"])
        .env("GRIDSCOPE_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let top = v["self_risk"]["cells"]
        .as_array()
        .unwrap()
        .iter()
        .max_by(|a, b| a["value"].as_f64().unwrap().total_cmp(&b["value"].as_f64().unwrap()))
        .unwrap();
    assert_eq!(top["topic_id"], "t5");
    let bad = bin()
        .args(["pipeline", "--entity", "u1", "--window", "99"])
        .env("GRIDSCOPE_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).unwrap();
    // Drop headers; they include a date.
    buf.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default()
}

fn serve_once(data: &Path, paths: &[&str]) -> Vec<String> {
    let mut child = bin()
        .args(["serve", "--data-dir", data.to_str().unwrap(), "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().trim_start_matches("listening on http://").to_string();
    let bodies = paths.iter().map(|p| http_get(&addr, p)).collect();
    child.kill().unwrap();
    child.wait().unwrap();
    bodies
}

/// Every subcommand twice on the same inputs; outputs must match byte for byte.
pub fn determinism_report() -> Vec<(&'static str, bool)> {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let mut report = Vec::new();

    let twice = |args: Vec<String>| {
        let a = bin().args(&args).output().unwrap();
        let b = bin().args(&args).output().unwrap();
        a.status.success() && a.stdout == b.stdout && !a.stdout.is_empty()
    };
    let s = |x: &str| x.to_string();
    let pts = fixture("pts64.csv").to_string_lossy().into_owned();

    report.push(("layout", twice(vec![s("layout"), s("--in"), pts.clone(), s("--shape"), s("8x8")])));
    let vectors = fixture("vectors.json").to_string_lossy().into_owned();
    report.push(("mds", twice(vec![s("mds"), s("--in"), vectors, s("--dims"), s("2"), s("--metric"), s("cosine")])));
    report.push(("metrics", twice(vec![s("metrics"), s("--in"), pts, s("--radius"), s("0.25")])));

    let (d1, d2) = (root.join("sim1"), root.join("sim2"));
    let sim_ok = simulate(&d1).status.success() && simulate(&d2).status.success();
    report.push(("simulate", sim_ok && dir_bytes(&d1) == dir_bytes(&d2)));

    let data = d1.to_string_lossy().into_owned();
    report.push((
        "pipeline",
        twice(vec![s("pipeline"), s("--data-dir"), data, s("--entity"), s("u1"), s("--window"), s("3")]),
    ));

    let paths = [
        "/api/entities",
        "/api/windows",
        "/api/topics/t5",
        "/api/grid?entity=u1&window=3&metric=self_risk",
        "/api/detail?entity=u1&window=3&topic=t5",
        "/api/timeline?entity=u2&metric=current&format=shower",
    ];
    let a = serve_once(&d1, &paths);
    let b = serve_once(&d1, &paths);
    report.push(("serve", a == b && a.iter().all(|body| body.contains("schema_version"))));
    report
}

#[test]
fn every_subcommand_is_deterministic() {
    for (name, ok) in determinism_report() {
        assert!(ok, "{name} output differs between runs");
    }
}
