use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meshless"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_schema(&doc);
    doc
}

fn assert_schema(doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/cli-output.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}\n{doc:#}");
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &TempDir, shape: &str, n: usize) -> PathBuf {
    let path = p(dir, &format!("{shape}-{n}.xyz"));
    ok_json(&[
        "gen",
        "--shape",
        shape,
        "--n",
        &n.to_string(),
        "--normals",
        "--out",
        s(&path),
    ]);
    path
}

#[test]
fn gen_bumpy_radii_and_bytes() {
    let dir = TempDir::new().unwrap();
    let a = p(&dir, "a.xyz");
    let b = p(&dir, "b.xyz");
    let doc = ok_json(&[
        "gen",
        "--shape",
        "bumpy",
        "--n",
        "1000",
        "--seed",
        "3",
        "--out",
        s(&a),
    ]);
    ok_json(&[
        "gen",
        "--shape",
        "bumpy",
        "--n",
        "1000",
        "--seed",
        "3",
        "--out",
        s(&b),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    // r = 1 + sin(6φ)sin(6θ)/5 stays within [0.8, 1.2].
    let (lo, hi) = (
        doc["radius_min"].as_f64().unwrap(),
        doc["radius_max"].as_f64().unwrap(),
    );
    assert!(
        lo >= 0.8 - 1e-12 && hi <= 1.2 + 1e-12 && hi - lo > 0.3,
        "{lo} {hi}"
    );
    let lines = fs::read_to_string(&a)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count();
    assert_eq!(lines, 1000);
}

#[test]
fn gen_seed_changes_the_lattice() {
    let dir = TempDir::new().unwrap();
    let a = p(&dir, "a.xyz");
    let b = p(&dir, "b.xyz");
    ok_json(&["gen", "--shape", "sphere", "--n", "200", "--out", s(&a)]);
    ok_json(&[
        "gen",
        "--shape",
        "sphere",
        "--n",
        "200",
        "--seed",
        "9",
        "--out",
        s(&b),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn reconstruct_then_volume_list() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "bumpy", 400);
    let (mesh, model, csv) = (p(&dir, "m.obj"), p(&dir, "m.json"), p(&dir, "v.csv"));
    let doc = ok_json(&[
        "reconstruct",
        "-i",
        s(&cloud),
        "-m",
        "mfs",
        "--lambda",
        "4",
        "--grid",
        "24",
        "-o",
        s(&mesh),
        "--model-out",
        s(&model),
    ]);
    assert_eq!(doc["method"], "MFS-II");
    assert_eq!(doc["mesh"]["watertight"], true);
    assert!(fs::metadata(&mesh).unwrap().len() > 0);

    let vol = ok_json(&[
        "volume",
        "--model",
        s(&model),
        "--grid-list",
        "16,24,32",
        "--out",
        s(&csv),
    ]);
    assert_eq!(vol["rows"].as_array().unwrap().len(), 3);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "{text}");
    assert!(lines[0].starts_with("method,lambda,criterion,n_hat,volume"));
    for row in &vol["rows"].as_array().unwrap()[1..] {
        let v = row["volume"].as_f64().unwrap();
        assert!((v - 4.3153).abs() < 0.25, "{v}");
    }
}

#[test]
fn auto_lambda_records_selection() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "sphere", 300);
    let model = p(&dir, "m.json");
    let doc = ok_json(&[
        "reconstruct",
        "-i",
        s(&cloud),
        "-m",
        "mfs",
        "--auto-lambda",
        "scd",
        "--lambda-grid",
        "1:20:6",
        "--grid",
        "20",
        "--model-out",
        s(&model),
    ]);
    let lambda = doc["lambda"].as_f64().unwrap();
    assert_eq!(doc["sweep"]["lambda_star"].as_f64().unwrap(), lambda);
    assert_eq!(doc["sweep"]["criterion"], "scd");
    let vol = ok_json(&["volume", "--model", s(&model), "--grid", "20"]);
    assert_eq!(vol["selection"]["criterion"], "scd");
}

#[test]
fn hdk_at_100_matches_hd() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "bumpy", 300);
    let common = [
        "-m",
        "mfs",
        "--lambda-grid",
        "2:30:5",
        "--no-refine",
        "--grid",
        "20",
    ];
    let mut hd_args = vec!["sweep", "-i", s(&cloud), "--criterion", "hd"];
    hd_args.extend(common);
    let mut hdk_args = vec!["sweep", "-i", s(&cloud), "--criterion", "hdk", "--k", "100"];
    hdk_args.extend(common);
    let (hd, hdk) = (ok_json(&hd_args), ok_json(&hdk_args));
    assert_eq!(hd["sweep"]["lambda_star"], hdk["sweep"]["lambda_star"]);
    assert_eq!(hd["sweep"]["score_star"], hdk["sweep"]["score_star"]);
    assert_eq!(hd["report"]["hd"], hdk["report"]["hd_k"]);
}

#[test]
fn sweep_trace_and_volume_csv_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "bumpy", 300);
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let trace = p(&dir, &format!("trace{run_id}.csv"));
        let model = p(&dir, &format!("model{run_id}.json"));
        let vcsv = p(&dir, &format!("vol{run_id}.csv"));
        ok_json(&[
            "sweep",
            "-i",
            s(&cloud),
            "-m",
            "mfs",
            "--criterion",
            "aad",
            "--lambda-grid",
            "2:30:5",
            "--grid",
            "20",
            "--samples",
            "3000",
            "--seed",
            "11",
            "--trace",
            s(&trace),
        ]);
        ok_json(&[
            "reconstruct",
            "-i",
            s(&cloud),
            "-m",
            "mfs",
            "--auto-lambda",
            "aad",
            "--lambda-grid",
            "2:30:5",
            "--grid",
            "20",
            "--samples",
            "3000",
            "--seed",
            "11",
            "--model-out",
            s(&model),
        ]);
        ok_json(&[
            "volume",
            "--model",
            s(&model),
            "--grid-list",
            "12,20",
            "--out",
            s(&vcsv),
        ]);
        outputs.push([
            fs::read(&trace).unwrap(),
            fs::read(&model).unwrap(),
            fs::read(&vcsv).unwrap(),
        ]);
    }
    assert_eq!(outputs[0], outputs[1]);
    let trace = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(trace.starts_with("lambda,hd,scd,aad,hd_k,status"));
    // 5 coarse candidates plus 10 refinement points.
    assert_eq!(trace.lines().count(), 1 + 5 + 10, "{trace}");
}

#[test]
fn mq_and_kansa_estimate_missing_normals() {
    let dir = TempDir::new().unwrap();
    let cloud = p(&dir, "bare.xyz");
    ok_json(&["gen", "--shape", "sphere", "--n", "300", "--out", s(&cloud)]);
    let mq = ok_json(&["reconstruct", "-i", s(&cloud), "-m", "mq", "--grid", "20"]);
    assert_eq!(mq["input"]["normals_estimated"], true);
    assert!(mq["lambda"].is_null());
    let kansa = ok_json(&[
        "reconstruct",
        "-i",
        s(&cloud),
        "-m",
        "kansa",
        "--lambda",
        "1",
        "--grid",
        "20",
    ]);
    assert_eq!(kansa["input"]["normals_estimated"], true);
    assert_eq!(kansa["mesh"]["watertight"], true);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "sphere", 100);
    let code = |args: &[&str]| run(args).status.code().unwrap();

    assert_eq!(
        code(&[
            "reconstruct",
            "-i",
            s(&cloud),
            "-m",
            "mfs",
            "--lambda",
            "-1"
        ]),
        2
    );
    assert_eq!(
        code(&["reconstruct", "-i", s(&cloud), "-m", "mq", "--lambda", "1"]),
        2
    );
    assert_eq!(
        code(&["sweep", "-i", s(&cloud), "-m", "mfs"]),
        2,
        "criterion is required"
    );
    assert_eq!(
        code(&["volume", "--model", "x.json", "--grid-list", "30,20"]),
        2
    );
    assert_eq!(
        code(&[
            "--threads",
            "0",
            "gen",
            "--shape",
            "sphere",
            "--n",
            "10",
            "--out",
            s(&p(&dir, "t.xyz"))
        ]),
        2
    );

    let missing = p(&dir, "missing.xyz");
    assert_eq!(
        code(&[
            "reconstruct",
            "-i",
            s(&missing),
            "-m",
            "mfs",
            "--lambda",
            "1"
        ]),
        3
    );
    let garbage = p(&dir, "garbage.xyz");
    fs::write(&garbage, "1 2\nnot numbers\n").unwrap();
    assert_eq!(
        code(&[
            "reconstruct",
            "-i",
            s(&garbage),
            "-m",
            "mfs",
            "--lambda",
            "1"
        ]),
        3
    );
    let bad_model = p(&dir, "bad.json");
    fs::write(&bad_model, "{").unwrap();
    assert_eq!(code(&["volume", "--model", s(&bad_model)]), 3);

    let err = run(&[
        "reconstruct",
        "-i",
        s(&missing),
        "-m",
        "mfs",
        "--lambda",
        "1",
    ]);
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("missing.xyz"), "{msg}");
    assert!(err.stdout.is_empty());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let cloud = gen(&dir, "sphere", 200);
    let cfg = p(&dir, "meshless.toml");
    fs::write(&cfg, "method = \"mfs\"\ncriterion = \"aad\"\nlambda_grid = \"2:20:4\"\ngrid = 16\nrefine = false\n").unwrap();
    let doc = ok_json(&["--config", s(&cfg), "sweep", "-i", s(&cloud)]);
    assert_eq!(doc["sweep"]["criterion"], "aad");
    assert_eq!(doc["sweep"]["candidates"], 4);
    assert_eq!(doc["n_per_axis"], 16);

    fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(
        run(&["--config", s(&cfg), "sweep", "-i", s(&cloud)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn version_names_model_format() {
    let out = run(&["--version"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("model format"), "{text}");
}
