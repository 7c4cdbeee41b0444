//! Runs the `glueflow` binary on small configs and checks exit codes and
//! report files.
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glueflow::mesh_io::read_mesh;
use glueflow::report::read_triplets;
use glueflow_core::sparse::CsrMatrix;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glueflow"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("c.toml");
    fs::write(&p, body).unwrap();
    p
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const TINY_WALK: &str = r#"
task = "walk"
seed = 3
[space]
pieces = [
  { kind = "disk", radius = 1.0 },
  { kind = "segment", length = 2.0, origin = [0, 0, -1], direction = [0, 0, 1] },
]
[walk]
level = 2
horizon = 1.0
paths = 50
resamples = 100
"#;

#[test]
fn build_reports_the_glued_structure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&configs().join("build_disk_segment.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["task"], "build");
    let res = &r["results"];
    assert_eq!(res["pieces"].as_array().unwrap().len(), 2);
    assert_eq!(res["intersections"].as_array().unwrap().len(), 1);
    assert_eq!(res["intersections"][0]["k"], 0);
    assert_eq!(res["connected"], true);

    // triplet dump is symmetric with zero row sums
    let (n, t) = read_triplets(&fs::read_to_string(out.join("stiffness.triplets")).unwrap()).unwrap();
    assert_eq!(n as u64, res["dofs"].as_u64().unwrap());
    let k = CsrMatrix::from_triplets(n, &t);
    assert!(k.asymmetry() < 1e-12);
    let ones = vec![1.0; n];
    assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-9));

    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["exit_code"], 0);
    assert_eq!(meta["config_sha256"], r["config_sha256"]);
}

#[test]
fn inadmissible_weight_exits_3_after_writing_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&configs().join("weights_alpha2_violation.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["results"]["admissibility"]["admissible"], false);
    assert!(out.join("a2_0.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let unknown = write_config(
        dir.path(),
        "task = \"build\"\nbogus = 1\n[space]\npieces = [{ kind = \"segment\", length = 1.0 }]\n",
    );
    assert_eq!(run(&unknown, &out, &[]).status.code(), Some(2));
    let foreign = write_config(
        dir.path(),
        "task = \"build\"\n[space]\npieces = [{ kind = \"segment\", length = 1.0 }]\n[walk]\nhorizon = 1.0\n",
    );
    assert_eq!(run(&foreign, &out, &[]).status.code(), Some(2));
    let wrong_k = write_config(
        dir.path(),
        "task = \"build\"\n[space]\nexpected_k = [1]\npieces = [\n  { kind = \"disk\", radius = 1.0 },\n  { kind = \"segment\", length = 2.0, origin = [0, 0, -1], direction = [0, 0, 1] },\n]\n",
    );
    assert_eq!(run(&wrong_k, &out, &[]).status.code(), Some(2));
    assert_eq!(run(&dir.path().join("missing.toml"), &out, &[]).status.code(), Some(2));
    assert_eq!(bin().arg("--threads").arg("0").output().unwrap().status.code(), Some(2));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_WALK);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &["--threads", "4"]).status.code(), Some(0));
    for f in ["report.json", "trace_0.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_WALK);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, &["--seed", "99"]).status.code(), Some(0));
    assert_ne!(fs::read(a.join("trace_0.csv")).unwrap(), fs::read(b.join("trace_0.csv")).unwrap());
    assert_eq!(report(&b)["config"]["seed"], 99);
}

#[test]
fn mesh_file_pieces_glue_and_are_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&configs().join("build_mesh_file.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let mesh = read_mesh(&configs().join("meshes/square3x3.mesh"), 0).unwrap();
    assert_eq!(r["results"]["pieces"][0]["cells"].as_u64().unwrap() as usize, mesh.n_cells());
    assert_eq!(r["results"]["intersections"][0]["k"], 0);
    let inputs = r["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn spectrum_of_two_segments_has_two_dimensional_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&configs().join("spectrum_two_segments.toml"), &out, &[]).status.code(), Some(0));
    assert_eq!(report(&out)["results"]["kernel_dim"], 2);
    let eig = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert!(eig.starts_with("index,"));
}
