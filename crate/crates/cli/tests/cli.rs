use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hallmhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hallmhd"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_HALL: &str = r#"scenario = "hall"
[grid]
n = 32
l = 20.0
[integrator]
dt = 0.01
t_end = 0.5
[diagnostics]
cadence = 0.0625
fits = [{ quantity = "energy", t0 = 1.0, t1 = 2.0 }]
[output]
dir = "out"
checkpoint_every = 2
[[initial]]
preset = "gaussian_pair"
gamma = 0.4
eta = 0.2
width = 2.0
"#;

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn identities_pass_on_default_grid() {
    let o = hallmhd(&["identities", "--pairs", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("antisymmetry"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn zero_length_run_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_HALL);
    let o = hallmhd(&["run", cfg.to_str().unwrap(), "--t-end", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/records.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert!(lines[0].starts_with("# hallmhd-records v1"));
    assert_eq!(lines.len(), 3, "comment, header and one record");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["status"], "completed");
    assert_eq!(summary["records"], 1);
}

#[test]
fn resume_reproduces_trailing_records() {
    let full = tempfile::tempdir().unwrap();
    let cfg = write_config(full.path(), "c.toml", SMALL_HALL);
    assert_eq!(code(&hallmhd(&["run", cfg.to_str().unwrap()])), 0);

    let part = tempfile::tempdir().unwrap();
    let cfg2 = write_config(part.path(), "c.toml", SMALL_HALL);
    assert_eq!(code(&hallmhd(&["run", cfg2.to_str().unwrap(), "--t-end", "0.25"])), 0);
    assert_eq!(code(&hallmhd(&["resume", cfg2.to_str().unwrap()])), 0);

    let a = std::fs::read(full.path().join("out/records.csv")).unwrap();
    let b = std::fs::read(part.path().join("out/records.csv")).unwrap();
    assert_eq!(a, b);
    let a = std::fs::read(full.path().join("out/checkpoint.bin")).unwrap();
    let b = std::fs::read(part.path().join("out/checkpoint.bin")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "scenario = \"hall\"\nbogus = 1\n");
    let o = hallmhd(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&hallmhd(&["run", missing.to_str().unwrap()])), 4);

    let blow = write_config(
        dir.path(),
        "blow.toml",
        r#"scenario = "hall"
[grid]
n = 32
l = 6.283185307179586
[integrator]
dt = 0.5
t_end = 20.0
[diagnostics]
cadence = 0.5
[[initial]]
preset = "random_bandlimited"
seed = 1
band = 5
amplitude = 50.0
"#,
    );
    let o = hallmhd(&["run", blow.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    assert!(summary.contains("\"blow_up\""));
}

#[test]
fn audit_reports_epsilon_and_shrinks_with_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut last = f64::INFINITY;
    for scale in ["0.4", "0.2", "0.1", "0.05"] {
        let body = format!(
            "scenario = \"hall\"\n[grid]\nn = 64\nl = 40.0\n[[initial]]\npreset = \"kernel_exact\"\ngamma = {scale}\neta = {scale}\nt0 = 2.0\n"
        );
        let cfg = write_config(dir.path(), "a.toml", &body);
        let o = hallmhd(&["audit", cfg.to_str().unwrap(), "--json"]);
        assert_eq!(code(&o), 0);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let eps = v["entries"][0]["value"].as_f64().unwrap();
        assert_eq!(v["entries"][0]["name"], "epsilon1");
        assert!(eps < last);
        last = eps;
    }
}

#[test]
fn fit_reanalyzes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &SMALL_HALL.replace("t_end = 0.5", "t_end = 3.0"));
    assert_eq!(code(&hallmhd(&["run", cfg.to_str().unwrap()])), 0);
    let csv = dir.path().join("out/records.csv");
    let o = hallmhd(&["fit", csv.to_str().unwrap(), "-Q", "energy", "-Q", "M+S", "--t0", "1", "--t1", "3", "--json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v[0]["fit"]["exponent"].as_f64().unwrap() < 0.0);
    let o = hallmhd(&["fit", csv.to_str().unwrap(), "-Q", "nope"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_runs_configs_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.toml", &SMALL_HALL.replace("dir = \"out\"", "dir = \"out_a\""));
    let b = write_config(dir.path(), "b.toml", &SMALL_HALL.replace("dir = \"out\"", "dir = \"out_b\""));
    let o = hallmhd(&["run", a.to_str().unwrap(), b.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("out_a/records.csv")).unwrap(),
        std::fs::read(dir.path().join("out_b/records.csv")).unwrap()
    );
    let c = write_config(dir.path(), "c.toml", SMALL_HALL);
    let d = write_config(dir.path(), "d.toml", SMALL_HALL);
    let o = hallmhd(&["run", c.to_str().unwrap(), d.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn shipped_configs_parse_and_pass_audit() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = hallmhd(&["audit", path.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
