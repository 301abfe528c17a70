use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn esig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esig")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 10\n");
    let out = esig(&["selftest", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_field_and_unknown_experiment_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nbogus = 3\n");
    assert_eq!(esig(&["selftest", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(esig(&["nonsense", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(esig(&["selftest", "--seed", "1", "--threads", "0"]).status.code(), Some(2));
}

#[test]
fn writes_stamped_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 3\nn = 200\nwords = [\"1.2\"]\n[process]\nkind = \"bm\"\ndim = 2\n[infill]\nmax_level = 6\nreference_level = 8\n",
    );
    let out_dir = dir.path().join("run");
    let out = esig(&["infill", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let hash = summary["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(summary["experiment"], "infill");
    assert_eq!(summary["seed"], 3);

    let csv = fs::read_to_string(out_dir.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# esig {} config_sha256={hash}", env!("CARGO_PKG_VERSION")));
    let svg = fs::read_to_string(out_dir.join("plot.svg")).unwrap();
    assert!(svg.contains(hash) && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[selftest]\ncases = 20\n");
    let run = |seed: &str, name: &str| {
        let o = dir.path().join(name);
        let out = esig(&["selftest", "--config", &cfg, "--seed", seed, "--out", o.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        fs::read_to_string(o.join("summary.json")).unwrap()
    };
    let (a, b, c) = (run("9", "a"), run("9", "b"), run("10", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["seed"], 9);
}
