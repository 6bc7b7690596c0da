use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spindyn_harness::RunConfig;

const BIN: &str = env!("CARGO_BIN_EXE_spindyn");

fn config_text(output: &Path) -> String {
    format!(
        r#"
[lattice]
geometry = "chain"
length = 8

[model]
kind = "ising"
alpha = 3.0

[time]
t_max = 0.6
t_step = 0.1

[run]
backends = ["oracle", "ed", "mlmctdh", "dtwa"]
output = "{}"

[mlmctdh]
tree = "8→[2]4→[4]2→[16]1"
rtol = 1e-10
atol = 1e-12

[dtwa]
trajectories = 200
seed = 3
"#,
        output.display()
    )
}

fn spindyn(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn spindyn")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, config_text(&dir.join("out"))).unwrap();
    path
}

#[test]
fn run_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = spindyn(&["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let outdir = dir.path().join("out");
    for b in ["oracle", "ed", "mlmctdh", "dtwa"] {
        let csv = fs::read_to_string(outdir.join(format!("{b}.csv"))).unwrap();
        assert!(csv.lines().count() > 7, "{b}.csv too short");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["sites"], 8);
    assert_eq!(summary["grid_points"], 7);
    let devs = summary["deviations"].as_array().unwrap();
    let dev = |a: &str, b: &str, col: &str| {
        devs.iter()
            .find(|d| d["column"] == col && ((d["a"] == a && d["b"] == b) || (d["a"] == b && d["b"] == a)))
            .and_then(|d| d["max"].as_f64())
            .unwrap_or_else(|| panic!("no {a}/{b}/{col} deviation"))
    };
    assert!(dev("mlmctdh", "oracle", "Sx") < 1e-7);
    assert!(dev("ed", "mlmctdh", "SvN") < 1e-7);
    assert!(dev("ed", "oracle", "dSx") < 1e-9);
    assert!(summary["diagnostics"]["mlmctdh"]["norm_drift"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let read_all = || {
        ["oracle", "ed", "mlmctdh", "dtwa"].map(|b| fs::read(dir.path().join("out").join(format!("{b}.csv"))).unwrap())
    };
    assert!(spindyn(&["run", cfg.to_str().unwrap()]).status.success());
    let first = read_all();
    let out = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("SPINDYN_WORKERS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(first, read_all());
}

#[test]
fn compare_reports_pairwise_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    assert!(spindyn(&["run", cfg.to_str().unwrap()]).status.success());
    let csv = |b: &str| dir.path().join("out").join(format!("{b}.csv")).display().to_string();
    let out = spindyn(&["compare", &csv("ed"), &csv("oracle")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.contains("Sx")), "{text}");
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(spindyn(&["run", missing.to_str().unwrap()]).status.code(), Some(2));

    // Output directory nested under a regular file cannot be created.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let unwritable = dir.path().join("unwritable.toml");
    fs::write(&unwritable, config_text(&blocker.join("out"))).unwrap();
    assert_eq!(spindyn(&["run", unwritable.to_str().unwrap()]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, config_text(&dir.path().join("o")).replace("alpha", "alhpa")).unwrap();
    assert_eq!(spindyn(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    let neg = dir.path().join("neg.toml");
    fs::write(
        &neg,
        config_text(&dir.path().join("o")).replace("alpha = 3.0", "alpha = -1.0"),
    )
    .unwrap();
    assert_eq!(spindyn(&["run", neg.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(spindyn(&["preset", "fig9z"]).status.code(), Some(2));
    let workers = Command::new(BIN)
        .args(["preset", "--list"])
        .env("SPINDYN_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(workers.status.code(), Some(2));
}

#[test]
fn presets_print_loadable_configs() {
    let list = spindyn(&["preset", "--list"]);
    assert!(list.status.success());
    let text = String::from_utf8(list.stdout).unwrap();
    assert_eq!(text.lines().count(), 30);
    for id in ["fig2a", "fig3e", "fig5c", "fig6b"] {
        let out = spindyn(&["preset", id, "--print"]);
        assert!(out.status.success(), "{id}");
        let cfg = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn converge_prints_one_row_per_m() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv.toml");
    let text = config_text(&dir.path().join("o"))
        .replace(r#"["oracle", "ed", "mlmctdh", "dtwa"]"#, r#"["mlmctdh"]"#)
        .replace("alpha = 3.0", "alpha = 0.0");
    fs::write(&path, text).unwrap();
    let out = spindyn(&["converge", path.to_str().unwrap(), "--m", "2", "4", "16"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("reference: ed"), "{stdout}");
    let rows: Vec<&str> = stdout.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].contains("[16]"));
    assert_eq!(
        spindyn(&["converge", path.to_str().unwrap(), "--m", "4", "2"])
            .status
            .code(),
        Some(2)
    );
}
