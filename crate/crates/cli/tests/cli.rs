use std::path::Path;
use std::process::{Command, Output};

fn slicecap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicecap"))
        .args(args)
        .env_remove("SLICECAP_OUT")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = slicecap(&["run", "example21", "--heights", "1:2:0.5", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["diagram.svg", "slice.csv", "critical.csv", "ranks.csv", "capacities.csv", "report.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let caps = read(dir.path(), "capacities.csv");
    assert!(caps.starts_with("height,method,degree,c_plus,c_minus,C_plus,C_minus,ambiguous\n"));
    let report = slicecap::io::Report::parse(&read(dir.path(), "report.txt"));
    assert_eq!(report.get("monotonicity"), Some("ok"));
    let c: f64 = report.get("h1.c+.0").unwrap().parse().unwrap();
    assert!((c + 32.0 / 3.0).abs() < 1e-6);
}

#[test]
fn empty_slice_gives_all_zero_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = slicecap(&["run", "example21", "--heights", "6", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report = slicecap::io::Report::parse(&read(dir.path(), "report.txt"));
    assert_eq!(report.get("all_zero"), Some("true"));
    let caps = read(dir.path(), "capacities.csv");
    for row in caps.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert!(cols[3..7].iter().all(|v| *v == "0"), "{row}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = slicecap(&["run", "fig8-neg", "--heights", "1,2", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    for f in ["diagram.svg", "slice.csv", "critical.csv", "capacities.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn config_file_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "family = \"example21\"\nheights = \"2\"\nK = 5.0\n").unwrap();
    let out_dir = dir.path().join("env-out");
    let out = Command::new(env!("CARGO_BIN_EXE_slicecap"))
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("SLICECAP_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("report.txt").exists());

    std::fs::write(&cfg, "heights = \"2\"\ncolour = \"red\"\n").unwrap();
    let out = slicecap(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(slicecap(&["run", "nope", "--heights", "1"]).status.code(), Some(2));
    assert_eq!(slicecap(&["run", "example21"]).status.code(), Some(2));
    assert_eq!(slicecap(&["run", "example21", "--heights", "1", "--K", "0.5"]).status.code(), Some(2));
    assert_eq!(slicecap(&["suite", "bogus"]).status.code(), Some(2));
    assert_eq!(slicecap(&["check-nonsqueezing", "--box", "0:1,5:6"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // height 0 is where the slice fails to be transverse
    let dir = tempfile::tempdir().unwrap();
    let out = slicecap(&["run", "example21", "--heights", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn cobordism_verdicts() {
    let verdict = |args: &[&str]| {
        let out = slicecap(args);
        assert!(out.status.success());
        slicecap::io::Report::parse(&String::from_utf8_lossy(&out.stdout)).get("verdict").unwrap().to_string()
    };
    assert_eq!(verdict(&["check-cobordism", "--bottom", "r=2", "--top", "R=3"]), "OBSTRUCTED");
    assert_eq!(verdict(&["check-cobordism", "--bottom", "r=3", "--top", "R=2"]), "NOT-OBSTRUCTED");
}

#[test]
fn suite_passes() {
    let out = slicecap(&["suite", "euler"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
