use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_scc-sim");

const SMALL: &str = r#"
name = "small"

[topology]
kind = "star"
n_agents = 20
byzantine_fraction = 0.1

[schedule]
kind = "decaying"
theta = 1.0
k0 = 10
alpha = 0.01

[noise]
variance = 1e-4

[attack]
kind = "sign_flip"

[aggregation]
kind = "scc"
allow_oracle = true

[dp]
epsilon = 1.0
delta = 1e-5
total_samples = 1000

[run]
horizon = 200
seeds = [1, 2, 3]
record_every = 5
final_window = 4

[[sweep]]
key = "schedule.kind"
values = ["decaying", "constant"]
"#;

fn sim(root: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SCC_SIM_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn first_line(p: &Path) -> String {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn sweep_writes_every_artifact_with_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = sim(tmp.path(), &["sweep", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("small");
    for f in ["config.toml", "cells.csv", "regimes.csv", "summary.txt"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let mut seeds = 0;
    for cell in 0..2 {
        let cdir = dir.join(format!("cell_{cell:03}"));
        for f in ["mean.csv", "bounds.csv", "network.csv"] {
            assert!(cdir.join(f).exists(), "{f}");
        }
        for s in 1..=3 {
            let p = cdir.join(format!("seed_{s}.csv"));
            let h = first_line(&p);
            assert!(
                h.starts_with("# config_hash=") && h.ends_with(&format!("cell={cell} seed={s}")),
                "{h}"
            );
            let text = fs::read_to_string(&p).unwrap();
            assert_eq!(
                text.lines().nth(1),
                Some("k,consensus,pre_agg,f_avg,f_best,gap,dk_bound")
            );
            // rows at k = 0, 5, ..., 200
            assert_eq!(text.lines().count(), 2 + 41);
            seeds += 1;
        }
    }
    assert_eq!(seeds, 2 * 3);
    let regimes = fs::read_to_string(dir.join("regimes.csv")).unwrap();
    assert_eq!(regimes.lines().count(), 3, "{regimes}");
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("trajectory-conditional"), "{summary}");

    let report = sim(tmp.path(), &["report", dir.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("CSV files consistent"), "{text}");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let out = sim(tmp.path(), &["sweep", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for rel in [
        "cells.csv",
        "regimes.csv",
        "summary.txt",
        "cell_001/seed_2.csv",
        "cell_000/mean.csv",
        "cell_000/bounds.csv",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        &SMALL.replace("horizon = 200", "horizon = 200\nhorizn = 1"),
    );
    let out = sim(tmp.path(), &["sweep", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));

    let cfg = write_config(tmp.path(), SMALL);
    // A sweep config needs `--cell` under `run`.
    assert_eq!(sim(tmp.path(), &["run", &cfg]).status.code(), Some(2));
    assert_eq!(
        sim(tmp.path(), &["run", &cfg, "--cell", "9"]).status.code(),
        Some(2)
    );
    // The star hub is the last agent; making it Byzantine disconnects the leaves.
    let hub = write_config(
        tmp.path(),
        &SMALL.replace("byzantine_fraction = 0.1", "byzantine = [19]"),
    );
    let out = sim(tmp.path(), &["sweep", &hub]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        sim(tmp.path(), &["sweep", "recipe:nope"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_picks_one_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = sim(
        tmp.path(),
        &["run", &cfg, "--cell", "1", "--set", "run.seeds=[4]"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("small");
    assert!(dir.join("cell_001/seed_4.csv").exists());
    assert!(!dir.join("cell_000").exists());
}

#[test]
fn privacy_trace_rejects_byzantine_agents() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    // 10% of 20 agents evenly spaced: agents 0 and 10 are Byzantine.
    let out = sim(tmp.path(), &["privacy-trace", &cfg, "--swap", "10"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = sim(
        tmp.path(),
        &["privacy-trace", &cfg, "--swap", "3", "--family", "7"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("small/privacy_trace");
    assert!(dir.join("trace_seed_1.csv").exists());
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("F2 -> F7"), "{summary}");
}

#[test]
fn recipes_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sim(tmp.path(), &["recipes"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["fig1_signflip", "table2_sweep", "fig4_noise_sweep"] {
        assert!(text.contains(name));
    }
}
