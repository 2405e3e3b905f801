//! End-to-end checks of the command-line interface: the synth/detect/eval
//! round trip, the energy pipeline, determinism, and failure behavior.

use std::path::{Path, PathBuf};
use std::process::Command;

fn rpeak() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rpeak"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rpeak-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn rpeak");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let prefix = dir.join(name);
    let mut cmd = rpeak();
    cmd.args(["synth", "--duration", "30", "--out"])
        .arg(&prefix)
        .args(extra);
    run_ok(&mut cmd);
    prefix.with_extension("csv")
}

#[test]
fn detect_eval_round_trip() {
    let dir = workdir("roundtrip");
    let csv = synth(&dir, "seg", &["--hr", "170", "--amp-alternate", "0.1@8"]);
    for bench in ["lightweight", "bayeslope", "adaptive"] {
        let mut cmd = rpeak();
        cmd.args(["detect", "--bench", bench, "--input"])
            .arg(&csv)
            .arg("--out-dir")
            .arg(&dir);
        let out = run_ok(&mut cmd);
        assert!(out.contains("peaks"), "unexpected output: {out}");
    }
    let mut cmd = rpeak();
    cmd.args(["eval", "--fs", "250", "--tol", "150", "--annotations"])
        .arg(dir.join("seg.ann"))
        .arg("--detected")
        .arg(format!(
            "lw={}",
            dir.join("seg.lightweight.peaks.txt").display()
        ))
        .arg("--detected")
        .arg(format!(
            "bs={}",
            dir.join("seg.bayeslope.peaks.txt").display()
        ))
        .arg("--detected")
        .arg(format!(
            "ad={}",
            dir.join("seg.adaptive.peaks.txt").display()
        ));
    let table = run_ok(&mut cmd);
    assert!(table.contains("lw"), "{table}");
    assert!(table.contains("pooled:"), "{table}");

    // the alternation must hurt the lightweight bench far more
    let f1 = |label: &str| -> f64 {
        table
            .lines()
            .find(|l| l.starts_with(label))
            .and_then(|l| l.split_whitespace().nth(2))
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or_else(|| panic!("row {label} missing in\n{table}"))
    };
    assert!(f1("lw") < f1("bs"));
    assert!(f1("ad") > 90.0);
}

#[test]
fn energy_report_and_bench_compare() {
    let dir = workdir("energy");
    let csv = synth(&dir, "seg", &["--hr", "165", "--amp-step", "0.12@10"]);
    let mut cmd = rpeak();
    cmd.args(["detect", "--bench", "adaptive", "--input"])
        .arg(&csv)
        .arg("--out-dir")
        .arg(&dir);
    run_ok(&mut cmd);
    let report = dir.join("seg.adaptive.report.txt");

    let mut cmd = rpeak();
    cmd.args(["energy", "--report"]).arg(&report);
    let out = run_ok(&mut cmd);
    assert!(out.contains("total_mj="), "{out}");
    assert!(out.contains("retention"), "{out}");

    let mut cmd = rpeak();
    cmd.args(["energy", "--bench-compare", "25", "--report"])
        .arg(&report);
    let out = run_ok(&mut cmd);
    let total = |label: &str| -> f64 {
        out.lines()
            .find(|l| l.starts_with(label))
            .and_then(|l| l.rsplit(',').next())
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or_else(|| panic!("row {label} missing in\n{out}"))
    };
    let (lw, bs, ad) = (total("lightweight"), total("bayeslope"), total("adaptive"));
    assert!(lw < ad && ad < bs, "ordering violated: {lw} {ad} {bs}");
}

#[test]
fn dist_build_excludes_subject() {
    let dir = workdir("dist");
    let mut cmd = rpeak();
    cmd.args(["fixtures", "--out-dir"]).arg(&dir);
    run_ok(&mut cmd);
    let out_thr = dir.join("thr.txt");
    let mut cmd = rpeak();
    cmd.args(["dist", "build", "--manifest"])
        .arg(dir.join("manifest.txt"))
        .args(["--exclude", "stationary_80bpm", "--out"])
        .arg(&out_thr);
    let out = run_ok(&mut cmd);
    assert!(out.contains("excluded: stationary_80bpm"), "{out}");
    let text = std::fs::read_to_string(&out_thr).unwrap();
    assert!(text.contains("excluded_subject=stationary_80bpm"), "{text}");
}

#[test]
fn detect_is_deterministic() {
    let dir = workdir("determinism");
    let csv = synth(
        &dir,
        "seg",
        &["--hr", "120", "--noise-sd", "20", "--seed", "5"],
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let mut cmd = rpeak();
        cmd.args(["detect", "--bench", "adaptive", "--input"])
            .arg(&csv)
            .arg("--out-dir")
            .arg(out);
        run_ok(&mut cmd);
    }
    let a = std::fs::read(out_a.join("seg.adaptive.peaks.txt")).unwrap();
    let b = std::fs::read(out_b.join("seg.adaptive.peaks.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn failures_exit_nonzero_without_partial_outputs() {
    let dir = workdir("failures");
    let out = rpeak()
        .args(["detect", "--bench", "adaptive", "--input"])
        .arg(dir.join("missing.csv"))
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let leftovers: Vec<_> = std::fs::read_dir(dir.join("out"))
        .map(|rd| rd.filter_map(|e| e.ok()).collect())
        .unwrap_or_default();
    assert!(leftovers.is_empty(), "partial outputs: {leftovers:?}");

    // mismatched rate declarations are refused
    let csv = synth(&dir, "seg", &["--hr", "90"]);
    let mut cmd = rpeak();
    cmd.args(["detect", "--bench", "lightweight", "--input"])
        .arg(&csv)
        .arg("--out-dir")
        .arg(&dir);
    run_ok(&mut cmd);
    let out = rpeak()
        .args(["eval", "--fs", "500", "--annotations"])
        .arg(dir.join("seg.ann"))
        .arg("--detected")
        .arg(dir.join("seg.lightweight.peaks.txt").to_str().unwrap())
        .output()
        .unwrap();
    assert!(!out.status.success(), "fs mismatch must fail");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fs"), "unhelpful error: {stderr}");
}

#[test]
fn jobs_flag_processes_all_inputs() {
    let dir = workdir("jobs");
    let a = synth(&dir, "a", &["--hr", "80"]);
    let b = synth(&dir, "b", &["--hr", "140"]);
    let mut cmd = rpeak();
    cmd.args(["detect", "--bench", "lightweight", "--jobs", "2", "--input"])
        .arg(&a)
        .arg("--input")
        .arg(&b)
        .arg("--out-dir")
        .arg(&dir);
    run_ok(&mut cmd);
    assert!(dir.join("a.lightweight.peaks.txt").exists());
    assert!(dir.join("b.lightweight.peaks.txt").exists());
}
