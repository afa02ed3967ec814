use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dse")).args(args).output().expect("spawn dse")
}

fn scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default_paper.toml")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ckf_tracks_clean_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dse(&[
        "run",
        "--scenario",
        scenario().to_str().unwrap(),
        "--estimators",
        "ckf",
        "--attack",
        "off",
        "--unknown-inputs",
        "off",
        "--repeats",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("[ckf] PASS"), "{}", stdout(&o));
    assert!(out.join("ckf.csv").exists());
    assert!(out.join("report.txt").exists());
}

#[test]
fn adverse_run_reports_both_estimators() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dse(&[
        "run",
        "--scenario",
        scenario().to_str().unwrap(),
        "--estimators",
        "ckf,lipschitz",
        "--repeats",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("[ckf]") && text.contains("[lipschitz]"), "{text}");
    let r = dse(&["report", "--in", out.to_str().unwrap()]);
    assert!(r.status.success());
    let again = stdout(&r);
    assert!(again.contains("[ckf]") && again.contains("[lipschitz]"));
}

#[test]
fn report_on_empty_dir_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dse(&["report", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no traces found"));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(dse(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(dse(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let o = dse(&["run", "--scenario", "/nonexistent.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = dse(&[
            "run",
            "--scenario",
            scenario().to_str().unwrap(),
            "--estimators",
            "ekf,uio",
            "--seed",
            "7",
            "--repeats",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        (std::fs::read_to_string(out.join("ekf.csv")).unwrap(), std::fs::read_to_string(out.join("uio.csv")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn synthesize_writes_loadable_gains() {
    let dir = tempfile::tempdir().unwrap();
    for obs in ["uio", "lipschitz"] {
        let path = dir.path().join(format!("{obs}.gains"));
        let o = dse(&["synthesize", "--scenario", scenario().to_str().unwrap(), "--observer", obs, "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("LMI margin"));
        let g = dse_core::observers::load_gains(&path).unwrap();
        assert_eq!(g.kind().name(), obs);
    }
}
