//! The `windtrip` binary, end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn windtrip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windtrip")).args(args).output().expect("run windtrip")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn compare_prints_paired_rmse_and_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = windtrip(&["compare", "--scenario", "jet", "-o", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for label in ["pd-only", "feedback", "feedforward"] {
        assert!(out.contains(label), "{out}");
    }
    assert!(out.contains("reduction (feedforward vs feedback):"), "{out}");
    for arm in ["pd-only", "feedback", "feedforward"] {
        for f in ["truth.csv", "onboard.csv", "position.csv", "command.csv", "track.csv", "track.json", "run.json", "config.toml", "summary.json"] {
            assert!(dir.path().join(arm).join(f).is_file(), "{arm}/{f}");
        }
    }
}

#[test]
fn report_regenerates_summaries_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(windtrip(&["compare", "--scenario", "complex", "-o", p(dir.path())]).status.success());
    let files = ["compare.json", "feedback/summary.json", "feedforward/summary.json", "pd-only/summary.json"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
    for f in files {
        fs::remove_file(dir.path().join(f)).unwrap();
    }
    let o = windtrip(&["report", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (f, b) in files.iter().zip(before) {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), b, "{f}");
    }
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = windtrip(&["report", p(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no logs found"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_listed_with_config_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = \"jet\"\nspeed = 3\n[plan]\nreturn_speed = 1.0\nlegs = 2\n").unwrap();
    let o = windtrip(&["roundtrip", "--config", p(&cfg), "-o", p(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("plan.legs") && err.contains("speed"), "{err}");
    assert!(!dir.path().join("out").exists(), "nothing may run before validation");
}

#[test]
fn config_echo_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = windtrip(&["roundtrip", "--scenario", "gusty", "--seed", "5", "--set", "plan.return_speed=0.8", "-o", p(&first)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let second = dir.path().join("second");
    let o = windtrip(&["roundtrip", "--config", p(&first.join("config.toml")), "-o", p(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["truth.csv", "onboard.csv", "position.csv", "command.csv", "track.csv", "run.json", "summary.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fieldmap_peaks_at_six_metres_per_second() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("jet.csv");
    let o = windtrip(&["fieldmap", "--field", "jet", "--plane", "z=1", "-o", p(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x_m,y_m,z_m,u_mps,v_mps,w_mps,speed_mps");
    let peak = lines.map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!((peak - 6.0).abs() < 1e-9, "{peak}");
}

#[test]
fn simulate_legs_with_a_stored_track() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(windtrip(&["simulate", "--leg", "outbound", "-o", p(&out)]).status.success());
    let o = windtrip(&["simulate", "--leg", "return", "-o", p(&dir.path().join("missing"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("track"), "{}", stderr(&o));
    let o = windtrip(&["simulate", "--leg", "return", "--track", p(&out.join("track.csv")), "-o", p(&dir.path().join("back"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("return"), "{}", stdout(&o));
}

#[test]
fn sweep_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = windtrip(&["sweep", "--param", "filters.tau_force", "--values", "0.05,0.1,0.2", "--workers", "3", "-o", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("index,value,seed,directory,status"));
}

#[test]
fn divergence_exits_with_partial_logs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = windtrip(&["simulate", "--leg", "hover", "--set", "injected.force=[0.0, 0.0, -1e9]", "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
    assert!(out.join("truth.csv").is_file() && out.join("run.json").is_file());
}

#[test]
fn bad_arguments() {
    assert_eq!(windtrip(&["roundtrip", "--scenario", "mars"]).status.code(), Some(2));
    assert_eq!(windtrip(&["fieldmap", "--plane", "q=1"]).status.code(), Some(2));
    assert!(!windtrip(&["launch"]).status.success());
}
