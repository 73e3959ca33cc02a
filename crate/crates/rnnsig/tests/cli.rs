use std::path::Path;
use std::process::{Command, Output};

fn rnnsig(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnnsig"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn bounds_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = rnnsig(dir.path(), &["bounds", "--kind", "sequential", "--set", "n=200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("bounds_sequential.csv")).unwrap();
    assert!(text.starts_with("name,value"));
    assert!(text.contains("total,"));
}

#[test]
fn invalid_settings_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = rnnsig(dir.path(), &["euler-gap", "--set", "atol=-1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = rnnsig(dir.path(), &["bounds", "--set", "l=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = rnnsig(dir.path(), &["bounds", "--kind", "ternary"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn radius_violation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = rnnsig(dir.path(), &["bounds", "--set", "k_w=1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sig_check_reads_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("path.csv");
    std::fs::write(&input, "x1,x2\n0.0,0.0\n1.0,0.0\n1.0,1.0\n").unwrap();
    let o = rnnsig(dir.path(), &["sig-check", input.to_str().unwrap(), "--depth", "2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    // level 2 of an L-shaped path: 2! S^{12} = 2, S^{21} = 0
    assert!(text.contains("2,1,2.0"), "{text}");
    assert!(text.contains("2,2,0.0"), "{text}");
}

#[test]
fn small_euler_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = rnnsig(dir.path(), &["euler-gap", "--runs", "2", "--steps", "8,16"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("euler_gap.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
}
