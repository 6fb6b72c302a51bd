use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_reports_all_three_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{"m": [[1,2],[2,1]], "q": [-1,-1]}"#);
    let o = lcp(&["solve", "-m", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["solutions"].as_array().unwrap().len(), 3);

    let o = lcp(&["solve", "-m", p.to_str().unwrap(), "--format", "csv"]);
    let text = stdout(&o);
    assert!(text.starts_with("kind,x1,x2,z1,z2,w1,w2\n"));
    assert!(text.contains("point,-0.333333333333,-0.333333333333,"));
}

#[test]
fn solve_q_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "m.json", r#"{"m": [[1,2],[2,1]]}"#);
    let o = lcp(&["solve", "-m", p.to_str().unwrap(), "--q", "1,1"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["solutions"].as_array().unwrap().len(), 1);
}

#[test]
fn no_solution_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "e.json", r#"{"m": [[-1]], "q": [-1]}"#);
    assert_eq!(lcp(&["solve", "-m", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"m": [[1,2],[2]], "q": [1,1]}"#);
    let o = lcp(&["solve", "-m", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    assert_eq!(lcp(&["solve"]).status.code(), Some(1));
    assert_eq!(lcp(&["--tol", "-1", "normal-forms"]).status.code(), Some(1));
}

#[test]
fn trace_csv_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"m": [[1,2],[2,1]]}"#);
    let m = m.to_str().unwrap();
    let o = lcp(&["trace", "-m", m, "--path", "(-4,0);(0,-4)", "--samples", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("branch,l,x1,x2\n0,0,-4,8\n"));
    assert_eq!(text.lines().count(), 10);

    let out = dir.path().join("diag.csv");
    let o = lcp(&[
        "trace",
        "-m",
        m,
        "--path",
        "(-4,0);(0,-4)",
        "--samples",
        "3",
        "--split",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for k in 1..=3 {
        let body = fs::read_to_string(dir.path().join(format!("diag_{k}.csv"))).unwrap();
        assert!(body.starts_with("l,x1,x2\n"));
    }
    assert!(!dir.path().join("diag_4.csv").exists());
}

#[test]
fn trace_json_lists_events() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"m": [[1,2],[2,1]]}"#);
    let o = lcp(&[
        "trace",
        "-m",
        m.to_str().unwrap(),
        "--path",
        "(-4,0);(0,-4)",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.to_string().matches("count-change").count() >= 2);
}

#[test]
fn equiv_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let n = write(dir.path(), "n.json", r#"{"m": [[1,2],[2,1]]}"#);
    let k = write(dir.path(), "k.json", r#"{"m": [[1,0],[0,1]]}"#);
    let o = lcp(&["equiv", "--a", n.to_str().unwrap(), "--b", n.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("equivalent"));
    let o = lcp(&["equiv", "--a", n.to_str().unwrap(), "--b", k.to_str().unwrap()]);
    assert!(stdout(&o).starts_with("not-equivalent"));
    let o = lcp(&[
        "equiv",
        "--a",
        n.to_str().unwrap(),
        "--b",
        k.to_str().unwrap(),
        "--method",
        "nope",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn normal_forms_table() {
    let o = lcp(&["normal-forms"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,delta,m11,m12,m21,m22,stability,class"));
    assert_eq!(lines.count(), 52);
}
