use std::fs;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_percept-mc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CHAIN: &str = "dtmc
module m
  s : [0..2] init 0;
  [] s=0 -> 1/5: (s'=1) + 4/5: (s'=2);
  [] s>0 -> true;
endmodule
";

#[test]
fn help_exits_zero() {
    for sub in ["", "abstract", "emit", "check", "param", "ci", "simulate", "casestudy"] {
        let args: Vec<&str> = [sub, "--help"].into_iter().filter(|a| !a.is_empty()).collect();
        let o = bin(&args);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["check"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn analysis_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pm");
    fs::write(&bad, "dtmc module m s:[0..1] init 0; [] s=0 -> (s'=); endmodule").unwrap();
    let o = bin(&["check", bad.to_str().unwrap(), "P=? [ F s=1 ]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    let o = bin(&["check", dir.path().join("missing.pm").to_str().unwrap(), "P=? [ F s=1 ]"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn abstract_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    fs::write(&csv, "a,b\n3,1\n0,2\n").unwrap();
    let o = bin(&["abstract", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["labels"], serde_json::json!(["a", "b"]));
}

#[test]
fn check_and_simulate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.pm");
    fs::write(&model, CHAIN).unwrap();
    let props = dir.path().join("m.props");
    fs::write(&props, "P=? [ F s=1 ]\nP=? [ F s=2 ]\n").unwrap();
    let (m, p) = (model.to_str().unwrap(), props.to_str().unwrap());

    let o = bin(&["check", m, p]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",0.2"), "{}", lines[1]);
    assert!(lines[2].ends_with(",0.8"), "{}", lines[2]);

    let out = dir.path().join("sim.csv");
    let o = bin(&["simulate", m, p, "--trials", "20000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("sim.manifest.json").exists());
    let text = fs::read_to_string(&out).unwrap();
    let mean: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((mean - 0.2).abs() < 0.02, "{text}");
}

#[test]
fn ci_contains_point() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.pm");
    fs::write(&model, CHAIN).unwrap();
    let o = bin(&["ci", model.to_str().unwrap(), "P=? [ F s=1 ]"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert!(!rows.is_empty());
    for r in rows {
        let f = |name: &str| r[col(name)].parse::<f64>().unwrap();
        assert!(f("low") <= f("point") && f("point") <= f("high"), "{r:?}");
    }
}
