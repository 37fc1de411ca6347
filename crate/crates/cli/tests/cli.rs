use std::process::{Command, Output};

fn rkpos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkpos"))
        .args(args)
        .env("RKPOS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn reproduce_targets_match() {
    for id in ["erk22-table", "caseII-figure", "rk4-negative", "heat-table"] {
        let out = rkpos(&["--format", "csv", "reproduce", id]);
        assert!(out.status.success(), "{id}: {}", stdout(&out));
        assert!(!stdout(&out).contains("mismatch"));
    }
}

#[test]
fn polys_csv_prints_erk22() {
    let out = rkpos(&["--format", "csv", "polys", "--method", "erk22:1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("i,poly\n"));
    assert!(text.contains("2,\"(1/2)·ξ[1,-1]·ξ[2,0]\""));
    let relabeled = stdout(&rkpos(&["--format", "csv", "polys", "--method", "erk22:1", "--relabel"]));
    assert!(relabeled.contains("2,\"(1/2)·x_1·x_3\""));
}

#[test]
fn gamma_json_certificate() {
    let out = rkpos(&["gamma", "--method", "erk22:3/2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["certificate"]["exact"], "2/3");
}

#[test]
fn adversary_reports_negative_value() {
    let out = rkpos(&["adversary", "--method", "erk22:1", "--delta", "11/10"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["negative_locus"]["value"], "-11/200");
    let out = rkpos(&["adversary", "--construction", "rk4", "--eps", "2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["u1"][3], "-2/3");
}

#[test]
fn adversary_rejects_positive_delta() {
    let out = rkpos(&["adversary", "--method", "erk22:1", "--delta", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let args = ["simulate", "--method", "erk22:1", "--cfl-fraction", "1", "--steps", "5", "--n", "16", "--dx", "1/16"];
    let a = rkpos(&args);
    let b = rkpos(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert!(last["first_violation"].is_null());
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn ssp_and_rphi() {
    let out = rkpos(&["--format", "csv", "ssp", "--method", "erk33c2:9/16"]);
    assert_eq!(stdout(&out), "exact,lo,hi\n3/4,3/4,3/4\n");
    let out = rkpos(&["--format", "csv", "rphi", "--method", "erk22:1"]);
    assert_eq!(stdout(&out), "exact,lo,hi\n1,1,1\n");
}

#[test]
fn unknown_method_fails() {
    let out = rkpos(&["gamma", "--method", "erk99:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
