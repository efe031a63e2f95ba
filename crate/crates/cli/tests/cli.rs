use std::path::Path;
use std::process::{Command, Output};

fn fairlog(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairlog"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn hoeffding_prints_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairlog(&["hoeffding"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("185"));
    assert!(out.contains("184.44"));
}

#[test]
fn infer_on_the_loan_program() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("loan.pl"),
        "poor_neighborhood(mary).\ncan_pay_loan(mary).\ncan_pay_loan(john).\n\
         0.1 :: neg_bias(A) :- poor_neighborhood(A).\n\
         gets_loan(A) :- can_pay_loan(A), \\+neg_bias(A).\n\
         query(gets_loan(mary)).\nquery(gets_loan(john)).\n",
    )
    .unwrap();
    let o = fairlog(&["infer", "--program", "loan.pl"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let probs: Vec<(String, f64)> = stdout(&o)
        .lines()
        .map(|l| {
            let (q, p) = l.split_once('\t').unwrap();
            (q.to_string(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(probs.len(), 2);
    assert_eq!(probs[0].0, "gets_loan(mary)");
    assert!((probs[0].1 - 0.9).abs() < 1e-12);
    assert!((probs[1].1 - 1.0).abs() < 1e-12);

    let o = fairlog(&["infer", "--program", "loan.pl", "--query", "gets_loan(bob)"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "gets_loan(bob)\t0");
}

#[test]
fn generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["gen", "--out", out, "--rows", "300", "--seed", "4", "--beta", "0.2"];
    assert!(fairlog(&args("a.csv"), dir.path()).status.success());
    assert!(fairlog(&args("b.csv"), dir.path()).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(dir.path().join("a.csv.json").exists());
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
    assert_eq!(header, "a,r,q1,q2,q3,y,r_t,q1_t,q2_t,q3_t,y_t");
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(fairlog(&["gen", "--out", "d.csv", "--rows", "600", "--beta", "0.3"], p).status.success());
    std::fs::write(p.join("train.json"), r#"{"hidden": [8], "epochs": 3}"#).unwrap();
    for method in ["debias", "lower", "error_parity"] {
        let o = fairlog(
            &["train", "--data", "d.csv", "--method", method, "--config", "train.json", "--out", "m.json"],
            p,
        );
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let o = fairlog(&["eval", "--checkpoint", "m.json", "--data", "d.csv"], p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(report["n"], 600);
        let acc = report["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn bad_usage_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fairlog(&["nonsense"], dir.path()).status.code(), Some(1));
    assert_eq!(fairlog(&["gen"], dir.path()).status.code(), Some(1));
    let o = fairlog(&["train", "--data", "missing.csv", "--method", "bogus", "--out", "m.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fairlog(&["infer", "--program", "missing.pl"], dir.path()).status.code(), Some(1));
}
