use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpzlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn rate_row() {
    let o = run(&["rate", "--y", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,phi,chernoff,crossover"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[0], 1.0);
    assert!((row[1] - 1.333333).abs() < 1e-6);
    assert!((row[2] + 1.333333).abs() < 1e-6);
    assert!((row[3] + 0.916667).abs() < 1e-6);
}

#[test]
fn ranges_expand_inclusively() {
    let o = run(&["rate", "--y", "0.5:2:0.5"]);
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn output_is_deterministic() {
    let args = ["laplace", "--s", "0.5,2", "--t", "1", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["metadata"]["node_count"], 300);
    assert!(v["metadata"].get("timestamp").is_none());
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let det = v["rows"][0]["det"].as_f64().unwrap();
    assert!(det > 0.0 && det < 1.0);
}

#[test]
fn timestamp_is_opt_in() {
    let o = run(&["rate", "--format", "json", "--timestamp"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["metadata"]["timestamp"].is_u64());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["rate", "--y", "2:1:0.5"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--y", "0:1:0"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--y", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["nosuch"]).status.code(), Some(2));
    assert_eq!(run(&["moment", "--p", "9"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--suite", "12"]).status.code(), Some(2));
}

#[test]
fn bounds_table() {
    let o = run(&["bounds"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("name,point,lhs,rhs,constant,pass\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(text.contains("airy_laplace_partial,q=0.5;t=1;y="));
}

#[test]
fn writes_to_file() {
    let dir = std::env::temp_dir().join(format!("kpzlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rate.csv");
    let o = run(&["rate", "--y", "0.5", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("y,phi,chernoff,crossover\n"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn verify_subset_reports_table() {
    let o = run(&["verify", "--suite", "10,11"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("criterion,title,result,passed,required,failing\n"));
    assert!(text.contains("10,nonuniqueness,PASS"));
    assert!(text.contains("11,Tracy-Widom crossover,PASS"));
}
