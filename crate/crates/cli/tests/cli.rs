use std::path::Path;
use std::process::{Command, Output};

use memetune::bench::read_json_lines;
use memetune::Algorithm;

fn memetune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memetune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_data_writes_libsvm_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.libsvm");
    ok(&memetune(&["gen-data", "--n", "50", "--seed", "3", "--output", p.to_str().unwrap()]));
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert!(text.lines().all(|l| l.starts_with("+1 ") || l.starts_with("-1 ")));

    let c = dir.path().join("b.csv");
    ok(&memetune(&["gen-data", "--n", "20", "--output", c.to_str().unwrap()]));
    assert_eq!(std::fs::read_to_string(&c).unwrap().lines().count(), 21);
}

#[test]
fn tune_reaches_zero_cv_error_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    ok(&memetune(&[
        "tune",
        "--synthetic",
        "banana:n=60,n_test=60,noise=0,seed=2",
        "--algorithm",
        "MA4",
        "--max-evals",
        "200",
        "--output",
        out.to_str().unwrap(),
    ]));
    let v = json(&out);
    assert_eq!(v["cv_fitness"], 0.0);
    assert_eq!(v["algorithm"], "MA4");
    assert!(v["evaluations"].as_u64().unwrap() <= 200);
    let c = v["best_c"].as_f64().unwrap();
    assert!((c.log2() - v["log2_c"].as_f64().unwrap()).abs() < 1e-9);
    assert!(v["test_error"].as_f64().unwrap() <= 0.05);
}

#[test]
fn tune_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        ok(&memetune(&[
            "tune",
            "--synthetic",
            "banana:n=50,noise=0.3,seed=5",
            "--algorithm",
            "MA2",
            "--seed",
            "9",
            "--max-evals",
            "80",
            "--output",
            p.to_str().unwrap(),
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn tune_reads_files_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let lib = dir.path().join("train.libsvm");
    ok(&memetune(&["gen-data", "--n", "40", "--noise", "0.1", "--output", lib.to_str().unwrap()]));
    let out = dir.path().join("r.json");
    ok(&memetune(&[
        "tune",
        "--data",
        lib.to_str().unwrap(),
        "--algorithm",
        "pso",
        "--max-evals",
        "30",
        "--output",
        out.to_str().unwrap(),
    ]));
    assert_eq!(json(&out)["algorithm"], "PSO");

    // label in the last column, with a header row
    let csv = dir.path().join("train.csv");
    let mut text = String::from("x1,x2,y\n");
    for i in 0..20 {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        text.push_str(&format!("{},{},{}\n", s * (1.0 + i as f64 / 10.0), 0.5 * i as f64, s));
    }
    std::fs::write(&csv, text).unwrap();
    ok(&memetune(&[
        "tune",
        "--data",
        csv.to_str().unwrap(),
        "--label-column",
        "2",
        "--max-evals",
        "30",
        "--output",
        out.to_str().unwrap(),
    ]));
    assert_eq!(json(&out)["cv_fitness"], 0.0);
}

#[test]
fn grid_counts_lattice_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    ok(&memetune(&[
        "grid",
        "--synthetic",
        "banana:n=40,seed=1",
        "--step",
        "5",
        "--output",
        out.to_str().unwrap(),
    ]));
    let v = json(&out);
    assert_eq!(v["evaluations"], 25);
    assert_eq!(v["algorithm"], "GS");
    let out2 = dir.path().join("g2.json");
    let o = memetune(&["grid", "--synthetic", "banana:n=40", "--step", "0.3", "--output", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn benchmark_writes_one_line_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let o = memetune(&[
        "benchmark",
        "--synthetic",
        "banana:n=40,n_test=100,seed=4",
        "--algorithms",
        "PSO,MA4",
        "--seeds",
        "0..3",
        "--max-evals",
        "45",
        "--output",
        out.to_str().unwrap(),
    ]);
    ok(&o);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("MA4") && stdout.contains("±"), "{stdout}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 6);
    let report = read_json_lines(text.as_bytes()).unwrap();
    assert_eq!(report.rows.len(), 6);
    let pso = report.aggregate(Algorithm::Pso).unwrap();
    let mean = report
        .rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::Pso)
        .map(|r| r.test_error)
        .sum::<f64>()
        / 3.0;
    assert!((pso.mean_test_error - mean).abs() < 1e-12);

    let csv = dir.path().join("report.csv");
    ok(&memetune(&[
        "benchmark",
        "--synthetic",
        "banana:n=40,n_test=100,seed=4",
        "--algorithms",
        "MA3",
        "--seeds",
        "7",
        "--max-evals",
        "30",
        "--output",
        csv.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("algorithm,seed,best_c,best_gamma,cv_fitness,test_error,evaluations,wall_ms"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "synthetic = \"banana:n=40,seed=8\"\nalgorithm = \"MA1\"\nmax_evals = 100\nseed = 4\n\n[pattern]\nmax_polls = 3\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    ok(&memetune(&[
        "tune",
        "--config",
        cfg.to_str().unwrap(),
        "--max-evals",
        "40",
        "--output",
        out.to_str().unwrap(),
    ]));
    let v = json(&out);
    assert_eq!(v["algorithm"], "MA1");
    assert_eq!(v["seed"], 4);
    assert!(v["evaluations"].as_u64().unwrap() <= 40);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "max_evalz = 3\n").unwrap();
    let o = memetune(&["tune", "--config", bad.to_str().unwrap(), "--synthetic", "banana"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let o = memetune(&["tune", "--synthetic", "banana:n=30", "--algorithm", "MA9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MA9"));

    let o = memetune(&["tune", "--data", "/nonexistent/train.libsvm"]);
    assert_eq!(o.status.code(), Some(2));

    let o = memetune(&["tune"]);
    assert_eq!(o.status.code(), Some(2));

    let o = memetune(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = memetune(&["tune", "--synthetic", "banana:n=30", "--lower", "5,5", "--upper", "1,1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = memetune(&[
        "tune",
        "--synthetic",
        "banana:n=30",
        "--max-evals",
        "20",
        "--output",
        "/nonexistent/dir/out.json",
    ]);
    assert_eq!(o.status.code(), Some(3));

    let o = memetune(&[
        "benchmark",
        "--synthetic",
        "banana:n=30",
        "--algorithms",
        "PSO",
        "--seeds",
        "0",
        "--output",
        "/nonexistent/dir/r.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(3));
}
