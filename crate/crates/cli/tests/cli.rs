use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polycert-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn polycert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycert"))
        .args(args)
        .env_remove("POLYCERT_SEED")
        .output()
        .expect("binary runs")
}

fn toy(cmd: &str, extra: &[&str]) -> Output {
    let model = fixture("toy.json");
    let input = fixture("toy_input.json");
    let mut args = vec![
        cmd,
        "--model",
        model.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    polycert(&args)
}

#[test]
fn point_region_certifies_with_exit_zero() {
    for method in ["lp", "opt"] {
        let out = toy("certify", &["--eps", "0", "--method", method]);
        assert_eq!(out.status.code(), Some(0), "{method}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"status\":\"certified\""));
        assert!(text.lines().last().unwrap().starts_with("{\"summary\""));
    }
}

#[test]
fn toy_lp_fails_and_opt_certifies() {
    let lp = toy(
        "certify",
        &["--eps", "1.2", "--method", "lp", "--seed", "1"],
    );
    assert_eq!(lp.status.code(), Some(1));
    let opt = toy(
        "certify",
        &["--eps", "1.2", "--method", "opt", "--seed", "1"],
    );
    assert_eq!(opt.status.code(), Some(0));
}

#[test]
fn errors_exit_two() {
    let missing = polycert(&[
        "certify",
        "--model",
        "/no/such/model.json",
        "--input",
        "/no/such/input.json",
        "--eps",
        "0.1",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/no/such/model.json"));

    let bad = scratch("bad_model.json");
    std::fs::write(
        &bad,
        r#"{"format": "something-else/9", "input_dim": 1, "frames": 1, "layers": []}"#,
    )
    .unwrap();
    let input = fixture("toy_input.json");
    let out = polycert(&[
        "certify",
        "--model",
        bad.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--eps",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Mismatched input length is reported per example and fails the run.
    let wrong = scratch("wrong_input.json");
    std::fs::write(
        &wrong,
        r#"{"format": "polycert-input/1", "examples": [{"data": [0.0, 1.0]}]}"#,
    )
    .unwrap();
    let model = fixture("toy.json");
    let out = polycert(&[
        "certify",
        "--model",
        model.to_str().unwrap(),
        "--input",
        wrong.to_str().unwrap(),
        "--eps",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("\"status\":\"error\""));

    // Both radius flags at once is a usage error.
    assert_eq!(
        toy("certify", &["--eps", "0.1", "--db", "-20"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn identical_runs_write_identical_reports() {
    let a = scratch("run_a.jsonl");
    let b = scratch("run_b.jsonl");
    for path in [&a, &b] {
        let out = toy(
            "certify",
            &[
                "--eps",
                "1.2",
                "--seed",
                "7",
                "--report",
                path.to_str().unwrap(),
            ],
        );
        assert!(out.status.code().is_some_and(|c| c < 2));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let model = fixture("toy.json");
    let input = fixture("toy_input.json");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_polycert"));
        c.args(["certify", "--method", "lp", "--eps", "1.2", "--model"])
            .arg(&model)
            .arg("--input")
            .arg(&input)
            .env_remove("POLYCERT_SEED");
        if let Some(s) = env {
            c.env("POLYCERT_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        c.output().unwrap().stdout
    };
    assert_eq!(run(Some("3"), None), run(None, Some("3")));
    assert_ne!(run(Some("3"), None), run(None, Some("4")));
}

#[test]
fn csv_export_and_timing() {
    let csv = scratch("toy.csv");
    let out = toy(
        "certify",
        &["--eps", "0.5", "--timing", "--csv", csv.to_str().unwrap()],
    );
    assert!(String::from_utf8(out.stdout).unwrap().contains("time_ms"));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("index,label,predicted,method,status"));
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn max_eps_reports_transcript() {
    let out = toy(
        "max-eps",
        &["--method", "lp", "--hi", "3.0", "--tol", "0.01"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.contains("\"max_eps\"") && first.contains("\"probes\""));
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn falsify_finds_flip_only_in_large_regions() {
    let small = toy("falsify", &["--eps", "0.0"]);
    assert_eq!(small.status.code(), Some(0));
    let large = toy("falsify", &["--eps", "5.0"]);
    assert_eq!(large.status.code(), Some(1));
    assert!(String::from_utf8(large.stdout)
        .unwrap()
        .contains("counterexample"));
}

#[test]
fn bench_reports_both_methods() {
    let out = toy("bench", &["--eps", "1.2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"method\":\"lp\"") && text.contains("\"method\":\"opt\""));
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("{\"summary\""))
            .count(),
        2
    );
}

#[test]
fn raw_input_with_header() {
    let data = scratch("toy.f32");
    std::fs::write(&data, 0.0f32.to_le_bytes()).unwrap();
    let header = scratch("toy.hdr.json");
    std::fs::write(
        &header,
        r#"{"format": "polycert-raw/1", "data_file": "toy.f32", "example_len": 1, "labels": [1]}"#,
    )
    .unwrap();
    let model = fixture("toy.json");
    let out = polycert(&[
        "certify",
        "--model",
        model.to_str().unwrap(),
        "--input",
        header.to_str().unwrap(),
        "--eps",
        "0.0",
    ]);
    assert_eq!(out.status.code(), Some(0));
}
