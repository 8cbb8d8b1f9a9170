//! End-to-end tests of the `kann` binary: spawn the real executable,
//! check exit codes, outputs, and that written files read back clean.

use std::process::{Command, Output};

use kann::datasets::{read_dataset, read_pairs, verify_planted, PlantedData, PlantedSpec};
use kann_cli::record::{write_records, RecordContext};

fn kann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kann"))
        .args(args)
        .output()
        .expect("the kann binary should spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_planted_writes_verifiable_files() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("inst");
    let prefix = prefix.to_str().unwrap();
    let out = kann(&[
        "gen", "planted", "--n", "400", "--d", "12", "--queries", "20", "--eps", "0.5", "--R",
        "1.5", "--seed", "7", "--out", prefix,
    ]);
    assert!(out.status.success(), "gen failed: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("verification scan passed"));

    let points = read_dataset(format!("{prefix}.x.bin")).unwrap();
    let queries = read_dataset(format!("{prefix}.q.bin")).unwrap();
    let pairs = read_pairs(format!("{prefix}.pairs.csv")).unwrap();
    assert_eq!((points.n(), points.dim()), (400, 12));
    assert_eq!((queries.n(), queries.dim()), (20, 12));
    assert_eq!(pairs.len(), 20);

    // The files round-trip into an instance that passes the full scan.
    let data = PlantedData {
        points,
        queries,
        pairs,
    };
    let spec = PlantedSpec::new(400, 20, 12, 0.5, 1.5, 7);
    verify_planted(&data, &spec).unwrap();
}

#[test]
fn gen_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    for (prefix, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        let out = kann(&[
            "gen", "planted", "--n", "200", "--d", "8", "--queries", "10", "--eps", "0.5",
            "--seed", seed, "--out", &p(prefix),
        ]);
        assert!(out.status.success(), "gen failed: {}", stderr_of(&out));
    }
    let bytes = |prefix: &str| std::fs::read(p(&format!("{prefix}.x.bin"))).unwrap();
    assert_eq!(bytes("a"), bytes("b"), "same seed must give identical files");
    assert_ne!(bytes("a"), bytes("c"), "different seeds must differ");
}

#[test]
fn verify_quick_passes_and_fault_injection_fails() {
    let out = kann(&["verify", "--quick"]);
    assert!(out.status.success(), "verify failed: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert_eq!(text.matches("[PASS]").count(), 6, "output was: {text}");
    assert!(text.contains("all 6 checks passed"));

    let out = kann(&["verify", "--quick", "--inject-fault"]);
    assert!(
        !out.status.success(),
        "fault injection must make verify exit nonzero"
    );
    let text = stdout_of(&out);
    assert!(
        text.contains("[FAIL] visit-contract-audit"),
        "output was: {text}"
    );
}

#[test]
fn fit_recovers_an_exact_power_law_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    let records: Vec<_> = [1000usize, 2000, 4000, 8000]
        .iter()
        .map(|&n| {
            let ctx = RecordContext {
                experiment: "exp-k-planted".into(),
                n,
                d: 200,
                d_prime: 5,
                k: 0,
                epsilon: 0.5,
                delta: 0.0,
                seed: 1,
            };
            ctx.record("k_avg", 4.0 * (n as f64).sqrt())
        })
        .collect();
    write_records(&path, &records).unwrap();
    let out = kann(&[
        "fit",
        "--records",
        path.to_str().unwrap(),
        "--experiment",
        "exp-k-planted",
        "--min-n",
        "1000",
    ]);
    assert!(out.status.success(), "fit failed: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("4.0000 * n^0.5000"),
        "fit output was: {text}"
    );
}

#[test]
fn exp_k_file_mode_requires_the_pairs_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("inst");
    let prefix = prefix.to_str().unwrap();
    let out = kann(&[
        "gen", "planted", "--n", "200", "--d", "8", "--queries", "10", "--eps", "0.5", "--seed",
        "2", "--out", prefix,
    ]);
    assert!(out.status.success(), "gen failed: {}", stderr_of(&out));
    let records = dir.path().join("records.csv");
    let out = kann(&[
        "exp-k",
        "--family",
        "planted",
        "--data",
        &format!("{prefix}.x.bin"),
        "--queries-file",
        &format!("{prefix}.q.bin"),
        "--eps",
        "0.5",
        "--out",
        records.to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "exp-k must fail without the sidecar");
    assert!(
        stderr_of(&out).contains("pairs sidecar"),
        "stderr was: {}",
        stderr_of(&out)
    );
}

#[test]
fn query_with_isometric_projection_answers_every_planted_query() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("inst");
    let prefix = prefix.to_str().unwrap();
    let out = kann(&[
        "gen", "planted", "--n", "400", "--d", "12", "--queries", "20", "--eps", "0.5", "--R",
        "1.5", "--seed", "7", "--out", prefix,
    ]);
    assert!(out.status.success(), "gen failed: {}", stderr_of(&out));
    // An orthonormal square projection is an isometry, so the planted
    // point (the unique point within the margin) is always returned.
    let answers = dir.path().join("answers.csv");
    let out = kann(&[
        "query",
        "--data",
        &format!("{prefix}.x.bin"),
        "--queries-file",
        &format!("{prefix}.q.bin"),
        "--pairs",
        &format!("{prefix}.pairs.csv"),
        "--eps",
        "0.5",
        "--dprime",
        "12",
        "--mode",
        "orthonormal",
        "--seed",
        "3",
        "--out",
        answers.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "query failed: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("= 1.000"), "query output was: {text}");
    let written = read_pairs(&answers).unwrap();
    let expected = read_pairs(format!("{prefix}.pairs.csv")).unwrap();
    assert_eq!(written.len(), 20);
    for (a, e) in written.iter().zip(&expected) {
        assert_eq!(a.point, e.point, "query {} returned the wrong point", a.query);
    }
}

#[test]
fn build_rejects_a_malformed_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.bin");
    std::fs::write(&path, b"NOPE not a dataset").unwrap();
    let out = kann(&[
        "build",
        "--data",
        path.to_str().unwrap(),
        "--eps",
        "0.5",
    ]);
    assert!(!out.status.success(), "build must reject garbage input");
    assert!(!stderr_of(&out).is_empty());
}
