use std::path::Path;
use std::process::{Command, Output};

fn grace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grace"))
        .args(args)
        .current_dir(dir)
        .env_remove("GRACE_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// A temp dir holding `<kind>.csv`, `<kind>.toml` and a trained `model.json`.
fn workspace(kind: &str, rows: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = grace(
        d,
        &[
            "synth", "--kind", kind, "--rows", rows, "--seed", "1", "--out", ".",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = format!("{kind}.toml");
    let out = grace(
        d,
        &[
            "train",
            "--data",
            &manifest,
            "--seed",
            "2",
            "--out",
            "model.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("test_accuracy="));
    dir
}

#[test]
fn missing_manifest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = grace(
        dir.path(),
        &[
            "train",
            "--data",
            "nope.toml",
            "--seed",
            "1",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope.toml"));
}

#[test]
fn zero_k_is_rejected() {
    let dir = workspace("separable", "200");
    let out = grace(
        dir.path(),
        &[
            "explain",
            "--model",
            "model.json",
            "--data",
            "separable.toml",
            "--row",
            "0",
            "--k",
            "0",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explain_prints_record_and_sentence_or_reports_no_flip() {
    let dir = workspace("cancer", "300");
    let mut explained = 0;
    for row in 0..30 {
        let row = row.to_string();
        let out = grace(
            dir.path(),
            &[
                "explain",
                "--model",
                "model.json",
                "--data",
                "cancer.toml",
                "--row",
                &row,
                "--k",
                "2",
                "--seed",
                "5",
            ],
        );
        let text = stdout(&out);
        match out.status.code() {
            Some(0) => {
                explained += 1;
                assert!(text.contains("\"success\": true"));
                assert!(
                    text.trim_end()
                        .lines()
                        .last()
                        .unwrap()
                        .contains("RATHER THAN"),
                    "{text}"
                );
            }
            Some(3) => assert!(text.contains("\"success\": false")),
            other => panic!("row {row}: exit {other:?}: {}", stderr(&out)),
        }
    }
    assert!(explained > 0);
}

#[test]
fn single_step_budget_can_leave_rows_unflipped() {
    let dir = workspace("diabetes", "400");
    let codes: Vec<Option<i32>> = (0..40)
        .map(|row| {
            let row = row.to_string();
            grace(
                dir.path(),
                &[
                    "explain",
                    "--model",
                    "model.json",
                    "--data",
                    "diabetes.toml",
                    "--row",
                    &row,
                    "--k",
                    "1",
                    "--steps",
                    "1",
                ],
            )
            .status
            .code()
        })
        .collect();
    assert!(
        codes.iter().all(|c| matches!(c, Some(0) | Some(3))),
        "{codes:?}"
    );
    assert!(codes.contains(&Some(3)), "{codes:?}");
}

#[test]
fn row_out_of_range_is_a_usage_error() {
    let dir = workspace("separable", "200");
    let out = grace(
        dir.path(),
        &[
            "explain",
            "--model",
            "model.json",
            "--data",
            "separable.toml",
            "--row",
            "5000",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn deepfool_reports_every_feature() {
    let dir = workspace("diabetes", "400");
    let out = grace(
        dir.path(),
        &[
            "evaluate",
            "--data",
            "diabetes.toml",
            "--model",
            "model.json",
            "--methods",
            "deepfool",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "avg_num_feats").unwrap();
    assert_eq!(row[col], "8.000000");
}

#[test]
fn k_sweep_writes_ten_rows() {
    let dir = workspace("separable", "200");
    let out = grace(
        dir.path(),
        &[
            "evaluate",
            "--data",
            "separable.toml",
            "--model",
            "model.json",
            "--methods",
            "grace-gradient",
            "--sweep",
            "k",
            "--out",
            "report.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let ks: Vec<&str> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(ks, ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10"]);
}

#[test]
fn degenerate_local_neighborhood_warns_on_stderr() {
    // The rare class is noise, so the trained network predicts the majority
    // everywhere and every local neighborhood holds a single predicted class.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("a,b,label\n");
    for i in 0..200 {
        let label = if i % 25 == 0 { "rare" } else { "common" };
        csv.push_str(&format!("{},{},{label}\n", (i * 37) % 100, (i * 53) % 17));
    }
    std::fs::write(d.join("skew.csv"), csv).unwrap();
    let out = grace(
        d,
        &[
            "train",
            "--data",
            "skew.csv",
            "--label",
            "label",
            "--seed",
            "1",
            "--out",
            "model.json",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let out = grace(
        d,
        &[
            "rank",
            "--model",
            "model.json",
            "--data",
            "skew.csv",
            "--label",
            "label",
            "--row",
            "1",
            "--mode",
            "local",
            "--su-out",
            "su.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("warning: local neighborhood covers a single predicted class"),
        "{}",
        stderr(&out)
    );
    assert!(stdout(&out).contains("\"gradient\""), "{}", stdout(&out));
    assert!(d.join("su.csv").exists());
}

#[test]
fn runs_with_a_fixed_model_are_rejected() {
    let dir = workspace("separable", "200");
    let out = grace(
        dir.path(),
        &[
            "evaluate",
            "--data",
            "separable.toml",
            "--model",
            "model.json",
            "--runs",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}
