use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use comment_update::corpus::{ingest, read_records_file};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/corpus.jsonl")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comment-update"))
        .args(args)
        .env_remove("COMMENT_UPDATE_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Filtered fixture corpus in a fresh directory.
fn kept(dir: &Path) -> PathBuf {
    let out = dir.join("kept.jsonl");
    ok(&["filter", "--input", p(&fixture()), "--output", p(&out)]);
    out
}

#[test]
fn degrees_example_apply_edits() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("degrees.jsonl");
    let line = std::fs::read_to_string(fixture())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(&corpus, line + "\n").unwrap();
    let edits = dir.path().join("edits.tsv");
    std::fs::write(&edits, "alpha-000\t<InsertOldKeepBefore> angle <InsertNewKeepBefore> angle in degrees <InsertEnd>\n")
        .unwrap();
    let out = ok(&["apply-edits", "--input", p(&corpus), "--edits", p(&edits)]);
    assert_eq!(out, "alpha-000\tdouble the roll euler angle in degrees .\n");
}

#[test]
fn encode_then_apply_reproduces_new_comments() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = kept(dir.path());
    let edits = dir.path().join("edits.tsv");
    ok(&["encode-edits", "--input", p(&corpus), "--output", p(&edits)]);
    let applied = ok(&["apply-edits", "--input", p(&corpus), "--edits", p(&edits)]);
    let want: String = ingest(read_records_file(&corpus).unwrap())
        .iter()
        .map(|e| format!("{}\t{}\n", e.id(), e.c_new.texts().join(" ")))
        .collect();
    assert_eq!(applied, want);
}

#[test]
fn evaluating_references_scores_full_exact_match() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = kept(dir.path());
    let edits = dir.path().join("edits.tsv");
    let refs = dir.path().join("refs.tsv");
    ok(&["encode-edits", "--input", p(&corpus), "--output", p(&edits)]);
    ok(&[
        "apply-edits",
        "--input",
        p(&corpus),
        "--edits",
        p(&edits),
        "--output",
        p(&refs),
    ]);
    let kv = ok(&[
        "evaluate",
        "--input",
        p(&corpus),
        "--predictions",
        p(&refs),
        "--format",
        "kv",
    ]);
    assert!(kv.contains("xmatch=100.000"), "{kv}");
    let table = ok(&[
        "evaluate",
        "--input",
        p(&corpus),
        "--predictions",
        p(&refs),
        "--metrics",
        "xmatch",
    ]);
    assert!(
        table.contains("xMatch") && table.contains("100.000"),
        "{table}"
    );
}

#[test]
fn copy_baseline_never_matches() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = kept(dir.path());
    let preds = dir.path().join("copy.tsv");
    ok(&[
        "baseline",
        "--name",
        "copy",
        "--input",
        p(&corpus),
        "--output",
        p(&preds),
    ]);
    let kv = ok(&[
        "evaluate",
        "--input",
        p(&corpus),
        "--predictions",
        p(&preds),
        "--format",
        "kv",
    ]);
    assert!(kv.contains("xmatch=0.000"), "{kv}");
}

#[test]
fn filter_reports_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "filter",
        "--input",
        p(&fixture()),
        "--output",
        p(&dir.path().join("k.jsonl")),
    ]);
    assert!(out.contains("kept=30"));
    assert!(out.contains("rejected_duplicate=1"));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = kept(dir.path());
    let (a, b) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    ok(&[
        "partition",
        "--input",
        p(&corpus),
        "--output",
        p(&a),
        "--seed",
        "5",
    ]);
    let out = Command::new(env!("CARGO_BIN_EXE_comment-update"))
        .args([
            "partition",
            "--input",
            p(&corpus),
            "--output",
            p(&b),
            "--seed",
            "0",
        ])
        .env("COMMENT_UPDATE_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn training_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = kept(d);
    let part = d.join("part.tsv");
    ok(&["partition", "--input", p(&corpus), "--output", p(&part)]);
    let config = d.join("model.cfg");
    std::fs::write(
        &config,
        "embedding_dim=8\nencoder_hidden=8\ndecoder_hidden=16\nmax_epochs=2\nvocab_min_count=1\n",
    )
    .unwrap();
    let mut runs = Vec::new();
    for k in 0..2 {
        let (ckpt, log, preds) = (
            d.join(format!("m{k}")),
            d.join(format!("log{k}")),
            d.join(format!("p{k}")),
        );
        ok(&[
            "train",
            "--config",
            p(&config),
            "--input",
            p(&corpus),
            "--partition",
            p(&part),
            "--output",
            p(&ckpt),
            "--log",
            p(&log),
        ]);
        ok(&[
            "predict",
            "--model",
            p(&ckpt),
            "--input",
            p(&corpus),
            "--partition",
            p(&part),
            "--split",
            "test",
            "--beam-width",
            "3",
            "--output",
            p(&preds),
        ]);
        let losses: Vec<String> = std::fs::read_to_string(&log)
            .unwrap()
            .lines()
            .map(|l| l.split(",\"seconds\"").next().unwrap().to_string())
            .collect();
        runs.push((
            losses,
            std::fs::read(&preds).unwrap(),
            std::fs::read(&ckpt).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].0.len(), 2);
}

#[test]
fn failures_print_one_error_line() {
    let out = run(&["stats", "--input", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));

    let out = run(&["baseline", "--name", "bogus", "--input", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: usage: "));
}

#[test]
fn edit_reranking_requires_generator() {
    let dir = tempfile::tempdir().unwrap();
    let beams = dir.path().join("beams.jsonl");
    std::fs::write(&beams, "").unwrap();
    let out = run(&[
        "rerank",
        "--mode",
        "edit",
        "--candidates",
        p(&beams),
        "--input",
        p(&fixture()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
