use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use orsearch_cli::manifest::Manifest;

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/golden")
}

fn orsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orsearch"))
        .args(args)
        .env_remove("OR_RANK_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir`, relative path to contents, with the manifest's
/// wall time zeroed.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&path).unwrap();
            if rel.ends_with("manifest.json") {
                let mut m = Manifest::read(&path).unwrap();
                m.wall_time_ms = 0;
                bytes = serde_json::to_vec(&m).unwrap();
            }
            out.push((rel, bytes));
        }
    }
    out.sort();
    out
}

#[test]
fn golden_fixture_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let ranked = t.join("ranked_out");
    let out = orsearch(&["rank", "--data", p(&golden()), "--out", p(&ranked)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ranked.join("manifest.json").is_file());
    assert!(ranked.join("ranked/q1.tsv").is_file());
    assert!(ranked.join("ranked/n1.tsv").is_file());
    let q1 = fs::read_to_string(ranked.join("ranked/q1.tsv")).unwrap();
    let order: Vec<&str> = q1.lines().map(|l| l.split('\t').nth(2).unwrap()).collect();
    // the occluded positive and the probe's look-alike neighbor are pushed down
    assert_eq!(order, ["g1", "x2", "g3", "x1", "g2", "g4"]);

    let report = t.join("search.txt");
    let out = orsearch(&[
        "eval-search",
        "--data",
        p(&golden()),
        "--ranked",
        p(&ranked),
        "--out",
        p(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("map\t0.766666667\n"), "{text}");
    assert!(t.join("search.txt.manifest.json").is_file());

    let det = t.join("det.txt");
    assert!(orsearch(&["eval-det", "--data", p(&golden()), "--out", p(&det)])
        .status
        .success());
    assert!(fs::read_to_string(&det).unwrap().contains("recall\t1\n"));

    let ab = t.join("ablate");
    let out = orsearch(&["ablate", "--data", p(&golden()), "--seeds", "1..2", "--out", p(&ab)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "summary.tsv",
        "runs.tsv",
        "consistency.tsv",
        "manifest.json",
        "reports/or_gfull_s2.txt",
    ] {
        assert!(ab.join(f).is_file(), "{f}");
    }
    let summary = fs::read_to_string(ab.join("summary.tsv")).unwrap();
    let rows: Vec<&str> = summary.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(rows, ["method", "baseline", "+R", "+O", "+OR"]);

    let st = t.join("stats");
    assert!(orsearch(&[
        "stats",
        "--data",
        p(&golden()),
        "--bins",
        "10",
        "--csv",
        "--out",
        p(&st)
    ])
    .status
    .success());
    for f in [
        "histograms.tsv",
        "histograms.csv",
        "summary.tsv",
        "census.tsv",
        "manifest.json",
    ] {
        assert!(st.join(f).is_file(), "{f}");
    }

    let cfg = t.join("cfg.json");
    fs::write(&cfg, r#"{"num_identities": 12, "embedding_dim": 8}"#).unwrap();
    let ds = t.join("synth");
    assert!(orsearch(&["synth", "--config", p(&cfg), "--out", p(&ds)])
        .status
        .success());
    for f in [
        "embeddings.bin",
        "items.jsonl",
        "frames.jsonl",
        "probes.jsonl",
        "manifest.json",
    ] {
        assert!(ds.join(f).is_file(), "{f}");
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    for args in [
        &["rank", "--data", "x"][..],
        &["eval-search", "--data", "x", "--out", "y"],
        &["eval-det", "--out", "y"],
        &["ablate", "--data", "x"],
        &["stats", "--out", "y"],
        &["synth", "--out", "y"],
    ] {
        let out = orsearch(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"), "{args:?}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    // missing dataset directory
    assert_eq!(
        orsearch(&["rank", "--data", p(&t.join("none")), "--out", p(t)])
            .status
            .code(),
        Some(2)
    );
    // bad argument values
    let g = golden();
    assert_eq!(
        orsearch(&["rank", "--data", p(&g), "--out", p(t), "--top-k", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orsearch(&["rank", "--data", p(&g), "--out", p(t), "--threads", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orsearch(&["rank", "--data", p(&g), "--out", p(t), "--gallery-size", "99"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        orsearch(&["ablate", "--data", p(&g), "--out", p(t), "--seeds", "3..1"])
            .status
            .code(),
        Some(2)
    );

    // corrupt embedding file
    let bad = t.join("bad");
    fs::create_dir(&bad).unwrap();
    for f in ["items.jsonl", "frames.jsonl", "probes.jsonl", "embeddings.bin"] {
        fs::copy(g.join(f), bad.join(f)).unwrap();
    }
    let mut bytes = fs::read(bad.join("embeddings.bin")).unwrap();
    bytes[0] = b'X';
    fs::write(bad.join("embeddings.bin"), bytes).unwrap();
    let out = orsearch(&["rank", "--data", p(&bad), "--out", p(&t.join("o"))]);
    assert_eq!(out.status.code(), Some(3));

    // malformed ranked list
    let lists = t.join("lists");
    fs::create_dir(&lists).unwrap();
    fs::write(lists.join("a.tsv"), "q1\t1\tg1\tnot-a-number\t1\t1\t1\t0\t0\n").unwrap();
    let out = orsearch(&[
        "eval-search",
        "--data",
        p(&g),
        "--ranked",
        p(&lists),
        "--out",
        p(&t.join("r.txt")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reruns_are_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let cfg = t.join("cfg.json");
    fs::write(&cfg, r#"{"num_identities": 60, "embedding_dim": 16, "seed": 4}"#).unwrap();
    let ds = t.join("ds");
    assert!(orsearch(&["synth", "--config", p(&cfg), "--out", p(&ds)])
        .status
        .success());

    let run = |name: &str, threads: &str| -> Vec<(String, Vec<u8>)> {
        let out = t.join(name);
        let r = orsearch(&[
            "rank",
            "--data",
            p(&ds),
            "--gallery-size",
            "120",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            p(&out),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let report = out.join("eval.txt");
        let r = orsearch(&[
            "eval-search",
            "--data",
            p(&ds),
            "--ranked",
            p(&out),
            "--threads",
            threads,
            "--out",
            p(&report),
        ]);
        assert!(r.status.success());
        snapshot(&out)
    };
    let first = run("a", "1");
    assert!(first.len() > 60);
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "4"));
}

#[test]
fn threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_orsearch"))
        .args(["rank", "--data", p(&golden()), "--out", p(tmp.path())])
        .env("OR_RANK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--threads"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(orsearch(&["--help"]).status.code(), Some(0));
    assert_eq!(orsearch(&["rank", "--help"]).status.code(), Some(0));
}
