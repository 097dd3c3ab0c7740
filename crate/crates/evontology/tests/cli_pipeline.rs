use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evontology"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn evontology")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn hash_of(stdout: &str) -> &str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("ontology "))
        .expect("every run prints the ontology hash")
}

const OUTPUTS: [&str; 16] = [
    "o1.json",
    "o1.json.links.tsv",
    "o2.json",
    "o2.json.links.tsv",
    "rr.json",
    "w.txt",
    "train.features.txt",
    "train.labels.tsv",
    "test.features.txt",
    "test.labels.tsv",
    "train.sub.txt",
    "model.json",
    "model.json.trace.csv",
    "pred.txt",
    "report.txt",
    "report.txt.csv",
];

/// build → disambiguate → reduce → weights → synth → encode → train → infer
/// → eval, with the model on the reduced ontology and metrics on the full one.
fn pipeline(dir: &Path) {
    let (t, s, l) = (fixture("triples.tsv"), fixture("seeds.tsv"), fixture("labels.tsv"));
    let (t, s, l) = (t.to_str().unwrap(), s.to_str().unwrap(), l.to_str().unwrap());
    let out = ok(dir, &["build", "--triples", t, "--seeds", s, "--labels", l, "--out", "o1.json"]);
    assert!(out.contains("nodes 8 leaves 4"), "{out}");
    ok(dir, &["disambiguate", "--ont", "o1.json", "--triples", t, "--min-events", "3", "--out", "o2.json"]);
    let out = ok(dir, &["reduce", "--ont", "o2.json", "--out", "rr.json"]);
    assert!(out.contains("7 → 5 nodes"), "{out}");
    let rr_hash = hash_of(&out).to_string();
    let out = ok(dir, &["weights", "--ont", "rr.json", "--scheme", "distance", "--out", "w.txt"]);
    assert_eq!(hash_of(&out), rr_hash);
    ok(dir, &["synth", "--ont", "o2.json", "--per-leaf", "40", "--seed", "1", "--out", "train"]);
    ok(dir, &["synth", "--ont", "o2.json", "--per-leaf", "20", "--seed", "2", "--out", "test"]);
    ok(dir, &["encode", "--ont", "rr.json", "--labels", "train.labels.tsv", "--kind", "subgraph", "--out", "train.sub.txt"]);
    ok(
        dir,
        &[
            "train", "--ont", "rr.json", "--features", "train.features.txt", "--targets", "train.sub.txt", "--loss", "c+cos",
            "--weights", "w.txt", "--iters", "300", "--seed", "7", "--out", "model.json",
        ],
    );
    ok(
        dir,
        &[
            "infer", "--model", "model.json", "--ont", "rr.json", "--features", "test.features.txt", "--labels",
            "test.labels.tsv", "--out", "pred.txt",
        ],
    );
    let out = ok(
        dir,
        &[
            "eval", "--ont", "o2.json", "--model-ont", "rr.json", "--predictions", "pred.txt", "--labels", "test.labels.tsv",
            "--out", "report.txt",
        ],
    );
    assert!(out.contains("top5 n/a"));
}

#[test]
fn toy_pipeline_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    for f in OUTPUTS {
        let x = std::fs::read(a.path().join(f)).unwrap_or_else(|_| panic!("{f} missing"));
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs between runs");
    }
    let report = std::fs::read_to_string(a.path().join("report.txt")).unwrap();
    assert!(report.contains("per leaf (top-1)"));
    // the 3 test classes each have 20 samples
    assert_eq!(report.matches("     20 ").count(), 3, "{report}");
}

#[test]
fn resume_matches_an_uninterrupted_run() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    pipeline(dir);
    let base = [
        "train", "--ont", "rr.json", "--features", "train.features.txt", "--targets", "train.sub.txt", "--loss", "cel",
        "--weights", "w.txt", "--iters", "200", "--seed", "3",
    ];
    let with = |extra: &[&'static str]| base.iter().copied().chain(extra.iter().copied()).collect::<Vec<_>>();
    ok(dir, &with(&["--out", "straight.json"]));
    ok(dir, &with(&["--checkpoint", "ck.json", "--checkpoint-every", "30", "--stop-at", "90", "--out", "resumed.json"]));
    assert!(!dir.join("resumed.json").exists());
    let ck: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("ck.json")).unwrap()).unwrap();
    assert_eq!(ck["trainer"]["iter"], 90);
    ok(dir, &with(&["--resume", "ck.json", "--out", "resumed.json"]));
    assert_eq!(std::fs::read(dir.join("straight.json")).unwrap(), std::fs::read(dir.join("resumed.json")).unwrap());
    assert_eq!(
        std::fs::read(dir.join("straight.json.trace.csv")).unwrap(),
        std::fs::read(dir.join("resumed.json.trace.csv")).unwrap()
    );
}

#[test]
fn refine_export_replays_a_log() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    pipeline(dir);
    std::fs::write(dir.join("log.tsv"), "1\tann\tQ100\tselect_leaf\n2\tann\tQ200\tskip\n3\tann\tQ200\tundo\n").unwrap();
    let o = run(dir, &["refine", "export", "--ont", "o2.json", "--log", "log.tsv", "--out", "refined.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("candidates remain"));
    std::fs::write(
        dir.join("log.tsv"),
        "1\tann\tQ100\tselect_leaf\n2\tann\tQ200\tskip\n3\tann\tQ200\tundo\n4\tann\tQ200\treject\n",
    )
    .unwrap();
    let out = ok(dir, &["refine", "export", "--ont", "o2.json", "--log", "log.tsv", "--out", "refined.json"]);
    assert!(out.contains("nodes 2 leaves 1"), "{out}");
    let stats = ok(dir, &["stats", "--ont", "refined.json"]);
    assert_eq!(hash_of(&stats), hash_of(&out));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(run(dir, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(dir, &["build", "--unknown-flag"]).status.code(), Some(1));
    assert_eq!(run(dir, &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir, &["weights", "--ont", "x.json", "--scheme", "fancy", "--out", "w"]).status.code(), Some(1));
    let missing = run(dir, &["stats", "--ont", "missing.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));
    std::fs::write(dir.join("bad.json"), "{\"format\": 3}").unwrap();
    assert_eq!(run(dir, &["stats", "--ont", "bad.json"]).status.code(), Some(2));
}

#[test]
fn mixed_ontology_artifacts_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    pipeline(dir);
    // weights built for the reduced ontology cannot train on the full one
    let o = run(
        dir,
        &[
            "train", "--ont", "o2.json", "--features", "train.features.txt", "--labels", "train.labels.tsv", "--weights",
            "w.txt", "--out", "m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("built for ontology"));
    // reduced-model predictions need --model-ont
    let o = run(
        dir,
        &["eval", "--ont", "o2.json", "--predictions", "pred.txt", "--labels", "test.labels.tsv", "--out", "r.txt"],
    );
    assert_eq!(o.status.code(), Some(2));
}
