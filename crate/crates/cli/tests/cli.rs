use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use notegen::corpus::{corpus_stats, load_corpus, split_records, SectionScheme, Split};
use notegen::pipeline::load_generated;

fn notegen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_notegen"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = notegen(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn ami_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/ami")
}

#[test]
fn synth_writes_requested_records_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "100", "--seed", "7", "--out", "c.jsonl"]);
    let text = std::fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 100);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["seed"], 7);

    ok(dir.path(), &["synth", "--n", "100", "--seed", "7", "--out", "d.jsonl"]);
    assert_eq!(text, std::fs::read_to_string(dir.path().join("d.jsonl")).unwrap());
}

#[test]
fn stats_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "30", "--out", "c.jsonl"]);
    let printed = ok(dir.path(), &["stats", "c.jsonl"]);
    let scheme = SectionScheme::synthetic();
    let records = load_corpus(dir.path().join("c.jsonl"), &scheme).unwrap();
    assert_eq!(printed, corpus_stats(&records, &scheme).unwrap().to_tsv());
}

#[test]
fn ingest_ami_fixture_keeps_linked_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let f = ami_fixture();
    let (t, s, l) = (f.join("transcript.tsv"), f.join("summary.tsv"), f.join("links.tsv"));
    ok(
        dir.path(),
        &[
            "ingest-ami",
            "--transcript",
            t.to_str().unwrap(),
            "--summary",
            s.to_str().unwrap(),
            "--links",
            l.to_str().unwrap(),
            "--out",
            "ami.jsonl",
        ],
    );
    let records = load_corpus(dir.path().join("ami.jsonl"), &SectionScheme::ami()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].note.sentences.len(), 9);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "synth.n_records = 5\nsynth.contiguty = 0.5\n").unwrap();
    let out = notegen(dir.path(), &["--config", "bad.cfg", "synth", "--out", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth.contiguty"));
    assert!(!dir.path().join("c.jsonl").exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = notegen(dir.path(), &["stats", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn oracle_cluster_generation_gives_one_sentence_per_cluster() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "24", "--seed", "2", "--out", "c.jsonl"]);
    ok(
        dir.path(),
        &[
            "generate",
            "--corpus",
            "c.jsonl",
            "--method",
            "cluster2sent",
            "--oracle-utterances",
            "--oracle-clusters",
            "--fusion",
            "--out",
            "g.jsonl",
        ],
    );
    let records = load_corpus(dir.path().join("c.jsonl"), &SectionScheme::synthetic()).unwrap();
    let test = split_records(&records, Split::Test);
    let notes = load_generated(&dir.path().join("g.jsonl")).unwrap();
    assert_eq!(notes.len(), test.len());
    for (n, r) in notes.iter().zip(&test) {
        assert_eq!(n.id, r.id());
        assert_eq!(n.note.len(), r.note.sentences.len());
    }
}

#[test]
fn randomnote_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "24", "--out", "c.jsonl"]);
    for out in ["a.jsonl", "b.jsonl"] {
        ok(dir.path(), &["generate", "--corpus", "c.jsonl", "--method", "randomnote", "--seed", "3", "--out", out]);
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.jsonl")).unwrap());
}

#[test]
fn score_lists_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "24", "--out", "c.jsonl"]);
    ok(dir.path(), &["generate", "--corpus", "c.jsonl", "--method", "randomnote", "--out", "g.jsonl"]);
    let table = ok(dir.path(), &["score", "--generated", "g.jsonl", "--gold", "c.jsonl", "--out", "s.tsv"]);
    assert!(table.starts_with("method\tR-1\tR-2\tR-L\nrandomnote\t"));
    let out = notegen(dir.path(), &["score", "--generated", "g.jsonl", "--gold", "c.jsonl", "--split", "validation"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing from generated"));
}

#[test]
fn extractor_checkpoint_mode_must_match_method() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.cfg"), "extractor.epochs = 2\n").unwrap();
    ok(dir.path(), &["synth", "--n", "24", "--out", "c.jsonl"]);
    ok(dir.path(), &["--config", "x.cfg", "train-extractor", "--corpus", "c.jsonl", "--mode", "binary", "--out", "e.json"]);
    for side in ["e.json.report.tsv", "e.json.labels.tsv", "e.json.report.json", "e.json.manifest.json"] {
        assert!(dir.path().join(side).exists(), "{side}");
    }
    ok(dir.path(), &["calibrate", "--corpus", "c.jsonl", "--extractor", "e.json", "--out", "t.json"]);
    let out = notegen(
        dir.path(),
        &[
            "generate", "--corpus", "c.jsonl", "--method", "ext2sec", "--extractor", "e.json", "--thresholds", "t.json",
            "--fusion", "--out", "g.jsonl",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupt_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--n", "24", "--out", "c.jsonl"]);
    let printed = ok(dir.path(), &["corrupt", "--corpus", "c.jsonl", "--rate", "0.1", "--seed", "4", "--out", "k.jsonl"]);
    assert!(printed.starts_with("words\tselected\treplaced\tskipped\n"));
    let report = std::fs::read_to_string(dir.path().join("k.jsonl.report.tsv")).unwrap();
    assert_eq!(report, printed);
    let scheme = SectionScheme::synthetic();
    let a = load_corpus(dir.path().join("c.jsonl"), &scheme).unwrap();
    let b = load_corpus(dir.path().join("k.jsonl"), &scheme).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.note == y.note));
    assert!(a.iter().zip(&b).any(|(x, y)| x.conversation != y.conversation));
}
