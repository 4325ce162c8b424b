use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use verbspace::annotations::load_annotations;
use verbspace::dataset::{parse_manifest, resolve_bundles, synthesize, SynthSpec};
use verbspace::retrieval::IndexEntry;
use verbspace::{VerbSpaceIndex, VerbVocabulary};
use verbspace_cli::cli::BundleFile;

fn verbspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verbspace"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env_remove("VERBSPACE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, videos: usize) {
    let videos = videos.to_string();
    ok(&verbspace(dir, &["synth", "--verbs", "12", "--videos", &videos, "--seed", "3", "--out", "syn"]));
}

#[test]
fn aggregate_matches_library_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 60);
    ok(&verbspace(
        tmp.path(),
        &[
            "--vocab", "syn/vocab.csv",
            "aggregate", "--annotations", "syn/annotations.csv",
            "--manifest", "syn/manifest.csv", "--out", "bundles.json",
        ],
    ));
    let dir = tmp.path().join("syn");
    let vocab = VerbVocabulary::load(dir.join("vocab.csv")).unwrap();
    let sets = load_annotations(dir.join("annotations.csv"), &vocab).unwrap();
    let manifest = parse_manifest(&std::fs::read_to_string(dir.join("manifest.csv")).unwrap()).unwrap();
    let bundles = resolve_bundles(&manifest, &sets, &vocab, None).unwrap();
    let expected = serde_json::to_string_pretty(&BundleFile::new(&vocab, bundles)).unwrap();
    let written = std::fs::read_to_string(tmp.path().join("bundles.json")).unwrap();
    assert_eq!(written, expected);
}

#[test]
fn aggregate_rejects_empty_input() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.csv"), "video_id,annotator_id,verbs\n").unwrap();
    let out = verbspace(tmp.path(), &["aggregate", "--annotations", "empty.csv", "--out", "b.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!tmp.path().join("b.json").exists());
}

#[test]
fn eval_of_ground_truth_scores_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 80);
    ok(&verbspace(tmp.path(), &["build-index", "--dataset", "syn", "--oracle-scores", "--out", "oracle.json"]));
    let line = ok(&verbspace(
        tmp.path(),
        &["eval", "--dataset", "syn", "--index", "oracle.json", "--out", "report.json"],
    ));
    assert!(line.contains("accuracy 1.0000"), "{line}");
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"]["mean"], 1.0);
    assert_eq!(report["rmse"]["manner"], 0.0);
    assert_eq!(report["rmse"]["result"], 0.0);
}

#[test]
fn train_then_eval_on_held_out_fold() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 100);
    let line = ok(&verbspace(
        tmp.path(),
        &[
            "train", "--dataset", "syn", "--scheme", "samv", "--epochs", "20",
            "--holdout-fold", "0", "--out", "ckpt.json", "--report", "loss.csv",
        ],
    ));
    assert!(line.starts_with("trained SAMV on 80 videos"), "{line}");
    let losses = std::fs::read_to_string(tmp.path().join("loss.csv")).unwrap();
    assert_eq!(losses.lines().count(), 21);
    let line = ok(&verbspace(
        tmp.path(),
        &["eval", "--dataset", "syn", "--checkpoint", "ckpt.json", "--holdout-fold", "0", "--out", "r.json"],
    ));
    assert!(line.contains("over 20 videos"), "{line}");
}

#[test]
fn combined_query_ranks_rotating_tap_first() {
    let tmp = tempfile::tempdir().unwrap();
    let vocab = VerbVocabulary::default_verbs();
    let at = |pairs: &[(&str, f64)]| {
        let mut s = vec![0.0; vocab.len()];
        for (lemma, v) in pairs {
            s[vocab.resolve(lemma).unwrap()] = *v;
        }
        s
    };
    let entry = |id: &str, scores| IndexEntry { video_id: id.into(), dataset_id: "d".into(), scores, gt: None };
    let index = VerbSpaceIndex::new(
        vocab.clone(),
        vec![
            entry("open_jar", at(&[("open", 0.9), ("rotate", 0.8), ("hold", 0.5)])),
            entry("press_tap", at(&[("turn off", 0.9), ("press", 0.85), ("rotate", 0.1)])),
            entry("rotate_tap", at(&[("turn off", 0.85), ("rotate", 0.8), ("hold", 0.3)])),
        ],
    )
    .unwrap();
    index.save(tmp.path().join("tap.json")).unwrap();
    ok(&verbspace(
        tmp.path(),
        &["retrieve", "t2v", "--index", "tap.json", "--verbs", "turn-off,rotate", "--out", "res.json"],
    ));
    let res: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("res.json")).unwrap()).unwrap();
    let ids: Vec<&str> = res["items"].as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["rotate_tap", "press_tap", "open_jar"]);

    let out = verbspace(tmp.path(), &["retrieve", "t2v", "--index", "tap.json", "--verbs", "flambé"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("flambé"));
}

#[test]
fn sweep_table_has_one_row_per_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 40);
    ok(&verbspace(tmp.path(), &["build-index", "--dataset", "syn", "--oracle-scores", "--out", "o.json"]));
    ok(&verbspace(tmp.path(), &["sweep-alpha", "--dataset", "syn", "--index", "o.json", "--out", "sweep.csv"]));
    let table = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("alpha,accuracy"));
    assert_eq!(lines.count(), verbspace::metrics::default_alpha_grid().len());
}

#[test]
fn serve_refuses_mismatched_vocabulary() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 20);
    ok(&verbspace(tmp.path(), &["build-index", "--dataset", "syn", "--oracle-scores", "--out", "o.json"]));
    let out = verbspace(tmp.path(), &["serve", "--index", "o.json", "--bind", "127.0.0.1:0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("409"));
}

#[test]
fn synthetic_index_roundtrips_through_score_export() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synthesize::<f64>(&SynthSpec { verbs: 6, videos: 10, seed: 1, ..Default::default() }).unwrap();
    corpus.to_dataset("s").save(tmp.path().join("s"), &corpus.vocab).unwrap();
    corpus.vocab.save(tmp.path().join("s/vocab.csv")).unwrap();
    ok(&verbspace(tmp.path(), &["build-index", "--dataset", "s", "--oracle-scores", "--out", "i.json"]));
    ok(&verbspace(tmp.path(), &["export-scores", "--index", "i.json", "--out", "scores.csv"]));
    let table = std::fs::read_to_string(tmp.path().join("scores.csv")).unwrap();
    assert_eq!(table.lines().count(), 11);
    assert!(table.starts_with("video_id,dataset_id,"));
}
