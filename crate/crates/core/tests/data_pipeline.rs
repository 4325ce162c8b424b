use std::collections::BTreeSet;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verbspace::annotations::{
    aggregate_scores, binarize, convert_score_table, majority_vote, save_annotations, MV_THRESHOLD,
};
use verbspace::dataset::{synthesize, FeatureTable, SynthSpec};
use verbspace::{Dataset, VerbVocabulary};

#[test]
fn ingest_save_ingest_is_byte_stable() {
    let corpus = synthesize::<f64>(&SynthSpec { videos: 120, seed: 4, ..Default::default() }).unwrap();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    corpus.to_dataset("syn").save(first.path(), &corpus.vocab).unwrap();
    let loaded = Dataset::load_dir(first.path(), &corpus.vocab, None).unwrap();
    assert_eq!(loaded.bundles, corpus.bundles);
    assert_eq!(loaded.features, corpus.features);
    loaded.save(second.path(), &corpus.vocab).unwrap();
    for name in ["manifest.csv", "annotations.csv", "features.csv"] {
        let a = std::fs::read(first.path().join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} changed on round trip");
    }
    assert_eq!(Dataset::load_dir(second.path(), &corpus.vocab, None).unwrap(), loaded);
}

#[test]
fn binary_and_text_features_agree() {
    let corpus = synthesize::<f32>(&SynthSpec { videos: 30, seed: 8, ..Default::default() }).unwrap();
    let table = FeatureTable::new(corpus.features.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.bin"), table.to_binary()).unwrap();
    std::fs::write(dir.path().join("f.csv"), table.to_text()).unwrap();
    let bin = FeatureTable::<f32>::load(dir.path().join("f.bin")).unwrap();
    let txt = FeatureTable::<f32>::load(dir.path().join("f.csv")).unwrap();
    assert_eq!(bin, table);
    assert_eq!(txt, table);
}

/// A score table of `videos` rows over the full vocabulary, with counts
/// drawn at random from `annotators` responses per video.
fn random_score_table(vocab: &VerbVocabulary, videos: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("video_id,annotators");
    for lemma in vocab.verbs() {
        out.push(',');
        out.push_str(lemma);
    }
    out.push('\n');
    for i in 0..videos {
        let n: u32 = rng.random_range(1..=50);
        let _ = write!(out, "v{i},{n}");
        for _ in 0..vocab.len() {
            let c = if rng.random_bool(0.1) { rng.random_range(0..=n) } else { 0 };
            let _ = write!(out, ",{}", f64::from(c) / f64::from(n));
        }
        out.push('\n');
    }
    out
}

#[test]
fn converted_tables_of_published_sizes_keep_bundle_invariants() {
    let vocab = VerbVocabulary::default_verbs();
    for (videos, seed) in [(732, 1), (404, 2), (1001, 3)] {
        let table = random_score_table(&vocab, videos, seed);
        let sets = convert_score_table(&table, &vocab).unwrap();
        assert_eq!(sets.len(), videos);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.csv");
        save_annotations(&path, &sets, &vocab).unwrap();
        let reloaded = verbspace::annotations::load_annotations(&path, &vocab).unwrap();
        assert_eq!(reloaded.len(), videos);
        let mut votable = 0;
        for set in &reloaded {
            let soft = aggregate_scores(set, &vocab).unwrap();
            let mv = binarize(&soft, MV_THRESHOLD).unwrap();
            let expected: BTreeSet<usize> = (0..vocab.len()).filter(|&j| soft.score(j) >= 0.5).collect();
            assert_eq!(mv.ones(), expected);
            if let Ok(sv) = majority_vote(&soft) {
                votable += 1;
                assert!((0..vocab.len()).all(|j| soft.counts()[j] <= soft.counts()[sv]));
                assert!((0..sv).all(|j| soft.counts()[j] < soft.counts()[sv]));
            }
        }
        assert!(votable > 0);
    }
}

#[test]
fn stratified_split_of_dataset_is_deterministic_and_exhaustive() {
    let corpus = synthesize::<f64>(&SynthSpec { videos: 150, seed: 6, ..Default::default() }).unwrap();
    let ds = corpus.to_dataset("syn");
    let a = ds.stratified_kfold(5, 42).unwrap();
    let b = ds.stratified_kfold(5, 42).unwrap();
    assert_eq!(a, b);
    let mut all: Vec<usize> = (0..5).flat_map(|f| a.test_indices(f)).collect();
    all.sort_unstable();
    assert_eq!(all, (0..150).collect::<Vec<_>>());
    for f in 0..5 {
        let test: BTreeSet<usize> = a.test_indices(f).into_iter().collect();
        assert!(a.train_indices(f).iter().all(|i| !test.contains(i)));
    }
}
