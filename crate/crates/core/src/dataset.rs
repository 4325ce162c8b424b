//! Dataset ingestion and persistence, stratified k-fold splits and synthetic
//! corpora.
//!
//! A dataset on disk is three files:
//!
//! * `manifest.csv`: `video_id,action_id,vn_class,feature_row,dataset_id`.
//!   Videos showing the same action share the annotation of the action's
//!   representative clip, named by `action_id` (empty means the video's own id).
//!   `vn_class` and `feature_row` may be empty; an empty `feature_row` looks the
//!   features up by video id.
//! * an annotation file (see [`crate::annotations`]).
//! * a feature file: text (`video_id,<D>` header, then `id,f1,…,fD` rows) or
//!   binary (`VSFB` magic, little-endian `u32` version, dimension and row count,
//!   then per row a `u32`-length-prefixed id and `D` little-endian `f32`s).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotations::{
    self, aggregate_scores, bundle_from_soft, AnnotationSet, LabelBundle, SoftLabel,
};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::model::FeatureVector;
use crate::scalar::Scalar;
use crate::vocab::{VerbType, VerbVocabulary, VnClassList};

const BINARY_MAGIC: &[u8; 4] = b"VSFB";
const BINARY_VERSION: u32 = 1;

/// Feature vectors of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    pub dim: usize,
    pub rows: Vec<FeatureVector<T>>,
}

impl<T: Scalar> FeatureTable<T> {
    pub fn new(rows: Vec<FeatureVector<T>>) -> Result<Self> {
        let dim = rows.first().ok_or(Error::Empty("feature table"))?.dim();
        if let Some(r) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.dim(),
            });
        }
        Ok(Self { dim, rows })
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Empty("feature file"))?;
        let dim: usize = header
            .split_once(',')
            .filter(|(h, _)| h.trim() == "video_id")
            .and_then(|(_, d)| d.trim().parse().ok())
            .ok_or_else(|| Error::Parse("feature header must be `video_id,<dimension>`".into()))?;
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim();
            let values = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map(T::from_f64_lossy)
                        .map_err(|_| Error::Parse(format!("feature row {}: bad number `{f}`", i + 1)))
                })
                .collect::<Result<Vec<T>>>()?;
            if values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: values.len(),
                });
            }
            rows.push(FeatureVector::new(id, values)?);
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("video_id,{}\n", self.dim);
        for r in &self.rows {
            out.push_str(&r.video_id);
            for v in &r.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_binary(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(BINARY_MAGIC) {
            return Err(Error::Parse("missing binary feature magic".into()));
        }
        let mut pos = BINARY_MAGIC.len();
        let u32_at = |pos: &mut usize| -> Result<u32> {
            let b = bytes
                .get(*pos..*pos + 4)
                .ok_or_else(|| Error::Parse("truncated binary feature file".into()))?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
        };
        let version = u32_at(&mut pos)?;
        if version != BINARY_VERSION {
            return Err(Error::Parse(format!("unsupported binary feature version {version}")));
        }
        let dim = u32_at(&mut pos)? as usize;
        let count = u32_at(&mut pos)? as usize;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u32_at(&mut pos)? as usize;
            let id = bytes
                .get(pos..pos + len)
                .ok_or_else(|| Error::Parse("truncated binary feature file".into()))?;
            let id = std::str::from_utf8(id)
                .map_err(|_| Error::Parse("video id is not utf-8".into()))?
                .to_string();
            pos += len;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                let bits = u32_at(&mut pos)?;
                values.push(T::from_f64_lossy(f64::from(f32::from_bits(bits))));
            }
            rows.push(FeatureVector::new(id, values)?);
        }
        if pos != bytes.len() {
            return Err(Error::Parse("trailing bytes in binary feature file".into()));
        }
        Self::new(rows)
    }

    /// Binary form; values are narrowed to `f32`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        for r in &self.rows {
            out.extend_from_slice(&(r.video_id.len() as u32).to_le_bytes());
            out.extend_from_slice(r.video_id.as_bytes());
            for v in &r.values {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::parse_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Parse(format!("{}: not utf-8", path.display())))?;
            Self::parse_text(&text)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub action_id: String,
    pub vn_class: Option<usize>,
    pub feature_row: Option<usize>,
    pub dataset_id: String,
}

pub fn parse_manifest(text: &str) -> Result<Vec<VideoRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let expected = ["video_id", "action_id", "vn_class", "feature_row", "dataset_id"];
    let headers = reader.headers()?.clone();
    if headers.iter().ne(expected) {
        return Err(Error::Parse(format!(
            "manifest header must be `{}`",
            expected.join(",")
        )));
    }
    let opt_usize = |s: &str, what: &str, row: usize| -> Result<Option<usize>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("manifest row {row}: bad {what} `{s}`")))
        }
    };
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let video_id = row[0].to_string();
        if video_id.is_empty() {
            return Err(Error::Parse(format!("manifest row {}: empty video id", i + 1)));
        }
        let action_id = if row[1].is_empty() {
            video_id.clone()
        } else {
            row[1].to_string()
        };
        records.push(VideoRecord {
            video_id,
            action_id,
            vn_class: opt_usize(&row[2], "vn_class", i + 1)?,
            feature_row: opt_usize(&row[3], "feature_row", i + 1)?,
            dataset_id: row[4].to_string(),
        });
    }
    if records.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    Ok(records)
}

pub fn write_manifest(records: &[VideoRecord]) -> String {
    let mut out = String::from("video_id,action_id,vn_class,feature_row,dataset_id\n");
    let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.video_id,
            r.action_id,
            opt(r.vn_class),
            opt(r.feature_row),
            r.dataset_id
        );
    }
    out
}

/// A resolved dataset: every video has its feature vector and label bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub records: Vec<VideoRecord>,
    pub features: Vec<FeatureVector<T>>,
    pub bundles: Vec<LabelBundle>,
    /// Annotation sets by action id, in first-use order.
    pub annotations: Vec<AnnotationSet>,
}

/// Resolves every record's annotation (through its action id) into a bundle.
pub fn resolve_bundles(
    records: &[VideoRecord],
    annotations: &[AnnotationSet],
    vocab: &VerbVocabulary,
    vn_classes: Option<&VnClassList>,
) -> Result<Vec<LabelBundle>> {
    let by_action: HashMap<&str, &AnnotationSet> = annotations
        .iter()
        .map(|a| (a.video_id.as_str(), a))
        .collect();
    let missing: Vec<String> = records
        .iter()
        .filter(|r| !by_action.contains_key(r.action_id.as_str()))
        .map(|r| r.video_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAnnotations(missing));
    }
    let mut soft_cache: HashMap<&str, SoftLabel> = HashMap::new();
    let mut seen = HashMap::new();
    let mut bundles = Vec::with_capacity(records.len());
    for r in records {
        if seen.insert(r.video_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateVideo(r.video_id.clone()));
        }
        let vn = match (r.vn_class, vn_classes) {
            (Some(c), Some(list)) if c >= list.len() => {
                return Err(Error::Invalid(format!(
                    "video `{}`: VN class {c} outside list of {}",
                    r.video_id,
                    list.len()
                )))
            }
            (c, _) => c,
        };
        let soft = match soft_cache.get(r.action_id.as_str()) {
            Some(s) => s.clone(),
            None => {
                let s = aggregate_scores(by_action[r.action_id.as_str()], vocab)?;
                soft_cache.insert(&r.action_id, s.clone());
                s
            }
        };
        bundles.push(bundle_from_soft(r.video_id.clone(), soft, vn)?);
    }
    Ok(bundles)
}

impl<T: Scalar> Dataset<T> {
    /// Joins manifest records, annotations and features.
    pub fn assemble(
        records: Vec<VideoRecord>,
        annotations: Vec<AnnotationSet>,
        features: &FeatureTable<T>,
        vocab: &VerbVocabulary,
        vn_classes: Option<&VnClassList>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("manifest"));
        }
        let bundles = resolve_bundles(&records, &annotations, vocab, vn_classes)?;
        let by_id: HashMap<&str, usize> = features
            .rows
            .iter()
            .enumerate()
            .map(|(i, f)| (f.video_id.as_str(), i))
            .collect();
        let mut resolved = Vec::with_capacity(records.len());
        let mut missing = Vec::new();
        for r in &records {
            let row = match r.feature_row {
                Some(i) => features.rows.get(i),
                None => by_id.get(r.video_id.as_str()).map(|&i| &features.rows[i]),
            };
            match row {
                Some(f) => resolved.push(FeatureVector {
                    video_id: r.video_id.clone(),
                    values: f.values.clone(),
                }),
                None => missing.push(r.video_id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Invalid(format!("no feature row for videos {missing:?}")));
        }
        // keep only annotations that are referenced, in first-use order
        let mut used: Vec<&str> = Vec::new();
        for r in &records {
            if !used.contains(&r.action_id.as_str()) {
                used.push(&r.action_id);
            }
        }
        let mut by_action: HashMap<String, AnnotationSet> = annotations
            .into_iter()
            .map(|a| (a.video_id.clone(), a))
            .collect();
        let annotations = used
            .iter()
            .map(|id| by_action.remove(*id).expect("checked by resolve_bundles"))
            .collect();
        Ok(Self {
            records,
            features: resolved,
            bundles,
            annotations,
        })
    }

    pub fn ingest(
        manifest: impl AsRef<Path>,
        annotations: impl AsRef<Path>,
        features: impl AsRef<Path>,
        vocab: &VerbVocabulary,
        vn_classes: Option<&VnClassList>,
    ) -> Result<Self> {
        let records = parse_manifest(&read_to_string(manifest.as_ref())?)?;
        let sets = annotations::load_annotations(annotations, vocab)?;
        let table = FeatureTable::load(features)?;
        Self::assemble(records, sets, &table, vocab, vn_classes)
    }

    /// Writes `manifest.csv`, `annotations.csv` and `features.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, vocab: &VerbVocabulary) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let records: Vec<VideoRecord> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| VideoRecord {
                feature_row: Some(i),
                ..r.clone()
            })
            .collect();
        write_file(&dir.join("manifest.csv"), write_manifest(&records))?;
        annotations::save_annotations(dir.join("annotations.csv"), &self.annotations, vocab)?;
        let table = FeatureTable::new(self.features.clone())?;
        write_file(&dir.join("features.csv"), table.to_text())
    }

    /// Loads a directory written by [`save`](Self::save).
    pub fn load_dir(
        dir: impl AsRef<Path>,
        vocab: &VerbVocabulary,
        vn_classes: Option<&VnClassList>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        Self::ingest(
            dir.join("manifest.csv"),
            dir.join("annotations.csv"),
            dir.join("features.csv"),
            vocab,
            vn_classes,
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, FeatureVector::dim)
    }

    /// `(features, bundle)` pairs for the given row indices.
    pub fn pairs(&self, rows: &[usize]) -> Vec<(FeatureVector<T>, LabelBundle)> {
        rows.iter()
            .map(|&i| (self.features[i].clone(), self.bundles[i].clone()))
            .collect()
    }

    /// Stratified split keyed on the single-verb label.
    pub fn stratified_kfold(&self, k: usize, seed: u64) -> Result<FoldSplit> {
        let items: Vec<(String, usize)> = self
            .records
            .iter()
            .zip(&self.bundles)
            .map(|(r, b)| (r.video_id.clone(), b.sv))
            .collect();
        stratified_kfold(&items, k, seed)
    }
}

/// Assignment of items to `k` disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    /// Video ids per fold.
    pub folds: Vec<Vec<String>>,
    /// Fold of each input item, in input order.
    pub assignment: Vec<usize>,
    /// Strata with fewer items than folds.
    pub warnings: Vec<String>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Splits `(id, stratum)` items into `k` folds.
///
/// Each stratum is shuffled, the strata are concatenated in key order and
/// item `p` of the concatenation goes to fold `p mod k`. Every stratum thus
/// lands in each fold `floor(n/k)` or `ceil(n/k)` times and fold sizes differ
/// by at most one.
pub fn stratified_kfold<K: Ord + Clone + std::fmt::Debug>(
    items: &[(String, K)],
    k: usize,
    seed: u64,
) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if items.len() < k {
        return Err(Error::Config(format!(
            "{} items cannot fill {k} folds",
            items.len()
        )));
    }
    let mut seen = HashMap::new();
    for (id, _) in items {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::DuplicateVideo(id.clone()));
        }
    }
    let mut strata: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, (_, key)) in items.iter().enumerate() {
        strata.entry(key).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut assignment = vec![0usize; items.len()];
    let mut folds = vec![Vec::new(); k];
    let mut position = 0usize;
    for (key, mut members) in strata {
        if members.len() < k {
            warnings.push(format!(
                "stratum {key:?} has {} items for {k} folds",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        for i in members {
            let fold = position % k;
            assignment[i] = fold;
            folds[fold].push(items[i].0.clone());
            position += 1;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FoldSplit {
        folds,
        assignment,
        warnings,
    })
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub verbs: usize,
    pub videos: usize,
    /// Standard deviation of the Gaussian feature noise.
    pub noise: f64,
    pub seed: u64,
    /// Inclusive range of annotators per video.
    pub annotators: (u32, u32),
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            verbs: 20,
            videos: 200,
            noise: 0.05,
            seed: 0,
            annotators: (30, 50),
        }
    }
}

/// A latent action: a result verb, the manner verb it is performed with, and
/// supplementary verbs annotators only sometimes select.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthAction {
    pub result: usize,
    pub manner: usize,
    pub supplementary: Vec<usize>,
    /// Selection probability per verb.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus<T> {
    pub vocab: VerbVocabulary,
    pub actions: Vec<SynthAction>,
    /// The shared soft label of each action.
    pub action_labels: Vec<SoftLabel>,
    /// Latent action of each video.
    pub action_of: Vec<usize>,
    pub features: Vec<FeatureVector<T>>,
    pub bundles: Vec<LabelBundle>,
    /// Square mixing matrix applied to the soft labels, row-major.
    pub mixing: Vec<f64>,
}

const BACKGROUND_RATE: f64 = 0.02;

fn synth_vocab(n: usize) -> Result<VerbVocabulary> {
    let default = VerbVocabulary::default_verbs();
    let manner: Vec<&str> = default
        .iter()
        .filter(|(_, t)| *t == VerbType::Manner)
        .map(|(l, _)| l)
        .collect();
    let result: Vec<&str> = default
        .iter()
        .filter(|(_, t)| *t == VerbType::Result)
        .map(|(l, _)| l)
        .collect();
    let n_manner = n.div_ceil(2);
    let name = |list: &[&str], prefix: &str, i: usize| {
        list.get(i).map_or_else(|| format!("{prefix}{i}"), |s| s.to_string())
    };
    let entries = (0..n).map(|j| {
        if j < n_manner {
            (name(&manner, "manner", j), VerbType::Manner)
        } else {
            (name(&result, "result", j - n_manner), VerbType::Result)
        }
    });
    VerbVocabulary::from_entries(entries)
}

/// Generates a corpus whose soft labels follow a result/manner co-occurrence
/// structure: result verbs are performed with several manners and manners
/// serve several results. Each action is annotated once and its videos share
/// that label. Features are an invertible (strictly diagonally
/// dominant) linear map of the soft label plus Gaussian noise.
pub fn synthesize<T: Scalar>(spec: &SynthSpec) -> Result<SyntheticCorpus<T>> {
    if spec.verbs < 2 || spec.videos == 0 {
        return Err(Error::Config("need at least 2 verbs and 1 video".into()));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Config("noise must be finite and non-negative".into()));
    }
    let (lo, hi) = spec.annotators;
    if lo == 0 || lo > hi {
        return Err(Error::Config("annotator range must be nonempty and positive".into()));
    }
    let vocab = synth_vocab(spec.verbs)?;
    let v = spec.verbs;
    let manners: Vec<usize> = (0..v).filter(|&j| vocab.verb_type(j) == Some(VerbType::Manner)).collect();
    let results: Vec<usize> = (0..v).filter(|&j| vocab.verb_type(j) == Some(VerbType::Result)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Each result verb is paired with two manners; manners are reused across
    // results with a stride so the pairings overlap.
    let mut actions = Vec::new();
    for (ri, &r) in results.iter().enumerate() {
        for step in [0usize, 1] {
            let m = manners[(ri + step * (manners.len() / 2).max(1)) % manners.len()];
            let mut profile = vec![BACKGROUND_RATE; v];
            profile[r] = rng.random_range(0.8..0.98);
            profile[m] = rng.random_range(0.6..0.95);
            let mut supplementary = Vec::new();
            while supplementary.len() < 2.min(v - 2) {
                let s = rng.random_range(0..v);
                if s != r && s != m && !supplementary.contains(&s) {
                    profile[s] = rng.random_range(0.25..0.55);
                    supplementary.push(s);
                }
            }
            actions.push(SynthAction {
                result: r,
                manner: m,
                supplementary,
                profile,
            });
        }
    }

    let off = 0.5 / v as f64;
    let mixing: Vec<f64> = (0..v * v)
        .map(|i| if i / v == i % v { 1.0 } else { rng.random_range(-off..off) })
        .collect();
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;

    // One annotation per action, shared by every video of that action.
    let mut action_labels = Vec::with_capacity(actions.len());
    for action in &actions {
        let n = rng.random_range(lo..=hi);
        let mut counts: Vec<u32> = action
            .profile
            .iter()
            .map(|&p| {
                Binomial::new(u64::from(n), p)
                    .expect("probability in [0, 1]")
                    .sample(&mut rng) as u32
            })
            .collect();
        if counts.iter().all(|&c| c == 0) {
            // keep every action votable
            counts[action.result] = 1;
        }
        action_labels.push(SoftLabel::new(counts, n)?);
    }

    let mut features = Vec::with_capacity(spec.videos);
    let mut bundles = Vec::with_capacity(spec.videos);
    let mut action_of = Vec::with_capacity(spec.videos);
    for i in 0..spec.videos {
        let a = rng.random_range(0..actions.len());
        let soft = &action_labels[a];
        let y: Vec<f64> = (0..v).map(|j| soft.score(j)).collect();
        let x: Vec<T> = mixing
            .chunks_exact(v)
            .map(|row| {
                let clean: f64 = row.iter().zip(&y).map(|(m, y)| m * y).sum();
                T::from_f64_lossy(clean + noise.sample(&mut rng))
            })
            .collect();
        let id = format!("syn{i:05}");
        features.push(FeatureVector::new(id.clone(), x)?);
        bundles.push(bundle_from_soft(id, soft.clone(), None)?);
        action_of.push(a);
    }
    Ok(SyntheticCorpus {
        vocab,
        actions,
        action_labels,
        action_of,
        features,
        bundles,
        mixing,
    })
}

impl<T: Scalar> SyntheticCorpus<T> {
    /// The corpus as a [`Dataset`] named `dataset_id`.
    pub fn to_dataset(&self, dataset_id: &str) -> Dataset<T> {
        let action_id = |a: usize| format!("act{a:03}");
        let records = self
            .features
            .iter()
            .zip(&self.action_of)
            .enumerate()
            .map(|(i, (f, &a))| VideoRecord {
                video_id: f.video_id.clone(),
                action_id: action_id(a),
                vn_class: None,
                feature_row: Some(i),
                dataset_id: dataset_id.to_string(),
            })
            .collect();
        let mut used = Vec::new();
        for &a in &self.action_of {
            if !used.contains(&a) {
                used.push(a);
            }
        }
        let annotations = used
            .into_iter()
            .map(|a| AnnotationSet::from_soft_label(action_id(a), &self.action_labels[a]))
            .collect();
        Dataset {
            records,
            features: self.features.clone(),
            bundles: self.bundles.clone(),
            annotations,
        }
    }

    pub fn pairs(&self, rows: &[usize]) -> Vec<(FeatureVector<T>, LabelBundle)> {
        rows.iter()
            .map(|&i| (self.features[i].clone(), self.bundles[i].clone()))
            .collect()
    }
}
