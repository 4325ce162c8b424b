//! Crowd annotations and the four label representations built from them.
//!
//! Each annotator marks every verb that applies to a video. Counting those
//! selections gives the soft multi-verb label (SAMV); thresholding it at 0.5
//! gives the hard multi-verb label (MV); its argmax is the single-verb label (SV).
//! Scores are kept as exact `(count, annotators)` pairs so that thresholds are
//! never disturbed by accumulated rounding.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_file, Error, Result};
use crate::scalar::Scalar;
use crate::vocab::VerbVocabulary;

/// Default binarisation threshold for MV labels.
pub const MV_THRESHOLD: f64 = 0.5;
/// Default relevance threshold on SAMV scores.
pub const DEFAULT_ALPHA: f64 = 0.3;

/// Raw selections for one video: one verb-index set per submitted response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub video_id: String,
    selections: Vec<BTreeSet<usize>>,
}

impl AnnotationSet {
    pub fn new(video_id: impl Into<String>, selections: Vec<BTreeSet<usize>>) -> Result<Self> {
        if selections.is_empty() {
            return Err(Error::Empty("annotator list"));
        }
        Ok(Self {
            video_id: video_id.into(),
            selections,
        })
    }

    pub fn annotator_count(&self) -> usize {
        self.selections.len()
    }

    pub fn selections(&self) -> &[BTreeSet<usize>] {
        &self.selections
    }

    /// A canonical annotation set reproducing `label` exactly: annotator `a`
    /// selects verb `j` iff `a < count_j`.
    pub fn from_soft_label(video_id: impl Into<String>, label: &SoftLabel) -> Self {
        let selections = (0..label.annotators() as usize)
            .map(|a| {
                label
                    .counts()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| (a as u32) < c)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Self {
            video_id: video_id.into(),
            selections,
        }
    }
}

/// Per-verb fraction of annotators, stored as exact counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSoftLabel")]
pub struct SoftLabel {
    counts: Vec<u32>,
    annotators: u32,
}

#[derive(Deserialize)]
struct RawSoftLabel {
    counts: Vec<u32>,
    annotators: u32,
}

impl TryFrom<RawSoftLabel> for SoftLabel {
    type Error = Error;

    fn try_from(raw: RawSoftLabel) -> Result<Self> {
        Self::new(raw.counts, raw.annotators)
    }
}

impl SoftLabel {
    pub fn new(counts: Vec<u32>, annotators: u32) -> Result<Self> {
        if annotators == 0 {
            return Err(Error::Empty("annotator list"));
        }
        if let Some(&c) = counts.iter().find(|&&c| c > annotators) {
            return Err(Error::Invalid(format!(
                "selection count {c} exceeds annotator count {annotators}"
            )));
        }
        Ok(Self { counts, annotators })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn annotators(&self) -> u32 {
        self.annotators
    }

    /// Score of verb `j` as the correctly rounded quotient `count / annotators`.
    pub fn score(&self, j: usize) -> f64 {
        f64::from(self.counts[j]) / f64::from(self.annotators)
    }

    pub fn scores<T: Scalar>(&self) -> Vec<T> {
        (0..self.len())
            .map(|j| T::from_f64_lossy(self.score(j)))
            .collect()
    }

    /// Whether `score(j) >= threshold`. Because both the quotient and the
    /// decimal threshold are correctly rounded, a score exactly equal to the
    /// threshold (e.g. 3/10 vs 0.3) compares equal.
    pub fn reaches(&self, j: usize, threshold: f64) -> bool {
        self.score(j) >= threshold
    }

    pub fn max_score(&self) -> f64 {
        self.counts
            .iter()
            .max()
            .map_or(0.0, |&c| f64::from(c) / f64::from(self.annotators))
    }
}

/// Binary verb vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HardLabel {
    pub bits: Vec<bool>,
}

impl HardLabel {
    pub fn ones(&self) -> BTreeSet<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn to_vec<T: Scalar>(&self) -> Vec<T> {
        self.bits
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect()
    }
}

/// All label representations for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelBundle {
    pub video_id: String,
    pub sv: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vn: Option<usize>,
    pub mv: HardLabel,
    pub samv: SoftLabel,
}

/// Counts, per verb, how many annotators selected it.
pub fn aggregate_scores(set: &AnnotationSet, vocab: &VerbVocabulary) -> Result<SoftLabel> {
    let mut counts = vec![0u32; vocab.len()];
    for selection in &set.selections {
        for &j in selection {
            let slot = counts.get_mut(j).ok_or(Error::VerbIndexOutOfRange {
                index: j,
                len: vocab.len(),
            })?;
            *slot += 1;
        }
    }
    SoftLabel::new(counts, set.annotator_count() as u32)
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::ThresholdOutOfRange(t))
    }
}

/// `bits[j] = score(j) >= threshold`.
pub fn binarize(label: &SoftLabel, threshold: f64) -> Result<HardLabel> {
    check_threshold(threshold)?;
    Ok(HardLabel {
        bits: (0..label.len()).map(|j| label.reaches(j, threshold)).collect(),
    })
}

/// Argmax over the soft scores; ties go to the lowest verb index.
pub fn majority_vote(label: &SoftLabel) -> Result<usize> {
    let mut best: Option<(usize, u32)> = None;
    for (j, &c) in label.counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((j, c));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::NoVote)
}

/// Verbs whose soft score reaches `alpha`. May be empty.
pub fn relevant_set(label: &SoftLabel, alpha: f64) -> BTreeSet<usize> {
    (0..label.len()).filter(|&j| label.reaches(j, alpha)).collect()
}

/// [`relevant_set`] over plain float scores.
pub fn relevant_set_of_scores<T: Scalar>(scores: &[T], alpha: T) -> BTreeSet<usize> {
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= alpha)
        .map(|(j, _)| j)
        .collect()
}

pub fn bundle_from_soft(
    video_id: impl Into<String>,
    samv: SoftLabel,
    vn: Option<usize>,
) -> Result<LabelBundle> {
    Ok(LabelBundle {
        video_id: video_id.into(),
        sv: majority_vote(&samv)?,
        vn,
        mv: binarize(&samv, MV_THRESHOLD)?,
        samv,
    })
}

pub fn build_bundle(
    set: &AnnotationSet,
    vocab: &VerbVocabulary,
    vn_class: Option<usize>,
) -> Result<LabelBundle> {
    let samv = aggregate_scores(set, vocab)?;
    bundle_from_soft(set.video_id.clone(), samv, vn_class)
}

/// One submitted response in an annotation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub annotator_id: String,
    pub verbs: Vec<String>,
}

/// Reads `video_id,annotator_id,"lemma;lemma;…"` rows. A leading
/// `video_id,annotator_id,verbs` header is skipped if present.
pub fn parse_annotation_csv(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        if i == 0 && row.get(0) == Some("video_id") {
            continue;
        }
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() < 2 || row.len() > 3 {
            return Err(Error::Parse(format!(
                "annotation row {}: expected 3 fields, got {}",
                i + 1,
                row.len()
            )));
        }
        let verbs = row
            .get(2)
            .unwrap_or("")
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        records.push(AnnotationRecord {
            video_id: row[0].to_string(),
            annotator_id: row[1].to_string(),
            verbs,
        });
    }
    Ok(records)
}

pub fn parse_annotation_json(text: &str) -> Result<Vec<AnnotationRecord>> {
    Ok(serde_json::from_str(text)?)
}

/// Loads a `.json` or CSV annotation file.
pub fn load_annotation_records(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_annotation_json(&text)
    } else {
        parse_annotation_csv(&text)
    }
}

pub fn write_annotation_csv(records: &[AnnotationRecord]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    writer.write_record(["video_id", "annotator_id", "verbs"])?;
    for r in records {
        writer.write_record([&r.video_id, &r.annotator_id, &r.verbs.join(";")])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Groups records by video (in order of first appearance). Every response
/// counts towards the annotator total, including empty ones.
pub fn group_records(
    records: &[AnnotationRecord],
    vocab: &VerbVocabulary,
) -> Result<Vec<AnnotationSet>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_video: HashMap<&str, Vec<(&str, BTreeSet<usize>)>> = HashMap::new();
    for r in records {
        let selection = r
            .verbs
            .iter()
            .map(|v| vocab.resolve(v))
            .collect::<Result<BTreeSet<_>>>()?;
        let entry = by_video.entry(&r.video_id).or_insert_with(|| {
            order.push(r.video_id.clone());
            Vec::new()
        });
        if entry.iter().any(|(a, _)| *a == r.annotator_id) {
            return Err(Error::Invalid(format!(
                "annotator `{}` answered video `{}` twice",
                r.annotator_id, r.video_id
            )));
        }
        entry.push((&r.annotator_id, selection));
    }
    order
        .into_iter()
        .map(|id| {
            let selections = by_video
                .remove(id.as_str())
                .expect("every ordered id was inserted")
                .into_iter()
                .map(|(_, s)| s)
                .collect();
            AnnotationSet::new(id, selections)
        })
        .collect()
}

pub fn load_annotations(
    path: impl AsRef<Path>,
    vocab: &VerbVocabulary,
) -> Result<Vec<AnnotationSet>> {
    group_records(&load_annotation_records(path)?, vocab)
}

/// Inverse of [`group_records`], annotators numbered `a0, a1, …`.
pub fn to_records(sets: &[AnnotationSet], vocab: &VerbVocabulary) -> Vec<AnnotationRecord> {
    sets.iter()
        .flat_map(|set| {
            set.selections.iter().enumerate().map(move |(a, sel)| AnnotationRecord {
                video_id: set.video_id.clone(),
                annotator_id: format!("a{a}"),
                verbs: sel
                    .iter()
                    .map(|&j| vocab.verb(j).unwrap_or_default().to_string())
                    .collect(),
            })
        })
        .collect()
}

pub fn save_annotations(
    path: impl AsRef<Path>,
    sets: &[AnnotationSet],
    vocab: &VerbVocabulary,
) -> Result<()> {
    write_file(path.as_ref(), write_annotation_csv(&to_records(sets, vocab))?)
}

/// Converts a per-video score table into annotation sets.
///
/// The table has a header `video_id,annotators,<lemma>,<lemma>,…` (any subset
/// and order of vocabulary lemmas) and one row per video holding the annotator
/// count and the normalised score of each listed verb. Each score must be a
/// multiple of `1/annotators` to within `1e-6`; the selection count is
/// recovered by rounding and expanded with [`AnnotationSet::from_soft_label`].
pub fn convert_score_table(text: &str, vocab: &VerbVocabulary) -> Result<Vec<AnnotationSet>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "video_id" || &headers[1] != "annotators" {
        return Err(Error::Parse(
            "score table header must start with `video_id,annotators`".into(),
        ));
    }
    let columns = headers
        .iter()
        .skip(2)
        .map(|lemma| vocab.resolve(lemma))
        .collect::<Result<Vec<_>>>()?;
    let mut sets = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Parse(format!("score table row {}: {what}", row_no + 1));
        let annotators: u32 = row[1].parse().map_err(|_| bad("annotator count"))?;
        if annotators == 0 {
            return Err(bad("zero annotators"));
        }
        let mut counts = vec![0u32; vocab.len()];
        for (field, &j) in row.iter().skip(2).zip(&columns) {
            let score: f64 = field.parse().map_err(|_| bad("score"))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(bad("score outside [0, 1]"));
            }
            let raw = score * f64::from(annotators);
            let count = raw.round();
            if (raw - count).abs() > 1e-6 * f64::from(annotators) {
                return Err(bad("score is not a multiple of 1/annotators"));
            }
            counts[j] = count as u32;
        }
        let label = SoftLabel::new(counts, annotators)?;
        sets.push(AnnotationSet::from_soft_label(&row[0], &label));
    }
    if sets.is_empty() {
        return Err(Error::Empty("score table"));
    }
    Ok(sets)
}
