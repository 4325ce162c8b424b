//! Retrieval over predicted verb-score vectors, treating each verb as one
//! dimension of an embedding space.
//!
//! * video → text: rank all verbs by predicted score.
//! * text → video: rank videos by the minimum (or mean) of their scores over
//!   the query verbs; a video is relevant when its ground-truth relevant set
//!   contains every query verb.
//! * video → video: rank other videos (optionally only other datasets) by
//!   cosine similarity of their score vectors.
//!
//! Equal scores are ordered by ascending video id.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::annotations::LabelBundle;
use crate::error::{read_to_string, write_file, Error, Result};
use crate::metrics::average_precision;
use crate::scalar::{argsort_desc, Scalar};
use crate::vocab::VerbVocabulary;

/// Largest number of verbs in an enumerated text query.
pub const MAX_QUERY_VERBS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry<T> {
    pub video_id: String,
    pub dataset_id: String,
    pub scores: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<LabelBundle>,
}

const INDEX_FORMAT: &str = "verbspace-index";
const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexFile<T> {
    format: String,
    version: u32,
    vocab_fingerprint: String,
    vocabulary: VerbVocabulary,
    entries: Vec<IndexEntry<T>>,
}

/// Immutable corpus of predicted score vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VerbSpaceIndex<T> {
    vocab: VerbVocabulary,
    entries: Vec<IndexEntry<T>>,
    by_id: HashMap<String, usize>,
}

impl<T: Scalar> VerbSpaceIndex<T> {
    pub fn new(vocab: VerbVocabulary, entries: Vec<IndexEntry<T>>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.scores.len() != vocab.len() {
                return Err(Error::DimensionMismatch {
                    expected: vocab.len(),
                    got: e.scores.len(),
                });
            }
            if e.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::NonFinite(format!("scores of `{}`", e.video_id)));
            }
            if by_id.insert(e.video_id.clone(), i).is_some() {
                return Err(Error::DuplicateVideo(e.video_id.clone()));
            }
        }
        Ok(Self {
            vocab,
            entries,
            by_id,
        })
    }

    pub fn vocab(&self) -> &VerbVocabulary {
        &self.vocab
    }

    pub fn fingerprint(&self) -> String {
        self.vocab.fingerprint()
    }

    pub fn entries(&self) -> &[IndexEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&IndexEntry<T>> {
        self.by_id.get(video_id).map(|&i| &self.entries[i])
    }

    pub fn position(&self, video_id: &str) -> Option<usize> {
        self.by_id.get(video_id).copied()
    }

    /// Distinct dataset ids in first-appearance order with their video counts.
    pub fn datasets(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for e in &self.entries {
            match out.iter_mut().find(|(d, _)| *d == e.dataset_id) {
                Some((_, n)) => *n += 1,
                None => out.push((e.dataset_id.clone(), 1)),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            vocab_fingerprint: self.fingerprint(),
            vocabulary: self.vocab.clone(),
            entries: self.entries.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_json()?)
    }

    /// Parses an index file; the embedded vocabulary must match the stored
    /// fingerprint.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: IndexFile<T> = serde_json::from_str(text)?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(Error::Parse(format!(
                "unsupported index {} v{}",
                file.format, file.version
            )));
        }
        file.vocabulary.check_fingerprint(&file.vocab_fingerprint)?;
        Self::new(file.vocabulary, file.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_to_string(path.as_ref())?)
    }

    /// Loads an index and rejects it unless it was built for `vocab`.
    pub fn load_for(path: impl AsRef<Path>, vocab: &VerbVocabulary) -> Result<Self> {
        let index = Self::load(path)?;
        vocab.check_fingerprint(&index.fingerprint())?;
        Ok(index)
    }

    /// One row per video: `video_id,dataset_id,<score per verb>`.
    pub fn to_score_csv(&self) -> String {
        let mut out = String::from("video_id,dataset_id");
        for v in self.vocab.verbs() {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for e in &self.entries {
            let _ = write!(out, "{},{}", e.video_id, e.dataset_id);
            for s in &e.scores {
                let _ = write!(out, ",{s}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryScoring {
    /// All query verbs must apply: score is the minimum over them.
    #[default]
    Min,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryEcho {
    Text {
        verbs: Vec<String>,
        scoring: QueryScoring,
    },
    Video {
        video_id: String,
        cross_dataset: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked<T> {
    pub id: String,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult<T> {
    pub query: QueryEcho,
    pub items: Vec<Ranked<T>>,
}

impl<T: Scalar> RetrievalResult<T> {
    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|r| r.id.as_str()).collect()
    }

    /// `limit == 0` returns everything after `offset`.
    pub fn page(&self, offset: usize, limit: usize) -> &[Ranked<T>] {
        let start = offset.min(self.items.len());
        let end = if limit == 0 {
            self.items.len()
        } else {
            start.saturating_add(limit).min(self.items.len())
        };
        &self.items[start..end]
    }
}

fn rank_items<T: Scalar>(mut items: Vec<Ranked<T>>) -> Vec<Ranked<T>> {
    items.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    items
}

/// All verbs, best first.
pub fn video_to_text<T: Scalar>(scores: &[T]) -> Vec<usize> {
    argsort_desc(scores)
}

/// AP of the video-to-text ranking against a ground-truth relevant verb set.
pub fn video_to_text_ap<T: Scalar>(scores: &[T], relevant: &BTreeSet<usize>) -> Result<f64> {
    let rel: HashSet<usize> = relevant.iter().copied().collect();
    average_precision(&video_to_text(scores), &rel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub map: Option<f64>,
    pub evaluated: usize,
    /// Queries left out because nothing was relevant to them.
    pub skipped: usize,
}

/// Mean video-to-text AP; videos with an empty relevant set are skipped.
pub fn video_to_text_map<T: Scalar, S: AsRef<[T]>>(
    preds: &[S],
    relevant: &[BTreeSet<usize>],
) -> Result<MapSummary> {
    if preds.len() != relevant.len() {
        return Err(Error::DimensionMismatch {
            expected: relevant.len(),
            got: preds.len(),
        });
    }
    let mut total = 0.0;
    let mut evaluated = 0;
    for (p, rel) in preds.iter().zip(relevant) {
        if rel.is_empty() {
            continue;
        }
        total += video_to_text_ap(p.as_ref(), rel)?;
        evaluated += 1;
    }
    Ok(MapSummary {
        map: (evaluated > 0).then(|| total / evaluated as f64),
        evaluated,
        skipped: preds.len() - evaluated,
    })
}

/// Every `n`-verb combination occurring inside at least one relevant set,
/// each as an ascending index list.
pub fn enumerate_cooccurring_queries(
    relevant: &[BTreeSet<usize>],
    n: usize,
) -> Result<BTreeSet<Vec<usize>>> {
    if !(1..=MAX_QUERY_VERBS).contains(&n) {
        return Err(Error::Config(format!(
            "query size {n} outside 1..={MAX_QUERY_VERBS}"
        )));
    }
    Ok(relevant
        .iter()
        .flat_map(|set| set.iter().copied().combinations(n))
        .collect())
}

fn query_score<T: Scalar>(scores: &[T], query: &[usize], scoring: QueryScoring) -> T {
    let picked = query.iter().map(|&j| scores[j]);
    match scoring {
        QueryScoring::Min => picked.fold(T::infinity(), T::min),
        QueryScoring::Mean => picked.sum::<T>() / T::from_usize_lossy(query.len()),
    }
}

fn check_query(query: &[usize], width: usize) -> Result<()> {
    if query.is_empty() {
        return Err(Error::Empty("query"));
    }
    if let Some(&j) = query.iter().find(|&&j| j >= width) {
        return Err(Error::VerbIndexOutOfRange { index: j, len: width });
    }
    Ok(())
}

/// Ranks every indexed video for a multi-verb query.
pub fn text_to_video<T: Scalar>(
    index: &VerbSpaceIndex<T>,
    query: &[usize],
    scoring: QueryScoring,
) -> Result<RetrievalResult<T>> {
    check_query(query, index.vocab.len())?;
    let items = index
        .entries
        .iter()
        .map(|e| Ranked {
            id: e.video_id.clone(),
            score: query_score(&e.scores, query, scoring),
        })
        .collect();
    Ok(RetrievalResult {
        query: QueryEcho::Text {
            verbs: query
                .iter()
                .map(|&j| index.vocab.verb(j).unwrap_or_default().to_string())
                .collect(),
            scoring,
        },
        items: rank_items(items),
    })
}

/// [`text_to_video`] with verbs given as lemmas.
pub fn text_to_video_lemmas<T: Scalar, S: AsRef<str>>(
    index: &VerbSpaceIndex<T>,
    lemmas: &[S],
    scoring: QueryScoring,
) -> Result<RetrievalResult<T>> {
    let query = lemmas
        .iter()
        .map(|l| index.vocab.resolve(l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    text_to_video(index, &query, scoring)
}

/// Ids of videos whose relevant set contains every query verb.
pub fn text_query_relevant<'a, T: Scalar>(
    index: &'a VerbSpaceIndex<T>,
    relevant: &[BTreeSet<usize>],
    query: &[usize],
) -> HashSet<&'a str> {
    index
        .entries
        .iter()
        .zip(relevant)
        .filter(|(_, rel)| query.iter().all(|j| rel.contains(j)))
        .map(|(e, _)| e.video_id.as_str())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSweepRow {
    pub n: usize,
    /// `None` when no query of this size could be evaluated.
    pub map: Option<f64>,
    pub queries: usize,
    pub evaluated: usize,
    pub without_relevant: usize,
}

/// Text-to-video mAP for each query size in `sizes`, over every co-occurring
/// verb combination of that size. `relevant[i]` is the ground-truth relevant
/// set of the `i`-th indexed video.
pub fn text_to_video_sweep<T: Scalar>(
    index: &VerbSpaceIndex<T>,
    relevant: &[BTreeSet<usize>],
    sizes: &[usize],
    scoring: QueryScoring,
) -> Result<Vec<TextSweepRow>> {
    if relevant.len() != index.len() {
        return Err(Error::DimensionMismatch {
            expected: index.len(),
            got: relevant.len(),
        });
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let queries = enumerate_cooccurring_queries(relevant, n)?;
        let mut total = 0.0;
        let mut evaluated = 0;
        let mut without_relevant = 0;
        for q in &queries {
            let rel = text_query_relevant(index, relevant, q);
            if rel.is_empty() {
                without_relevant += 1;
                continue;
            }
            let result = text_to_video(index, q, scoring)?;
            total += average_precision(&result.ids(), &rel)?;
            evaluated += 1;
        }
        rows.push(TextSweepRow {
            n,
            map: (evaluated > 0).then(|| total / evaluated as f64),
            queries: queries.len(),
            evaluated,
            without_relevant,
        });
    }
    Ok(rows)
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot / (na * nb)
    }
}

/// Ranks the other videos by cosine similarity to `query_id`.
pub fn video_to_video<T: Scalar>(
    index: &VerbSpaceIndex<T>,
    query_id: &str,
    cross_dataset_only: bool,
) -> Result<RetrievalResult<T>> {
    let query = index
        .get(query_id)
        .ok_or_else(|| Error::UnknownVideo(query_id.to_string()))?;
    if cross_dataset_only && index.datasets().len() < 2 {
        return Err(Error::Invalid(
            "cross-dataset retrieval needs an index with at least two datasets".into(),
        ));
    }
    let items = index
        .entries
        .iter()
        .filter(|e| e.video_id != query.video_id)
        .filter(|e| !cross_dataset_only || e.dataset_id != query.dataset_id)
        .map(|e| Ranked {
            id: e.video_id.clone(),
            score: cosine(&query.scores, &e.scores),
        })
        .collect();
    Ok(RetrievalResult {
        query: QueryEcho::Video {
            video_id: query_id.to_string(),
            cross_dataset: cross_dataset_only,
        },
        items: rank_items(items),
    })
}
