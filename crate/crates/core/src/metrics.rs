//! Recognition and ranking metrics.
//!
//! * [`multilabel_accuracy`]: for each video, the fraction of its ground-truth
//!   verbs found among the top-`k` predicted verbs, `k` being the size of the
//!   ground-truth set. With singleton ground truth this is top-1 accuracy.
//! * [`alpha_sweep`]: the same accuracy over a grid of relevance thresholds,
//!   excluding videos whose relevant set is empty at a given threshold.
//! * [`average_precision`] / [`mean_ap`]: non-interpolated AP.
//! * [`rmse_by_verb_type`]: residuals split by manner and result verbs.
//!
//! Ties in any top-k selection go to the lower verb index.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::annotations::{relevant_set, SoftLabel};
use crate::error::{Error, Result};
use crate::model::Scheme;
use crate::scalar::{argsort_desc, Scalar};
use crate::vocab::{VerbType, VerbVocabulary};

/// Indices of the `k` highest scores.
pub fn top_k<T: Scalar>(scores: &[T], k: usize) -> Vec<usize> {
    let mut order = argsort_desc(scores);
    order.truncate(k);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    pub per_video: Vec<T>,
    pub mean: T,
    pub counted: usize,
}

impl<T: Scalar> AccuracyReport<T> {
    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = Some(scheme);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("video,accuracy\n");
        for (i, a) in self.per_video.iter().enumerate() {
            let _ = writeln!(out, "{i},{a}");
        }
        out
    }
}

fn check_scores<T: Scalar>(scores: &[T], width: Option<usize>) -> Result<()> {
    if let Some(w) = width {
        if scores.len() != w {
            return Err(Error::DimensionMismatch {
                expected: w,
                got: scores.len(),
            });
        }
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("prediction score".into()));
    }
    Ok(())
}

/// Mean over videos of `|gt ∩ top_k(pred)| / |gt|` with `k = |gt|`.
///
/// Every ground-truth set must be nonempty; filter them out beforehand
/// (see [`alpha_sweep`]).
pub fn multilabel_accuracy<T: Scalar, S: AsRef<[T]>>(
    preds: &[S],
    gts: &[BTreeSet<usize>],
) -> Result<AccuracyReport<T>> {
    if preds.len() != gts.len() {
        return Err(Error::DimensionMismatch {
            expected: gts.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut per_video = Vec::with_capacity(preds.len());
    for (i, (pred, gt)) in preds.iter().zip(gts).enumerate() {
        let scores = pred.as_ref();
        check_scores(scores, None)?;
        if gt.is_empty() {
            return Err(Error::EmptyGroundTruth(i));
        }
        if let Some(&j) = gt.iter().find(|&&j| j >= scores.len()) {
            return Err(Error::VerbIndexOutOfRange {
                index: j,
                len: scores.len(),
            });
        }
        let hits = top_k(scores, gt.len())
            .into_iter()
            .filter(|j| gt.contains(j))
            .count();
        per_video.push(T::from_usize_lossy(hits) / T::from_usize_lossy(gt.len()));
    }
    let counted = per_video.len();
    let mean = per_video.iter().copied().sum::<T>() / T::from_usize_lossy(counted);
    Ok(AccuracyReport {
        scheme: None,
        per_video,
        mean,
        counted,
    })
}

/// One threshold of an α-sweep. `accuracy` and `mean_relevant` are `None`
/// when every video was excluded at this threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub alpha: f64,
    pub accuracy: Option<T>,
    pub mean_relevant: Option<T>,
    pub counted: usize,
}

impl<T> SweepPoint<T> {
    pub fn is_empty(&self) -> bool {
        self.counted == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve<T> {
    pub points: Vec<SweepPoint<T>>,
}

impl<T: Scalar> SweepCurve<T> {
    /// Two columns, `alpha,accuracy`; excluded points read `NA`.
    pub fn to_plot_table(&self) -> String {
        let mut out = String::from("alpha,accuracy\n");
        for p in &self.points {
            match p.accuracy {
                Some(a) => {
                    let _ = writeln!(out, "{},{}", p.alpha, a);
                }
                None => {
                    let _ = writeln!(out, "{},NA", p.alpha);
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,accuracy,mean_relevant,counted\n");
        let fmt = |v: Option<T>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                p.alpha,
                fmt(p.accuracy),
                fmt(p.mean_relevant),
                p.counted
            );
        }
        out
    }
}

/// `0.00, 0.05, …, 0.95`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..20).map(|i| f64::from(i) / 20.0).collect()
}

pub fn alpha_sweep<T: Scalar, S: AsRef<[T]>>(
    preds: &[S],
    soft_gts: &[SoftLabel],
    alphas: &[f64],
) -> Result<SweepCurve<T>> {
    if preds.len() != soft_gts.len() {
        return Err(Error::DimensionMismatch {
            expected: soft_gts.len(),
            got: preds.len(),
        });
    }
    if let Some(&a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::ThresholdOutOfRange(a));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("alpha grid must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut kept_preds = Vec::new();
        let mut kept_gts = Vec::new();
        for (pred, gt) in preds.iter().zip(soft_gts) {
            let rel = relevant_set(gt, alpha);
            if !rel.is_empty() {
                kept_preds.push(pred.as_ref());
                kept_gts.push(rel);
            }
        }
        let counted = kept_gts.len();
        if counted == 0 {
            points.push(SweepPoint {
                alpha,
                accuracy: None,
                mean_relevant: None,
                counted,
            });
            continue;
        }
        let report = multilabel_accuracy::<T, _>(&kept_preds, &kept_gts)?;
        let total: usize = kept_gts.iter().map(BTreeSet::len).sum();
        points.push(SweepPoint {
            alpha,
            accuracy: Some(report.mean),
            mean_relevant: Some(T::from_usize_lossy(total) / T::from_usize_lossy(counted)),
            counted,
        });
    }
    Ok(SweepCurve { points })
}

/// Non-interpolated average precision of `ranking` against `relevant`:
/// the mean, over relevant items, of the precision at each one's rank.
pub fn average_precision<Id: Eq + Hash>(ranking: &[Id], relevant: &HashSet<Id>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Empty("relevant set"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, id) in ranking.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits != relevant.len() {
        return Err(Error::Invalid(format!(
            "{} relevant items are missing from the ranking",
            relevant.len() - hits
        )));
    }
    Ok(sum / relevant.len() as f64)
}

pub fn mean_ap<Id: Eq + Hash>(queries: &[(Vec<Id>, HashSet<Id>)]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Empty("query list"));
    }
    let mut total = 0.0;
    for (ranking, relevant) in queries {
        total += average_precision(ranking, relevant)?;
    }
    Ok(total / queries.len() as f64)
}

/// Root-mean-square residual over every `(video, verb)` cell whose verb has
/// type `verb_type`.
pub fn rmse_masked<T: Scalar, S: AsRef<[T]>>(
    preds: &[S],
    soft_gts: &[SoftLabel],
    vocab: &VerbVocabulary,
    verb_type: VerbType,
) -> Result<T> {
    if preds.len() != soft_gts.len() {
        return Err(Error::DimensionMismatch {
            expected: soft_gts.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mask = vocab.type_mask(verb_type);
    if mask.iter().all(|&m| m == 0) {
        return Err(Error::Empty("verb-type mask"));
    }
    let mut sum = T::zero();
    let mut cells = 0usize;
    for (pred, gt) in preds.iter().zip(soft_gts) {
        let scores = pred.as_ref();
        check_scores(scores, Some(vocab.len()))?;
        if gt.len() != vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                got: gt.len(),
            });
        }
        for (j, &m) in mask.iter().enumerate() {
            if m == 1 {
                let r = scores[j] - T::from_f64_lossy(gt.score(j));
                sum += r * r;
                cells += 1;
            }
        }
    }
    Ok((sum / T::from_usize_lossy(cells)).sqrt())
}

/// `(manner_rmse, result_rmse)`.
pub fn rmse_by_verb_type<T: Scalar, S: AsRef<[T]>>(
    preds: &[S],
    soft_gts: &[SoftLabel],
    vocab: &VerbVocabulary,
) -> Result<(T, T)> {
    Ok((
        rmse_masked(preds, soft_gts, vocab, VerbType::Manner)?,
        rmse_masked(preds, soft_gts, vocab, VerbType::Result)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[usize]) -> BTreeSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn two_of_three_hits() {
        // gt {0,1,2}; top-3 is {0,1,4}
        let preds = vec![vec![0.9f64, 0.8, 0.1, 0.0, 0.7]];
        let r = multilabel_accuracy(&preds, &[set(&[0, 1, 2])]).unwrap();
        assert!((r.mean - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.counted, 1);
    }

    #[test]
    fn accuracy_ties_use_lowest_index() {
        let preds = vec![vec![0.5f64, 0.5, 0.5]];
        assert_eq!(multilabel_accuracy(&preds, &[set(&[0])]).unwrap().mean, 1.0);
        assert_eq!(multilabel_accuracy(&preds, &[set(&[2])]).unwrap().mean, 0.0);
    }

    #[test]
    fn accuracy_errors() {
        let preds = vec![vec![0.5f64, 0.1]];
        assert!(matches!(
            multilabel_accuracy(&preds, &[BTreeSet::new()]),
            Err(Error::EmptyGroundTruth(0))
        ));
        assert!(multilabel_accuracy(&preds, &[set(&[5])]).is_err());
        assert!(multilabel_accuracy::<f64, Vec<f64>>(&[], &[]).is_err());
        assert!(multilabel_accuracy(&preds, &[set(&[0]), set(&[1])]).is_err());
    }

    #[test]
    fn four_video_hand_case() {
        let preds = vec![
            vec![0.1f64, 0.9, 0.3, 0.2],
            vec![0.4, 0.4, 0.1, 0.9],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.2, 0.3, 0.5, 0.6],
        ];
        let gts = [set(&[1]), set(&[0, 3]), set(&[2, 3]), set(&[0, 1, 2])];
        // v0 top1 {1} → 1; v1 top2 {3,0} → 1; v2 top2 {0,1} → 0; v3 top3 {3,2,1} → 2/3
        let r = multilabel_accuracy(&preds, &gts).unwrap();
        assert_eq!(r.per_video[..3], [1.0, 1.0, 0.0]);
        assert!((r.mean - (2.0 + 2.0 / 3.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_full_set_and_empty_points() {
        let gts = vec![
            SoftLabel::new(vec![10, 4], 10).unwrap(),
            SoftLabel::new(vec![4, 10], 10).unwrap(),
        ];
        let preds = vec![vec![0.2f64, 0.9], vec![0.6, 0.1]];
        let c = alpha_sweep(&preds, &gts, &[0.0, 0.5]).unwrap();
        assert_eq!(c.points[0].accuracy, Some(1.0));
        assert_eq!(c.points[0].mean_relevant, Some(2.0));
        assert_eq!(c.points[1].accuracy, Some(0.0));
        let c = alpha_sweep(&preds, &gts, &[1.0f64.next_down()]).unwrap();
        assert_eq!(c.points[0].counted, 2);
        let flat = vec![SoftLabel::new(vec![7, 3], 10).unwrap(); 2];
        let above = alpha_sweep(&preds, &flat, &[0.71]).unwrap();
        assert!(above.points[0].is_empty());
        assert_eq!(above.points[0].accuracy, None);
        assert!(above.to_plot_table().contains("0.71,NA"));
    }

    #[test]
    fn sweep_three_video_toy() {
        // soft labels over 2 verbs, each from 10 annotators
        let gts = vec![
            SoftLabel::new(vec![10, 4], 10).unwrap(),
            SoftLabel::new(vec![4, 10], 10).unwrap(),
            SoftLabel::new(vec![4, 4], 10).unwrap(),
        ];
        let preds = vec![vec![0.9f64, 0.1], vec![0.9, 0.1], vec![0.3, 0.8]];
        let c = alpha_sweep(&preds, &gts, &[0.3, 0.5, 0.7]).unwrap();
        // α=0.3: all videos have {0,1} → k=2 → every video 1.0
        assert_eq!(c.points[0].counted, 3);
        assert_eq!(c.points[0].accuracy, Some(1.0));
        assert_eq!(c.points[0].mean_relevant, Some(2.0));
        // α=0.5: v0 {0} hit, v1 {1} miss, v2 excluded
        assert_eq!(c.points[1].counted, 2);
        assert_eq!(c.points[1].accuracy, Some(0.5));
        assert_eq!(c.points[1].mean_relevant, Some(1.0));
        // α=0.7: same membership as 0.5
        assert_eq!(c.points[2].counted, 2);
        assert_eq!(c.points[2].accuracy, Some(0.5));
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let gts = vec![SoftLabel::new(vec![1], 1).unwrap()];
        let preds = vec![vec![0.5f64]];
        assert!(alpha_sweep(&preds, &gts, &[0.5, 0.3]).is_err());
        assert!(alpha_sweep(&preds, &gts, &[1.2]).is_err());
        assert_eq!(default_alpha_grid().len(), 20);
        assert_eq!(default_alpha_grid()[19], 0.95);
    }

    #[test]
    fn ap_examples() {
        let rel: HashSet<&str> = ["a", "c"].into_iter().collect();
        assert!((average_precision(&["a", "b", "c"], &rel).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&["a", "c", "b"], &rel).unwrap(), 1.0);
        let one: HashSet<u32> = [4].into_iter().collect();
        assert_eq!(average_precision(&[1, 2, 3, 4, 5], &one).unwrap(), 0.25);
        assert!(average_precision(&[1, 2], &HashSet::new()).is_err());
        assert!(average_precision(&[1, 2], &one).is_err());
    }

    #[test]
    fn map_examples() {
        let q = vec![
            (vec![1, 2], [1].into_iter().collect::<HashSet<_>>()),
            (vec![1, 2], [2].into_iter().collect()),
        ];
        assert_eq!(mean_ap(&q).unwrap(), 0.75);
        assert_eq!(mean_ap(&q[..1]).unwrap(), 1.0);
        assert!(mean_ap::<u8>(&[]).is_err());
    }

    #[test]
    fn rmse_examples() {
        let vocab = VerbVocabulary::parse("a,Manner\nb,Result\nc,Manner\nd,Result").unwrap();
        let gts = vec![
            SoftLabel::new(vec![0, 0, 0, 0], 4).unwrap(),
            SoftLabel::new(vec![4, 2, 1, 0], 4).unwrap(),
        ];
        let exact: Vec<Vec<f64>> = gts.iter().map(|g| g.scores()).collect();
        assert_eq!(rmse_by_verb_type(&exact, &gts, &vocab).unwrap(), (0.0, 0.0));
        let zeros = vec![SoftLabel::new(vec![0; 4], 4).unwrap(); 2];
        let half = vec![vec![0.5f64; 4]; 2];
        assert_eq!(rmse_by_verb_type(&half, &zeros, &vocab).unwrap(), (0.5, 0.5));
        // manner cells (verbs a, c): residuals 0.5,0.5 | -0.5,0.25 → mean sq 0.203125
        // result cells (verbs b, d): residuals 0.5,0.5 | 0,0.5 → mean sq 0.1875
        let (m, r) = rmse_by_verb_type(&half, &gts, &vocab).unwrap();
        assert!((m - 0.203_125f64.sqrt()).abs() < 1e-15);
        assert!((r - 0.1875f64.sqrt()).abs() < 1e-15);
        let manner_only = VerbVocabulary::parse("a,Manner").unwrap();
        let g1 = vec![SoftLabel::new(vec![1], 1).unwrap()];
        assert!(rmse_by_verb_type(&[vec![1.0f64]], &g1, &manner_only).is_err());
    }

    proptest! {
        #[test]
        fn accuracy_invariant_under_positive_rescaling(
            scores in prop::collection::vec(0.0f64..1.0, 6),
            gt in prop::collection::btree_set(0usize..6, 1..6),
            scale in 0.01f64..100.0,
        ) {
            let a = multilabel_accuracy(&[scores.clone()], &[gt.clone()]).unwrap();
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            let order_kept = argsort_desc(&scaled) == argsort_desc(&scores);
            if order_kept {
                let b = multilabel_accuracy(&[scaled], &[gt]).unwrap();
                prop_assert_eq!(a.mean, b.mean);
            }
        }

        #[test]
        fn singleton_accuracy_is_top1(
            scores in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 1..8),
            labels in prop::collection::vec(0usize..5, 8),
        ) {
            let gts: Vec<_> = scores.iter().zip(&labels).map(|(_, &l)| set(&[l])).collect();
            let r = multilabel_accuracy(&scores, &gts).unwrap();
            let top1 = scores.iter().zip(&labels).filter(|(s, &l)| argsort_desc(s)[0] == l).count();
            prop_assert_eq!(r.mean, top1 as f64 / scores.len() as f64);
        }

        #[test]
        fn ap_is_one_iff_relevant_first(
            flags in prop::collection::vec(prop::bool::ANY, 1..12),
        ) {
            prop_assume!(flags.iter().any(|&f| f));
            let ranking: Vec<usize> = (0..flags.len()).collect();
            let rel: HashSet<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
            let ap = average_precision(&ranking, &rel).unwrap();
            let first_non = flags.iter().position(|&f| !f).unwrap_or(flags.len());
            let last_rel = flags.iter().rposition(|&f| f).unwrap();
            prop_assert_eq!(ap == 1.0, last_rel < first_non);
            prop_assert!((0.0..=1.0).contains(&ap));
        }
    }
}
