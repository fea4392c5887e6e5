//! Average precision and mAP against full ground truth.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// AP per class; `None` for classes without positives.
    pub per_class_ap: Vec<Option<f64>>,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub skipped_classes: Vec<usize>,
}

/// Indices ordered by descending score, ties by ascending index.
pub fn ranking(scores: ArrayView1<'_, f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Mean of precision@k over the ranks `k` that hold a relevant item.
pub fn average_precision(scores: ArrayView1<'_, f64>, relevant: ArrayView1<'_, bool>) -> Result<f64> {
    if scores.len() != relevant.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} relevance flags",
            scores.len(),
            relevant.len()
        )));
    }
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(Error::UndefinedAp);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, idx) in ranking(scores).into_iter().enumerate() {
        if relevant[idx] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

pub fn evaluate(predictions: &Array2<f64>, truth: &Array2<bool>) -> Result<EvalResult> {
    if predictions.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs truth {:?}",
            predictions.dim(),
            truth.dim()
        )));
    }
    let mut per_class_ap = Vec::with_capacity(truth.ncols());
    let mut skipped_classes = Vec::new();
    for (k, (scores, rel)) in predictions.columns().into_iter().zip(truth.columns()).enumerate() {
        match average_precision(scores, rel) {
            Ok(ap) => per_class_ap.push(Some(ap)),
            Err(Error::UndefinedAp) => {
                per_class_ap.push(None);
                skipped_classes.push(k);
            }
            Err(e) => return Err(e),
        }
    }
    let scored: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::NoScorableClasses);
    }
    let map = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(EvalResult {
        per_class_ap,
        map,
        skipped_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, array};
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let ap = average_precision(arr1(&[0.9, 0.8, 0.1]).view(), arr1(&[true, false, true]).view()).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn all_relevant_is_one() {
        let ap = average_precision(arr1(&[0.1, 0.7, 0.3]).view(), arr1(&[true; 3]).view()).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn single_relevant_ranked_last() {
        let ap = average_precision(
            arr1(&[0.9, 0.8, 0.7, 0.1]).view(),
            arr1(&[false, false, false, true]).view(),
        )
        .unwrap();
        assert_eq!(ap, 0.25);
    }

    #[test]
    fn no_relevant_is_undefined() {
        let r = average_precision(arr1(&[0.5, 0.2]).view(), arr1(&[false, false]).view());
        assert!(matches!(r, Err(Error::UndefinedAp)));
    }

    #[test]
    fn ties_break_by_index() {
        // Constant scores rank by index: relevant at positions 1 and 3.
        let ap = average_precision(arr1(&[0.5; 4]).view(), arr1(&[false, true, false, true]).view()).unwrap();
        assert!((ap - (0.5 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_skips_empty_classes() {
        let preds = array![[0.9, 0.1], [0.2, 0.3], [0.6, 0.4]];
        let truth = array![[true, false], [false, false], [true, false]];
        let r = evaluate(&preds, &truth).unwrap();
        assert_eq!(r.skipped_classes, vec![1]);
        assert_eq!(r.per_class_ap, vec![Some(1.0), None]);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn evaluate_all_skipped_is_error() {
        let r = evaluate(&array![[0.5, 0.5]], &array![[false, false]]);
        assert!(matches!(r, Err(Error::NoScorableClasses)));
    }

    #[test]
    fn perfect_predictor_with_jitter() {
        let truth = array![[true, false], [false, true], [true, true], [false, false]];
        let preds = Array2::from_shape_fn(truth.dim(), |(i, j)| {
            truth[[i, j]] as u8 as f64 + 1e-6 * i as f64
        });
        assert_eq!(evaluate(&preds, &truth).unwrap().map, 1.0);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            pairs in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 1..30)
        ) {
            prop_assume!(pairs.iter().any(|p| p.1));
            let s = arr1(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let r = arr1(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let base = average_precision(s.view(), r.view()).unwrap();
            let t = s.mapv(|x| (2.0 * x).exp() + 3.0);
            prop_assert_eq!(base, average_precision(t.view(), r.view()).unwrap());
            prop_assert!(base > 0.0 && base <= 1.0);
            let n_rel = r.iter().filter(|&&b| b).count();
            let order = ranking(s.view());
            let separated = order[..n_rel].iter().all(|&i| r[i]);
            prop_assert_eq!(base == 1.0, separated);
        }
    }
}
