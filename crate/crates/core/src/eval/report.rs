use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ap::{class_ap_of, MatchConfig, Prediction};
use crate::error::{Error, Result};
use crate::model::{ClassId, Dataset, Vocabulary};

/// Box-plot statistics of a class-AP distribution. Quartiles use the
/// inclusive (linear interpolation over `n - 1`) method; outliers lie beyond
/// 1.5 IQR from the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSpread {
    /// Population variance.
    pub variance: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<(ClassId, f64)>,
}

impl ApSpread {
    fn of(per_class: &BTreeMap<ClassId, f64>, mean: f64) -> Self {
        let mut sorted: Vec<f64> = per_class.values().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let quartile = |k: usize| {
            let scaled = (n - 1) * k;
            let lo = scaled / 4;
            let frac = (scaled % 4) as f64 / 4.0;
            if lo + 1 < n {
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            } else {
                sorted[lo]
            }
        };
        let (q1, median, q3) = (quartile(1), quartile(2), quartile(3));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence);
        let whisker_low = inside.clone().fold(f64::INFINITY, f64::min);
        let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max);
        let variance = per_class.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Self {
            variance,
            min: sorted[0],
            q1,
            median,
            q3,
            max: sorted[n - 1],
            iqr,
            whisker_low,
            whisker_high,
            outliers: per_class
                .iter()
                .filter(|(_, v)| **v < lo_fence || **v > hi_fence)
                .map(|(c, v)| (*c, *v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_ap: BTreeMap<ClassId, f64>,
    /// Vocabulary classes without ground truth; excluded from mAP.
    pub undefined_classes: Vec<ClassId>,
    pub num_gt: BTreeMap<ClassId, usize>,
    pub map: f64,
    pub spread: ApSpread,
}

impl EvalReport {
    /// Aggregates a per-class AP vector. The mean is accumulated in ascending
    /// class-id order.
    pub fn from_class_aps(per_class_ap: BTreeMap<ClassId, f64>, undefined_classes: Vec<ClassId>) -> Result<Self> {
        if per_class_ap.is_empty() {
            return Err(Error::EmptyGroundTruth);
        }
        let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
        let spread = ApSpread::of(&per_class_ap, map);
        Ok(Self {
            per_class_ap,
            undefined_classes,
            num_gt: BTreeMap::new(),
            map,
            spread,
        })
    }
}

/// Evaluates every vocabulary class that has ground truth in `gt`.
/// Predictions for classes outside `vocab` are ignored.
pub fn evaluate(preds: &[Prediction], gt: &Dataset, vocab: &Vocabulary, cfg: &MatchConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if gt.total_instances() == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        by_class.entry(p.class_id).or_default().push(i);
    }
    let mut per_class_ap = BTreeMap::new();
    let mut num_gt = BTreeMap::new();
    let mut undefined = Vec::new();
    for c in vocab.class_ids() {
        if gt.count(c) == 0 {
            undefined.push(c);
            continue;
        }
        let picked = by_class.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        let r = class_ap_of(preds, picked, gt, c, cfg);
        num_gt.insert(c, r.num_gt);
        per_class_ap.insert(c, r.ap.unwrap_or(0.0));
    }
    let mut report = EvalReport::from_class_aps(per_class_ap, undefined)?;
    report.num_gt = num_gt;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn aps(v: &[f64]) -> BTreeMap<ClassId, f64> {
        v.iter().enumerate().map(|(i, &a)| (i as ClassId + 1, a)).collect()
    }

    #[test]
    fn all_perfect() {
        let r = EvalReport::from_class_aps(aps(&[1.0, 1.0, 1.0]), vec![]).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.spread.variance, 0.0);
        assert!(r.spread.outliers.is_empty());
    }

    #[test]
    fn two_class_toy() {
        let r = EvalReport::from_class_aps(aps(&[1.0, 0.5]), vec![]).unwrap();
        assert_eq!(r.map, 0.75);
        assert_eq!(r.spread.variance, 0.0625);
        assert_eq!(r.spread.median, 0.75);
    }

    #[test]
    fn inclusive_quartiles_and_outliers() {
        // sorted: .1 .2 .3 .4 .5 .6 .7 .8 .9 and one extreme 5.0 -> n = 10
        let r = EvalReport::from_class_aps(aps(&[0.5, 0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6, 5.0]), vec![]).unwrap();
        // (n-1)/4 = 2.25 -> .3 + .25*.1
        assert!((r.spread.q1 - 0.325).abs() < 1e-12);
        assert!((r.spread.median - 0.55).abs() < 1e-12);
        assert!((r.spread.q3 - 0.775).abs() < 1e-12);
        assert_eq!(r.spread.outliers, vec![(10, 5.0)]);
        assert_eq!(r.spread.whisker_high, 0.9);
        assert_eq!(r.spread.whisker_low, 0.1);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(
            EvalReport::from_class_aps(BTreeMap::new(), vec![]).unwrap_err(),
            Error::EmptyGroundTruth
        );
        let v = crate::model::fixtures::vocab(2);
        let gt = Dataset::empty("v");
        assert_eq!(
            evaluate(&[], &gt, &v, &MatchConfig::default()).unwrap_err(),
            Error::EmptyGroundTruth
        );
    }
}
