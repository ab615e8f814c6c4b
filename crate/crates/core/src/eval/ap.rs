use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, ClassId, Dataset};

/// One scored detection of a (human, object, interaction) triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub human_box: BBox,
    pub object_box: BBox,
    pub class_id: ClassId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMethod {
    /// Area under the monotone precision envelope over every recall step.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// A pair matches when `min(IoU_human, IoU_object) >= iou_threshold`.
    pub iou_threshold: f64,
    #[serde(default)]
    pub ap_method: ApMethod,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            ap_method: ApMethod::AllPoint,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "iou_threshold must lie in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    /// Position in the caller's prediction slice.
    pub pred_index: usize,
    pub score: f64,
    /// `(image index, instance index)` of the ground truth it matched.
    pub matched_gt: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: ClassId,
    /// `None` when the class has no ground truth.
    pub ap: Option<f64>,
    pub num_gt: usize,
    /// The class's predictions in ranking order.
    pub ranked: Vec<RankedPrediction>,
}

impl ClassAp {
    pub fn tp_flags(&self) -> Vec<bool> {
        self.ranked.iter().map(|r| r.matched_gt.is_some()).collect()
    }

    /// Matched predictions, highest score first.
    pub fn true_positives(&self) -> impl Iterator<Item = (usize, &RankedPrediction)> {
        self.ranked.iter().enumerate().filter(|(_, r)| r.matched_gt.is_some())
    }

    pub fn num_tp(&self) -> usize {
        self.true_positives().count()
    }
}

/// `(image index, instance index)` pairs keyed by image id.
pub(crate) type GtIndex<'a> = BTreeMap<&'a str, Vec<(usize, usize)>>;

/// Ground-truth pairs of one class grouped by image id.
pub(crate) fn gt_index(gt: &Dataset, class_id: ClassId) -> (GtIndex<'_>, usize) {
    let mut by_image: GtIndex<'_> = BTreeMap::new();
    let mut n = 0;
    for (i, img) in gt.images().iter().enumerate() {
        for (j, inst) in img.instances.iter().enumerate() {
            if inst.class_id == class_id {
                by_image.entry(img.image_id.as_str()).or_default().push((i, j));
                n += 1;
            }
        }
    }
    (by_image, n)
}

/// AP of one class. Predictions are ranked by descending score (ties keep
/// input order) and matched greedily: each takes the unmatched ground-truth
/// pair of its image with the highest pair overlap at or above the threshold.
pub fn class_ap(preds: &[Prediction], gt: &Dataset, class_id: ClassId, cfg: &MatchConfig) -> Result<ClassAp> {
    cfg.validate()?;
    let picked: Vec<usize> = preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.class_id == class_id)
        .map(|(i, _)| i)
        .collect();
    Ok(class_ap_of(preds, &picked, gt, class_id, cfg))
}

pub(crate) fn class_ap_of(
    preds: &[Prediction],
    picked: &[usize],
    gt: &Dataset,
    class_id: ClassId,
    cfg: &MatchConfig,
) -> ClassAp {
    let (by_image, num_gt) = gt_index(gt, class_id);
    let mut order = picked.to_vec();
    // Stable: equal scores keep input order.
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut taken: BTreeSet<(usize, usize)> = BTreeSet::new();
    let images = gt.images();
    let ranked: Vec<RankedPrediction> = order
        .into_iter()
        .map(|pi| {
            let p = &preds[pi];
            let mut best: Option<((usize, usize), f64)> = None;
            if let Some(cands) = by_image.get(p.image_id.as_str()) {
                for &(i, j) in cands {
                    if taken.contains(&(i, j)) {
                        continue;
                    }
                    let g = &images[i].instances[j];
                    let ov = p.human_box.iou(&g.human_box).min(p.object_box.iou(&g.object_box));
                    if ov >= cfg.iou_threshold && best.is_none_or(|(_, b)| ov > b) {
                        best = Some(((i, j), ov));
                    }
                }
            }
            let matched_gt = best.map(|(h, _)| h);
            if let Some(h) = matched_gt {
                taken.insert(h);
            }
            RankedPrediction {
                pred_index: pi,
                score: p.score,
                matched_gt,
            }
        })
        .collect();

    let ap = (num_gt > 0).then(|| {
        let flags: Vec<bool> = ranked.iter().map(|r| r.matched_gt.is_some()).collect();
        average_precision(&flags, num_gt, cfg.ap_method)
    });
    ClassAp {
        class_id,
        ap,
        num_gt,
        ranked,
    }
}

/// AP of a ranked TP/FP sequence against `num_gt` ground-truth pairs.
///
/// All-point: `(1 / num_gt) * sum over TP ranks k of max_{j >= k} precision(j)`.
pub fn average_precision(tp: &[bool], num_gt: usize, method: ApMethod) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut cum = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for &t in tp {
        hits += usize::from(t);
        cum.push(hits);
    }
    let precision: Vec<f64> = cum
        .iter()
        .enumerate()
        .map(|(j, &h)| h as f64 / (j + 1) as f64)
        .collect();
    let mut envelope = precision.clone();
    for j in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[j] = envelope[j].max(envelope[j + 1]);
    }
    match method {
        ApMethod::AllPoint => {
            let mut sum = 0.0;
            for (j, &t) in tp.iter().enumerate() {
                if t {
                    sum += envelope[j];
                }
            }
            sum / num_gt as f64
        }
        ApMethod::ElevenPoint => {
            let mut sum = 0.0;
            for step in 0..=10usize {
                // First rank whose recall reaches step / 10, compared in integers.
                let first = cum.iter().position(|&h| h * 10 >= step * num_gt);
                if let Some(j) = first {
                    sum += envelope[j];
                }
            }
            sum / 11.0
        }
    }
}
