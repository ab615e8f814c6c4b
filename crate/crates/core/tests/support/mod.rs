//! Independent reference implementations used by the property tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bright_core::eval::Prediction;
use bright_core::{BBox, ClassId, Dataset, HoiClass, Vocabulary};

fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    let union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// TP/FP flags in rank order, by insertion sort and a linear scan over all
/// ground truth of the class.
pub fn ranked_flags(preds: &[Prediction], gt: &Dataset, class_id: ClassId, thr: f64) -> (Vec<bool>, usize) {
    let mut gts = Vec::new();
    for img in gt.images() {
        for inst in &img.instances {
            if inst.class_id == class_id {
                gts.push((img.image_id.clone(), inst.human_box, inst.object_box));
            }
        }
    }
    let mut ranked: Vec<&Prediction> = Vec::new();
    for p in preds.iter().filter(|p| p.class_id == class_id) {
        let at = ranked.iter().position(|q| q.score < p.score).unwrap_or(ranked.len());
        ranked.insert(at, p);
    }
    let mut used = vec![false; gts.len()];
    let mut flags = Vec::new();
    for p in ranked {
        let mut best: Option<(usize, f64)> = None;
        for (g, (img, h, o)) in gts.iter().enumerate() {
            if used[g] || *img != p.image_id {
                continue;
            }
            let ov = iou(&p.human_box, h).min(iou(&p.object_box, o));
            if ov >= thr && best.is_none_or(|(_, b)| ov > b) {
                best = Some((g, ov));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
        }
        flags.push(best.is_some());
    }
    (flags, gts.len())
}

/// Area under the enveloped precision-recall curve, built point by point.
/// Each recall step has width `1 / num_gt`; widths are summed in units of
/// ground-truth pairs and divided once at the end.
pub fn pr_curve_ap(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut points: Vec<(usize, f64)> = Vec::new(); // (true positives so far, precision)
    let mut tp = 0;
    for (k, &f) in flags.iter().enumerate() {
        tp += usize::from(f);
        points.push((tp, tp as f64 / (k + 1) as f64));
    }
    let mut area = 0.0;
    let mut prev_tp = 0;
    for k in 0..points.len() {
        let (tp_k, _) = points[k];
        if tp_k == prev_tp {
            continue;
        }
        let envelope = points[k..].iter().map(|p| p.1).fold(f64::MIN, f64::max);
        area += (tp_k - prev_tp) as f64 * envelope;
        prev_tp = tp_k;
    }
    area / num_gt as f64
}

pub fn oracle_class_ap(preds: &[Prediction], gt: &Dataset, class_id: ClassId, thr: f64) -> Option<f64> {
    let (flags, n) = ranked_flags(preds, gt, class_id, thr);
    (n > 0).then(|| pr_curve_ap(&flags, n))
}

pub fn recount(d: &Dataset) -> BTreeMap<ClassId, usize> {
    let mut m = BTreeMap::new();
    for img in d.images() {
        for inst in &img.instances {
            *m.entry(inst.class_id).or_insert(0) += 1;
        }
    }
    m
}

/// Every (verb, object) grid cell outside `seen` that `universe` realizes.
pub fn grid_candidates(seen: &Vocabulary, universe: &Vocabulary) -> BTreeSet<ClassId> {
    let verbs: BTreeSet<String> = seen.classes().iter().map(|c| c.verb_name.to_lowercase()).collect();
    let objects: BTreeSet<String> = seen.classes().iter().map(|c| c.object_name.to_lowercase()).collect();
    let mut out = BTreeSet::new();
    for v in &verbs {
        for o in &objects {
            let hit: Option<&HoiClass> = universe
                .classes()
                .iter()
                .find(|c| c.verb_name.to_lowercase() == *v && c.object_name.to_lowercase() == *o);
            if let Some(c) = hit {
                if !seen.contains(c.class_id) {
                    out.insert(c.class_id);
                }
            }
        }
    }
    out
}
