use serde::{Deserialize, Serialize};

use super::ap::{average_precision, class_ap, ApMethod, MatchConfig, Prediction};
use crate::error::{Error, Result};
use crate::model::{ClassId, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipTarget {
    #[default]
    HighestConfidence,
    /// Debug probe: flip the weakest true positive instead.
    LowestConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipOutcome {
    pub class_id: ClassId,
    pub num_gt: usize,
    pub original_ap: f64,
    pub perturbed_ap: f64,
    /// `(original - perturbed) / original`.
    pub relative_drop: f64,
    /// Rank (0-based) of the flipped prediction.
    pub flipped_rank: usize,
    pub flipped_pred_index: usize,
}

/// Flips one true positive of a ranked TP/FP sequence to a false positive and
/// recomputes AP. The flipped entry keeps its rank and its ground truth stays
/// unmatched. Returns `(original, perturbed, relative drop, flipped rank)`,
/// or `None` when there is no true positive.
pub fn flip_on_flags(
    tp: &[bool],
    num_gt: usize,
    method: ApMethod,
    target: FlipTarget,
) -> Option<(f64, f64, f64, usize)> {
    let rank = match target {
        FlipTarget::HighestConfidence => tp.iter().position(|&t| t)?,
        FlipTarget::LowestConfidence => tp.iter().rposition(|&t| t)?,
    };
    let original = average_precision(tp, num_gt, method);
    let mut flipped = tp.to_vec();
    flipped[rank] = false;
    let perturbed = average_precision(&flipped, num_gt, method);
    Some((original, perturbed, (original - perturbed) / original, rank))
}

/// Measures how much one class's AP moves when a single true positive turns
/// into a false positive.
pub fn perturb_tp_flip(
    preds: &[Prediction],
    gt: &Dataset,
    class_id: ClassId,
    cfg: &MatchConfig,
    target: FlipTarget,
) -> Result<FlipOutcome> {
    let r = class_ap(preds, gt, class_id, cfg)?;
    if r.num_gt == 0 {
        return Err(Error::NoGroundTruth(class_id));
    }
    let (original_ap, perturbed_ap, relative_drop, flipped_rank) =
        flip_on_flags(&r.tp_flags(), r.num_gt, cfg.ap_method, target).ok_or(Error::NoTruePositive(class_id))?;
    Ok(FlipOutcome {
        class_id,
        num_gt: r.num_gt,
        original_ap,
        perturbed_ap,
        relative_drop,
        flipped_rank,
        flipped_pred_index: r.ranked[flipped_rank].pred_index,
    })
}
