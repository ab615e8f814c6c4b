//! Class-aware under-sampling that brings every selected class to exactly
//! `L` instances, plus the test-first split protocol and deficit filling.
//!
//! # Random stream
//!
//! One [`StreamRng`](crate::rng::StreamRng) seeded from [`BalanceConfig::seed`]
//! drives a whole [`balance`] call. Draws happen in this order and nowhere else:
//!
//! 1. For each epoch `1..=N`:
//!    * ADD, classes tail to head: a class below `L` shuffles the list of pool
//!      images containing it (ascending pool index) and walks it, adding
//!      non-member images until the class reaches `L` or the list runs out.
//!    * REMOVE (all epochs but the last), classes head to tail: a class above
//!      `L` shuffles the same candidate list and walks it, removing member
//!      images while the class stays above `L`.
//! 2. Trimming, classes head to tail: a class above `L` shuffles the handles
//!    of its instances inside the balanced set (ascending image, then
//!    annotation order) and deletes the first `count - L`.
//!
//! Classes are ordered head to tail by descending count in the pool, ties by
//! ascending class id. A class that needs no work draws nothing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, Dataset, ImageRecord, Provenance, Vocabulary};
use crate::rng;
use crate::stats::SortedClassList;

/// Missing instances per class.
pub type Deficits = BTreeMap<ClassId, usize>;

pub const DEFAULT_EPOCHS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceConfig {
    /// Target instances per class (`L`).
    pub target: usize,
    /// Number of head classes to balance (`K`).
    pub top_k: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl BalanceConfig {
    pub fn new(target: usize, top_k: usize, seed: u64) -> Self {
        Self {
            target,
            top_k,
            epochs: DEFAULT_EPOCHS,
            seed,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target == 0 || self.top_k == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "target, top_k and epochs must all be >= 1 (got {}, {}, {})",
                self.target,
                self.top_k,
                self.epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResult {
    /// Images picked for the balanced set, annotations restricted to the
    /// selected classes and trimmed to `L` per class.
    pub balanced: Dataset,
    /// Untouched pool images that were not picked.
    pub remainder: Dataset,
    pub deficits: Deficits,
    /// Instance annotations deleted by trimming.
    pub removed_annotations: usize,
    /// Distinct images that lost at least one annotation to trimming.
    pub images_with_removed_annotations: usize,
    /// Selected classes, head to tail.
    pub class_order: Vec<ClassId>,
}

/// Balances the `classes` of `pool` to exactly `cfg.target` instances each.
///
/// Classes whose pool supply is below the target end up in `deficits`
/// instead of failing. `vocab` is the vocabulary `pool` was validated against.
pub fn balance(pool: &Dataset, vocab: &Vocabulary, classes: &Vocabulary, cfg: &BalanceConfig) -> Result<BalanceResult> {
    cfg.validate()?;
    if classes.len() != cfg.top_k {
        return Err(Error::InvalidConfig(alloc::format!(
            "top_k is {} but {} classes were selected",
            cfg.top_k,
            classes.len()
        )));
    }
    if let Some(c) = classes.class_ids().find(|&c| !vocab.contains(c)) {
        return Err(Error::ClassNotInVocabulary(c));
    }
    let order = SortedClassList::from_counts(classes.class_ids().map(|c| (c, pool.count(c))));
    let class_order: Vec<ClassId> = order.class_ids().collect();
    let dense: BTreeMap<ClassId, usize> = class_order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let k = class_order.len();
    let target = cfg.target;

    let images = pool.images();
    // Per image: (dense class, instance count) for selected classes only.
    let mut image_classes: Vec<Vec<(usize, usize)>> = Vec::with_capacity(images.len());
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, img) in images.iter().enumerate() {
        let mut per: BTreeMap<usize, usize> = BTreeMap::new();
        for inst in &img.instances {
            if let Some(&d) = dense.get(&inst.class_id) {
                *per.entry(d).or_insert(0) += 1;
            }
        }
        for &d in per.keys() {
            candidates[d].push(idx);
        }
        image_classes.push(per.into_iter().collect());
    }

    let mut member = vec![false; images.len()];
    let mut counts = vec![0usize; k];
    let mut rng = rng::stream(cfg.seed);

    for epoch in 1..=cfg.epochs {
        let mut touched = false;
        for ci in (0..k).rev() {
            if counts[ci] >= target {
                continue;
            }
            touched = true;
            let mut walk = candidates[ci].clone();
            walk.shuffle(&mut rng);
            for img in walk {
                if counts[ci] >= target {
                    break;
                }
                if member[img] {
                    continue;
                }
                member[img] = true;
                for &(d, n) in &image_classes[img] {
                    counts[d] += n;
                }
            }
        }
        if epoch < cfg.epochs {
            for ci in 0..k {
                if counts[ci] <= target {
                    continue;
                }
                touched = true;
                let mut walk = candidates[ci].clone();
                walk.shuffle(&mut rng);
                for img in walk {
                    if counts[ci] <= target {
                        break;
                    }
                    if !member[img] {
                        continue;
                    }
                    member[img] = false;
                    for &(d, n) in &image_classes[img] {
                        counts[d] -= n;
                    }
                }
            }
        }
        // Later epochs would draw nothing and change nothing.
        if !touched {
            break;
        }
    }

    let deficits: Deficits = class_order
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n < target)
        .map(|(&c, &n)| (c, target - n))
        .collect();

    // Trim over-full classes annotation by annotation.
    let mut dropped: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (ci, &class_id) in class_order.iter().enumerate() {
        if counts[ci] <= target {
            continue;
        }
        let mut handles: Vec<(usize, usize)> = candidates[ci]
            .iter()
            .filter(|&&img| member[img])
            .flat_map(|&img| {
                images[img]
                    .instances
                    .iter()
                    .enumerate()
                    .filter(move |(_, inst)| inst.class_id == class_id)
                    .map(move |(j, _)| (img, j))
            })
            .collect();
        handles.shuffle(&mut rng);
        let excess = counts[ci] - target;
        dropped.extend(handles.into_iter().take(excess));
        counts[ci] = target;
    }

    let selected = classes.id_set();
    let mut balanced = Vec::new();
    let mut remainder = Vec::new();
    for (idx, img) in images.iter().enumerate() {
        if member[idx] {
            let instances = img
                .instances
                .iter()
                .enumerate()
                .filter(|(j, inst)| selected.contains(&inst.class_id) && !dropped.contains(&(idx, *j)))
                .map(|(_, inst)| inst.clone())
                .collect();
            balanced.push(ImageRecord {
                instances,
                ..img.clone()
            });
        } else {
            remainder.push(img.clone());
        }
    }
    let images_with_removed_annotations = dropped.iter().map(|&(img, _)| img).collect::<BTreeSet<_>>().len();

    Ok(BalanceResult {
        balanced: Dataset::from_parts(pool.vocabulary_ref().into(), balanced),
        remainder: Dataset::from_parts(pool.vocabulary_ref().into(), remainder),
        deficits,
        removed_annotations: dropped.len(),
        images_with_removed_annotations,
        class_order,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAudit {
    pub images: usize,
    pub instances: usize,
    pub removed_annotations: usize,
    pub images_with_removed_annotations: usize,
    pub deficits: Deficits,
}

impl SplitAudit {
    fn of(r: &BalanceResult) -> Self {
        Self {
            images: r.balanced.len(),
            instances: r.balanced.total_instances(),
            removed_annotations: r.removed_annotations,
            images_with_removed_annotations: r.images_with_removed_annotations,
            deficits: r.deficits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub test: SplitAudit,
    pub train: SplitAudit,
    pub remainder_images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub test: Dataset,
    pub train: Dataset,
    /// Real images used by neither split.
    pub remainder: Dataset,
    pub train_deficits: Deficits,
    pub audit: Audit,
}

/// Test-first construction: the balanced test split is drawn from `total`
/// first, then the train split is balanced from what is left.
pub fn build_splits(
    total: &Dataset,
    vocab: &Vocabulary,
    classes: &Vocabulary,
    test_cfg: &BalanceConfig,
    train_cfg: &BalanceConfig,
) -> Result<Splits> {
    total.ensure_all_real()?;
    let test = balance(total, vocab, classes, test_cfg)?;
    let train = balance(&test.remainder, vocab, classes, train_cfg)?;
    let audit = Audit {
        test: SplitAudit::of(&test),
        train: SplitAudit::of(&train),
        remainder_images: train.remainder.len(),
    };
    Ok(Splits {
        test: test.balanced,
        train: train.balanced,
        remainder: train.remainder,
        train_deficits: train.deficits,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillOutcome {
    pub train: Dataset,
    pub accepted_images: usize,
    pub accepted_instances: usize,
    /// Augmented instances beyond what the deficits asked for.
    pub rejected_surplus: usize,
}

/// Tops up deficient classes with generated or crawled images.
///
/// Augmented images are consumed in order; from each, instances are accepted
/// while their class still has an open deficit. Images contributing nothing
/// are dropped. Any deficit left open is an error.
pub fn fill_deficits(train: &Dataset, deficits: &Deficits, augmented: &Dataset) -> Result<FillOutcome> {
    if deficits.is_empty() {
        return Ok(FillOutcome {
            train: train.clone(),
            accepted_images: 0,
            accepted_instances: 0,
            rejected_surplus: 0,
        });
    }
    let mut need = deficits.clone();
    let mut accepted = Vec::new();
    let mut accepted_instances = 0;
    let mut rejected_surplus = 0;
    for img in augmented.images() {
        let mut kept = Vec::new();
        for inst in &img.instances {
            if inst.provenance == Provenance::Real {
                return Err(Error::InvalidAugmentation(alloc::format!(
                    "image `{}` carries a real-provenance instance",
                    img.image_id
                )));
            }
            let Some(open) = need.get_mut(&inst.class_id) else {
                return Err(Error::InvalidAugmentation(alloc::format!(
                    "image `{}` carries class {} which has no deficit",
                    img.image_id,
                    inst.class_id
                )));
            };
            if *open > 0 {
                *open -= 1;
                kept.push(inst.clone());
            } else {
                rejected_surplus += 1;
            }
        }
        if !kept.is_empty() {
            accepted_instances += kept.len();
            accepted.push(ImageRecord {
                instances: kept,
                ..img.clone()
            });
        }
    }
    let residual: Vec<(ClassId, usize)> = need.into_iter().filter(|&(_, n)| n > 0).collect();
    if !residual.is_empty() {
        return Err(Error::ResidualDeficit(residual));
    }
    let accepted_images = accepted.len();
    let extra = Dataset::from_parts(augmented.vocabulary_ref().into(), accepted);
    Ok(FillOutcome {
        train: train.merge(&extra)?,
        accepted_images,
        accepted_instances,
        rejected_surplus,
    })
}
