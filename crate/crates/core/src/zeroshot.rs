//! Balanced zero-shot split from novel verb-object compositions.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::balancer::{self, BalanceConfig, DEFAULT_EPOCHS};
use crate::error::{Error, Result};
use crate::model::{ClassId, Dataset, HoiClass, Vocabulary};

pub const DEFAULT_INSTANCES_PER_CLASS: usize = 10;
pub const DEFAULT_CLASS_BUDGET: usize = 107;

/// Classes of `universe` outside `seen` whose verb and object both occur
/// somewhere in `seen`. Verbs and objects are matched by normalized name.
pub fn enumerate_candidates(seen: &Vocabulary, universe: &Vocabulary) -> Result<Vec<HoiClass>> {
    if !seen.is_subset_of(universe) {
        return Err(Error::VocabularyMismatch {
            left: "seen".into(),
            right: "universe".into(),
        });
    }
    let verbs = seen.verbs();
    let objects = seen.objects();
    Ok(universe
        .classes()
        .iter()
        .filter(|c| !seen.contains(c.class_id))
        .filter(|c| verbs.contains(&c.verb_key()) && objects.contains(&c.object_key()))
        .cloned()
        .collect())
}

#[derive(Debug, Clone)]
pub struct ZeroShotPlan<'a> {
    pub candidates: Vec<HoiClass>,
    pub instances_per_class: usize,
    /// Maximum number of classes to keep.
    pub class_budget: usize,
    /// Real images not used by the train or test split.
    pub source_pool: &'a Dataset,
    pub epochs: usize,
}

impl<'a> ZeroShotPlan<'a> {
    pub fn new(candidates: Vec<HoiClass>, source_pool: &'a Dataset) -> Self {
        Self {
            candidates,
            instances_per_class: DEFAULT_INSTANCES_PER_CLASS,
            class_budget: DEFAULT_CLASS_BUDGET,
            source_pool,
            epochs: DEFAULT_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZeroShotWarning {
    InsufficientSupply { class_id: ClassId, available: usize },
    BelowBudget { satisfiable: usize, budget: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotSplit {
    pub dataset: Dataset,
    /// Classes in the split, ascending.
    pub classes: Vec<ClassId>,
    /// Satisfiable candidates left out because the budget was already met.
    pub over_budget: Vec<ClassId>,
    pub warnings: Vec<ZeroShotWarning>,
}

/// Picks the satisfiable candidates with the largest supply (ties by class id)
/// up to the class budget and balances them to `instances_per_class` each.
pub fn build_zeroshot_split(plan: &ZeroShotPlan<'_>, universe: &Vocabulary, seed: u64) -> Result<ZeroShotSplit> {
    if plan.instances_per_class == 0 || plan.class_budget == 0 {
        return Err(Error::InvalidConfig(
            "instances_per_class and class_budget must be >= 1".into(),
        ));
    }
    let pool = plan.source_pool;
    pool.ensure_all_real()?;

    let per_class = plan.instances_per_class;
    let mut warnings = Vec::new();
    let mut satisfiable: Vec<(ClassId, usize)> = Vec::new();
    for c in &plan.candidates {
        let available = pool.count(c.class_id);
        if available >= per_class {
            satisfiable.push((c.class_id, available));
        } else {
            warnings.push(ZeroShotWarning::InsufficientSupply {
                class_id: c.class_id,
                available,
            });
        }
    }
    satisfiable.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if satisfiable.len() < plan.class_budget {
        warnings.push(ZeroShotWarning::BelowBudget {
            satisfiable: satisfiable.len(),
            budget: plan.class_budget,
        });
    }
    let over_budget: Vec<ClassId> = satisfiable.iter().skip(plan.class_budget).map(|s| s.0).collect();
    let chosen: Vec<ClassId> = satisfiable.iter().take(plan.class_budget).map(|s| s.0).collect();

    if chosen.is_empty() {
        return Ok(ZeroShotSplit {
            dataset: Dataset::empty(pool.vocabulary_ref()),
            classes: Vec::new(),
            over_budget,
            warnings,
        });
    }

    let classes = universe.subset(chosen.iter().copied())?;
    let cfg = BalanceConfig {
        target: per_class,
        top_k: classes.len(),
        epochs: plan.epochs,
        seed,
    };
    let result = balancer::balance(pool, universe, &classes, &cfg)?;
    let exact: BTreeSet<ClassId> = classes
        .class_ids()
        .filter(|c| result.balanced.count(*c) == per_class)
        .collect();
    let dataset = if exact.len() == classes.len() {
        result.balanced
    } else {
        result
            .balanced
            .retain_classes(&exact)
            .filter_images(|img| !img.instances.is_empty())
    };
    Ok(ZeroShotSplit {
        dataset,
        classes: exact.into_iter().collect(),
        over_budget,
        warnings,
    })
}

/// Fails with the first image id that `pool` shares with any of `others`.
pub fn ensure_disjoint(pool: &Dataset, others: &[&Dataset]) -> Result<()> {
    let ids = pool.image_ids();
    for other in others {
        if let Some(img) = other.images().iter().find(|i| ids.contains(i.image_id.as_str())) {
            return Err(Error::DuplicateImageId(img.image_id.clone()));
        }
    }
    Ok(())
}
