//! Long-tail diagnostics: per-class counts, head-to-tail ordering, train/test
//! ratios and top-K class selection.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, Dataset, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    /// One entry per vocabulary class, zero counts included.
    pub counts: BTreeMap<ClassId, usize>,
    pub total_instances: usize,
    pub max_count: usize,
    /// Minimum over classes with a non-zero count, unless `include_zero`.
    pub min_count: usize,
    pub include_zero: bool,
}

impl ClassDistribution {
    fn population(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .counts
            .values()
            .copied()
            .filter(|&c| self.include_zero || c > 0)
            .collect();
        v.sort_unstable();
        v
    }

    /// Median class count over the same population as `min_count`.
    pub fn median(&self) -> Option<f64> {
        let v = self.population();
        let n = v.len();
        match n {
            0 => None,
            _ if n % 2 == 1 => Some(v[n / 2] as f64),
            _ => Some((v[n / 2 - 1] + v[n / 2]) as f64 / 2.0),
        }
    }

    pub fn classes_with_instances(&self) -> usize {
        self.counts.values().filter(|&&c| c > 0).count()
    }
}

pub fn distribution(d: &Dataset, vocab: &Vocabulary) -> ClassDistribution {
    distribution_with(d, vocab, false)
}

pub fn distribution_with(d: &Dataset, vocab: &Vocabulary, include_zero: bool) -> ClassDistribution {
    let mut counts: BTreeMap<ClassId, usize> = vocab.class_ids().map(|c| (c, 0)).collect();
    for (&c, &n) in d.counts() {
        counts.insert(c, n);
    }
    let total_instances = counts.values().sum();
    let max_count = counts.values().copied().max().unwrap_or(0);
    let min_count = counts
        .values()
        .copied()
        .filter(|&c| include_zero || c > 0)
        .min()
        .unwrap_or(0);
    ClassDistribution {
        counts,
        total_instances,
        max_count,
        min_count,
        include_zero,
    }
}

/// Classes in descending count order; ties go to the smaller class id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortedClassList {
    entries: Vec<(ClassId, usize)>,
}

impl SortedClassList {
    pub fn from_counts<I: IntoIterator<Item = (ClassId, usize)>>(counts: I) -> Self {
        let mut entries: Vec<_> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Self { entries }
    }

    pub fn entries(&self) -> &[(ClassId, usize)] {
        &self.entries
    }

    pub fn class_ids(&self) -> impl DoubleEndedIterator<Item = ClassId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn sorted_classes(dist: &ClassDistribution) -> SortedClassList {
    SortedClassList::from_counts(dist.counts.iter().map(|(&c, &n)| (c, n)))
}

/// The `k` head classes of `sorted`, as a sub-vocabulary of `vocab`.
pub fn top_k(sorted: &SortedClassList, k: usize, vocab: &Vocabulary) -> Result<Vocabulary> {
    if k == 0 || k > sorted.len() {
        return Err(Error::KOutOfRange { k, size: sorted.len() });
    }
    vocab.subset(sorted.class_ids().take(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub class_id: ClassId,
    pub train_count: usize,
    pub test_count: usize,
    /// `train / test`; `None` (written as `"undefined"`) when the test count is zero.
    #[serde(with = "ratio_repr")]
    pub ratio: Option<f64>,
}

mod ratio_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr<'a> {
        Value(f64),
        Marker(&'a str),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => Repr::Value(*r).serialize(s),
            None => Repr::Marker("undefined").serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let repr: Repr<'_> = Deserialize::deserialize(d)?;
        Ok(match repr {
            Repr::Value(r) => Some(r),
            Repr::Marker(_) => None,
        })
    }
}

/// One row per vocabulary class comparing train and test supply.
pub fn ratio_report(train: &Dataset, test: &Dataset, vocab: &Vocabulary) -> Result<Vec<RatioRow>> {
    if train.vocabulary_ref() != test.vocabulary_ref() {
        return Err(Error::VocabularyMismatch {
            left: train.vocabulary_ref().into(),
            right: test.vocabulary_ref().into(),
        });
    }
    Ok(vocab
        .class_ids()
        .map(|c| {
            let (tr, te) = (train.count(c), test.count(c));
            RatioRow {
                class_id: c,
                train_count: tr,
                test_count: te,
                ratio: (te > 0).then(|| tr as f64 / te as f64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMedians {
    pub train: Option<f64>,
    pub test: Option<f64>,
    pub unified: Option<f64>,
}

/// Median class counts per split and over the unified counts.
pub fn split_medians(train: &Dataset, test: &Dataset, vocab: &Vocabulary) -> SplitMedians {
    let tr = distribution(train, vocab);
    let te = distribution(test, vocab);
    let mut unified = tr.clone();
    for (c, n) in unified.counts.iter_mut() {
        *n += te.counts[c];
    }
    SplitMedians {
        train: tr.median(),
        test: te.median(),
        unified: unified.median(),
    }
}
