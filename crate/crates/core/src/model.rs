//! Canonical data model: HOI classes, vocabularies, boxes, images and datasets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = u32;

/// A (verb, object) interaction class. The subject is always a person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoiClass {
    pub class_id: ClassId,
    pub verb_id: u32,
    pub object_id: u32,
    #[serde(rename = "verb")]
    pub verb_name: String,
    #[serde(rename = "object")]
    pub object_name: String,
}

impl HoiClass {
    pub fn new(class_id: ClassId, verb_id: u32, object_id: u32, verb: &str, object: &str) -> Self {
        Self {
            class_id,
            verb_id,
            object_id,
            verb_name: verb.into(),
            object_name: object.into(),
        }
    }

    /// Verb as it reads in running text (`sit_on` -> `sit on`).
    pub fn verb_text(&self) -> String {
        self.verb_name.replace('_', " ")
    }

    pub fn object_text(&self) -> String {
        self.object_name.replace('_', " ")
    }

    pub fn verb_key(&self) -> String {
        name_key(&self.verb_name)
    }

    pub fn object_key(&self) -> String {
        name_key(&self.object_name)
    }
}

/// Spelling-insensitive identity for verb and object names: `cell phone`,
/// `Cell_Phone` and `cell_phone` all map to `cell_phone`.
pub fn name_key(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| if c == ' ' { '_' } else { c.to_ascii_lowercase() })
        .collect()
}

/// An ordered set of HOI classes, sorted by `class_id`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<HoiClass>", into = "Vec<HoiClass>")]
pub struct Vocabulary {
    classes: Vec<HoiClass>,
}

impl Vocabulary {
    pub fn new(mut classes: Vec<HoiClass>) -> Result<Self> {
        classes.sort_by_key(|c| c.class_id);
        let mut pairs = BTreeSet::new();
        for (i, c) in classes.iter().enumerate() {
            if i > 0 && classes[i - 1].class_id == c.class_id {
                return Err(Error::InvalidVocabulary(alloc::format!(
                    "duplicate class_id {}",
                    c.class_id
                )));
            }
            if c.verb_name.trim().is_empty() || c.object_name.trim().is_empty() {
                return Err(Error::InvalidVocabulary(alloc::format!(
                    "class {} has an empty verb or object name",
                    c.class_id
                )));
            }
            if !pairs.insert((c.verb_id, c.object_id)) {
                return Err(Error::InvalidVocabulary(alloc::format!(
                    "duplicate (verb_id, object_id) pair ({}, {})",
                    c.verb_id,
                    c.object_id
                )));
            }
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[HoiClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, class_id: ClassId) -> Option<&HoiClass> {
        self.classes
            .binary_search_by_key(&class_id, |c| c.class_id)
            .ok()
            .map(|i| &self.classes[i])
    }

    pub fn contains(&self, class_id: ClassId) -> bool {
        self.get(class_id).is_some()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.class_id)
    }

    pub fn id_set(&self) -> BTreeSet<ClassId> {
        self.class_ids().collect()
    }

    /// Distinct verbs, keyed by normalized name.
    pub fn verbs(&self) -> BTreeSet<String> {
        self.classes.iter().map(HoiClass::verb_key).collect()
    }

    /// Distinct objects, keyed by normalized name.
    pub fn objects(&self) -> BTreeSet<String> {
        self.classes.iter().map(HoiClass::object_key).collect()
    }

    /// The sub-vocabulary holding exactly `ids`.
    pub fn subset<I: IntoIterator<Item = ClassId>>(&self, ids: I) -> Result<Self> {
        let mut classes = Vec::new();
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                continue;
            }
            let class = self.get(id).ok_or(Error::ClassNotInVocabulary(id))?;
            classes.push(class.clone());
        }
        classes.sort_by_key(|c| c.class_id);
        Ok(Self { classes })
    }

    /// True when every class here also appears in `other` with the same id
    /// and the same verb/object names.
    pub fn is_subset_of(&self, other: &Vocabulary) -> bool {
        self.classes.iter().all(|c| {
            other
                .get(c.class_id)
                .is_some_and(|o| o.verb_key() == c.verb_key() && o.object_key() == c.object_key())
        })
    }
}

impl TryFrom<Vec<HoiClass>> for Vocabulary {
    type Error = Error;

    fn try_from(classes: Vec<HoiClass>) -> Result<Self> {
        Self::new(classes)
    }
}

impl From<Vocabulary> for Vec<HoiClass> {
    fn from(v: Vocabulary) -> Self {
        v.classes
    }
}

/// Axis-aligned box in pixel coordinates, serialized as `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Finite with positive extent.
    pub fn is_proper(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.x2 > self.x1 && self.y2 > self.y1
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= width && self.y2 <= height
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Clamps to `[0, width] x [0, height]`; the flag reports whether anything moved.
    pub fn clamped(&self, width: f64, height: f64) -> (BBox, bool) {
        let c = BBox {
            x1: self.x1.clamp(0.0, width),
            y1: self.y1.clamp(0.0, height),
            x2: self.x2.clamp(0.0, width),
            y2: self.y2.clamp(0.0, height),
        };
        let moved = c != *self;
        (c, moved)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Real,
    Generated,
    Crawled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoiInstance {
    pub human_box: BBox,
    pub object_box: BBox,
    pub class_id: ClassId,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub instances: Vec<HoiInstance>,
}

impl ImageRecord {
    pub fn count_class(&self, class_id: ClassId) -> usize {
        self.instances.iter().filter(|i| i.class_id == class_id).count()
    }

    pub fn contains_class(&self, class_id: ClassId) -> bool {
        self.instances.iter().any(|i| i.class_id == class_id)
    }

    pub fn is_all_real(&self) -> bool {
        self.instances.iter().all(|i| i.provenance == Provenance::Real)
    }

    /// Clamps every box to the image bounds and returns how many boxes moved.
    pub fn clamp_boxes(&mut self) -> usize {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let mut moved = 0;
        for inst in &mut self.instances {
            for b in [&mut inst.human_box, &mut inst.object_box] {
                let (c, m) = b.clamped(w, h);
                *b = c;
                moved += usize::from(m);
            }
        }
        moved
    }
}

/// A validated collection of annotated images with a per-class instance index.
///
/// Immutable once built: every transformation returns a new `Dataset`, which
/// keeps the count index in lockstep with the images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vocabulary_ref: String,
    images: Vec<ImageRecord>,
    counts: BTreeMap<ClassId, usize>,
}

impl Dataset {
    pub fn empty(vocabulary_ref: impl Into<String>) -> Self {
        Self::from_parts(vocabulary_ref.into(), Vec::new())
    }

    /// Validates `images` against `vocab`: unique image ids, known classes,
    /// non-degenerate boxes inside the image bounds.
    pub fn new(vocab: &Vocabulary, vocabulary_ref: impl Into<String>, images: Vec<ImageRecord>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for img in &images {
            if !ids.insert(img.image_id.as_str()) {
                return Err(Error::DuplicateImageId(img.image_id.clone()));
            }
            if img.width == 0 || img.height == 0 {
                return Err(Error::InvalidImageSize {
                    image_id: img.image_id.clone(),
                    width: img.width,
                    height: img.height,
                });
            }
            let (w, h) = (f64::from(img.width), f64::from(img.height));
            for inst in &img.instances {
                if !vocab.contains(inst.class_id) {
                    return Err(Error::UnknownClass {
                        image_id: img.image_id.clone(),
                        class_id: inst.class_id,
                    });
                }
                for b in [&inst.human_box, &inst.object_box] {
                    if !b.is_proper() || !b.within(w, h) {
                        return Err(Error::DegenerateBox {
                            image_id: img.image_id.clone(),
                            bbox: b.to_array(),
                        });
                    }
                }
            }
        }
        Ok(Self::from_parts(vocabulary_ref.into(), images))
    }

    /// Builds the count index for images already known to be valid.
    pub(crate) fn from_parts(vocabulary_ref: String, images: Vec<ImageRecord>) -> Self {
        let mut counts = BTreeMap::new();
        for inst in images.iter().flat_map(|i| &i.instances) {
            *counts.entry(inst.class_id).or_insert(0) += 1;
        }
        Self {
            vocabulary_ref,
            images,
            counts,
        }
    }

    pub fn vocabulary_ref(&self) -> &str {
        &self.vocabulary_ref
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn into_images(self) -> Vec<ImageRecord> {
        self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn count(&self, class_id: ClassId) -> usize {
        self.counts.get(&class_id).copied().unwrap_or(0)
    }

    /// Instance counts for every class with at least one instance.
    pub fn counts(&self) -> &BTreeMap<ClassId, usize> {
        &self.counts
    }

    pub fn total_instances(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn image_ids(&self) -> BTreeSet<&str> {
        self.images.iter().map(|i| i.image_id.as_str()).collect()
    }

    /// Image-wise union. Both sides must share the vocabulary and have
    /// disjoint image ids.
    pub fn merge(&self, other: &Dataset) -> Result<Dataset> {
        if self.vocabulary_ref != other.vocabulary_ref {
            return Err(Error::VocabularyMismatch {
                left: self.vocabulary_ref.clone(),
                right: other.vocabulary_ref.clone(),
            });
        }
        let ids = self.image_ids();
        if let Some(dup) = other.images.iter().find(|i| ids.contains(i.image_id.as_str())) {
            return Err(Error::DuplicateImageId(dup.image_id.clone()));
        }
        let mut images = self.images.clone();
        images.extend(other.images.iter().cloned());
        Ok(Self::from_parts(self.vocabulary_ref.clone(), images))
    }

    /// Drops every annotation whose class is not in `keep`. Images are kept even
    /// when they end up with no annotations.
    pub fn retain_classes(&self, keep: &BTreeSet<ClassId>) -> Dataset {
        let images = self
            .images
            .iter()
            .map(|img| {
                let mut img = img.clone();
                img.instances.retain(|i| keep.contains(&i.class_id));
                img
            })
            .collect();
        Self::from_parts(self.vocabulary_ref.clone(), images)
    }

    pub fn filter_images<F: FnMut(&ImageRecord) -> bool>(&self, mut keep: F) -> Dataset {
        let images = self.images.iter().filter(|i| keep(i)).cloned().collect();
        Self::from_parts(self.vocabulary_ref.clone(), images)
    }

    pub fn ensure_all_real(&self) -> Result<()> {
        match self.images.iter().find(|i| !i.is_all_real()) {
            Some(img) => Err(Error::NonRealProvenance {
                image_id: img.image_id.clone(),
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::format;
    use alloc::vec;

    pub fn vocab(n: u32) -> Vocabulary {
        Vocabulary::new(
            (1..=n)
                .map(|i| HoiClass::new(i, i, 100 + i, &format!("verb{i}"), &format!("object{i}")))
                .collect(),
        )
        .unwrap()
    }

    pub fn inst(class_id: ClassId) -> HoiInstance {
        HoiInstance {
            human_box: BBox::new(10.0, 10.0, 50.0, 90.0),
            object_box: BBox::new(40.0, 30.0, 90.0, 80.0),
            class_id,
            provenance: Provenance::Real,
        }
    }

    pub fn image(id: &str, classes: &[ClassId]) -> ImageRecord {
        ImageRecord {
            image_id: id.into(),
            file_name: format!("{id}.jpg"),
            width: 100,
            height: 100,
            instances: classes.iter().map(|&c| inst(c)).collect(),
        }
    }

    pub fn dataset(images: Vec<ImageRecord>) -> Dataset {
        let max = images
            .iter()
            .flat_map(|i| &i.instances)
            .map(|i| i.class_id)
            .max()
            .unwrap_or(1);
        Dataset::new(&vocab(max.max(10)), "test-vocab", images).unwrap()
    }

    #[test]
    fn fixture_builds() {
        let d = dataset(vec![image("a", &[1, 2])]);
        assert_eq!(d.total_instances(), 2);
    }
}
