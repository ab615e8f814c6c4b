//! Seeded synthetic annotation pools, augmentation sets and prediction dumps
//! for tests, demos and scale checks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::balancer::Deficits;
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::model::{BBox, ClassId, Dataset, HoiClass, HoiInstance, ImageRecord, Provenance, Vocabulary};
use crate::rng::{self, StreamRng};

pub const CANVAS_WIDTH: u32 = 640;
pub const CANVAS_HEIGHT: u32 = 480;

/// `n` classes over a grid of verbs and objects, ids `1..=n`.
pub fn vocabulary(n: u32) -> Vocabulary {
    let side = (1..).find(|s: &u32| s * s >= n).unwrap_or(1);
    Vocabulary::new(
        (0..n)
            .map(|i| {
                let (v, o) = (i % side + 1, i / side + 1);
                HoiClass::new(i + 1, v, o, &format!("verb{v}"), &format!("object{o}"))
            })
            .collect(),
    )
    .unwrap_or_else(|_| unreachable!("grid classes are unique"))
}

fn random_box(r: &mut StreamRng, w: f64, h: f64) -> BBox {
    let bw = r.random_range(32.0..w / 2.0);
    let bh = r.random_range(32.0..h / 2.0);
    let x = r.random_range(0.0..w - bw);
    let y = r.random_range(0.0..h - bh);
    BBox::new(x, y, x + bw, y + bh)
}

fn random_instance(r: &mut StreamRng, class_id: ClassId, provenance: Provenance) -> HoiInstance {
    let (w, h) = (f64::from(CANVAS_WIDTH), f64::from(CANVAS_HEIGHT));
    HoiInstance {
        human_box: random_box(r, w, h),
        object_box: random_box(r, w, h),
        class_id,
        provenance,
    }
}

fn record(image_id: String, instances: Vec<HoiInstance>) -> ImageRecord {
    ImageRecord {
        file_name: format!("{image_id}.jpg"),
        image_id,
        width: CANVAS_WIDTH,
        height: CANVAS_HEIGHT,
        instances,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPoolSpec {
    pub images: usize,
    /// Distinct classes per image, drawn from `1..=max`.
    pub max_classes_per_image: usize,
    /// Instances per class within an image, drawn from `1..=max`.
    pub max_instances_per_class: usize,
}

impl Default for RandomPoolSpec {
    fn default() -> Self {
        Self {
            images: 120,
            max_classes_per_image: 4,
            max_instances_per_class: 3,
        }
    }
}

/// Images whose classes follow a long tail: the class at position `i` of the
/// vocabulary is drawn with weight proportional to `1 / (i + 1)`.
pub fn random_pool(vocab: &Vocabulary, vocabulary_ref: &str, spec: &RandomPoolSpec, seed: u64) -> Result<Dataset> {
    if vocab.is_empty() || spec.max_classes_per_image == 0 || spec.max_instances_per_class == 0 {
        return Err(Error::InvalidConfig(
            "random pool needs classes and positive per-image limits".into(),
        ));
    }
    let ids: Vec<ClassId> = vocab.class_ids().collect();
    let weights: Vec<u64> = (0..ids.len() as u64).map(|i| 720_720 / (i + 1)).collect();
    let total: u64 = weights.iter().sum();
    let mut r = rng::stream(seed);
    let mut images = Vec::with_capacity(spec.images);
    for n in 0..spec.images {
        let want = r.random_range(1..=spec.max_classes_per_image.min(ids.len()));
        let mut picked = BTreeSet::new();
        while picked.len() < want {
            let mut ticket = r.random_range(0..total);
            let idx = weights
                .iter()
                .position(|&w| {
                    if ticket < w {
                        true
                    } else {
                        ticket -= w;
                        false
                    }
                })
                .unwrap_or(ids.len() - 1);
            picked.insert(ids[idx]);
        }
        let mut instances = Vec::new();
        for c in picked {
            for _ in 0..r.random_range(1..=spec.max_instances_per_class) {
                instances.push(random_instance(&mut r, c, Provenance::Real));
            }
        }
        images.push(record(format!("img{n:06}"), instances));
    }
    Dataset::new(vocab, vocabulary_ref, images)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyPoolSpec {
    /// Exact number of instances per class.
    pub supply: BTreeMap<ClassId, usize>,
    pub max_instances_per_class: usize,
    pub max_classes_per_image: usize,
    /// Chance of adding one more class to an image, tried repeatedly.
    pub cooccurrence: f64,
}

/// A pool holding exactly `spec.supply[c]` instances of every class `c`,
/// packed into images with random co-occurrence.
pub fn pool_with_supply(vocab: &Vocabulary, vocabulary_ref: &str, spec: &SupplyPoolSpec, seed: u64) -> Result<Dataset> {
    if spec.max_instances_per_class == 0 || spec.max_classes_per_image == 0 || !(0.0..1.0).contains(&spec.cooccurrence)
    {
        return Err(Error::InvalidConfig("invalid supply pool spec".into()));
    }
    for &c in spec.supply.keys() {
        if !vocab.contains(c) {
            return Err(Error::ClassNotInVocabulary(c));
        }
    }
    let mut remaining: BTreeMap<ClassId, usize> = spec
        .supply
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&c, &n)| (c, n))
        .collect();
    let mut open: Vec<ClassId> = remaining.keys().copied().collect();
    let mut r = rng::stream(seed);
    let mut images = Vec::new();
    while !open.is_empty() {
        let mut in_image: Vec<ClassId> = Vec::new();
        let mut instances = Vec::new();
        loop {
            let candidates: Vec<ClassId> = open.iter().copied().filter(|c| !in_image.contains(c)).collect();
            if candidates.is_empty() {
                break;
            }
            let c = candidates[r.random_range(0..candidates.len())];
            let left = remaining.get_mut(&c).unwrap_or_else(|| unreachable!());
            let k = r.random_range(1..=spec.max_instances_per_class.min(*left));
            *left -= k;
            for _ in 0..k {
                instances.push(random_instance(&mut r, c, Provenance::Real));
            }
            in_image.push(c);
            if *left == 0 {
                open.retain(|&x| x != c);
            }
            if in_image.len() >= spec.max_classes_per_image || !r.random_bool(spec.cooccurrence) {
                break;
            }
        }
        images.push(record(format!("img{:06}", images.len()), instances));
    }
    Dataset::new(vocab, vocabulary_ref, images)
}

/// Long-tail supply at benchmark scale: the class at position `i` gets
/// `max(floor, head / (i + 1))` instances.
pub fn long_tail_supply(vocab: &Vocabulary, head: usize, floor: usize) -> BTreeMap<ClassId, usize> {
    vocab
        .class_ids()
        .enumerate()
        .map(|(i, c)| (c, (head / (i + 1)).max(floor)))
        .collect()
}

/// Supply shaped like a large benchmark pool: most classes comfortably above
/// 60 instances and a tail sitting just below it, so a 10/50 split leaves small
/// train deficits.
pub fn benchmark_scale_pool(vocab: &Vocabulary, vocabulary_ref: &str, seed: u64) -> Result<Dataset> {
    let spec = SupplyPoolSpec {
        supply: long_tail_supply(vocab, 6000, 58),
        max_instances_per_class: 3,
        max_classes_per_image: 3,
        cooccurrence: 0.3,
    };
    pool_with_supply(vocab, vocabulary_ref, &spec, seed)
}

/// One single-instance image per missing instance, marked with `provenance`.
pub fn augmentation_for(
    deficits: &Deficits,
    vocab: &Vocabulary,
    vocabulary_ref: &str,
    provenance: Provenance,
    seed: u64,
) -> Result<Dataset> {
    if provenance == Provenance::Real {
        return Err(Error::InvalidAugmentation("augmentation cannot be real".into()));
    }
    let mut r = rng::stream(seed);
    let mut images = Vec::new();
    for (&c, &n) in deficits {
        for i in 0..n {
            let inst = random_instance(&mut r, c, provenance);
            images.push(record(format!("aug-{c}-{i:04}"), alloc::vec![inst]));
        }
    }
    Dataset::new(vocab, vocabulary_ref, images)
}

/// Unrealized compositions of seen verbs and seen objects, as new classes
/// numbered after the largest seen id, in (verb, object) name order.
pub fn novel_compositions(seen: &Vocabulary, limit: usize) -> Vec<HoiClass> {
    let mut verbs: BTreeMap<String, (u32, String)> = BTreeMap::new();
    let mut objects: BTreeMap<String, (u32, String)> = BTreeMap::new();
    let mut realized = BTreeSet::new();
    for c in seen.classes() {
        verbs.entry(c.verb_key()).or_insert((c.verb_id, c.verb_name.clone()));
        objects
            .entry(c.object_key())
            .or_insert((c.object_id, c.object_name.clone()));
        realized.insert((c.verb_key(), c.object_key()));
    }
    let mut next = seen.class_ids().max().unwrap_or(0);
    let mut out = Vec::new();
    for (vk, (vid, vname)) in &verbs {
        for (ok, (oid, oname)) in &objects {
            if out.len() == limit {
                return out;
            }
            if !realized.contains(&(vk.clone(), ok.clone())) {
                next += 1;
                out.push(HoiClass::new(next, *vid, *oid, vname, oname));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpec {
    /// Chance that a ground-truth instance gets a matching prediction.
    pub recall: f64,
    /// False positives per image, drawn from `0..=2 * mean`.
    pub false_positives_per_image: usize,
    /// Largest box-corner offset of a matching prediction, in pixels.
    pub jitter: f64,
}

impl Default for PredictionSpec {
    fn default() -> Self {
        Self {
            recall: 0.7,
            false_positives_per_image: 1,
            jitter: 2.0,
        }
    }
}

/// A detector-like dump for `gt`: jittered copies of ground truth scored in
/// `[0.3, 1)` and random false positives scored in `[0, 0.7)`.
pub fn predictions(gt: &Dataset, vocab: &Vocabulary, spec: &PredictionSpec, seed: u64) -> Result<Vec<Prediction>> {
    if !(0.0..=1.0).contains(&spec.recall) || !(spec.jitter >= 0.0 && spec.jitter < 16.0) {
        return Err(Error::InvalidConfig(
            "recall must be in [0, 1] and jitter in [0, 16)".into(),
        ));
    }
    let ids: Vec<ClassId> = vocab.class_ids().collect();
    let mut r = rng::stream(seed);
    let mut out = Vec::new();
    for img in gt.images() {
        let (w, h) = (f64::from(img.width), f64::from(img.height));
        for inst in &img.instances {
            if r.random_bool(spec.recall) {
                let mut shake = |b: &BBox| {
                    let mut d = || {
                        if spec.jitter > 0.0 {
                            r.random_range(-spec.jitter..spec.jitter)
                        } else {
                            0.0
                        }
                    };
                    let moved = BBox::new(b.x1 + d(), b.y1 + d(), b.x2 + d(), b.y2 + d());
                    moved.clamped(w, h).0
                };
                let human_box = shake(&inst.human_box);
                let object_box = shake(&inst.object_box);
                out.push(Prediction {
                    image_id: img.image_id.clone(),
                    human_box,
                    object_box,
                    class_id: inst.class_id,
                    score: r.random_range(0.3..1.0),
                });
            }
        }
        if ids.is_empty() || w < 80.0 || h < 80.0 {
            continue;
        }
        for _ in 0..r.random_range(0..=2 * spec.false_positives_per_image) {
            out.push(Prediction {
                image_id: img.image_id.clone(),
                human_box: random_box(&mut r, w, h),
                object_box: random_box(&mut r, w, h),
                class_id: ids[r.random_range(0..ids.len())],
                score: r.random_range(0.0..0.7),
            });
        }
    }
    Ok(out)
}
