//! Import of HICO-DET annotations in the widely used JSON conversion
//! (`trainval_hico.json` / `test_hico.json`) together with the official
//! `hico_list_hoi.txt` class list.
//!
//! Classes are matched to the target vocabulary by (verb, object) name.
//! Interactions whose class is not in the vocabulary are dropped and counted.
//! The JSON carries no image size unless `width`/`height` are present, so
//! missing sizes are taken as the rounded-up extent of the image's boxes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use bright_core::model::name_key;
use bright_core::{BBox, ClassId, Dataset, HoiInstance, ImageRecord, Provenance, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::error::{KitError, KitResult};
use crate::io::read_json;

#[derive(Debug, Deserialize)]
struct Entry {
    file_name: String,
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
    annotations: Vec<BoxAnno>,
    #[serde(default)]
    hoi_annotation: Vec<HoiAnno>,
}

#[derive(Debug, Deserialize)]
struct BoxAnno {
    bbox: [f64; 4],
}

#[derive(Debug, Deserialize)]
struct HoiAnno {
    subject_id: i64,
    object_id: i64,
    hoi_category_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub images: usize,
    pub instances: usize,
    pub images_without_mapped_instances: usize,
    pub unmapped_interactions: usize,
    pub invalid_interactions: usize,
    /// HICO-DET class ids with no counterpart in the vocabulary.
    pub unmapped_categories: BTreeSet<u32>,
}

/// `hico_list_hoi.txt`: rows of `id object verb`; other lines are ignored.
pub fn parse_hoi_list(text: &str) -> BTreeMap<u32, (String, String)> {
    text.lines()
        .filter_map(|line| {
            let mut it = line.split_whitespace();
            let id = it.next()?.parse::<u32>().ok()?;
            let object = it.next()?;
            let verb = it.next()?;
            it.next()
                .is_none()
                .then(|| (id, (verb.to_string(), object.to_string())))
        })
        .collect()
}

fn class_map(list: &BTreeMap<u32, (String, String)>, vocab: &Vocabulary) -> BTreeMap<u32, ClassId> {
    let by_name: BTreeMap<(String, String), ClassId> = vocab
        .classes()
        .iter()
        .map(|c| ((c.verb_key(), c.object_key()), c.class_id))
        .collect();
    list.iter()
        .filter_map(|(&hico, (v, o))| by_name.get(&(name_key(v), name_key(o))).map(|&c| (hico, c)))
        .collect()
}

pub fn import(
    anno_paths: &[&Path],
    hoi_list_path: &Path,
    vocab: &Vocabulary,
    vocabulary_ref: &str,
) -> KitResult<(Dataset, ImportReport)> {
    let list_text = fs::read_to_string(hoi_list_path).map_err(|e| KitError::io(hoi_list_path, e))?;
    let list = parse_hoi_list(&list_text);
    if list.is_empty() {
        return Err(KitError::parse(hoi_list_path, "no `id object verb` rows found"));
    }
    let map = class_map(&list, vocab);
    let mut report = ImportReport::default();
    let mut images = Vec::new();
    for path in anno_paths {
        let entries: Vec<Entry> = read_json(path)?;
        for e in entries {
            let mut instances = Vec::new();
            for h in &e.hoi_annotation {
                let pick = |i: i64| usize::try_from(i).ok().and_then(|i| e.annotations.get(i));
                let (Some(s), Some(o)) = (pick(h.subject_id), pick(h.object_id)) else {
                    report.invalid_interactions += 1;
                    continue;
                };
                let Some(&class_id) = map.get(&h.hoi_category_id) else {
                    report.unmapped_interactions += 1;
                    report.unmapped_categories.insert(h.hoi_category_id);
                    continue;
                };
                let (hb, ob) = (BBox::from(s.bbox), BBox::from(o.bbox));
                if !hb.is_proper() || !ob.is_proper() {
                    report.invalid_interactions += 1;
                    continue;
                }
                instances.push(HoiInstance {
                    human_box: hb,
                    object_box: ob,
                    class_id,
                    provenance: Provenance::Real,
                });
            }
            if instances.is_empty() {
                report.images_without_mapped_instances += 1;
                continue;
            }
            let extent = |f: fn(&HoiInstance) -> f64| instances.iter().map(f).fold(1.0, f64::max).ceil() as u32;
            let width = e
                .width
                .unwrap_or_else(|| extent(|i| i.human_box.x2.max(i.object_box.x2)));
            let height = e
                .height
                .unwrap_or_else(|| extent(|i| i.human_box.y2.max(i.object_box.y2)));
            let image_id = Path::new(&e.file_name)
                .file_stem()
                .map_or_else(|| e.file_name.clone(), |s| s.to_string_lossy().into_owned());
            let mut rec = ImageRecord {
                image_id,
                file_name: e.file_name,
                width,
                height,
                instances,
            };
            rec.clamp_boxes();
            report.instances += rec.instances.len();
            images.push(rec);
        }
    }
    report.images = images.len();
    Ok((Dataset::new(vocab, vocabulary_ref, images)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bright_core::HoiClass;

    const LIST: &str = "List of HOI categories\n--------------------\n id  object  verb\n----\n0001 airplane board\n0002 cell_phone talk_on\n0003 horse ride\n";

    #[test]
    fn list_rows() {
        let l = parse_hoi_list(LIST);
        assert_eq!(l.len(), 3);
        assert_eq!(l[&2], ("talk_on".into(), "cell_phone".into()));
    }

    #[test]
    fn import_maps_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let list = dir.path().join("list.txt");
        let anno = dir.path().join("a.json");
        fs::write(&list, LIST).unwrap();
        fs::write(
            &anno,
            r#"[{"file_name":"HICO_train2015_00000001.jpg","img_id":1,
                "annotations":[{"bbox":[1,2,50,80],"category_id":1},{"bbox":[30,40,120,90],"category_id":77}],
                "hoi_annotation":[{"subject_id":0,"object_id":1,"category_id":88,"hoi_category_id":2},
                                  {"subject_id":0,"object_id":1,"category_id":5,"hoi_category_id":1},
                                  {"subject_id":0,"object_id":7,"category_id":5,"hoi_category_id":2}]},
               {"file_name":"HICO_train2015_00000002.jpg","annotations":[],"hoi_annotation":[]}]"#,
        )
        .unwrap();
        let vocab = Vocabulary::new(vec![
            HoiClass::new(10, 1, 1, "talk_on", "cell phone"),
            HoiClass::new(11, 2, 2, "ride", "horse"),
        ])
        .unwrap();
        let (d, r) = import(&[&anno], &list, &vocab, "v").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.count(10), 1);
        assert_eq!(d.images()[0].image_id, "HICO_train2015_00000001");
        assert_eq!((d.images()[0].width, d.images()[0].height), (120, 90));
        assert_eq!(r.unmapped_interactions, 1);
        assert_eq!(r.invalid_interactions, 1);
        assert_eq!(r.images_without_mapped_instances, 1);
        assert_eq!(r.unmapped_categories, BTreeSet::from([1]));
    }
}
