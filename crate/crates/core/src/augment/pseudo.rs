//! Instance annotations for new images from region-verifier answers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::pipeline::candidate_pairs;
use super::ports::{Detections, ImageRef, RegionQuery, ServicePorts};
use super::prompt;
use crate::error::{Error, Result};
use crate::model::{HoiClass, HoiInstance, Provenance};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoLabelWarning {
    NoPersonDetected,
    NoTargetObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub instances: Vec<HoiInstance>,
    pub warning: Option<PseudoLabelWarning>,
}

/// Asks the region verifier about every person x target-object pair and turns
/// each "yes" into an instance of `class`.
pub fn pseudo_label(
    image: &ImageRef,
    detections: &Detections,
    class: &HoiClass,
    ports: &ServicePorts<'_>,
    provenance: Provenance,
    seed: u64,
) -> Result<PseudoLabels> {
    if provenance == Provenance::Real {
        return Err(Error::InvalidAugmentation(
            "pseudo-labels must be marked generated or crawled".into(),
        ));
    }
    let verifier = ports
        .region_verifier
        .ok_or(Error::PortNotConfigured("region_verifier"))?;
    let warning = if detections.persons.is_empty() {
        Some(PseudoLabelWarning::NoPersonDetected)
    } else if detections.target_objects(class).next().is_none() {
        Some(PseudoLabelWarning::NoTargetObject)
    } else {
        None
    };
    let mut instances = Vec::new();
    for (i, pair) in candidate_pairs(detections, class).into_iter().enumerate() {
        let answer = verifier.verify_region(&RegionQuery {
            image: image.clone(),
            class: class.clone(),
            human_box: pair.human_box,
            object_box: pair.object_box,
            prompt: prompt::pseudo_label_query(class, &pair.human_box, &pair.object_box),
            seed: derive_seed(seed, i as u64),
        })?;
        if answer.yes {
            instances.push(HoiInstance {
                human_box: pair.human_box,
                object_box: pair.object_box,
                class_id: class.class_id,
                provenance,
            });
        }
    }
    Ok(PseudoLabels { instances, warning })
}
