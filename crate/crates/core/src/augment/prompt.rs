//! Query templates and retrieval-augmented prompt construction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ports::{ImageRef, ServicePorts};
use crate::error::{Error, Result};
use crate::model::{BBox, Dataset, HoiClass};
use crate::rng;

/// A text-to-image prompt produced by the describer for one class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub class: HoiClass,
    pub reference_image_id: String,
    pub text: String,
    /// Paraphrases applied since the describer produced the text.
    pub paraphrase_generation: u32,
}

/// `A photo of a person {verb} a/an {obj},`
pub fn prompt_prefix(class: &HoiClass) -> String {
    format!(
        "A photo of a person {} a/an {},",
        class.verb_text(),
        class.object_text()
    )
}

/// Query sent to the describer together with the reference image.
pub fn describe_query(class: &HoiClass) -> String {
    let (verb, obj) = (class.verb_text(), class.object_text());
    format!(
        "<Image> Please provide a detailed description of the image, focusing on the main person who is {verb} a {obj}. \
         Follow this template for your answer: 'A photo of a person {verb} a/an {obj}, {{description}}.'"
    )
}

/// Region query used while filtering generated images: asks for a localized
/// description of one person-object pair.
pub fn region_describe_query(class: &HoiClass, human: &BBox, object: &BBox) -> String {
    format!(
        "<Image> Please describe the person {} <SPECIAL> and the {} {} <SPECIAL>, focusing on how they interact.",
        region(human),
        class.object_text(),
        region(object)
    )
}

/// Question for the text verifier, applied to a region description.
pub fn text_verify_query(class: &HoiClass, description: &str) -> String {
    format!(
        "{description} Based on the description, can you confirm if the person is {} the {}? Please answer 'Yes' or 'No'.",
        class.verb_text(),
        class.object_text()
    )
}

/// Region query used for pseudo-labeling a person-object pair.
pub fn pseudo_label_query(class: &HoiClass, human: &BBox, object: &BBox) -> String {
    format!(
        "<Image> Considering the image, can you definitively determine that person {} <SPECIAL> is {} {} {} <SPECIAL> in the image? \
         Please respond with 'yes' or 'no', followed by your explanation.",
        region(human),
        class.verb_text(),
        class.object_text(),
        region(object)
    )
}

/// `[x1, y1, x2, y2]` with coordinates rounded to whole pixels.
pub fn region(b: &BBox) -> String {
    let r = |v: f64| (v + 0.5) as i64;
    format!("[{}, {}, {}, {}]", r(b.x1), r(b.y1), r(b.x2), r(b.y2))
}

/// Reads a yes/no answer off the start of a model response.
pub fn parse_yes_no(answer: &str) -> Option<bool> {
    let head: String = answer
        .trim_start_matches(|c: char| c.is_whitespace() || c == '\'' || c == '"' || c == '*')
        .chars()
        .take(3)
        .collect::<String>()
        .to_ascii_lowercase();
    if head.starts_with("yes") {
        Some(true)
    } else if head.starts_with("no") {
        Some(false)
    } else {
        None
    }
}

/// True when `text` instantiates the prompt template for `class`.
pub fn follows_template(class: &HoiClass, text: &str) -> bool {
    let prefix = prompt_prefix(class);
    text.starts_with(&prefix) && text.ends_with('.') && text[prefix.len()..].trim().len() > 1
}

/// Samples one reference image of `class` from `reference_pool` and asks the
/// describer for a templated prompt. A template violation is retried once.
pub fn build_prompt(
    class: &HoiClass,
    reference_pool: &Dataset,
    ports: &ServicePorts<'_>,
    seed: u64,
) -> Result<PromptRecord> {
    let describer = ports.describer.ok_or(Error::PortNotConfigured("describer"))?;
    let refs: Vec<_> = reference_pool
        .images()
        .iter()
        .filter(|img| img.contains_class(class.class_id))
        .collect();
    if refs.is_empty() {
        return Err(Error::EmptyReferenceSet(class.class_id));
    }
    let mut r = rng::stream(seed);
    let picked = refs[r.random_range(0..refs.len())];
    let image = ImageRef(picked.file_name.clone());
    let query = describe_query(class);

    let mut text = describer.describe(&image, class, &query, seed)?;
    if !follows_template(class, &text) {
        text = describer.describe(&image, class, &query, rng::derive_seed(seed, 1))?;
        if !follows_template(class, &text) {
            return Err(Error::TemplateViolation {
                class_id: class.class_id,
                text,
            });
        }
    }
    Ok(PromptRecord {
        class: class.clone(),
        reference_image_id: picked.image_id.clone(),
        text,
        paraphrase_generation: 0,
    })
}

/// Gerunds for verbs where appending `ing` is wrong. Multi-word verbs inflect
/// their first word (`sit_on` -> `sitting on`).
const GERUNDS: &[(&str, &str)] = &[
    ("assemble", "assembling"),
    ("chase", "chasing"),
    ("control", "controlling"),
    ("cut", "cutting"),
    ("drag", "dragging"),
    ("dribble", "dribbling"),
    ("drive", "driving"),
    ("flip", "flipping"),
    ("hit", "hitting"),
    ("hop", "hopping"),
    ("hose", "hosing"),
    ("hug", "hugging"),
    ("lie", "lying"),
    ("lose", "losing"),
    ("make", "making"),
    ("move", "moving"),
    ("operate", "operating"),
    ("pet", "petting"),
    ("race", "racing"),
    ("release", "releasing"),
    ("ride", "riding"),
    ("run", "running"),
    ("serve", "serving"),
    ("set", "setting"),
    ("sip", "sipping"),
    ("sit", "sitting"),
    ("slide", "sliding"),
    ("spin", "spinning"),
    ("squeeze", "squeezing"),
    ("stab", "stabbing"),
    ("stir", "stirring"),
    ("stop", "stopping"),
    ("straddle", "straddling"),
    ("tag", "tagging"),
    ("tie", "tying"),
    ("type", "typing"),
    ("wave", "waving"),
    ("zip", "zipping"),
];

pub fn gerund(verb: &str) -> Result<String> {
    let verb = verb.trim();
    if verb.is_empty() {
        return Err(Error::Format("empty verb".into()));
    }
    if verb == "no_interaction" || verb == "no interaction" {
        return Ok("not interacting with".into());
    }
    let mut words = verb.split(['_', ' ']).filter(|w| !w.is_empty());
    let head = words.next().unwrap_or(verb);
    let inflected = GERUNDS
        .iter()
        .find(|(v, _)| *v == head)
        .map(|(_, g)| String::from(*g))
        .unwrap_or_else(|| format!("{head}ing"));
    let rest: Vec<&str> = words.collect();
    Ok(if rest.is_empty() {
        inflected
    } else {
        format!("{inflected} {}", rest.join(" "))
    })
}

/// Web search query for a class: `a photo of a/an person {verb}-ing a/an {object}`.
pub fn crawl_query(class: &HoiClass) -> Result<String> {
    if class.object_name.trim().is_empty() {
        return Err(Error::Format("empty object".into()));
    }
    Ok(format!(
        "a photo of a/an person {} a/an {}",
        gerund(&class.verb_name)?,
        class.object_text()
    ))
}
