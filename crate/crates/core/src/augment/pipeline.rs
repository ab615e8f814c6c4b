//! Generate, verify, paraphrase, retry.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ports::{Detections, ImageRef, PortError, RegionQuery, ServicePorts};
use super::prompt::{self, PromptRecord};
use crate::error::{Error, Result};
use crate::model::{BBox, ClassId, Dataset, HoiClass, HoiInstance, ImageRecord, Provenance};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBudget {
    pub max_attempts_per_class: usize,
    pub target_valid: usize,
}

impl GenerationBudget {
    pub fn new(max_attempts_per_class: usize, target_valid: usize) -> Result<Self> {
        let b = Self {
            max_attempts_per_class,
            target_valid,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts_per_class == 0 || self.target_valid == 0 {
            return Err(Error::InvalidConfig(
                "max_attempts_per_class and target_valid must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub human_box: BBox,
    pub object_box: BBox,
    verdict: Verdict,
}

impl CandidatePair {
    pub fn new(human_box: BBox, object_box: BBox) -> Self {
        Self {
            human_box,
            object_box,
            verdict: Verdict::Pending,
        }
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    /// Settles a pending pair. A pair can only be resolved once.
    pub fn resolve(&mut self, accepted: bool) -> Result<()> {
        if self.verdict != Verdict::Pending {
            return Err(Error::InvalidAugmentation("candidate pair already resolved".into()));
        }
        self.verdict = if accepted { Verdict::Accepted } else { Verdict::Rejected };
        Ok(())
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }
}

/// Every person box paired with every box of the class object.
pub fn candidate_pairs(det: &Detections, class: &HoiClass) -> Vec<CandidatePair> {
    let objects: Vec<&BBox> = det.target_objects(class).collect();
    det.persons
        .iter()
        .flat_map(|h| objects.iter().map(move |o| CandidatePair::new(*h, **o)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedImage {
    pub image: ImageRef,
    pub width: u32,
    pub height: u32,
    pub prompt: String,
    /// Accepted pairs only.
    pub pairs: Vec<CandidatePair>,
}

impl GeneratedImage {
    /// Annotation record with one instance per accepted pair, boxes clamped to the image.
    pub fn to_record(&self, image_id: impl Into<String>, class_id: ClassId, provenance: Provenance) -> ImageRecord {
        let mut rec = ImageRecord {
            image_id: image_id.into(),
            file_name: self.image.0.clone(),
            width: self.width,
            height: self.height,
            instances: self
                .pairs
                .iter()
                .filter(|p| p.is_accepted())
                .map(|p| HoiInstance {
                    human_box: p.human_box,
                    object_box: p.object_box,
                    class_id,
                    provenance,
                })
                .collect(),
        };
        rec.clamp_boxes();
        rec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    PromptBuilt {
        reference_image_id: String,
        text: String,
    },
    Generated {
        image: ImageRef,
        prompt: String,
        paraphrase_generation: u32,
    },
    Detected {
        persons: usize,
        target_objects: usize,
    },
    PairVerdict {
        human_box: BBox,
        object_box: BBox,
        region_yes: bool,
        text_yes: Option<bool>,
        verdict: Verdict,
    },
    ImageAccepted {
        image: ImageRef,
        accepted_pairs: usize,
    },
    ImageRejected {
        image: ImageRef,
    },
    Paraphrased {
        paraphrase_generation: u32,
        text: String,
    },
    PortFailure {
        port: String,
        message: String,
    },
    Finished {
        status: RunStatus,
        valid: usize,
        generator_calls: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub class_id: ClassId,
    /// 1-based attempt number; 0 for run-level events.
    pub attempt: usize,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub class_id: ClassId,
    pub images: Vec<GeneratedImage>,
    pub log: Vec<LogRecord>,
    pub status: RunStatus,
    pub attempts: usize,
    pub generator_calls: usize,
}

impl GenerationRun {
    pub fn paraphrase_events(&self) -> usize {
        self.log
            .iter()
            .filter(|r| matches!(r.event, LogEvent::Paraphrased { .. }))
            .count()
    }

    pub fn port_failures(&self) -> usize {
        self.log
            .iter()
            .filter(|r| matches!(r.event, LogEvent::PortFailure { .. }))
            .count()
    }
}

struct Attempt<'l> {
    class_id: ClassId,
    number: usize,
    log: &'l mut Vec<LogRecord>,
}

impl Attempt<'_> {
    fn push(&mut self, event: LogEvent) {
        self.log.push(LogRecord {
            class_id: self.class_id,
            attempt: self.number,
            event,
        });
    }

    fn failure(&mut self, e: &Error) {
        let (port, message) = match e {
            Error::Port(PortError { port, message }) => ((*port).into(), message.clone()),
            other => (String::from("pipeline"), format!("{other}")),
        };
        self.push(LogEvent::PortFailure { port, message });
    }
}

enum Outcome {
    Valid(GeneratedImage),
    Invalid,
}

/// Runs the generation loop for one class until `budget.target_valid` images
/// pass verification or `budget.max_attempts_per_class` attempts are spent.
///
/// Each attempt uses the active prompt, building a fresh one from
/// `reference_pool` when there is none. After a rejected image the active
/// prompt is paraphrased; after an accepted image the next attempt builds a
/// fresh prompt. A failing port ends the attempt but not the run.
pub fn generate_valid_images(
    class: &HoiClass,
    reference_pool: &Dataset,
    budget: &GenerationBudget,
    ports: &ServicePorts<'_>,
    seed: u64,
) -> Result<GenerationRun> {
    budget.validate()?;
    ports.require_all()?;

    let mut log = Vec::new();
    let mut images = Vec::new();
    let mut active: Option<PromptRecord> = None;
    let mut generator_calls = 0;
    let mut attempts = 0;

    for number in 1..=budget.max_attempts_per_class {
        attempts = number;
        let attempt_seed = derive_seed(seed, number as u64);
        let mut at = Attempt {
            class_id: class.class_id,
            number,
            log: &mut log,
        };

        if active.is_none() {
            match prompt::build_prompt(class, reference_pool, ports, derive_seed(attempt_seed, 0)) {
                Ok(p) => {
                    at.push(LogEvent::PromptBuilt {
                        reference_image_id: p.reference_image_id.clone(),
                        text: p.text.clone(),
                    });
                    active = Some(p);
                }
                Err(e @ Error::EmptyReferenceSet(_)) => return Err(e),
                Err(e) => {
                    at.failure(&e);
                    continue;
                }
            }
        }
        let Some(current) = active.as_mut() else { continue };

        match attempt(class, current, ports, attempt_seed, &mut at, &mut generator_calls) {
            Ok(Outcome::Valid(img)) => {
                images.push(img);
                active = None;
                if images.len() >= budget.target_valid {
                    break;
                }
            }
            Ok(Outcome::Invalid) => {
                let paraphraser = ports.paraphraser.ok_or(Error::PortNotConfigured("paraphraser"))?;
                match paraphraser.paraphrase(&current.text, derive_seed(attempt_seed, 3)) {
                    Ok(text) => {
                        current.text = text;
                        current.paraphrase_generation += 1;
                        at.push(LogEvent::Paraphrased {
                            paraphrase_generation: current.paraphrase_generation,
                            text: current.text.clone(),
                        });
                    }
                    Err(e) => at.failure(&e.into()),
                }
            }
            Err(e) => at.failure(&e),
        }
    }

    let status = if images.len() >= budget.target_valid {
        RunStatus::Completed
    } else {
        RunStatus::BudgetExhausted
    };
    log.push(LogRecord {
        class_id: class.class_id,
        attempt: 0,
        event: LogEvent::Finished {
            status,
            valid: images.len(),
            generator_calls,
        },
    });
    Ok(GenerationRun {
        class_id: class.class_id,
        images,
        log,
        status,
        attempts,
        generator_calls,
    })
}

fn attempt(
    class: &HoiClass,
    current: &PromptRecord,
    ports: &ServicePorts<'_>,
    seed: u64,
    at: &mut Attempt<'_>,
    generator_calls: &mut usize,
) -> Result<Outcome> {
    let generator = ports.generator.ok_or(Error::PortNotConfigured("generator"))?;
    let detector = ports.detector.ok_or(Error::PortNotConfigured("detector"))?;
    let region = ports
        .region_verifier
        .ok_or(Error::PortNotConfigured("region_verifier"))?;
    let text = ports.text_verifier.ok_or(Error::PortNotConfigured("text_verifier"))?;

    *generator_calls += 1;
    let image = generator.generate(&current.text, derive_seed(seed, 1))?;
    at.push(LogEvent::Generated {
        image: image.clone(),
        prompt: current.text.clone(),
        paraphrase_generation: current.paraphrase_generation,
    });

    let det = detector.detect(&image, &class.object_text(), derive_seed(seed, 2))?;
    let mut pairs = candidate_pairs(&det, class);
    at.push(LogEvent::Detected {
        persons: det.persons.len(),
        target_objects: det.target_objects(class).count(),
    });

    for (i, pair) in pairs.iter_mut().enumerate() {
        let pair_seed = derive_seed(seed, 100 + i as u64);
        let answer = region.verify_region(&RegionQuery {
            image: image.clone(),
            class: class.clone(),
            human_box: pair.human_box,
            object_box: pair.object_box,
            prompt: prompt::region_describe_query(class, &pair.human_box, &pair.object_box),
            seed: pair_seed,
        })?;
        let text_yes = if answer.yes {
            let q = prompt::text_verify_query(class, &answer.description);
            Some(text.verify_text(&answer.description, class, &q, pair_seed)?)
        } else {
            None
        };
        pair.resolve(text_yes == Some(true))?;
        at.push(LogEvent::PairVerdict {
            human_box: pair.human_box,
            object_box: pair.object_box,
            region_yes: answer.yes,
            text_yes,
            verdict: pair.verdict(),
        });
    }

    pairs.retain(CandidatePair::is_accepted);
    if pairs.is_empty() {
        at.push(LogEvent::ImageRejected { image });
        return Ok(Outcome::Invalid);
    }
    at.push(LogEvent::ImageAccepted {
        image: image.clone(),
        accepted_pairs: pairs.len(),
    });
    Ok(Outcome::Valid(GeneratedImage {
        image,
        width: det.width,
        height: det.height,
        prompt: current.text.clone(),
        pairs,
    }))
}
