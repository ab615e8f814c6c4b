//! Augmentation for deficit classes: prompt construction from a reference
//! image, generation with verification and paraphrase-retry, pseudo-labeling
//! and web-crawl queries. All model calls go through [`ports`].

pub mod mock;
pub mod pipeline;
pub mod ports;
pub mod prompt;
pub mod pseudo;

pub use pipeline::{
    candidate_pairs, generate_valid_images, CandidatePair, GeneratedImage, GenerationBudget, GenerationRun, LogEvent,
    LogRecord, RunStatus, Verdict,
};
pub use ports::{
    Describer, DetectedObject, Detections, Detector, Generator, ImageRef, Paraphraser, PortError, PortResult,
    RegionAnswer, RegionQuery, RegionVerifier, ServicePorts, TextVerifier,
};
pub use prompt::{build_prompt, crawl_query, PromptRecord};
pub use pseudo::{pseudo_label, PseudoLabelWarning, PseudoLabels};
