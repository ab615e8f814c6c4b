//! Interfaces to the external services behind the augmentation pipeline.
//!
//! Every port receives a seed so that deterministic implementations (the
//! mocks, or a service pinned to a sampling seed) reproduce their output.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, HoiClass};

/// Opaque handle to an image: a file path or a service-side id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageRef(pub String);

impl ImageRef {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortError {
    pub port: &'static str,
    pub message: String,
}

impl PortError {
    pub fn new(port: &'static str, message: impl Into<String>) -> Self {
        Self {
            port,
            message: message.into(),
        }
    }
}

impl fmt::Display for PortError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} port failed: {}", self.port, self.message)
    }
}

impl core::error::Error for PortError {}

pub type PortResult<T> = core::result::Result<T, PortError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub label: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub width: u32,
    pub height: u32,
    pub persons: Vec<BBox>,
    pub objects: Vec<DetectedObject>,
}

impl Detections {
    /// Object boxes whose label names the class object.
    pub fn target_objects<'a>(&'a self, class: &HoiClass) -> impl Iterator<Item = &'a BBox> + 'a {
        let key = class.object_key();
        self.objects
            .iter()
            .filter(move |o| crate::model::name_key(&o.label) == key)
            .map(|o| &o.bbox)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionQuery {
    pub image: ImageRef,
    pub class: HoiClass,
    pub human_box: BBox,
    pub object_box: BBox,
    /// Full question text with the two regions spelled out.
    pub prompt: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionAnswer {
    pub yes: bool,
    pub description: String,
}

/// Writes a templated text-to-image prompt from a reference image.
pub trait Describer: Send + Sync {
    fn describe(&self, image: &ImageRef, class: &HoiClass, query: &str, seed: u64) -> PortResult<String>;
}

/// Text-to-image model.
pub trait Generator: Send + Sync {
    fn generate(&self, prompt: &str, seed: u64) -> PortResult<ImageRef>;
}

/// Open-world detector returning person boxes and boxes for `object_query`.
pub trait Detector: Send + Sync {
    fn detect(&self, image: &ImageRef, object_query: &str, seed: u64) -> PortResult<Detections>;
}

/// Region-aware vision-language model answering about one person-object pair.
pub trait RegionVerifier: Send + Sync {
    fn verify_region(&self, query: &RegionQuery) -> PortResult<RegionAnswer>;
}

/// Language model confirming the interaction from a region description.
pub trait TextVerifier: Send + Sync {
    fn verify_text(&self, description: &str, class: &HoiClass, query: &str, seed: u64) -> PortResult<bool>;
}

pub trait Paraphraser: Send + Sync {
    fn paraphrase(&self, prompt: &str, seed: u64) -> PortResult<String>;
}

/// The set of services one pipeline run talks to. Unset ports fail with
/// [`Error::PortNotConfigured`] when a step needs them.
#[derive(Clone, Copy, Default)]
pub struct ServicePorts<'a> {
    pub describer: Option<&'a dyn Describer>,
    pub generator: Option<&'a dyn Generator>,
    pub detector: Option<&'a dyn Detector>,
    pub region_verifier: Option<&'a dyn RegionVerifier>,
    pub text_verifier: Option<&'a dyn TextVerifier>,
    pub paraphraser: Option<&'a dyn Paraphraser>,
}

impl<'a> ServicePorts<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_describer(mut self, p: &'a dyn Describer) -> Self {
        self.describer = Some(p);
        self
    }

    pub fn with_generator(mut self, p: &'a dyn Generator) -> Self {
        self.generator = Some(p);
        self
    }

    pub fn with_detector(mut self, p: &'a dyn Detector) -> Self {
        self.detector = Some(p);
        self
    }

    pub fn with_region_verifier(mut self, p: &'a dyn RegionVerifier) -> Self {
        self.region_verifier = Some(p);
        self
    }

    pub fn with_text_verifier(mut self, p: &'a dyn TextVerifier) -> Self {
        self.text_verifier = Some(p);
        self
    }

    pub fn with_paraphraser(mut self, p: &'a dyn Paraphraser) -> Self {
        self.paraphraser = Some(p);
        self
    }

    fn names(&self) -> [(&'static str, bool); 6] {
        [
            ("describer", self.describer.is_some()),
            ("generator", self.generator.is_some()),
            ("detector", self.detector.is_some()),
            ("region_verifier", self.region_verifier.is_some()),
            ("text_verifier", self.text_verifier.is_some()),
            ("paraphraser", self.paraphraser.is_some()),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.names().iter().all(|(_, set)| !set)
    }

    /// Ok when every port is set.
    pub fn require_all(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("no service ports configured".into()));
        }
        match self.names().iter().find(|(_, set)| !set) {
            Some((name, _)) => Err(Error::PortNotConfigured(name)),
            None => Ok(()),
        }
    }
}

impl fmt::Debug for ServicePorts<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("ServicePorts");
        for (name, set) in self.names() {
            s.field(name, &set);
        }
        s.finish()
    }
}
