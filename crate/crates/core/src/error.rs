use alloc::string::String;
use alloc::vec::Vec;

use crate::augment::PortError;
use crate::model::ClassId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("image `{image_id}` references class {class_id}, which is not in the vocabulary")]
    UnknownClass { image_id: String, class_id: ClassId },
    #[error("image `{image_id}` has a degenerate box {bbox:?}")]
    DegenerateBox { image_id: String, bbox: [f64; 4] },
    #[error("image `{image_id}` has invalid size {width}x{height}")]
    InvalidImageSize { image_id: String, width: u32, height: u32 },
    #[error("duplicate image id `{0}`")]
    DuplicateImageId(String),
    #[error("vocabulary mismatch: `{left}` vs `{right}`")]
    VocabularyMismatch { left: String, right: String },
    #[error("class {0} is not part of the vocabulary")]
    ClassNotInVocabulary(ClassId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("k = {k} is out of range 1..={size}")]
    KOutOfRange { k: usize, size: usize },
    #[error("image `{image_id}` carries non-real instances; only real data is allowed here")]
    NonRealProvenance { image_id: String },
    #[error("invalid augmentation data: {0}")]
    InvalidAugmentation(String),
    #[error("augmentation left residual deficits for classes {0:?}")]
    ResidualDeficit(Vec<(ClassId, usize)>),
    #[error("no reference image annotated with class {0}")]
    EmptyReferenceSet(ClassId),
    #[error("describer output for class {class_id} violates the prompt template: {text:?}")]
    TemplateViolation { class_id: ClassId, text: String },
    #[error("service port `{0}` is not configured")]
    PortNotConfigured(&'static str),
    #[error(transparent)]
    Port(#[from] PortError),
    #[error("cannot format query: {0}")]
    Format(String),
    #[error("ground truth contains no instances")]
    EmptyGroundTruth,
    #[error("model sets differ between the two report collections")]
    ModelSetMismatch,
    #[error("class {0} has no true positive to flip")]
    NoTruePositive(ClassId),
    #[error("class {0} has no ground-truth instances")]
    NoGroundTruth(ClassId),
}
