//! Class-balanced split construction and evaluation for human-object
//! interaction (HOI) detection benchmarks.
//!
//! Everything in this crate is pure and deterministic given its inputs and a
//! seed: no file or network access happens here. The companion `bright-kit`
//! crate carries the file formats, service clients and the CLI.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod augment;
pub mod balancer;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod zeroshot;

pub use error::{Error, Result};
pub use model::{BBox, ClassId, Dataset, HoiClass, HoiInstance, ImageRecord, Provenance, Vocabulary};
