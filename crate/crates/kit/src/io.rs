//! On-disk formats: vocabulary and dataset JSON, prediction JSON-lines, CSV
//! exports, and staged artifact writing.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use bright_core::eval::Prediction;
use bright_core::{Dataset, HoiClass, ImageRecord, Vocabulary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{KitError, KitResult};

/// Reproducibility stamp embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub toolkit_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Meta {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_hash: config_hash.into(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> KitResult<T> {
    let bytes = fs::read(path).map_err(|e| KitError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| KitError::parse(path, e))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact types serialize");
    out.push(b'\n');
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> KitResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| KitError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| KitError::io(path, e))
}

/// Output files collected in memory and written together once a command has
/// finished validating and computing.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) {
        self.files.push((path, to_json_bytes(value)));
    }

    pub fn bytes(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> KitResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            write_bytes(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VocabFile {
    List(Vec<HoiClass>),
    Wrapped { classes: Vec<HoiClass> },
}

/// A JSON array of classes, or an object with a `classes` array.
pub fn load_vocabulary(path: &Path) -> KitResult<Vocabulary> {
    let classes = match read_json::<VocabFile>(path)? {
        VocabFile::List(c) | VocabFile::Wrapped { classes: c } => c,
    };
    Ok(Vocabulary::new(classes)?)
}

#[derive(Serialize)]
pub struct VocabArtifact<'a> {
    pub meta: &'a Meta,
    pub classes: &'a [HoiClass],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub vocabulary_ref: String,
    pub images: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// Reads a dataset, clamping boxes that stick out of their image before the
/// strict validation in [`Dataset::new`].
pub fn load_dataset(path: &Path, vocab: &Vocabulary) -> KitResult<Dataset> {
    let file: DatasetFile = read_json(path)?;
    dataset_from_file(file, vocab, path)
}

pub fn dataset_from_file(mut file: DatasetFile, vocab: &Vocabulary, path: &Path) -> KitResult<Dataset> {
    let mut clamped = 0;
    for img in &mut file.images {
        if img.width > 0 && img.height > 0 {
            clamped += img.clamp_boxes();
        }
    }
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} boxes to their image bounds", path.display());
    }
    Ok(Dataset::new(vocab, file.vocabulary_ref, file.images)?)
}

pub fn dataset_artifact(d: &Dataset, meta: &Meta) -> DatasetFile {
    DatasetFile {
        vocabulary_ref: d.vocabulary_ref().into(),
        images: d.images().to_vec(),
        meta: Some(meta.clone()),
    }
}

/// One prediction per line; blank lines are skipped.
pub fn load_predictions(path: &Path, vocab: &Vocabulary) -> KitResult<Vec<Prediction>> {
    let f = fs::File::open(path).map_err(|e| KitError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| KitError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction =
            serde_json::from_str(&line).map_err(|e| KitError::parse(path, format!("line {}: {e}", n + 1)))?;
        let bad = |why: &str| KitError::parse(path, format!("line {}: {why}", n + 1));
        if !p.score.is_finite() || !(0.0..=1.0).contains(&p.score) {
            return Err(bad("score must be a finite number in [0, 1]"));
        }
        if !vocab.contains(p.class_id) {
            return Err(bad(&format!("class {} is not in the vocabulary", p.class_id)));
        }
        if !p.human_box.is_proper() || !p.object_box.is_proper() {
            return Err(bad("degenerate box"));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn predictions_jsonl(preds: &[Prediction]) -> Vec<u8> {
    let mut out = Vec::new();
    for p in preds {
        serde_json::to_writer(&mut out, p).expect("predictions serialize");
        out.push(b'\n');
    }
    out
}

/// Rows of `T` as CSV with a header line.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> KitResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| KitError::Usage(format!("csv export failed: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| KitError::Usage(format!("csv export failed: {e}")))
}
