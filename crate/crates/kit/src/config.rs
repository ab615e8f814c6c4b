//! Shared run configuration. A JSON file supplies defaults; command-line
//! flags override it.

use std::path::{Path, PathBuf};

use bright_core::eval::ApMethod;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KitError, KitResult};
use crate::io::read_json;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub vocab: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub balance: BalanceParams,
    pub zeroshot: ZeroShotParams,
    pub augment: AugmentParams,
    pub eval: EvalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceParams {
    /// Defaults to every class with at least one instance.
    pub top_k: Option<usize>,
    pub l_test: usize,
    pub l_train: usize,
    pub epochs: usize,
}

impl Default for BalanceParams {
    fn default() -> Self {
        Self {
            top_k: None,
            l_test: 10,
            l_train: 50,
            epochs: bright_core::balancer::DEFAULT_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroShotParams {
    pub instances_per_class: usize,
    pub class_budget: usize,
}

impl Default for ZeroShotParams {
    fn default() -> Self {
        Self {
            instances_per_class: bright_core::zeroshot::DEFAULT_INSTANCES_PER_CLASS,
            class_budget: bright_core::zeroshot::DEFAULT_CLASS_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub max_attempts_per_class: usize,
    /// `per-deficit` or a fixed number of valid images per class.
    pub target: String,
    /// `mock` or `http`.
    pub ports: String,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    /// Mock text verifier: `accept`, `reject` or `period:N`.
    pub mock_verifier: String,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_attempts_per_class: 50,
            target: "per-deficit".into(),
            ports: "mock".into(),
            endpoint: None,
            timeout_secs: 120,
            mock_verifier: "accept".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub iou_threshold: f64,
    pub ap_method: ApMethod,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            ap_method: ApMethod::AllPoint,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> KitResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => read_json(p),
        }
    }
}

/// Hex SHA-256 of the command name and the parameters that shaped its output.
/// Input and output paths are left out so relocating a run keeps its hash.
pub fn config_hash<T: Serialize>(command: &str, params: &T) -> String {
    let body = serde_json::to_vec(&(command, params)).expect("parameters serialize");
    let digest = Sha256::digest(&body);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Flag value, else config value, else a usage error naming the flag.
pub fn required<T: Clone>(flag: Option<T>, config: Option<&T>, name: &str) -> KitResult<T> {
    flag.or_else(|| config.cloned())
        .ok_or_else(|| KitError::Usage(format!("missing --{name} (flag or config file)")))
}
