//! Per-class AP and mAP over detector outputs, class-AP spread statistics,
//! ranking comparison between benchmarks and the TP-flip sensitivity probe.

mod ap;
mod perturb;
mod ranking;
mod report;

pub use ap::{average_precision, class_ap, ApMethod, ClassAp, MatchConfig, Prediction, RankedPrediction};
pub use perturb::{flip_on_flags, perturb_tp_flip, FlipOutcome, FlipTarget};
pub use ranking::{ranking_shift, ranking_shift_reports, RankShift};
pub use report::{evaluate, ApSpread, EvalReport};
