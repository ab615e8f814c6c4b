use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankShift {
    pub model: String,
    pub map_a: f64,
    pub rank_a: usize,
    pub map_b: f64,
    pub rank_b: usize,
    /// `rank_a - rank_b`; positive means the model moved up on `b`.
    pub delta: i64,
}

fn ranks(maps: &BTreeMap<String, f64>) -> BTreeMap<&str, usize> {
    let mut order: Vec<(&str, f64)> = maps.iter().map(|(m, v)| (m.as_str(), *v)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    order.into_iter().enumerate().map(|(i, (m, _))| (m, i + 1)).collect()
}

/// Ranks models by descending mAP on both sides (ties by model name) and
/// reports the shift. Rows come back in `a`-rank order.
pub fn ranking_shift(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<Vec<RankShift>> {
    if a.len() != b.len() || a.keys().any(|m| !b.contains_key(m)) {
        return Err(Error::ModelSetMismatch);
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mut rows: Vec<RankShift> = a
        .iter()
        .map(|(model, &map_a)| {
            let (rank_a, rank_b) = (ra[model.as_str()], rb[model.as_str()]);
            RankShift {
                model: model.clone(),
                map_a,
                rank_a,
                map_b: b[model],
                rank_b,
                delta: rank_a as i64 - rank_b as i64,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.rank_a);
    Ok(rows)
}

pub fn ranking_shift_reports(
    a: &BTreeMap<String, EvalReport>,
    b: &BTreeMap<String, EvalReport>,
) -> Result<Vec<RankShift>> {
    let maps = |m: &BTreeMap<String, EvalReport>| m.iter().map(|(k, r)| (k.clone(), r.map)).collect();
    ranking_shift(&maps(a), &maps(b))
}
