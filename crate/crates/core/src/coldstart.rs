//! Cold-start set construction: keep each item's best reasoning trace, then
//! keep items whose best reward is positive and reaches the per-task-type
//! quantile of best rewards.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::SCHEMA_VERSION;

pub const DEFAULT_QUANTILE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub trace_ref: String,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    #[serde(default = "crate::schema_version")]
    pub schema_version: u32,
    pub item_id: String,
    pub task_type: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeptItem {
    #[serde(default = "crate::schema_version")]
    pub schema_version: u32,
    pub item_id: String,
    pub task_type: String,
    pub trace_ref: String,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retention {
    pub total: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdStartResult {
    pub schema_version: u32,
    pub quantile: f64,
    pub thresholds: BTreeMap<String, f64>,
    pub retention: BTreeMap<String, Retention>,
    pub kept: Vec<KeptItem>,
}

/// Best candidate `(index, reward)`; ties go to the lowest index.
pub fn best_of_k(record: &RewardRecord) -> Result<(usize, f64)> {
    if record.candidates.is_empty() {
        return Err(Error::InvalidRecord(format!("{}: no candidates", record.item_id)));
    }
    if let Some(c) = record
        .candidates
        .iter()
        .find(|c| !(c.reward.is_finite() && c.reward >= 0.0))
    {
        return Err(Error::InvalidRecord(format!(
            "{}: reward {} must be finite and nonnegative",
            record.item_id, c.reward
        )));
    }
    let mut best = (0, record.candidates[0].reward);
    for (i, c) in record.candidates.iter().enumerate().skip(1) {
        if c.reward > best.1 {
            best = (i, c.reward);
        }
    }
    Ok(best)
}

/// Per-type `q`-quantile of best rewards (linear interpolation).
pub fn type_thresholds<'a>(
    best_rewards: impl IntoIterator<Item = (&'a str, f64)>,
    q: f64,
) -> Result<BTreeMap<String, f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile {q} outside (0, 1)")));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (task, r) in best_rewards {
        groups.entry(task).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .filter_map(|(task, rewards)| stats::quantile(&rewards, q).map(|t| (task.to_string(), t)))
        .collect())
}

pub fn keeps(reward: f64, threshold: f64) -> bool {
    reward > 0.0 && reward >= threshold
}

pub fn filter_records(records: &[RewardRecord], q: f64) -> Result<ColdStartResult> {
    if records.is_empty() {
        return Err(Error::InvalidRecord("no records".into()));
    }
    let best: Vec<(usize, f64)> = records.par_iter().map(best_of_k).collect::<Result<_>>()?;
    let thresholds = type_thresholds(
        records.iter().zip(&best).map(|(r, (_, b))| (r.task_type.as_str(), *b)),
        q,
    )?;
    let mut retention: BTreeMap<String, Retention> = BTreeMap::new();
    let mut kept = Vec::new();
    for (record, &(idx, reward)) in records.iter().zip(&best) {
        let entry = retention.entry(record.task_type.clone()).or_default();
        entry.total += 1;
        if keeps(reward, thresholds[&record.task_type]) {
            entry.kept += 1;
            kept.push(KeptItem {
                schema_version: SCHEMA_VERSION,
                item_id: record.item_id.clone(),
                task_type: record.task_type.clone(),
                trace_ref: record.candidates[idx].trace_ref.clone(),
                reward,
            });
        }
    }
    Ok(ColdStartResult {
        schema_version: SCHEMA_VERSION,
        quantile: q,
        thresholds,
        retention,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: &str, task: &str, rewards: &[f64]) -> RewardRecord {
        RewardRecord {
            schema_version: 1,
            item_id: id.into(),
            task_type: task.into(),
            candidates: rewards
                .iter()
                .enumerate()
                .map(|(i, r)| Candidate {
                    trace_ref: format!("{id}#{i}"),
                    reward: *r,
                })
                .collect(),
        }
    }

    #[test]
    fn best_of_k_examples() {
        assert_eq!(best_of_k(&record("a", "t", &[0.2, 0.8, 0.5])).unwrap(), (1, 0.8));
        assert_eq!(best_of_k(&record("a", "t", &[0.3])).unwrap(), (0, 0.3));
        assert_eq!(best_of_k(&record("a", "t", &[0.5, 0.5])).unwrap(), (0, 0.5));
        assert!(matches!(best_of_k(&record("a", "t", &[])), Err(Error::InvalidRecord(_))));
        assert!(best_of_k(&record("a", "t", &[f64::NAN])).is_err());
        assert!(best_of_k(&record("a", "t", &[-0.1])).is_err());
    }

    #[test]
    fn thresholds_per_type() {
        let t = type_thresholds([("x", 0.0), ("x", 0.2), ("x", 0.6), ("x", 0.8), ("y", 0.9)], 0.5).unwrap();
        assert!((t["x"] - 0.4).abs() < 1e-12);
        assert_eq!(t["y"], 0.9);
        let alone = type_thresholds([("x", 0.0), ("x", 0.2), ("x", 0.6), ("x", 0.8)], 0.5).unwrap();
        assert_eq!(alone["x"], t["x"]);
        assert!(type_thresholds([("x", 0.1)], 1.0).is_err());
    }

    #[test]
    fn filter_worked_example() {
        let recs = vec![
            record("a", "count", &[0.0, 0.0]),
            record("b", "count", &[0.1, 0.2]),
            record("c", "count", &[0.6, 0.3]),
            record("d", "count", &[0.5, 0.8, 0.1]),
        ];
        let r = filter_records(&recs, 0.5).unwrap();
        let kept: Vec<(&str, f64)> = r.kept.iter().map(|k| (k.item_id.as_str(), k.reward)).collect();
        assert_eq!(kept, vec![("c", 0.6), ("d", 0.8)]);
        assert_eq!(r.kept[1].trace_ref, "d#1");
        assert_eq!(r.retention["count"], Retention { total: 4, kept: 2 });
    }

    #[test]
    fn all_zero_keeps_nothing() {
        let recs = vec![record("a", "t", &[0.0]), record("b", "t", &[0.0, 0.0])];
        let r = filter_records(&recs, 0.5).unwrap();
        assert!(r.kept.is_empty());
        assert_eq!(r.thresholds["t"], 0.0);
        assert!(filter_records(&[], 0.5).is_err());
    }
}
