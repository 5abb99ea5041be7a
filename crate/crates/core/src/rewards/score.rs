//! Benchmark scoring of a prediction file against ground-truth QA pairs.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{em1, em_refined, extract_answer, mc_reward, mra_reward, parse_numeric, verbal_reward_with};
use super::{AnswerKind, RewardConfig};
use crate::error::{Error, Result};
use crate::qagen::{Answer, QAPair};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    /// Parsed answer. When absent it is extracted from `raw_output`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<Answer>,
}

impl Prediction {
    fn answer_text(&self, config: &RewardConfig) -> String {
        match (&self.pred, &self.raw_output) {
            (Some(a), _) => a.to_text(),
            (None, Some(raw)) => extract_answer(raw, &config.format)
                .unwrap_or(raw.trim())
                .to_string(),
            (None, None) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub task_type: String,
    pub answer_kind: AnswerKind,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_refined: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub unparseable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub answer_kind: AnswerKind,
    pub count: usize,
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_refined: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    pub per_task: BTreeMap<String, TaskScore>,
    /// Unweighted mean of the per-task means.
    pub overall: f64,
    pub items: Vec<ItemScore>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_ids(predictions: &[Prediction], ground_truth: &[QAPair]) -> Result<()> {
    let mut pred_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in predictions {
        *pred_counts.entry(p.id.as_str()).or_default() += 1;
    }
    let mut gt_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in ground_truth {
        *gt_counts.entry(g.id.as_str()).or_default() += 1;
    }
    let duplicate: Vec<String> = pred_counts
        .iter()
        .chain(gt_counts.iter())
        .filter(|(_, &n)| n > 1)
        .map(|(id, _)| id.to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let missing: Vec<String> = gt_counts
        .keys()
        .filter(|id| !pred_counts.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    let unknown: Vec<String> = pred_counts
        .keys()
        .filter(|id| !gt_counts.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    if predictions.is_empty() || !(duplicate.is_empty() && missing.is_empty() && unknown.is_empty()) {
        return Err(Error::ManifestMismatch {
            missing,
            duplicate,
            unknown,
        });
    }
    Ok(())
}

fn score_item(pred: &Prediction, gt: &QAPair, config: &RewardConfig) -> Result<ItemScore> {
    let text = pred.answer_text(config);
    let mut item = ItemScore {
        id: gt.id.clone(),
        task_type: gt.task_type.to_string(),
        answer_kind: gt.answer_kind,
        score: 0.0,
        em1: None,
        em_refined: None,
        unparseable: false,
    };
    match gt.answer_kind {
        AnswerKind::MultipleChoice => item.score = mc_reward(&text, &gt.answer.to_text()),
        AnswerKind::Numerical => {
            let truth = gt
                .answer
                .as_number()
                .ok_or_else(|| Error::invalid(format!("{}: numerical answer is not a number", gt.id)))?;
            let value = match &pred.pred {
                Some(Answer::Number(v)) => Some(*v).filter(|v| v.is_finite()),
                _ => parse_numeric(&text),
            };
            match value {
                Some(v) => item.score = mra_reward(v, truth, config)?,
                None => item.unparseable = true,
            }
        }
        AnswerKind::Verbal => {
            let refs = gt.references();
            item.score = refs
                .iter()
                .map(|r| verbal_reward_with(&text, r, config.edit_cost))
                .fold(0.0, f64::max);
            item.em1 = Some(em1(&text, &refs));
            item.em_refined = Some(em_refined(&text, &refs));
        }
    }
    Ok(item)
}

/// Scores every prediction against its ground-truth item.
///
/// Numerical items use MRA, multiple-choice items exact match, and verbal
/// items edit-distance similarity plus EM-1 / refined EM. Items are reported
/// in ground-truth id order.
pub fn score_benchmark(
    predictions: &[Prediction],
    ground_truth: &[QAPair],
    config: &RewardConfig,
) -> Result<ScoreReport> {
    config.validate()?;
    check_ids(predictions, ground_truth)?;
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut gts: Vec<&QAPair> = ground_truth.iter().collect();
    gts.sort_by(|a, b| a.id.cmp(&b.id));

    let items: Vec<ItemScore> = gts
        .iter()
        .map(|gt| score_item(by_id[gt.id.as_str()], gt, config))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, Vec<&ItemScore>> = BTreeMap::new();
    for it in &items {
        groups.entry(it.task_type.clone()).or_default().push(it);
    }
    let per_task: BTreeMap<String, TaskScore> = groups
        .into_iter()
        .map(|(task, its)| {
            let em_mean = |f: fn(&ItemScore) -> Option<f64>| {
                let vals: Vec<f64> = its.iter().filter_map(|i| f(i)).collect();
                (!vals.is_empty()).then(|| mean(vals.into_iter()))
            };
            let score = TaskScore {
                answer_kind: its[0].answer_kind,
                count: its.len(),
                mean: mean(its.iter().map(|i| i.score)),
                em1: em_mean(|i| i.em1),
                em_refined: em_mean(|i| i.em_refined),
            };
            (task, score)
        })
        .collect();
    let overall = mean(per_task.values().map(|t| t.mean));
    Ok(ScoreReport {
        schema_version: SCHEMA_VERSION,
        per_task,
        overall,
        items,
    })
}
