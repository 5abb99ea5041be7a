//! Verifiable rewards for spatial QA: format, multiple-choice, mean relative
//! accuracy and edit-distance similarity, their weighted combination, and
//! group-normalized advantages.

mod em;
mod score;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{em1, em_refined, normalize_em};
pub use score::{score_benchmark, ItemScore, Prediction, ScoreReport, TaskScore};

/// Relative-error thresholds 0.50, 0.55, ..., 0.95.
pub const DEFAULT_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Below this population standard deviation a group's advantages are zero.
pub const ADVANTAGE_STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    MultipleChoice,
    Numerical,
    Verbal,
}

/// How a relative error is compared against each threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MraConvention {
    /// `error < tau`
    #[default]
    Direct,
    /// `error < 1 - tau`, the stricter benchmark-tooling reading.
    Complement,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditCost {
    /// Insert, delete and substitute each cost 1.
    #[default]
    Unit,
    /// Substitution costs 2 (insert/delete only).
    Indel,
}

/// Tag names of the expected `<think>...</think><answer>...</answer>` output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatPattern {
    pub think_tag: String,
    pub answer_tag: String,
}

impl Default for FormatPattern {
    fn default() -> Self {
        Self {
            think_tag: "think".into(),
            answer_tag: "answer".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub thresholds: Vec<f64>,
    pub epsilon: f64,
    pub format: FormatPattern,
    pub mra_convention: MraConvention,
    pub edit_cost: EditCost,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            epsilon: DEFAULT_EPSILON,
            format: FormatPattern::default(),
            mra_convention: MraConvention::Direct,
            edit_cost: EditCost::Unit,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return Err(Error::invalid("reward weights must be finite and nonnegative"));
        }
        if self.thresholds.is_empty() {
            return Err(Error::invalid("at least one MRA threshold is required"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::invalid("MRA thresholds must lie in (0, 1)"));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("MRA thresholds must be strictly increasing"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let tag_ok = |t: &str| !t.is_empty() && !t.contains(['<', '>', '/']);
        if !tag_ok(&self.format.think_tag) || !tag_ok(&self.format.answer_tag) {
            return Err(Error::invalid("format tags must be nonempty and free of '<', '>' and '/'"));
        }
        Ok(())
    }
}

/// Returns the answer body of a well-formed output: exactly one think block
/// followed by exactly one answer block, with only whitespace around them
/// and a nonempty answer.
pub fn extract_answer<'a>(raw: &'a str, pattern: &FormatPattern) -> Option<&'a str> {
    let open_t = format!("<{}>", pattern.think_tag);
    let close_t = format!("</{}>", pattern.think_tag);
    let open_a = format!("<{}>", pattern.answer_tag);
    let close_a = format!("</{}>", pattern.answer_tag);
    if [&open_t, &close_t, &open_a, &close_a]
        .iter()
        .any(|tag| raw.matches(tag.as_str()).count() != 1)
    {
        return None;
    }
    let body = raw.trim();
    let rest = body.strip_prefix(open_t.as_str())?;
    let (_, rest) = rest.split_once(close_t.as_str())?;
    let rest = rest.trim_start().strip_prefix(open_a.as_str())?;
    let answer = rest.strip_suffix(close_a.as_str())?;
    let answer = answer.trim();
    (!answer.is_empty()).then_some(answer)
}

pub fn format_reward(raw: &str, config: &RewardConfig) -> f64 {
    if extract_answer(raw, &config.format).is_some() {
        1.0
    } else {
        0.0
    }
}

/// Multiple-choice normalization: trim and lowercase.
pub fn normalize_choice(s: &str) -> String {
    s.trim().to_lowercase()
}

pub fn mc_reward(pred: &str, gt: &str) -> f64 {
    if normalize_choice(pred) == normalize_choice(gt) {
        1.0
    } else {
        0.0
    }
}

pub fn relative_error(pred: f64, gt: f64, epsilon: f64) -> f64 {
    (pred - gt).abs() / (gt.abs() + epsilon)
}

/// Fraction of thresholds a given relative error passes.
pub fn mra_from_relative_error(error: f64, config: &RewardConfig) -> f64 {
    let passed = config
        .thresholds
        .iter()
        .filter(|&&tau| match config.mra_convention {
            MraConvention::Direct => error < tau,
            MraConvention::Complement => error < 1.0 - tau,
        })
        .count();
    passed as f64 / config.thresholds.len() as f64
}

pub fn mra_reward(pred: f64, gt: f64, config: &RewardConfig) -> Result<f64> {
    if !pred.is_finite() || !gt.is_finite() {
        return Err(Error::invalid(format!("non-finite numeric answer: pred={pred} gt={gt}")));
    }
    if config.thresholds.is_empty() {
        return Err(Error::invalid("at least one MRA threshold is required"));
    }
    Ok(mra_from_relative_error(
        relative_error(pred, gt, config.epsilon),
        config,
    ))
}

/// Verbal normalization: lowercase, trim, and collapse internal whitespace.
pub fn normalize_verbal(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Edit distance over chars with a two-row dynamic program.
pub fn edit_distance(a: &str, b: &str, cost: EditCost) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let sub = match cost {
        EditCost::Unit => 1,
        EditCost::Indel => 2,
    };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let replace = prev[j] + if ca == cb { 0 } else { sub };
            cur[j + 1] = replace.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - D(phi(pred), phi(gt)) / (|phi(pred)| + |phi(gt)|)`, lengths in chars.
/// Two empty strings score 1.
pub fn verbal_reward_with(pred: &str, gt: &str, cost: EditCost) -> f64 {
    let p = normalize_verbal(pred);
    let g = normalize_verbal(gt);
    let total = p.chars().count() + g.chars().count();
    if total == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&p, &g, cost) as f64 / total as f64
}

pub fn verbal_reward(pred: &str, gt: &str) -> f64 {
    verbal_reward_with(pred, gt, EditCost::Unit)
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("valid regex"));

/// Numeric answer normalization: a plain number (thousands separators
/// allowed), else the first number appearing in the text.
pub fn parse_numeric(s: &str) -> Option<f64> {
    let cleaned = s.trim().replace(',', "");
    let cleaned = cleaned.trim_end_matches('.');
    let value = match cleaned.parse::<f64>() {
        Ok(v) => Some(v),
        Err(_) => NUMBER.find(cleaned).and_then(|m| m.as_str().parse().ok()),
    };
    value.filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeReward {
    pub total: f64,
    pub format: f64,
    pub task: f64,
    /// Numerical prediction (or ground truth) could not be parsed.
    pub unparseable: bool,
}

/// `lambda1 * format + lambda2 * task`, with the task reward chosen by kind.
pub fn composite_reward(
    raw_output: &str,
    pred: &str,
    gt: &str,
    kind: AnswerKind,
    config: &RewardConfig,
) -> CompositeReward {
    let format = format_reward(raw_output, config);
    let mut unparseable = false;
    let task = match kind {
        AnswerKind::MultipleChoice => mc_reward(pred, gt),
        AnswerKind::Verbal => verbal_reward_with(pred, gt, config.edit_cost),
        AnswerKind::Numerical => match (parse_numeric(pred), parse_numeric(gt)) {
            (Some(p), Some(g)) => mra_reward(p, g, config).unwrap_or(0.0),
            _ => {
                unparseable = true;
                0.0
            }
        },
    };
    CompositeReward {
        total: config.lambda1 * format + config.lambda2 * task,
        format,
        task,
        unparseable,
    }
}

/// Group-normalized advantages `(r - mean) / std` with population std.
/// Zero-variance groups map to all zeros.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidGroup(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("group rewards must be finite"));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < ADVANTAGE_STD_FLOOR {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}
