//! Spatial QA generation from scene metadata.
//!
//! Seven task types are produced from object boxes, room geometry and
//! per-category visibility series. Every task draws from its own PCG32
//! stream seeded from `(scene_id, task_type, seed)`, so a task's output does
//! not depend on which other tasks run or in what order.

mod geometry;
mod tasks;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_pcg::Pcg32;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rewards::AnswerKind;
use crate::SCHEMA_VERSION;

pub use geometry::{
    discretize_direction, first_appearance, min_obb_distance, min_pairwise_distance, obb_longest_dim_cm,
    rel_direction_angle, room_area_m2, Difficulty, OrientedBox, DEFAULT_DISTANCE_SAMPLES, DEFAULT_ROOM_CELL,
    MIN_DISTANCE_SAMPLES,
};
pub use tasks::{
    gen_abs_distance, gen_appearance_order, gen_object_count, gen_object_size, gen_rel_direction,
    gen_rel_distance, gen_room_size,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskType {
    ObjectCount,
    ObjectSize,
    RoomSize,
    AbsDistance,
    AppearanceOrder,
    RelDistance,
    RelDirection,
    /// Any other benchmark task name (only used when scoring).
    Other(String),
}

impl TaskType {
    pub const GENERATED: [TaskType; 7] = [
        TaskType::ObjectCount,
        TaskType::ObjectSize,
        TaskType::RoomSize,
        TaskType::AbsDistance,
        TaskType::AppearanceOrder,
        TaskType::RelDistance,
        TaskType::RelDirection,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            TaskType::ObjectCount => "object_count",
            TaskType::ObjectSize => "object_size",
            TaskType::RoomSize => "room_size",
            TaskType::AbsDistance => "abs_distance",
            TaskType::AppearanceOrder => "appearance_order",
            TaskType::RelDistance => "rel_distance",
            TaskType::RelDirection => "rel_direction",
            TaskType::Other(s) => s,
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(TaskType::GENERATED
            .iter()
            .find(|t| t.as_str() == s)
            .cloned()
            .unwrap_or_else(|| TaskType::Other(s.to_string())))
    }
}

impl Serialize for TaskType {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TaskType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().expect("infallible"))
    }
}

/// Parses a comma-separated task list. Empty input yields an empty set.
pub fn parse_task_list(s: &str) -> Result<BTreeSet<TaskType>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<TaskType>().expect("infallible") {
            TaskType::Other(name) => Err(Error::invalid(format!("unknown task type '{name}'"))),
            known => Ok(known),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Number(f64),
    Text(String),
}

impl Answer {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Answer::Number(v) => Some(*v),
            Answer::Text(t) => crate::rewards::parse_numeric(t),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Answer::Number(v) => v.to_string(),
            Answer::Text(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub scene_id: String,
    pub task_type: TaskType,
    pub question: String,
    pub answer: Answer,
    pub answer_kind: AnswerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    /// Additional accepted references for verbal answers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alt_answers: Vec<String>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl QAPair {
    pub fn new(
        id: String,
        scene_id: String,
        task_type: TaskType,
        question: String,
        answer: Answer,
        answer_kind: AnswerKind,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id,
            scene_id,
            task_type,
            question,
            answer,
            answer_kind,
            options: None,
            alt_answers: Vec::new(),
            meta: serde_json::Map::new(),
        }
    }

    /// Primary answer followed by any alternates.
    pub fn references(&self) -> Vec<String> {
        std::iter::once(self.answer.to_text())
            .chain(self.alt_answers.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub instance_id: u64,
    pub category: String,
    pub obb: OrientedBox,
}

/// Visible pixel counts per category, one value per timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    #[serde(default = "default_width")]
    pub frame_width: u32,
    #[serde(default = "default_height")]
    pub frame_height: u32,
    pub timestamps: Vec<f64>,
    pub counts: BTreeMap<String, Vec<f64>>,
}

fn default_width() -> u32 {
    640
}

fn default_height() -> u32 {
    480
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub scene_id: String,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_area_m2: Option<f64>,
    /// Floor-projected room points, used when no precomputed area is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility: Option<Visibility>,
}

impl SceneMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.scene_id.is_empty() {
            return Err(Error::invalid("scene_id is empty"));
        }
        let mut ids = HashSet::new();
        for obj in &self.objects {
            if !ids.insert(obj.instance_id) {
                return Err(Error::invalid(format!("duplicate instance_id {}", obj.instance_id)));
            }
            if obj.category.trim().is_empty() {
                return Err(Error::invalid(format!("object {} has an empty category", obj.instance_id)));
            }
            obj.obb.validate()?;
        }
        if let Some(area) = self.room_area_m2 {
            if !(area.is_finite() && area > 0.0) {
                return Err(Error::invalid("room_area_m2 must be positive"));
            }
        }
        if let Some(vis) = &self.visibility {
            if vis.timestamps.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::invalid("visibility timestamps must be strictly increasing"));
            }
            for (cat, series) in &vis.counts {
                if series.len() != vis.timestamps.len() {
                    return Err(Error::invalid(format!(
                        "visibility series for '{cat}' has {} values for {} timestamps",
                        series.len(),
                        vis.timestamps.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaGenConfig {
    pub excluded_categories: Vec<String>,
    pub samples_per_box: usize,
    /// Minimum pairwise gap between relative-distance options, meters.
    pub rel_distance_separation: f64,
    /// First-appearance threshold as a fraction of frame pixels.
    pub visibility_fraction: f64,
    pub room_cell: f64,
    pub direction_difficulties: Vec<Difficulty>,
    /// Questions generated per task at most.
    pub max_per_task: usize,
    pub per_task_limits: BTreeMap<String, usize>,
    /// Resampling attempts for constrained multiple-choice tasks.
    pub max_attempts: usize,
}

impl Default for QaGenConfig {
    fn default() -> Self {
        Self {
            excluded_categories: ["wall", "floor", "ceiling", "otherstructure"]
                .map(String::from)
                .to_vec(),
            samples_per_box: DEFAULT_DISTANCE_SAMPLES,
            rel_distance_separation: 0.15,
            visibility_fraction: 0.001,
            room_cell: DEFAULT_ROOM_CELL,
            direction_difficulties: vec![Difficulty::Easy, Difficulty::Medium, Difficulty::Hard],
            max_per_task: 8,
            per_task_limits: BTreeMap::new(),
            max_attempts: 64,
        }
    }
}

impl QaGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_box < MIN_DISTANCE_SAMPLES {
            return Err(Error::invalid(format!(
                "samples_per_box must be at least {MIN_DISTANCE_SAMPLES}"
            )));
        }
        if !(0.15..=0.30).contains(&self.rel_distance_separation) {
            return Err(Error::invalid("rel_distance_separation must lie in [0.15, 0.30] m"));
        }
        if !(self.visibility_fraction > 0.0 && self.visibility_fraction < 1.0) {
            return Err(Error::invalid("visibility_fraction must lie in (0, 1)"));
        }
        if !(self.room_cell > 0.0 && self.room_cell.is_finite()) {
            return Err(Error::invalid("room_cell must be positive"));
        }
        if self.direction_difficulties.is_empty() {
            return Err(Error::invalid("at least one direction difficulty is required"));
        }
        Ok(())
    }

    pub fn limit_for(&self, task: &TaskType) -> usize {
        self.per_task_limits
            .get(task.as_str())
            .copied()
            .unwrap_or(self.max_per_task)
    }

    pub fn is_excluded(&self, category: &str) -> bool {
        self.excluded_categories
            .iter()
            .any(|c| c.eq_ignore_ascii_case(category))
    }

    pub fn visibility_threshold(&self, vis: &Visibility) -> f64 {
        self.visibility_fraction * vis.frame_width as f64 * vis.frame_height as f64
    }
}

/// Stable 64-bit seed from a list of labelled parts.
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// PCG32 stream for one (scene, task, seed).
pub fn task_rng(scene_id: &str, task: &TaskType, seed: u64) -> Pcg32 {
    Pcg32::seed_from_u64(derive_seed(&[
        scene_id.as_bytes(),
        task.as_str().as_bytes(),
        &seed.to_le_bytes(),
    ]))
}

/// Runs the requested generators in canonical task order.
pub fn generate_all(
    meta: &SceneMetadata,
    tasks: &BTreeSet<TaskType>,
    seed: u64,
    config: &QaGenConfig,
) -> Result<Vec<QAPair>> {
    meta.validate()?;
    config.validate()?;
    let mut out = Vec::new();
    for task in TaskType::GENERATED.iter().filter(|t| tasks.contains(*t)) {
        let pairs = match task {
            TaskType::ObjectCount => gen_object_count(meta, seed, config),
            TaskType::ObjectSize => gen_object_size(meta, seed, config),
            TaskType::RoomSize => gen_room_size(meta, seed, config)?,
            TaskType::AbsDistance => gen_abs_distance(meta, seed, config)?,
            TaskType::AppearanceOrder => gen_appearance_order(meta, seed, config)?,
            TaskType::RelDistance => gen_rel_distance(meta, seed, config)?,
            TaskType::RelDirection => gen_rel_direction(meta, seed, config)?,
            TaskType::Other(_) => unreachable!("not a generated task"),
        };
        out.extend(pairs);
    }
    Ok(out)
}
