//! The seven QA generators.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use serde_json::{json, Map, Value};

use super::geometry::{
    discretize_direction, first_appearance, min_obb_distance, obb_longest_dim_cm, rel_direction_angle, room_area_m2,
};
use super::{derive_seed, task_rng, Answer, QAPair, QaGenConfig, SceneMetadata, SceneObject, TaskType};
use crate::error::Result;
use crate::rewards::AnswerKind;

fn instances_by_category<'a>(meta: &'a SceneMetadata, config: &QaGenConfig) -> BTreeMap<&'a str, Vec<&'a SceneObject>> {
    let mut map: BTreeMap<&str, Vec<&SceneObject>> = BTreeMap::new();
    for obj in &meta.objects {
        if !config.is_excluded(&obj.category) {
            map.entry(obj.category.as_str()).or_default().push(obj);
        }
    }
    map
}

fn unique_objects<'a>(meta: &'a SceneMetadata, config: &QaGenConfig) -> Vec<&'a SceneObject> {
    instances_by_category(meta, config)
        .into_values()
        .filter(|v| v.len() == 1)
        .map(|v| v[0])
        .collect()
}

struct PairBuilder<'a> {
    scene_id: &'a str,
    task: TaskType,
    pairs: Vec<QAPair>,
}

impl<'a> PairBuilder<'a> {
    fn new(meta: &'a SceneMetadata, task: TaskType) -> Self {
        Self {
            scene_id: &meta.scene_id,
            task,
            pairs: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn push(
        &mut self,
        question: String,
        answer: Answer,
        kind: AnswerKind,
        options: Option<Vec<String>>,
        meta: Map<String, Value>,
    ) {
        let id = format!("{}_{}_{}", self.scene_id, self.task, self.pairs.len());
        let mut pair = QAPair::new(id, self.scene_id.to_string(), self.task.clone(), question, answer, kind);
        pair.options = options;
        pair.meta = meta;
        self.pairs.push(pair);
    }

    fn finish(self) -> Vec<QAPair> {
        self.pairs
    }
}

fn obj_meta(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn pair_seed(task_seed: u64, a: u64, b: u64) -> u64 {
    derive_seed(&[&task_seed.to_le_bytes(), &a.to_le_bytes(), &b.to_le_bytes()])
}

/// Counting questions for categories with at least two instances.
pub fn gen_object_count(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Vec<QAPair> {
    let task = TaskType::ObjectCount;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let mut eligible: Vec<(&str, usize)> = instances_by_category(meta, config)
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(c, v)| (c, v.len()))
        .collect();
    eligible.shuffle(&mut rng);
    let mut out = PairBuilder::new(meta, task);
    for (category, count) in eligible.into_iter().take(limit) {
        out.push(
            format!("How many {category}(s) are in this room?"),
            Answer::Number(count as f64),
            AnswerKind::Numerical,
            None,
            obj_meta(json!({ "category": category, "seed": seed })),
        );
    }
    out.finish()
}

/// Longest-side questions for objects whose category is unique.
pub fn gen_object_size(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Vec<QAPair> {
    let task = TaskType::ObjectSize;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let mut objects = unique_objects(meta, config);
    objects.shuffle(&mut rng);
    let mut out = PairBuilder::new(meta, task);
    for obj in objects.into_iter().take(limit) {
        out.push(
            format!(
                "What is the length of the longest dimension (length, width, or height) of the {}, measured in centimeters?",
                obj.category
            ),
            Answer::Number(obb_longest_dim_cm(&obj.obb)),
            AnswerKind::Numerical,
            None,
            obj_meta(json!({ "category": obj.category, "instance_id": obj.instance_id, "seed": seed })),
        );
    }
    out.finish()
}

/// Room area from the precomputed value, else from floor points.
pub fn gen_room_size(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Result<Vec<QAPair>> {
    let task = TaskType::RoomSize;
    let mut out = PairBuilder::new(meta, task.clone());
    if config.limit_for(&task) == 0 {
        return Ok(out.finish());
    }
    let (area, info) = match (&meta.room_area_m2, &meta.floor_points) {
        (Some(a), _) => (*a, json!({ "method": "precomputed", "seed": seed })),
        (None, Some(points)) => (
            room_area_m2(points, config.room_cell)?,
            json!({ "method": "occupancy_grid", "cell": config.room_cell, "seed": seed }),
        ),
        (None, None) => return Ok(out.finish()),
    };
    out.push(
        "What is the size of this room (in square meters)?".to_string(),
        Answer::Number(area),
        AnswerKind::Numerical,
        None,
        obj_meta(info),
    );
    Ok(out.finish())
}

/// Closest-point distance between pairs of uniquely labelled objects.
pub fn gen_abs_distance(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Result<Vec<QAPair>> {
    let task = TaskType::AbsDistance;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let objects = unique_objects(meta, config);
    let mut pairs: Vec<(&SceneObject, &SceneObject)> = Vec::new();
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(&mut rng);
    let task_seed = rng.next_u64();
    let mut out = PairBuilder::new(meta, task);
    for (a, b) in pairs {
        if out.len() >= limit {
            break;
        }
        let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let dseed = pair_seed(task_seed, a.instance_id, b.instance_id);
        let distance = min_obb_distance(&a.obb, &b.obb, config.samples_per_box, dseed)?;
        if distance.is_nan() || distance <= 0.0 {
            continue;
        }
        out.push(
            format!(
                "Measuring from the closest point of each object, what is the direct distance between the {} and the {} (in meters)?",
                a.category, b.category
            ),
            Answer::Number(distance),
            AnswerKind::Numerical,
            None,
            obj_meta(json!({
                "category_a": a.category,
                "category_b": b.category,
                "instance_a": a.instance_id,
                "instance_b": b.instance_id,
                "samples_per_box": config.samples_per_box,
                "distance_seed": dseed,
                "seed": seed,
            })),
        );
    }
    Ok(out.finish())
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| p.contains(&i)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Four-category first-appearance ordering questions.
pub fn gen_appearance_order(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Result<Vec<QAPair>> {
    let task = TaskType::AppearanceOrder;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let mut out = PairBuilder::new(meta, task);
    let Some(vis) = &meta.visibility else {
        return Ok(out.finish());
    };
    let threshold = config.visibility_threshold(vis);
    let first = first_appearance(vis, threshold)?;
    let mut ties: BTreeMap<u64, usize> = BTreeMap::new();
    for t in first.values() {
        *ties.entry(t.to_bits()).or_default() += 1;
    }
    let pool: Vec<(&str, f64)> = first
        .iter()
        .filter(|(c, t)| !config.is_excluded(c) && ties[&t.to_bits()] == 1)
        .map(|(c, t)| (c.as_str(), *t))
        .collect();
    if pool.len() < 4 {
        return Ok(out.finish());
    }

    let perms = permutations4();
    let mut seen: BTreeSet<Vec<&str>> = BTreeSet::new();
    let mut attempts = 0;
    while out.len() < limit && attempts < config.max_attempts * limit.max(1) {
        attempts += 1;
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        let chosen: Vec<(&str, f64)> = shuffled.into_iter().take(4).collect();
        let mut key: Vec<&str> = chosen.iter().map(|(c, _)| *c).collect();
        key.sort_unstable();
        if !seen.insert(key) {
            continue;
        }
        let mut true_order: Vec<usize> = (0..4).collect();
        true_order.sort_by(|&i, &j| chosen[i].1.total_cmp(&chosen[j].1));
        let render = |p: &[usize]| p.iter().map(|&i| chosen[i].0).collect::<Vec<_>>().join(", ");
        let answer = render(&true_order);
        let mut distractors: Vec<String> = perms
            .iter()
            .filter(|p| p[..] != true_order[..])
            .map(|p| render(p))
            .collect();
        distractors.shuffle(&mut rng);
        let mut options: Vec<String> = distractors.into_iter().take(3).collect();
        options.push(answer.clone());
        options.shuffle(&mut rng);
        let names: Vec<&str> = chosen.iter().map(|(c, _)| *c).collect();
        let times: Map<String, Value> = chosen.iter().map(|(c, t)| (c.to_string(), json!(t))).collect();
        out.push(
            format!(
                "What will be the first-time appearance order of the following categories in the video: {}",
                names.join(", ")
            ),
            Answer::Text(answer),
            AnswerKind::MultipleChoice,
            Some(options),
            obj_meta(json!({
                "first_appearance": times,
                "pixel_threshold": threshold,
                "seed": seed,
            })),
        );
    }
    Ok(out.finish())
}

/// Closest-to-anchor questions with well separated option distances.
pub fn gen_rel_distance(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Result<Vec<QAPair>> {
    let task = TaskType::RelDistance;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let by_cat = instances_by_category(meta, config);
    let mut anchors: Vec<&SceneObject> = by_cat.values().filter(|v| v.len() == 1).map(|v| v[0]).collect();
    anchors.shuffle(&mut rng);
    let task_seed = rng.next_u64();
    let mut out = PairBuilder::new(meta, task);
    for anchor in anchors {
        if out.len() >= limit {
            break;
        }
        if by_cat.len() < 5 {
            break;
        }
        // category -> (distance, nearest instance, seed used)
        let mut distances: Vec<(&str, f64, u64, u64)> = Vec::new();
        for (cat, instances) in &by_cat {
            if *cat == anchor.category {
                continue;
            }
            let mut best: Option<(f64, u64, u64)> = None;
            for inst in instances {
                let s = pair_seed(task_seed, anchor.instance_id, inst.instance_id);
                let d = min_obb_distance(&anchor.obb, &inst.obb, config.samples_per_box, s)?;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, inst.instance_id, s));
                }
            }
            let (d, inst, s) = best.expect("category has instances");
            distances.push((cat, d, inst, s));
        }
        for _ in 0..config.max_attempts {
            let mut pick = distances.clone();
            pick.shuffle(&mut rng);
            pick.truncate(4);
            let separated = (0..4).all(|i| {
                (i + 1..4).all(|j| (pick[i].1 - pick[j].1).abs() >= config.rel_distance_separation)
            });
            if !separated {
                continue;
            }
            let closest = pick
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("four options");
            let options: Vec<String> = pick.iter().map(|o| o.0.to_string()).collect();
            let detail: Vec<Value> = pick
                .iter()
                .map(|(c, d, inst, s)| json!({ "category": c, "distance": d, "instance_id": inst, "distance_seed": s }))
                .collect();
            out.push(
                format!(
                    "Which of these objects ({}) is closest to the {}?",
                    options.join(", "),
                    anchor.category
                ),
                Answer::Text(closest.0.to_string()),
                AnswerKind::MultipleChoice,
                Some(options),
                obj_meta(json!({
                    "anchor": anchor.category,
                    "anchor_instance": anchor.instance_id,
                    "options": detail,
                    "samples_per_box": config.samples_per_box,
                    "separation": config.rel_distance_separation,
                    "seed": seed,
                })),
            );
            break;
        }
    }
    Ok(out.finish())
}

fn direction_question(position: &str, facing: &str, query: &str, difficulty: super::Difficulty) -> String {
    let lead = format!("If I am standing by the {position} and facing the {facing}, is the {query}");
    match difficulty {
        super::Difficulty::Easy => format!("{lead} to the left or the right?"),
        super::Difficulty::Medium => format!("{lead} to the left, the right, or the back?"),
        super::Difficulty::Hard => format!("{lead} to the front-left, front-right, back-left, or back-right?"),
    }
}

/// Left/right/back questions from (position, facing, query) triples of
/// uniquely labelled objects, using floor-plane box centers.
pub fn gen_rel_direction(meta: &SceneMetadata, seed: u64, config: &QaGenConfig) -> Result<Vec<QAPair>> {
    let task = TaskType::RelDirection;
    let mut rng = task_rng(&meta.scene_id, &task, seed);
    let limit = config.limit_for(&task);
    let objects = unique_objects(meta, config);
    let mut out = PairBuilder::new(meta, task);
    if objects.len() < 3 {
        return Ok(out.finish());
    }
    let mut seen: BTreeSet<[u64; 3]> = BTreeSet::new();
    let mut attempts = 0;
    while out.len() < limit && attempts < config.max_attempts * limit.max(1) {
        attempts += 1;
        let mut pick = objects.clone();
        pick.shuffle(&mut rng);
        let (p, f, q) = (pick[0], pick[1], pick[2]);
        let difficulty = config.direction_difficulties[rng.random_range(0..config.direction_difficulties.len())];
        if !seen.insert([p.instance_id, f.instance_id, q.instance_id]) {
            continue;
        }
        let xy = |o: &SceneObject| [o.obb.center[0], o.obb.center[1]];
        let Ok(angle) = rel_direction_angle(xy(p), xy(f), xy(q)) else {
            continue;
        };
        let Some(class) = discretize_direction(angle, difficulty) else {
            continue;
        };
        out.push(
            direction_question(&p.category, &f.category, &q.category, difficulty),
            Answer::Text(class.to_string()),
            AnswerKind::MultipleChoice,
            Some(difficulty.classes().iter().map(|c| c.to_string()).collect()),
            obj_meta(json!({
                "position": p.category,
                "facing": f.category,
                "query": q.category,
                "angle_deg": angle,
                "difficulty": difficulty.as_str(),
                "seed": seed,
            })),
        );
    }
    Ok(out.finish())
}

#[cfg(test)]
mod tests {
    use super::super::{OrientedBox, Visibility};
    use super::*;

    fn obj(id: u64, cat: &str, center: [f64; 3]) -> SceneObject {
        SceneObject {
            instance_id: id,
            category: cat.into(),
            obb: OrientedBox::axis_aligned(center, [0.4, 0.4, 0.8]),
        }
    }

    fn scene(objects: Vec<SceneObject>) -> SceneMetadata {
        SceneMetadata {
            schema_version: 1,
            scene_id: "scene0001_00".into(),
            objects,
            room_area_m2: Some(18.5),
            floor_points: None,
            visibility: None,
        }
    }

    #[test]
    fn count_only_repeated_categories() {
        let meta = scene(vec![
            obj(1, "chair", [0.0; 3]),
            obj(2, "chair", [1.0, 0.0, 0.0]),
            obj(3, "chair", [2.0, 0.0, 0.0]),
            obj(4, "table", [3.0, 0.0, 0.0]),
            obj(5, "wall", [0.0, 3.0, 0.0]),
            obj(6, "wall", [0.0, 4.0, 0.0]),
        ]);
        let qa = gen_object_count(&meta, 7, &QaGenConfig::default());
        assert_eq!(qa.len(), 1);
        assert_eq!(qa[0].question, "How many chair(s) are in this room?");
        assert_eq!(qa[0].answer, Answer::Number(3.0));
        assert_eq!(qa[0].id, "scene0001_00_object_count_0");
        assert_eq!(qa, gen_object_count(&meta, 7, &QaGenConfig::default()));
    }

    #[test]
    fn count_needs_repeats() {
        let meta = scene(vec![obj(1, "chair", [0.0; 3]), obj(2, "table", [2.0, 0.0, 0.0])]);
        assert!(gen_object_count(&meta, 0, &QaGenConfig::default()).is_empty());
    }

    #[test]
    fn permutations_are_complete() {
        let p = permutations4();
        assert_eq!(p.len(), 24);
        assert_eq!(p.iter().collect::<BTreeSet<_>>().len(), 24);
    }

    #[test]
    fn appearance_order_answer_is_sorted() {
        let mut meta = scene(vec![]);
        let series = |t: usize| (0..5).map(|i| if i >= t { 1000.0 } else { 0.0 }).collect::<Vec<f64>>();
        meta.visibility = Some(Visibility {
            frame_width: 640,
            frame_height: 480,
            timestamps: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            counts: [("chair", 0), ("table", 1), ("sofa", 2), ("bed", 3), ("lamp", 3), ("desk", 4)]
                .into_iter()
                .map(|(c, t)| (c.to_string(), series(t)))
                .collect(),
        });
        let qa = gen_appearance_order(&meta, 1, &QaGenConfig::default()).unwrap();
        assert_eq!(qa.len(), 1, "bed and lamp tie, leaving exactly four categories");
        assert_eq!(qa[0].answer, Answer::Text("chair, table, sofa, desk".into()));
        let opts = qa[0].options.as_ref().unwrap();
        assert_eq!(opts.len(), 4);
        assert_eq!(opts.iter().collect::<BTreeSet<_>>().len(), 4);
        assert!(opts.contains(&"chair, table, sofa, desk".to_string()));
    }

    #[test]
    fn rel_distance_respects_separation() {
        let meta = scene(vec![
            obj(1, "tv", [0.0, 0.0, 0.0]),
            obj(2, "chair", [1.0, 0.0, 0.0]),
            obj(3, "sofa", [0.0, 1.5, 0.0]),
            obj(4, "lamp", [-2.0, 0.0, 0.0]),
            obj(5, "bed", [0.0, -3.0, 0.0]),
            obj(6, "desk", [0.0, -3.05, 0.0]),
        ]);
        let cfg = QaGenConfig {
            samples_per_box: 200,
            ..QaGenConfig::default()
        };
        let qa = gen_rel_distance(&meta, 9, &cfg).unwrap();
        assert!(!qa.is_empty());
        for q in &qa {
            let opts = q.meta["options"].as_array().unwrap();
            let d: Vec<f64> = opts.iter().map(|o| o["distance"].as_f64().unwrap()).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    assert!((d[i] - d[j]).abs() >= 0.15);
                }
            }
            let names: Vec<&str> = opts.iter().map(|o| o["category"].as_str().unwrap()).collect();
            assert!(!(names.contains(&"bed") && names.contains(&"desk")));
        }
    }

    #[test]
    fn rel_direction_answers_match_angles() {
        let meta = scene(vec![
            obj(1, "door", [0.0, 0.0, 0.0]),
            obj(2, "window", [0.0, 3.0, 0.0]),
            obj(3, "sink", [2.0, 1.0, 0.0]),
            obj(4, "bed", [-2.0, -1.5, 0.0]),
        ]);
        let qa = gen_rel_direction(&meta, 4, &QaGenConfig::default()).unwrap();
        assert!(!qa.is_empty());
        for q in qa {
            let angle = q.meta["angle_deg"].as_f64().unwrap();
            let diff: super::super::Difficulty =
                serde_json::from_value(q.meta["difficulty"].clone()).unwrap();
            assert_eq!(q.answer, Answer::Text(discretize_direction(angle, diff).unwrap().into()));
            assert!(q.options.unwrap().contains(&q.answer.to_text()));
        }
    }
}
