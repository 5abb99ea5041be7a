mod common;

use std::collections::BTreeSet;

use nalgebra::{Point3, Rotation3, Vector3};
use proptest::prelude::*;
use voxcover::coldstart::{self, Candidate, RewardRecord};
use voxcover::coverage::{self, CoverageInstance};
use voxcover::geom::{self, CameraIntrinsics, CameraPose, FrameVoxelSet, PointSet, SceneBounds};
use voxcover::qagen::{self, discretize_direction, Difficulty, OrientedBox, QaGenConfig, TaskType};
use voxcover::rewards::{self, AnswerKind, RewardConfig};

fn intrinsics() -> impl Strategy<Value = CameraIntrinsics> {
    (100.0..1000.0f64, 100.0..1000.0f64, 0.0..640.0f64, 0.0..480.0f64)
        .prop_map(|(fx, fy, cx, cy)| CameraIntrinsics::new(fx, fy, cx, cy).unwrap())
}

fn pose() -> impl Strategy<Value = CameraPose> {
    (prop::array::uniform3(-3.0..3.0f64), prop::array::uniform3(-10.0..10.0f64)).prop_map(|(axis, t)| {
        let r = Rotation3::from_scaled_axis(Vector3::from(axis));
        CameraPose::from_rotation_translation(*r.matrix(), Vector3::from(t)).unwrap()
    })
}

fn point_sets() -> impl Strategy<Value = Vec<PointSet>> {
    prop::collection::vec(
        prop::collection::vec((prop::array::uniform3(-5.0..5.0f64), 0.0..=1.0f64), 1..40),
        1..5,
    )
    .prop_map(|frames| {
        frames
            .into_iter()
            .enumerate()
            .map(|(i, pts)| {
                let (p, c): (Vec<_>, Vec<_>) = pts.into_iter().map(|(p, c)| (Point3::from(p), c)).unzip();
                PointSet::new(i as u32, p, c).unwrap()
            })
            .collect()
    })
}

fn voxel_sets(max_frames: usize, universe: u32) -> impl Strategy<Value = Vec<FrameVoxelSet>> {
    prop::collection::vec(prop::collection::btree_set(0..universe, 0..12), 1..=max_frames).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(i, s)| FrameVoxelSet::new(i as u32 * 3 + 1, s.into_iter().map(|v| [v, 0, 0])))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_round_trip(k in intrinsics(), pose in pose(), u in 0.0..640.0f64, v in 0.0..480.0f64, d in 0.1..50.0f64) {
        let world = geom::unproject_pixel(u, v, d, &k, &pose);
        let (pu, pv, pd) = geom::project_point(&world, &k, &pose).unwrap();
        prop_assert!((pu - u).abs() < 1e-6 && (pv - v).abs() < 1e-6 && (pd - d).abs() < 1e-6);
    }

    #[test]
    fn filter_is_subset_and_idempotent(sets in point_sets(), floor in 0.0..0.5f64) {
        let thr = geom::pooled_confidence_threshold(&sets, 50.0).unwrap();
        let once = geom::apply_confidence_filter(&sets, floor, thr);
        let twice = geom::apply_confidence_filter(&once, floor, thr);
        prop_assert_eq!(&once, &twice);
        for (orig, kept) in sets.iter().zip(&once) {
            prop_assert_eq!(orig.frame_id, kept.frame_id);
            for (p, c) in kept.points.iter().zip(&kept.confidences) {
                prop_assert!(*c > floor && *c >= thr);
                prop_assert!(orig.points.contains(p));
            }
        }
    }

    #[test]
    fn voxel_indices_stay_in_grid(sets in point_sets(), lambda in 2.0..40.0f64) {
        let bounds = geom::scene_bounds(&sets).unwrap();
        let Ok(delta) = geom::voxel_size(&bounds, lambda) else { return Ok(()) };
        let dims = geom::grid_dims(&bounds, delta).unwrap();
        for s in &sets {
            let vs = geom::voxelize(s, &bounds, delta).unwrap();
            prop_assert!(vs.len() <= s.len());
            for v in vs.voxels() {
                prop_assert!((0..3).all(|a| v[a] < dims[a]));
            }
        }
    }

    #[test]
    fn voxelization_is_scale_invariant(sets in point_sets(), exp in -3i32..4, lambda in 2.0..40.0f64) {
        // power-of-two factors keep the scaled coordinates exact
        let s = 2f64.powi(exp);
        let scaled: Vec<PointSet> = sets
            .iter()
            .map(|p| PointSet::new(p.frame_id, p.points.iter().map(|q| Point3::from(q.coords * s)).collect(), p.confidences.clone()).unwrap())
            .collect();
        let b1 = geom::scene_bounds(&sets).unwrap();
        let b2 = geom::scene_bounds(&scaled).unwrap();
        let (Ok(d1), Ok(d2)) = (geom::voxel_size(&b1, lambda), geom::voxel_size(&b2, lambda)) else { return Ok(()) };
        prop_assert!((d2 - s * d1).abs() <= 1e-12 * d2);
        prop_assert_eq!(geom::voxelize_all(&sets, &b1, d1).unwrap(), geom::voxelize_all(&scaled, &b2, d2).unwrap());
    }

    #[test]
    fn greedy_gains_positive_and_non_increasing(sets in voxel_sets(10, 30), k in 1usize..6) {
        let k = k.min(sets.len());
        let r = coverage::greedy_select(&CoverageInstance::new(sets, k).unwrap());
        prop_assert!(r.per_step_gain.iter().all(|g| *g > 0));
        prop_assert!(r.per_step_gain.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(r.per_step_gain.iter().sum::<usize>(), r.covered_count);
        prop_assert_eq!(r.early_stop, r.selected_ids.len() < k);
    }

    #[test]
    fn greedy_bounds_against_exhaustive(sets in voxel_sets(10, 30), k in 1usize..5) {
        let k = k.min(sets.len());
        let best_single = sets.iter().map(FrameVoxelSet::len).max().unwrap();
        let inst = CoverageInstance::new(sets, k).unwrap();
        let g = coverage::greedy_select(&inst);
        let e = coverage::exhaustive_select(&inst).unwrap();
        prop_assert!(g.covered_count >= best_single);
        prop_assert!(g.covered_count <= e.covered_count);
        prop_assert!(g.covered_count as f64 >= (1.0 - (-1.0f64).exp()) * e.covered_count as f64);
        if k == 1 {
            prop_assert_eq!(g.covered_count, e.covered_count);
        }
    }

    #[test]
    fn greedy_is_optimal_on_disjoint_sets(sizes in prop::collection::vec(0usize..8, 1..9), k in 1usize..5) {
        let mut next = 0u32;
        let sets: Vec<FrameVoxelSet> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let s = FrameVoxelSet::new(i as u32, (next..next + n as u32).map(|v| [v, 1, 2]));
                next += n as u32;
                s
            })
            .collect();
        let inst = CoverageInstance::new(sets, k.min(sizes.len())).unwrap();
        prop_assert_eq!(
            coverage::greedy_select(&inst).covered_count,
            coverage::exhaustive_select(&inst).unwrap().covered_count
        );
    }

    #[test]
    fn greedy_ignores_input_order(sets in voxel_sets(8, 20), k in 1usize..5, seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let k = k.min(sets.len());
        let mut shuffled = sets.clone();
        shuffled.shuffle(&mut rand_pcg::Pcg32::seed_from_u64(seed));
        let a = coverage::greedy_select(&CoverageInstance::new(sets, k).unwrap());
        let b = coverage::greedy_select(&CoverageInstance::new(shuffled, k).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rewards_stay_in_range(pred in -1e4..1e4f64, gt in -1e4..1e4f64, a in "[a-c ]{0,8}", b in "[a-c ]{0,8}", l1 in 0.0..2.0f64, l2 in 0.0..2.0f64) {
        let cfg = RewardConfig { lambda1: l1, lambda2: l2, ..RewardConfig::default() };
        let m = rewards::mra_reward(pred, gt, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        let v = rewards::verbal_reward(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        let raw = format!("<think>x</think><answer>{a}</answer>");
        for kind in [AnswerKind::MultipleChoice, AnswerKind::Numerical, AnswerKind::Verbal] {
            let c = rewards::composite_reward(&raw, &a, &b, kind, &cfg);
            prop_assert!(c.total >= 0.0 && c.total <= l1 + l2 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&c.task));
        }
    }

    #[test]
    fn mra_non_increasing_in_error(gt in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64], e1 in 0.0..2.0f64, e2 in 0.0..2.0f64, sign in prop::bool::ANY) {
        let cfg = RewardConfig::default();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let s = if sign { 1.0 } else { -1.0 };
        let r_lo = rewards::mra_reward(gt + s * lo * gt.abs(), gt, &cfg).unwrap();
        let r_hi = rewards::mra_reward(gt + s * hi * gt.abs(), gt, &cfg).unwrap();
        prop_assert!(r_lo >= r_hi);
        prop_assert_eq!(rewards::mra_reward(gt, gt, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn verbal_symmetric_and_exact_only_when_equal(a in "[ a-dA-D]{0,10}", b in "[ a-dA-D]{0,10}") {
        let ab = rewards::verbal_reward(&a, &b);
        prop_assert_eq!(ab, rewards::verbal_reward(&b, &a));
        prop_assert_eq!(ab == 1.0, rewards::normalize_verbal(&a) == rewards::normalize_verbal(&b));
    }

    #[test]
    fn refined_match_dominates_exact(pred in "(the |a )?[a-c]{1,3}( [a-c]{1,3}){0,3}[.!]?", gt in prop::collection::vec("[a-c]{1,3}( [a-c]{1,3}){0,2}", 1..3)) {
        prop_assert!(rewards::em_refined(&pred, &gt) >= rewards::em1(&pred, &gt));
    }

    #[test]
    fn advantages_are_standardized(group in prop::collection::vec(-10.0..10.0f64, 2..=16)) {
        let adv = rewards::group_advantages(&group).unwrap();
        let n = group.len() as f64;
        let mean = group.iter().sum::<f64>() / n;
        let std = (group.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std >= 1e-12 {
            let m = adv.iter().sum::<f64>() / n;
            let s = (adv.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(adv.iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn direction_bins_are_periodic(theta in -179.0..180.0f64, turns in -3i32..4) {
        for d in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
            let base = discretize_direction(theta, d);
            prop_assert_eq!(base, discretize_direction(theta + 360.0 * turns as f64, d));
            if let Some(c) = base {
                prop_assert!(d.classes().contains(&c));
            }
        }
    }

    #[test]
    fn coldstart_keeps_exactly_the_qualifying_items(
        rewards in prop::collection::vec((0usize..3, prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 1..5)), 1..40),
        q in 0.05..0.95f64,
    ) {
        let records: Vec<RewardRecord> = rewards
            .iter()
            .enumerate()
            .map(|(i, (t, rs))| RewardRecord {
                schema_version: 1,
                item_id: format!("i{i}"),
                task_type: format!("t{t}"),
                candidates: rs.iter().enumerate().map(|(j, r)| Candidate { trace_ref: format!("{i}/{j}"), reward: *r }).collect(),
            })
            .collect();
        let result = coldstart::filter_records(&records, q).unwrap();
        let kept: BTreeSet<&str> = result.kept.iter().map(|k| k.item_id.as_str()).collect();
        for r in &records {
            let best = r.candidates.iter().map(|c| c.reward).fold(f64::MIN, f64::max);
            let tau = result.thresholds[&r.task_type];
            prop_assert_eq!(kept.contains(r.item_id.as_str()), best > 0.0 && best >= tau);
        }
    }

    #[test]
    fn median_retention_is_half(rewards in prop::collection::btree_set(1u32..1_000_000, 1..60)) {
        // distinct positive values, i.e. tie-free
        let records: Vec<RewardRecord> = rewards
            .iter()
            .enumerate()
            .map(|(i, r)| RewardRecord {
                schema_version: 1,
                item_id: format!("i{i}"),
                task_type: "t".into(),
                candidates: vec![Candidate { trace_ref: String::new(), reward: *r as f64 / 1e6 }],
            })
            .collect();
        let n = records.len();
        let kept = coldstart::filter_records(&records, 0.5).unwrap().kept.len();
        prop_assert!(kept >= n / 2 && kept <= n.div_ceil(2));
    }
}

#[test]
fn generated_multiple_choice_pairs_are_well_formed() {
    let config = QaGenConfig::default();
    let all: BTreeSet<TaskType> = TaskType::GENERATED.into_iter().collect();
    for i in 0..10 {
        let (meta, _) = common::fixture_scene(i);
        for seed in [0, 7] {
            for pair in qagen::generate_all(&meta, &all, seed, &config).unwrap() {
                let Some(options) = &pair.options else { continue };
                let distinct: BTreeSet<&String> = options.iter().collect();
                assert_eq!(distinct.len(), options.len(), "{}", pair.id);
                assert!(options.contains(&pair.answer.to_text()), "{}", pair.id);
                match pair.task_type {
                    TaskType::RelDirection => {
                        let d: Difficulty = serde_json::from_value(pair.meta["difficulty"].clone()).unwrap();
                        assert_eq!(options.len(), d.classes().len());
                    }
                    _ => assert_eq!(options.len(), 4, "{}", pair.id),
                }
                if pair.task_type == TaskType::RelDistance {
                    let dists: Vec<f64> = pair.meta["options"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|o| o["distance"].as_f64().unwrap())
                        .collect();
                    for a in 0..dists.len() {
                        for b in a + 1..dists.len() {
                            assert!((dists[a] - dists[b]).abs() >= config.rel_distance_separation);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn sampled_box_distance_converges_from_above() {
    let a = OrientedBox::axis_aligned([0.0, 0.0, 0.5], [1.0, 0.8, 1.0]);
    let b = OrientedBox::axis_aligned([2.0, 0.6, 0.4], [0.6, 0.6, 0.8]);
    let exact = common::aabb_distance(&a, &b);
    let mut mean_err = Vec::new();
    for n in [100, 1000, 5000] {
        let errs: Vec<f64> = (0..12)
            .map(|s| qagen::min_obb_distance(&a, &b, n, s).unwrap() - exact)
            .collect();
        assert!(errs.iter().all(|e| *e >= 0.0), "estimate below analytic distance");
        mean_err.push(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    assert!(mean_err[0] > mean_err[1] && mean_err[1] > mean_err[2], "{mean_err:?}");
    assert!(mean_err[2] < 0.05 * exact);
}

#[test]
fn scene_bounds_contain_every_point() {
    let (meta, _) = common::fixture_scene(3);
    let pts: Vec<Point3<f64>> = meta.objects.iter().map(|o| Point3::from(o.obb.center)).collect();
    let set = PointSet::new(0, pts.clone(), vec![1.0; pts.len()]).unwrap();
    let SceneBounds { min, max } = geom::scene_bounds(&[set]).unwrap();
    assert!(pts.iter().all(|p| (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a])));
}
