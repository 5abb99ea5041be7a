#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use voxcover::qagen::{OrientedBox, SceneMetadata, SceneObject, Visibility};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_voxcover")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run_cli(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("VOXCOVER_THREADS", n.to_string()),
        None => cmd.env_remove("VOXCOVER_THREADS"),
    };
    cmd.output().expect("spawn voxcover")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Room footprint with a known area: a rectangle, optionally with one
/// corner quadrant cut away (an L shape).
#[derive(Debug, Clone, Copy)]
pub struct Footprint {
    pub width: f64,
    pub depth: f64,
    pub notch: Option<(f64, f64)>,
}

impl Footprint {
    pub fn area(&self) -> f64 {
        self.width * self.depth - self.notch.map_or(0.0, |(w, d)| w * d)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let in_rect = (0.0..=self.width).contains(&x) && (0.0..=self.depth).contains(&y);
        let in_notch = self
            .notch
            .is_some_and(|(w, d)| x > self.width - w && y > self.depth - d);
        in_rect && !in_notch
    }

    /// Dense floor samples on a regular lattice.
    pub fn floor_points(&self, spacing: f64) -> Vec<[f64; 2]> {
        let nx = (self.width / spacing).round() as usize;
        let ny = (self.depth / spacing).round() as usize;
        let mut pts = Vec::new();
        for i in 0..=nx {
            for j in 0..=ny {
                let (x, y) = (i as f64 * spacing, j as f64 * spacing);
                if self.contains(x, y) {
                    pts.push([x, y]);
                }
            }
        }
        pts
    }
}

const UNIQUE: [&str; 8] = ["table", "sofa", "bed", "lamp", "tv", "cabinet", "desk", "sink"];

/// Axis-aligned scene number `i`: a few chairs, several single-instance
/// objects on a jittered grid, structural boxes, floor samples and a
/// visibility series.
pub fn fixture_scene(i: u64) -> (SceneMetadata, Footprint) {
    let mut rng = Pcg32::seed_from_u64(1000 + i);
    let fp = Footprint {
        width: rng.random_range(6.0..9.0),
        depth: rng.random_range(5.0..7.0),
        notch: (i % 2 == 1).then(|| (rng.random_range(1.0..2.0), rng.random_range(1.0..2.0))),
    };
    let mut objects = Vec::new();
    let mut next_id = 1u64;
    let mut place = |category: &str, center: [f64; 3], extent: [f64; 3]| {
        objects.push(SceneObject {
            instance_id: next_id,
            category: category.to_string(),
            obb: OrientedBox::axis_aligned(center, extent),
        });
        next_id += 1;
    };
    // 4 x 3 layout cells inside the non-notched part of the room
    let cols = 4;
    let cell_w = (fp.width - fp.notch.map_or(0.0, |n| n.0)) / cols as f64;
    let cell_d = fp.depth / 3.0;
    let n_unique = 6 + (i as usize % 3);
    let n_chairs = 2 + (i as usize % 3);
    let mut slots: Vec<(usize, usize)> = (0..cols).flat_map(|c| (0..3).map(move |r| (c, r))).collect();
    for k in (1..slots.len()).rev() {
        let j = rng.random_range(0..=k);
        slots.swap(k, j);
    }
    let labels = UNIQUE[..n_unique]
        .iter()
        .copied()
        .chain(std::iter::repeat_n("chair", n_chairs));
    for (label, (c, r)) in labels.zip(slots) {
        let ext = [
            rng.random_range(0.3..0.9_f64).min(cell_w * 0.6),
            rng.random_range(0.3..0.9_f64).min(cell_d * 0.6),
            rng.random_range(0.4..1.5),
        ];
        let cx = (c as f64 + 0.5) * cell_w + rng.random_range(-0.15..0.15) * cell_w;
        let cy = (r as f64 + 0.5) * cell_d + rng.random_range(-0.15..0.15) * cell_d;
        place(label, [cx, cy, ext[2] / 2.0], ext);
    }
    place("wall", [fp.width / 2.0, 0.0, 1.4], [fp.width, 0.1, 2.8]);
    place("floor", [fp.width / 2.0, fp.depth / 2.0, -0.05], [fp.width, fp.depth, 0.1]);

    let timestamps: Vec<f64> = (0..24).map(|t| t as f64 * 0.5).collect();
    let mut counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (n, cat) in UNIQUE[..n_unique].iter().chain(["chair", "wall"].iter()).enumerate() {
        let start = rng.random_range(0..20usize);
        // one category only ever reaches a sub-threshold count
        let peak = if n == 2 { 300.0 } else { rng.random_range(400.0..5000.0) };
        let series = (0..timestamps.len())
            .map(|t| if t >= start { peak } else { rng.random_range(0.0..200.0) })
            .collect();
        counts.insert(cat.to_string(), series);
    }
    let meta = SceneMetadata {
        schema_version: 1,
        scene_id: format!("fixture{i:02}"),
        objects,
        room_area_m2: None,
        floor_points: Some(fp.floor_points(0.025)),
        visibility: Some(Visibility {
            frame_width: 640,
            frame_height: 480,
            timestamps,
            counts,
        }),
    };
    (meta, fp)
}

/// Exact distance between two axis-aligned boxes.
pub fn aabb_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    (0..3)
        .map(|k| {
            let gap = (a.center[k] - b.center[k]).abs() - (a.extent[k] + b.extent[k]) / 2.0;
            gap.max(0.0).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
