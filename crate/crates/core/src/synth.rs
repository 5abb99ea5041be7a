//! Procedural rooms and camera trajectories with ray-cast depth, for
//! exercising the sampling pipeline without a depth estimator.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::{CameraFrame, CameraIntrinsics, CameraPose, FloatMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// Camera circles the room center looking outward.
    Orbit,
    /// Camera translates along the room's long axis.
    Dolly,
    /// Camera sits still for the first half, then pans a full turn.
    StaticThenPan,
}

impl Trajectory {
    pub const ALL: [Trajectory; 3] = [Trajectory::Orbit, Trajectory::Dolly, Trajectory::StaticThenPan];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    /// Entry and exit ray parameters, if the ray line meets the box.
    fn slab(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if dir[a].abs() < 1e-15 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let (mut lo, mut hi) = ((self.min[a] - origin[a]) * inv, (self.max[a] - origin[a]) * inv);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub room: Aabb,
    pub furniture: Vec<Aabb>,
}

impl SyntheticScene {
    /// Room of random size with a handful of boxes standing on the floor.
    pub fn procedural(seed: u64) -> Self {
        let mut rng = Pcg32::seed_from_u64(seed);
        let size = Vector3::new(
            rng.random_range(4.0..8.0),
            rng.random_range(3.5..6.0),
            rng.random_range(2.4..3.2),
        );
        let room = Aabb {
            min: Point3::origin(),
            max: Point3::from(size),
        };
        let n = rng.random_range(3..7);
        let furniture = (0..n)
            .map(|_| {
                let ext = Vector3::new(
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.3..1.2),
                    rng.random_range(0.4..1.6),
                );
                let x = rng.random_range(0.2..size.x - ext.x - 0.2);
                let y = rng.random_range(0.2..size.y - ext.y - 0.2);
                let min = Point3::new(x, y, 0.0);
                Aabb { min, max: min + ext }
            })
            .collect();
        Self { room, furniture }
    }

    /// Distance along `dir` to the first surface seen from inside the room.
    pub fn cast(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut best = self.room.slab(origin, dir).map(|(_, exit)| exit).filter(|t| *t > 0.0);
        for b in &self.furniture {
            if let Some((enter, _)) = b.slab(origin, dir) {
                if enter > 1e-9 && best.is_none_or(|t| enter < t) {
                    best = Some(enter);
                }
            }
        }
        best
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.room.min, &self.room.max)
    }
}

/// Camera-from-world pose looking from `eye` toward `target` (world z up,
/// camera x right, y down, z forward).
pub fn look_at(eye: &Point3<f64>, target: &Point3<f64>) -> Result<CameraPose> {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    CameraPose::from_rotation_translation(r, -(r * eye.coords))
}

fn camera_path(scene: &SyntheticScene, trajectory: Trajectory, n: usize, phase: f64) -> Vec<(Point3<f64>, Point3<f64>)> {
    let c = scene.center();
    let ext = scene.room.max - scene.room.min;
    let h = 1.4;
    (0..n)
        .map(|i| {
            let s = i as f64 / n.max(1) as f64;
            match trajectory {
                Trajectory::Orbit => {
                    let a = phase + s * std::f64::consts::TAU;
                    let r = 0.25 * ext.x.min(ext.y);
                    let eye = Point3::new(c.x + r * a.cos(), c.y + r * a.sin(), h);
                    let target = Point3::new(c.x + 3.0 * r * a.cos(), c.y + 3.0 * r * a.sin(), h - 0.3);
                    (eye, target)
                }
                Trajectory::Dolly => {
                    let x = scene.room.min.x + 0.15 * ext.x + s * 0.7 * ext.x;
                    let eye = Point3::new(x, c.y + 0.2 * ext.y * (phase.sin()), h);
                    let yaw = phase.cos() * 0.6;
                    let target = Point3::new(x + yaw.cos(), eye.y + yaw.sin(), h - 0.2);
                    (eye, target)
                }
                Trajectory::StaticThenPan => {
                    let eye = Point3::new(c.x, c.y, h);
                    let a = if i < n / 2 {
                        phase
                    } else {
                        phase + (i - n / 2 + 1) as f64 / (n - n / 2) as f64 * std::f64::consts::TAU
                    };
                    (eye, Point3::new(c.x + a.cos(), c.y + a.sin(), h - 0.25))
                }
            }
        })
        .collect()
}

/// Renders `n_frames` depth/confidence frames along a trajectory.
/// Confidence decays with depth and carries a deterministic per-pixel
/// perturbation so the percentile filter has something to do.
pub fn render_frames(
    scene: &SyntheticScene,
    trajectory: Trajectory,
    n_frames: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<CameraFrame>> {
    let mut rng = Pcg32::seed_from_u64(seed ^ 0x5eed);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let f = 0.8 * width as f64;
    let k = CameraIntrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)?;
    camera_path(scene, trajectory, n_frames, phase)
        .into_iter()
        .enumerate()
        .map(|(i, (eye, target))| {
            let pose = look_at(&eye, &target)?;
            let rot_t = pose.matrix().fixed_view::<3, 3>(0, 0).transpose();
            let mut conf = Vec::with_capacity(width * height);
            let depth = FloatMap::from_fn(width, height, |u, v| {
                let dir_c = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                let d = scene.cast(&eye, &(rot_t * dir_c)).unwrap_or(0.0);
                let jitter = rng.random_range(-0.15..0.15);
                conf.push((0.95 - 0.06 * d + jitter).clamp(0.0, 1.0) as f32);
                d as f32
            });
            let conf = FloatMap::new(width, height, conf)?;
            CameraFrame::new(i as u32, depth, conf, k, pose)
        })
        .collect()
}
