//! Depth unprojection, confidence filtering and voxel discretization.
//!
//! Poses are stored camera-from-world. A pixel `(u, v)` with depth `d` maps
//! to the camera-frame point `(d (u - cx) / fx, d (v - cy) / fy, d)`, which
//! the inverse pose carries into the world frame. `u` is the column and `v`
//! the row of the depth map.

pub use nalgebra::{Matrix3, Matrix4, Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats;

/// Default confidence floor for valid points.
pub const DEFAULT_CONF_FLOOR: f64 = 0.1;
/// Default pooled-confidence percentile for valid points.
pub const DEFAULT_PERCENTILE: f64 = 50.0;
/// Default voxel-size divisor.
pub const DEFAULT_LAMBDA: f64 = 20.0;
/// Default pixel stride for unprojection.
pub const DEFAULT_STRIDE: usize = 4;

const BOUNDS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(Error::invalid(format!(
                "focal lengths must be positive and finite, got fx={fx} fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// `[fx, fy, cx, cy]`, the manifest layout.
    pub fn from_array(k: [f64; 4]) -> Result<Self> {
        Self::new(k[0], k[1], k[2], k[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.fx, self.fy, self.cx, self.cy]
    }
}

/// Rigid camera-from-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    matrix: Matrix4<f64>,
}

impl CameraPose {
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
        }
    }

    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pose contains non-finite entries"));
        }
        let last = matrix.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::invalid("pose last row must be (0, 0, 0, 1)"));
        }
        let r: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let gram = r.transpose() * r - Matrix3::identity();
        if gram.amax() > Self::ORTHONORMAL_TOL {
            return Err(Error::invalid("pose rotation block is not orthonormal"));
        }
        Ok(Self { matrix })
    }

    /// Sixteen entries, row-major.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        Self::from_matrix(Matrix4::from_row_slice(m))
    }

    pub fn from_rotation_translation(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::from_matrix(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.matrix[(r, c)];
            }
        }
        out
    }

    fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    fn translation(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation() * p.coords + self.translation())
    }

    /// Applies the rigid inverse `R^T (p - t)`.
    pub fn camera_to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation().transpose() * (p.coords - self.translation()))
    }
}

/// Row-major single-channel float raster (depth or confidence).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FloatMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::invalid(format!(
                "raster {width}x{height} does not match {} samples",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Sample at column `u`, row `v`.
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }
}

/// One frame's depth, confidence and camera. Construction validates the
/// frame, so every `CameraFrame` in circulation is well formed.
#[derive(Debug, Clone)]
pub struct CameraFrame {
    frame_id: u32,
    depth: FloatMap,
    confidence: FloatMap,
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
}

impl CameraFrame {
    pub fn new(
        frame_id: u32,
        depth: FloatMap,
        confidence: FloatMap,
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
    ) -> Result<Self> {
        if depth.width != confidence.width || depth.height != confidence.height {
            return Err(Error::invalid(format!(
                "frame {frame_id}: depth is {}x{} but confidence is {}x{}",
                depth.width, depth.height, confidence.width, confidence.height
            )));
        }
        if let Some(d) = depth.data.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::invalid(format!(
                "frame {frame_id}: depth value {d} is not a finite nonnegative number"
            )));
        }
        if let Some(c) = confidence
            .data
            .iter()
            .find(|c| !c.is_finite() || **c < 0.0 || **c > 1.0)
        {
            return Err(Error::invalid(format!(
                "frame {frame_id}: confidence value {c} is outside [0, 1]"
            )));
        }
        Ok(Self {
            frame_id,
            depth,
            confidence,
            intrinsics,
            pose,
        })
    }

    pub fn frame_id(&self) -> u32 {
        self.frame_id
    }

    pub fn depth(&self) -> &FloatMap {
        &self.depth
    }

    pub fn confidence(&self) -> &FloatMap {
        &self.confidence
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn pose(&self) -> &CameraPose {
        &self.pose
    }
}

/// World points unprojected from one frame, with per-point confidence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet {
    pub frame_id: u32,
    pub points: Vec<Point3<f64>>,
    pub confidences: Vec<f64>,
}

impl PointSet {
    pub fn new(frame_id: u32, points: Vec<Point3<f64>>, confidences: Vec<f64>) -> Result<Self> {
        if points.len() != confidences.len() {
            return Err(Error::invalid(format!(
                "{} points but {} confidences",
                points.len(),
                confidences.len()
            )));
        }
        if points.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self {
            frame_id,
            points,
            confidences,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unprojects a single pixel at depth `depth` into world coordinates.
pub fn unproject_pixel(
    u: f64,
    v: f64,
    depth: f64,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Point3<f64> {
    let cam = Point3::new(
        depth * (u - intrinsics.cx) / intrinsics.fx,
        depth * (v - intrinsics.cy) / intrinsics.fy,
        depth,
    );
    pose.camera_to_world(&cam)
}

/// Forward pinhole projection: world point to `(u, v, depth)`.
/// Returns `None` for points at or behind the camera plane.
pub fn project_point(
    world: &Point3<f64>,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Option<(f64, f64, f64)> {
    let cam = pose.world_to_camera(world);
    if cam.z <= 0.0 {
        return None;
    }
    Some((
        intrinsics.fx * cam.x / cam.z + intrinsics.cx,
        intrinsics.fy * cam.y / cam.z + intrinsics.cy,
        cam.z,
    ))
}

/// Unprojects every `stride`-th pixel (in both directions) of a frame.
/// Zero-depth pixels are holes and produce no point.
pub fn unproject_frame(frame: &CameraFrame, stride: usize) -> Result<PointSet> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let depth = &frame.depth;
    let mut points = Vec::new();
    let mut confidences = Vec::new();
    for v in (0..depth.height).step_by(stride) {
        for u in (0..depth.width).step_by(stride) {
            let d = depth.get(u, v);
            if d == 0.0 {
                continue;
            }
            points.push(unproject_pixel(
                u as f64,
                v as f64,
                d as f64,
                &frame.intrinsics,
                &frame.pose,
            ));
            confidences.push(frame.confidence.get(u, v) as f64);
        }
    }
    Ok(PointSet {
        frame_id: frame.frame_id,
        points,
        confidences,
    })
}

/// Percentile of all confidences pooled across `point_sets`.
pub fn pooled_confidence_threshold(point_sets: &[PointSet], percentile: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::invalid(format!("percentile {percentile} outside [0, 100]")));
    }
    let pooled: Vec<f64> = point_sets
        .iter()
        .flat_map(|s| s.confidences.iter().copied())
        .collect();
    stats::percentile(&pooled, percentile).ok_or(Error::EmptyScene)
}

/// Keeps points with `c > conf_floor` and `c >= threshold`.
pub fn apply_confidence_filter(point_sets: &[PointSet], conf_floor: f64, threshold: f64) -> Vec<PointSet> {
    point_sets
        .iter()
        .map(|set| {
            let mut out = PointSet {
                frame_id: set.frame_id,
                ..PointSet::default()
            };
            for (p, &c) in set.points.iter().zip(&set.confidences) {
                if c > conf_floor && c >= threshold {
                    out.points.push(*p);
                    out.confidences.push(c);
                }
            }
            out
        })
        .collect()
}

/// Valid-point filter: confidence above `conf_floor` and at or above the
/// `percentile`-th percentile of confidences pooled over every frame.
pub fn filter_valid(point_sets: &[PointSet], conf_floor: f64, percentile: f64) -> Result<Vec<PointSet>> {
    if !(0.0..=1.0).contains(&conf_floor) {
        return Err(Error::invalid(format!("conf_floor {conf_floor} outside [0, 1]")));
    }
    let threshold = pooled_confidence_threshold(point_sets, percentile)?;
    Ok(apply_confidence_filter(point_sets, conf_floor, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl SceneBounds {
    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }
}

pub fn scene_bounds(point_sets: &[PointSet]) -> Result<SceneBounds> {
    let mut it = point_sets.iter().flat_map(|s| s.points.iter());
    let first = *it.next().ok_or(Error::EmptyScene)?;
    let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    Ok(SceneBounds { min, max })
}

/// Voxel edge length: the smallest bounding-box extent divided by `lambda`.
/// A zero smallest extent (planar scene) falls back to the largest extent.
pub fn voxel_size(bounds: &SceneBounds, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let ext = bounds.extents();
    let min = ext.min();
    let base = if min > 0.0 { min } else { ext.max() };
    if base <= 0.0 {
        return Err(Error::DegenerateScene);
    }
    Ok(base / lambda)
}

/// Integer voxel coordinate `(i, j, k)`.
pub type Voxel = [u32; 3];

/// Number of voxels along each axis, at least one.
pub fn grid_dims(bounds: &SceneBounds, delta: f64) -> Result<[u32; 3]> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("voxel size must be positive, got {delta}")));
    }
    let ext = bounds.extents();
    let mut dims = [1u32; 3];
    for (axis, dim) in dims.iter_mut().enumerate() {
        let n = (ext[axis] / delta).ceil().max(1.0);
        if n > u32::MAX as f64 {
            return Err(Error::invalid("voxel grid too large for 32-bit indices"));
        }
        *dim = n as u32;
    }
    Ok(dims)
}

/// The set of voxels one frame observes, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameVoxelSet {
    pub frame_id: u32,
    voxels: Vec<Voxel>,
}

impl FrameVoxelSet {
    pub fn new(frame_id: u32, voxels: impl IntoIterator<Item = Voxel>) -> Self {
        let mut voxels: Vec<Voxel> = voxels.into_iter().collect();
        voxels.sort_unstable();
        voxels.dedup();
        Self { frame_id, voxels }
    }

    pub fn voxels(&self) -> &[Voxel] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, v: &Voxel) -> bool {
        self.voxels.binary_search(v).is_ok()
    }
}

/// Discretizes points into voxels of edge `delta` anchored at the bounds'
/// minimum corner. Points on the maximum face clamp into the last cell.
pub fn voxelize(points: &PointSet, bounds: &SceneBounds, delta: f64) -> Result<FrameVoxelSet> {
    let dims = grid_dims(bounds, delta)?;
    let mut voxels = Vec::with_capacity(points.len());
    for p in &points.points {
        if !bounds.contains(p, BOUNDS_TOL) {
            return Err(Error::OutOfBounds {
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        let mut idx = [0u32; 3];
        for axis in 0..3 {
            let cell = ((p[axis] - bounds.min[axis]) / delta).floor().max(0.0);
            idx[axis] = (cell as u64).min(dims[axis] as u64 - 1) as u32;
        }
        voxels.push(idx);
    }
    Ok(FrameVoxelSet::new(points.frame_id, voxels))
}

/// Voxelizes many frames in parallel, preserving input order.
pub fn voxelize_all(point_sets: &[PointSet], bounds: &SceneBounds, delta: f64) -> Result<Vec<FrameVoxelSet>> {
    point_sets
        .par_iter()
        .map(|s| voxelize(s, bounds, delta))
        .collect()
}
