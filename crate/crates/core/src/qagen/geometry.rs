//! Geometric predicates behind the generated answers.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg32;
use serde::{Deserialize, Serialize};

use super::Visibility;
use crate::error::{Error, Result};

pub const MIN_DISTANCE_SAMPLES: usize = 100;
pub const DEFAULT_DISTANCE_SAMPLES: usize = 1000;
pub const DEFAULT_ROOM_CELL: f64 = 0.05;
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: [f64; 3],
    /// Rows of the box-to-world rotation.
    pub rotation: [[f64; 3]; 3],
    /// Full side lengths in meters.
    pub extent: [f64; 3],
}

impl OrientedBox {
    pub fn axis_aligned(center: [f64; 3], extent: [f64; 3]) -> Self {
        Self {
            center,
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            extent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.extent.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid(format!("box extents must be positive, got {:?}", self.extent)));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("box center must be finite"));
        }
        let r = self.rotation_matrix();
        if r.iter().any(|v| !v.is_finite()) || (r.transpose() * r - Matrix3::identity()).amax() > 1e-6 {
            return Err(Error::invalid("box rotation is not orthonormal"));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let r = &self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    /// `n` points uniform in the box interior.
    pub fn sample_interior(&self, n: usize, rng: &mut Pcg32) -> Vec<Point3<f64>> {
        let r = self.rotation_matrix();
        let c = Vector3::from(self.center);
        let half = Vector3::from(self.extent) * 0.5;
        (0..n)
            .map(|_| {
                let u = Vector3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                Point3::from(c + r * u.component_mul(&half))
            })
            .collect()
    }
}

/// Longest box side in centimeters.
pub fn obb_longest_dim_cm(obb: &OrientedBox) -> f64 {
    100.0 * obb.extent.iter().copied().fold(f64::MIN, f64::max)
}

/// Floor area as the number of occupied `cell`-sized grid squares times
/// the cell area. The grid is anchored at the points' minimum corner.
pub fn room_area_m2(points: &[[f64; 2]], cell: f64) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::DegenerateRoom(points.len()));
    }
    if !(cell.is_finite() && cell > 0.0) {
        return Err(Error::invalid(format!("cell size must be positive, got {cell}")));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("floor points must be finite"));
    }
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let dims: [u64; 2] = std::array::from_fn(|a| ((max[a] - min[a]) / cell).ceil().max(1.0) as u64);
    let occupied: HashSet<[u64; 2]> = points
        .iter()
        .map(|p| std::array::from_fn(|a| (((p[a] - min[a]) / cell).floor() as u64).min(dims[a] - 1)))
        .collect();
    Ok(occupied.len() as f64 * cell * cell)
}

/// Smallest distance between two point clouds. Sweeps `b` sorted by x so
/// most pairs are never visited; the result equals the brute-force minimum.
pub fn min_pairwise_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let mut sorted: Vec<&Point3<f64>> = b.iter().collect();
    sorted.sort_by(|p, q| p.x.total_cmp(&q.x));
    let mut best_sq = f64::INFINITY;
    for p in a {
        let start = sorted.partition_point(|q| q.x < p.x);
        for q in sorted[start..].iter() {
            let dx = q.x - p.x;
            if dx * dx >= best_sq {
                break;
            }
            best_sq = best_sq.min((*q - p).norm_squared());
        }
        for q in sorted[..start].iter().rev() {
            let dx = p.x - q.x;
            if dx * dx >= best_sq {
                break;
            }
            best_sq = best_sq.min((*q - p).norm_squared());
        }
    }
    best_sq.sqrt()
}

/// Sampled closest-point distance between two boxes: `samples_per_box`
/// interior points per box, minimum over all cross pairs.
pub fn min_obb_distance(a: &OrientedBox, b: &OrientedBox, samples_per_box: usize, seed: u64) -> Result<f64> {
    if samples_per_box < MIN_DISTANCE_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_DISTANCE_SAMPLES} samples per box, got {samples_per_box}"
        )));
    }
    let mut rng = Pcg32::seed_from_u64(seed);
    let pa = a.sample_interior(samples_per_box, &mut rng);
    let pb = b.sample_interior(samples_per_box, &mut rng);
    Ok(min_pairwise_distance(&pa, &pb))
}

/// Timestamp at which each category's visible pixel count first exceeds
/// `pixel_threshold`. Categories that never exceed it are omitted.
pub fn first_appearance(visibility: &Visibility, pixel_threshold: f64) -> Result<BTreeMap<String, f64>> {
    if pixel_threshold.is_nan() || pixel_threshold <= 0.0 {
        return Err(Error::invalid("visibility threshold must be positive"));
    }
    Ok(visibility
        .counts
        .iter()
        .filter_map(|(cat, series)| {
            series
                .iter()
                .zip(&visibility.timestamps)
                .find(|(count, _)| **count > pixel_threshold)
                .map(|(_, t)| (cat.clone(), *t))
        })
        .collect())
}

/// Signed horizontal angle in degrees, in `(-180, 180]`, from the direction
/// position->facing to position->query. Positive is counterclockwise seen
/// from above, i.e. to the left.
pub fn rel_direction_angle(position: [f64; 2], facing: [f64; 2], query: [f64; 2]) -> Result<f64> {
    let f = [facing[0] - position[0], facing[1] - position[1]];
    let q = [query[0] - position[0], query[1] - position[1]];
    if f == [0.0, 0.0] || q == [0.0, 0.0] {
        return Err(Error::DegenerateGeometry(
            "facing and query must differ from position".into(),
        ));
    }
    let cross = f[0] * q[1] - f[1] * q[0];
    let dot = f[0] * q[0] + f[1] * q[1];
    let deg = cross.atan2(dot).to_degrees();
    Ok(if deg <= -180.0 { deg + 360.0 } else { deg })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Difficulty::Easy => &["left", "right"],
            Difficulty::Medium => &["left", "right", "back"],
            Difficulty::Hard => &["front-left", "front-right", "back-left", "back-right"],
        }
    }

    fn boundaries(self) -> &'static [f64] {
        match self {
            Difficulty::Easy => &[0.0, 180.0, -180.0],
            Difficulty::Medium => &[0.0, 135.0, -135.0],
            Difficulty::Hard => &[0.0, 90.0, -90.0, 180.0, -180.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

fn normalize_degrees(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    if t > 180.0 {
        t - 360.0
    } else {
        t
    }
}

/// Direction class for an angle, or `None` when the angle sits within
/// 1e-6 degrees of a class boundary.
pub fn discretize_direction(theta: f64, difficulty: Difficulty) -> Option<&'static str> {
    if !theta.is_finite() {
        return None;
    }
    let t = normalize_degrees(theta);
    if difficulty
        .boundaries()
        .iter()
        .any(|b| (t - b).abs() < BOUNDARY_TOL)
    {
        return None;
    }
    let side = if t > 0.0 { "left" } else { "right" };
    Some(match difficulty {
        Difficulty::Easy => side,
        Difficulty::Medium if t.abs() >= 135.0 => "back",
        Difficulty::Medium => side,
        Difficulty::Hard => match t {
            t if t > 0.0 && t < 90.0 => "front-left",
            t if t >= 90.0 => "back-left",
            t if t <= -90.0 => "back-right",
            _ => "front-right",
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_dim() {
        assert_eq!(obb_longest_dim_cm(&OrientedBox::axis_aligned([0.0; 3], [0.5, 2.0, 0.8])), 200.0);
        assert_eq!(obb_longest_dim_cm(&OrientedBox::axis_aligned([0.0; 3], [1.0; 3])), 100.0);
        let small = obb_longest_dim_cm(&OrientedBox::axis_aligned([0.0; 3], [0.01, 0.02, 0.03]));
        assert!((small - 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_validation() {
        assert!(OrientedBox::axis_aligned([0.0; 3], [1.0, 0.0, 1.0]).validate().is_err());
        let mut b = OrientedBox::axis_aligned([0.0; 3], [1.0; 3]);
        assert!(b.validate().is_ok());
        b.rotation[0][0] = 2.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn room_area_rectangle() {
        let mut pts = Vec::new();
        for i in 0..=100 {
            for j in 0..=150 {
                pts.push([i as f64 * 0.02, j as f64 * 0.02]);
            }
        }
        let area = room_area_m2(&pts, 0.05).unwrap();
        assert!((area - 6.0).abs() / 6.0 < 0.05, "{area}");
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.swap(3, 4000);
        assert_eq!(room_area_m2(&shuffled, 0.05).unwrap(), area);
    }

    #[test]
    fn room_area_single_cell() {
        let pts = [[1.0, 1.0], [1.01, 1.02], [1.03, 1.0]];
        assert!((room_area_m2(&pts, 0.05).unwrap() - 0.0025).abs() < 1e-15);
        assert!(matches!(room_area_m2(&pts[..2], 0.05), Err(Error::DegenerateRoom(2))));
    }

    #[test]
    fn sweep_matches_brute_force() {
        let mut rng = Pcg32::seed_from_u64(3);
        let a = OrientedBox::axis_aligned([0.0; 3], [1.0, 2.0, 0.5]).sample_interior(300, &mut rng);
        let b = OrientedBox::axis_aligned([1.5, 0.3, 0.0], [0.4; 3]).sample_interior(300, &mut rng);
        let brute = a
            .iter()
            .flat_map(|p| b.iter().map(move |q| (q - p).norm()))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_pairwise_distance(&a, &b), brute);
    }

    #[test]
    fn separated_unit_boxes() {
        let a = OrientedBox::axis_aligned([0.0; 3], [1.0; 3]);
        let b = OrientedBox::axis_aligned([3.0, 0.0, 0.0], [1.0; 3]);
        let d = min_obb_distance(&a, &b, 10_000, 11).unwrap();
        assert!((2.0..=2.1).contains(&d), "{d}");
        assert_eq!(d, min_obb_distance(&a, &b, 10_000, 11).unwrap());
        assert!(min_obb_distance(&a, &b, 99, 11).is_err());
    }

    #[test]
    fn overlapping_boxes() {
        let a = OrientedBox::axis_aligned([0.0; 3], [1.0; 3]);
        let d = min_obb_distance(&a, &a, 10_000, 5).unwrap();
        assert!(d <= 0.1, "{d}");
    }

    #[test]
    fn appearance_scan() {
        let vis = Visibility {
            frame_width: 640,
            frame_height: 480,
            timestamps: vec![0.0, 1.0, 2.0, 3.0],
            counts: [
                ("chair".to_string(), vec![0.0, 50.0, 400.0, 600.0]),
                ("lamp".to_string(), vec![0.0, 10.0, 20.0, 30.0]),
            ]
            .into_iter()
            .collect(),
        };
        let first = first_appearance(&vis, 307.0).unwrap();
        assert_eq!(first.get("chair"), Some(&2.0));
        assert!(!first.contains_key("lamp"));
        assert!(first_appearance(&vis, 0.0).is_err());
    }

    #[test]
    fn direction_angles() {
        assert_eq!(rel_direction_angle([0.0, 0.0], [0.0, 1.0], [1.0, 0.0]).unwrap(), -90.0);
        assert_eq!(rel_direction_angle([0.0, 0.0], [0.0, 1.0], [-1.0, 0.0]).unwrap(), 90.0);
        assert_eq!(rel_direction_angle([0.0, 0.0], [0.0, 1.0], [0.0, 5.0]).unwrap(), 0.0);
        assert_eq!(rel_direction_angle([0.0, 0.0], [1.0, 0.0], [-1.0, -0.0]).unwrap(), 180.0);
        assert!(rel_direction_angle([1.0, 1.0], [1.0, 1.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn direction_classes() {
        assert_eq!(discretize_direction(-90.0, Difficulty::Easy), Some("right"));
        assert_eq!(discretize_direction(30.0, Difficulty::Easy), Some("left"));
        assert_eq!(discretize_direction(-174.3, Difficulty::Medium), Some("back"));
        assert_eq!(discretize_direction(100.0, Difficulty::Medium), Some("left"));
        assert_eq!(discretize_direction(45.0, Difficulty::Hard), Some("front-left"));
        assert_eq!(discretize_direction(120.0, Difficulty::Hard), Some("back-left"));
        assert_eq!(discretize_direction(-120.0, Difficulty::Hard), Some("back-right"));
        assert_eq!(discretize_direction(-45.0, Difficulty::Hard), Some("front-right"));
        for d in [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard] {
            assert_eq!(discretize_direction(0.0, d), None);
        }
        assert_eq!(discretize_direction(90.0, Difficulty::Hard), None);
        assert_eq!(discretize_direction(135.0 + 1e-7, Difficulty::Medium), None);
        assert_eq!(discretize_direction(180.0, Difficulty::Easy), None);
        assert_eq!(discretize_direction(180.0, Difficulty::Medium), Some("back"));
        assert_eq!(discretize_direction(-174.3 + 360.0, Difficulty::Medium), Some("back"));
    }
}
