//! File formats: PFM rasters, the frame manifest, JSONL records and ASCII
//! PLY point exports.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraFrame, CameraIntrinsics, CameraPose, FloatMap, PointSet};
use crate::SCHEMA_VERSION;

/// Reads a grayscale PFM ("Pf"). Rows are returned top to bottom.
pub fn read_pfm(path: &Path) -> Result<FloatMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|m| Error::format(path, m))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<FloatMap, String> {
    // Header: three whitespace-separated lines, then exactly one whitespace
    // byte before the raster.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII PFM header")?);
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err("color PFM is not supported; expected grayscale 'Pf'".into()),
        other => return Err(format!("bad PFM magic '{other}'")),
    }
    let width: usize = tokens[1].parse().map_err(|_| "bad PFM width")?;
    let height: usize = tokens[2].parse().map_err(|_| "bad PFM height")?;
    let scale: f32 = tokens[3].parse().map_err(|_| "bad PFM scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("PFM scale must be nonzero".into());
    }
    let little = scale < 0.0;
    let n = width.checked_mul(height).ok_or("PFM dimensions overflow")?;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != n * 4 {
        return Err(format!("expected {} raster bytes, found {}", n * 4, body.len()));
    }
    let mut data = vec![0f32; n];
    for (row_from_bottom, chunk) in body.chunks_exact(width * 4).enumerate() {
        let row = height - 1 - row_from_bottom;
        for (u, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            data[row * width + u] = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    FloatMap::new(width, height, data).map_err(|e| e.to_string())
}

/// Writes a little-endian grayscale PFM (scale -1.0).
pub fn write_pfm(path: &Path, map: &FloatMap) -> Result<()> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width(), map.height()).into_bytes();
    out.reserve(map.data().len() * 4);
    for row in (0..map.height()).rev() {
        for u in 0..map.width() {
            out.extend_from_slice(&map.get(u, row).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_id: u32,
    pub depth_path: PathBuf,
    pub confidence_path: PathBuf,
    /// `[fx, fy, cx, cy]`
    pub intrinsics: [f64; 4],
    /// Camera-from-world, row-major.
    pub extrinsics: [f64; 16],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub schema_version: u32,
    pub frames: Vec<FrameEntry>,
}

impl FrameManifest {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.frames.is_empty() {
            return Err(Error::invalid("manifest lists no frames"));
        }
        if self.frames.windows(2).any(|w| w[0].frame_id >= w[1].frame_id) {
            return Err(Error::invalid("manifest frame_ids must be unique and ascending"));
        }
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<FrameManifest> {
    let manifest: FrameManifest = read_json(path)?;
    manifest.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(manifest)
}

/// Loads one manifest entry; relative paths resolve against `base_dir`.
pub fn load_frame(entry: &FrameEntry, base_dir: &Path) -> Result<CameraFrame> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let depth = read_pfm(&resolve(&entry.depth_path))?;
    let confidence = read_pfm(&resolve(&entry.confidence_path))?;
    CameraFrame::new(
        entry.frame_id,
        depth,
        confidence,
        CameraIntrinsics::from_array(entry.intrinsics)?,
        CameraPose::from_row_major(&entry.extrinsics)?,
    )
}

/// Writes each frame's depth and confidence as PFM next to a
/// `manifest.json` that references them by relative path.
pub fn write_frames(dir: &Path, frames: &[CameraFrame]) -> Result<FrameManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(frames.len());
    for f in frames {
        let depth_path = PathBuf::from(format!("frame_{:05}_depth.pfm", f.frame_id()));
        let confidence_path = PathBuf::from(format!("frame_{:05}_conf.pfm", f.frame_id()));
        write_pfm(&dir.join(&depth_path), f.depth())?;
        write_pfm(&dir.join(&confidence_path), f.confidence())?;
        entries.push(FrameEntry {
            frame_id: f.frame_id(),
            depth_path,
            confidence_path,
            intrinsics: f.intrinsics().to_array(),
            extrinsics: f.pose().to_row_major(),
        });
    }
    let manifest = FrameManifest {
        schema_version: SCHEMA_VERSION,
        frames: entries,
    };
    manifest.validate()?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One JSON value per nonblank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(v) = parse_jsonl_line(&line, n, path)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Like [`read_jsonl`] for text already in memory; `origin` labels errors.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(v) = parse_jsonl_line(line, n, origin)? {
            out.push(v);
        }
    }
    Ok(out)
}

fn parse_jsonl_line<T: DeserializeOwned>(line: &str, n: usize, origin: &Path) -> Result<Option<T>> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    serde_json::from_str(line)
        .map(Some)
        .map_err(|e| Error::format(origin, format!("line {}: {e}", n + 1)))
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut text = String::new();
    for v in values {
        text.push_str(&serde_json::to_string(v)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

const SELECTED_RGB: [u8; 3] = [230, 57, 70];
const UNSELECTED_RGB: [u8; 3] = [160, 160, 160];

/// ASCII PLY of the given points, red for frames in `selected`, grey
/// otherwise. Each vertex also carries its source frame id.
pub fn write_ply(path: &Path, point_sets: &[PointSet], selected: &[u32]) -> Result<()> {
    let chosen: HashSet<u32> = selected.iter().copied().collect();
    let count: usize = point_sets.iter().map(PointSet::len).sum();
    let mut out: Vec<u8> = Vec::new();
    let io_err = |e| Error::io(path, e);
    write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {count}\nproperty float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uint frame_id\nend_header\n"
    )
    .map_err(io_err)?;
    for set in point_sets {
        let [r, g, b] = if chosen.contains(&set.frame_id) {
            SELECTED_RGB
        } else {
            UNSELECTED_RGB
        };
        for p in &set.points {
            writeln!(out, "{} {} {} {r} {g} {b} {}", p.x as f32, p.y as f32, p.z as f32, set.frame_id)
                .map_err(io_err)?;
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
