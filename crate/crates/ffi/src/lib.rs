//! C ABI over the voxcover library.
//!
//! Every fallible function returns a [`VoxStatus`]; on failure a
//! description is available from [`vox_last_error`] on the same thread.
//! Strings handed out by the library must be released with
//! [`vox_string_free`], handles with their matching `*_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use voxcover::coldstart::{self, RewardRecord};
use voxcover::coverage::{self, CoverageInstance, SelectionResult};
use voxcover::geom::{self, CameraIntrinsics, CameraPose, FrameVoxelSet};
use voxcover::qagen::{self, QaGenConfig, SceneMetadata, TaskType};
use voxcover::rewards::{self, AnswerKind, Prediction, RewardConfig};
use voxcover::{io, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Mismatch = 5,
    EmptyInput = 6,
    Degenerate = 7,
    TooLarge = 8,
    Panic = 9,
}

impl From<&Error> for VoxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => VoxStatus::Io,
            Error::Format { .. } | Error::Json(_) => VoxStatus::Parse,
            Error::ManifestMismatch { .. } => VoxStatus::Mismatch,
            Error::EmptyScene | Error::EmptyInstance | Error::InvalidGroup(_) => VoxStatus::EmptyInput,
            Error::DegenerateScene | Error::DegenerateRoom(_) | Error::DegenerateGeometry(_) => {
                VoxStatus::Degenerate
            }
            Error::InstanceTooLarge { .. } => VoxStatus::TooLarge,
            _ => VoxStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> VoxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VoxStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("{name} is null"));
            VoxStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            VoxStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            VoxStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            VoxStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{name} is not valid UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn owned_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Arg("output contains an interior NUL".into()))
}

unsafe fn optional_json<T: serde::de::DeserializeOwned + Default>(p: *const c_char) -> FfiResult<T> {
    if p.is_null() {
        return Ok(T::default());
    }
    let s = text(p, "config_json")?;
    Ok(serde_json::from_str(s).map_err(Error::from)?)
}

/// Message for the last failed call on this thread, or null. Owned by the
/// library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vox_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vox_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Geometry ------------------------------------------------------------------

/// World point of pixel `(u, v)` at `depth`. `intrinsics` is
/// `[fx, fy, cx, cy]`, `extrinsics` a row-major camera-from-world 4x4.
#[no_mangle]
pub unsafe extern "C" fn vox_unproject_pixel(
    u: f64,
    v: f64,
    depth: f64,
    intrinsics: *const f64,
    extrinsics: *const f64,
    out_xyz: *mut f64,
) -> VoxStatus {
    guard(|| {
        let (k, pose) = camera(intrinsics, extrinsics)?;
        if out_xyz.is_null() {
            return Err(Failure::Null("out_xyz"));
        }
        let p = geom::unproject_pixel(u, v, depth, &k, &pose);
        ptr::copy_nonoverlapping(p.coords.as_ptr(), out_xyz, 3);
        Ok(())
    })
}

/// Pixel coordinates and depth `[u, v, depth]` of a world point. Fails with
/// `InvalidArgument` when the point is not in front of the camera.
#[no_mangle]
pub unsafe extern "C" fn vox_project_point(
    xyz: *const f64,
    intrinsics: *const f64,
    extrinsics: *const f64,
    out_uvd: *mut f64,
) -> VoxStatus {
    guard(|| {
        let (k, pose) = camera(intrinsics, extrinsics)?;
        let p = slice(xyz, 3, "xyz")?;
        let out = std::slice::from_raw_parts_mut(out_ref(out_uvd, "out_uvd")?, 3);
        let (u, v, d) = geom::project_point(&point(p), &k, &pose)
            .ok_or_else(|| Failure::Arg("point is behind the camera".into()))?;
        out.copy_from_slice(&[u, v, d]);
        Ok(())
    })
}

unsafe fn camera(intrinsics: *const f64, extrinsics: *const f64) -> FfiResult<(CameraIntrinsics, CameraPose)> {
    let k = slice(intrinsics, 4, "intrinsics")?;
    let e = slice(extrinsics, 16, "extrinsics")?;
    let k = CameraIntrinsics::from_array(k.try_into().expect("length 4"))?;
    let pose = CameraPose::from_row_major(e.try_into().expect("length 16"))?;
    Ok((k, pose))
}

fn point(p: &[f64]) -> geom::Point3<f64> {
    geom::Point3::new(p[0], p[1], p[2])
}

// Coverage ------------------------------------------------------------------

/// Frame voxel sets under construction.
pub struct VoxCoverage {
    sets: Vec<FrameVoxelSet>,
}

/// Result of a coverage selection.
pub struct VoxSelection {
    result: SelectionResult,
}

#[no_mangle]
pub extern "C" fn vox_coverage_new() -> *mut VoxCoverage {
    Box::into_raw(Box::new(VoxCoverage { sets: Vec::new() }))
}

#[no_mangle]
pub unsafe extern "C" fn vox_coverage_free(handle: *mut VoxCoverage) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Adds one frame given `n_voxels` voxel coordinates as packed `x, y, z`
/// triples.
#[no_mangle]
pub unsafe extern "C" fn vox_coverage_add_frame(
    handle: *mut VoxCoverage,
    frame_id: u32,
    voxels_xyz: *const u32,
    n_voxels: usize,
) -> VoxStatus {
    guard(|| {
        let cov = out_ref(handle, "handle")?;
        let flat = slice(voxels_xyz, n_voxels.checked_mul(3).ok_or(Failure::Arg("n_voxels overflows".into()))?, "voxels_xyz")?;
        if cov.sets.iter().any(|s| s.frame_id == frame_id) {
            return Err(Failure::Arg(format!("frame {frame_id} was already added")));
        }
        cov.sets
            .push(FrameVoxelSet::new(frame_id, flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]])));
        Ok(())
    })
}

unsafe fn select(
    handle: *const VoxCoverage,
    k: usize,
    out: *mut *mut VoxSelection,
    exhaustive: bool,
) -> VoxStatus {
    guard(|| {
        let cov = handle.as_ref().ok_or(Failure::Null("handle"))?;
        let out = out_ref(out, "out")?;
        let instance = CoverageInstance::new(cov.sets.clone(), k)?;
        let result = if exhaustive {
            coverage::exhaustive_select(&instance)?
        } else {
            coverage::greedy_select(&instance)
        };
        *out = Box::into_raw(Box::new(VoxSelection { result }));
        Ok(())
    })
}

/// Greedy maximum-coverage selection of `k` frames.
#[no_mangle]
pub unsafe extern "C" fn vox_coverage_greedy(
    handle: *const VoxCoverage,
    k: usize,
    out: *mut *mut VoxSelection,
) -> VoxStatus {
    select(handle, k, out, false)
}

/// Optimal selection by enumeration; fails with `TooLarge` for big instances.
#[no_mangle]
pub unsafe extern "C" fn vox_coverage_exhaustive(
    handle: *const VoxCoverage,
    k: usize,
    out: *mut *mut VoxSelection,
) -> VoxStatus {
    select(handle, k, out, true)
}

#[no_mangle]
pub unsafe extern "C" fn vox_selection_free(sel: *mut VoxSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Number of selected frames (0 for null).
#[no_mangle]
pub unsafe extern "C" fn vox_selection_len(sel: *const VoxSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.result.selected_ids.len())
}

/// Union size of the selected frames (0 for null).
#[no_mangle]
pub unsafe extern "C" fn vox_selection_covered(sel: *const VoxSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.result.covered_count)
}

#[no_mangle]
pub unsafe extern "C" fn vox_selection_early_stop(sel: *const VoxSelection) -> bool {
    sel.as_ref().is_some_and(|s| s.result.early_stop)
}

/// Copies up to `capacity` selected ids (in selection order) and their
/// per-step gains into the given buffers. Either buffer may be null.
/// Returns the number of entries available.
#[no_mangle]
pub unsafe extern "C" fn vox_selection_copy(
    sel: *const VoxSelection,
    ids: *mut u32,
    gains: *mut usize,
    capacity: usize,
) -> usize {
    let Some(s) = sel.as_ref() else { return 0 };
    let n = s.result.selected_ids.len();
    let m = n.min(capacity);
    if !ids.is_null() {
        ptr::copy_nonoverlapping(s.result.selected_ids.as_ptr(), ids, m);
    }
    if !gains.is_null() {
        ptr::copy_nonoverlapping(s.result.per_step_gain.as_ptr(), gains, m);
    }
    n
}

// Rewards -------------------------------------------------------------------

/// Mean relative accuracy with the default thresholds.
#[no_mangle]
pub unsafe extern "C" fn vox_mra_reward(pred: f64, gt: f64, out: *mut f64) -> VoxStatus {
    guard(|| {
        *out_ref(out, "out")? = rewards::mra_reward(pred, gt, &RewardConfig::default())?;
        Ok(())
    })
}

/// Normalized edit-distance similarity with unit substitution cost.
#[no_mangle]
pub unsafe extern "C" fn vox_verbal_reward(pred: *const c_char, gt: *const c_char, out: *mut f64) -> VoxStatus {
    guard(|| {
        *out_ref(out, "out")? = rewards::verbal_reward(text(pred, "pred")?, text(gt, "gt")?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vox_mc_reward(pred: *const c_char, gt: *const c_char, out: *mut f64) -> VoxStatus {
    guard(|| {
        *out_ref(out, "out")? = rewards::mc_reward(text(pred, "pred")?, text(gt, "gt")?);
        Ok(())
    })
}

/// 1 when `raw` is a well-formed think/answer output, else 0.
#[no_mangle]
pub unsafe extern "C" fn vox_format_reward(raw: *const c_char, out: *mut f64) -> VoxStatus {
    guard(|| {
        *out_ref(out, "out")? = rewards::format_reward(text(raw, "raw")?, &RewardConfig::default());
        Ok(())
    })
}

/// Weighted format + task reward. `kind`: 0 multiple choice, 1 numerical,
/// 2 verbal. `config_json` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn vox_composite_reward(
    raw: *const c_char,
    gt: *const c_char,
    kind: u32,
    config_json: *const c_char,
    out: *mut f64,
) -> VoxStatus {
    guard(|| {
        let kind = match kind {
            0 => AnswerKind::MultipleChoice,
            1 => AnswerKind::Numerical,
            2 => AnswerKind::Verbal,
            other => return Err(Failure::Arg(format!("unknown answer kind {other}"))),
        };
        let config: RewardConfig = optional_json(config_json)?;
        config.validate()?;
        let raw = text(raw, "raw")?;
        let pred = rewards::extract_answer(raw, &config.format).unwrap_or("");
        *out_ref(out, "out")? = rewards::composite_reward(raw, pred, text(gt, "gt")?, kind, &config).total;
        Ok(())
    })
}

/// Group-normalized advantages of `n` rewards written to `out` (length `n`).
#[no_mangle]
pub unsafe extern "C" fn vox_group_advantages(rewards_in: *const f64, n: usize, out: *mut f64) -> VoxStatus {
    guard(|| {
        let r = slice(rewards_in, n, "rewards")?;
        let adv = rewards::group_advantages(r)?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(adv.as_ptr(), out, n);
        Ok(())
    })
}

// Pipelines over JSON -------------------------------------------------------

/// Scores prediction JSONL against ground-truth JSONL. Writes the report
/// JSON to `*out` (free with `vox_string_free`).
#[no_mangle]
pub unsafe extern "C" fn vox_score_json(
    pred_jsonl: *const c_char,
    gt_jsonl: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> VoxStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let preds: Vec<Prediction> = io::parse_jsonl(text(pred_jsonl, "pred_jsonl")?, Path::new("<predictions>"))?;
        let gt = io::parse_jsonl(text(gt_jsonl, "gt_jsonl")?, Path::new("<ground truth>"))?;
        let config: RewardConfig = optional_json(config_json)?;
        let report = rewards::score_benchmark(&preds, &gt, &config)?;
        *out = owned_string(serde_json::to_string(&report).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Generates QA pairs for one scene. `tasks` is a comma-separated list or
/// null for all tasks. Writes JSONL to `*out`.
#[no_mangle]
pub unsafe extern "C" fn vox_qagen_json(
    scene_json: *const c_char,
    tasks: *const c_char,
    seed: u64,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> VoxStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let meta: SceneMetadata = serde_json::from_str(text(scene_json, "scene_json")?).map_err(Error::from)?;
        let tasks = if tasks.is_null() {
            TaskType::GENERATED.into_iter().collect()
        } else {
            qagen::parse_task_list(text(tasks, "tasks")?)?
        };
        let config: QaGenConfig = optional_json(config_json)?;
        let pairs = qagen::generate_all(&meta, &tasks, seed, &config)?;
        let mut s = String::new();
        for p in &pairs {
            s.push_str(&serde_json::to_string(p).map_err(Error::from)?);
            s.push('\n');
        }
        *out = owned_string(s)?;
        Ok(())
    })
}

/// Cold-start filtering of reward-record JSONL at quantile `q`. Writes the
/// result JSON to `*out`.
#[no_mangle]
pub unsafe extern "C" fn vox_coldstart_json(records_jsonl: *const c_char, q: f64, out: *mut *mut c_char) -> VoxStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let records: Vec<RewardRecord> = io::parse_jsonl(text(records_jsonl, "records_jsonl")?, Path::new("<records>"))?;
        let result = coldstart::filter_records(&records, q)?;
        *out = owned_string(serde_json::to_string(&result).map_err(Error::from)?)?;
        Ok(())
    })
}
