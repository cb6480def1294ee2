//! C ABI over the fibertrace engine.
//!
//! Objects are opaque handles created by `ft_*` constructors and released by
//! the matching `ft_*_free`. Every fallible call returns an [`FtStatus`]; on
//! failure `ft_last_error` returns a message describing it, valid until the
//! next failing call on the same thread. Strings are NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fibertrace::config::Config;
use fibertrace::connect::{connect_all, truth_graph, MergeProposal};
use fibertrace::flight::{adaptive_step, CentroidSteering, FlightParams, OracleSteering, Steering};
use fibertrace::graph::SegmentGraph;
use fibertrace::io::{export_swc, write_proposals, SwcRoot};
use fibertrace::metrics::skeleton_prf;
use fibertrace::segment::segment_volume;
use fibertrace::volume::{
    generate_phantom, min_max_normalize, read_volume, write_volume, GroundTruth, PhantomSpec, Volume,
    VolumeKind,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    Failed = 6,
    Panic = 7,
}

pub struct FtVolume(Volume);
pub struct FtTruth(GroundTruth);
pub struct FtGraph(SegmentGraph);
pub struct FtProposals(Vec<MergeProposal>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(FtStatus, String);

impl Fail {
    fn io(e: impl std::fmt::Display) -> Self {
        Fail(FtStatus::Io, e.to_string())
    }
    /// `NotFound` when `path` does not exist, `Io` otherwise.
    fn io_at(path: &Path, e: impl std::fmt::Display) -> Self {
        let code = if path.exists() { FtStatus::Io } else { FtStatus::NotFound };
        Fail(code, format!("{}: {e}", path.display()))
    }
    fn parse(e: impl std::fmt::Display) -> Self {
        Fail(FtStatus::Parse, e.to_string())
    }
    fn failed(e: impl std::fmt::Display) -> Self {
        Fail(FtStatus::Failed, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            FtStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(FtStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FtStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(FtStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(FtStatus::NullPointer, format!("{name} is null")))
}

unsafe fn config_arg(p: *const c_char) -> Result<Config, Fail> {
    if p.is_null() {
        return Ok(Config::default());
    }
    serde_json::from_str(str_arg(p, "config_json")?).map_err(Fail::parse)
}

fn normalized(v: &Volume) -> Volume {
    match v.kind() {
        VolumeKind::NormalizedFloat => v.clone(),
        VolumeKind::Raw16 => min_max_normalize(v),
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the last failing call on this thread; empty if none.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Step length `max(f·d / (1 + (p/2)·kappa), s_min)`.
#[no_mangle]
pub extern "C" fn ft_adaptive_step(kappa: f64, f: f64, d: f64, p: f64, s_min: f64) -> f64 {
    let params = FlightParams {
        f,
        d,
        p,
        s_min,
        ..FlightParams::default()
    };
    adaptive_step(kappa, &params)
}

/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_volume_read(path: *const c_char, out: *mut *mut FtVolume) -> FtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = Path::new(str_arg(path, "path")?);
        let v = read_volume(path).map_err(|e| Fail::io_at(path, e))?;
        *out = boxed(FtVolume(v));
        Ok(())
    })
}

/// # Safety
/// `volume` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ft_volume_write(volume: *const FtVolume, path: *const c_char) -> FtStatus {
    guard(|| {
        let v = ref_arg(volume, "volume")?;
        write_volume(Path::new(str_arg(path, "path")?), &v.0).map_err(Fail::io)
    })
}

/// Writes the voxel dimensions `(nx, ny, nz)` into `dims`.
///
/// # Safety
/// `dims` must point to 3 writable `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ft_volume_dims(volume: *const FtVolume, dims: *mut usize) -> FtStatus {
    guard(|| {
        let v = ref_arg(volume, "volume")?;
        if dims.is_null() {
            return Err(Fail(FtStatus::NullPointer, "dims is null".into()));
        }
        std::slice::from_raw_parts_mut(dims, 3).copy_from_slice(&v.0.dims());
        Ok(())
    })
}

/// # Safety
/// `volume` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_volume_free(volume: *mut FtVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Renders a phantom from a JSON spec.
///
/// # Safety
/// `spec_json` must be a valid C string; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ft_phantom_generate(
    spec_json: *const c_char,
    out_volume: *mut *mut FtVolume,
    out_truth: *mut *mut FtTruth,
) -> FtStatus {
    guard(|| {
        let ov = out_arg(out_volume, "out_volume")?;
        let ot = out_arg(out_truth, "out_truth")?;
        let spec: PhantomSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(Fail::parse)?;
        let (v, t) = generate_phantom(&spec).map_err(|e| Fail(FtStatus::InvalidArgument, e.to_string()))?;
        *ov = boxed(FtVolume(v));
        *ot = boxed(FtTruth(t));
        Ok(())
    })
}

/// # Safety
/// `truth` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_truth_free(truth: *mut FtTruth) {
    if !truth.is_null() {
        drop(Box::from_raw(truth));
    }
}

/// Samples the ground truth into a graph with nodes about `spacing` µm apart.
///
/// # Safety
/// Handles must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_truth_graph(
    truth: *const FtTruth,
    pitch: f64,
    spacing: f64,
    out: *mut *mut FtGraph,
) -> FtStatus {
    guard(|| {
        let t = ref_arg(truth, "truth")?;
        let out = out_arg(out, "out")?;
        if !(pitch > 0.0 && spacing > 0.0) {
            return Err(Fail(FtStatus::InvalidArgument, "pitch and spacing must be positive".into()));
        }
        *out = boxed(FtGraph(truth_graph(&t.0, pitch, spacing, 1e-6)));
        Ok(())
    })
}

/// Segmentation stage: scoring, thresholding, thinning, extraction.
/// `config_json` may be null for defaults. Raw volumes are min-max
/// normalized first.
///
/// # Safety
/// Handles must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_segment(
    volume: *const FtVolume,
    config_json: *const c_char,
    out: *mut *mut FtGraph,
) -> FtStatus {
    guard(|| {
        let v = ref_arg(volume, "volume")?;
        let out = out_arg(out, "out")?;
        let cfg = config_arg(config_json)?;
        let g = segment_volume(&normalized(&v.0), &cfg.segmenter, &cfg.layout, cfg.threshold, cfg.sampling_interval)
            .map_err(Fail::failed)?;
        *out = boxed(FtGraph(g));
        Ok(())
    })
}

/// Connection stage. With a ground truth the agents use oracle steering,
/// otherwise centroid steering.
///
/// # Safety
/// Handles must come from this library (`truth` may be null); outputs must
/// be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ft_connect(
    graph: *const FtGraph,
    volume: *const FtVolume,
    truth: *const FtTruth,
    config_json: *const c_char,
    out_graph: *mut *mut FtGraph,
    out_proposals: *mut *mut FtProposals,
) -> FtStatus {
    guard(|| {
        let g = ref_arg(graph, "graph")?;
        let v = ref_arg(volume, "volume")?;
        let og = out_arg(out_graph, "out_graph")?;
        let op = out_arg(out_proposals, "out_proposals")?;
        let cfg = config_arg(config_json)?;
        let steering: Box<dyn Steering> = match truth.as_ref() {
            Some(t) => Box::new(OracleSteering {
                truth: t.0.clone(),
                params: cfg.flight,
            }),
            None => Box::new(CentroidSteering::centroid(cfg.flight)),
        };
        let (g2, props) =
            connect_all(&g.0, &normalized(&v.0), steering.as_ref(), &cfg.flight).map_err(Fail::failed)?;
        *og = boxed(FtGraph(g2));
        *op = boxed(FtProposals(props));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a valid C string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ft_graph_load(dir: *const c_char, out: *mut *mut FtGraph) -> FtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let dir = Path::new(str_arg(dir, "dir")?);
        let g = SegmentGraph::load(dir).map_err(|e| Fail::io_at(dir, e))?;
        *out = boxed(FtGraph(g));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library; `dir` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ft_graph_save(graph: *const FtGraph, dir: *const c_char) -> FtStatus {
    guard(|| {
        let g = ref_arg(graph, "graph")?;
        g.0.save(Path::new(str_arg(dir, "dir")?)).map_err(Fail::io)
    })
}

/// Node, edge and connected-component counts. Any output may be null.
///
/// # Safety
/// `graph` must come from this library; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_graph_counts(
    graph: *const FtGraph,
    nodes: *mut usize,
    edges: *mut usize,
    components: *mut usize,
) -> FtStatus {
    guard(|| {
        let g = &ref_arg(graph, "graph")?.0;
        if let Some(n) = nodes.as_mut() {
            *n = g.node_count();
        }
        if let Some(e) = edges.as_mut() {
            *e = g.edge_count();
        }
        if let Some(c) = components.as_mut() {
            *c = g.connected_components().len();
        }
        Ok(())
    })
}

/// Writes every component as SWC.
///
/// # Safety
/// `graph` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ft_graph_export_swc(graph: *const FtGraph, path: *const c_char) -> FtStatus {
    guard(|| {
        let g = ref_arg(graph, "graph")?;
        let text = export_swc(&g.0, SwcRoot::All).map_err(Fail::failed)?;
        fibertrace::io::replace_file(Path::new(str_arg(path, "path")?), text.as_bytes()).map_err(Fail::io)
    })
}

/// # Safety
/// `graph` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_graph_free(graph: *mut FtGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Skeleton recall, precision and F1 at tolerance `tol` µm.
///
/// # Safety
/// Handles must come from this library; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ft_skeleton_prf(
    pred: *const FtGraph,
    truth: *const FtGraph,
    tol: f64,
    recall: *mut f64,
    precision: *mut f64,
    f1: *mut f64,
) -> FtStatus {
    guard(|| {
        let p = ref_arg(pred, "pred")?;
        let t = ref_arg(truth, "truth")?;
        let (r, pr, f) = (out_arg(recall, "recall")?, out_arg(precision, "precision")?, out_arg(f1, "f1")?);
        let s = skeleton_prf(&p.0, &t.0, tol).map_err(|e| Fail(FtStatus::InvalidArgument, e.to_string()))?;
        (*r, *pr, *f) = (s.recall, s.precision, s.f1);
        Ok(())
    })
}

/// # Safety
/// `proposals` must come from this library; `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ft_proposals_count(proposals: *const FtProposals, count: *mut usize) -> FtStatus {
    guard(|| {
        *out_arg(count, "count")? = ref_arg(proposals, "proposals")?.0.len();
        Ok(())
    })
}

/// Writes the proposals as TSV.
///
/// # Safety
/// `proposals` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn ft_proposals_write(proposals: *const FtProposals, path: *const c_char) -> FtStatus {
    guard(|| {
        let p = ref_arg(proposals, "proposals")?;
        write_proposals(Path::new(str_arg(path, "path")?), &p.0).map_err(Fail::io)
    })
}

/// # Safety
/// `proposals` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ft_proposals_free(proposals: *mut FtProposals) {
    if !proposals.is_null() {
        drop(Box::from_raw(proposals));
    }
}

