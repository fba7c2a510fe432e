//! C ABI over the isoscope renderer.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`IsoStatus`]; on failure [`iso_last_error_message`] describes the error
//! for the calling thread. Handles are not thread-safe: a session must not be
//! used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use isoscope::enhance::DEFAULT_MAP_SIZE;
use isoscope::exploration::SeedTarget;
use isoscope::isoseg::segment;
use isoscope::raycast::{Camera, CropBounds};
use isoscope::render::{RenderOptions, SurfaceAppearance};
use isoscope::{
    build_peel_buffer, generate_synthetic, load_pair, pick_voxels, Error, Frame, PeelWindow, RateMode, Scene, ScalarVolume,
    SeedSets, SyntheticKind, SyntheticSpec, TransferFunctionSpec, Vec3,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Config = 5,
    Seed = 6,
    /// An operation needs state that is not there yet, e.g. picking before a render.
    State = 7,
    Panic = 8,
}

/// Surface coloring used by [`iso_session_render`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoMode {
    Mono = 0,
    Shallow = 1,
    Deep = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoSeedTarget {
    Foreground = 0,
    Background = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoCamera {
    pub eye: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub vfov_deg: f64,
    pub width: u32,
    pub height: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IsoSegmentResult {
    pub node_count: u64,
    pub foreground_cells: u64,
    pub background_cells: u64,
    pub cut_weight: f64,
    pub solve_ms: f64,
}

/// Opaque scalar volume.
pub struct IsoVolume {
    inner: Arc<ScalarVolume>,
}

/// Opaque rendering session bound to one volume.
pub struct IsoSession {
    scene: Scene,
    isovalue: f64,
    mode: IsoMode,
    tf: Option<TransferFunctionSpec>,
    peel: Vec<PeelWindow>,
    seeds: SeedSets,
    frame: Option<Frame>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: IsoStatus, msg: impl Into<String>) -> IsoStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> IsoStatus {
    match err {
        Error::Io { .. } => IsoStatus::Io,
        Error::Format(_) | Error::Json { .. } | Error::Image(_) => IsoStatus::Format,
        Error::Config(_) => IsoStatus::Config,
        Error::Seed(_) => IsoStatus::Seed,
    }
}

fn from_error(err: Error) -> IsoStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, converting panics into [`IsoStatus::Panic`] so they never cross
/// the ABI boundary.
fn guard(f: impl FnOnce() -> IsoStatus) -> IsoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == IsoStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(_) => fail(IsoStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, IsoStatus> {
    if p.is_null() {
        return Err(fail(IsoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IsoStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(IsoStatus::NullPointer, concat!($what, " is null")),
        }
    };
    (mut $p:expr, $what:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(IsoStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iso_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a volume from `stem.raw` plus `stem.json`.
///
/// # Safety
/// `stem` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iso_volume_load(stem: *const c_char, out: *mut *mut IsoVolume) -> IsoStatus {
    guard(|| {
        let out = deref!(mut out, "out");
        let stem = match str_arg(stem, "stem") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let vol = try_status!(load_pair(stem));
        *out = Box::into_raw(Box::new(IsoVolume { inner: Arc::new(vol) }));
        IsoStatus::Ok
    })
}

/// Generates a synthetic phantom. `kind` is one of `sphere`, `two-spheres`,
/// `dumbbell`, `ramp`, `nested-spheres`, `shell-with-inclusions`. `params`
/// may be null with `n_params == 0` for the defaults.
///
/// # Safety
/// `kind` must be NUL-terminated, `dims` must point to 3 values, `params` to
/// `n_params` values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn iso_volume_synthesize(
    kind: *const c_char,
    dims: *const usize,
    params: *const f64,
    n_params: usize,
    out: *mut *mut IsoVolume,
) -> IsoStatus {
    guard(|| {
        let out = deref!(mut out, "out");
        if dims.is_null() {
            return fail(IsoStatus::NullPointer, "dims is null");
        }
        if params.is_null() && n_params > 0 {
            return fail(IsoStatus::NullPointer, "params is null");
        }
        let kind: SyntheticKind = match str_arg(kind, "kind") {
            Ok(s) => try_status!(s.parse()),
            Err(s) => return s,
        };
        let dims = std::slice::from_raw_parts(dims, 3);
        let params = if n_params == 0 { Vec::new() } else { std::slice::from_raw_parts(params, n_params).to_vec() };
        let spec = SyntheticSpec::new(kind, [dims[0], dims[1], dims[2]]).with_params(params);
        let vol = try_status!(generate_synthetic(&spec));
        *out = Box::into_raw(Box::new(IsoVolume { inner: Arc::new(vol) }));
        IsoStatus::Ok
    })
}

/// # Safety
/// `vol` must be a live handle and `out` must point to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn iso_volume_dims(vol: *const IsoVolume, out: *mut usize) -> IsoStatus {
    guard(|| {
        let vol = deref!(vol, "volume");
        if out.is_null() {
            return fail(IsoStatus::NullPointer, "out is null");
        }
        let d = vol.inner.dims();
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&d);
        IsoStatus::Ok
    })
}

/// Trilinear sample at a world position.
///
/// # Safety
/// `vol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_volume_sample(vol: *const IsoVolume, x: f64, y: f64, z: f64, out: *mut f64) -> IsoStatus {
    guard(|| {
        let vol = deref!(vol, "volume");
        let out = deref!(mut out, "out");
        let p = Vec3::new(x, y, z);
        if !vol.inner.contains(p) {
            return fail(IsoStatus::InvalidArgument, "position outside the volume");
        }
        *out = vol.inner.sample_trilinear(p);
        IsoStatus::Ok
    })
}

/// # Safety
/// `vol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iso_volume_free(vol: *mut IsoVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// Creates a session rendering the `isovalue` surface of `vol` in mono mode
/// with a default orbit camera. The session keeps its own reference to the
/// volume, so `vol` may be freed afterwards.
///
/// # Safety
/// `vol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_session_new(vol: *const IsoVolume, isovalue: f64, out: *mut *mut IsoSession) -> IsoStatus {
    guard(|| {
        let vol = deref!(vol, "volume");
        let out = deref!(mut out, "out");
        if !(isovalue.is_finite() && (0.0..=1.0).contains(&isovalue)) {
            return fail(IsoStatus::InvalidArgument, format!("isovalue {isovalue} outside [0, 1]"));
        }
        let camera = Camera::orbit(&vol.inner, Vec3::new(0.35, 0.25, 1.0), 2.4, 35.0, [256, 256]);
        let mut scene = Scene::new(vol.inner.clone(), camera);
        scene.single_iso = Some(SurfaceAppearance::mono(isovalue, [0.9, 0.9, 0.9]));
        *out = Box::into_raw(Box::new(IsoSession {
            scene,
            isovalue,
            mode: IsoMode::Mono,
            tf: None,
            peel: Vec::new(),
            seeds: SeedSets::new(),
            frame: None,
        }));
        IsoStatus::Ok
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iso_session_free(s: *mut IsoSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

impl IsoSession {
    fn refresh_appearance(&mut self) -> Result<(), Error> {
        let appearance = match (self.mode, &self.tf) {
            (IsoMode::Mono, _) => SurfaceAppearance::mono(self.isovalue, [0.9, 0.9, 0.9]),
            (mode, tf) => {
                let mut spec = tf.clone().unwrap_or_else(|| {
                    let sp = self.scene.volume.spacing();
                    TransferFunctionSpec::example(self.isovalue, sp.x.min(sp.y).min(sp.z))
                });
                spec.isovalue = self.isovalue;
                spec.mode = if mode == IsoMode::Deep { RateMode::Deep } else { RateMode::Shallow };
                SurfaceAppearance::from_spec(&spec, &self.scene.volume, DEFAULT_MAP_SIZE)?
            }
        };
        self.scene.single_iso = Some(appearance);
        self.frame = None;
        Ok(())
    }
}

/// # Safety
/// `s` must be a live handle and `cam` readable.
#[no_mangle]
pub unsafe extern "C" fn iso_session_set_camera(s: *mut IsoSession, cam: *const IsoCamera) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        let c = deref!(cam, "camera");
        let camera = Camera {
            eye: Vec3::from(c.eye),
            look_at: Vec3::from(c.look_at),
            up: Vec3::from(c.up),
            vfov_deg: c.vfov_deg,
            image_dims: [c.width, c.height],
        };
        try_status!(camera.validate());
        s.scene.camera = camera;
        s.frame = None;
        IsoStatus::Ok
    })
}

/// Sets the isovalue and transfer function from a JSON document. The JSON
/// `isovalue` field, when present, replaces the session isovalue.
///
/// # Safety
/// `s` must be a live handle and `json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iso_session_set_transfer_function_json(s: *mut IsoSession, json: *const c_char) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(st) => return st,
        };
        let spec = try_status!(TransferFunctionSpec::from_json(text));
        let prev = (s.isovalue, s.tf.take());
        s.isovalue = spec.isovalue;
        s.tf = Some(spec);
        if let Err(e) = s.refresh_appearance() {
            (s.isovalue, s.tf) = prev;
            return from_error(e);
        }
        IsoStatus::Ok
    })
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iso_session_set_mode(s: *mut IsoSession, mode: IsoMode) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        let prev = s.mode;
        s.mode = mode;
        if let Err(e) = s.refresh_appearance() {
            s.mode = prev;
            return from_error(e);
        }
        IsoStatus::Ok
    })
}

/// Adds a peel window in pixel coordinates; overlapping windows stack.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iso_session_add_peel_window(s: *mut IsoSession, x: i64, y: i64, w: i64, h: i64) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        if w <= 0 || h <= 0 {
            return fail(IsoStatus::InvalidArgument, "peel window needs positive size");
        }
        s.peel.push(PeelWindow::new(x, y, w, h));
        s.frame = None;
        IsoStatus::Ok
    })
}

/// Removes all peel windows and seeds.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iso_session_clear(s: *mut IsoSession) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        s.peel.clear();
        s.seeds.clear();
        s.frame = None;
        IsoStatus::Ok
    })
}

/// Renders the current view into `rgba`, which must hold
/// `width * height * 4` bytes. Pixel (0, 0) is the top-left corner.
///
/// # Safety
/// `s` must be a live handle and `rgba` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn iso_session_render(s: *mut IsoSession, rgba: *mut u8, len: usize) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        if rgba.is_null() {
            return fail(IsoStatus::NullPointer, "rgba is null");
        }
        let [w, h] = s.scene.camera.image_dims;
        let need = w as usize * h as usize * 4;
        if len < need {
            return fail(IsoStatus::InvalidArgument, format!("buffer holds {len} bytes, need {need}"));
        }
        let opts = RenderOptions {
            peel: (!s.peel.is_empty()).then(|| build_peel_buffer(&s.peel, s.scene.camera.image_dims)),
            selection: (!s.seeds.is_empty()).then(|| s.seeds.clone()),
            ..RenderOptions::default()
        };
        let frame = s.scene.render(&opts);
        let bytes = frame.image.to_rgba8_bytes();
        std::slice::from_raw_parts_mut(rgba, need).copy_from_slice(&bytes);
        s.frame = Some(frame);
        IsoStatus::Ok
    })
}

/// Adds the cells under the given pixels of the last render to a seed set.
/// `pixels` holds `n` (x, y) pairs; `added` receives the number of new seeds.
///
/// # Safety
/// `s` must be a live handle, `pixels` readable for `2 * n` values and
/// `added` null or writable.
#[no_mangle]
pub unsafe extern "C" fn iso_session_pick(
    s: *mut IsoSession,
    pixels: *const u32,
    n: usize,
    target: IsoSeedTarget,
    added: *mut usize,
) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        if pixels.is_null() && n > 0 {
            return fail(IsoStatus::NullPointer, "pixels is null");
        }
        let Some(frame) = &s.frame else {
            return fail(IsoStatus::State, "pick needs a rendered frame");
        };
        let flat = if n == 0 { &[][..] } else { std::slice::from_raw_parts(pixels, 2 * n) };
        let px: Vec<[u32; 2]> = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let cells = pick_voxels(&frame.ids, &px);
        let target = match target {
            IsoSeedTarget::Foreground => SeedTarget::Fg,
            IsoSeedTarget::Background => SeedTarget::Bg,
        };
        let n_added = s.seeds.add(target, cells).len();
        if let Some(a) = added.as_mut() {
            *a = n_added;
        }
        s.frame = None;
        IsoStatus::Ok
    })
}

/// Splits the isosurface between the picked seed sets with a minimum cut.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn iso_session_segment(s: *mut IsoSession, out: *mut IsoSegmentResult) -> IsoStatus {
    guard(|| {
        let s = deref!(mut s, "session");
        let out = deref!(mut out, "out");
        if s.seeds.foreground().is_empty() || s.seeds.background().is_empty() {
            return fail(IsoStatus::State, "segmentation needs foreground and background seeds");
        }
        let crop = CropBounds::for_volume(&s.scene.volume);
        let (_, cut) = try_status!(segment(&s.scene.volume, s.isovalue, &s.seeds, &crop));
        *out = IsoSegmentResult {
            node_count: cut.node_count as u64,
            foreground_cells: cut.foreground_cells.len() as u64,
            background_cells: cut.background_cells.len() as u64,
            cut_weight: cut.cut_weight,
            solve_ms: cut.solve_ms(),
        };
        IsoStatus::Ok
    })
}
