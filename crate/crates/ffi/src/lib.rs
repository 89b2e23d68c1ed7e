//! C ABI over `rotdet`.
//!
//! Every fallible function returns an [`RdStatus`]; on failure the message is
//! available from [`rd_last_error`] on the same thread. Boxes travel as packed
//! `double` rows: rotated boxes `(cx, cy, w, h, theta)`, horizontal boxes
//! `(cx, cy, w, h)`. Feature maps are opaque [`RdFeatureMap`] handles that the
//! caller releases with [`rd_fmap_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rotdet::geom::{normalize_angle, rotated_iou, HorizontalBox, RotatedBox};
use rotdet::kernels::{center_pool, rroi_align, FeatureMap, RRoiAlignConfig};
use rotdet::postprocess::{rotated_nms_with, Detection, NmsConfig};
use rotdet::targets::{
    decode_hdelta, decode_local, decode_transform, encode_hdelta, encode_local, encode_transform, HorizontalDelta,
    LocalTarget, TransformParams,
};
use rotdet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidBox = 2,
    InvalidQuad = 3,
    Config = 4,
    Shape = 5,
    Parse = 6,
    Format = 7,
    Truncated = 8,
    Reference = 9,
    Io = 10,
    InvalidArgument = 11,
    Panic = 12,
}

/// Opaque feature map (height x width x channels, row-major, channels last).
pub struct RdFeatureMap(FeatureMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RdStatus {
    match e {
        Error::InvalidBox(_) => RdStatus::InvalidBox,
        Error::InvalidQuad(_) => RdStatus::InvalidQuad,
        Error::Config(_) => RdStatus::Config,
        Error::Shape(_) => RdStatus::Shape,
        Error::Parse { .. } => RdStatus::Parse,
        Error::Format(_) => RdStatus::Format,
        Error::Truncated(_) => RdStatus::Truncated,
        Error::Reference(_) => RdStatus::Reference,
        Error::Io(_) => RdStatus::Io,
    }
}

struct Fail(RdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside rotdet".into());
            RdStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn rbox(row: &[f64]) -> Result<RotatedBox, Fail> {
    Ok(RotatedBox::new(row[0], row[1], row[2], row[3], row[4])?)
}

fn hbox(row: &[f64]) -> Result<HorizontalBox, Fail> {
    Ok(HorizontalBox::new(row[0], row[1], row[2], row[3])?)
}

fn rboxes(flat: &[f64]) -> Result<Vec<RotatedBox>, Fail> {
    flat.chunks_exact(5).map(rbox).collect()
}

unsafe fn store_handle(out: *mut *mut RdFeatureMap, f: FeatureMap) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(RdFeatureMap(f)));
    Ok(())
}

unsafe fn handle<'a>(f: *const RdFeatureMap) -> Result<&'a FeatureMap, Fail> {
    f.as_ref().map(|h| &h.0).ok_or_else(|| null("feature map"))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Fail(RdStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next rotdet call on the same thread.
#[no_mangle]
pub extern "C" fn rd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// IoU of two rotated boxes.
///
/// # Safety
/// `a` and `b` point to 5 doubles; `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn rd_rotated_iou(a: *const f64, b: *const f64, out: *mut f64) -> RdStatus {
    guard(|| {
        let a = rbox(input(a, 5, "a")?)?;
        let b = rbox(input(b, 5, "b")?)?;
        output(out, 1, "out")?[0] = rotated_iou(&a, &b);
        Ok(())
    })
}

/// Row-major `n x m` IoU matrix between two box arrays.
///
/// # Safety
/// `a` holds `5n` doubles, `b` holds `5m`, `out` has room for `n * m`.
#[no_mangle]
pub unsafe extern "C" fn rd_iou_matrix(a: *const f64, n: usize, b: *const f64, m: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let a = rboxes(input(a, 5 * n, "a")?)?;
        let b = rboxes(input(b, 5 * m, "b")?)?;
        let out = output(out, n * m, "out")?;
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i * m + j] = rotated_iou(x, y);
            }
        }
        Ok(())
    })
}

/// Canonical form of each box, with `|theta| <= pi/4`. `out` may equal `boxes`.
///
/// # Safety
/// `boxes` and `out` each hold `5n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rd_normalize_angle(boxes: *const f64, n: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let b = rboxes(input(boxes, 5 * n, "boxes")?)?;
        let out = output(out, 5 * n, "out")?;
        for (row, b) in out.chunks_exact_mut(5).zip(&b) {
            row.copy_from_slice(&normalize_angle(b).to_array());
        }
        Ok(())
    })
}

/// Greedy rotated NMS. Kept indices go to `keep` in descending score order
/// and their count to `keep_len`. `keep` needs room for `n` entries.
///
/// # Safety
/// `boxes` holds `5n` doubles, `scores` and `class_ids` hold `n` entries,
/// `keep` has room for `n`, `keep_len` points to one writable size.
#[no_mangle]
pub unsafe extern "C" fn rd_nms(
    boxes: *const f64,
    scores: *const f64,
    class_ids: *const usize,
    n: usize,
    iou_thresh: f64,
    class_agnostic: bool,
    keep: *mut usize,
    keep_len: *mut usize,
) -> RdStatus {
    guard(|| {
        let b = rboxes(input(boxes, 5 * n, "boxes")?)?;
        let s = input(scores, n, "scores")?;
        let c: &[usize] = if n == 0 {
            &[]
        } else if class_ids.is_null() {
            return Err(null("class_ids"));
        } else {
            slice::from_raw_parts(class_ids, n)
        };
        if keep_len.is_null() {
            return Err(null("keep_len"));
        }
        let dets = (0..n)
            .map(|i| Detection::new(b[i], s[i], c[i]))
            .collect::<rotdet::Result<Vec<_>>>()?;
        let kept = rotated_nms_with(
            &dets,
            &NmsConfig {
                iou_thresh,
                class_agnostic,
            },
        );
        output(keep, n, "keep")?[..kept.len()].copy_from_slice(&kept);
        *keep_len = kept.len();
        Ok(())
    })
}

/// # Safety
/// `anchors` and `targets` hold `4n` doubles; `out` has room for `4n`.
#[no_mangle]
pub unsafe extern "C" fn rd_encode_hdelta(
    anchors: *const f64,
    targets: *const f64,
    n: usize,
    out: *mut f64,
) -> RdStatus {
    guard(|| {
        let a = input(anchors, 4 * n, "anchors")?;
        let t = input(targets, 4 * n, "targets")?;
        let out = output(out, 4 * n, "out")?;
        for ((a, t), o) in a.chunks_exact(4).zip(t.chunks_exact(4)).zip(out.chunks_exact_mut(4)) {
            o.copy_from_slice(&encode_hdelta(&hbox(a)?, &hbox(t)?).to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `anchors` and `deltas` hold `4n` doubles; `out` has room for `4n`.
#[no_mangle]
pub unsafe extern "C" fn rd_decode_hdelta(
    anchors: *const f64,
    deltas: *const f64,
    n: usize,
    out: *mut f64,
) -> RdStatus {
    guard(|| {
        let a = input(anchors, 4 * n, "anchors")?;
        let d = input(deltas, 4 * n, "deltas")?;
        let out = output(out, 4 * n, "out")?;
        for ((a, d), o) in a.chunks_exact(4).zip(d.chunks_exact(4)).zip(out.chunks_exact_mut(4)) {
            let h = decode_hdelta(&hbox(a)?, &HorizontalDelta::from_array([d[0], d[1], d[2], d[3]]))?;
            o.copy_from_slice(&[h.cx, h.cy, h.w, h.h]);
        }
        Ok(())
    })
}

/// # Safety
/// `hprops` holds `4n` doubles, `gts` holds `5n`; `out` has room for `4n`.
#[no_mangle]
pub unsafe extern "C" fn rd_encode_transform(hprops: *const f64, gts: *const f64, n: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let h = input(hprops, 4 * n, "hprops")?;
        let g = input(gts, 5 * n, "gts")?;
        let out = output(out, 4 * n, "out")?;
        for ((h, g), o) in h.chunks_exact(4).zip(g.chunks_exact(5)).zip(out.chunks_exact_mut(4)) {
            o.copy_from_slice(&encode_transform(&hbox(h)?, &rbox(g)?)?.to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `hprops` and `params` hold `4n` doubles; `out` has room for `5n`.
#[no_mangle]
pub unsafe extern "C" fn rd_decode_transform(
    hprops: *const f64,
    params: *const f64,
    n: usize,
    out: *mut f64,
) -> RdStatus {
    guard(|| {
        let h = input(hprops, 4 * n, "hprops")?;
        let v = input(params, 4 * n, "params")?;
        let out = output(out, 5 * n, "out")?;
        for ((h, v), o) in h.chunks_exact(4).zip(v.chunks_exact(4)).zip(out.chunks_exact_mut(5)) {
            let b = decode_transform(&hbox(h)?, &TransformParams::from_array([v[0], v[1], v[2], v[3]]))?;
            o.copy_from_slice(&b.to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `props`, `gts` and `out` each hold `5n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rd_encode_local(props: *const f64, gts: *const f64, n: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let p = rboxes(input(props, 5 * n, "props")?)?;
        let g = rboxes(input(gts, 5 * n, "gts")?)?;
        let out = output(out, 5 * n, "out")?;
        for ((p, g), o) in p.iter().zip(&g).zip(out.chunks_exact_mut(5)) {
            o.copy_from_slice(&encode_local(p, g).to_array());
        }
        Ok(())
    })
}

/// # Safety
/// `props`, `targets` and `out` each hold `5n` doubles.
#[no_mangle]
pub unsafe extern "C" fn rd_decode_local(props: *const f64, targets: *const f64, n: usize, out: *mut f64) -> RdStatus {
    guard(|| {
        let p = rboxes(input(props, 5 * n, "props")?)?;
        let t = input(targets, 5 * n, "targets")?;
        let out = output(out, 5 * n, "out")?;
        for ((p, t), o) in p.iter().zip(t.chunks_exact(5)).zip(out.chunks_exact_mut(5)) {
            let b = decode_local(p, &LocalTarget::from_array([t[0], t[1], t[2], t[3], t[4]]))?;
            o.copy_from_slice(&b.to_array());
        }
        Ok(())
    })
}

/// New feature map. With `data` NULL the map is zero-filled; otherwise
/// `data` holds `height * width * channels` doubles and is copied.
///
/// # Safety
/// `data` is NULL or valid for the stated length; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_new(
    height: usize,
    width: usize,
    channels: usize,
    data: *const f64,
    out: *mut *mut RdFeatureMap,
) -> RdStatus {
    guard(|| {
        let len = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Fail(RdStatus::Shape, "feature map size overflows".into()))?;
        let f = if data.is_null() {
            FeatureMap::zeros(height, width, channels)
        } else {
            FeatureMap::new(height, width, channels, slice::from_raw_parts(data, len).to_vec())?
        };
        store_handle(out, f)
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `f` is NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_free(f: *mut RdFeatureMap) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` is a live handle; the three out-pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_shape(
    f: *const RdFeatureMap,
    height: *mut usize,
    width: *mut usize,
    channels: *mut usize,
) -> RdStatus {
    guard(|| {
        let f = handle(f)?;
        if height.is_null() || width.is_null() || channels.is_null() {
            return Err(null("shape output"));
        }
        *height = f.height();
        *width = f.width();
        *channels = f.channels();
        Ok(())
    })
}

/// Borrowed pointer to the map's `height * width * channels` values, valid
/// until the handle is freed. NULL for a NULL handle.
///
/// # Safety
/// `f` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_data(f: *const RdFeatureMap) -> *const f64 {
    f.as_ref().map_or(ptr::null(), |h| h.0.data().as_ptr())
}

/// Loads an FMAP file.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_read(path: *const c_char, out: *mut *mut RdFeatureMap) -> RdStatus {
    guard(|| {
        let p = path_arg(path)?;
        let f = rotdet::dataio::read_fmap_path(&p).map_err(|e| Fail(status_of(&e), format!("{p}: {e}")))?;
        store_handle(out, f)
    })
}

/// Saves a map as an FMAP file (values narrowed to 32-bit floats).
///
/// # Safety
/// `f` is a live handle; `path` is a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn rd_fmap_write(f: *const RdFeatureMap, path: *const c_char) -> RdStatus {
    guard(|| {
        let f = handle(f)?;
        let p = path_arg(path)?;
        rotdet::dataio::write_fmap_path(&p, f).map_err(|e| Fail(status_of(&e), format!("{p}: {e}")))
    })
}

/// Rotated RoI Align of one box (feature-map coordinates) into a new
/// `k x k x C` handle.
///
/// # Safety
/// `f` is a live handle, `rbox_ptr` points to 5 doubles, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rd_rroi_align(
    f: *const RdFeatureMap,
    rbox_ptr: *const f64,
    k: usize,
    ks: usize,
    out: *mut *mut RdFeatureMap,
) -> RdStatus {
    guard(|| {
        let f = handle(f)?;
        let b = rbox(input(rbox_ptr, 5, "rbox")?)?;
        store_handle(out, rroi_align(f, &b, &RRoiAlignConfig { k, ks })?)
    })
}

/// Align over `n` boxes into a caller buffer of `n * k * k * C` doubles.
///
/// # Safety
/// `f` is a live handle, `boxes` holds `5n` doubles and `out` has room for
/// `n * k * k * channels` doubles.
#[no_mangle]
pub unsafe extern "C" fn rd_rroi_align_batch(
    f: *const RdFeatureMap,
    boxes: *const f64,
    n: usize,
    k: usize,
    ks: usize,
    out: *mut f64,
) -> RdStatus {
    guard(|| {
        let f = handle(f)?;
        let b = rboxes(input(boxes, 5 * n, "boxes")?)?;
        let cfg = RRoiAlignConfig { k, ks };
        cfg.validate()?;
        let per = k * k * f.channels();
        let out = output(out, n * per, "out")?;
        for (b, o) in b.iter().zip(out.chunks_exact_mut(per.max(1))) {
            o.copy_from_slice(rroi_align(f, b, &cfg)?.data());
        }
        Ok(())
    })
}

/// Row-max plus column-max pooling into a new handle.
///
/// # Safety
/// `f` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rd_center_pool(f: *const RdFeatureMap, out: *mut *mut RdFeatureMap) -> RdStatus {
    guard(|| {
        let f = handle(f)?;
        store_handle(out, center_pool(f))
    })
}
