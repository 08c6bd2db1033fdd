//! C ABI over `udfgrid`.
//!
//! Clouds and grids cross the boundary as opaque handles that the caller
//! releases with the matching `_free` function. Every fallible call returns a
//! [`UdfStatus`]; on failure, [`udfgrid_last_error`] describes the error until
//! the next failing call on the same thread. Output pointers are written only
//! on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use udfgrid::io::{read_grid, read_ply, write_grid, write_ply};
use udfgrid::normals::estimate_oriented_normals;
use udfgrid::{
    chamfer, compute_grid, estimate_normals, extract, DFKind, DFParams, Error, GridSpec, Point3, PointCloud,
    SparseDFGrid, VoxelIndex,
};

/// Status codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UdfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EmptyInput = 3,
    InsufficientData = 4,
    MissingData = 5,
    OutOfBounds = 6,
    Contract = 7,
    WrongKind = 8,
    Parse = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

impl From<&Error> for UdfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::EmptyInput(_) => UdfStatus::EmptyInput,
            Error::InsufficientData(_) => UdfStatus::InsufficientData,
            Error::MissingData(_) => UdfStatus::MissingData,
            Error::OutOfBounds { .. } => UdfStatus::OutOfBounds,
            Error::Contract(_) => UdfStatus::Contract,
            Error::WrongKind(_) => UdfStatus::WrongKind,
            Error::Parse { .. } => UdfStatus::Parse,
            Error::Config(_) => UdfStatus::Config,
            Error::Io(_) => UdfStatus::Io,
        }
    }
}

/// Point cloud handle.
pub struct UdfCloud(PointCloud);

/// Sparse distance-field grid handle.
pub struct UdfGrid(SparseDFGrid);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(UdfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(UdfStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UdfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(UdfStatus::InvalidArgument, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UdfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UdfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_owned());
            UdfStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<T>(p: *mut *mut T, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null("output pointer"));
    }
    *p = Box::into_raw(Box::new(value));
    Ok(())
}

fn kind_arg(code: u8) -> Result<DFKind, Failure> {
    DFKind::from_code(code).ok_or_else(|| invalid(format!("unknown distance field kind {code}")))
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn udfgrid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn udfgrid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a cloud from `n` interleaved `x, y, z` triples.
///
/// # Safety
/// `xyz` must point to `3 * n` readable doubles; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_from_xyz(xyz: *const f64, n: usize, out_cloud: *mut *mut UdfCloud) -> UdfStatus {
    guard(|| {
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let len = n.checked_mul(3).ok_or_else(|| invalid("point count overflows"))?;
        let raw = std::slice::from_raw_parts(xyz, len);
        let pts = raw.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
        out(out_cloud, UdfCloud(PointCloud::new(pts)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_read_ply(path: *const c_char, out_cloud: *mut *mut UdfCloud) -> UdfStatus {
    guard(|| {
        let cloud = read_ply(&path_arg(path)?)?;
        out(out_cloud, UdfCloud(cloud))
    })
}

/// # Safety
/// `cloud` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_write_ply(
    cloud: *const UdfCloud,
    path: *const c_char,
    binary: bool,
) -> UdfStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        write_ply(&cloud.0, &path_arg(path)?, binary)?;
        Ok(())
    })
}

/// Number of points; zero for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_len(cloud: *const UdfCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Whether the cloud carries per-point normals.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_has_normals(cloud: *const UdfCloud) -> bool {
    cloud.as_ref().is_some_and(|c| c.0.has_normals())
}

/// Copy positions as interleaved triples into `xyz`, which holds `capacity`
/// doubles and must fit `3 * len`.
///
/// # Safety
/// `cloud` must be a live handle; `xyz` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_positions(cloud: *const UdfCloud, xyz: *mut f64, capacity: usize) -> UdfStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let need = 3 * cloud.0.len();
        if capacity < need {
            return Err(invalid(format!("buffer holds {capacity} doubles, {need} needed")));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, need);
        for (d, p) in dst.chunks_exact_mut(3).zip(cloud.0.positions()) {
            d.copy_from_slice(&p.to_array());
        }
        Ok(())
    })
}

/// Estimate normals from `k` nearest neighbors, oriented toward the sensor
/// origins when the cloud has them.
///
/// # Safety
/// `cloud` must be a live handle; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_estimate_normals(
    cloud: *const UdfCloud,
    k: usize,
    out_cloud: *mut *mut UdfCloud,
) -> UdfStatus {
    guard(|| {
        let cloud = &handle(cloud, "cloud")?.0;
        let est = if cloud.sensor_origins().is_some() {
            estimate_oriented_normals(cloud, k)?
        } else {
            estimate_normals(cloud, k)?
        };
        out(out_cloud, UdfCloud(est))
    })
}

/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_cloud_free(cloud: *mut UdfCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Compute a grid of kind `kind` (codes 0 to 7). `sigma <= 0` selects twice the
/// voxel size. With `origin` or `dims` null the grid spans the cloud's bounds
/// padded by three voxels.
///
/// # Safety
/// `cloud` must be a live handle; `origin` and `dims` must each be null or point
/// to three values; `out_grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_compute(
    cloud: *const UdfCloud,
    kind: u8,
    voxel_size: f64,
    sigma: f64,
    origin: *const f64,
    dims: *const u32,
    out_grid: *mut *mut UdfGrid,
) -> UdfStatus {
    guard(|| {
        let cloud = &handle(cloud, "cloud")?.0;
        let kind = kind_arg(kind)?;
        let params = if sigma > 0.0 {
            DFParams::new(sigma)?
        } else {
            DFParams::for_voxel_size(voxel_size)?
        };
        let spec = if origin.is_null() || dims.is_null() {
            GridSpec::around(cloud, voxel_size, 3)?
        } else {
            let o = std::slice::from_raw_parts(origin, 3);
            let d = std::slice::from_raw_parts(dims, 3);
            GridSpec::new(Point3::new(o[0], o[1], o[2]), voxel_size, [d[0], d[1], d[2]])?
        };
        out(out_grid, UdfGrid(compute_grid(cloud, &spec, kind, &params)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_grid` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_read(path: *const c_char, out_grid: *mut *mut UdfGrid) -> UdfStatus {
    guard(|| {
        let grid = read_grid(&path_arg(path)?)?;
        out(out_grid, UdfGrid(grid))
    })
}

/// # Safety
/// `grid` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_write(grid: *const UdfGrid, path: *const c_char) -> UdfStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        write_grid(&grid.0, &path_arg(path)?)?;
        Ok(())
    })
}

/// Toggle the flip state in place.
///
/// # Safety
/// `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_flip(grid: *mut UdfGrid) -> UdfStatus {
    guard(|| {
        grid.as_mut().ok_or_else(|| null("grid"))?.0.toggle_flip();
        Ok(())
    })
}

/// Number of stored voxels; zero for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_len(grid: *const UdfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Kind code (0 to 7); 255 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_kind(grid: *const UdfGrid) -> u8 {
    grid.as_ref().map_or(u8::MAX, |g| g.0.kind().code())
}

/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_is_flipped(grid: *const UdfGrid) -> bool {
    grid.as_ref().is_some_and(|g| g.0.is_flipped())
}

/// Reported value at voxel `(i, j, k)` in voxel units. `*found` is false for
/// voxels that are not stored, in which case `*value` is left untouched.
///
/// # Safety
/// `grid` must be a live handle; `value` and `found` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_get(
    grid: *const UdfGrid,
    i: u32,
    j: u32,
    k: u32,
    value: *mut f64,
    found: *mut bool,
) -> UdfStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        if value.is_null() || found.is_null() {
            return Err(null("output pointer"));
        }
        match grid.0.get(VoxelIndex::new(i, j, k)) {
            Some(v) => {
                *value = v;
                *found = true;
            }
            None => *found = false,
        }
        Ok(())
    })
}

/// Extract surface points: zero crossings for signed kinds, projections for
/// unsigned ones.
///
/// # Safety
/// `grid` must be a live handle; `out_cloud` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_extract(grid: *const UdfGrid, out_cloud: *mut *mut UdfCloud) -> UdfStatus {
    guard(|| {
        let grid = handle(grid, "grid")?;
        out(out_cloud, UdfCloud(extract(&grid.0)?))
    })
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_grid_free(grid: *mut UdfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Symmetric Chamfer distance in meters.
///
/// # Safety
/// `a` and `b` must be live handles; `out_distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn udfgrid_chamfer(a: *const UdfCloud, b: *const UdfCloud, out_distance: *mut f64) -> UdfStatus {
    guard(|| {
        let (a, b) = (handle(a, "a")?, handle(b, "b")?);
        if out_distance.is_null() {
            return Err(null("output pointer"));
        }
        *out_distance = chamfer(&a.0, &b.0)?;
        Ok(())
    })
}
