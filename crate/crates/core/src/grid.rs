//! Voxel lattices and sparse truncated distance-field storage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

/// Truncation distance of every stored field, in voxel units.
pub const TRUNCATION_VOXELS: f64 = 3.0;

/// A regular lattice. Field values are sampled at the nodes
/// `origin + (i, j, k) * voxel_size`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point3,
    pub voxel_size: f64,
    pub dims: [u32; 3],
}

/// Integer lattice coordinates. Ordered lexicographically by `(i, j, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl VoxelIndex {
    pub const fn new(i: u32, j: u32, k: u32) -> Self {
        VoxelIndex { i, j, k }
    }

    /// Neighbor at a signed offset, `None` if it would leave `dims`.
    pub fn offset(self, d: [i64; 3], dims: [u32; 3]) -> Option<VoxelIndex> {
        let i = self.i as i64 + d[0];
        let j = self.j as i64 + d[1];
        let k = self.k as i64 + d[2];
        let inside = |v: i64, n: u32| v >= 0 && v < n as i64;
        (inside(i, dims[0]) && inside(j, dims[1]) && inside(k, dims[2]))
            .then(|| VoxelIndex::new(i as u32, j as u32, k as u32))
    }
}

impl GridSpec {
    pub fn new(origin: Point3, voxel_size: f64, dims: [u32; 3]) -> Result<Self> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::contract(format!("voxel size {voxel_size} must be positive")));
        }
        if dims.contains(&0) {
            return Err(Error::contract(format!("grid dims {dims:?} must all be >= 1")));
        }
        if !origin.is_finite() {
            return Err(Error::contract("grid origin must be finite"));
        }
        Ok(GridSpec {
            origin,
            voxel_size,
            dims,
        })
    }

    /// Lattice covering the cloud's bounding box padded by `pad_voxels` on every side.
    pub fn around(cloud: &PointCloud, voxel_size: f64, pad_voxels: u32) -> Result<Self> {
        let (lo, hi) = cloud.bounds().ok_or(Error::EmptyInput("point cloud"))?;
        let pad = pad_voxels as f64 * voxel_size;
        let origin = lo - Point3::new(pad, pad, pad);
        let extent = hi - lo;
        let dim = |e: f64| (e / voxel_size).ceil() as u32 + 1 + 2 * pad_voxels;
        GridSpec::new(origin, voxel_size, [dim(extent.x), dim(extent.y), dim(extent.z)])
    }

    pub fn contains(&self, idx: VoxelIndex) -> bool {
        idx.i < self.dims[0] && idx.j < self.dims[1] && idx.k < self.dims[2]
    }

    pub fn node_count(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }

    /// World position of a lattice node.
    pub fn voxel_position(&self, idx: VoxelIndex) -> Result<Point3> {
        if !self.contains(idx) {
            return Err(Error::contract(format!("voxel {idx:?} outside dims {:?}", self.dims)));
        }
        Ok(self.node_position(idx))
    }

    #[inline]
    pub(crate) fn node_position(&self, idx: VoxelIndex) -> Point3 {
        let vs = self.voxel_size;
        Point3::new(
            self.origin.x + idx.i as f64 * vs,
            self.origin.y + idx.j as f64 * vs,
            self.origin.z + idx.k as f64 * vs,
        )
    }

    /// Nearest lattice node to `p`. Ties round away from zero.
    pub fn world_to_voxel(&self, p: Point3) -> Result<VoxelIndex> {
        let rel = p - self.origin;
        let mut out = [0u32; 3];
        for (a, slot) in out.iter_mut().enumerate() {
            let f = rel.axis(a) / self.voxel_size;
            let n = self.dims[a] as f64;
            if !(f >= -0.5 && f <= n - 0.5) {
                return Err(Error::OutOfBounds { x: p.x, y: p.y, z: p.z });
            }
            *slot = f.round().clamp(0.0, n - 1.0) as u32;
        }
        Ok(VoxelIndex::new(out[0], out[1], out[2]))
    }

    /// Same origin, voxel size scaled by `2^level`, dims divided by `2^level` (ceiling).
    pub fn coarsened(&self, level: u32) -> GridSpec {
        let f = 1u64 << level;
        let d = |n: u32| (n as u64).div_ceil(f).max(1) as u32;
        GridSpec {
            origin: self.origin,
            voxel_size: self.voxel_size * f as f64,
            dims: [d(self.dims[0]), d(self.dims[1]), d(self.dims[2])],
        }
    }
}

/// The eight distance functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DFKind {
    Hoppe,
    #[serde(rename = "IMLS")]
    Imls,
    #[serde(rename = "SED")]
    Sed,
    #[serde(rename = "SWED")]
    Swed,
    UHoppe,
    #[serde(rename = "UIMLS")]
    Uimls,
    #[serde(rename = "UED")]
    Ued,
    #[serde(rename = "UWED")]
    Uwed,
}

impl DFKind {
    pub const ALL: [DFKind; 8] = [
        DFKind::Hoppe,
        DFKind::Imls,
        DFKind::Sed,
        DFKind::Swed,
        DFKind::UHoppe,
        DFKind::Uimls,
        DFKind::Ued,
        DFKind::Uwed,
    ];

    pub fn is_signed(self) -> bool {
        matches!(self, DFKind::Hoppe | DFKind::Imls | DFKind::Sed | DFKind::Swed)
    }

    /// Whether evaluation consults per-point normals.
    pub fn needs_normals(self) -> bool {
        !matches!(self, DFKind::Ued | DFKind::Uwed)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<DFKind> {
        DFKind::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DFKind::Hoppe => "Hoppe",
            DFKind::Imls => "IMLS",
            DFKind::Sed => "SED",
            DFKind::Swed => "SWED",
            DFKind::UHoppe => "UHoppe",
            DFKind::Uimls => "UIMLS",
            DFKind::Ued => "UED",
            DFKind::Uwed => "UWED",
        }
    }
}

impl fmt::Display for DFKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DFKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DFKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown distance field kind '{s}'")))
    }
}

/// Parameters shared by the weighted distance functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DFParams {
    /// Gaussian width, meters.
    pub sigma: f64,
    /// Neighbors used for PCA normal estimation.
    pub normal_k: usize,
}

impl DFParams {
    pub const DEFAULT_NORMAL_K: usize = 30;

    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::contract(format!("sigma {sigma} must be positive")));
        }
        Ok(DFParams {
            sigma,
            normal_k: Self::DEFAULT_NORMAL_K,
        })
    }

    /// Default parameters for a voxel size: sigma = 2 voxels.
    pub fn for_voxel_size(voxel_size: f64) -> Result<Self> {
        DFParams::new(2.0 * voxel_size)
    }

    /// Neighborhood radius for weighted functions: 3 sigma.
    pub fn neighbor_radius(&self) -> f64 {
        3.0 * self.sigma
    }

    pub fn truncation_voxels(&self) -> f64 {
        TRUNCATION_VOXELS
    }
}

#[inline]
fn sign_pos_zero(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Flip transform on a single value: `3 - v` for unsigned kinds, and
/// `sign(v) * (3 - |v|)` for signed kinds with `sign(0) = +1`.
#[inline]
pub fn flip_value(v: f64, signed: bool) -> f64 {
    if signed {
        sign_pos_zero(v) * (TRUNCATION_VOXELS - v.abs())
    } else {
        TRUNCATION_VOXELS - v
    }
}

/// A truncated distance field on the sparse lattice. Values are in voxel units;
/// voxels absent from the map are empty space.
///
/// The field is held in its non-flipped form; when `flipped` is set, every
/// value accessor applies [`flip_value`]. Flipping twice is therefore the exact
/// identity on reported values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDFGrid {
    spec: GridSpec,
    kind: DFKind,
    flipped: bool,
    values: BTreeMap<VoxelIndex, f64>,
}

impl SparseDFGrid {
    /// Build a non-flipped grid, checking keys and the value range for `kind`.
    pub fn new(spec: GridSpec, kind: DFKind, values: BTreeMap<VoxelIndex, f64>) -> Result<Self> {
        for (&idx, &v) in &values {
            if !spec.contains(idx) {
                return Err(Error::contract(format!("voxel {idx:?} outside dims {:?}", spec.dims)));
            }
            if !value_in_range(v, kind.is_signed(), false) {
                return Err(Error::contract(format!("value {v} at {idx:?} out of range for {kind}")));
            }
        }
        Ok(SparseDFGrid {
            spec,
            kind,
            flipped: false,
            values,
        })
    }

    /// Build a grid from reported values (flipped if `flipped` is set).
    pub fn from_reported(
        spec: GridSpec,
        kind: DFKind,
        flipped: bool,
        reported: BTreeMap<VoxelIndex, f64>,
    ) -> Result<Self> {
        if !flipped {
            return SparseDFGrid::new(spec, kind, reported);
        }
        let signed = kind.is_signed();
        let mut values = BTreeMap::new();
        for (idx, w) in reported {
            if !value_in_range(w, signed, true) {
                return Err(Error::contract(format!(
                    "flipped value {w} at {idx:?} out of range for {kind}"
                )));
            }
            values.insert(idx, flip_value(w, signed));
        }
        let mut g = SparseDFGrid::new(spec, kind, values)?;
        g.flipped = true;
        Ok(g)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kind(&self) -> DFKind {
        self.kind
    }

    pub fn is_flipped(&self) -> bool {
        self.flipped
    }

    pub fn truncation(&self) -> f64 {
        TRUNCATION_VOXELS
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reported value at `idx` (flipped when the grid is flipped).
    pub fn get(&self, idx: VoxelIndex) -> Option<f64> {
        self.values.get(&idx).map(|&v| self.report(v))
    }

    /// Reported values in index order.
    pub fn iter(&self) -> impl Iterator<Item = (VoxelIndex, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, self.report(v)))
    }

    /// Non-flipped field values in index order, whatever the flip state.
    pub fn unflipped(&self) -> &BTreeMap<VoxelIndex, f64> {
        &self.values
    }

    pub fn keys(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.values.keys().copied()
    }

    /// Toggle the flip state.
    pub fn flip(mut self) -> Self {
        self.toggle_flip();
        self
    }

    pub fn toggle_flip(&mut self) {
        self.flipped = !self.flipped;
    }

    /// True when every reported value lies in the range its kind and flip state allow.
    pub fn values_in_range(&self) -> bool {
        let signed = self.kind.is_signed();
        self.iter().all(|(_, v)| value_in_range(v, signed, self.flipped))
    }

    #[inline]
    fn report(&self, v: f64) -> f64 {
        if self.flipped {
            flip_value(v, self.kind.is_signed())
        } else {
            v
        }
    }
}

/// Allowed value ranges (voxel units) by signedness and flip state.
pub fn value_in_range(v: f64, signed: bool, flipped: bool) -> bool {
    let t = TRUNCATION_VOXELS;
    match (signed, flipped) {
        (false, false) => (0.0..t).contains(&v),
        (false, true) => v > 0.0 && v <= t,
        (true, false) => v > -t && v < t,
        (true, true) => v.abs() <= t,
    }
}
