//! Truncated distance functions on sparse voxel grids.
//!
//! Eight pointwise functions are supported:
//!
//! | kind   | value at `x`                                                |
//! |--------|-------------------------------------------------------------|
//! | Hoppe  | `n_i . (x - p_i)` for the nearest point `p_i`               |
//! | IMLS   | Gaussian-weighted mean of `n_k . (x - p_k)` over `N_x`      |
//! | SED    | `sign(n_i . (x - p_i)) * |x - p_i|` for the nearest point   |
//! | SWED   | `sign(IMLS(x)) * UWED(x)`                                   |
//! | UHoppe | `|Hoppe(x)|`                                                |
//! | UIMLS  | `|IMLS(x)|`                                                 |
//! | UED    | `|x - p_i|` for the nearest point                           |
//! | UWED   | Gaussian-weighted mean of `|x - p_k|` over `N_x`            |
//!
//! `N_x` is every cloud point within `3 sigma` of `x` (inclusive) and the
//! weight is `exp(-|x - p_k|^2 / sigma^2)`. Grid values are converted to voxel
//! units and kept only where `|v| < 3`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::grid::{DFKind, DFParams, GridSpec, SparseDFGrid, VoxelIndex, TRUNCATION_VOXELS};
use crate::spatial::SpatialIndex;

/// Weighted sums whose total weight falls below this are treated as undefined.
pub const MIN_WEIGHT_SUM: f64 = 1e-300;

/// Guard added to the candidate dilation radius, in voxel units.
const CANDIDATE_EPS: f64 = 1e-9;

/// Gaussian weight `exp(-sq_dist / sigma^2)`.
#[inline]
pub fn gaussian_weight(sq_dist: f64, sigma: f64) -> f64 {
    (-sq_dist / (sigma * sigma)).exp()
}

#[inline]
fn sign_pos_zero(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Pointwise evaluation of every distance function over one cloud. Values are
/// in meters; `None` means undefined at that position.
pub struct FieldEvaluator<'a> {
    cloud: &'a PointCloud,
    index: &'a SpatialIndex,
    params: DFParams,
}

impl<'a> FieldEvaluator<'a> {
    /// `index` must have been built over `cloud`'s positions.
    pub fn new(cloud: &'a PointCloud, index: &'a SpatialIndex, params: DFParams) -> Self {
        debug_assert_eq!(cloud.len(), index.len());
        FieldEvaluator { cloud, index, params }
    }

    pub fn params(&self) -> &DFParams {
        &self.params
    }

    pub fn eval(&self, kind: DFKind, x: Point3) -> Option<f64> {
        match kind {
            DFKind::Hoppe => self.hoppe(x),
            DFKind::Imls => self.imls(x),
            DFKind::Sed => self.sed(x),
            DFKind::Swed => self.swed(x),
            DFKind::UHoppe => self.uhoppe(x),
            DFKind::Uimls => self.uimls(x),
            DFKind::Ued => Some(self.ued(x)),
            DFKind::Uwed => self.uwed(x),
        }
    }

    pub fn hoppe(&self, x: Point3) -> Option<f64> {
        let nn = self.index.nearest(x);
        let n = self.cloud.normal(nn.id)?;
        Some(n.dot(x - self.cloud.position(nn.id)))
    }

    pub fn imls(&self, x: Point3) -> Option<f64> {
        let sigma = self.params.sigma;
        let (mut num, mut den) = (0.0, 0.0);
        self.index.for_each_within(x, self.params.neighbor_radius(), |id, d2| {
            if let Some(n) = self.cloud.normal(id) {
                let w = gaussian_weight(d2, sigma);
                num += n.dot(x - self.cloud.position(id)) * w;
                den += w;
            }
        });
        (den >= MIN_WEIGHT_SUM).then(|| num / den)
    }

    pub fn uwed(&self, x: Point3) -> Option<f64> {
        let sigma = self.params.sigma;
        let (mut num, mut den) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        self.index.for_each_within(x, self.params.neighbor_radius(), |_, d2| {
            let d = d2.sqrt();
            let w = gaussian_weight(d2, sigma);
            num += d * w;
            den += w;
            lo = lo.min(d);
            hi = hi.max(d);
        });
        // a weighted mean lies between the extremes; the clamp only absorbs rounding
        (den >= MIN_WEIGHT_SUM).then(|| (num / den).clamp(lo, hi))
    }

    pub fn ued(&self, x: Point3) -> f64 {
        self.index.nearest(x).distance
    }

    pub fn sed(&self, x: Point3) -> Option<f64> {
        let nn = self.index.nearest(x);
        let n = self.cloud.normal(nn.id)?;
        Some(sign_pos_zero(n.dot(x - self.cloud.position(nn.id))) * nn.distance)
    }

    pub fn swed(&self, x: Point3) -> Option<f64> {
        let s = sign_pos_zero(self.imls(x)?);
        Some(s * self.uwed(x)?)
    }

    pub fn uhoppe(&self, x: Point3) -> Option<f64> {
        self.hoppe(x).map(f64::abs)
    }

    pub fn uimls(&self, x: Point3) -> Option<f64> {
        self.imls(x).map(f64::abs)
    }
}

fn check_inputs(cloud: &PointCloud, kind: DFKind) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput("point cloud"));
    }
    if kind.needs_normals() && !cloud.has_normals() {
        return Err(Error::MissingData("this distance function requires oriented normals"));
    }
    Ok(())
}

/// Lattice nodes within 3 voxels (plus a small guard) of any cloud point,
/// sorted and unique.
pub fn candidate_voxels(cloud: &PointCloud, spec: &GridSpec) -> Vec<VoxelIndex> {
    let vs = spec.voxel_size;
    let reach = TRUNCATION_VOXELS + CANDIDATE_EPS;
    let mut out: Vec<VoxelIndex> = cloud
        .positions()
        .par_iter()
        .flat_map_iter(|&p| {
            let rel = (p - spec.origin) * (1.0 / vs);
            let range = |c: f64, n: u32| {
                let lo = (c - reach).ceil().max(0.0);
                let hi = (c + reach).floor().min(n as f64 - 1.0);
                (lo as i64, hi as i64)
            };
            let (i0, i1) = range(rel.x, spec.dims[0]);
            let (j0, j1) = range(rel.y, spec.dims[1]);
            let (k0, k1) = range(rel.z, spec.dims[2]);
            let mut local = Vec::new();
            for i in i0..=i1 {
                for j in j0..=j1 {
                    for k in k0..=k1 {
                        let d = Point3::new(i as f64, j as f64, k as f64) - rel;
                        if d.norm() <= reach {
                            local.push(VoxelIndex::new(i as u32, j as u32, k as u32));
                        }
                    }
                }
            }
            local
        })
        .collect();
    out.par_sort_unstable();
    out.dedup();
    out
}

/// Evaluate `kind` over the candidate voxels of `spec`, storing values in voxel
/// units where defined and strictly inside the truncation band. A cloud that
/// lies entirely outside the grid yields an empty grid.
pub fn compute_grid(cloud: &PointCloud, spec: &GridSpec, kind: DFKind, params: &DFParams) -> Result<SparseDFGrid> {
    check_inputs(cloud, kind)?;
    let index = SpatialIndex::build(cloud.positions())?;
    let eval = FieldEvaluator::new(cloud, &index, *params);

    let candidates = candidate_voxels(cloud, spec);
    let stored: Vec<Option<(VoxelIndex, f64)>> = candidates
        .par_iter()
        .map(|&idx| {
            let v = eval.eval(kind, spec.node_position(idx))? / spec.voxel_size;
            (v.is_finite() && v.abs() < TRUNCATION_VOXELS).then_some((idx, v))
        })
        .collect();
    let values: BTreeMap<VoxelIndex, f64> = stored.into_iter().flatten().collect();
    SparseDFGrid::new(*spec, kind, values)
}

/// Toggle the flip state of a grid.
pub fn flip(grid: SparseDFGrid) -> SparseDFGrid {
    grid.flip()
}

/// Compute `levels` grids, each from the original cloud, halving the resolution
/// at every level. Sigma scales with the voxel size so every level sees the
/// same sigma-to-voxel ratio.
pub fn build_pyramid(
    cloud: &PointCloud,
    spec: &GridSpec,
    kind: DFKind,
    params: &DFParams,
    levels: u32,
) -> Result<Vec<SparseDFGrid>> {
    if levels < 1 {
        return Err(Error::contract("pyramid needs at least one level"));
    }
    if levels > 31 {
        return Err(Error::contract(format!("{levels} pyramid levels is too many")));
    }
    (0..levels)
        .map(|l| {
            let level_spec = spec.coarsened(l);
            let level_params = DFParams {
                sigma: params.sigma * (1u64 << l) as f64,
                ..*params
            };
            compute_grid(cloud, &level_spec, kind, &level_params)
        })
        .collect()
}
