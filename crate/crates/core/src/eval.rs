//! Chamfer distance and the point cloud -> field -> point cloud roundtrip.

use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dfield::compute_grid;
use crate::error::{Error, Result};
use crate::extract::extract;
use crate::geom::{Point3, PointCloud};
use crate::grid::{DFKind, DFParams, GridSpec};
use crate::normals::estimate_oriented_normals;
use crate::spatial::SpatialIndex;

/// Symmetric Chamfer distance with unsquared Euclidean distances:
/// `mean_{x in a} min_y |x - y| / 2 + mean_{y in b} min_x |y - x| / 2`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_non_empty(a, b)?;
    let ia = SpatialIndex::build(a.positions())?;
    let ib = SpatialIndex::build(b.positions())?;
    let ab: Vec<f64> = a.positions().par_iter().map(|&x| ib.nearest(x).distance).collect();
    let ba: Vec<f64> = b.positions().par_iter().map(|&y| ia.nearest(y).distance).collect();
    Ok(combine(&ab, &ba))
}

/// Exhaustive O(|a| |b|) Chamfer distance. Same contract as [`chamfer`] and
/// the same accumulation order, so the two agree exactly.
pub fn chamfer_bruteforce(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_non_empty(a, b)?;
    let directed = |from: &[Point3], to: &[Point3]| -> Vec<f64> {
        from.iter()
            .map(|&x| {
                to.iter()
                    .map(|&y| x.dist_squared(y))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    };
    Ok(combine(
        &directed(a.positions(), b.positions()),
        &directed(b.positions(), a.positions()),
    ))
}

fn check_non_empty(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("chamfer distance needs two non-empty clouds"));
    }
    Ok(())
}

fn combine(ab: &[f64], ba: &[f64]) -> f64 {
    let sum_ab: f64 = ab.iter().sum();
    let sum_ba: f64 = ba.iter().sum();
    sum_ab / (2.0 * ab.len() as f64) + sum_ba / (2.0 * ba.len() as f64)
}

/// Outcome of one roundtrip. `cd` is `+inf` when extraction produced no points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub kind: DFKind,
    pub flipped: bool,
    /// Meters.
    pub sigma: f64,
    /// Meters.
    pub voxel_size: f64,
    /// Meters.
    #[serde(with = "inf_as_null")]
    pub cd: f64,
    pub extracted_count: usize,
    pub occupied_voxels: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl RoundtripReport {
    pub fn is_degenerate(&self) -> bool {
        self.extracted_count == 0
    }

    /// True when everything except the timing matches.
    pub fn same_result(&self, other: &RoundtripReport) -> bool {
        RoundtripReport {
            wall_time: 0.0,
            ..self.clone()
        } == RoundtripReport {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Make sure a cloud carries normals when `kind` needs them, estimating and
/// orienting them from sensor origins if necessary.
pub fn prepare_normals<'a>(cloud: &'a PointCloud, kind: DFKind, k: usize) -> Result<Cow<'a, PointCloud>> {
    if !kind.needs_normals() || cloud.has_normals() {
        return Ok(Cow::Borrowed(cloud));
    }
    Ok(Cow::Owned(estimate_oriented_normals(cloud, k)?))
}

/// Compute the field, optionally flip it, extract points back and measure the
/// Chamfer distance to the input cloud.
pub fn roundtrip(
    cloud: &PointCloud,
    spec: &GridSpec,
    kind: DFKind,
    flipped: bool,
    params: &DFParams,
) -> Result<RoundtripReport> {
    let prepared = prepare_normals(cloud, kind, params.normal_k)?;
    let start = Instant::now();
    let mut grid = compute_grid(&prepared, spec, kind, params)?;
    if flipped {
        grid = grid.flip();
    }
    let extracted = extract(&grid)?;
    let cd = if extracted.is_empty() {
        f64::INFINITY
    } else {
        chamfer(&extracted, cloud)?
    };
    Ok(RoundtripReport {
        kind,
        flipped,
        sigma: params.sigma,
        voxel_size: spec.voxel_size,
        cd,
        extracted_count: extracted.len(),
        occupied_voxels: grid.len(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Sigma values of one to four voxels.
pub fn default_sigmas(voxel_size: f64) -> Vec<f64> {
    (1..=4).map(|m| m as f64 * voxel_size).collect()
}

/// One roundtrip per `(kind, sigma)` pair, kinds outermost.
pub fn sigma_sweep(
    cloud: &PointCloud,
    spec: &GridSpec,
    kinds: &[DFKind],
    sigmas: &[f64],
    normal_k: usize,
) -> Result<Vec<RoundtripReport>> {
    if sigmas.is_empty() {
        return Err(Error::contract("sigma sweep needs at least one sigma"));
    }
    let with_normals = if kinds.iter().any(|k| k.needs_normals()) {
        prepare_normals(cloud, DFKind::Hoppe, normal_k)?
    } else {
        Cow::Borrowed(cloud)
    };
    let mut out = Vec::with_capacity(kinds.len() * sigmas.len());
    for &kind in kinds {
        for &sigma in sigmas {
            let params = DFParams {
                normal_k,
                ..DFParams::new(sigma)?
            };
            out.push(roundtrip(&with_normals, spec, kind, false, &params)?);
        }
    }
    Ok(out)
}
