//! Point cloud extraction from sparse distance-field grids.
//!
//! Signed grids: one point per lattice edge whose endpoint values change sign,
//! linearly interpolated at the zero crossing. Unsigned grids: every voxel with
//! `1 < udf < 3` and all six axis neighbors stored is projected along the
//! negated finite-difference gradient by its own distance.
//!
//! Flipped grids are read through their non-flipped values.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::grid::{SparseDFGrid, VoxelIndex};

/// Gradients shorter than this (voxel units) have no usable direction.
pub const MIN_GRADIENT_NORM: f64 = 1e-9;

const AXES: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

/// Zero-crossing extraction for signed grids. Zero counts as positive.
pub fn extract_sdf(grid: &SparseDFGrid) -> Result<PointCloud> {
    if !grid.kind().is_signed() {
        return Err(Error::WrongKind(format!(
            "zero-crossing extraction needs a signed field, got {}",
            grid.kind()
        )));
    }
    let spec = *grid.spec();
    let values = grid.unflipped();
    let entries: Vec<(&VoxelIndex, &f64)> = values.iter().collect();
    let points: Vec<Point3> = entries
        .par_iter()
        .flat_map_iter(|&(&a, &va)| {
            AXES.iter().filter_map(move |&d| {
                let b = a.offset(d, spec.dims)?;
                let vb = *values.get(&b)?;
                if (va < 0.0) == (vb < 0.0) {
                    return None;
                }
                let t = va / (va - vb);
                let pa = spec.node_position(a);
                let pb = spec.node_position(b);
                Some(pa + (pb - pa) * t)
            })
        })
        .collect();
    PointCloud::new(points)
}

/// One accepted projection of the unsigned extraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UdfProjection {
    pub voxel: VoxelIndex,
    /// Unit finite-difference gradient direction.
    pub direction: Point3,
    /// Stored distance at the voxel, voxel units.
    pub udf: f64,
    pub point: Point3,
}

/// Candidate selection and gradient projection for unsigned grids, in voxel order.
pub fn udf_projections(grid: &SparseDFGrid) -> Result<Vec<UdfProjection>> {
    if grid.kind().is_signed() {
        return Err(Error::WrongKind(format!(
            "gradient extraction needs an unsigned field, got {}",
            grid.kind()
        )));
    }
    let spec = *grid.spec();
    let values = grid.unflipped();
    let entries: Vec<(&VoxelIndex, &f64)> = values.iter().collect();
    Ok(entries
        .par_iter()
        .filter_map(|&(&v, &udf)| {
            if !(udf > 1.0 && udf < 3.0) {
                return None;
            }
            let mut g = [0.0; 3];
            for (a, d) in AXES.iter().enumerate() {
                let plus = *values.get(&v.offset(*d, spec.dims)?)?;
                let minus = *values.get(&v.offset([-d[0], -d[1], -d[2]], spec.dims)?)?;
                g[a] = plus - minus;
            }
            let g = Point3::from_array(g);
            let norm = g.norm();
            if norm < MIN_GRADIENT_NORM {
                return None;
            }
            let direction = g * (1.0 / norm);
            let point = spec.node_position(v) - direction * (spec.voxel_size * udf);
            Some(UdfProjection {
                voxel: v,
                direction,
                udf,
                point,
            })
        })
        .collect())
}

/// Gradient-projection extraction for unsigned grids.
pub fn extract_udf(grid: &SparseDFGrid) -> Result<PointCloud> {
    PointCloud::new(udf_projections(grid)?.into_iter().map(|p| p.point).collect())
}

/// Dispatch on the signedness of the grid's kind.
pub fn extract(grid: &SparseDFGrid) -> Result<PointCloud> {
    if grid.kind().is_signed() {
        extract_sdf(grid)
    } else {
        extract_udf(grid)
    }
}
