//! PCA normal estimation and sensor-based orientation.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::spatial::SpatialIndex;

/// Relative gap below which the two smallest covariance eigenvalues count as
/// equal and the normal direction is undefined.
pub const DEGENERATE_EIGEN_TOL: f64 = 1e-9;

/// Estimate a normal for every point from the covariance of its `k` nearest
/// neighbors (the point itself included). The normal is the eigenvector of the
/// smallest eigenvalue, signed so its largest-magnitude component is positive.
/// Degenerate neighborhoods produce `None` entries.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if cloud.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "normal estimation needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if k < 3 {
        return Err(Error::contract(format!("normal estimation needs k >= 3, got {k}")));
    }
    let index = SpatialIndex::build(cloud.positions())?;
    let normals: Vec<Option<Point3>> = cloud
        .positions()
        .par_iter()
        .map(|&p| {
            let nbrs = index.knn(p, k);
            let pts: Vec<Point3> = nbrs.iter().map(|n| index.points()[n.id]).collect();
            pca_normal(&pts)
        })
        .collect();
    let mut out = cloud.clone();
    out.set_normals(Some(normals))?;
    Ok(out)
}

/// Smallest-variance direction of a point set, or `None` if it is not unique.
pub fn pca_normal(pts: &[Point3]) -> Option<Point3> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Point3::ZERO, |a, &p| a + p) * (1.0 / n);
    let mut cov = Matrix3::<f64>::zeros();
    for &p in pts {
        let d = p - mean;
        let v = Vector3::new(d.x, d.y, d.z);
        cov += v * v.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1, l2) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if l2.is_nan() || l2 <= 0.0 || (l1 - l0).abs() <= DEGENERATE_EIGEN_TOL * l2 {
        return None;
    }
    let v = eig.eigenvectors.column(order[0]);
    let n = Point3::new(v[0], v[1], v[2]).normalized()?;
    Some(canonical_sign(n))
}

/// Flip `n` so that its largest-magnitude component (first on ties) is positive.
fn canonical_sign(n: Point3) -> Point3 {
    let a = n.to_array();
    let mut best = 0;
    for i in 1..3 {
        if a[i].abs() > a[best].abs() {
            best = i;
        }
    }
    if a[best] < 0.0 {
        -n
    } else {
        n
    }
}

/// Flip each normal to face its point's sensor origin. Normals orthogonal to
/// the sensor direction are left unchanged.
pub fn orient_normals(cloud: &PointCloud) -> Result<PointCloud> {
    let origins = cloud
        .sensor_origins()
        .ok_or(Error::MissingData("orienting normals requires sensor origins"))?;
    let normals = cloud
        .normals()
        .ok_or(Error::MissingData("orienting normals requires normals"))?;
    let oriented = normals
        .iter()
        .zip(cloud.positions())
        .zip(origins)
        .map(|((n, &p), &s)| n.map(|n| if n.dot(s - p) < 0.0 { -n } else { n }))
        .collect();
    let mut out = cloud.clone();
    out.set_normals(Some(oriented))?;
    Ok(out)
}

/// Estimate then orient, for clouds carrying sensor origins.
pub fn estimate_oriented_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if cloud.sensor_origins().is_none() {
        return Err(Error::MissingData(
            "consistent normal orientation requires per-point sensor origins",
        ));
    }
    orient_normals(&estimate_normals(cloud, k)?)
}
