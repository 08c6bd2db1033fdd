//! Points and point clouds.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position (or direction) in 3D space, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Squared Euclidean distance. Every distance comparison in the crate goes
    /// through this one expression so accelerated and brute-force paths agree
    /// bit for bit.
    #[inline]
    pub fn dist_squared(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn dist(self, o: Point3) -> f64 {
        self.dist_squared(o).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn axis(self, a: usize) -> f64 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Tolerance on the unit length of stored normals.
pub const NORMAL_UNIT_TOL: f64 = 1e-6;

/// A point cloud with optional per-point normals and sensor origins.
///
/// A normal entry of `None` marks a point whose normal could not be estimated
/// (degenerate neighborhood). Normal-dependent distance functions skip such
/// points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3>,
    normals: Option<Vec<Option<Point3>>>,
    sensor_origins: Option<Vec<Point3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::contract(format!("non-finite position {p:?}")));
        }
        Ok(PointCloud {
            positions,
            normals: None,
            sensor_origins: None,
        })
    }

    pub fn with_normals(mut self, normals: Vec<Option<Point3>>) -> Result<Self> {
        self.set_normals(Some(normals))?;
        Ok(self)
    }

    pub fn with_sensor_origins(mut self, origins: Vec<Point3>) -> Result<Self> {
        self.set_sensor_origins(Some(origins))?;
        Ok(self)
    }

    pub fn set_normals(&mut self, normals: Option<Vec<Option<Point3>>>) -> Result<()> {
        if let Some(ns) = &normals {
            if ns.len() != self.positions.len() {
                return Err(Error::contract(format!(
                    "{} normals for {} points",
                    ns.len(),
                    self.positions.len()
                )));
            }
            for n in ns.iter().flatten() {
                if !n.is_finite() || (n.norm() - 1.0).abs() > NORMAL_UNIT_TOL {
                    return Err(Error::contract(format!("normal {n:?} is not unit length")));
                }
            }
        }
        self.normals = normals;
        Ok(())
    }

    pub fn set_sensor_origins(&mut self, origins: Option<Vec<Point3>>) -> Result<()> {
        if let Some(os) = &origins {
            if os.len() != self.positions.len() {
                return Err(Error::contract(format!(
                    "{} sensor origins for {} points",
                    os.len(),
                    self.positions.len()
                )));
            }
            if let Some(o) = os.iter().find(|o| !o.is_finite()) {
                return Err(Error::contract(format!("non-finite sensor origin {o:?}")));
            }
        }
        self.sensor_origins = origins;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn normals(&self) -> Option<&[Option<Point3>]> {
        self.normals.as_deref()
    }

    pub fn sensor_origins(&self) -> Option<&[Point3]> {
        self.sensor_origins.as_deref()
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i]
    }

    /// Normal of point `i`, `None` when absent or flagged invalid.
    pub fn normal(&self, i: usize) -> Option<Point3> {
        self.normals.as_ref().and_then(|ns| ns[i])
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.positions.is_empty() {
            return None;
        }
        let sum = self.positions.iter().fold(Point3::ZERO, |a, &p| a + p);
        Some(sum * (1.0 / self.positions.len() as f64))
    }

    /// Keep only the points whose index satisfies `keep`, carrying all attributes.
    pub fn filter_indices(&self, mut keep: impl FnMut(usize) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        PointCloud {
            positions: idx.iter().map(|&i| self.positions[i]).collect(),
            normals: self.normals.as_ref().map(|ns| idx.iter().map(|&i| ns[i]).collect()),
            sensor_origins: self
                .sensor_origins
                .as_ref()
                .map(|os| idx.iter().map(|&i| os[i]).collect()),
        }
    }

    /// Concatenate clouds. Optional attributes survive only when every part has them.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let all_normals = parts.iter().all(|c| c.normals.is_some());
        let all_origins = parts.iter().all(|c| c.sensor_origins.is_some());
        let mut out = PointCloud::default();
        let mut normals = Vec::new();
        let mut origins = Vec::new();
        for c in parts {
            out.positions.extend_from_slice(&c.positions);
            if all_normals {
                normals.extend_from_slice(c.normals.as_ref().unwrap());
            }
            if all_origins {
                origins.extend_from_slice(c.sensor_origins.as_ref().unwrap());
            }
        }
        if all_normals && !parts.is_empty() {
            out.normals = Some(normals);
        }
        if all_origins && !parts.is_empty() {
            out.sensor_origins = Some(origins);
        }
        out
    }
}
