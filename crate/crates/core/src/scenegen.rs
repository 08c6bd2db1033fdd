//! Synthetic analytic scenes and virtual scanning.
//!
//! Scenes are lists of primitives sampled at a given surface density. Scans
//! assign every point to its nearest sensor origin and add Gaussian noise;
//! dropout removes whole scans; augmentation applies a random z rotation,
//! scale and jitter.
//!
//! Scene files are TOML:
//!
//! ```toml
//! [[primitive]]
//! type = "plane"          # bounded parallelogram: corner + two edge vectors
//! corner = [0.0, 0.0, 0.0]
//! edge_u = [1.0, 0.0, 0.0]
//! edge_v = [0.0, 1.0, 0.0]
//! density = 6400.0        # points per square meter
//!
//! [[primitive]]
//! type = "sphere"
//! center = [0.5, 0.5, 0.4]
//! radius = 0.2
//! density = 6400.0
//!
//! [[primitive]]
//! type = "box"
//! min = [0.0, 0.0, 0.0]
//! max = [0.3, 0.3, 0.3]
//! density = 6400.0
//!
//! [[primitive]]
//! type = "cylinder"       # open lateral surface
//! base = [0.0, 0.0, 0.0]
//! axis = [0.0, 0.0, 1.0]
//! radius = 0.1
//! height = 0.5
//! density = 6400.0
//!
//! [scan]                  # optional
//! sensors = [[0.5, 0.5, 2.0]]
//! noise_sigma = 0.0
//! dropout_fraction = 0.0
//! ```

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Plane {
        corner: Point3Cfg,
        edge_u: Point3Cfg,
        edge_v: Point3Cfg,
    },
    Sphere {
        center: Point3Cfg,
        radius: f64,
    },
    Box {
        min: Point3Cfg,
        max: Point3Cfg,
    },
    Cylinder {
        base: Point3Cfg,
        axis: Point3Cfg,
        radius: f64,
        height: f64,
    },
}

/// `[x, y, z]` in config files.
pub type Point3Cfg = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    /// Points per square meter.
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub sensors: Vec<Point3Cfg>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub dropout_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(rename = "primitive", default)]
    pub primitives: Vec<Primitive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
}

impl Primitive {
    pub fn new(shape: Shape, density: f64) -> Self {
        Primitive { shape, density }
    }

    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Plane { edge_u, edge_v, .. } => {
                Point3::from_array(*edge_u).cross(Point3::from_array(*edge_v)).norm()
            }
            Shape::Sphere { radius, .. } => 2.0 * TAU * radius * radius,
            Shape::Box { min, max } => {
                let e = Point3::from_array(*max) - Point3::from_array(*min);
                2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
            }
            Shape::Cylinder { radius, height, .. } => TAU * radius * height,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::Config(format!("density {} must be positive", self.density)));
        }
        let ok = match &self.shape {
            Shape::Plane { .. } => self.area() > 0.0,
            Shape::Sphere { radius, .. } => *radius > 0.0,
            Shape::Box { min, max } => (0..3).all(|a| max[a] > min[a]),
            Shape::Cylinder {
                axis, radius, height, ..
            } => *radius > 0.0 && *height > 0.0 && Point3::from_array(*axis).norm() > 0.0,
        };
        if !ok || !self.area().is_finite() {
            return Err(Error::Config(format!(
                "primitive {:?} has no positive area",
                self.shape
            )));
        }
        Ok(())
    }

    /// Distance from `p` to the primitive's surface.
    pub fn distance(&self, p: Point3) -> f64 {
        match &self.shape {
            Shape::Plane { corner, edge_u, edge_v } => distance_to_parallelogram(
                p,
                Point3::from_array(*corner),
                Point3::from_array(*edge_u),
                Point3::from_array(*edge_v),
            ),
            Shape::Sphere { center, radius } => (p.dist(Point3::from_array(*center)) - radius).abs(),
            Shape::Box { min, max } => box_faces(Point3::from_array(*min), Point3::from_array(*max))
                .iter()
                .map(|(c, u, v, _)| distance_to_parallelogram(p, *c, *u, *v))
                .fold(f64::INFINITY, f64::min),
            Shape::Cylinder {
                base,
                axis,
                radius,
                height,
            } => {
                let a = Point3::from_array(*axis)
                    .normalized()
                    .unwrap_or(Point3::new(0.0, 0.0, 1.0));
                let rel = p - Point3::from_array(*base);
                let t = rel.dot(a);
                let radial = (rel - a * t).norm();
                let dr = radial - radius;
                let dt = if t < 0.0 {
                    -t
                } else if t > *height {
                    t - height
                } else {
                    0.0
                };
                (dr * dr + dt * dt).sqrt()
            }
        }
    }
}

/// Distance from `p` to the parallelogram `corner + s u + t v`, `s, t in [0, 1]`.
pub fn distance_to_parallelogram(p: Point3, corner: Point3, u: Point3, v: Point3) -> f64 {
    // interior optimum from the 2x2 normal equations; otherwise the closest
    // point lies on one of the four edges
    let d = p - corner;
    let (uu, uv, vv) = (u.dot(u), u.dot(v), v.dot(v));
    let (du, dv) = (d.dot(u), d.dot(v));
    let det = uu * vv - uv * uv;
    if det > 0.0 {
        let s = (du * vv - dv * uv) / det;
        let t = (dv * uu - du * uv) / det;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            return p.dist(corner + u * s + v * t);
        }
    }
    let seg = |a: Point3, e: Point3| {
        let l = e.norm_squared();
        let s = if l > 0.0 {
            ((p - a).dot(e) / l).clamp(0.0, 1.0)
        } else {
            0.0
        };
        p.dist(a + e * s)
    };
    seg(corner, u)
        .min(seg(corner, v))
        .min(seg(corner + u, v))
        .min(seg(corner + v, u))
}

fn box_faces(min: Point3, max: Point3) -> [(Point3, Point3, Point3, Point3); 6] {
    let e = max - min;
    let ex = Point3::new(e.x, 0.0, 0.0);
    let ey = Point3::new(0.0, e.y, 0.0);
    let ez = Point3::new(0.0, 0.0, e.z);
    [
        (min, ey, ez, Point3::new(-1.0, 0.0, 0.0)),
        (min + ex, ey, ez, Point3::new(1.0, 0.0, 0.0)),
        (min, ex, ez, Point3::new(0.0, -1.0, 0.0)),
        (min + ey, ex, ez, Point3::new(0.0, 1.0, 0.0)),
        (min, ex, ey, Point3::new(0.0, 0.0, -1.0)),
        (min + ez, ex, ey, Point3::new(0.0, 0.0, 1.0)),
    ]
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Config("scene has no primitives".into()));
        }
        self.primitives.iter().try_for_each(Primitive::validate)?;
        if let Some(scan) = &self.scan {
            scan.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let scene: SceneSpec = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SceneSpec::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Distance from `p` to the nearest primitive surface.
    pub fn distance(&self, p: Point3) -> f64 {
        self.primitives
            .iter()
            .map(|pr| pr.distance(p))
            .fold(f64::INFINITY, f64::min)
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::Config("scan needs at least one sensor origin".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if !(0.0..1.0).contains(&self.dropout_fraction) {
            return Err(Error::Config(format!(
                "dropout fraction {} must be in [0, 1)",
                self.dropout_fraction
            )));
        }
        Ok(())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Default)]
struct Samples {
    positions: Vec<Point3>,
    normals: Vec<Option<Point3>>,
}

impl Samples {
    fn push(&mut self, p: Point3, n: Point3) {
        self.positions.push(p);
        self.normals.push(Some(n));
    }
}

/// Stratified samples `(s, t)` in the unit square, `n` in total, with the
/// strata aspect ratio following `len_u : len_v`.
fn stratified_unit(n: usize, len_u: f64, len_v: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    if n == 0 {
        return Vec::new();
    }
    let nu = ((n as f64 * len_u / len_v).sqrt().round() as usize).clamp(1, n);
    let nv = n / nu;
    let mut out = Vec::with_capacity(n);
    for a in 0..nu {
        for b in 0..nv {
            let s = (a as f64 + rng.random::<f64>()) / nu as f64;
            let t = (b as f64 + rng.random::<f64>()) / nv as f64;
            out.push((s, t));
        }
    }
    while out.len() < n {
        out.push((rng.random(), rng.random()));
    }
    out
}

fn sample_patch(
    out: &mut Samples,
    corner: Point3,
    u: Point3,
    v: Point3,
    normal: Point3,
    density: f64,
    rng: &mut ChaCha8Rng,
) {
    let n = (u.cross(v).norm() * density).round() as usize;
    for (s, t) in stratified_unit(n, u.norm(), v.norm(), rng) {
        out.push(corner + u * s + v * t, normal);
    }
}

fn orthonormal_basis(a: Point3) -> (Point3, Point3) {
    let helper = if a.x.abs() < 0.9 {
        Point3::new(1.0, 0.0, 0.0)
    } else {
        Point3::new(0.0, 1.0, 0.0)
    };
    let e1 = a.cross(helper).normalized().unwrap();
    let e2 = a.cross(e1);
    (e1, e2)
}

fn sample_primitive(pr: &Primitive, rng: &mut ChaCha8Rng) -> Samples {
    let mut out = Samples::default();
    match &pr.shape {
        Shape::Plane { corner, edge_u, edge_v } => {
            let (u, v) = (Point3::from_array(*edge_u), Point3::from_array(*edge_v));
            let normal = u.cross(v).normalized().unwrap();
            sample_patch(&mut out, Point3::from_array(*corner), u, v, normal, pr.density, rng);
        }
        Shape::Sphere { center, radius } => {
            let c = Point3::from_array(*center);
            let n = (pr.area() * pr.density).round() as usize;
            // equal-area bands in z, golden-angle stepping in azimuth
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + rng.random::<f64>()) / n as f64;
                let phi = TAU * (i as f64 * golden + rng.random::<f64>() / (n as f64).sqrt()).fract();
                let rxy = (1.0 - z * z).max(0.0).sqrt();
                let dir = Point3::new(rxy * phi.cos(), rxy * phi.sin(), z).normalized().unwrap();
                out.push(c + dir * *radius, dir);
            }
        }
        Shape::Box { min, max } => {
            for (corner, u, v, normal) in box_faces(Point3::from_array(*min), Point3::from_array(*max)) {
                sample_patch(&mut out, corner, u, v, normal, pr.density, rng);
            }
        }
        Shape::Cylinder {
            base,
            axis,
            radius,
            height,
        } => {
            let a = Point3::from_array(*axis).normalized().unwrap();
            let (e1, e2) = orthonormal_basis(a);
            let b = Point3::from_array(*base);
            let n = (pr.area() * pr.density).round() as usize;
            for (s, t) in stratified_unit(n, TAU * radius, *height, rng) {
                let th = TAU * s;
                let radial = e1 * th.cos() + e2 * th.sin();
                out.push(b + a * (t * height) + radial * *radius, radial);
            }
        }
    }
    out
}

/// Sample every primitive at its density. Each primitive draws from its own
/// random stream, so output depends only on `seed`.
pub fn sample_scene(scene: &SceneSpec, seed: u64) -> Result<PointCloud> {
    scene.validate()?;
    let parts: Vec<Samples> = scene
        .primitives
        .par_iter()
        .enumerate()
        .map(|(i, pr)| sample_primitive(pr, &mut rng_for(seed, i as u64)))
        .collect();
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    for p in parts {
        positions.extend(p.positions);
        normals.extend(p.normals);
    }
    PointCloud::new(positions)?.with_normals(normals)
}

/// Assign each point to its nearest sensor (lowest index on ties) and add
/// isotropic Gaussian noise. Noisy output carries no normals; the analytic
/// normals no longer describe the perturbed samples.
pub fn simulate_scans(cloud: &PointCloud, scan: &ScanSpec, seed: u64) -> Result<PointCloud> {
    scan.validate()?;
    let sensors: Vec<Point3> = scan.sensors.iter().map(|&s| Point3::from_array(s)).collect();
    let origins: Vec<Point3> = cloud
        .positions()
        .iter()
        .map(|&p| {
            let mut best = 0;
            for (i, s) in sensors.iter().enumerate().skip(1) {
                if p.dist_squared(*s) < p.dist_squared(sensors[best]) {
                    best = i;
                }
            }
            sensors[best]
        })
        .collect();
    let mut positions = cloud.positions().to_vec();
    let mut normals = cloud.normals().map(|n| n.to_vec());
    if scan.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, scan.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = rng_for(seed, u64::MAX);
        for p in &mut positions {
            *p = *p
                + Point3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                );
        }
        normals = None;
    }
    let mut out = PointCloud::new(positions)?.with_sensor_origins(origins)?;
    out.set_normals(normals)?;
    Ok(out)
}

/// Remove `ceil(fraction * groups)` whole scans, where a scan is the set of
/// points sharing one sensor origin.
pub fn apply_dropout(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::contract(format!(
            "dropout fraction {fraction} must be in [0, 1)"
        )));
    }
    let origins = cloud
        .sensor_origins()
        .ok_or(Error::MissingData("dropout groups points by sensor origin"))?;
    let mut group_of = Vec::with_capacity(origins.len());
    let mut groups: HashMap<[u64; 3], usize> = HashMap::new();
    for o in origins {
        let key = [o.x.to_bits(), o.y.to_bits(), o.z.to_bits()];
        let next = groups.len();
        group_of.push(*groups.entry(key).or_insert(next));
    }
    let n_groups = groups.len();
    // tolerance keeps e.g. 0.9 * 10 from rounding up to 10
    let n_remove = ((fraction * n_groups as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut rng_for(seed, u64::MAX - 1));
    let mut removed = vec![false; n_groups];
    for &g in &order[..n_remove.min(n_groups)] {
        removed[g] = true;
    }
    Ok(cloud.filter_indices(|i| !removed[group_of[i]]))
}

/// Default augmentation jitter, in voxels.
pub const DEFAULT_JITTER_VOXELS: f64 = 0.25;

/// Default jitter sigma in meters for grids of `voxel_size`.
pub fn default_jitter(voxel_size: f64) -> f64 {
    DEFAULT_JITTER_VOXELS * voxel_size
}

/// Random rigid-plus-scale transform used by [`augment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmentation {
    /// Rotation about +z, radians in `[0, 2 pi)`.
    pub angle: f64,
    /// Uniform scale in `[0.8, 1.2]` about the centroid.
    pub scale: f64,
}

impl Augmentation {
    pub fn sample(seed: u64) -> Self {
        let mut rng = rng_for(seed, u64::MAX - 2);
        Augmentation {
            angle: rng.random_range(0.0..TAU),
            scale: rng.random_range(0.8..=1.2),
        }
    }

    fn rotate(&self, v: Point3) -> Point3 {
        let (s, c) = self.angle.sin_cos();
        Point3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    /// Apply to a position, about `center`.
    pub fn apply(&self, p: Point3, center: Point3) -> Point3 {
        center + self.rotate(p - center) * self.scale
    }
}

/// Random rotation about z, random scale about the centroid and per-point
/// Gaussian jitter of scale `jitter_sigma`. Normals are rotated; sensor
/// origins follow the same transform without jitter.
pub fn augment(cloud: &PointCloud, seed: u64, jitter_sigma: f64) -> Result<PointCloud> {
    if jitter_sigma.is_nan() || jitter_sigma < 0.0 {
        return Err(Error::contract(format!("jitter sigma {jitter_sigma} must be >= 0")));
    }
    let Some(center) = cloud.centroid() else {
        return Ok(cloud.clone());
    };
    let aug = Augmentation::sample(seed);
    let mut rng = rng_for(seed, u64::MAX - 3);
    let jitter = Normal::new(0.0, jitter_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let positions = cloud
        .positions()
        .iter()
        .map(|&p| {
            let q = aug.apply(p, center);
            if jitter_sigma > 0.0 {
                q + Point3::new(
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                    jitter.sample(&mut rng),
                )
            } else {
                q
            }
        })
        .collect();
    let mut out = PointCloud::new(positions)?;
    out.set_normals(
        cloud
            .normals()
            .map(|ns| ns.iter().map(|n| n.and_then(|n| aug.rotate(n).normalized())).collect()),
    )?;
    out.set_sensor_origins(
        cloud
            .sensor_origins()
            .map(|os| os.iter().map(|&o| aug.apply(o, center)).collect()),
    )?;
    Ok(out)
}
