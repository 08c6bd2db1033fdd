//! Shared scenes and brute-force oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udfgrid::scenegen::{Primitive, ScanSpec, SceneSpec, Shape};
use udfgrid::{Point3, PointCloud};

pub const VOXEL: f64 = 0.05;
/// 16 points per 5 cm voxel face.
pub const DENSITY: f64 = 16.0 / (VOXEL * VOXEL);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn plane(corner: [f64; 3], edge_u: [f64; 3], edge_v: [f64; 3], density: f64) -> Primitive {
    Primitive::new(Shape::Plane { corner, edge_u, edge_v }, density)
}

/// Ground plane, a floating sphere and a box standing on the ground.
pub fn plane_sphere_box() -> SceneSpec {
    SceneSpec {
        primitives: vec![
            plane([0.0, 0.0, 0.0], [1.6, 0.0, 0.0], [0.0, 1.6, 0.0], DENSITY),
            Primitive::new(
                Shape::Sphere {
                    center: [0.5, 0.5, 0.5],
                    radius: 0.25,
                },
                DENSITY,
            ),
            Primitive::new(
                Shape::Box {
                    min: [0.95, 0.95, 0.0],
                    max: [1.35, 1.3, 0.35],
                },
                DENSITY,
            ),
        ],
        scan: None,
    }
}

/// Four sensors above the corners of the ground plane.
pub fn four_sensors(noise_sigma: f64) -> ScanSpec {
    ScanSpec {
        sensors: vec![[0.2, 0.2, 1.5], [1.4, 0.2, 1.5], [0.2, 1.4, 1.5], [1.4, 1.4, 1.5]],
        noise_sigma,
        dropout_fraction: 0.0,
    }
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, lattice: bool) -> PointCloud {
    let pts = (0..n)
        .map(|_| {
            if lattice {
                // few distinct coordinates: many exact ties and duplicates
                Point3::new(
                    rng.random_range(0..8) as f64 * 0.125,
                    rng.random_range(0..8) as f64 * 0.125,
                    rng.random_range(0..8) as f64 * 0.125,
                )
            } else {
                Point3::new(rng.random(), rng.random(), rng.random())
            }
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

pub fn random_unit(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if let Some(n) = v.normalized().filter(|_| v.norm() > 0.1 && v.norm() <= 1.0) {
            return n;
        }
    }
}

/// `(id, d2)` of every point, sorted by `(d2, id)`.
pub fn brute_sorted(points: &[Point3], q: Point3) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, q.dist_squared(*p)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

pub fn brute_radius(points: &[Point3], q: Point3, r: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| q.dist_squared(**p) <= r * r)
        .map(|(i, _)| i)
        .collect()
}

pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * (values.len() - 1) as f64).round() as usize;
    values[rank]
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
