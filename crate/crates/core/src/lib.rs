//! Truncated signed and unsigned distance fields on sparse voxel grids.
//!
//! The pipeline runs point cloud -> distance field -> point cloud: estimate
//! normals where a signed or point-to-plane field needs them, evaluate one of
//! eight field definitions at the lattice nodes near the input, optionally
//! flip the values, then extract points back and score them with the Chamfer
//! distance.
//!
//! ```no_run
//! use udfgrid::{compute_grid, extract, chamfer, DFKind, DFParams, GridSpec, PointCloud};
//! # fn main() -> udfgrid::Result<()> {
//! let cloud: PointCloud = udfgrid::io::read_ply("scene.ply".as_ref())?;
//! let spec = GridSpec::around(&cloud, 0.05, 3)?;
//! let grid = compute_grid(&cloud, &spec, DFKind::Uwed, &DFParams::for_voxel_size(0.05)?)?;
//! let back = extract(&grid)?;
//! println!("CD = {} m", chamfer(&back, &cloud)?);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod dfield;
pub mod error;
pub mod eval;
pub mod extract;
pub mod geom;
pub mod grid;
pub mod io;
pub mod normals;
pub mod scenegen;
pub mod spatial;

pub use dfield::{build_pyramid, candidate_voxels, compute_grid, FieldEvaluator};
pub use error::{Error, Result};
pub use eval::{chamfer, chamfer_bruteforce, roundtrip, sigma_sweep, RoundtripReport};
pub use extract::{extract, extract_sdf, extract_udf};
pub use geom::{Point3, PointCloud};
pub use grid::{DFKind, DFParams, GridSpec, SparseDFGrid, VoxelIndex, TRUNCATION_VOXELS};
pub use normals::{estimate_normals, orient_normals};
pub use spatial::{build_index, Neighbor, SpatialIndex};
